// Copyright 2026 The acomm Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <algorithm>
#include <cmath>
#include <filesystem>

#include "acomm/engine.h"
#include "acomm/error.h"
#include "acomm/mapper.h"
#include "acomm/rng.h"
#include "doctest.h"
#include "oracles.h"
#include "synthetic.h"

namespace acomm {
namespace {

Matrix RandomMatrix(Rng& rng, int r, int c, double scale = 1.0) {
  Matrix m(r, c);
  for (float& v : m.flat()) v = static_cast<float>(rng.Uniform(-scale, scale));
  return m;
}

// Naive double loop over ||z - W y||^2.
double BruteForceMse(const Matrix& w, const PairDataset& d) {
  double total = 0.0;
  for (int i = 0; i < d.size(); ++i) {
    for (int o = 0; o < w.rows(); ++o) {
      double wy = 0.0;
      for (int c = 0; c < w.cols(); ++c) wy += static_cast<double>(w(o, c)) * d.inputs(i, c);
      const double diff = d.targets(i, o) - wy;
      total += diff * diff;
    }
  }
  return total / d.size();
}

using testing::FiniteDifferenceGradient;
using testing::MaxRelativeError;

TEST_SUITE("mapper") {

TEST_CASE("mse loss examples") {
  PairDataset d{Matrix(1, 2, {1, 0}), Matrix(1, 2, {0, 0})};
  const MapMatrix identity{Matrix(2, 2, {1, 0, 0, 1})};
  CHECK(MseLoss(identity, d) == 1.0);

  Rng rng(1);
  const Matrix w = RandomMatrix(rng, 3, 4);
  PairDataset exact{RandomMatrix(rng, 5, 4), Matrix(5, 3)};
  for (int i = 0; i < 5; ++i)
    for (int o = 0; o < 3; ++o) {
      double s = 0.0;
      for (int c = 0; c < 4; ++c) s += static_cast<double>(w(o, c)) * exact.inputs(i, c);
      exact.targets(i, o) = static_cast<float>(s);
    }
  CHECK(MseLoss(MapMatrix{w}, exact) < 1e-12);

  const PairDataset random{RandomMatrix(rng, 6, 4), RandomMatrix(rng, 6, 3)};
  CHECK(MseLoss(MapMatrix{w}, random) == doctest::Approx(BruteForceMse(w, random)).epsilon(1e-12));
  CHECK_THROWS_AS(MseLoss(MapMatrix{Matrix(2, 4)}, random), InvalidArgument);
}

TEST_CASE("gradient examples") {
  PairDataset d{Matrix(1, 2, {1, 0}), Matrix(1, 2, {1, 0})};
  const Matrix g = LossGradient(MapMatrix{Matrix(2, 2)}, d);
  CHECK(g == Matrix(2, 2, {-2, 0, 0, 0}));
  const MapMatrix identity{Matrix(2, 2, {1, 0, 0, 1})};
  CHECK(LossGradient(identity, d) == Matrix(2, 2));
}

TEST_CASE("analytic gradient matches central finite differences") {
  Rng rng(2);
  for (int trial = 0; trial < 10; ++trial) {
    const PairDataset d{RandomMatrix(rng, 8, 3), RandomMatrix(rng, 8, 4)};
    const MapMatrix w{RandomMatrix(rng, 4, 3)};
    CHECK(MaxRelativeError(LossGradient(w, d), FiniteDifferenceGradient(w, d, 1e-3f)) < 1e-4);
  }
}

TEST_CASE("training converges on synthetic linear data") {
  const PairDataset d = testing::SyntheticLinear(3072, 48, 64, 7);
  TrainOptions opt;
  opt.seed = 3;
  const TrainResult r = TrainMap(d, opt);
  CHECK(r.report.epoch_losses.size() == 10);
  CHECK(r.report.final_loss < 1e-3);
  for (std::size_t e = 1; e < r.report.epoch_losses.size(); ++e)
    CHECK(r.report.epoch_losses[e] <= r.report.epoch_losses[e - 1] * 1.05);
  CHECK(r.report.final_loss == MseLoss(r.map, d));
}

TEST_CASE("zero epochs returns the Xavier init") {
  const PairDataset d = testing::SyntheticLinear(10, 5, 6, 1);
  TrainOptions opt;
  opt.epochs = 0;
  opt.seed = 77;
  const TrainResult r = TrainMap(d, opt);
  CHECK(r.report.epoch_losses.empty());
  CHECK(r.map == XavierInit(6, 5, 77));
  const double bound = std::sqrt(6.0 / 11.0);
  for (float v : r.map.values.flat()) CHECK(std::abs(v) <= bound);
}

TEST_CASE("training is deterministic per seed and uses the short batch") {
  const PairDataset d = testing::SyntheticLinear(70, 6, 5, 2);
  TrainOptions opt;
  opt.seed = 9;
  opt.epochs = 3;
  CHECK(TrainMap(d, opt).map == TrainMap(d, opt).map);
  opt.seed = 10;
  CHECK_FALSE(TrainMap(d, opt).map == TrainMap(d, TrainOptions{.epochs = 3, .seed = 9}).map);
  CHECK_THROWS_AS(TrainMap(PairDataset{Matrix(0, 6), Matrix(0, 5)}, opt), InvalidArgument);
}

TEST_CASE("first Adam step opposes the gradient") {
  const PairDataset d = testing::SyntheticLinear(32, 4, 3, 5);
  TrainOptions opt;
  opt.seed = 4;
  opt.epochs = 1;
  opt.batch_size = 32;  // one full batch, so one step
  const MapMatrix init = XavierInit(3, 4, 4);
  const Matrix grad = LossGradient(init, d);
  const TrainResult r = TrainMap(d, opt);
  for (std::size_t i = 0; i < grad.size(); ++i) {
    const double delta = r.map.values.flat()[i] - init.values.flat()[i];
    if (grad.flat()[i] > 0) CHECK(delta < 0);
    if (grad.flat()[i] < 0) CHECK(delta > 0);
  }
}

TEST_CASE("activation similarity") {
  // Columns are the feature directions; these are N=2 by d=1.
  CHECK(ActivationSimilarity(Matrix(2, 1, {1, 0}), Matrix(2, 1, {1, 0})) == 1.0);
  CHECK(ActivationSimilarity(Matrix(2, 1, {1, 0}), Matrix(2, 1, {0, 1})) == 0.0);
  CHECK(ActivationSimilarity(Matrix(2, 2, {1, 2, 2, 4}), Matrix(2, 1, {3, 6})) ==
        doctest::Approx(1.0).epsilon(1e-15));
  CHECK_THROWS_AS(ActivationSimilarity(Matrix(2, 2), Matrix(2, 2, 1.0f)), InvalidArgument);
  CHECK_THROWS_AS(ActivationSimilarity(Matrix(2, 2, 1.0f), Matrix(3, 2, 1.0f)), InvalidArgument);

  Rng rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 1 + static_cast<int>(rng.Below(6));
    const Matrix x = RandomMatrix(rng, n, 1 + static_cast<int>(rng.Below(5)));
    const Matrix y = RandomMatrix(rng, n, 1 + static_cast<int>(rng.Below(5)));
    const double s = ActivationSimilarity(x, y);
    CHECK(s >= 0.0);
    CHECK(s <= 1.0 + 1e-12);
    CHECK(s == doctest::Approx(ActivationSimilarity(y, x)).epsilon(1e-12));
    Matrix x3 = x;
    for (float& v : x3.flat()) v *= 3.0f;
    CHECK(s == doctest::Approx(ActivationSimilarity(x3, y)).epsilon(1e-6));
  }
}

TEST_CASE("pair collection") {
  ModelConfig c;
  c.n_layers = 2;
  c.model_dim = 8;
  c.n_heads = 2;
  c.key_size = 4;
  c.ffn_size = 8;
  c.max_seq_len = 64;
  const Model a = InitRandomModel(c, 1);
  ModelConfig c2 = c;
  c2.model_dim = 12;
  c2.n_heads = 3;
  const Model b = InitRandomModel(c2, 2);

  const std::vector<std::string> one{"only sentence"};
  const PairDataset d1 = CollectPairs(a, b, one, 1, 2);
  CHECK(d1.size() == 1);
  CHECK(d1.inputs.cols() == 8);
  CHECK(d1.targets.cols() == 12);

  const PairDataset same = CollectPairs(a, a, one, 2, 2);
  CHECK(same.inputs == same.targets);

  std::vector<std::string> sentences;
  for (int i = 0; i < 8; ++i) sentences.push_back("sentence number " + std::to_string(i));
  const PairDataset d = CollectPairs(a, b, sentences, 1, 2);
  for (int i = 0; i < 8; ++i) {
    const ResidualState ya = ForwardUntil(a, Tokenize(sentences[i], 64), 1);
    const ResidualState zb = ForwardUntil(b, Tokenize(sentences[i], 64), 2);
    CHECK(std::ranges::equal(d.inputs.row(i), ya.last_row()));
    CHECK(std::ranges::equal(d.targets.row(i), zb.last_row()));
  }
  const std::vector<std::string> too_long{std::string(80, 'x')};
  CHECK_THROWS_AS(CollectPairs(a, b, too_long, 1, 1), ContextOverflow);
}

TEST_CASE("map files carry the model pairing") {
  ModelConfig c;
  c.n_layers = 1;
  c.max_seq_len = 16;
  const Model a = InitRandomModel(c, 1), b = InitRandomModel(c, 2), other = InitRandomModel(c, 3);
  MapFile f{XavierInit(32, 32, 5), ModelDigest(a), ModelDigest(b), 1, 1};
  const auto path = std::filesystem::temp_directory_path() / "acomm_map_test.acwt";
  SaveMap(path, f);
  const MapFile back = LoadMap(path);
  CHECK(back.map == f.map);
  CHECK(back.model_a_digest == f.model_a_digest);
  CHECK_NOTHROW(CheckMapPairing(back, a, b));
  CHECK_THROWS_AS(CheckMapPairing(back, a, other), InvalidArgument);
  std::filesystem::remove(path);
}

}  // TEST_SUITE

}  // namespace
}  // namespace acomm
