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

#include "acomm/mapper.h"

#include <cmath>
#include <numeric>

#include "acomm/acwt.h"
#include "acomm/engine.h"
#include "acomm/error.h"
#include "acomm/rng.h"

namespace acomm {
namespace {

void CheckShapes(int w_rows, int w_cols, const PairDataset& data) {
  if (data.inputs.rows() != data.targets.rows()) {
    throw InvalidArgument("pair dataset: input and target row counts differ");
  }
  if (w_cols != data.inputs.cols() || w_rows != data.targets.cols()) {
    throw InvalidArgument("mapping matrix is " + std::to_string(w_rows) + "x" +
                          std::to_string(w_cols) + " but data is d_A=" +
                          std::to_string(data.inputs.cols()) + ", d_B=" +
                          std::to_string(data.targets.cols()));
  }
}

// Residual r = W y - z for one row, W given as row-major doubles.
void Residual(const std::vector<double>& w, int d_out, int d_in,
              std::span<const float> y, std::span<const float> z,
              std::vector<double>& r) {
  for (int o = 0; o < d_out; ++o) {
    double acc = 0.0;
    const double* wr = w.data() + static_cast<std::size_t>(o) * d_in;
    for (int i = 0; i < d_in; ++i) acc += wr[i] * y[i];
    r[o] = acc - z[o];
  }
}

std::vector<double> ToDouble(const Matrix& m) {
  return {m.values().begin(), m.values().end()};
}

// Sum of squared residuals over `rows`; writes (2/|rows|) sum r y^T to grad
// when non-null.
double Accumulate(const std::vector<double>& w, int d_out, int d_in,
                  const PairDataset& data, std::span<const int> rows,
                  std::vector<double>* grad) {
  std::vector<double> r(d_out);
  double sq = 0.0;
  if (grad) grad->assign(static_cast<std::size_t>(d_out) * d_in, 0.0);
  for (int idx : rows) {
    const auto y = data.inputs.row(idx);
    Residual(w, d_out, d_in, y, data.targets.row(idx), r);
    for (int o = 0; o < d_out; ++o) sq += r[o] * r[o];
    if (!grad) continue;
    for (int o = 0; o < d_out; ++o) {
      double* gr = grad->data() + static_cast<std::size_t>(o) * d_in;
      for (int i = 0; i < d_in; ++i) gr[i] += r[o] * y[i];
    }
  }
  if (grad) {
    const double scale = 2.0 / static_cast<double>(rows.size());
    for (double& g : *grad) g *= scale;
  }
  return sq;
}

std::vector<int> AllRows(const PairDataset& data) {
  std::vector<int> rows(data.size());
  std::iota(rows.begin(), rows.end(), 0);
  return rows;
}

}  // namespace

PairDataset CollectPairs(const Model& model_a, const Model& model_b,
                         const std::vector<std::string>& sentences, int k, int j) {
  PairDataset data{Matrix(static_cast<int>(sentences.size()), model_a.config.model_dim),
                   Matrix(static_cast<int>(sentences.size()), model_b.config.model_dim)};
  for (int i = 0; i < static_cast<int>(sentences.size()); ++i) {
    const ResidualState a =
        ForwardUntil(model_a, Tokenize(sentences[i], model_a.config.max_seq_len), k);
    const ResidualState b =
        ForwardUntil(model_b, Tokenize(sentences[i], model_b.config.max_seq_len), j);
    std::ranges::copy(a.last_row(), data.inputs.row(i).begin());
    std::ranges::copy(b.last_row(), data.targets.row(i).begin());
  }
  return data;
}

double MseLoss(const MapMatrix& w, const PairDataset& data) {
  CheckShapes(w.dim_out(), w.dim_in(), data);
  if (data.size() == 0) throw InvalidArgument("mse of an empty dataset");
  const std::vector<int> rows = AllRows(data);
  return Accumulate(ToDouble(w.values), w.dim_out(), w.dim_in(), data, rows, nullptr) /
         data.size();
}

Matrix LossGradient(const MapMatrix& w, const PairDataset& data) {
  const std::vector<int> rows = AllRows(data);
  return LossGradient(w, data, rows);
}

Matrix LossGradient(const MapMatrix& w, const PairDataset& data, std::span<const int> rows) {
  CheckShapes(w.dim_out(), w.dim_in(), data);
  if (rows.empty()) throw InvalidArgument("gradient of an empty batch");
  std::vector<double> grad;
  Accumulate(ToDouble(w.values), w.dim_out(), w.dim_in(), data, rows, &grad);
  Matrix out(w.dim_out(), w.dim_in());
  for (std::size_t i = 0; i < grad.size(); ++i) out.flat()[i] = static_cast<float>(grad[i]);
  return out;
}

MapMatrix XavierInit(int dim_out, int dim_in, std::uint64_t seed) {
  if (dim_out < 1 || dim_in < 1) throw InvalidArgument("map dimensions must be >= 1");
  Rng rng(seed);
  const double bound = std::sqrt(6.0 / (dim_in + dim_out));
  MapMatrix w{Matrix(dim_out, dim_in)};
  for (float& v : w.values.flat()) v = static_cast<float>(rng.Uniform(-bound, bound));
  return w;
}

TrainResult TrainMap(const PairDataset& data, const TrainOptions& opt) {
  if (data.size() < 1) throw InvalidArgument("cannot train a map on an empty dataset");
  if (opt.epochs < 0 || opt.batch_size < 1 || !(opt.learning_rate > 0.0)) {
    throw InvalidArgument("invalid training hyperparameters");
  }
  if (!data.inputs.AllFinite() || !data.targets.AllFinite()) {
    throw InvalidArgument("pair dataset contains non-finite values");
  }
  const int d_out = data.targets.cols(), d_in = data.inputs.cols();
  CheckShapes(d_out, d_in, data);

  // Xavier and shuffles draw from separate streams of the same seed.
  MapMatrix init = XavierInit(d_out, d_in, opt.seed);
  Rng shuffle_rng(opt.seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<double> w = ToDouble(init.values);
  std::vector<double> m(w.size(), 0.0), v(w.size(), 0.0), grad;
  std::vector<int> order = AllRows(data);

  TrainReport report;
  report.options = opt;
  report.n = data.size();
  report.dim_in = d_in;
  report.dim_out = d_out;
  long long step = 0;
  for (int epoch = 0; epoch < opt.epochs; ++epoch) {
    shuffle_rng.Shuffle(order);
    double epoch_sq = 0.0;
    for (std::size_t start = 0; start < order.size(); start += opt.batch_size) {
      const std::size_t len = std::min<std::size_t>(opt.batch_size, order.size() - start);
      const std::span<const int> batch(order.data() + start, len);
      epoch_sq += Accumulate(w, d_out, d_in, data, batch, &grad);
      ++step;
      const double c1 = 1.0 - std::pow(opt.beta1, static_cast<double>(step));
      const double c2 = 1.0 - std::pow(opt.beta2, static_cast<double>(step));
      for (std::size_t i = 0; i < w.size(); ++i) {
        m[i] = opt.beta1 * m[i] + (1.0 - opt.beta1) * grad[i];
        v[i] = opt.beta2 * v[i] + (1.0 - opt.beta2) * grad[i] * grad[i];
        w[i] -= opt.learning_rate * (m[i] / c1) / (std::sqrt(v[i] / c2) + opt.adam_epsilon);
      }
    }
    report.epoch_losses.push_back(epoch_sq / data.size());
  }

  MapMatrix out{Matrix(d_out, d_in)};
  for (std::size_t i = 0; i < w.size(); ++i) out.values.flat()[i] = static_cast<float>(w[i]);
  report.final_loss = MseLoss(out, data);
  return {std::move(out), std::move(report)};
}

double ActivationSimilarity(const Matrix& x, const Matrix& y) {
  if (x.rows() != y.rows()) throw InvalidArgument("similarity: row counts differ");
  double xx = 0.0, yy = 0.0;
  for (float v : x.flat()) xx += static_cast<double>(v) * v;
  for (float v : y.flat()) yy += static_cast<double>(v) * v;
  if (xx == 0.0 || yy == 0.0) throw InvalidArgument("similarity: zero matrix");
  // ||Y^T X||_F^2, one (c_y, c_x) entry at a time.
  double cross = 0.0;
  for (int cy = 0; cy < y.cols(); ++cy) {
    for (int cx = 0; cx < x.cols(); ++cx) {
      double dot = 0.0;
      for (int r = 0; r < x.rows(); ++r) dot += static_cast<double>(y(r, cy)) * x(r, cx);
      cross += dot * dot;
    }
  }
  return cross / (xx * yy);
}

void SaveMap(const std::filesystem::path& path, const MapFile& file,
             const std::string& meta_json) {
  if (!file.map.values.AllFinite()) throw InvalidArgument("mapping matrix is not finite");
  nlohmann::json fields;
  fields["kind"] = "map";
  fields["model_a_digest"] = file.model_a_digest;
  fields["model_b_digest"] = file.model_b_digest;
  fields["source_layer"] = file.source_layer;
  fields["target_layer"] = file.target_layer;
  fields["meta"] = nlohmann::json::parse(meta_json);
  const acwt::TensorView view{"map.W",
                              {file.map.values.rows(), file.map.values.cols()},
                              file.map.values.flat()};
  acwt::WriteFileAtomic(path, acwt::Encode(fields, std::span(&view, 1)));
}

MapFile LoadMap(const std::filesystem::path& path) {
  const acwt::File f = acwt::Decode(acwt::ReadFileBytes(path));
  const acwt::Tensor& t = f.Find("map.W");
  if (t.shape.size() != 2) throw FormatError("map.W must be 2-D");
  if (!AllFinite(t.values)) throw FormatError("map.W has non-finite values");
  MapFile out;
  out.map.values = Matrix(static_cast<int>(t.shape[0]), static_cast<int>(t.shape[1]), t.values);
  try {
    out.model_a_digest = f.header.at("model_a_digest").get<std::string>();
    out.model_b_digest = f.header.at("model_b_digest").get<std::string>();
    out.source_layer = f.header.at("source_layer").get<int>();
    out.target_layer = f.header.at("target_layer").get<int>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("map header: ") + e.what());
  }
  return out;
}

void CheckMapPairing(const MapFile& file, const Model& model_a, const Model& model_b) {
  if (file.model_a_digest != ModelDigest(model_a) ||
      file.model_b_digest != ModelDigest(model_b)) {
    throw InvalidArgument("mapping matrix was trained for a different model pair (digest mismatch)");
  }
  if (file.map.dim_in() != model_a.config.model_dim ||
      file.map.dim_out() != model_b.config.model_dim) {
    throw InvalidArgument("mapping matrix shape does not match the model pair");
  }
}

}  // namespace acomm
