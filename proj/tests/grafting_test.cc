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
#include <vector>

#include "acomm/engine.h"
#include "acomm/error.h"
#include "acomm/grafting.h"
#include "acomm/rng.h"
#include "doctest.h"

namespace acomm {
namespace {

CombineSpec Spec(CombineKind kind, GraftScope scope = GraftScope::kLastToken) {
  CombineSpec s;
  s.kind = kind;
  s.scope = scope;
  return s;
}

std::vector<float> RandomVec(Rng& rng, int n) {
  std::vector<float> v(n);
  for (float& x : v) x = static_cast<float>(rng.Uniform(-2.0, 2.0));
  return v;
}

ResidualState RandomState(Rng& rng, int t, int d, int layer) {
  ResidualState s{Matrix(t, d), layer};
  for (float& x : s.values.flat()) x = static_cast<float>(rng.Uniform(-1.0, 1.0));
  return s;
}

TEST_SUITE("grafting") {

TEST_CASE("equal-width combine functions") {
  const std::vector<float> a{1, 2}, b{3, 4};
  CHECK(Combine(a, b, Spec(CombineKind::kSum)) == std::vector<float>{4, 6});
  const std::vector<float> a2{2, 4}, b2{4, 8};
  CHECK(Combine(a2, b2, Spec(CombineKind::kMean)) == std::vector<float>{3, 6});
  const std::vector<float> b3{9, 9};
  CHECK(Combine(a, b3, Spec(CombineKind::kReplace)) == std::vector<float>{1, 2});
}

TEST_CASE("mismatched widths follow the trailing-entry rule") {
  const std::vector<float> a{1, 2, 3}, b{10, 20};
  CHECK(Combine(a, b, Spec(CombineKind::kSum)) == std::vector<float>{12, 23});
  const std::vector<float> a2{1, 2}, b2{10, 20, 30};
  CHECK(Combine(a2, b2, Spec(CombineKind::kReplace)) == std::vector<float>{10, 1, 2});
  CHECK(Combine(a2, b2, Spec(CombineKind::kMean)) == std::vector<float>{10, 10.5f, 16});
}

TEST_CASE("output width and leading-entry preservation over a dimension grid") {
  Rng rng(5);
  for (int da = 1; da <= 8; ++da) {
    for (int db = 1; db <= 8; ++db) {
      const auto a = RandomVec(rng, da), b = RandomVec(rng, db);
      for (CombineKind kind : {CombineKind::kSum, CombineKind::kMean, CombineKind::kReplace}) {
        const auto out = Combine(a, b, Spec(kind));
        REQUIRE(static_cast<int>(out.size()) == db);
        const int lead = std::max(db - std::min(da, db), 0);
        for (int i = 0; i < lead; ++i) CHECK(out[i] == b[i]);
      }
    }
  }
}

TEST_CASE("mean idempotence and zero-sum identity") {
  Rng rng(6);
  for (int trial = 0; trial < 50; ++trial) {
    const auto a = RandomVec(rng, 7);
    CHECK(Combine(a, a, Spec(CombineKind::kMean)) == a);
    const std::vector<float> zero(7, 0.0f);
    CHECK(Combine(zero, a, Spec(CombineKind::kSum)) == a);
  }
}

TEST_CASE("pre-map is applied before combining") {
  CombineSpec s = Spec(CombineKind::kReplace);
  // d_B = 3, d_A = 2
  s.pre_map = MapMatrix{Matrix(3, 2, {1, 0, 0, 1, 1, 1})};
  const std::vector<float> a{2, 5}, b{0, 0, 0};
  CHECK(Combine(a, b, s) == std::vector<float>{2, 5, 7});
  s.kind = CombineKind::kSum;
  const std::vector<float> b2{1, 1, 1};
  CHECK(Combine(a, b2, s) == std::vector<float>{3, 6, 8});
  s.pre_map = MapMatrix{Matrix(2, 2, {1, 0, 0, 1})};
  CHECK_THROWS_AS(Combine(a, b2, s), InvalidArgument);
}

TEST_CASE("combine rejects non-finite input and replace over all tokens") {
  const std::vector<float> a{1, NAN}, b{1, 2};
  CHECK_THROWS_AS(Combine(a, b, Spec(CombineKind::kSum)), InvalidArgument);
  CHECK_THROWS_AS(Spec(CombineKind::kReplace, GraftScope::kAllTokens).Validate(),
                  InvalidArgument);
}

TEST_CASE("last-token graft touches only the last row") {
  Rng rng(7);
  const ResidualState ha = RandomState(rng, 4, 6, 2);
  const ResidualState hb = RandomState(rng, 5, 6, 3);
  const ResidualState out = Graft(ha, hb, Spec(CombineKind::kReplace));
  CHECK(out.layer == 3);
  for (int r = 0; r < 4; ++r) CHECK(std::ranges::equal(out.values.row(r), hb.values.row(r)));
  CHECK(std::ranges::equal(out.values.row(4), ha.values.row(3)));
  CHECK(Graft(hb, hb, Spec(CombineKind::kReplace)) == hb);
}

TEST_CASE("all-token graft aligns sequences from the end") {
  Rng rng(8);
  const ResidualState ha = RandomState(rng, 3, 4, 1);
  const ResidualState hb = RandomState(rng, 5, 4, 1);
  const ResidualState out = Graft(ha, hb, Spec(CombineKind::kSum, GraftScope::kAllTokens));
  for (int r = 0; r < 2; ++r) CHECK(std::ranges::equal(out.values.row(r), hb.values.row(r)));
  for (int r = 2; r < 5; ++r)
    for (int c = 0; c < 4; ++c) CHECK(out.values(r, c) == hb.values(r, c) + ha.values(r - 2, c));

  // Longer source: only the last t_B rows of A are used.
  const ResidualState long_a = RandomState(rng, 7, 4, 1);
  const ResidualState out2 = Graft(long_a, hb, Spec(CombineKind::kMean, GraftScope::kAllTokens));
  for (int r = 0; r < 5; ++r)
    for (int c = 0; c < 4; ++c)
      CHECK(out2.values(r, c) == (hb.values(r, c) + long_a.values(r + 2, c)) / 2.0f);
}

TEST_CASE("graft hook wires into the decoder at the target layer") {
  Rng rng(9);
  const ResidualState ha = RandomState(rng, 2, 4, 1);
  GraftConfig cfg;
  cfg.source_layer = 1;
  cfg.target_layer = 2;
  const GraftHook hook = MakeGraftHook(ha, cfg);
  CHECK(hook.layer == 2);
  ResidualState hb = RandomState(rng, 3, 4, 2);
  const ResidualState before = hb;
  hook.apply(hb);
  CHECK(std::ranges::equal(hb.values.row(2), ha.values.row(1)));
  CHECK(std::ranges::equal(hb.values.row(0), before.values.row(0)));
  cfg.source_layer = 0;
  CHECK_THROWS_AS(MakeGraftHook(ha, cfg), InvalidArgument);
}

TEST_CASE("name parsing") {
  CHECK(ParseCombineKind("mean") == CombineKind::kMean);
  CHECK(ParseGraftScope("all") == GraftScope::kAllTokens);
  CHECK_THROWS_AS(ParseCombineKind("max"), InvalidArgument);
}

}  // TEST_SUITE

}  // namespace
}  // namespace acomm
