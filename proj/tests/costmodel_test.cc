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

#include <boost/multiprecision/cpp_int.hpp>
#include <string>

#include "acomm/costmodel.h"
#include "acomm/error.h"
#include "doctest.h"

namespace acomm {
namespace {

using Big = boost::multiprecision::cpp_int;

// Written out term by term, independently of the library.
Big OracleLayer(const Architecture& a, Big n) {
  return 8 * n * a.model_dim * a.key_size * a.n_heads +
         4 * n * n * a.key_size * a.n_heads + 3 * Big(a.n_heads) * n * n +
         4 * n * a.model_dim * a.ffn_size;
}

Big OracleNl(const CostParams& p) {
  const Architecture& a = p.arch;
  Big first = Big(p.message_tokens) *
              (4 * Big(p.prompt_tokens) * a.vocab_size * a.model_dim +
               Big(a.n_layers) * OracleLayer(a, p.prompt_tokens));
  const Big ext = Big(p.prompt_tokens) + p.message_tokens;
  Big second = Big(p.output_tokens) *
               (4 * ext * a.vocab_size * a.model_dim + Big(a.n_layers) * OracleLayer(a, ext));
  return first + second;
}

Big OracleAc(const CostParams& p) {
  const Architecture& a = p.arch;
  const Big P = p.prompt_tokens;
  Big out = 2 * P * a.vocab_size * a.model_dim + Big(p.graft_layer) * OracleLayer(a, P) +
            Big(p.output_tokens) *
                (4 * P * a.vocab_size * a.model_dim + Big(a.n_layers) * OracleLayer(a, P));
  out += p.map_used ? 2 * Big(p.dim_a) * p.dim_b : Big(a.model_dim);
  return out;
}

std::string Str(const Big& b) { return b.str(); }

CostParams HandCase() {
  CostParams p;
  p.arch = Architecture{1, 1, 2, 4, 2, 3};
  p.prompt_tokens = 1;
  p.message_tokens = 1;
  p.output_tokens = 1;
  p.graft_layer = 1;
  return p;
}

Architecture Preset(const char* name) { return *ArchitecturePreset(name); }

TEST_SUITE("costmodel") {

TEST_CASE("hand computed case") {
  const CostParams p = HandCase();
  CHECK(FlopsNl(p) == 319);
  CHECK(FlopsAc(p) == 188);
  CHECK(Str(OracleNl(p)) == "319");
  CHECK(Str(OracleAc(p)) == "188");
  const CostReport r = MakeCostReport(p, p.arch);
  REQUIRE(r.ratio.has_value());
  CHECK(*r.ratio == doctest::Approx(188.0 / 319.0));
  // Single forward of the hand architecture over one token, one output.
  CHECK(FlopsSingleForward(p.arch, 1, 1) == 99);
  CHECK(*r.normalized_nl == doctest::Approx(319.0 / 99.0));
}

TEST_CASE("degenerate cases") {
  CostParams p = HandCase();
  p.message_tokens = 0;
  p.output_tokens = 0;
  CHECK(FlopsNl(p) == 0);
  CHECK_FALSE(MakeCostReport(p, p.arch).ratio.has_value());

  p.arch = Preset("llama8b");
  p.prompt_tokens = 256;
  p.graft_layer = 0;
  CHECK(FlopsAc(p) == FlopCount(2) * 256 * 128256 * 4096 + 4096);
  CHECK(FlopsSingleForward(p.arch, 256, 0) == 0);

  p.graft_layer = 33;
  CHECK_THROWS_AS(FlopsAc(p), InvalidArgument);
  CHECK_THROWS_AS(FlopsNl(p), InvalidArgument);
}

TEST_CASE("map term toggles by exactly 2 d_A d_B - D") {
  CostParams p;
  p.arch = Preset("llama8b");
  p.prompt_tokens = p.message_tokens = p.output_tokens = 256;
  p.graft_layer = 26;
  p.dim_a = 3072;
  p.dim_b = 4096;
  const FlopCount off = FlopsAc(p);
  p.map_used = true;
  const FlopCount on = FlopsAc(p);
  CHECK(on - off == FlopCount(2) * 3072 * 4096 - 4096);
  CHECK(ToString(on) == Str(OracleAc(p)));
}

TEST_CASE("8B-like setting matches a big-integer oracle") {
  CostParams p;
  p.arch = Preset("llama8b");
  p.prompt_tokens = p.message_tokens = p.output_tokens = 256;
  p.graft_layer = 26;
  CHECK(ToString(FlopsNl(p)) == Str(OracleNl(p)));
  CHECK(ToString(FlopsAc(p)) == Str(OracleAc(p)));

  p.message_tokens = 512;
  p.output_tokens = 64;
  const CostReport r = MakeCostReport(p, Preset("llama1b"));
  CHECK(ToString(r.nl_flops) == "2544969986342912");
  CHECK(ToString(r.ac_flops) == "232908186980352");
  CHECK(*r.ratio < 0.25);
}

TEST_CASE("ac dominates nl on the grid") {
  int points = 0;
  for (const char* name : {"toy", "llama1b", "llama3b", "llama8b"}) {
    const Architecture a = Preset(name);
    for (std::uint64_t P : {16, 256})
      for (std::uint64_t M : {8, 256})
        for (std::uint64_t T : {8, 256})
          for (std::uint64_t k : {a.n_layers / 2, a.n_layers}) {
            CostParams p;
            p.arch = a;
            p.prompt_tokens = P;
            p.message_tokens = M;
            p.output_tokens = T;
            p.graft_layer = k;
            CHECK_MESSAGE(FlopsAc(p) < FlopsNl(p), name, " P=", P, " M=", M, " T=", T, " k=", k);
            ++points;
          }
  }
  CHECK(points == 64);
}

TEST_CASE("monotonicity, linearity and reduction") {
  CostParams base;
  base.arch = Preset("llama3b");
  base.prompt_tokens = 20;
  base.message_tokens = 7;
  base.output_tokens = 5;
  base.graft_layer = 10;
  for (int step = 1; step <= 5; ++step) {
    CostParams p = base;
    p.prompt_tokens += step;
    CHECK(FlopsNl(p) > FlopsNl(base));
    CHECK(FlopsAc(p) > FlopsAc(base));
    p = base;
    p.message_tokens += step;
    CHECK(FlopsNl(p) > FlopsNl(base));
    p = base;
    p.output_tokens += step;
    CHECK(FlopsNl(p) > FlopsNl(base));
    CHECK(FlopsAc(p) > FlopsAc(base));
    p = base;
    p.graft_layer += step;
    CHECK(FlopsAc(p) > FlopsAc(base));
  }

  CostParams t0 = base, t1 = base, t2 = base;
  t0.output_tokens = 0;
  t2.output_tokens = 2 * t1.output_tokens;
  CHECK(FlopsNl(t2) - FlopsNl(t1) == FlopsNl(t1) - FlopsNl(t0));

  CostParams m0 = base;
  m0.message_tokens = 0;
  CHECK(FlopsNl(m0) == FlopsSingleForward(base.arch, base.prompt_tokens, base.output_tokens));
}

TEST_CASE("presets and overflow") {
  CHECK(Preset("toy").n_layers == 4);
  CHECK(Preset("llama1b").vocab_size == 128256);
  CHECK_FALSE(ArchitecturePreset("gpt9").has_value());
  CostParams p;
  p.arch = Architecture{1, 1, 1, 1, 1, 1};
  p.prompt_tokens = ~0ull;
  p.message_tokens = ~0ull;
  p.output_tokens = 0;
  CHECK_THROWS_AS(FlopsNl(p), InvalidArgument);
  CHECK(ToString(FlopCount(0)) == "0");
}

}  // TEST_SUITE

}  // namespace
}  // namespace acomm
