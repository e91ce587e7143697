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

#include <cmath>
#include <string>

#include "acomm/acwt.h"
#include "acomm/engine.h"
#include "acomm/error.h"
#include "acomm/model.h"
#include "acomm/rng.h"
#include "doctest.h"
#include "reference_model.h"

namespace acomm {
namespace {

ModelConfig Small() {
  ModelConfig c;
  c.n_layers = 3;
  c.n_heads = 2;
  c.key_size = 4;
  c.model_dim = 8;
  c.ffn_size = 16;
  c.max_seq_len = 64;
  return c;
}

TEST_SUITE("engine") {

TEST_CASE("tokenize maps bytes and prepends BOS") {
  CHECK(Tokenize("ab", 16) == TokenSeq{kBos, 97, 98});
  CHECK(Tokenize("", 16) == TokenSeq{kBos});
  CHECK(Detokenize(Tokenize("Greece", 16)) == "Greece");
  CHECK_THROWS_AS(Tokenize("abc", 3), ContextOverflow);
  CHECK(Tokenize("ab", 3).size() == 3);
}

TEST_CASE("tokenizer is a bijection on random byte strings") {
  Rng rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    std::string s(rng.Below(40), '\0');
    for (char& ch : s) ch = static_cast<char>(rng.Below(256));
    const TokenSeq ids = Tokenize(s, 64);
    REQUIRE(ids.size() == s.size() + 1);
    CHECK(ids[0] == kBos);
    CHECK(Detokenize(ids) == s);
  }
  CHECK_THROWS_AS(Detokenize(TokenSeq{kBos, kEos}), InvalidArgument);
}

TEST_CASE("config validation") {
  ModelConfig c = Small();
  CHECK_NOTHROW(c.Validate());
  c.model_dim = 9;
  CHECK_THROWS_AS(c.Validate(), InvalidArgument);
  c = Small();
  c.vocab_size = 258;
  CHECK_THROWS_AS(c.Validate(), InvalidArgument);
  c = Small();
  c.ln_epsilon = 0.0f;
  CHECK_THROWS_AS(c.Validate(), InvalidArgument);
}

TEST_CASE("layer 0 is token plus positional embedding exactly") {
  const Model m = InitRandomModel(Small(), 3);
  const TokenSeq ids = Tokenize("hello", 64);
  const ResidualState s = ForwardUntil(m, ids, 0);
  CHECK(s.layer == 0);
  for (int p = 0; p < s.n_tokens(); ++p)
    for (int c = 0; c < s.dim(); ++c)
      CHECK(s.values(p, c) ==
            m.weights.token_embedding(ids[p], c) + m.weights.positional_embedding(p, c));
}

TEST_CASE("zero weights give zero activations and uniform logits") {
  const ModelConfig c = Small();
  const Model m{c, ZeroWeights(c)};
  const TokenSeq ids = Tokenize("any prompt", 64);
  for (int j = 0; j <= c.n_layers; ++j) {
    const ResidualState s = ForwardUntil(m, ids, j);
    for (float v : s.values.flat()) CHECK(v == 0.0f);
  }
  const Matrix logits = ForwardFull(m, ids);
  for (float v : logits.flat()) CHECK(v == 0.0f);
}

TEST_CASE("forward matches the naive double-precision reference") {
  const Model m = InitRandomModel(Small(), 17);
  const TokenSeq ids = Tokenize("x", 64);
  const ResidualState s = ForwardUntil(m, ids, 2);
  CHECK(testing::RelError(s.values, testing::RefForwardUntil(m, ids, 2)) < 1e-5);

  const TokenSeq longer = Tokenize("activation grafting", 64);
  const Matrix logits = ForwardFull(m, longer);
  CHECK(testing::RelError(logits, testing::RefForwardFrom(m, testing::RefForwardUntil(m, longer, 0), 0)) < 1e-5);
}

TEST_CASE("split forward composes to the full forward") {
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    const Model m = InitRandomModel(Small(), seed);
    const TokenSeq ids = Tokenize("split " + std::to_string(seed), 64);
    const Matrix full = ForwardFull(m, ids);
    for (int j = 0; j <= m.config.n_layers; ++j) {
      CHECK(testing::RelError(ForwardFrom(m, ForwardUntil(m, ids, j), j), full) <= 1e-5);
    }
  }
}

TEST_CASE("forward_from at L applies only final norm and unembedding") {
  const Model m = InitRandomModel(Small(), 5);
  const ResidualState s = ForwardUntil(m, Tokenize("abc", 64), m.config.n_layers);
  const testing::Mat expected = testing::MatMul(
      testing::RefLayerNorm(testing::ToMat(s.values), m.weights.final_gain, m.weights.final_bias,
                            m.config.ln_epsilon),
      m.weights.unembedding);
  CHECK(testing::RelError(ForwardFrom(m, s, m.config.n_layers), expected) < 1e-5);
}

TEST_CASE("forward errors") {
  const Model m = InitRandomModel(Small(), 5);
  const TokenSeq ids = Tokenize("abc", 64);
  CHECK_THROWS_AS(ForwardUntil(m, ids, -1), InvalidArgument);
  CHECK_THROWS_AS(ForwardUntil(m, ids, 4), InvalidArgument);
  CHECK_THROWS_AS(ForwardUntil(m, TokenSeq{}, 0), InvalidArgument);
  CHECK_THROWS_AS(ForwardUntil(m, TokenSeq(65, 1), 0), ContextOverflow);
  const ResidualState s = ForwardUntil(m, ids, 1);
  CHECK_THROWS_AS(ForwardFrom(m, s, 2), InvalidArgument);
}

TEST_CASE("greedy decoding on a zero model emits token 0") {
  const ModelConfig c = Small();
  const Model m{c, ZeroWeights(c)};
  DecodingConfig dc;
  dc.max_new_tokens = 6;
  const DecodeResult r = Decode(m, Tokenize("hi", 64), dc);
  CHECK(r.tokens == TokenSeq(6, 0));
  CHECK_FALSE(r.hit_eos);
}

TEST_CASE("argmax ties resolve to the lowest id") {
  Rng rng(2);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<float> logits(20);
    for (float& v : logits) v = static_cast<float>(rng.Below(4));
    int expected = 0;
    for (int i = 0; i < 20; ++i)
      if (logits[i] > logits[expected]) expected = i;
    const float mx = logits[expected];
    for (int i = 0; i < expected; ++i) REQUIRE(logits[i] < mx);
    CHECK(ArgmaxLowestId(logits) == expected);
  }
}

TEST_CASE("nucleus filter") {
  const std::vector<double> probs = {0.5, 0.4, 0.05, 0.05};
  const NucleusSupport s = NucleusFilter(probs, 0.9);
  CHECK(s.ids == std::vector<int>{0, 1});
  CHECK(s.probs[0] == doctest::Approx(5.0 / 9.0).epsilon(1e-12));
  CHECK(s.probs[1] == doctest::Approx(4.0 / 9.0).epsilon(1e-12));

  const std::vector<double> p2 = {0.1, 0.2, 0.3, 0.4};
  const NucleusSupport full = NucleusFilter(p2, 1.0);
  CHECK(full.ids == std::vector<int>{3, 2, 1, 0});
  REQUIRE(full.probs.size() == 4);
  for (int i = 0; i < 4; ++i) CHECK(full.probs[i] == doctest::Approx(0.4 - 0.1 * i).epsilon(1e-12));
  const NucleusSupport top = NucleusFilter(p2, 0.01);
  CHECK(top.ids == std::vector<int>{3});
  CHECK(top.probs == std::vector<double>{1.0});

  const std::vector<double> tie = {0.25, 0.25, 0.25, 0.25};
  CHECK(NucleusFilter(tie, 0.5).ids == std::vector<int>{0, 1});

  const std::vector<double> bad = {0.5, 0.4};
  CHECK_THROWS_AS(NucleusFilter(bad, 0.9), InvalidArgument);
  CHECK_THROWS_AS(NucleusFilter(probs, 0.0), InvalidArgument);
}

TEST_CASE("nucleus decoding is reproducible per seed") {
  const Model m = InitRandomModel(Small(), 9);
  DecodingConfig dc;
  dc.strategy = Strategy::kNucleus;
  dc.top_p = 0.9;
  dc.max_new_tokens = 20;
  dc.seed = 1234;
  const TokenSeq prompt = Tokenize("seeded", 64);
  CHECK(Decode(m, prompt, dc).tokens == Decode(m, prompt, dc).tokens);
}

TEST_CASE("cached decoding equals full recomputation") {
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const Model m = InitRandomModel(Small(), 100 + seed);
    const TokenSeq prompt = Tokenize("cache check", 64);
    DecodingConfig dc;
    dc.max_new_tokens = 12;
    CHECK(Decode(m, prompt, dc).tokens == DecodeUncached(m, prompt, dc).tokens);
    dc.strategy = Strategy::kNucleus;
    dc.seed = seed;
    dc.temperature = 1.5;
    CHECK(Decode(m, prompt, dc).tokens == DecodeUncached(m, prompt, dc).tokens);
  }
}

TEST_CASE("graft hook runs once during cached prefill") {
  const Model m = InitRandomModel(Small(), 4);
  const TokenSeq prompt = Tokenize("hook", 64);
  int calls = 0;
  int seen_rows = 0;
  GraftHook hook{2, [&](ResidualState& s) {
                   ++calls;
                   seen_rows = s.n_tokens();
                   CHECK(s.layer == 2);
                   for (float& v : s.values.row(s.n_tokens() - 1)) v *= -1.0f;
                 }};
  DecodingConfig dc;
  dc.max_new_tokens = 8;
  const DecodeResult cached = Decode(m, prompt, dc, &hook);
  CHECK(calls == 1);
  CHECK(seen_rows == static_cast<int>(prompt.size()));
  calls = 0;
  const DecodeResult uncached = DecodeUncached(m, prompt, dc, &hook);
  CHECK(calls == static_cast<int>(uncached.tokens.size()) + (uncached.hit_eos ? 1 : 0));
  CHECK(cached.tokens == uncached.tokens);
}

TEST_CASE("decode rejects context overflow") {
  const Model m = InitRandomModel(Small(), 4);
  DecodingConfig dc;
  dc.max_new_tokens = 60;
  CHECK_THROWS_AS(Decode(m, Tokenize("12345", 64), dc), ContextOverflow);
  dc.max_new_tokens = 58;
  CHECK_NOTHROW(Decode(m, Tokenize("12345", 64), dc));
}

TEST_CASE("random init is deterministic and finite") {
  const Model a = InitRandomModel(Small(), 42);
  const Model b = InitRandomModel(Small(), 42);
  const Model c = InitRandomModel(Small(), 43);
  CHECK(SerializeModel(a) == SerializeModel(b));
  CHECK_FALSE(a.weights == c.weights);
  CHECK(ForwardFull(a, Tokenize("abc", 64)).AllFinite());
  CHECK(ForwardFull(InitRandomModel(ToyConfig(), 1), Tokenize("four", 64)).AllFinite());
}

TEST_CASE("ACWT round trip and corruption") {
  const Model m = InitRandomModel(Small(), 8);
  const std::string bytes = SerializeModel(m, R"({"note":"x"})");
  CHECK(bytes.substr(0, 4) == "ACWT");
  const Model back = DeserializeModel(bytes);
  CHECK(back == m);
  CHECK(SerializeModel(back, R"({"note":"x"})") == bytes);

  std::string bad_magic = bytes;
  bad_magic[0] = 'X';
  CHECK_THROWS_AS(DeserializeModel(bad_magic), FormatError);

  std::string bad_version = bytes;
  bad_version[4] = 2;
  CHECK_THROWS_AS(DeserializeModel(bad_version), FormatError);

  CHECK_THROWS_AS(DeserializeModel(bytes.substr(0, bytes.size() - 4)), FormatError);
  CHECK_THROWS_AS(DeserializeModel(bytes + "pad!"), FormatError);

  // A header claiming a wider model than the payload holds.
  acwt::File f = acwt::Decode(bytes);
  CHECK(f.header["config"]["model_dim"] == 8);
  const std::string wide = [&] {
    std::string s = bytes;
    const auto pos = s.find("\"model_dim\":8");
    REQUIRE(pos != std::string::npos);
    s.replace(pos, 13, "\"model_dim\":9");
    return s;
  }();
  CHECK_THROWS_AS(DeserializeModel(wide), FormatError);

  const std::string shape = [&] {
    std::string s = bytes;
    const auto pos = s.find("[259,8]");
    REQUIRE(pos != std::string::npos);
    s.replace(pos, 7, "[258,8]");
    return s;
  }();
  CHECK_THROWS_AS(DeserializeModel(shape), FormatError);
}

}  // TEST_SUITE

}  // namespace
}  // namespace acomm
