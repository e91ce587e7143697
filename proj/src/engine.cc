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

#include "acomm/engine.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "acomm/error.h"
#include "acomm/rng.h"

namespace acomm {
namespace {

// Keys and values for every processed position of one layer.
struct LayerCache {
  std::vector<float> keys;
  std::vector<float> values;
  int count = 0;
};

struct Scratch {
  explicit Scratch(const ModelConfig& c)
      : normed(c.model_dim), q(c.model_dim), k(c.model_dim), v(c.model_dim),
        heads(c.model_dim), proj(c.model_dim), hidden(c.ffn_size),
        scores(c.max_seq_len) {}
  std::vector<float> normed, q, k, v, heads, proj, hidden, scores;
};

void LayerNorm(std::span<const float> x, std::span<const float> gain,
               std::span<const float> bias, float eps, std::span<float> out) {
  const auto n = static_cast<float>(x.size());
  float mean = 0.0f;
  for (float xi : x) mean += xi;
  mean /= n;
  float var = 0.0f;
  for (float xi : x) var += (xi - mean) * (xi - mean);
  var /= n;
  const float inv_std = 1.0f / std::sqrt(var + eps);
  for (std::size_t i = 0; i < x.size(); ++i) {
    out[i] = (x[i] - mean) * inv_std * gain[i] + bias[i];
  }
}

float Gelu(float x) {
  constexpr float kSqrt2OverPi = 0.7978845608028654f;
  return 0.5f * x * (1.0f + std::tanh(kSqrt2OverPi * (x + 0.044715f * x * x * x)));
}

// Runs one block on the residual row at position cache.count, appending its
// key/value to the cache.
void RunBlock(const LayerWeights& lw, const ModelConfig& c, LayerCache& cache,
              std::span<float> x, Scratch& s) {
  const int d = c.model_dim;
  const int n_heads = c.n_heads;
  const int ks = c.key_size;

  LayerNorm(x, lw.ln1_gain, lw.ln1_bias, c.ln_epsilon, s.normed);
  VecMat(s.normed, lw.wq, s.q);
  VecMat(s.normed, lw.wk, s.k);
  VecMat(s.normed, lw.wv, s.v);
  cache.keys.insert(cache.keys.end(), s.k.begin(), s.k.end());
  cache.values.insert(cache.values.end(), s.v.begin(), s.v.end());
  const int n_pos = ++cache.count;

  const float scale = 1.0f / std::sqrt(static_cast<float>(ks));
  for (int h = 0; h < n_heads; ++h) {
    const int off = h * ks;
    float max_score = -std::numeric_limits<float>::infinity();
    for (int p = 0; p < n_pos; ++p) {
      const float* key = cache.keys.data() + static_cast<std::size_t>(p) * d + off;
      float dot = 0.0f;
      for (int i = 0; i < ks; ++i) dot += s.q[off + i] * key[i];
      s.scores[p] = dot * scale;
      max_score = std::max(max_score, s.scores[p]);
    }
    float total = 0.0f;
    for (int p = 0; p < n_pos; ++p) {
      s.scores[p] = std::exp(s.scores[p] - max_score);
      total += s.scores[p];
    }
    for (int i = 0; i < ks; ++i) s.heads[off + i] = 0.0f;
    for (int p = 0; p < n_pos; ++p) {
      const float w = s.scores[p] / total;
      const float* val = cache.values.data() + static_cast<std::size_t>(p) * d + off;
      for (int i = 0; i < ks; ++i) s.heads[off + i] += w * val[i];
    }
  }
  VecMat(s.heads, lw.wo, s.proj);
  for (int i = 0; i < d; ++i) x[i] += s.proj[i];

  LayerNorm(x, lw.ln2_gain, lw.ln2_bias, c.ln_epsilon, s.normed);
  VecMat(s.normed, lw.ffn_up, s.hidden);
  for (int i = 0; i < c.ffn_size; ++i) s.hidden[i] = Gelu(s.hidden[i] + lw.ffn_up_bias[i]);
  VecMat(s.hidden, lw.ffn_down, s.proj);
  for (int i = 0; i < d; ++i) x[i] += s.proj[i] + lw.ffn_down_bias[i];
}

void CheckTokens(const ModelConfig& c, std::span<const std::int32_t> tokens) {
  if (tokens.empty()) throw InvalidArgument("token sequence is empty");
  if (tokens.size() > static_cast<std::size_t>(c.max_seq_len)) {
    throw ContextOverflow("sequence of " + std::to_string(tokens.size()) +
                          " tokens exceeds max_seq_len " +
                          std::to_string(c.max_seq_len));
  }
  for (std::int32_t id : tokens) {
    if (id < 0 || id >= c.vocab_size) {
      throw InvalidArgument("token id " + std::to_string(id) + " outside vocabulary");
    }
  }
}

void CheckLayer(const ModelConfig& c, int layer) {
  if (layer < 0 || layer > c.n_layers) {
    throw InvalidArgument("layer " + std::to_string(layer) + " outside [0, " +
                          std::to_string(c.n_layers) + "]");
  }
}

void EmbedRow(const Model& m, std::int32_t token, int pos, std::span<float> out) {
  const auto te = m.weights.token_embedding.row(token);
  const auto pe = m.weights.positional_embedding.row(pos);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = te[i] + pe[i];
}

Matrix Embed(const Model& m, std::span<const std::int32_t> tokens) {
  Matrix x(static_cast<int>(tokens.size()), m.config.model_dim);
  for (int p = 0; p < x.rows(); ++p) EmbedRow(m, tokens[p], p, x.row(p));
  return x;
}

// Runs blocks [first, last) over every row of x, filling caches[l] when
// caches is non-null.
void RunBlocks(const Model& m, Matrix& x, int first, int last,
               std::vector<LayerCache>* caches, Scratch& s) {
  for (int l = first; l < last; ++l) {
    LayerCache local;
    LayerCache& cache = caches ? (*caches)[l] : local;
    for (int p = 0; p < x.rows(); ++p) RunBlock(m.weights.layers[l], m.config, cache, x.row(p), s);
  }
}

void Unembed(const Model& m, std::span<const float> x, std::span<float> logits,
             Scratch& s) {
  LayerNorm(x, m.weights.final_gain, m.weights.final_bias, m.config.ln_epsilon, s.normed);
  VecMat(s.normed, m.weights.unembedding, logits);
}

bool Eligible(int id) { return id < 256 || id == kEos; }

int SelectToken(std::span<const float> logits, const DecodingConfig& dc, Rng& rng) {
  std::vector<float> masked(logits.begin(), logits.end());
  for (std::size_t i = 0; i < masked.size(); ++i) {
    if (!Eligible(static_cast<int>(i))) masked[i] = -std::numeric_limits<float>::infinity();
  }
  if (dc.strategy == Strategy::kGreedy) return ArgmaxLowestId(masked);

  const double max_logit = masked[ArgmaxLowestId(masked)];
  std::vector<double> probs(masked.size(), 0.0);
  double total = 0.0;
  for (std::size_t i = 0; i < masked.size(); ++i) {
    if (!Eligible(static_cast<int>(i))) continue;
    probs[i] = std::exp((masked[i] - max_logit) / dc.temperature);
    total += probs[i];
  }
  for (double& p : probs) p /= total;
  const NucleusSupport support = NucleusFilter(probs, dc.top_p);
  const double u = rng.Uniform();
  double cumulative = 0.0;
  for (std::size_t i = 0; i < support.ids.size(); ++i) {
    cumulative += support.probs[i];
    if (u < cumulative) return support.ids[i];
  }
  return support.ids.back();
}

void CheckDecode(const Model& m, std::span<const std::int32_t> prompt,
                 const DecodingConfig& dc, const GraftHook* hook) {
  CheckTokens(m.config, prompt);
  if (dc.max_new_tokens < 0) throw InvalidArgument("max_new_tokens must be >= 0");
  if (prompt.size() + static_cast<std::size_t>(dc.max_new_tokens) >
      static_cast<std::size_t>(m.config.max_seq_len)) {
    throw ContextOverflow("prompt of " + std::to_string(prompt.size()) + " tokens plus " +
                          std::to_string(dc.max_new_tokens) +
                          " new tokens exceeds max_seq_len " +
                          std::to_string(m.config.max_seq_len));
  }
  if (dc.strategy == Strategy::kNucleus) {
    if (!(dc.top_p > 0.0 && dc.top_p <= 1.0)) throw InvalidArgument("top_p must be in (0, 1]");
    if (!(dc.temperature > 0.0)) throw InvalidArgument("temperature must be > 0");
  }
  if (hook) {
    CheckLayer(m.config, hook->layer);
    if (!hook->apply) throw InvalidArgument("graft hook has no function");
  }
}

void ApplyHook(const GraftHook& hook, Matrix& prompt_rows) {
  ResidualState state{std::move(prompt_rows), hook.layer};
  const int rows = state.values.rows(), cols = state.values.cols();
  hook.apply(state);
  if (state.values.rows() != rows || state.values.cols() != cols ||
      state.layer != hook.layer) {
    throw InvalidArgument("graft hook changed the residual state's shape or layer");
  }
  prompt_rows = std::move(state.values);
}

}  // namespace

ResidualState ForwardUntil(const Model& model, std::span<const std::int32_t> tokens,
                           int layer) {
  CheckLayer(model.config, layer);
  CheckTokens(model.config, tokens);
  Scratch s(model.config);
  Matrix x = Embed(model, tokens);
  RunBlocks(model, x, 0, layer, nullptr, s);
  return ResidualState{std::move(x), layer};
}

Matrix ForwardFrom(const Model& model, const ResidualState& state, int layer) {
  const ModelConfig& c = model.config;
  CheckLayer(c, layer);
  if (state.layer != layer) {
    throw InvalidArgument("residual state is at layer " + std::to_string(state.layer) +
                          ", expected " + std::to_string(layer));
  }
  if (state.dim() != c.model_dim) throw InvalidArgument("residual state has the wrong width");
  if (state.n_tokens() < 1) throw InvalidArgument("residual state is empty");
  if (state.n_tokens() > c.max_seq_len) throw ContextOverflow("residual state exceeds max_seq_len");
  Scratch s(c);
  Matrix x = state.values;
  RunBlocks(model, x, layer, c.n_layers, nullptr, s);
  Matrix logits(x.rows(), c.vocab_size);
  for (int p = 0; p < x.rows(); ++p) Unembed(model, x.row(p), logits.row(p), s);
  return logits;
}

Matrix ForwardFull(const Model& model, std::span<const std::int32_t> tokens) {
  return ForwardFrom(model, ForwardUntil(model, tokens, 0), 0);
}

DecodeResult Decode(const Model& model, std::span<const std::int32_t> prompt,
                    const DecodingConfig& decoding, const GraftHook* hook) {
  CheckDecode(model, prompt, decoding, hook);
  const ModelConfig& c = model.config;
  Scratch s(c);
  Rng rng(decoding.seed);
  std::vector<LayerCache> caches(c.n_layers);
  const int split = hook ? hook->layer : c.n_layers;

  Matrix x = Embed(model, prompt);
  RunBlocks(model, x, 0, split, &caches, s);
  if (hook) ApplyHook(*hook, x);
  RunBlocks(model, x, split, c.n_layers, &caches, s);

  std::vector<float> logits(c.vocab_size);
  std::vector<float> row(c.model_dim);
  Unembed(model, x.row(x.rows() - 1), logits, s);

  DecodeResult result;
  int pos = static_cast<int>(prompt.size());
  for (int step = 0; step < decoding.max_new_tokens; ++step) {
    const int next = SelectToken(logits, decoding, rng);
    if (next == kEos) {
      result.hit_eos = true;
      break;
    }
    result.tokens.push_back(next);
    if (step + 1 == decoding.max_new_tokens) break;
    EmbedRow(model, next, pos, row);
    for (int l = 0; l < c.n_layers; ++l) RunBlock(model.weights.layers[l], c, caches[l], row, s);
    Unembed(model, row, logits, s);
    ++pos;
  }
  return result;
}

DecodeResult DecodeUncached(const Model& model, std::span<const std::int32_t> prompt,
                            const DecodingConfig& decoding, const GraftHook* hook) {
  CheckDecode(model, prompt, decoding, hook);
  const ModelConfig& c = model.config;
  Rng rng(decoding.seed);
  const int split = hook ? hook->layer : c.n_layers;
  const int prompt_len = static_cast<int>(prompt.size());
  TokenSeq tokens(prompt.begin(), prompt.end());

  DecodeResult result;
  for (int step = 0; step < decoding.max_new_tokens; ++step) {
    ResidualState state = ForwardUntil(model, tokens, split);
    if (hook) {
      Matrix head(prompt_len, c.model_dim);
      for (int p = 0; p < prompt_len; ++p) {
        std::ranges::copy(state.values.row(p), head.row(p).begin());
      }
      ApplyHook(*hook, head);
      for (int p = 0; p < prompt_len; ++p) {
        std::ranges::copy(head.row(p), state.values.row(p).begin());
      }
    }
    const Matrix logits = ForwardFrom(model, state, split);
    const int next = SelectToken(logits.row(logits.rows() - 1), decoding, rng);
    if (next == kEos) {
      result.hit_eos = true;
      break;
    }
    result.tokens.push_back(next);
    tokens.push_back(next);
  }
  return result;
}

int ArgmaxLowestId(std::span<const float> logits) {
  if (logits.empty()) throw InvalidArgument("argmax of empty logits");
  int best = 0;
  for (int i = 1; i < static_cast<int>(logits.size()); ++i) {
    if (logits[i] > logits[best]) best = i;
  }
  return best;
}

NucleusSupport NucleusFilter(std::span<const double> probabilities, double p) {
  if (!(p > 0.0 && p <= 1.0)) throw InvalidArgument("nucleus p must be in (0, 1]");
  if (probabilities.empty()) throw InvalidArgument("empty distribution");
  double sum = 0.0;
  for (double q : probabilities) {
    if (!(q >= 0.0) || !std::isfinite(q)) throw InvalidArgument("probabilities must be finite and non-negative");
    sum += q;
  }
  if (std::abs(sum - 1.0) > 1e-6) throw InvalidArgument("probabilities do not sum to 1");

  std::vector<int> order(probabilities.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return probabilities[a] > probabilities[b];
  });
  NucleusSupport out;
  double mass = 0.0;
  for (int id : order) {
    out.ids.push_back(id);
    mass += probabilities[id];
    if (mass >= p) break;
  }
  for (int id : out.ids) out.probs.push_back(probabilities[id] / mass);
  return out;
}

}  // namespace acomm
