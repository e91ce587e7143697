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

#ifndef ACOMM_ENGINE_H_
#define ACOMM_ENGINE_H_

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "acomm/model.h"
#include "acomm/tensor.h"

namespace acomm {

// Residual-stream activations of t tokens at a layer boundary: layer 0 is the
// post-embedding stream, layer l the stream after block l.
struct ResidualState {
  Matrix values;  // t x D
  int layer = 0;

  int n_tokens() const { return values.rows(); }
  int dim() const { return values.cols(); }
  std::span<const float> last_row() const { return values.row(values.rows() - 1); }

  friend bool operator==(const ResidualState&, const ResidualState&) = default;
};

// Blocks are pre-norm GPT style: x += Attn(LN1(x)); x += FFN(LN2(x)) with a
// tanh-approximated GELU. All arithmetic is float32.

// Residual stream after block `layer` (0 <= layer <= L).
ResidualState ForwardUntil(const Model& model, std::span<const std::int32_t> tokens,
                           int layer);
// Applies blocks layer+1..L, the final norm and the unembedding to `state`,
// which must sit at `layer`. Returns t x V logits.
Matrix ForwardFrom(const Model& model, const ResidualState& state, int layer);
// ForwardFrom(ForwardUntil(tokens, 0), 0).
Matrix ForwardFull(const Model& model, std::span<const std::int32_t> tokens);

// Called with the prompt's residual state at `layer`; may rewrite any of its
// rows in place. The cached decoder calls it exactly once, during prefill.
struct GraftHook {
  int layer = 0;
  std::function<void(ResidualState&)> apply;
};

enum class Strategy { kGreedy, kNucleus };

struct DecodingConfig {
  Strategy strategy = Strategy::kGreedy;
  double top_p = 0.9;
  double temperature = 1.0;
  int max_new_tokens = 32;
  std::uint64_t seed = 0;
};

struct DecodeResult {
  TokenSeq tokens;       // generated ids, EOS excluded
  bool hit_eos = false;
};

// Autoregressive generation with a per-layer KV cache. Only byte ids and EOS
// are eligible for sampling; greedy ties resolve to the lowest id. Throws
// ContextOverflow if prompt.size() + max_new_tokens > max_seq_len.
DecodeResult Decode(const Model& model, std::span<const std::int32_t> prompt,
                    const DecodingConfig& decoding,
                    const GraftHook* hook = nullptr);

// Reference decoder: recomputes the whole sequence every step and re-applies
// the hook to the prompt rows each time. Matches Decode token for token.
DecodeResult DecodeUncached(const Model& model, std::span<const std::int32_t> prompt,
                            const DecodingConfig& decoding,
                            const GraftHook* hook = nullptr);

// Index of the maximum; lowest index among ties.
int ArgmaxLowestId(std::span<const float> logits);

struct NucleusSupport {
  std::vector<int> ids;         // descending probability, then ascending id
  std::vector<double> probs;    // renormalized over `ids`
};

// Smallest prefix (by descending probability, ties by lowest id) whose
// cumulative mass reaches p. Throws InvalidArgument if `probabilities` does
// not sum to 1 within 1e-6 or p is outside (0, 1].
NucleusSupport NucleusFilter(std::span<const double> probabilities, double p);

}  // namespace acomm

#endif  // ACOMM_ENGINE_H_
