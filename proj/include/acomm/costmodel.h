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

#ifndef ACOMM_COSTMODEL_H_
#define ACOMM_COSTMODEL_H_

#include <cstdint>
#include <optional>
#include <string>

#include "acomm/model.h"

namespace acomm {

// Exact FLOP count. Arithmetic is checked; overflow throws.
using FlopCount = unsigned __int128;

std::string ToString(FlopCount value);

// Architecture of both agents.
struct Architecture {
  std::uint64_t n_layers = 0;   // L
  std::uint64_t n_heads = 0;    // H
  std::uint64_t key_size = 0;   // K
  std::uint64_t ffn_size = 0;   // F
  std::uint64_t model_dim = 0;  // D
  std::uint64_t vocab_size = 0; // V
};

Architecture ArchitectureOf(const ModelConfig& config);

// Published shapes. llama1b/3b/8b are LLaMA-3.2-1B, LLaMA-3.2-3B and
// LLaMA-3.1-8B; toy is ToyConfig().
std::optional<Architecture> ArchitecturePreset(const std::string& name);

struct CostParams {
  Architecture arch;
  std::uint64_t prompt_tokens = 0;   // P
  std::uint64_t message_tokens = 0;  // M
  std::uint64_t output_tokens = 0;   // T
  std::uint64_t graft_layer = 0;     // k
  bool map_used = false;
  std::uint64_t dim_a = 0;  // d_A, for the mapping term
  std::uint64_t dim_b = 0;  // d_B

  // Throws InvalidArgument when k > L.
  void Validate() const;
};

// Natural-language exchange: M forward passes of A over P tokens, then T of B
// over P + M tokens. One pass over n tokens costs
//   4nVD + L(8nDKH + 4n^2KH + 3Hn^2 + 4nDF).
FlopCount FlopsNl(const CostParams& p);

// Activation exchange: 2PVD + k(8PDKH + 4P^2KH + 3HP^2 + 4PDF), plus T
// passes of B over P tokens, plus the graft term, which is D without a map
// and 2 d_A d_B with one.
FlopCount FlopsAc(const CostParams& p);

// out_tokens passes at the given context length (FlopsNl with M = 0).
FlopCount FlopsSingleForward(const Architecture& arch, std::uint64_t context_len,
                             std::uint64_t out_tokens);

struct CostReport {
  FlopCount nl_flops = 0;
  FlopCount ac_flops = 0;
  std::optional<double> ratio;  // ac / nl; empty when nl == 0
  // Divided by one reference forward pass over P tokens; empty when that is 0.
  std::optional<double> normalized_nl;
  std::optional<double> normalized_ac;
};

CostReport MakeCostReport(const CostParams& params, const Architecture& reference);

}  // namespace acomm

#endif  // ACOMM_COSTMODEL_H_
