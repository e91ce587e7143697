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

#ifndef ACOMM_GRAFTING_H_
#define ACOMM_GRAFTING_H_

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "acomm/engine.h"
#include "acomm/tensor.h"

namespace acomm {

enum class CombineKind { kSum, kMean, kReplace };
enum class GraftScope { kLastToken, kAllTokens };

// d_B x d_A projection of A's activation space onto B's.
struct MapMatrix {
  Matrix values;

  int dim_out() const { return values.rows(); }  // d_B
  int dim_in() const { return values.cols(); }   // d_A

  friend bool operator==(const MapMatrix&, const MapMatrix&) = default;
};

struct CombineSpec {
  CombineKind kind = CombineKind::kReplace;
  GraftScope scope = GraftScope::kLastToken;
  std::optional<MapMatrix> pre_map;

  // AllTokens is only meaningful for Sum and Mean.
  void Validate() const;
};

struct GraftConfig {
  int source_layer = 26;  // k, on A
  int target_layer = 26;  // j, on B
  CombineSpec combine;
};

// f(a, b) -> vector of length d_B.
//
// With a pre_map W (shape d_B x d_A), a is first replaced by W a and the
// equal-width rule applies. Otherwise, with d = min(d_A, d_B) and
// lead = max(d_B - d, 0), the output keeps b[0, lead) and combines the
// trailing d entries of b with the trailing d entries of a:
//   sum:     b_tail + a_tail
//   mean:    (b_tail + a_tail) / 2
//   replace: a_tail
std::vector<float> Combine(std::span<const float> a, std::span<const float> b,
                           const CombineSpec& spec);

// Rewrites rows of h_b in place. LastToken: the last row of h_b becomes
// Combine(last row of h_a, last row of h_b). AllTokens: the last
// min(t_A, t_B) rows of h_b are combined with the end-aligned rows of h_a.
void GraftInPlace(const ResidualState& h_a, ResidualState& h_b, const CombineSpec& spec);
ResidualState Graft(const ResidualState& h_a, const ResidualState& h_b,
                    const CombineSpec& spec);

// Hook for Decode() that grafts `h_a` into B's prompt state at target_layer.
// The hook holds its own copy of h_a.
GraftHook MakeGraftHook(ResidualState h_a, const GraftConfig& config);

const char* ToString(CombineKind kind);
const char* ToString(GraftScope scope);
CombineKind ParseCombineKind(const std::string& name);  // sum|mean|replace
GraftScope ParseGraftScope(const std::string& name);    // last|all

}  // namespace acomm

#endif  // ACOMM_GRAFTING_H_
