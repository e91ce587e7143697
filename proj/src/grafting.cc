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

#include "acomm/grafting.h"

#include <algorithm>
#include <memory>
#include <utility>

#include "acomm/error.h"

namespace acomm {

void CombineSpec::Validate() const {
  if (scope == GraftScope::kAllTokens && kind == CombineKind::kReplace) {
    throw InvalidArgument("replace cannot be applied to all tokens");
  }
  if (pre_map && !pre_map->values.AllFinite()) {
    throw InvalidArgument("mapping matrix is not finite");
  }
}

std::vector<float> Combine(std::span<const float> a, std::span<const float> b,
                           const CombineSpec& spec) {
  spec.Validate();
  if (!AllFinite(a) || !AllFinite(b)) throw InvalidArgument("combine: non-finite input");

  std::vector<float> mapped;
  if (spec.pre_map) {
    const Matrix& w = spec.pre_map->values;
    if (w.rows() != static_cast<int>(b.size()) || w.cols() != static_cast<int>(a.size())) {
      throw InvalidArgument("combine: mapping matrix is " + std::to_string(w.rows()) + "x" +
                            std::to_string(w.cols()) + ", expected " +
                            std::to_string(b.size()) + "x" + std::to_string(a.size()));
    }
    mapped.assign(w.rows(), 0.0f);
    for (int r = 0; r < w.rows(); ++r) {
      const auto wr = w.row(r);
      float acc = 0.0f;
      for (int c = 0; c < w.cols(); ++c) acc += wr[c] * a[c];
      mapped[r] = acc;
    }
    a = mapped;
  }

  const std::size_t d = std::min(a.size(), b.size());
  const std::size_t lead_b = b.size() - d;
  const std::size_t lead_a = a.size() - d;
  std::vector<float> out(b.begin(), b.end());
  for (std::size_t i = 0; i < d; ++i) {
    const float ai = a[lead_a + i];
    float& bi = out[lead_b + i];
    switch (spec.kind) {
      case CombineKind::kSum: bi = bi + ai; break;
      case CombineKind::kMean: bi = (bi + ai) / 2.0f; break;
      case CombineKind::kReplace: bi = ai; break;
    }
  }
  return out;
}

void GraftInPlace(const ResidualState& h_a, ResidualState& h_b, const CombineSpec& spec) {
  spec.Validate();
  if (h_a.n_tokens() < 1 || h_b.n_tokens() < 1) throw InvalidArgument("graft: empty residual state");
  const int t_a = h_a.n_tokens(), t_b = h_b.n_tokens();
  const int n = spec.scope == GraftScope::kLastToken ? 1 : std::min(t_a, t_b);
  for (int i = 1; i <= n; ++i) {
    auto row = h_b.values.row(t_b - i);
    const std::vector<float> out = Combine(h_a.values.row(t_a - i), row, spec);
    std::ranges::copy(out, row.begin());
  }
}

ResidualState Graft(const ResidualState& h_a, const ResidualState& h_b,
                    const CombineSpec& spec) {
  ResidualState out = h_b;
  GraftInPlace(h_a, out, spec);
  return out;
}

GraftHook MakeGraftHook(ResidualState h_a, const GraftConfig& config) {
  config.combine.Validate();
  if (h_a.layer != config.source_layer) {
    throw InvalidArgument("graft source state is at layer " + std::to_string(h_a.layer) +
                          ", expected " + std::to_string(config.source_layer));
  }
  auto source = std::make_shared<const ResidualState>(std::move(h_a));
  CombineSpec spec = config.combine;
  return GraftHook{config.target_layer, [source, spec](ResidualState& h_b) {
                     GraftInPlace(*source, h_b, spec);
                   }};
}

const char* ToString(CombineKind kind) {
  switch (kind) {
    case CombineKind::kSum: return "sum";
    case CombineKind::kMean: return "mean";
    case CombineKind::kReplace: return "replace";
  }
  return "?";
}

const char* ToString(GraftScope scope) {
  return scope == GraftScope::kLastToken ? "last" : "all";
}

CombineKind ParseCombineKind(const std::string& name) {
  if (name == "sum") return CombineKind::kSum;
  if (name == "mean") return CombineKind::kMean;
  if (name == "replace") return CombineKind::kReplace;
  throw InvalidArgument("unknown combine function '" + name + "'");
}

GraftScope ParseGraftScope(const std::string& name) {
  if (name == "last") return GraftScope::kLastToken;
  if (name == "all") return GraftScope::kAllTokens;
  throw InvalidArgument("unknown graft scope '" + name + "'");
}

}  // namespace acomm
