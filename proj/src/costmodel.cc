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

#include "acomm/costmodel.h"

#include <algorithm>

#include "acomm/error.h"

namespace acomm {
namespace {

// Checked arithmetic wrapper so every intermediate stays exact.
struct Exact {
  FlopCount v;
};

Exact operator+(Exact a, Exact b) {
  FlopCount out;
  if (__builtin_add_overflow(a.v, b.v, &out)) throw InvalidArgument("FLOP count overflows 128 bits");
  return {out};
}

Exact operator*(Exact a, Exact b) {
  FlopCount out;
  if (__builtin_mul_overflow(a.v, b.v, &out)) throw InvalidArgument("FLOP count overflows 128 bits");
  return {out};
}

Exact N(std::uint64_t x) { return {x}; }

// L-independent per-layer cost of attending over n tokens:
// 8nDKH + 4n^2KH + 3Hn^2 + 4nDF.
Exact LayerCost(const Architecture& a, Exact n) {
  const Exact d = N(a.model_dim), k = N(a.key_size), h = N(a.n_heads), f = N(a.ffn_size);
  return N(8) * n * d * k * h + N(4) * n * n * k * h + N(3) * h * n * n + N(4) * n * d * f;
}

// 4nVD + L * LayerCost(n).
Exact PassCost(const Architecture& a, Exact n) {
  return N(4) * n * N(a.vocab_size) * N(a.model_dim) + N(a.n_layers) * LayerCost(a, n);
}

double ToDouble(FlopCount x) { return static_cast<double>(x); }

}  // namespace

std::string ToString(FlopCount value) {
  if (value == 0) return "0";
  std::string digits;
  while (value > 0) {
    digits.push_back(static_cast<char>('0' + static_cast<int>(value % 10)));
    value /= 10;
  }
  std::reverse(digits.begin(), digits.end());
  return digits;
}

Architecture ArchitectureOf(const ModelConfig& c) {
  return {static_cast<std::uint64_t>(c.n_layers), static_cast<std::uint64_t>(c.n_heads),
          static_cast<std::uint64_t>(c.key_size), static_cast<std::uint64_t>(c.ffn_size),
          static_cast<std::uint64_t>(c.model_dim), static_cast<std::uint64_t>(c.vocab_size)};
}

std::optional<Architecture> ArchitecturePreset(const std::string& name) {
  if (name == "llama1b") return Architecture{16, 32, 64, 8192, 2048, 128256};
  if (name == "llama3b") return Architecture{28, 24, 128, 8192, 3072, 128256};
  if (name == "llama8b") return Architecture{32, 32, 128, 14336, 4096, 128256};
  if (name == "toy") return ArchitectureOf(ToyConfig());
  return std::nullopt;
}

void CostParams::Validate() const {
  if (graft_layer > arch.n_layers) {
    throw InvalidArgument("graft layer k exceeds the number of layers");
  }
}

FlopCount FlopsNl(const CostParams& p) {
  p.Validate();
  const Exact prompt = N(p.prompt_tokens);
  const Exact extended = prompt + N(p.message_tokens);
  return (N(p.message_tokens) * PassCost(p.arch, prompt) +
          N(p.output_tokens) * PassCost(p.arch, extended)).v;
}

FlopCount FlopsAc(const CostParams& p) {
  p.Validate();
  const Exact prompt = N(p.prompt_tokens);
  const Exact graft = p.map_used ? N(2) * N(p.dim_a) * N(p.dim_b) : N(p.arch.model_dim);
  return (N(2) * prompt * N(p.arch.vocab_size) * N(p.arch.model_dim) +
          N(p.graft_layer) * LayerCost(p.arch, prompt) +
          N(p.output_tokens) * PassCost(p.arch, prompt) + graft).v;
}

FlopCount FlopsSingleForward(const Architecture& arch, std::uint64_t context_len,
                             std::uint64_t out_tokens) {
  return (N(out_tokens) * PassCost(arch, N(context_len))).v;
}

CostReport MakeCostReport(const CostParams& params, const Architecture& reference) {
  CostReport r;
  r.nl_flops = FlopsNl(params);
  r.ac_flops = FlopsAc(params);
  if (r.nl_flops > 0) r.ratio = ToDouble(r.ac_flops) / ToDouble(r.nl_flops);
  const FlopCount unit = FlopsSingleForward(reference, params.prompt_tokens, 1);
  if (unit > 0) {
    r.normalized_nl = ToDouble(r.nl_flops) / ToDouble(unit);
    r.normalized_ac = ToDouble(r.ac_flops) / ToDouble(unit);
  }
  return r;
}

}  // namespace acomm
