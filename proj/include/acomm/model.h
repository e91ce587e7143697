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

#ifndef ACOMM_MODEL_H_
#define ACOMM_MODEL_H_

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "acomm/tensor.h"

namespace acomm {

// Byte-level vocabulary: ids 0..255 are raw bytes, followed by three
// specials. Any ids >= kMinVocab are unused padding rows.
inline constexpr int kBos = 256;
inline constexpr int kEos = 257;
inline constexpr int kPad = 258;
inline constexpr int kMinVocab = 259;

using TokenSeq = std::vector<std::int32_t>;

struct ModelConfig {
  int n_layers = 4;     // L
  int n_heads = 4;      // H
  int key_size = 8;     // K
  int ffn_size = 64;    // F
  int model_dim = 32;   // D
  int vocab_size = kMinVocab;  // V
  int max_seq_len = 1024;
  float ln_epsilon = 1e-5f;

  // Throws InvalidArgument when D != H*K, a count is < 1, V < 259 or
  // epsilon is not positive.
  void Validate() const;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

// The desk-scale architecture used by tests and the `toy` cost preset.
ModelConfig ToyConfig();

struct LayerWeights {
  std::vector<float> ln1_gain, ln1_bias;  // D
  Matrix wq, wk, wv, wo;                  // D x D
  std::vector<float> ln2_gain, ln2_bias;  // D
  Matrix ffn_up;                          // D x F
  std::vector<float> ffn_up_bias;         // F
  Matrix ffn_down;                        // F x D
  std::vector<float> ffn_down_bias;       // D

  friend bool operator==(const LayerWeights&, const LayerWeights&) = default;
};

struct ModelWeights {
  Matrix token_embedding;       // V x D
  Matrix positional_embedding;  // max_seq_len x D
  std::vector<LayerWeights> layers;
  std::vector<float> final_gain, final_bias;  // D
  Matrix unembedding;                         // D x V

  friend bool operator==(const ModelWeights&, const ModelWeights&) = default;
};

struct Model {
  ModelConfig config;
  ModelWeights weights;

  friend bool operator==(const Model&, const Model&) = default;
};

// Zero-filled weights of the right shapes (unit LayerNorm gains are NOT
// applied; every element is 0).
ModelWeights ZeroWeights(const ModelConfig& config);

// Every tensor filled from a seeded generator with scaled uniform entries:
// matrices U(-1/sqrt(fan_in), 1/sqrt(fan_in)), embeddings U(-1, 1), norm gains
// 1 + U(-0.1, 0.1), biases U(-0.02, 0.02).
Model InitRandomModel(const ModelConfig& config, std::uint64_t seed);

// Throws InvalidArgument if any shape disagrees with config or an element is
// not finite.
void ValidateWeights(const ModelConfig& config, const ModelWeights& weights);

// A named view of one parameter tensor. 1-D tensors have shape {n}.
struct TensorRef {
  std::string name;
  std::vector<std::int64_t> shape;
  std::span<float> values;
};
struct ConstTensorRef {
  std::string name;
  std::vector<std::int64_t> shape;
  std::span<const float> values;
};

// Canonical tensor order used by the file format and by initialization.
std::vector<TensorRef> ListTensors(const ModelConfig& config,
                                   ModelWeights& weights);
std::vector<ConstTensorRef> ListTensors(const ModelConfig& config,
                                        const ModelWeights& weights);

// Tokenizer. Tokenize returns [BOS, bytes...]; throws ContextOverflow when
// text.size() + 1 > max_seq_len.
TokenSeq Tokenize(std::string_view text, int max_seq_len);
// Inverse of Tokenize; a leading BOS is dropped. Any other special id throws.
std::string Detokenize(std::span<const std::int32_t> ids);

// ACWT persistence. SaveModel/LoadModel round-trip bit-exactly.
std::string SerializeModel(const Model& model, const std::string& meta_json = "{}");
Model DeserializeModel(std::string_view bytes);
void SaveModel(const std::filesystem::path& path, const Model& model,
               const std::string& meta_json = "{}");
Model LoadModel(const std::filesystem::path& path);

// Hex SHA-256 of the model's canonical serialization (no metadata), used to
// pair map matrices with the models they were trained for.
std::string ModelDigest(const Model& model);

}  // namespace acomm

#endif  // ACOMM_MODEL_H_
