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

#include "acomm/model.h"

#include <cmath>
#include <string>

#include "acomm/acwt.h"
#include "acomm/digest.h"
#include "acomm/error.h"
#include "acomm/rng.h"

namespace acomm {
namespace {

std::vector<std::int64_t> Shape(const Matrix& m) { return {m.rows(), m.cols()}; }
std::vector<std::int64_t> Shape(const std::vector<float>& v) {
  return {static_cast<std::int64_t>(v.size())};
}

// Shared by the const and mutable overloads of ListTensors.
template <typename Weights, typename Ref, typename Span>
std::vector<Ref> ListTensorsImpl(const ModelConfig& config, Weights& w) {
  std::vector<Ref> out;
  auto add = [&out](std::string name, auto& t) {
    out.push_back(Ref{std::move(name), Shape(t), Span(t.data(), t.size())});
  };
  auto add_m = [&out](std::string name, auto& m) {
    out.push_back(Ref{std::move(name), Shape(m), m.flat()});
  };
  add_m("tok_emb", w.token_embedding);
  add_m("pos_emb", w.positional_embedding);
  if (static_cast<int>(w.layers.size()) != config.n_layers) {
    throw InvalidArgument("weights have " + std::to_string(w.layers.size()) +
                          " layers, config expects " +
                          std::to_string(config.n_layers));
  }
  for (int l = 0; l < config.n_layers; ++l) {
    auto& lw = w.layers[l];
    const std::string p = "blocks." + std::to_string(l) + ".";
    add(p + "ln1.gain", lw.ln1_gain);
    add(p + "ln1.bias", lw.ln1_bias);
    add_m(p + "attn.wq", lw.wq);
    add_m(p + "attn.wk", lw.wk);
    add_m(p + "attn.wv", lw.wv);
    add_m(p + "attn.wo", lw.wo);
    add(p + "ln2.gain", lw.ln2_gain);
    add(p + "ln2.bias", lw.ln2_bias);
    add_m(p + "ffn.up", lw.ffn_up);
    add(p + "ffn.up_bias", lw.ffn_up_bias);
    add_m(p + "ffn.down", lw.ffn_down);
    add(p + "ffn.down_bias", lw.ffn_down_bias);
  }
  add("ln_f.gain", w.final_gain);
  add("ln_f.bias", w.final_bias);
  add_m("unembed", w.unembedding);
  return out;
}

nlohmann::json ConfigToJson(const ModelConfig& c) {
  return {{"n_layers", c.n_layers},   {"n_heads", c.n_heads},
          {"key_size", c.key_size},   {"ffn_size", c.ffn_size},
          {"model_dim", c.model_dim}, {"vocab_size", c.vocab_size},
          {"max_seq_len", c.max_seq_len},
          {"ln_epsilon", static_cast<double>(c.ln_epsilon)}};
}

ModelConfig ConfigFromJson(const nlohmann::json& j) {
  ModelConfig c;
  try {
    c.n_layers = j.at("n_layers").get<int>();
    c.n_heads = j.at("n_heads").get<int>();
    c.key_size = j.at("key_size").get<int>();
    c.ffn_size = j.at("ffn_size").get<int>();
    c.model_dim = j.at("model_dim").get<int>();
    c.vocab_size = j.at("vocab_size").get<int>();
    c.max_seq_len = j.at("max_seq_len").get<int>();
    c.ln_epsilon = static_cast<float>(j.at("ln_epsilon").get<double>());
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("model config: ") + e.what());
  }
  return c;
}

}  // namespace

void ModelConfig::Validate() const {
  if (n_layers < 1 || n_heads < 1 || key_size < 1 || ffn_size < 1 ||
      model_dim < 1 || max_seq_len < 1) {
    throw InvalidArgument("model config: every count must be >= 1");
  }
  if (static_cast<long long>(n_heads) * key_size != model_dim) {
    throw InvalidArgument("model config: model_dim must equal n_heads * key_size");
  }
  if (vocab_size < kMinVocab) {
    throw InvalidArgument("model config: vocab_size must be >= 259");
  }
  if (!(ln_epsilon > 0.0f) || !std::isfinite(ln_epsilon)) {
    throw InvalidArgument("model config: ln_epsilon must be positive");
  }
}

ModelConfig ToyConfig() { return ModelConfig{}; }

ModelWeights ZeroWeights(const ModelConfig& c) {
  c.Validate();
  const int d = c.model_dim;
  ModelWeights w;
  w.token_embedding = Matrix(c.vocab_size, d);
  w.positional_embedding = Matrix(c.max_seq_len, d);
  w.layers.resize(c.n_layers);
  for (auto& lw : w.layers) {
    lw.ln1_gain.assign(d, 0.0f);
    lw.ln1_bias.assign(d, 0.0f);
    lw.wq = Matrix(d, d);
    lw.wk = Matrix(d, d);
    lw.wv = Matrix(d, d);
    lw.wo = Matrix(d, d);
    lw.ln2_gain.assign(d, 0.0f);
    lw.ln2_bias.assign(d, 0.0f);
    lw.ffn_up = Matrix(d, c.ffn_size);
    lw.ffn_up_bias.assign(c.ffn_size, 0.0f);
    lw.ffn_down = Matrix(c.ffn_size, d);
    lw.ffn_down_bias.assign(d, 0.0f);
  }
  w.final_gain.assign(d, 0.0f);
  w.final_bias.assign(d, 0.0f);
  w.unembedding = Matrix(d, c.vocab_size);
  return w;
}

Model InitRandomModel(const ModelConfig& config, std::uint64_t seed) {
  Model model{config, ZeroWeights(config)};
  Rng rng(seed);
  for (TensorRef& t : ListTensors(model.config, model.weights)) {
    const bool is_gain = t.name.ends_with(".gain");
    const bool is_bias = t.name.ends_with("bias");
    const bool is_embedding = t.name == "tok_emb" || t.name == "pos_emb";
    double lo = -0.02, hi = 0.02, offset = 0.0;
    if (is_gain) {
      lo = -0.1, hi = 0.1, offset = 1.0;
    } else if (is_embedding) {
      lo = -1.0, hi = 1.0;
    } else if (!is_bias) {
      const double bound = 1.0 / std::sqrt(static_cast<double>(t.shape[0]));
      lo = -bound, hi = bound;
    }
    for (float& v : t.values) v = static_cast<float>(offset + rng.Uniform(lo, hi));
  }
  return model;
}

void ValidateWeights(const ModelConfig& config, const ModelWeights& weights) {
  config.Validate();
  const ModelWeights reference = ZeroWeights(config);
  const auto expected = ListTensors(config, reference);
  const auto actual = ListTensors(config, weights);
  for (std::size_t i = 0; i < expected.size(); ++i) {
    if (actual[i].shape != expected[i].shape) {
      throw InvalidArgument("tensor '" + actual[i].name + "' has the wrong shape");
    }
    if (!AllFinite(actual[i].values)) {
      throw InvalidArgument("tensor '" + actual[i].name + "' is not finite");
    }
  }
}

std::vector<TensorRef> ListTensors(const ModelConfig& config, ModelWeights& weights) {
  return ListTensorsImpl<ModelWeights, TensorRef, std::span<float>>(config, weights);
}

std::vector<ConstTensorRef> ListTensors(const ModelConfig& config,
                                        const ModelWeights& weights) {
  return ListTensorsImpl<const ModelWeights, ConstTensorRef, std::span<const float>>(
      config, weights);
}

TokenSeq Tokenize(std::string_view text, int max_seq_len) {
  if (text.size() + 1 > static_cast<std::size_t>(max_seq_len)) {
    throw ContextOverflow("text of " + std::to_string(text.size()) +
                          " bytes does not fit max_seq_len " +
                          std::to_string(max_seq_len));
  }
  TokenSeq ids;
  ids.reserve(text.size() + 1);
  ids.push_back(kBos);
  for (char c : text) ids.push_back(static_cast<unsigned char>(c));
  return ids;
}

std::string Detokenize(std::span<const std::int32_t> ids) {
  std::string out;
  out.reserve(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const std::int32_t id = ids[i];
    if (i == 0 && id == kBos) continue;
    if (id < 0 || id > 255) {
      throw InvalidArgument("token id " + std::to_string(id) + " is not a byte");
    }
    out.push_back(static_cast<char>(id));
  }
  return out;
}

std::string SerializeModel(const Model& model, const std::string& meta_json) {
  ValidateWeights(model.config, model.weights);
  nlohmann::json fields;
  fields["kind"] = "model";
  fields["config"] = ConfigToJson(model.config);
  fields["meta"] = nlohmann::json::parse(meta_json);
  std::vector<acwt::TensorView> views;
  for (const ConstTensorRef& t : ListTensors(model.config, model.weights)) {
    views.push_back({t.name, t.shape, t.values});
  }
  return acwt::Encode(fields, views);
}

Model DeserializeModel(std::string_view bytes) {
  acwt::File file = acwt::Decode(bytes);
  if (!file.header.contains("config")) throw FormatError("ACWT: not a model file");
  Model model;
  model.config = ConfigFromJson(file.header["config"]);
  try {
    model.config.Validate();
  } catch (const InvalidArgument& e) {
    throw FormatError(e.what());
  }
  model.weights = ZeroWeights(model.config);
  auto refs = ListTensors(model.config, model.weights);
  if (refs.size() != file.tensors.size()) {
    throw FormatError("ACWT: tensor count does not match config");
  }
  for (std::size_t i = 0; i < refs.size(); ++i) {
    const acwt::Tensor& src = file.tensors[i];
    if (src.name != refs[i].name || src.shape != refs[i].shape) {
      throw FormatError("ACWT: tensor '" + src.name + "' inconsistent with config");
    }
    if (!AllFinite(src.values)) {
      throw FormatError("ACWT: tensor '" + src.name + "' has non-finite values");
    }
    std::copy(src.values.begin(), src.values.end(), refs[i].values.begin());
  }
  return model;
}

void SaveModel(const std::filesystem::path& path, const Model& model,
               const std::string& meta_json) {
  acwt::WriteFileAtomic(path, SerializeModel(model, meta_json));
}

Model LoadModel(const std::filesystem::path& path) {
  return DeserializeModel(acwt::ReadFileBytes(path));
}

std::string ModelDigest(const Model& model) {
  return Sha256Hex(SerializeModel(model));
}

}  // namespace acomm
