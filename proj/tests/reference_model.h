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

#ifndef ACOMM_TESTS_REFERENCE_MODEL_H_
#define ACOMM_TESTS_REFERENCE_MODEL_H_

// Naive double-precision transformer used as an oracle. It materializes full
// t x t attention matrices with an explicit causal mask and shares no code
// with the engine.

#include <cmath>
#include <cstdint>
#include <vector>

#include "acomm/model.h"

namespace acomm::testing {

using Mat = std::vector<std::vector<double>>;

inline Mat ToMat(const Matrix& m) {
  Mat out(m.rows(), std::vector<double>(m.cols()));
  for (int r = 0; r < m.rows(); ++r)
    for (int c = 0; c < m.cols(); ++c) out[r][c] = m(r, c);
  return out;
}

inline Mat MatMul(const Mat& a, const Matrix& w) {
  Mat out(a.size(), std::vector<double>(w.cols(), 0.0));
  for (std::size_t r = 0; r < a.size(); ++r)
    for (int c = 0; c < w.cols(); ++c) {
      double s = 0.0;
      for (int i = 0; i < w.rows(); ++i) s += a[r][i] * w(i, c);
      out[r][c] = s;
    }
  return out;
}

inline Mat RefLayerNorm(const Mat& x, const std::vector<float>& g, const std::vector<float>& b,
                        double eps) {
  Mat out = x;
  for (std::size_t r = 0; r < x.size(); ++r) {
    const double n = static_cast<double>(x[r].size());
    double mean = 0.0, var = 0.0;
    for (double v : x[r]) mean += v;
    mean /= n;
    for (double v : x[r]) var += (v - mean) * (v - mean);
    var /= n;
    for (std::size_t c = 0; c < x[r].size(); ++c)
      out[r][c] = (x[r][c] - mean) / std::sqrt(var + eps) * g[c] + b[c];
  }
  return out;
}

inline Mat RefBlock(const Mat& x, const LayerWeights& w, const ModelConfig& cfg) {
  const std::size_t t = x.size();
  const int heads = cfg.n_heads, ks = cfg.key_size;
  const Mat h = RefLayerNorm(x, w.ln1_gain, w.ln1_bias, cfg.ln_epsilon);
  const Mat q = MatMul(h, w.wq), k = MatMul(h, w.wk), v = MatMul(h, w.wv);
  Mat attn(t, std::vector<double>(cfg.model_dim, 0.0));
  for (int hd = 0; hd < heads; ++hd) {
    Mat scores(t, std::vector<double>(t, 0.0));
    for (std::size_t i = 0; i < t; ++i)
      for (std::size_t j = 0; j < t; ++j) {
        if (j > i) {
          scores[i][j] = -INFINITY;
          continue;
        }
        double s = 0.0;
        for (int c = 0; c < ks; ++c) s += q[i][hd * ks + c] * k[j][hd * ks + c];
        scores[i][j] = s / std::sqrt(static_cast<double>(ks));
      }
    for (std::size_t i = 0; i < t; ++i) {
      double mx = -INFINITY, z = 0.0;
      for (double s : scores[i]) mx = std::max(mx, s);
      for (double& s : scores[i]) {
        s = std::exp(s - mx);
        z += s;
      }
      for (std::size_t j = 0; j < t; ++j)
        for (int c = 0; c < ks; ++c) attn[i][hd * ks + c] += scores[i][j] / z * v[j][hd * ks + c];
    }
  }
  const Mat proj = MatMul(attn, w.wo);
  Mat y = x;
  for (std::size_t i = 0; i < t; ++i)
    for (int c = 0; c < cfg.model_dim; ++c) y[i][c] += proj[i][c];
  const Mat h2 = RefLayerNorm(y, w.ln2_gain, w.ln2_bias, cfg.ln_epsilon);
  Mat up = MatMul(h2, w.ffn_up);
  for (auto& row : up)
    for (std::size_t c = 0; c < row.size(); ++c) {
      const double u = row[c] + w.ffn_up_bias[c];
      row[c] = 0.5 * u * (1.0 + std::tanh(std::sqrt(2.0 / M_PI) * (u + 0.044715 * u * u * u)));
    }
  const Mat down = MatMul(up, w.ffn_down);
  for (std::size_t i = 0; i < t; ++i)
    for (int c = 0; c < cfg.model_dim; ++c) y[i][c] += down[i][c] + w.ffn_down_bias[c];
  return y;
}

inline Mat RefForwardUntil(const Model& m, const std::vector<std::int32_t>& tokens, int layer) {
  Mat x(tokens.size(), std::vector<double>(m.config.model_dim));
  for (std::size_t p = 0; p < tokens.size(); ++p)
    for (int c = 0; c < m.config.model_dim; ++c)
      x[p][c] = static_cast<double>(m.weights.token_embedding(tokens[p], c)) +
                m.weights.positional_embedding(static_cast<int>(p), c);
  for (int l = 0; l < layer; ++l) x = RefBlock(x, m.weights.layers[l], m.config);
  return x;
}

inline Mat RefForwardFrom(const Model& m, Mat x, int layer) {
  for (int l = layer; l < m.config.n_layers; ++l) x = RefBlock(x, m.weights.layers[l], m.config);
  return MatMul(RefLayerNorm(x, m.weights.final_gain, m.weights.final_bias, m.config.ln_epsilon),
                m.weights.unembedding);
}

inline double MaxAbs(const Mat& a) {
  double mx = 0.0;
  for (const auto& r : a)
    for (double v : r) mx = std::max(mx, std::abs(v));
  return mx;
}

// max |a - b| / max(max |b|, 1e-12)
inline double RelError(const Matrix& a, const Mat& b) {
  double diff = 0.0;
  for (int r = 0; r < a.rows(); ++r)
    for (int c = 0; c < a.cols(); ++c) diff = std::max(diff, std::abs(a(r, c) - b[r][c]));
  return diff / std::max(MaxAbs(b), 1e-12);
}

inline double RelError(const Matrix& a, const Matrix& b) { return RelError(a, ToMat(b)); }

}  // namespace acomm::testing

#endif  // ACOMM_TESTS_REFERENCE_MODEL_H_
