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

#include "acomm/tensor.h"

#include <algorithm>
#include <cmath>
#include <utility>

#include "acomm/error.h"

namespace acomm {

Matrix::Matrix(int rows, int cols, std::vector<float> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (rows < 0 || cols < 0 ||
      data_.size() != static_cast<std::size_t>(rows) * cols) {
    throw InvalidArgument("matrix data does not match its shape");
  }
}

bool Matrix::AllFinite() const { return acomm::AllFinite(data_); }

bool AllFinite(std::span<const float> values) {
  return std::all_of(values.begin(), values.end(),
                     [](float v) { return std::isfinite(v); });
}

void VecMat(std::span<const float> x, const Matrix& w, std::span<float> out) {
  const int n_in = w.rows();
  const int n_out = w.cols();
  std::fill(out.begin(), out.end(), 0.0f);
  for (int i = 0; i < n_in; ++i) {
    const float xi = x[i];
    const auto wr = w.row(i);
    for (int o = 0; o < n_out; ++o) out[o] += xi * wr[o];
  }
}

}  // namespace acomm
