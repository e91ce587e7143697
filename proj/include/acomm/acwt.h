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

#ifndef ACOMM_ACWT_H_
#define ACOMM_ACWT_H_

// ACWT container: "ACWT" | u32 LE version (1) | u32 LE header length |
// UTF-8 JSON header | payload of LE float32, row-major. The header holds
// arbitrary top-level fields plus a "tensors" directory of
// {name, shape, byte_offset}; offsets are relative to the payload start and
// tensors are contiguous, in directory order, and non-overlapping.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace acomm::acwt {

inline constexpr char kMagic[4] = {'A', 'C', 'W', 'T'};
inline constexpr std::uint32_t kVersion = 1;

struct TensorView {
  std::string name;
  std::vector<std::int64_t> shape;
  std::span<const float> values;
};

struct Tensor {
  std::string name;
  std::vector<std::int64_t> shape;
  std::vector<float> values;
};

struct File {
  nlohmann::json header;  // without the "tensors" directory
  std::vector<Tensor> tensors;

  // Throws FormatError when absent.
  const Tensor& Find(std::string_view name) const;
};

// `fields` must be a JSON object and must not contain "tensors".
std::string Encode(const nlohmann::json& fields,
                   std::span<const TensorView> tensors);
// Rejects bad magic, version mismatch, malformed header, shape/offset
// inconsistency and truncated or oversized payloads with FormatError.
File Decode(std::string_view bytes);

std::string ReadFileBytes(const std::filesystem::path& path);
// Writes to a sibling temporary file and renames it into place.
void WriteFileAtomic(const std::filesystem::path& path, std::string_view bytes);

}  // namespace acomm::acwt

#endif  // ACOMM_ACWT_H_
