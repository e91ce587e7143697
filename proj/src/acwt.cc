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

#include "acomm/acwt.h"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "acomm/error.h"

namespace acomm::acwt {
namespace {

void PutU32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint32_t GetU32(std::string_view bytes, std::size_t at) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) {
    v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[at + i]))
         << (8 * i);
  }
  return v;
}

std::int64_t ElementCount(const std::vector<std::int64_t>& shape) {
  std::int64_t n = 1;
  for (std::int64_t d : shape) {
    if (d < 0) throw FormatError("negative tensor dimension");
    if (d != 0 && n > INT64_MAX / d) throw FormatError("tensor too large");
    n *= d;
  }
  return n;
}

}  // namespace

const Tensor& File::Find(std::string_view name) const {
  for (const Tensor& t : tensors) {
    if (t.name == name) return t;
  }
  throw FormatError("missing tensor '" + std::string(name) + "'");
}

std::string Encode(const nlohmann::json& fields,
                   std::span<const TensorView> tensors) {
  if (!fields.is_object() || fields.contains("tensors")) {
    throw InvalidArgument("ACWT header fields must be an object without 'tensors'");
  }
  nlohmann::json header = fields;
  nlohmann::json directory = nlohmann::json::array();
  std::int64_t offset = 0;
  for (const TensorView& t : tensors) {
    const std::int64_t count = ElementCount(t.shape);
    if (count != static_cast<std::int64_t>(t.values.size())) {
      throw InvalidArgument("tensor '" + t.name + "' values do not match shape");
    }
    directory.push_back({{"name", t.name}, {"shape", t.shape}, {"byte_offset", offset}});
    offset += count * 4;
  }
  header["tensors"] = std::move(directory);
  const std::string header_text = header.dump();

  std::string out;
  out.reserve(12 + header_text.size() + static_cast<std::size_t>(offset));
  out.append(kMagic, 4);
  PutU32(out, kVersion);
  PutU32(out, static_cast<std::uint32_t>(header_text.size()));
  out += header_text;
  for (const TensorView& t : tensors) {
    for (float v : t.values) PutU32(out, std::bit_cast<std::uint32_t>(v));
  }
  return out;
}

File Decode(std::string_view bytes) {
  if (bytes.size() < 12) throw FormatError("ACWT: file too short");
  if (std::memcmp(bytes.data(), kMagic, 4) != 0) throw FormatError("ACWT: bad magic");
  const std::uint32_t version = GetU32(bytes, 4);
  if (version != kVersion) {
    throw FormatError("ACWT: unsupported version " + std::to_string(version));
  }
  const std::uint32_t header_len = GetU32(bytes, 8);
  if (bytes.size() - 12 < header_len) throw FormatError("ACWT: truncated header");

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.substr(12, header_len));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("ACWT: malformed header: ") + e.what());
  }
  if (!header.is_object() || !header.contains("tensors") ||
      !header["tensors"].is_array()) {
    throw FormatError("ACWT: header lacks a tensor directory");
  }

  const std::string_view payload = bytes.substr(12 + header_len);
  File file;
  std::int64_t expected_offset = 0;
  try {
    for (const auto& entry : header["tensors"]) {
      Tensor t;
      t.name = entry.at("name").get<std::string>();
      t.shape = entry.at("shape").get<std::vector<std::int64_t>>();
      const auto offset = entry.at("byte_offset").get<std::int64_t>();
      if (offset != expected_offset) {
        throw FormatError("ACWT: tensor '" + t.name + "' has inconsistent byte_offset");
      }
      const std::int64_t count = ElementCount(t.shape);
      if (count > (static_cast<std::int64_t>(payload.size()) - offset) / 4) {
        throw FormatError("ACWT: payload truncated at tensor '" + t.name + "'");
      }
      t.values.resize(static_cast<std::size_t>(count));
      for (std::int64_t i = 0; i < count; ++i) {
        t.values[i] = std::bit_cast<float>(
            GetU32(payload, static_cast<std::size_t>(offset + 4 * i)));
      }
      expected_offset = offset + 4 * count;
      file.tensors.push_back(std::move(t));
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("ACWT: malformed tensor directory: ") + e.what());
  }
  if (expected_offset != static_cast<std::int64_t>(payload.size())) {
    throw FormatError("ACWT: payload length does not match tensor directory");
  }
  header.erase("tensors");
  file.header = std::move(header);
  return file;
}

std::string ReadFileBytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidArgument("cannot open '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return std::move(buf).str();
}

void WriteFileAtomic(const std::filesystem::path& path, std::string_view bytes) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write '" + tmp.string() + "'");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error("short write to '" + tmp.string() + "'");
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace acomm::acwt
