// Copyright 2026 The C2Gen Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Checkpoint file layout (all integers little-endian):
//
//   offset  size  field
//   0       8     magic "C2GENCKP"
//   8       4     u32 format version (1)
//   12      8     u64 seed
//   20      8     u64 optimizer step count
//   28      4     u32 config length L
//   32      L     config echo, UTF-8 JSON
//   ...     4     u32 tensor count T
//   then T records:
//           4     u32 name length K
//           K     name (ASCII)
//           4     u32 rows
//           4     u32 cols
//           4*R*C float32 values, row-major

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>

#include "c2gen/model.hpp"

namespace c2gen::nn {

inline constexpr char kCheckpointMagic[8] = {'C', '2', 'G', 'E', 'N', 'C', 'K', 'P'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  std::string config_json;
  std::uint64_t seed = 0;
  std::uint64_t step = 0;
  ModelParams params;
};

namespace detail {

inline void put_u32(std::ostream& os, std::uint32_t v) {
  char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
  os.write(b, 4);
}
inline void put_u64(std::ostream& os, std::uint64_t v) {
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
  os.write(b, 8);
}
inline std::uint32_t get_u32(std::istream& is) {
  unsigned char b[4];
  if (!is.read(reinterpret_cast<char*>(b), 4)) throw Error("checkpoint: truncated");
  std::uint32_t v = 0;
  for (int i = 3; i >= 0; --i) v = (v << 8) | b[i];
  return v;
}
inline std::uint64_t get_u64(std::istream& is) {
  unsigned char b[8];
  if (!is.read(reinterpret_cast<char*>(b), 8)) throw Error("checkpoint: truncated");
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | b[i];
  return v;
}
inline std::string get_bytes(std::istream& is, std::uint32_t n) {
  std::string s(n, '\0');
  if (n && !is.read(s.data(), n)) throw Error("checkpoint: truncated");
  return s;
}

}  // namespace detail

inline void write_checkpoint(std::ostream& os, const Checkpoint& ck) {
  os.write(kCheckpointMagic, 8);
  detail::put_u32(os, kCheckpointVersion);
  detail::put_u64(os, ck.seed);
  detail::put_u64(os, ck.step);
  detail::put_u32(os, static_cast<std::uint32_t>(ck.config_json.size()));
  os.write(ck.config_json.data(), static_cast<std::streamsize>(ck.config_json.size()));
  auto tensors = ck.params.tensors();
  detail::put_u32(os, static_cast<std::uint32_t>(tensors.size()));
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    const Matrix& t = *tensors[i];
    const std::string name = kTensorNames[i];
    detail::put_u32(os, static_cast<std::uint32_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    detail::put_u32(os, static_cast<std::uint32_t>(t.rows()));
    detail::put_u32(os, static_cast<std::uint32_t>(t.cols()));
    for (Eigen::Index r = 0; r < t.rows(); ++r)
      for (Eigen::Index c = 0; c < t.cols(); ++c)
        detail::put_u32(os, std::bit_cast<std::uint32_t>(static_cast<float>(t(r, c))));
  }
  if (!os) throw Error("checkpoint: write failed");
}

inline Checkpoint read_checkpoint(std::istream& is) {
  char magic[8];
  if (!is.read(magic, 8) || std::memcmp(magic, kCheckpointMagic, 8) != 0)
    throw Error("checkpoint: bad magic");
  if (detail::get_u32(is) != kCheckpointVersion) throw Error("checkpoint: unsupported version");
  Checkpoint ck;
  ck.seed = detail::get_u64(is);
  ck.step = detail::get_u64(is);
  ck.config_json = detail::get_bytes(is, detail::get_u32(is));
  const std::uint32_t count = detail::get_u32(is);
  if (count != kTensorCount) throw Error("checkpoint: unexpected tensor count");
  auto tensors = ck.params.tensors();
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::string name = detail::get_bytes(is, detail::get_u32(is));
    if (name != kTensorNames[i]) throw Error("checkpoint: unexpected tensor '" + name + "'");
    const std::uint32_t rows = detail::get_u32(is);
    const std::uint32_t cols = detail::get_u32(is);
    Matrix& t = *tensors[i];
    t.resize(rows, cols);
    for (std::uint32_t r = 0; r < rows; ++r)
      for (std::uint32_t c = 0; c < cols; ++c)
        t(r, c) = static_cast<double>(std::bit_cast<float>(detail::get_u32(is)));
  }
  return ck;
}

inline void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ck) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot write checkpoint " + path.string());
  write_checkpoint(os, ck);
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("cannot read checkpoint " + path.string());
  return read_checkpoint(is);
}

}  // namespace c2gen::nn
