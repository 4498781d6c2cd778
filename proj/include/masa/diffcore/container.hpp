// Copyright 2026 The masa-align Authors
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

// Binary tensor container shared by checkpoints, sequence files and
// embedding files.
//
//   "MASA" | u16 version (=1) | u32 count |
//   count × ( u16 name_len | name bytes | u8 rank | u32 dims[rank] | f32 payload )
//
// All integers and floats are little-endian.

#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "masa/diffcore/tensor.hpp"
#include "masa/errors.hpp"

namespace masa::container {

static_assert(std::endian::native == std::endian::little, "container I/O assumes a little-endian host");

inline constexpr char kMagic[4] = {'M', 'A', 'S', 'A'};
inline constexpr std::uint16_t kVersion = 1;

using NamedTensor = std::pair<std::string, Tensor<float>>;

namespace detail {

template <typename I>
void put(std::vector<std::uint8_t>& out, I v) {
  std::uint8_t b[sizeof(I)];
  std::memcpy(b, &v, sizeof(I));
  out.insert(out.end(), b, b + sizeof(I));
}

class Reader {
 public:
  explicit Reader(const std::vector<std::uint8_t>& bytes) : bytes_(bytes) {}

  template <typename I>
  I get(const char* what) {
    need(sizeof(I), what);
    I v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof(I));
    pos_ += sizeof(I);
    return v;
  }

  std::string get_string(std::size_t n) {
    need(n, "tensor name");
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }

  void get_floats(float* dst, std::size_t n) {
    if (n > (bytes_.size() - pos_) / sizeof(float))
      throw FormatError("truncated payload: expected " + std::to_string(n) + " floats", pos_);
    std::memcpy(dst, bytes_.data() + pos_, n * sizeof(float));
    pos_ += n * sizeof(float);
  }

  std::size_t pos() const noexcept { return pos_; }
  bool done() const noexcept { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n, const char* what) {
    if (bytes_.size() - pos_ < n) throw FormatError(std::string("truncated ") + what, pos_);
  }

  const std::vector<std::uint8_t>& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline std::vector<std::uint8_t> encode(const std::vector<NamedTensor>& tensors) {
  std::vector<std::uint8_t> out(std::begin(kMagic), std::end(kMagic));
  detail::put<std::uint16_t>(out, kVersion);
  masa::detail::require(tensors.size() <= std::numeric_limits<std::uint32_t>::max(), "container: too many tensors");
  detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(tensors.size()));
  for (const auto& [name, t] : tensors) {
    masa::detail::require(!name.empty() && name.size() <= std::numeric_limits<std::uint16_t>::max(),
                          "container: invalid tensor name length");
    masa::detail::require(t.rank() >= 1 && t.rank() <= 255, "container: unsupported rank for '" + name + "'");
    detail::put<std::uint16_t>(out, static_cast<std::uint16_t>(name.size()));
    out.insert(out.end(), name.begin(), name.end());
    out.push_back(static_cast<std::uint8_t>(t.rank()));
    for (std::size_t d : t.dims()) {
      masa::detail::require(d >= 1 && d <= std::numeric_limits<std::uint32_t>::max(),
                            "container: invalid dimension in '" + name + "'");
      detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(d));
    }
    const auto* p = reinterpret_cast<const std::uint8_t*>(t.data());
    out.insert(out.end(), p, p + t.size() * sizeof(float));
  }
  return out;
}

inline std::vector<NamedTensor> decode(const std::vector<std::uint8_t>& bytes) {
  detail::Reader r(bytes);
  for (char c : kMagic) {
    const std::size_t at = r.pos();
    if (r.get<std::uint8_t>("magic") != static_cast<std::uint8_t>(c)) throw FormatError("bad magic", at);
  }
  {
    const std::size_t at = r.pos();
    const auto version = r.get<std::uint16_t>("version");
    if (version != kVersion) throw FormatError("unsupported version " + std::to_string(version), at);
  }
  const auto count = r.get<std::uint32_t>("tensor count");
  std::vector<NamedTensor> out;
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::size_t at = r.pos();
    const auto len = r.get<std::uint16_t>("name length");
    if (len == 0) throw FormatError("empty tensor name", at);
    std::string name = r.get_string(len);
    const std::size_t rank_at = r.pos();
    const auto rank = r.get<std::uint8_t>("rank");
    if (rank == 0) throw FormatError("zero rank for tensor '" + name + "'", rank_at);
    std::vector<std::size_t> dims;
    std::size_t count_elems = 1;
    for (std::uint8_t d = 0; d < rank; ++d) {
      const std::size_t dim_at = r.pos();
      const auto dim = r.get<std::uint32_t>("dims");
      if (dim == 0) throw FormatError("zero dimension in tensor '" + name + "'", dim_at);
      if (count_elems > (bytes.size() / sizeof(float)) / dim)
        throw FormatError("dims of '" + name + "' exceed the file size", dim_at);
      count_elems *= dim;
      dims.push_back(dim);
    }
    Tensor<float> t(dims);
    r.get_floats(t.data(), t.size());
    out.emplace_back(std::move(name), std::move(t));
  }
  if (!r.done()) throw FormatError("trailing bytes after last tensor", r.pos());
  return out;
}

inline void write_file(const std::string& path, const std::vector<NamedTensor>& tensors) {
  const auto bytes = encode(tensors);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot open '" + path + "' for writing");
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw std::runtime_error("write failed for '" + path + "'");
}

inline std::vector<std::uint8_t> read_bytes(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open '" + path + "'");
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

inline std::vector<NamedTensor> read_file(const std::string& path) { return decode(read_bytes(path)); }

/// Name and dims of the first tensor in a file; used by manifest validation.
inline std::pair<std::string, std::vector<std::size_t>> peek_first(const std::string& path) {
  const auto tensors = read_file(path);
  if (tensors.empty()) throw FormatError("container '" + path + "' holds no tensors", 10);
  return {tensors.front().first, tensors.front().second.dims()};
}

}  // namespace masa::container
