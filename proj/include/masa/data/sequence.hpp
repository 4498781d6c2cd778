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

#pragma once

#include <charconv>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "masa/diffcore/container.hpp"
#include "masa/diffcore/tensor.hpp"
#include "masa/errors.hpp"

namespace masa::data {

inline constexpr const char* kFeaturesTensor = "features";

/// Unlabeled training input: the only thing the trainer ever sees.
struct TrainingSample {
  std::string sequence_id;
  Matrix features;  // T×D
};

/// A T×D feature matrix with optional evaluation labels.
struct FeatureSequence {
  std::string sequence_id;
  Matrix features;               // T×D
  int activity_id = -1;          // -1 when unknown
  std::vector<int> phase_labels;  // empty or length T
  std::vector<float> progress;    // empty or length T, canonical progress in [0,1]

  std::size_t length() const { return features.rows(); }
  std::size_t dim() const { return features.cols(); }
};

inline void validate_features(const Matrix& f, const std::string& what) {
  if (f.rank() != 2) throw ContractError(what + ": features must be rank 2, got " + shape_string(f.dims()));
  if (f.rows() < 2) throw ContractError(what + ": sequence needs at least 2 frames");
  if (!f.all_finite()) throw ContractError(what + ": non-finite feature values");
}

inline void save_sequence(const FeatureSequence& seq, const std::string& path) {
  validate_features(seq.features, "save_sequence(" + seq.sequence_id + ")");
  container::write_file(path, {{kFeaturesTensor, seq.features}});
}

/// Loads features only; the sequence id is the file stem.
inline FeatureSequence load_sequence(const std::string& path) {
  const auto bytes = container::read_bytes(path);
  auto tensors = container::decode(bytes);
  if (tensors.size() != 1 || tensors.front().first != kFeaturesTensor)
    throw FormatError("sequence file '" + path + "' must hold exactly one tensor named 'features'", 6);
  auto& t = tensors.front().second;
  if (t.rank() != 2 || t.rows() < 2)
    throw FormatError("sequence file '" + path + "' has invalid dims " + shape_string(t.dims()), 10);
  if (!t.all_finite()) throw FormatError("sequence file '" + path + "' holds non-finite values", 10);
  FeatureSequence seq;
  seq.sequence_id = std::filesystem::path(path).stem().string();
  seq.features = std::move(t);
  return seq;
}

// Sidecar label files: one value per line.

template <typename V>
void write_lines(const std::string& path, const std::vector<V>& values) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw std::runtime_error("cannot open '" + path + "' for writing");
  f.precision(9);
  for (const auto& v : values) f << v << '\n';
  if (!f) throw std::runtime_error("write failed for '" + path + "'");
}

inline std::vector<int> read_int_lines(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open '" + path + "'");
  std::vector<int> out;
  std::string line;
  std::size_t offset = 0;
  while (std::getline(f, line)) {
    const std::size_t line_len = line.size() + 1;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) {
      int v = 0;
      const auto [ptr, ec] = std::from_chars(line.data(), line.data() + line.size(), v);
      if (ec != std::errc() || ptr != line.data() + line.size())
        throw FormatError("'" + path + "': not an integer: '" + line + "'", offset);
      out.push_back(v);
    }
    offset += line_len;
  }
  return out;
}

inline std::vector<float> read_float_lines(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open '" + path + "'");
  std::vector<float> out;
  std::string line;
  std::size_t offset = 0;
  while (std::getline(f, line)) {
    const std::size_t line_len = line.size() + 1;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) {
      std::istringstream is(line);
      float v = 0;
      if (!(is >> v) || !(is >> std::ws).eof())
        throw FormatError("'" + path + "': not a number: '" + line + "'", offset);
      out.push_back(v);
    }
    offset += line_len;
  }
  return out;
}

}  // namespace masa::data
