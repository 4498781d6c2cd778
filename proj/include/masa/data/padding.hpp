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

#include <algorithm>
#include <span>
#include <string>
#include <vector>

#include "masa/data/sequence.hpp"

namespace masa::data {

/// B sequences zero-padded to a common length. mask[b][t] is true for the
/// first lengths[b] positions only.
struct PaddedBatch {
  Tensor<float> features;  // B×T_max×D
  std::vector<std::vector<bool>> mask;
  std::vector<std::size_t> lengths;

  std::size_t batch() const { return lengths.size(); }
  std::size_t max_length() const { return features.rank() == 3 ? features.dims()[1] : 0; }
  std::size_t dim() const { return features.rank() == 3 ? features.dims()[2] : 0; }

  /// Item b as a T_max×D matrix (padded rows included).
  Matrix item(std::size_t b) const {
    const std::size_t t = max_length(), d = dim();
    Matrix out = Matrix::matrix(t, d);
    std::copy_n(features.data() + b * t * d, t * d, out.data());
    return out;
  }
};

inline PaddedBatch pad_batch(std::span<const FeatureSequence> seqs, std::size_t max_length) {
  PaddedBatch out;
  const std::size_t d = seqs.empty() ? 0 : seqs.front().dim();
  for (const auto& s : seqs) {
    if (s.length() > max_length)
      throw ContractError("pad_batch: sequence '" + s.sequence_id + "' has length " + std::to_string(s.length()) +
                          " > max_length " + std::to_string(max_length));
    if (s.dim() != d) throw ContractError("pad_batch: sequence '" + s.sequence_id + "' has mismatched feature dim");
  }
  out.features = Tensor<float>({seqs.size(), max_length, d});
  for (std::size_t b = 0; b < seqs.size(); ++b) {
    const auto& f = seqs[b].features;
    std::copy_n(f.data(), f.size(), out.features.data() + b * max_length * d);
    std::vector<bool> m(max_length, false);
    std::fill_n(m.begin(), f.rows(), true);
    out.mask.push_back(std::move(m));
    out.lengths.push_back(f.rows());
  }
  return out;
}

}  // namespace masa::data
