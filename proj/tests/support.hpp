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

#include <cmath>
#include <filesystem>
#include <numeric>
#include <random>
#include <string>

#include "masa/augment/augment.hpp"
#include "masa/diffcore/tensor.hpp"
#include "masa/metrics/metrics.hpp"

namespace masa::testing {

template <typename T = float>
Tensor<T> random_matrix(std::size_t r, std::size_t c, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  Tensor<T> m = Tensor<T>::matrix(r, c);
  for (auto& v : m.values()) v = static_cast<T>(u(rng));
  return m;
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("masa_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

/// Count of bookkeeping violations in one temporal view of `original`:
/// non-increasing or out-of-range indices and rows that differ from the
/// original frame they claim to be.
inline std::size_t view_violations(const augment::AugmentedView& v, const Tensor<float>& original) {
  std::size_t bad = 0;
  const auto& idx = v.index_map.indices;
  if (idx.size() != v.features.rows()) return 1;
  for (std::size_t j = 0; j < idx.size(); ++j) {
    if (idx[j] >= original.rows() || (j > 0 && idx[j] <= idx[j - 1])) {
      ++bad;
      continue;
    }
    for (std::size_t c = 0; c < original.cols(); ++c)
      if (v.features(j, c) != original(idx[j], c)) {
        ++bad;
        break;
      }
  }
  return bad;
}

// Independent O(n²) enumeration: sign(n(j) − n(i)) with ties as −1.
inline double tau_oracle(const std::vector<std::size_t>& nn) {
  long long conc = 0, disc = 0;
  for (std::size_t i = 0; i < nn.size(); ++i)
    for (std::size_t j = i + 1; j < nn.size(); ++j) {
      if (nn[j] > nn[i])
        ++conc;
      else
        ++disc;
    }
  return static_cast<double>(conc - disc) / static_cast<double>(conc + disc);
}

/// Uniform noise embedding with uniformly random phase labels.
inline metrics::EvalSequence noise_sequence(const std::string& id, int activity, std::size_t t, std::size_t d,
                                            std::size_t phases, std::mt19937_64& rng) {
  metrics::EvalSequence s;
  s.id = id;
  s.activity = activity;
  s.embedding = random_matrix(t, d, rng());
  std::uniform_int_distribution<int> label(0, static_cast<int>(phases) - 1);
  for (std::size_t i = 0; i < t; ++i) s.phases.push_back(label(rng));
  return s;
}

struct MeanSe {
  double mean, se;
};

inline MeanSe mean_se(const std::vector<double>& v) {
  const double n = static_cast<double>(v.size());
  const double m = std::accumulate(v.begin(), v.end(), 0.0) / n;
  double ss = 0;
  for (double x : v) ss += (x - m) * (x - m);
  return {m, std::sqrt(ss / (n - 1) / n)};
}

}  // namespace masa::testing
