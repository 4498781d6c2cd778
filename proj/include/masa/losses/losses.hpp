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

// Alignment and clustering objectives.
//
// Matching: every frame j of view A gets a soft match distribution γ_j over
// the frames of view B (softmax of cosine similarities), predicts its
// original index as Σ_k γ_jk·g_B(k) and is penalized by the distance to its
// true original index g_A(j). Both directions are averaged.
//
// Clustering: agreement (mean cosine) between one view's projected frames
// and the other view's predictor outputs over frames that share an original
// index, with the projected side detached.
//
// Composite: total = L_m · 2 / max(floor, 1 + ε + L_c).

#pragma once

#include <algorithm>
#include <string>
#include <utility>
#include <vector>

#include "masa/augment/augment.hpp"
#include "masa/diffcore/ops.hpp"
#include "masa/errors.hpp"

namespace masa::losses {

using augment::IndexMap;

enum class IndexError { kAbsolute, kSquared };

struct LossConfig {
  double epsilon = 1e-7;
  IndexError index_error = IndexError::kAbsolute;
  double denominator_floor = 1e-3;
  double temperature = 1.0;
  // Divide original indices by this value before regression (1 = raw
  // frame indices). The trainer sets it to the sequence length when
  // normalize_indices is on.
  bool normalize_indices = false;

  void validate() const {
    if (!(epsilon > 0)) throw ConfigError("loss: epsilon must be > 0");
    if (!(denominator_floor > 0)) throw ConfigError("loss: denominator_floor must be > 0");
    if (!(temperature > 0)) throw ConfigError("loss: temperature must be > 0");
  }
};

struct LossReport {
  double l_forward = 0;
  double l_backward = 0;
  double l_m = 0;
  double l_c = 0;
  double multiplier = 0;
  double total = 0;
  std::size_t matched_pairs = 0;
};

template <typename T>
Tensor<T> index_column(const IndexMap& map, double scale = 1.0) {
  Tensor<T> col = Tensor<T>::matrix(map.size(), 1);
  for (std::size_t k = 0; k < map.size(); ++k) col[k] = static_cast<T>(static_cast<double>(map[k]) / scale);
  return col;
}

/// γ[j,k] = softmax_k(cos(z_a[j], z_b[k]) / temperature).
template <typename T>
Var<T> match_matrix(Var<T> z_a, Var<T> z_b, double temperature = 1.0) {
  Var<T> c = ops::cosine_matrix(z_a, z_b);
  if (temperature != 1.0) c = ops::scale(c, static_cast<T>(1.0 / temperature));
  return ops::softmax_rows(c);
}

/// ĵ[j] = Σ_k γ[j,k]·g_b(k), an M×1 column.
template <typename T>
Var<T> predict_indices(Var<T> gamma, const IndexMap& map_b, double index_scale = 1.0) {
  if (gamma.cols() != map_b.size())
    throw ContractError("predict_indices: γ has " + std::to_string(gamma.cols()) + " columns but the index map has " +
                        std::to_string(map_b.size()) + " entries");
  return ops::matmul(gamma, gamma.tape->constant(index_column<T>(map_b, index_scale)));
}

/// (1/M) Σ_j err(g_a(j) − ĵ_j).
template <typename T>
Var<T> directional_matching_loss(Var<T> gamma, const IndexMap& map_a, const IndexMap& map_b, const LossConfig& cfg,
                                 double index_scale = 1.0) {
  if (gamma.rows() != map_a.size()) throw ContractError("directional_matching_loss: γ rows differ from map_a length");
  Var<T> pred = predict_indices(gamma, map_b, index_scale);
  Var<T> diff = ops::sub(pred, gamma.tape->constant(index_column<T>(map_a, index_scale)));
  return ops::mean(cfg.index_error == IndexError::kAbsolute ? ops::abs(diff) : ops::square(diff));
}

template <typename T>
struct MatchingTerms {
  Var<T> l_m;
  Var<T> l_forward;
  Var<T> l_backward;
};

/// L_m = ½(L_{A→B} + L_{B→A}). The reverse direction recomputes the softmax
/// over view A's frames. With bidirectional = false only A→B is used.
template <typename T>
MatchingTerms<T> matching_loss(Var<T> z_a, Var<T> z_b, const IndexMap& map_a, const IndexMap& map_b,
                               const LossConfig& cfg, double index_scale = 1.0, bool bidirectional = true) {
  Var<T> fwd = directional_matching_loss(match_matrix(z_a, z_b, cfg.temperature), map_a, map_b, cfg, index_scale);
  if (!bidirectional) return {fwd, fwd, z_a.tape->constant(Tensor<T>::scalar(T(0)))};
  Var<T> bwd = directional_matching_loss(match_matrix(z_b, z_a, cfg.temperature), map_b, map_a, cfg, index_scale);
  return {ops::scale(ops::add(fwd, bwd), T(0.5)), fwd, bwd};
}

/// Pairs (j, k) with g_a(j) == g_b(k). Index maps are strictly increasing, so
/// the pairs form a partial bijection.
inline std::vector<std::pair<std::size_t, std::size_t>> matched_pairs(const IndexMap& a, const IndexMap& b) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  std::size_t i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    if (a[i] == b[j]) {
      out.emplace_back(i, j);
      ++i;
      ++j;
    } else if (a[i] < b[j]) {
      ++i;
    } else {
      ++j;
    }
  }
  return out;
}

template <typename T>
struct Agreement {
  Var<T> value;
  std::size_t pairs = 0;
};

/// Mean cosine between v_j and w_k over matched pairs; (0, 0) without pairs.
template <typename T>
Agreement<T> cluster_agreement(Var<T> v, Var<T> w, const IndexMap& map_a, const IndexMap& map_b) {
  if (v.rows() != map_a.size() || w.rows() != map_b.size())
    throw ContractError("cluster_agreement: embedding rows differ from index map lengths");
  const auto pairs = matched_pairs(map_a, map_b);
  if (pairs.empty()) return {v.tape->constant(Tensor<T>::scalar(T(0))), 0};
  std::vector<std::size_t> ja, kb;
  for (const auto& [j, k] : pairs) {
    ja.push_back(j);
    kb.push_back(k);
  }
  return {ops::mean(ops::cosine_rows(ops::gather_rows(v, std::move(ja)), ops::gather_rows(w, std::move(kb)))),
          pairs.size()};
}

/// L_c = ½( c̄(sg(z_a), h_b) + c̄(sg(z_b), h_a) ).
template <typename T>
Agreement<T> clustering_loss(Var<T> z_a, Var<T> z_b, Var<T> h_a, Var<T> h_b, const IndexMap& map_a,
                             const IndexMap& map_b, bool stop_gradient = true) {
  Var<T> ta = stop_gradient ? ops::stop_gradient(z_a) : z_a;
  Var<T> tb = stop_gradient ? ops::stop_gradient(z_b) : z_b;
  Agreement<T> first = cluster_agreement(ta, h_b, map_a, map_b);
  Agreement<T> second = cluster_agreement(tb, h_a, map_b, map_a);
  return {ops::scale(ops::add(first.value, second.value), T(0.5)), first.pairs};
}

/// Multiplier 2 / max(floor, (1 + ε) + L_c) as a plain number.
inline double composite_multiplier(double l_c, const LossConfig& cfg) {
  return 2.0 / std::max(cfg.denominator_floor, (1.0 + cfg.epsilon) + l_c);
}

template <typename T>
Var<T> combined_loss(Var<T> l_m, Var<T> l_c, const LossConfig& cfg) {
  Var<T> den = ops::clamp_min(ops::add_scalar(l_c, static_cast<T>(1.0 + cfg.epsilon)),
                              static_cast<T>(cfg.denominator_floor));
  return ops::div(ops::scale(l_m, T(2)), den);
}

}  // namespace masa::losses
