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

// Dual augmentation with exact index bookkeeping.
//
// Every view carries an IndexMap: the strictly increasing list of original
// frame indices its rows were copied from. Temporal operations only select
// rows; spatial operations only change values. The frame correspondence
// between two views of one sequence is therefore always known exactly.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "masa/diffcore/tensor.hpp"
#include "masa/errors.hpp"

namespace masa::augment {

/// Strictly increasing original-frame indices of a view's rows.
struct IndexMap {
  std::vector<std::size_t> indices;

  std::size_t size() const { return indices.size(); }
  std::size_t operator[](std::size_t j) const { return indices[j]; }

  static IndexMap identity(std::size_t n) {
    IndexMap m;
    m.indices.resize(n);
    for (std::size_t i = 0; i < n; ++i) m.indices[i] = i;
    return m;
  }

  bool valid_for(std::size_t original_length) const {
    for (std::size_t j = 0; j < indices.size(); ++j) {
      if (indices[j] >= original_length) return false;
      if (j && indices[j] <= indices[j - 1]) return false;
    }
    return true;
  }

  friend bool operator==(const IndexMap&, const IndexMap&) = default;
};

/// Number of original indices present in both maps.
inline std::size_t overlap(const IndexMap& a, const IndexMap& b) {
  std::size_t i = 0, j = 0, n = 0;
  while (i < a.size() && j < b.size()) {
    if (a[i] == b[j]) {
      ++n;
      ++i;
      ++j;
    } else if (a[i] < b[j]) {
      ++i;
    } else {
      ++j;
    }
  }
  return n;
}

enum class ViewTag { kPrime, kDoublePrime };

struct AugmentedView {
  Matrix features;  // M×D
  IndexMap index_map;
  ViewTag tag = ViewTag::kPrime;

  std::size_t length() const { return features.rows(); }
};

/// "dense" data (RGB-like or synthetic feature streams) may be trimmed;
/// "skeleton" data (J×3 joint coordinates) skips trimming but may receive
/// spatial transforms.
enum class Modality { kDense, kSkeleton };

struct SpatialConfig {
  bool enabled = false;
  double angle_max_deg = 15.0;
  double translation_sigma = 0.05;
  double flip_probability = 0.0;
  std::vector<std::size_t> joint_mirror_permutation;
  std::size_t lateral_axis = 0;   // negated by a mirror flip
  std::size_t vertical_axis = 1;  // rotation axis
};

struct AugmentConfig {
  Modality modality = Modality::kDense;
  bool trim_enabled = true;
  double trim_min_fraction = 0.5;
  bool drop_enabled = true;
  double keep_min = 0.5;
  double keep_max = 1.0;
  std::size_t min_overlap_frames = 8;
  std::size_t max_attempts = 32;
  SpatialConfig spatial;

  void validate() const {
    if (!(trim_min_fraction > 0.0 && trim_min_fraction <= 1.0))
      throw ConfigError("augment: trim_min_fraction must be in (0,1]");
    if (!(keep_min > 0.0 && keep_min <= keep_max && keep_max <= 1.0))
      throw ConfigError("augment: keep-probability range must lie within (0,1]");
    if (min_overlap_frames < 1) throw ConfigError("augment: min_overlap_frames must be >= 1");
    if (max_attempts < 1) throw ConfigError("augment: max_attempts must be >= 1");
    if (spatial.enabled && spatial.flip_probability > 0.0 && spatial.joint_mirror_permutation.empty())
      throw ConfigError("augment: flip requested without a joint_mirror_permutation table");
  }

  /// Trimming applies only to dense data.
  bool trims() const { return trim_enabled && modality == Modality::kDense; }
};

using Rng = std::mt19937_64;

/// Identity view of a whole sequence.
inline AugmentedView whole(const Matrix& seq, ViewTag tag = ViewTag::kPrime) {
  return AugmentedView{seq, IndexMap::identity(seq.rows()), tag};
}

/// Contiguous window [begin, end) of the view.
inline AugmentedView trim(const AugmentedView& view, std::size_t begin, std::size_t end) {
  if (end > view.length() || begin >= end || end - begin < 2)
    throw ContractError("trim: invalid window [" + std::to_string(begin) + "," + std::to_string(end) +
                        ") for a view of length " + std::to_string(view.length()));
  AugmentedView out;
  out.tag = view.tag;
  const std::size_t d = view.features.cols();
  out.features = Matrix::matrix(end - begin, d);
  std::copy_n(view.features.data() + begin * d, (end - begin) * d, out.features.data());
  out.index_map.indices.assign(view.index_map.indices.begin() + static_cast<std::ptrdiff_t>(begin),
                               view.index_map.indices.begin() + static_cast<std::ptrdiff_t>(end));
  return out;
}

/// Keeps the rows whose flag is set; order is preserved.
inline AugmentedView select(const AugmentedView& view, const std::vector<bool>& keep) {
  detail::require(keep.size() == view.length(), "select: keep pattern length mismatch");
  AugmentedView out;
  out.tag = view.tag;
  const std::size_t d = view.features.cols();
  const std::size_t n = static_cast<std::size_t>(std::count(keep.begin(), keep.end(), true));
  out.features = Matrix::matrix(n, d);
  std::size_t r = 0;
  for (std::size_t j = 0; j < keep.size(); ++j) {
    if (!keep[j]) continue;
    std::copy_n(view.features.data() + j * d, d, out.features.data() + r * d);
    out.index_map.indices.push_back(view.index_map[j]);
    ++r;
  }
  return out;
}

/// Per-frame Bernoulli(keep_prob) retention. If fewer than two frames
/// survive, the first and last frames are forced back in.
inline AugmentedView temporal_drop(const AugmentedView& view, double keep_prob, Rng& rng) {
  detail::require(keep_prob > 0.0 && keep_prob <= 1.0, "temporal_drop: keep_prob must be in (0,1]");
  std::vector<bool> keep(view.length(), true);
  if (keep_prob < 1.0) {
    std::bernoulli_distribution coin(keep_prob);
    for (std::size_t j = 0; j < keep.size(); ++j) keep[j] = coin(rng);
    if (std::count(keep.begin(), keep.end(), true) < 2 && !keep.empty()) {
      keep.front() = true;
      keep.back() = true;
    }
  }
  return select(view, keep);
}

// Spatial transforms on J×3 joint layouts. Each frame row is J consecutive
// (x, y, z) triples.

inline void require_joint_layout(const AugmentedView& view) {
  if (view.features.cols() % 3 != 0)
    throw ContractError("spatial_transform: feature width " + std::to_string(view.features.cols()) +
                        " is not a J×3 joint layout");
}

/// Rotation by `radians` about the vertical axis, applied to every joint.
inline AugmentedView rotate_vertical(const AugmentedView& view, double radians, const SpatialConfig& cfg = {}) {
  require_joint_layout(view);
  detail::require(cfg.vertical_axis < 3, "rotate_vertical: axis out of range");
  // Horizontal-plane axes in cyclic order.
  const std::size_t a = (cfg.vertical_axis + 1) % 3;
  const std::size_t b = (cfg.vertical_axis + 2) % 3;
  AugmentedView out = view;
  const double c = std::cos(radians), s = std::sin(radians);
  const std::size_t joints = view.features.cols() / 3;
  for (std::size_t r = 0; r < view.length(); ++r)
    for (std::size_t j = 0; j < joints; ++j) {
      const double x = view.features(r, 3 * j + a), z = view.features(r, 3 * j + b);
      out.features(r, 3 * j + a) = static_cast<float>(c * x - s * z);
      out.features(r, 3 * j + b) = static_cast<float>(s * x + c * z);
    }
  return out;
}

/// Mirror: negates the lateral axis and swaps left/right joints.
inline AugmentedView mirror(const AugmentedView& view, const SpatialConfig& cfg) {
  require_joint_layout(view);
  const std::size_t joints = view.features.cols() / 3;
  const auto& perm = cfg.joint_mirror_permutation;
  if (perm.size() != joints) throw ConfigError("mirror: joint_mirror_permutation must list every joint");
  for (std::size_t j = 0; j < joints; ++j)
    if (perm[j] >= joints || perm[perm[j]] != j)
      throw ConfigError("mirror: joint_mirror_permutation must be an involution over the joints");
  AugmentedView out = view;
  for (std::size_t r = 0; r < view.length(); ++r)
    for (std::size_t j = 0; j < joints; ++j)
      for (std::size_t c = 0; c < 3; ++c) {
        const float v = view.features(r, 3 * perm[j] + c);
        out.features(r, 3 * j + c) = c == cfg.lateral_axis ? -v : v;
      }
  return out;
}

inline AugmentedView translate(const AugmentedView& view, const std::array<double, 3>& offset) {
  require_joint_layout(view);
  AugmentedView out = view;
  const std::size_t joints = view.features.cols() / 3;
  for (std::size_t r = 0; r < view.length(); ++r)
    for (std::size_t j = 0; j < joints; ++j)
      for (std::size_t c = 0; c < 3; ++c)
        out.features(r, 3 * j + c) = static_cast<float>(view.features(r, 3 * j + c) + offset[c]);
  return out;
}

/// Parameters drawn for one spatial transform.
struct SpatialDraw {
  double angle = 0.0;  // radians
  bool flip = false;
  std::array<double, 3> offset{0.0, 0.0, 0.0};
};

inline SpatialDraw draw_spatial(const SpatialConfig& cfg, Rng& rng) {
  SpatialDraw d;
  const double max_rad = cfg.angle_max_deg * std::numbers::pi / 180.0;
  if (max_rad > 0) d.angle = std::uniform_real_distribution<double>(-max_rad, max_rad)(rng);
  if (cfg.flip_probability > 0) d.flip = std::bernoulli_distribution(cfg.flip_probability)(rng);
  if (cfg.translation_sigma > 0) {
    std::normal_distribution<double> n(0.0, cfg.translation_sigma);
    for (auto& o : d.offset) o = n(rng);
  }
  return d;
}

/// Applies a drawn transform: rotation, then optional mirror, then
/// translation. The index map is untouched.
inline AugmentedView apply_spatial(const AugmentedView& view, const SpatialDraw& d, const SpatialConfig& cfg) {
  AugmentedView out = d.angle != 0.0 ? rotate_vertical(view, d.angle, cfg) : view;
  if (d.flip) out = mirror(out, cfg);
  if (d.offset != std::array<double, 3>{0.0, 0.0, 0.0}) out = translate(out, d.offset);
  return out;
}

/// One consistent spatial transform for all frames of the view.
inline AugmentedView spatial_transform(const AugmentedView& view, const SpatialConfig& cfg, Rng& rng) {
  require_joint_layout(view);
  if (cfg.flip_probability > 0 && cfg.joint_mirror_permutation.empty())
    throw ConfigError("spatial_transform: flip requested without a joint_mirror_permutation table");
  return apply_spatial(view, draw_spatial(cfg, rng), cfg);
}

namespace detail {

inline AugmentedView one_view(const Matrix& seq, const AugmentConfig& cfg, ViewTag tag, Rng& rng) {
  const std::size_t t = seq.rows();
  AugmentedView v = whole(seq, tag);
  if (cfg.trims()) {
    const std::size_t min_len =
        std::max<std::size_t>(2, static_cast<std::size_t>(std::ceil(cfg.trim_min_fraction * static_cast<double>(t))));
    const std::size_t len = std::uniform_int_distribution<std::size_t>(std::min(min_len, t), t)(rng);
    const std::size_t start = std::uniform_int_distribution<std::size_t>(0, t - len)(rng);
    v = trim(v, start, start + len);
  }
  if (cfg.drop_enabled) {
    const double keep = cfg.keep_min == cfg.keep_max
                            ? cfg.keep_min
                            : std::uniform_real_distribution<double>(cfg.keep_min, cfg.keep_max)(rng);
    v = temporal_drop(v, keep, rng);
  }
  return v;
}

inline AugmentedView finish(AugmentedView v, const AugmentConfig& cfg, Rng& rng) {
  if (cfg.spatial.enabled && cfg.modality == Modality::kSkeleton) v = spatial_transform(v, cfg.spatial, rng);
  return v;
}

}  // namespace detail

/// Two independently trimmed and dropped views S′, S″ of one sequence whose
/// index maps share at least cfg.min_overlap_frames original frames.
/// Temporal sampling is retried up to cfg.max_attempts times.
inline std::pair<AugmentedView, AugmentedView> dual_augment(const Matrix& seq, const AugmentConfig& cfg, Rng& rng,
                                                            const std::string& sequence_id = "") {
  cfg.validate();
  if (seq.rows() < 4)
    throw ContractError("dual_augment: sequence '" + sequence_id + "' has fewer than 4 frames");
  for (std::size_t attempt = 0; attempt < cfg.max_attempts; ++attempt) {
    AugmentedView a = detail::one_view(seq, cfg, ViewTag::kPrime, rng);
    AugmentedView b = detail::one_view(seq, cfg, ViewTag::kDoublePrime, rng);
    if (overlap(a.index_map, b.index_map) >= cfg.min_overlap_frames)
      return {detail::finish(std::move(a), cfg, rng), detail::finish(std::move(b), cfg, rng)};
  }
  throw AugmentError("dual_augment: could not reach " + std::to_string(cfg.min_overlap_frames) +
                     " overlapping frames for sequence '" + sequence_id + "' after " +
                     std::to_string(cfg.max_attempts) + " attempts");
}

/// Single-view scheme: only S′ is augmented, S″ is the untouched sequence.
inline std::pair<AugmentedView, AugmentedView> single_augment(const Matrix& seq, const AugmentConfig& cfg, Rng& rng,
                                                              const std::string& sequence_id = "") {
  cfg.validate();
  if (seq.rows() < 4)
    throw ContractError("single_augment: sequence '" + sequence_id + "' has fewer than 4 frames");
  for (std::size_t attempt = 0; attempt < cfg.max_attempts; ++attempt) {
    AugmentedView a = detail::one_view(seq, cfg, ViewTag::kPrime, rng);
    if (a.length() >= std::min(cfg.min_overlap_frames, seq.rows()))
      return {detail::finish(std::move(a), cfg, rng), detail::finish(whole(seq, ViewTag::kDoublePrime), cfg, rng)};
  }
  throw AugmentError("single_augment: could not reach " + std::to_string(cfg.min_overlap_frames) +
                     " frames for sequence '" + sequence_id + "'");
}

}  // namespace masa::augment
