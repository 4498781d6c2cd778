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

// Synthetic procedural-activity generator.
//
// Each activity owns a smooth canonical trajectory in a small latent space,
// split into consecutive phases. An instance samples a monotone piecewise-
// linear time warp, evaluates the trajectory at the warped canonical times,
// projects it to feature space with the activity's fixed linear map, and adds
// Gaussian noise. Phase labels and canonical progress come for free.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "masa/data/manifest.hpp"
#include "masa/data/sequence.hpp"
#include "masa/errors.hpp"

namespace masa::data {

struct SynthConfig {
  std::size_t num_activities = 4;
  std::size_t phases_min = 3;
  std::size_t phases_max = 6;
  std::size_t latent_dim = 4;
  std::size_t feature_dim = 16;
  std::size_t sequences_per_activity = 40;
  std::size_t length_min = 40;
  std::size_t length_max = 80;
  std::size_t max_length = 80;
  double speed_min = 0.5;  // relative playback speed range of the warp
  double speed_max = 2.0;
  std::size_t warp_segments = 4;
  std::size_t control_points_per_phase = 2;
  double noise = 0.05;
  bool orthogonal_projections = true;
  std::uint64_t seed = 7;

  void validate() const {
    if (num_activities < 1 || phases_min < 1 || phases_max < phases_min || latent_dim < 1 || feature_dim < 1 ||
        sequences_per_activity < 1 || warp_segments < 1 || control_points_per_phase < 1)
      throw ConfigError("synth: counts must be >= 1 and phases_min <= phases_max");
    if (length_min < 8 || length_max < length_min || length_max > max_length)
      throw ConfigError("synth: length range must lie within [8, max_length]");
    if (!(speed_min > 0) || speed_max < speed_min) throw ConfigError("synth: invalid speed-warp range");
    if (!(noise >= 0)) throw ConfigError("synth: noise must be >= 0");
    if (orthogonal_projections && num_activities * latent_dim > feature_dim)
      throw ConfigError("synth: orthogonal projections need num_activities*latent_dim <= feature_dim");
  }
};

/// Canonical description of one activity.
struct ActivityModel {
  std::vector<double> phase_bounds;           // P+1 increasing values from 0 to 1
  std::vector<std::vector<double>> controls;  // control points, each latent_dim long
  Tensor<double> projection;                  // feature_dim × latent_dim

  std::size_t phases() const { return phase_bounds.size() - 1; }

  int phase_at(double tau) const {
    for (std::size_t p = 1; p + 1 < phase_bounds.size(); ++p)
      if (tau < phase_bounds[p]) return static_cast<int>(p - 1);
    return static_cast<int>(phases() - 1);
  }

  /// Catmull-Rom interpolation of the control points at canonical time tau.
  std::vector<double> latent(double tau) const {
    const std::size_t k = controls.size() - 1;
    const double x = std::clamp(tau, 0.0, 1.0) * static_cast<double>(k);
    const std::size_t i = std::min<std::size_t>(static_cast<std::size_t>(x), k - 1);
    const double u = x - static_cast<double>(i);
    const auto& p1 = controls[i];
    const auto& p2 = controls[i + 1];
    const auto& p0 = controls[i == 0 ? 0 : i - 1];
    const auto& p3 = controls[std::min(i + 2, k)];
    std::vector<double> out(p1.size());
    const double u2 = u * u, u3 = u2 * u;
    for (std::size_t d = 0; d < out.size(); ++d)
      out[d] = 0.5 * (2 * p1[d] + (-p0[d] + p2[d]) * u + (2 * p0[d] - 5 * p1[d] + 4 * p2[d] - p3[d]) * u2 +
                      (-p0[d] + 3 * p1[d] - 3 * p2[d] + p3[d]) * u3);
    return out;
  }
};

/// Monotone piecewise-linear map from normalized frame time [0,1] to
/// canonical time [0,1].
struct TimeWarp {
  std::vector<double> slopes;  // one per equal-width segment

  double operator()(double u) const {
    const double n = static_cast<double>(slopes.size());
    double total = 0;
    for (double s : slopes) total += s / n;
    double acc = 0;
    for (std::size_t i = 0; i < slopes.size(); ++i) {
      const double lo = static_cast<double>(i) / n, hi = static_cast<double>(i + 1) / n;
      if (u <= hi || i + 1 == slopes.size()) return (acc + slopes[i] * (std::clamp(u, lo, hi) - lo)) / total;
      acc += slopes[i] / n;
    }
    return 1.0;
  }
};

struct SynthDataset {
  std::vector<ActivityModel> activities;
  std::vector<FeatureSequence> sequences;
  std::vector<TimeWarp> warps;  // parallel to sequences
};

namespace detail {

inline Tensor<double> orthonormal_basis(std::size_t n, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Tensor<double> q({n, n});
  for (std::size_t c = 0; c < n; ++c) {
    std::vector<double> v(n);
    for (auto& x : v) x = normal(rng);
    for (std::size_t p = 0; p < c; ++p) {
      double dot = 0;
      for (std::size_t r = 0; r < n; ++r) dot += v[r] * q(r, p);
      for (std::size_t r = 0; r < n; ++r) v[r] -= dot * q(r, p);
    }
    double norm = 0;
    for (double x : v) norm += x * x;
    norm = std::sqrt(norm);
    for (std::size_t r = 0; r < n; ++r) q(r, c) = v[r] / norm;
  }
  return q;
}

}  // namespace detail

/// Builds the dataset in memory; deterministic in cfg (including seed).
inline SynthDataset synthesize(const SynthConfig& cfg) {
  cfg.validate();
  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  SynthDataset out;
  const Tensor<double> basis = cfg.orthogonal_projections ? detail::orthonormal_basis(cfg.feature_dim, rng)
                                                          : Tensor<double>();
  for (std::size_t a = 0; a < cfg.num_activities; ++a) {
    ActivityModel act;
    const std::size_t phases =
        cfg.phases_min + static_cast<std::size_t>(unit(rng) * static_cast<double>(cfg.phases_max - cfg.phases_min + 1));
    const std::size_t p = std::min(phases, cfg.phases_max);
    std::vector<double> w(p);
    for (auto& x : w) x = 0.6 + 0.8 * unit(rng);
    double total = 0;
    for (double x : w) total += x;
    act.phase_bounds.push_back(0.0);
    double acc = 0;
    for (std::size_t i = 0; i < p; ++i) {
      acc += w[i] / total;
      act.phase_bounds.push_back(i + 1 == p ? 1.0 : acc);
    }
    const std::size_t k = p * cfg.control_points_per_phase + 1;
    for (std::size_t i = 0; i < k; ++i) {
      std::vector<double> c(cfg.latent_dim);
      for (auto& x : c) x = normal(rng);
      act.controls.push_back(std::move(c));
    }
    act.projection = Tensor<double>({cfg.feature_dim, cfg.latent_dim});
    for (std::size_t r = 0; r < cfg.feature_dim; ++r)
      for (std::size_t c = 0; c < cfg.latent_dim; ++c)
        act.projection(r, c) = cfg.orthogonal_projections ? basis(r, a * cfg.latent_dim + c)
                                                          : normal(rng) / std::sqrt(static_cast<double>(cfg.latent_dim));
    out.activities.push_back(std::move(act));
  }

  const double log_lo = std::log(cfg.speed_min), log_hi = std::log(cfg.speed_max);
  for (std::size_t a = 0; a < cfg.num_activities; ++a) {
    const auto& act = out.activities[a];
    for (std::size_t s = 0; s < cfg.sequences_per_activity; ++s) {
      const std::size_t len =
          cfg.length_min + std::min<std::size_t>(static_cast<std::size_t>(unit(rng) * static_cast<double>(
                                                                              cfg.length_max - cfg.length_min + 1)),
                                                 cfg.length_max - cfg.length_min);
      TimeWarp warp;
      for (std::size_t i = 0; i < cfg.warp_segments; ++i)
        warp.slopes.push_back(std::exp(log_lo + (log_hi - log_lo) * unit(rng)));
      FeatureSequence seq;
      seq.sequence_id = "a" + std::to_string(a) + "_s" + (s < 10 ? "00" : s < 100 ? "0" : "") + std::to_string(s);
      seq.activity_id = static_cast<int>(a);
      seq.features = Matrix::matrix(len, cfg.feature_dim);
      for (std::size_t t = 0; t < len; ++t) {
        const double tau = warp(static_cast<double>(t) / static_cast<double>(len - 1));
        const auto z = act.latent(tau);
        for (std::size_t r = 0; r < cfg.feature_dim; ++r) {
          double v = 0;
          for (std::size_t c = 0; c < cfg.latent_dim; ++c) v += act.projection(r, c) * z[c];
          seq.features(t, r) = static_cast<float>(v + cfg.noise * normal(rng));
        }
        seq.phase_labels.push_back(act.phase_at(tau));
        seq.progress.push_back(static_cast<float>(tau));
      }
      out.sequences.push_back(std::move(seq));
      out.warps.push_back(std::move(warp));
    }
  }
  return out;
}

/// Writes the dataset below `dir`:
///   manifest.json, seq/<id>.masa, labels/<id>.phases, labels/<id>.progress,
///   labels/activities.tsv
inline DatasetManifest generate_synthetic(const SynthConfig& cfg, const std::string& dir) {
  const SynthDataset ds = synthesize(cfg);
  namespace fs = std::filesystem;
  const fs::path root(dir);
  fs::create_directories(root / "seq");
  fs::create_directories(root / "labels");
  DatasetManifest m;
  m.version = 1;
  m.feature_dim = cfg.feature_dim;
  m.max_length = cfg.max_length;
  m.base_dir = root;
  for (std::size_t a = 0; a < cfg.num_activities; ++a) m.activities.push_back("activity_" + std::to_string(a));
  std::ofstream act_file(root / "labels" / "activities.tsv", std::ios::trunc);
  for (const auto& seq : ds.sequences) {
    SequenceRecord r;
    r.id = seq.sequence_id;
    r.file = "seq/" + seq.sequence_id + ".masa";
    r.activity = seq.activity_id;
    r.length = seq.length();
    r.phases = "labels/" + seq.sequence_id + ".phases";
    save_sequence(seq, m.resolve(r.file).string());
    write_lines(m.resolve(r.phases).string(), seq.phase_labels);
    write_lines((root / "labels" / (seq.sequence_id + ".progress")).string(), seq.progress);
    act_file << seq.sequence_id << '\t' << seq.activity_id << '\n';
    m.sequences.push_back(std::move(r));
  }
  save_manifest(m, (root / "manifest.json").string());
  return m;
}

}  // namespace masa::data
