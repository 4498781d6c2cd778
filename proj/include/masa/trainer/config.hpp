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

// Training configuration and the JSON config document. The document has
// optional sections "model", "augment", "loss", "train", "metrics" and
// "synth"; absent keys keep their defaults, unknown keys are rejected.

#pragma once

#include <cstdint>
#include <fstream>
#include <set>
#include <string>

#include <nlohmann/json.hpp>

#include "masa/augment/augment.hpp"
#include "masa/data/synthetic.hpp"
#include "masa/errors.hpp"
#include "masa/losses/losses.hpp"
#include "masa/metrics/metrics.hpp"
#include "masa/model/config.hpp"

namespace masa::trainer {

struct TrainConfig {
  double base_lr = 3e-3;
  int epochs = 150;
  std::size_t batch_size = 4;
  std::uint64_t seed = 0;
  int checkpoint_every = 50;  // epochs; <= 0 saves only at the end

  // Ablations. Each rewires exactly one mechanism.
  bool disable_stop_gradient = false;
  bool disable_cluster_predictor = false;
  bool disable_dual_augmentation = false;
  bool disable_trim = false;
  bool disable_cross_attention = false;
  bool disable_self_attention = false;
  bool disable_clustering_loss = false;  // L_c fixed at 0 (matching only)

  model::ModelConfig model;
  augment::AugmentConfig augment;
  losses::LossConfig loss;

  void validate() const {
    if (epochs < 0) throw ConfigError("train: epochs must be >= 0");
    if (batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
    if (!(base_lr > 0)) throw ConfigError("train: base_lr must be > 0");
    effective_model().validate();
    effective_augment().validate();
    loss.validate();
  }

  /// Model config with the architectural ablation flags folded in.
  model::ModelConfig effective_model() const {
    model::ModelConfig m = model;
    m.disable_cluster_predictor = m.disable_cluster_predictor || disable_cluster_predictor;
    m.disable_cross_attention = m.disable_cross_attention || disable_cross_attention;
    m.disable_self_attention = m.disable_self_attention || disable_self_attention;
    return m;
  }

  augment::AugmentConfig effective_augment() const {
    augment::AugmentConfig a = augment;
    if (disable_trim) a.trim_enabled = false;
    return a;
  }
};

struct Config {
  TrainConfig train;
  metrics::ProbeConfig metrics;
  data::SynthConfig synth;
};

namespace detail {

using nlohmann::json;

class Section {
 public:
  Section(const json& root, const char* name) : name_(name) {
    if (root.contains(name)) {
      if (!root.at(name).is_object()) throw ConfigError(std::string("config: section '") + name + "' must be an object");
      obj_ = root.at(name);
    }
  }

  template <typename V>
  void get(const char* key, V& out) {
    seen_.insert(key);
    if (!obj_.contains(key)) return;
    try {
      out = obj_.at(key).get<V>();
    } catch (const json::exception& e) {
      throw ConfigError("config: " + name_ + "." + key + ": " + e.what());
    }
  }

  void finish() const {
    for (auto it = obj_.begin(); it != obj_.end(); ++it)
      if (!seen_.count(it.key())) throw ConfigError("config: unknown key " + name_ + "." + it.key());
  }

 private:
  std::string name_;
  json obj_ = json::object();
  std::set<std::string> seen_;
};

}  // namespace detail

inline Config parse_config(const nlohmann::json& root) {
  if (!root.is_object()) throw ConfigError("config: top level must be an object");
  for (auto it = root.begin(); it != root.end(); ++it) {
    static const std::set<std::string> known = {"model", "augment", "loss", "train", "metrics", "synth"};
    if (!known.count(it.key())) throw ConfigError("config: unknown section '" + it.key() + "'");
  }
  Config c;
  {
    detail::Section s(root, "model");
    auto& m = c.train.model;
    s.get("input_dim", m.input_dim);
    s.get("mlp_hidden", m.mlp_hidden);
    s.get("embed_dim", m.embed_dim);
    s.get("projection_dim", m.projection_dim);
    s.get("encoder_layers", m.encoder_layers);
    s.get("predictor_layers", m.predictor_layers);
    s.get("heads", m.heads);
    s.get("ffn_multiplier", m.ffn_multiplier);
    s.get("use_batch_norm", m.use_batch_norm);
    s.get("bn_momentum", m.bn_momentum);
    s.get("use_positional_encoding", m.use_positional_encoding);
    s.finish();
  }
  {
    detail::Section s(root, "augment");
    auto& a = c.train.augment;
    std::string modality = a.modality == augment::Modality::kDense ? "dense" : "skeleton";
    s.get("modality", modality);
    if (modality != "dense" && modality != "skeleton")
      throw ConfigError("config: augment.modality must be 'dense' or 'skeleton'");
    a.modality = modality == "dense" ? augment::Modality::kDense : augment::Modality::kSkeleton;
    s.get("trim_enabled", a.trim_enabled);
    s.get("trim_min_fraction", a.trim_min_fraction);
    s.get("drop_enabled", a.drop_enabled);
    s.get("keep_min", a.keep_min);
    s.get("keep_max", a.keep_max);
    s.get("min_overlap_frames", a.min_overlap_frames);
    s.get("max_attempts", a.max_attempts);
    s.get("spatial_enabled", a.spatial.enabled);
    s.get("angle_max_deg", a.spatial.angle_max_deg);
    s.get("translation_sigma", a.spatial.translation_sigma);
    s.get("flip_probability", a.spatial.flip_probability);
    s.get("joint_mirror_permutation", a.spatial.joint_mirror_permutation);
    s.finish();
  }
  {
    detail::Section s(root, "loss");
    auto& l = c.train.loss;
    s.get("epsilon", l.epsilon);
    std::string err = l.index_error == losses::IndexError::kAbsolute ? "absolute" : "squared";
    s.get("index_error", err);
    if (err != "absolute" && err != "squared") throw ConfigError("config: loss.index_error must be absolute|squared");
    l.index_error = err == "absolute" ? losses::IndexError::kAbsolute : losses::IndexError::kSquared;
    s.get("denominator_floor", l.denominator_floor);
    s.get("temperature", l.temperature);
    s.get("normalize_indices", l.normalize_indices);
    std::string convention = "agreement";
    s.get("cluster_sign_convention", convention);
    if (convention != "agreement") throw ConfigError("config: loss.cluster_sign_convention supports only 'agreement'");
    s.finish();
  }
  {
    detail::Section s(root, "train");
    auto& t = c.train;
    s.get("base_lr", t.base_lr);
    s.get("epochs", t.epochs);
    s.get("batch_size", t.batch_size);
    s.get("seed", t.seed);
    s.get("checkpoint_every", t.checkpoint_every);
    s.get("disable_stop_gradient", t.disable_stop_gradient);
    s.get("disable_cluster_predictor", t.disable_cluster_predictor);
    s.get("disable_dual_augmentation", t.disable_dual_augmentation);
    s.get("disable_trim", t.disable_trim);
    s.get("disable_cross_attention", t.disable_cross_attention);
    s.get("disable_self_attention", t.disable_self_attention);
    s.get("disable_clustering_loss", t.disable_clustering_loss);
    s.finish();
  }
  {
    detail::Section s(root, "metrics");
    auto& m = c.metrics;
    s.get("label_fractions", m.label_fractions);
    s.get("probe_epochs", m.probe_epochs);
    s.get("probe_lr", m.probe_lr);
    s.get("ridge", m.ridge);
    s.get("ks", m.ks);
    s.get("train_fraction", m.train_fraction);
    s.get("action_frames", m.action_frames);
    std::string pooling = m.pooling == metrics::Pooling::kMean ? "mean" : "concat";
    s.get("pooling", pooling);
    if (pooling != "mean" && pooling != "concat") throw ConfigError("config: metrics.pooling must be mean|concat");
    m.pooling = pooling == "mean" ? metrics::Pooling::kMean : metrics::Pooling::kConcat;
    s.get("seed", m.seed);
    s.finish();
  }
  {
    detail::Section s(root, "synth");
    auto& y = c.synth;
    s.get("num_activities", y.num_activities);
    s.get("phases_min", y.phases_min);
    s.get("phases_max", y.phases_max);
    s.get("latent_dim", y.latent_dim);
    s.get("feature_dim", y.feature_dim);
    s.get("sequences_per_activity", y.sequences_per_activity);
    s.get("length_min", y.length_min);
    s.get("length_max", y.length_max);
    s.get("max_length", y.max_length);
    s.get("speed_min", y.speed_min);
    s.get("speed_max", y.speed_max);
    s.get("warp_segments", y.warp_segments);
    s.get("control_points_per_phase", y.control_points_per_phase);
    s.get("noise", y.noise);
    s.get("orthogonal_projections", y.orthogonal_projections);
    s.get("seed", y.seed);
    s.finish();
  }
  c.train.validate();
  c.metrics.validate();
  c.synth.validate();
  return c;
}

inline Config load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path);
  try {
    return parse_config(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError("config: " + path + ": " + e.what(), e.byte > 0 ? e.byte - 1 : 0);
  }
}

}  // namespace masa::trainer
