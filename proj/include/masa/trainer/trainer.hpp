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

#include <chrono>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "masa/augment/augment.hpp"
#include "masa/data/sequence.hpp"
#include "masa/diffcore/checkpoint.hpp"
#include "masa/diffcore/optimizer.hpp"
#include "masa/diffcore/tape.hpp"
#include "masa/errors.hpp"
#include "masa/losses/losses.hpp"
#include "masa/metrics/metrics.hpp"
#include "masa/model/model.hpp"
#include "masa/trainer/config.hpp"

namespace masa::trainer {

inline constexpr const char* kModelMeta = "meta/model";

struct StepRecord {
  std::size_t step = 0;
  int epoch = 0;
  double lr = 0;
  losses::LossReport loss;  // batch means
};

struct TrainLog {
  std::vector<StepRecord> steps;
  std::vector<double> epoch_mean_total;
  double wall_seconds = 0;

  double final_total() const { return steps.empty() ? 0.0 : steps.back().loss.total; }

  void write_csv(const std::string& path) const {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw ConfigError("cannot write training log " + path);
    out.precision(9);
    out << "step,epoch,lr,l_forward,l_backward,l_m,l_c,multiplier,total\n";
    for (const auto& r : steps)
      out << r.step << ',' << r.epoch << ',' << r.lr << ',' << r.loss.l_forward << ',' << r.loss.l_backward << ','
          << r.loss.l_m << ',' << r.loss.l_c << ',' << r.loss.multiplier << ',' << r.loss.total << '\n';
  }
};

/// Seed of the augmentation stream for one item; recorded on failure so the
/// batch can be replayed.
inline std::uint64_t item_seed(std::uint64_t seed, int epoch, std::size_t position) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(epoch), static_cast<std::uint32_t>(position)};
  std::uint32_t out[2];
  seq.generate(out, out + 2);
  return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

/// Loss of one sequence's augmented pair, recorded on `t`. Templated so the
/// same graph can be evaluated in double for gradient checks.
template <typename T>
struct ItemLoss {
  Var<T> total;
  losses::LossReport report;
};

template <typename T>
ItemLoss<T> item_loss(Tape<T>& t, ParameterStore<T>& s, const model::Network<T>& net, const TrainConfig& cfg,
                      const augment::AugmentedView& a, const augment::AugmentedView& b, std::size_t original_length,
                      model::ForwardContext<T>& ctx) {
  auto [ua, ub] = net.encode(t, s, a.features.template cast<T>(), {}, b.features.template cast<T>(), {}, ctx);
  Var<T> za = net.project(t, s, ua, {}, ctx);
  Var<T> zb = net.project(t, s, ub, {}, ctx);
  const double scale = cfg.loss.normalize_indices ? static_cast<double>(original_length) : 1.0;
  auto m = losses::matching_loss(za, zb, a.index_map, b.index_map, cfg.loss, scale, !cfg.disable_dual_augmentation);
  losses::Agreement<T> lc{t.constant(Tensor<T>::scalar(T(0))), 0};
  if (!cfg.disable_clustering_loss) {
    Var<T> ha = net.cluster_predict(t, s, za, {}, ctx);
    Var<T> hb = net.cluster_predict(t, s, zb, {}, ctx);
    lc = losses::clustering_loss(za, zb, ha, hb, a.index_map, b.index_map, !cfg.disable_stop_gradient);
  }
  Var<T> total = losses::combined_loss(m.l_m, lc.value, cfg.loss);
  losses::LossReport r;
  r.l_forward = static_cast<double>(m.l_forward.item());
  r.l_backward = static_cast<double>(m.l_backward.item());
  r.l_m = static_cast<double>(m.l_m.item());
  r.l_c = static_cast<double>(lc.value.item());
  r.multiplier = losses::composite_multiplier(r.l_c, cfg.loss);
  r.total = static_cast<double>(total.item());
  r.matched_pairs = lc.pairs;
  return {total, r};
}

struct TrainHooks {
  std::string checkpoint_path;  // empty: no checkpoint files
  std::function<void(int epoch, const ParameterStore<float>&)> on_epoch;
};

inline std::vector<container::NamedTensor> checkpoint_meta(const TrainConfig& cfg) {
  return {{kModelMeta, cfg.effective_model().to_tensor()}};
}

/// Self-supervised training over unlabeled samples. Returns the final
/// parameter store (with optimizer state).
inline ParameterStore<float> train(const std::vector<data::TrainingSample>& samples, const TrainConfig& cfg,
                                   TrainLog* log = nullptr, const TrainHooks& hooks = {}) {
  cfg.validate();
  if (samples.empty()) throw ContractError("train: no training samples");
  const auto started = std::chrono::steady_clock::now();
  const model::Network<float> net(cfg.effective_model());
  const augment::AugmentConfig aug = cfg.effective_augment();
  for (const auto& smp : samples) {
    data::validate_features(smp.features, "train(" + smp.sequence_id + ")");
    if (smp.features.cols() != net.config().input_dim)
      throw ContractError("train: sequence '" + smp.sequence_id + "' has feature width " +
                          std::to_string(smp.features.cols()) + ", model expects " +
                          std::to_string(net.config().input_dim));
  }
  ParameterStore<float> store;
  net.init(store, cfg.seed);
  auto save = [&] {
    if (!hooks.checkpoint_path.empty()) checkpoint::save(hooks.checkpoint_path, store, checkpoint_meta(cfg));
  };

  std::mt19937_64 order_rng(cfg.seed ^ 0x5eedULL);
  std::vector<std::size_t> order(samples.size());
  std::size_t step = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), order_rng);
    const double lr = lr_schedule(epoch, cfg.base_lr);
    double epoch_total = 0;
    std::size_t epoch_steps = 0;
    for (std::size_t begin = 0; begin < order.size(); begin += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), begin + cfg.batch_size);
      Tape<float> t;
      std::vector<std::pair<std::string, ops::BatchStats<float>>> stats;
      model::ForwardContext<float> ctx{true, &stats, nullptr};
      std::vector<Var<float>> totals;
      losses::LossReport mean;
      std::ostringstream replay;
      for (std::size_t p = begin; p < end; ++p) {
        const auto& smp = samples[order[p]];
        const std::uint64_t seed = item_seed(cfg.seed, epoch, p);
        replay << (p > begin ? " " : "") << smp.sequence_id << "@" << seed;
        augment::Rng rng(seed);
        auto views = cfg.disable_dual_augmentation ? augment::single_augment(smp.features, aug, rng, smp.sequence_id)
                                                   : augment::dual_augment(smp.features, aug, rng, smp.sequence_id);
        ItemLoss<float> il = item_loss(t, store, net, cfg, views.first, views.second, smp.features.rows(), ctx);
        totals.push_back(il.total);
        mean.l_forward += il.report.l_forward;
        mean.l_backward += il.report.l_backward;
        mean.l_m += il.report.l_m;
        mean.l_c += il.report.l_c;
        mean.multiplier += il.report.multiplier;
        mean.total += il.report.total;
        mean.matched_pairs += il.report.matched_pairs;
      }
      Var<float> sum = totals.front();
      for (std::size_t i = 1; i < totals.size(); ++i) sum = ops::add(sum, totals[i]);
      Var<float> loss = ops::scale(sum, 1.f / static_cast<float>(totals.size()));
      if (!std::isfinite(loss.item()))
        throw TrainingError("non-finite loss at epoch " + std::to_string(epoch) + " step " + std::to_string(step) +
                            "; items (id@augment_seed): " + replay.str() + "; train seed " +
                            std::to_string(cfg.seed));
      t.backward(loss);
      adam_step(store, lr);
      net.update_running_stats(store, stats);

      const double n = static_cast<double>(totals.size());
      mean.l_forward /= n;
      mean.l_backward /= n;
      mean.l_m /= n;
      mean.l_c /= n;
      mean.multiplier /= n;
      mean.total = loss.item();
      if (log) log->steps.push_back({step, epoch, lr, mean});
      epoch_total += mean.total;
      ++epoch_steps;
      ++step;
    }
    if (log) log->epoch_mean_total.push_back(epoch_total / static_cast<double>(epoch_steps));
    if (hooks.on_epoch) hooks.on_epoch(epoch, store);
    if (cfg.checkpoint_every > 0 && (epoch + 1) % cfg.checkpoint_every == 0) save();
  }
  save();
  if (log)
    log->wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return store;
}

// ---- inference ------------------------------------------------------------

/// A trained model reassembled from a checkpoint.
struct TrainedModel {
  model::ModelConfig config;
  ParameterStore<float> store;
};

inline TrainedModel load_model(const std::string& path) {
  checkpoint::Loaded l = checkpoint::load(path);
  for (const auto& [name, t] : l.meta)
    if (name == kModelMeta) return {model::ModelConfig::from_tensor(t), std::move(l.store)};
  throw FormatError("checkpoint " + path + " has no " + kModelMeta + " record", 0);
}

/// U-space embedding of a whole sequence, no augmentation, inference mode.
inline Matrix embed(const model::ModelConfig& mc, ParameterStore<float>& store, const Matrix& features) {
  const model::Network<float> net(mc);
  if (features.cols() != mc.input_dim)
    throw ContractError("embed: feature width " + std::to_string(features.cols()) + " != model input_dim " +
                        std::to_string(mc.input_dim));
  Tape<float> t;
  model::ForwardContext<float> ctx{false, nullptr, nullptr};
  return net.encode_single(t, store, features, {}, ctx).value();
}

inline Matrix project_embedding(const model::ModelConfig& mc, ParameterStore<float>& store, const Matrix& u) {
  const model::Network<float> net(mc);
  Tape<float> t;
  model::ForwardContext<float> ctx{false, nullptr, nullptr};
  return net.project(t, store, t.constant(u), {}, ctx).value();
}

/// One embedding tensor per sample, named by sequence id.
inline std::vector<container::NamedTensor> export_embeddings(TrainedModel& m,
                                                             const std::vector<data::TrainingSample>& samples) {
  std::vector<container::NamedTensor> out;
  for (const auto& s : samples) out.emplace_back(s.sequence_id, embed(m.config, m.store, s.features));
  return out;
}

enum class AlignSpace { kU, kZ };

struct Alignment {
  std::vector<std::size_t> assignment;  // nearest frame of b for every frame of a
  Matrix gamma;                         // row-stochastic match probabilities
};

inline Alignment align(TrainedModel& m, const Matrix& seq_a, const Matrix& seq_b, AlignSpace space = AlignSpace::kU,
                       double temperature = 1.0) {
  Matrix ea = embed(m.config, m.store, seq_a);
  Matrix eb = embed(m.config, m.store, seq_b);
  if (space == AlignSpace::kZ) {
    ea = project_embedding(m.config, m.store, ea);
    eb = project_embedding(m.config, m.store, eb);
  }
  Tape<float> t;
  Alignment out;
  out.gamma = losses::match_matrix(t.constant(ea), t.constant(eb), temperature).value();
  out.assignment = metrics::nearest_neighbors(ea, eb);
  return out;
}

}  // namespace masa::trainer
