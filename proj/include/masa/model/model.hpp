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

// The alignment network: per-frame MLP, sinusoidal positional encoding,
// an alternating self/cross attention encoder shared by both views, a
// per-frame projection head and the clip-level cluster predictor.
//
// All attention blocks are pre-norm residual blocks:
//   x ← x + Wo·Attn(LN(x), LN(context))
//   x ← x + FFN(LN(x))
// where context is x itself (self) or the other view's state (cross).

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "masa/diffcore/ops.hpp"
#include "masa/diffcore/parameter_store.hpp"
#include "masa/diffcore/tape.hpp"
#include "masa/model/config.hpp"

namespace masa::model {

inline constexpr double kBatchNormGuard = 1e-5;

/// Per-forward switches and optional side outputs.
template <typename T>
struct ForwardContext {
  bool training = true;
  // Batch-norm statistics observed in training mode, in call order, keyed
  // by the running-statistics prefix.
  std::vector<std::pair<std::string, ops::BatchStats<T>>>* bn_stats = nullptr;
  // Attention probabilities of every attention call, in call order.
  std::vector<Tensor<T>>* attention = nullptr;
};

/// Sinusoidal encoding: PE[t,2i] = sin(t/10000^(2i/d)), PE[t,2i+1] = cos(·).
template <typename T = float>
Tensor<T> positional_encoding(std::size_t length, std::size_t dim) {
  if (dim % 2 != 0) throw ConfigError("positional_encoding: dimension must be even");
  Tensor<T> pe = Tensor<T>::matrix(length, dim);
  for (std::size_t t = 0; t < length; ++t)
    for (std::size_t i = 0; i < dim / 2; ++i) {
      const double angle =
          static_cast<double>(t) / std::pow(10000.0, static_cast<double>(2 * i) / static_cast<double>(dim));
      pe(t, 2 * i) = static_cast<T>(std::sin(angle));
      pe(t, 2 * i + 1) = static_cast<T>(std::cos(angle));
    }
  return pe;
}

namespace detail {

template <typename T>
void add_linear(ParameterStore<T>& s, const std::string& name, std::size_t in, std::size_t out, std::mt19937_64& rng) {
  const double bound = std::sqrt(3.0 / static_cast<double>(in));
  std::uniform_real_distribution<double> u(-bound, bound);
  Tensor<T> w = Tensor<T>::matrix(in, out);
  for (auto& v : w.values()) v = static_cast<T>(u(rng));
  s.add(name + "/w", std::move(w));
  s.add(name + "/b", Tensor<T>::matrix(1, out));
}

template <typename T>
void add_norm(ParameterStore<T>& s, const std::string& name, std::size_t dim) {
  s.add(name + "/g", Tensor<T>::matrix(1, dim, T(1)));
  s.add(name + "/b", Tensor<T>::matrix(1, dim));
}

template <typename T>
void add_block(ParameterStore<T>& s, const std::string& name, std::size_t dim, std::size_t ffn, std::mt19937_64& rng) {
  add_norm(s, name + "/ln1", dim);
  add_linear(s, name + "/q", dim, dim, rng);
  add_linear(s, name + "/k", dim, dim, rng);
  add_linear(s, name + "/v", dim, dim, rng);
  add_linear(s, name + "/o", dim, dim, rng);
  add_norm(s, name + "/ln2", dim);
  add_linear(s, name + "/ff1", dim, ffn, rng);
  add_linear(s, name + "/ff2", ffn, dim, rng);
}

}  // namespace detail

/// Stateless evaluator; parameters live in a ParameterStore.
template <typename T>
class Network {
 public:
  explicit Network(ModelConfig cfg) : cfg_(std::move(cfg)) { cfg_.validate(); }

  const ModelConfig& config() const { return cfg_; }

  static std::string encoder_block(std::size_t i) { return "enc/" + std::to_string(i); }
  static std::string predictor_block(std::size_t i) { return "pred/" + std::to_string(i); }
  bool is_cross_layer(std::size_t i) const { return i % 2 == 1; }

  /// Creates every parameter with seed-deterministic fan-in scaled uniform
  /// weights, zero biases and unit norm gains.
  void init(ParameterStore<T>& s, std::uint64_t seed) const {
    std::mt19937_64 rng(seed);
    const std::size_t d = cfg_.embed_dim, p = cfg_.projection_dim;
    detail::add_linear(s, "mlp/0", cfg_.input_dim, cfg_.mlp_hidden, rng);
    detail::add_linear(s, "mlp/1", cfg_.mlp_hidden, cfg_.mlp_hidden, rng);
    detail::add_linear(s, "mlp/2", cfg_.mlp_hidden, d, rng);
    for (std::size_t i = 0; i < cfg_.encoder_layers; ++i)
      detail::add_block(s, encoder_block(i), d, d * cfg_.ffn_multiplier, rng);
    for (std::size_t i = 0; i < 3; ++i) {
      detail::add_linear(s, "proj/" + std::to_string(i), d, d, rng);
      if (cfg_.use_batch_norm) {
        detail::add_norm(s, "proj/bn" + std::to_string(i), d);
        s.add("state/proj/bn" + std::to_string(i) + "/mean", Tensor<T>::matrix(1, d), false);
        s.add("state/proj/bn" + std::to_string(i) + "/var", Tensor<T>::matrix(1, d, T(1)), false);
      }
    }
    detail::add_linear(s, "proj/3", d, p, rng);
    for (std::size_t i = 0; i < cfg_.predictor_layers; ++i)
      detail::add_block(s, predictor_block(i), p, p * cfg_.ffn_multiplier, rng);
  }

  // ---- building blocks ----------------------------------------------------

  Var<T> linear(Tape<T>& t, ParameterStore<T>& s, const std::string& name, Var<T> x) const {
    return ops::linear(x, t.parameter(s, name + "/w"), t.parameter(s, name + "/b"));
  }

  Var<T> norm(Tape<T>& t, ParameterStore<T>& s, const std::string& name, Var<T> x) const {
    return ops::add_row(ops::mul_row(ops::layer_norm(x), t.parameter(s, name + "/g")), t.parameter(s, name + "/b"));
  }

  /// Three fully connected layers, ReLU between them. Position independent.
  Var<T> frame_mlp(Tape<T>& t, ParameterStore<T>& s, Var<T> x) const {
    if (x.cols() != cfg_.input_dim)
      throw ContractError("frame_mlp: input width " + std::to_string(x.cols()) + " != input_dim " +
                          std::to_string(cfg_.input_dim));
    Var<T> h = ops::relu(linear(t, s, "mlp/0", x));
    h = ops::relu(linear(t, s, "mlp/1", h));
    return linear(t, s, "mlp/2", h);
  }

  /// One pre-norm residual attention block. `context` is null for self
  /// attention; otherwise keys/values come from the context stream.
  Var<T> block(Tape<T>& t, ParameterStore<T>& s, const std::string& name, Var<T> x, const std::vector<bool>& x_mask,
               const Var<T>* context, const std::vector<bool>* context_mask, ForwardContext<T>& ctx) const {
    Var<T> hq = norm(t, s, name + "/ln1", x);
    Var<T> hk = (context && context->id != x.id) ? norm(t, s, name + "/ln1", *context) : hq;
    const std::vector<bool>& kmask = context ? *context_mask : x_mask;
    Var<T> q = linear(t, s, name + "/q", hq);
    Var<T> k = linear(t, s, name + "/k", hk);
    Var<T> v = linear(t, s, name + "/v", hk);
    Tensor<T> weights;
    Var<T> a = ops::attention(q, k, v, cfg_.heads, kmask, ctx.attention ? &weights : nullptr);
    if (ctx.attention) ctx.attention->push_back(std::move(weights));
    x = ops::add(x, linear(t, s, name + "/o", a));
    Var<T> f = linear(t, s, name + "/ff2", ops::relu(linear(t, s, name + "/ff1", norm(t, s, name + "/ln2", x))));
    return ops::add(x, f);
  }

  /// f(S) + PE for one (possibly padded) view.
  Var<T> embed_input(Tape<T>& t, ParameterStore<T>& s, const Tensor<T>& features) const {
    Var<T> h = frame_mlp(t, s, t.constant(features));
    if (cfg_.use_positional_encoding)
      h = ops::add(h, t.constant(positional_encoding<T>(features.rows(), cfg_.embed_dim)));
    return h;
  }

  /// Runs both views through the shared encoder: layer 0 self, layer 1
  /// cross, and so on. Returns (U′, U″) with padded rows zeroed.
  std::pair<Var<T>, Var<T>> encode(Tape<T>& t, ParameterStore<T>& s, const Tensor<T>& view_a,
                                   std::vector<bool> mask_a, const Tensor<T>& view_b, std::vector<bool> mask_b,
                                   ForwardContext<T>& ctx) const {
    fill_mask(mask_a, view_a.rows(), "encode(view_a)");
    fill_mask(mask_b, view_b.rows(), "encode(view_b)");
    Var<T> xa = embed_input(t, s, view_a);
    Var<T> xb = embed_input(t, s, view_b);
    for (std::size_t i = 0; i < cfg_.encoder_layers; ++i) {
      const std::string name = encoder_block(i);
      if (!is_cross_layer(i)) {
        if (cfg_.disable_self_attention) continue;
        xa = block(t, s, name, xa, mask_a, nullptr, nullptr, ctx);
        xb = block(t, s, name, xb, mask_b, nullptr, nullptr, ctx);
      } else {
        if (cfg_.disable_cross_attention) continue;
        Var<T> na = block(t, s, name, xa, mask_a, &xb, &mask_b, ctx);
        Var<T> nb = block(t, s, name, xb, mask_b, &xa, &mask_a, ctx);
        xa = na;
        xb = nb;
      }
    }
    return {ops::mask_rows(xa, mask_a), ops::mask_rows(xb, mask_b)};
  }

  /// Encoding of a sequence paired with itself (S′ = S″ = S). Both streams
  /// of encode() are then identical at every layer, so one stream whose
  /// cross layers attend to its own state gives exactly U′.
  Var<T> encode_single(Tape<T>& t, ParameterStore<T>& s, const Tensor<T>& view, std::vector<bool> mask,
                       ForwardContext<T>& ctx) const {
    fill_mask(mask, view.rows(), "encode_single");
    Var<T> x = embed_input(t, s, view);
    for (std::size_t i = 0; i < cfg_.encoder_layers; ++i) {
      const bool cross = is_cross_layer(i);
      if (cross ? cfg_.disable_cross_attention : cfg_.disable_self_attention) continue;
      x = cross ? block(t, s, encoder_block(i), x, mask, &x, &mask, ctx)
                : block(t, s, encoder_block(i), x, mask, nullptr, nullptr, ctx);
    }
    return ops::mask_rows(x, mask);
  }

  /// Projection head: three Linear→BN→ReLU stages and a final Linear.
  Var<T> project(Tape<T>& t, ParameterStore<T>& s, Var<T> u, std::vector<bool> mask, ForwardContext<T>& ctx) const {
    fill_mask(mask, u.rows(), "project");
    Var<T> h = u;
    for (std::size_t i = 0; i < 3; ++i) {
      const std::string name = "proj/" + std::to_string(i);
      h = linear(t, s, name, h);
      if (cfg_.use_batch_norm) h = batch_norm(t, s, "proj/bn" + std::to_string(i), h, mask, ctx);
      h = ops::relu(h);
    }
    return ops::mask_rows(linear(t, s, "proj/3", h), mask);
  }

  /// Clip-level cluster predictor: masked self-attention blocks over the
  /// projected frames; the temporal dimension is preserved.
  Var<T> cluster_predict(Tape<T>& t, ParameterStore<T>& s, Var<T> z, std::vector<bool> mask,
                         ForwardContext<T>& ctx) const {
    fill_mask(mask, z.rows(), "cluster_predict");
    if (cfg_.disable_cluster_predictor) return z;
    Var<T> h = z;
    for (std::size_t i = 0; i < cfg_.predictor_layers; ++i)
      h = block(t, s, predictor_block(i), h, mask, nullptr, nullptr, ctx);
    return ops::mask_rows(h, mask);
  }

  /// Batch norm over the unmasked rows. Training mode with fewer than two
  /// real rows, and inference mode, use the running statistics.
  Var<T> batch_norm(Tape<T>& t, ParameterStore<T>& s, const std::string& name, Var<T> x, const std::vector<bool>& mask,
                    ForwardContext<T>& ctx) const {
    const std::size_t real = static_cast<std::size_t>(std::count(mask.begin(), mask.end(), true));
    Var<T> n;
    if (ctx.training && real >= 2) {
      ops::BatchStats<T> stats;
      n = ops::batch_norm_normalize(x, mask, T(kBatchNormGuard), &stats);
      if (ctx.bn_stats) ctx.bn_stats->emplace_back("state/" + name, std::move(stats));
    } else {
      const Tensor<T>& mean = s.value("state/" + name + "/mean");
      const Tensor<T>& var = s.value("state/" + name + "/var");
      Tensor<T> neg_mean = mean, inv = var;
      for (auto& v : neg_mean.values()) v = -v;
      for (auto& v : inv.values()) v = T(1) / std::sqrt(v + T(kBatchNormGuard));
      n = ops::mul_row(ops::add_row(x, t.constant(neg_mean)), t.constant(inv));
      n = ops::mask_rows(n, mask);
    }
    return ops::add_row(ops::mul_row(n, t.parameter(s, name + "/g")), t.parameter(s, name + "/b"));
  }

  /// Folds observed batch statistics into the running statistics, in order.
  void update_running_stats(ParameterStore<T>& s,
                            const std::vector<std::pair<std::string, ops::BatchStats<T>>>& observed) const {
    const T mom = static_cast<T>(cfg_.bn_momentum);
    for (const auto& [prefix, st] : observed) {
      Tensor<T>& mean = s.value(prefix + "/mean");
      Tensor<T>& var = s.value(prefix + "/var");
      for (std::size_t j = 0; j < mean.size(); ++j) {
        mean[j] = (T(1) - mom) * mean[j] + mom * st.mean[j];
        var[j] = (T(1) - mom) * var[j] + mom * st.var[j];
      }
    }
  }

 private:
  static void fill_mask(std::vector<bool>& mask, std::size_t rows, const char* what) {
    if (mask.empty()) mask.assign(rows, true);
    if (mask.size() != rows) throw ContractError(std::string(what) + ": mask length differs from row count");
    if (std::find(mask.begin(), mask.end(), true) == mask.end())
      throw ContractError(std::string(what) + ": mask is all false (empty view)");
  }

  ModelConfig cfg_;
};

}  // namespace masa::model
