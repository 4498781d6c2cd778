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

#include <cstddef>
#include <vector>

#include "masa/diffcore/tensor.hpp"
#include "masa/errors.hpp"

namespace masa::model {

struct ModelConfig {
  std::size_t input_dim = 16;
  std::size_t mlp_hidden = 64;
  std::size_t embed_dim = 32;
  std::size_t projection_dim = 32;
  std::size_t encoder_layers = 4;  // alternating self, cross, self, cross, ...
  std::size_t predictor_layers = 2;
  std::size_t heads = 4;
  std::size_t ffn_multiplier = 2;
  bool use_batch_norm = true;
  double bn_momentum = 0.1;
  bool use_positional_encoding = true;
  // Architectural ablations: the disabled layer kind becomes an identity.
  bool disable_self_attention = false;
  bool disable_cross_attention = false;
  // Cluster predictor replaced by the identity map.
  bool disable_cluster_predictor = false;

  void validate() const {
    if (input_dim < 1 || mlp_hidden < 1 || embed_dim < 1 || projection_dim < 1 || heads < 1 || ffn_multiplier < 1)
      throw ConfigError("model: dimensions must be >= 1");
    if (encoder_layers % 2 != 0) throw ConfigError("model: encoder_layers must be even (self/cross pairs)");
    if (embed_dim % 2 != 0) throw ConfigError("model: embed_dim must be even for the positional encoding");
    if (embed_dim % heads != 0 || projection_dim % heads != 0)
      throw ConfigError("model: embed_dim and projection_dim must be divisible by heads");
  }

  /// Flat numeric encoding stored alongside checkpoints.
  Tensor<float> to_tensor() const {
    std::vector<float> v = {static_cast<float>(input_dim),
                            static_cast<float>(mlp_hidden),
                            static_cast<float>(embed_dim),
                            static_cast<float>(projection_dim),
                            static_cast<float>(encoder_layers),
                            static_cast<float>(predictor_layers),
                            static_cast<float>(heads),
                            static_cast<float>(ffn_multiplier),
                            use_batch_norm ? 1.f : 0.f,
                            static_cast<float>(bn_momentum),
                            use_positional_encoding ? 1.f : 0.f,
                            disable_self_attention ? 1.f : 0.f,
                            disable_cross_attention ? 1.f : 0.f,
                            disable_cluster_predictor ? 1.f : 0.f};
    const std::size_t n = v.size();
    return Tensor<float>({n}, std::move(v));
  }

  static ModelConfig from_tensor(const Tensor<float>& t) {
    if (t.size() != 14) throw FormatError("model config record has " + std::to_string(t.size()) + " fields", 0);
    auto u = [&](std::size_t i) { return static_cast<std::size_t>(t[i]); };
    ModelConfig c;
    c.input_dim = u(0);
    c.mlp_hidden = u(1);
    c.embed_dim = u(2);
    c.projection_dim = u(3);
    c.encoder_layers = u(4);
    c.predictor_layers = u(5);
    c.heads = u(6);
    c.ffn_multiplier = u(7);
    c.use_batch_norm = t[8] != 0.f;
    c.bn_momentum = t[9];
    c.use_positional_encoding = t[10] != 0.f;
    c.disable_self_attention = t[11] != 0.f;
    c.disable_cross_attention = t[12] != 0.f;
    c.disable_cluster_predictor = t[13] != 0.f;
    c.validate();
    return c;
  }
};

}  // namespace masa::model
