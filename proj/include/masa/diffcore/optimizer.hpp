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
#include <cmath>
#include <cstdint>

#include "masa/diffcore/parameter_store.hpp"

namespace masa {

struct AdamOptions {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// One Adam update over every trainable entry, then zeroes all gradients.
template <typename T>
void adam_step(ParameterStore<T>& store, double lr, const AdamOptions& opt = {}) {
  const std::uint64_t step = store.step() + 1;
  store.set_step(step);
  const double bc1 = 1.0 - std::pow(opt.beta1, static_cast<double>(step));
  const double bc2 = 1.0 - std::pow(opt.beta2, static_cast<double>(step));
  for (auto& [name, p] : store.entries()) {
    if (!p.trainable) continue;
    auto& mv = store.moments()[name];
    if (mv.m.size() != p.value.size()) {
      mv.m = Tensor<T>(p.value.dims());
      mv.v = Tensor<T>(p.value.dims());
    }
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const double g = static_cast<double>(p.grad[i]);
      const double m = opt.beta1 * static_cast<double>(mv.m[i]) + (1.0 - opt.beta1) * g;
      const double v = opt.beta2 * static_cast<double>(mv.v[i]) + (1.0 - opt.beta2) * g * g;
      mv.m[i] = static_cast<T>(m);
      mv.v[i] = static_cast<T>(v);
      const double update = lr * (m / bc1) / (std::sqrt(v / bc2) + opt.eps);
      p.value[i] = static_cast<T>(static_cast<double>(p.value[i]) - update);
    }
  }
  store.zero_grad();
}

/// Step decay: halves the base rate every 50 epochs, frozen from epoch 150 on.
inline double lr_schedule(int epoch, double base_lr) {
  const int halvings = std::min(std::max(epoch, 0) / 50, 3);
  return base_lr / static_cast<double>(1 << halvings);
}

}  // namespace masa
