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
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "masa/diffcore/parameter_store.hpp"
#include "masa/diffcore/tape.hpp"

namespace masa {

/// Builds a scalar loss on `tape` from the parameters in `store`.
template <typename T>
using LossBuilder = std::function<Var<T>(Tape<T>&, ParameterStore<T>&)>;

struct GradCheckOptions {
  double step = 1e-6;       // central-difference half step
  double tolerance = 1e-6;  // on |analytic − numeric| / max(1, |numeric|)
  std::size_t max_per_parameter = 0;  // 0 = check every element
  std::uint64_t seed = 0;
};

struct GradCheckEntry {
  std::string name;
  std::size_t index = 0;
  double analytic = 0;
  double numeric = 0;
  double error = 0;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;  // sorted, worst first
  std::size_t checked = 0;
  std::size_t failures = 0;
  double tolerance = 0;

  bool passed() const { return failures == 0 && checked > 0; }
  double worst_error() const { return entries.empty() ? 0.0 : entries.front().error; }

  std::string summary(std::size_t top = 5) const {
    std::ostringstream os;
    os << "checked " << checked << " elements, " << failures << " above tolerance " << tolerance;
    for (std::size_t i = 0; i < std::min(top, entries.size()); ++i) {
      const auto& e = entries[i];
      os << "\n  " << e.name << "[" << e.index << "] analytic=" << e.analytic << " numeric=" << e.numeric
         << " err=" << e.error;
    }
    return os.str();
  }
};

/// Compares analytic gradients of `analytic` (evaluated at `store`) with
/// central differences of `numeric` (evaluated at `reference`, which must
/// hold the same entry names). The two routes may use different scalar
/// types, e.g. a float model checked against a double evaluation.
template <typename A, typename N>
GradCheckReport grad_check_against(ParameterStore<A>& store, const LossBuilder<A>& analytic,
                                   const ParameterStore<N>& reference, const LossBuilder<N>& numeric,
                                   const GradCheckOptions& opt) {
  store.zero_grad();
  {
    Tape<A> tape;
    tape.backward(analytic(tape, store));
  }
  // Stop-gradient outputs are held at their values at the unperturbed
  // point, so the differences measure the same surrogate the tape
  // differentiates.
  std::vector<Tensor<N>> frozen;
  ParameterStore<N> probe = reference;
  {
    Tape<N> tape;
    tape.attach_freeze_buffer(&frozen, false);
    numeric(tape, probe);
  }
  auto eval = [&]() {
    Tape<N> tape;
    tape.attach_freeze_buffer(&frozen, true);
    return static_cast<double>(numeric(tape, probe).item());
  };

  GradCheckReport report;
  report.tolerance = opt.tolerance;
  std::mt19937_64 rng(opt.seed);
  for (auto& [name, p] : store.entries()) {
    if (!p.trainable) continue;
    std::vector<std::size_t> idx(p.value.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    if (opt.max_per_parameter && idx.size() > opt.max_per_parameter) {
      std::shuffle(idx.begin(), idx.end(), rng);
      idx.resize(opt.max_per_parameter);
      std::sort(idx.begin(), idx.end());
    }
    auto& target = probe.value(name);
    for (std::size_t i : idx) {
      const N saved = target[i];
      target[i] = static_cast<N>(static_cast<double>(saved) + opt.step);
      const double up = eval();
      target[i] = static_cast<N>(static_cast<double>(saved) - opt.step);
      const double down = eval();
      target[i] = saved;
      GradCheckEntry e;
      e.name = name;
      e.index = i;
      e.analytic = static_cast<double>(p.grad[i]);
      e.numeric = (up - down) / (2.0 * opt.step);
      e.error = std::abs(e.analytic - e.numeric) / std::max(1.0, std::abs(e.numeric));
      if (!(e.error <= opt.tolerance)) ++report.failures;
      report.entries.push_back(std::move(e));
      ++report.checked;
    }
  }
  std::stable_sort(report.entries.begin(), report.entries.end(),
                   [](const auto& a, const auto& b) { return a.error > b.error; });
  return report;
}

template <typename T>
GradCheckReport grad_check(ParameterStore<T>& store, const LossBuilder<T>& loss, const GradCheckOptions& opt) {
  const ParameterStore<T> reference = store;
  return grad_check_against<T, T>(store, loss, reference, loss, opt);
}

}  // namespace masa
