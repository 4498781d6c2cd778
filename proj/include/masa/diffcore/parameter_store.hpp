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

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "masa/diffcore/tensor.hpp"
#include "masa/errors.hpp"

namespace masa {

/// A named tensor held by a ParameterStore. Non-trainable entries are state
/// buffers (batch-norm running statistics) that the optimizer never touches.
template <typename T>
struct Parameter {
  Tensor<T> value;
  Tensor<T> grad;
  bool trainable = true;
};

/// First/second moment estimates for one parameter.
template <typename T>
struct AdamMoments {
  Tensor<T> m;
  Tensor<T> v;
};

/// Named trainable weights, state buffers and optimizer state.
///
/// Names are unique and iteration is in lexicographic order, which fixes the
/// order of every reduction that walks the store.
template <typename T>
class ParameterStore {
 public:
  Parameter<T>& add(const std::string& name, Tensor<T> value, bool trainable = true) {
    detail::require(!name.empty(), "ParameterStore: empty parameter name");
    detail::require(!entries_.contains(name), "ParameterStore: duplicate parameter '" + name + "'");
    Parameter<T> p;
    p.grad = Tensor<T>(value.dims());
    p.value = std::move(value);
    p.trainable = trainable;
    return entries_.emplace(name, std::move(p)).first->second;
  }

  bool contains(const std::string& name) const { return entries_.contains(name); }

  Parameter<T>& at(const std::string& name) {
    auto it = entries_.find(name);
    detail::require(it != entries_.end(), "ParameterStore: no parameter '" + name + "'");
    return it->second;
  }
  const Parameter<T>& at(const std::string& name) const {
    auto it = entries_.find(name);
    detail::require(it != entries_.end(), "ParameterStore: no parameter '" + name + "'");
    return it->second;
  }

  Tensor<T>& value(const std::string& name) { return at(name).value; }
  const Tensor<T>& value(const std::string& name) const { return at(name).value; }
  Tensor<T>& grad(const std::string& name) { return at(name).grad; }
  const Tensor<T>& grad(const std::string& name) const { return at(name).grad; }

  std::map<std::string, Parameter<T>>& entries() { return entries_; }
  const std::map<std::string, Parameter<T>>& entries() const { return entries_; }

  std::size_t trainable_count() const {
    std::size_t n = 0;
    for (const auto& [_, p] : entries_)
      if (p.trainable) n += p.value.size();
    return n;
  }

  void zero_grad() {
    for (auto& [_, p] : entries_) p.grad.fill(T(0));
  }

  std::map<std::string, AdamMoments<T>>& moments() { return moments_; }
  const std::map<std::string, AdamMoments<T>>& moments() const { return moments_; }
  std::uint64_t step() const noexcept { return step_; }
  void set_step(std::uint64_t s) noexcept { step_ = s; }

  /// Element-type conversion; gradients are reset, optimizer state converted.
  template <typename U>
  ParameterStore<U> cast() const {
    ParameterStore<U> out;
    for (const auto& [name, p] : entries_) out.add(name, p.value.template cast<U>(), p.trainable);
    for (const auto& [name, mv] : moments_)
      out.moments()[name] = AdamMoments<U>{mv.m.template cast<U>(), mv.v.template cast<U>()};
    out.set_step(step_);
    return out;
  }

  friend bool operator==(const ParameterStore& a, const ParameterStore& b) {
    if (a.step_ != b.step_ || a.entries_.size() != b.entries_.size() ||
        a.moments_.size() != b.moments_.size())
      return false;
    for (const auto& [name, p] : a.entries_) {
      auto it = b.entries_.find(name);
      if (it == b.entries_.end() || !(it->second.value == p.value) ||
          it->second.trainable != p.trainable)
        return false;
    }
    for (const auto& [name, mv] : a.moments_) {
      auto it = b.moments_.find(name);
      if (it == b.moments_.end() || !(it->second.m == mv.m) || !(it->second.v == mv.v)) return false;
    }
    return true;
  }

 private:
  std::map<std::string, Parameter<T>> entries_;
  std::map<std::string, AdamMoments<T>> moments_;
  std::uint64_t step_ = 0;
};

}  // namespace masa
