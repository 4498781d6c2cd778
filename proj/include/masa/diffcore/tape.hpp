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
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "masa/diffcore/parameter_store.hpp"
#include "masa/diffcore/tensor.hpp"
#include "masa/errors.hpp"

namespace masa {

template <typename T>
class Tape;

/// Handle to a value recorded on a Tape.
template <typename T>
struct Var {
  Tape<T>* tape = nullptr;
  std::size_t id = 0;

  const Tensor<T>& value() const { return tape->value(id); }
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
  bool needs_grad() const { return tape->needs_grad(id); }
  T item() const {
    detail::require(value().size() == 1, "Var::item: tensor is not scalar");
    return value()[0];
  }
};

/// Reverse-mode gradient tape.
///
/// Nodes are appended in evaluation order, so the record is already a
/// topological order of the computation graph; backward() walks it in reverse
/// and runs every reachable node's pullback exactly once. A graph instance is
/// single-threaded.
template <typename T>
class Tape {
 public:
  using Pullback = std::function<void(Tape&, std::size_t self)>;

  struct Node {
    Tensor<T> value;
    Tensor<T> grad;
    bool needs_grad = false;
    Tensor<T>* sink = nullptr;
    Pullback pullback;
  };

  Var<T> constant(Tensor<T> value) { return push(std::move(value), false, nullptr, {}); }

  /// Leaf bound to a store entry. Its gradient is accumulated into the
  /// entry's grad tensor by backward(). Non-trainable entries behave as
  /// constants.
  Var<T> parameter(ParameterStore<T>& store, const std::string& name) {
    auto& p = store.at(name);
    return push(p.value, p.trainable, p.trainable ? &p.grad : nullptr, {});
  }

  /// Records an operation result. `pullback` reads this node's gradient and
  /// adds contributions into its inputs via accumulate().
  Var<T> record(Tensor<T> value, bool needs_grad, Pullback pullback) {
    return push(std::move(value), needs_grad, nullptr, needs_grad ? std::move(pullback) : Pullback{});
  }

  /// Value of a detached (stop-gradient) node. When a freeze buffer is
  /// attached, detached values are appended to it in call order, or, in
  /// replay mode, read back from it instead of `value`. Replay makes finite
  /// differences see the same constants the analytic pass saw.
  Var<T> detached(const Tensor<T>& value) {
    if (!frozen_) return push(value, false, nullptr, {});
    if (!replay_) {
      frozen_->push_back(value);
      return push(value, false, nullptr, {});
    }
    detail::require(next_frozen_ < frozen_->size(), "Tape: more detached values than recorded");
    const Tensor<T>& v = (*frozen_)[next_frozen_++];
    detail::require(v.dims() == value.dims(), "Tape: detached value shape changed between passes");
    return push(v, false, nullptr, {});
  }

  void attach_freeze_buffer(std::vector<Tensor<T>>* buffer, bool replay) {
    frozen_ = buffer;
    replay_ = replay;
    next_frozen_ = 0;
  }

  const Tensor<T>& value(std::size_t id) const { return nodes_.at(id).value; }
  bool needs_grad(std::size_t id) const { return nodes_.at(id).needs_grad; }
  const Tensor<T>& grad(std::size_t id) const { return nodes_.at(id).grad; }

  /// Gradient buffer of node `id`, zero-initialized on first access.
  Tensor<T>& accumulate(std::size_t id) {
    Node& n = nodes_[id];
    if (n.grad.empty() && !n.value.empty()) n.grad = Tensor<T>(n.value.dims());
    return n.grad;
  }

  std::size_t size() const noexcept { return nodes_.size(); }

  /// Propagates d(loss)/d(node) to every node and adds the results into the
  /// bound parameter gradients. Calling it again without zeroing the store
  /// accumulates additively. Returns the number of pullbacks executed.
  std::size_t backward(Var<T> loss) {
    detail::require(loss.tape == this, "Tape::backward: loss recorded on another tape");
    detail::require(value(loss.id).size() == 1,
                    "Tape::backward: loss must be scalar, got " + shape_string(value(loss.id).dims()));
    for (auto& n : nodes_) n.grad = Tensor<T>();
    accumulate(loss.id)[0] = T(1);
    std::size_t visited = 0;
    for (std::size_t i = loss.id + 1; i-- > 0;) {
      Node& n = nodes_[i];
      if (!n.needs_grad || n.grad.empty()) continue;
      if (n.sink) {
        T* dst = n.sink->data();
        const T* src = n.grad.data();
        for (std::size_t e = 0; e < n.grad.size(); ++e) dst[e] += src[e];
      }
      if (n.pullback) {
        n.pullback(*this, i);
        ++visited;
      }
    }
    return visited;
  }

 private:
  Var<T> push(Tensor<T> value, bool needs_grad, Tensor<T>* sink, Pullback pullback) {
    Node n;
    n.value = std::move(value);
    n.needs_grad = needs_grad;
    n.sink = sink;
    n.pullback = std::move(pullback);
    nodes_.push_back(std::move(n));
    return Var<T>{this, nodes_.size() - 1};
  }

  std::vector<Node> nodes_;
  std::vector<Tensor<T>>* frozen_ = nullptr;
  bool replay_ = false;
  std::size_t next_frozen_ = 0;
};

}  // namespace masa
