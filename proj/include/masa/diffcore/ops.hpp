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

// Differentiable operations recorded on a Tape. All operate on rank-2
// values; scalars are 1×1.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <memory>
#include <span>
#include <vector>

#include "masa/diffcore/tape.hpp"
#include "masa/diffcore/tensor.hpp"
#include "masa/errors.hpp"

namespace masa::ops {

inline constexpr double kCosineGuard = 1e-12;
inline constexpr double kLayerNormGuard = 1e-5;

namespace detail {

template <typename T>
void check_same(const Var<T>& a, const Var<T>& b, const char* op) {
  masa::detail::require(a.tape == b.tape, std::string(op) + ": operands on different tapes");
  masa::detail::require(a.value().rows() == b.value().rows() && a.value().cols() == b.value().cols(),
                        std::string(op) + ": shape mismatch " + shape_string(a.value().dims()) +
                            " vs " + shape_string(b.value().dims()));
}

template <typename T>
Tensor<T> like(const Tensor<T>& x) {
  return Tensor<T>::matrix(x.rows(), x.cols());
}

// Elementwise unary op with derivative given as a function of (x, y).
template <typename T, typename F, typename DF>
Var<T> unary(Var<T> a, F f, DF df) {
  auto& t = *a.tape;
  const Tensor<T>& x = a.value();
  Tensor<T> y = like(x);
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = f(x[i]);
  const std::size_t ia = a.id;
  return t.record(std::move(y), t.needs_grad(ia), [ia, df](Tape<T>& t, std::size_t self) {
    const Tensor<T>& g = t.grad(self);
    const Tensor<T>& x = t.value(ia);
    const Tensor<T>& y = t.value(self);
    Tensor<T>& dx = t.accumulate(ia);
    for (std::size_t i = 0; i < g.size(); ++i) dx[i] += g[i] * df(x[i], y[i]);
  });
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Linear algebra

template <typename T>
Var<T> matmul(Var<T> a, Var<T> b) {
  auto& t = *a.tape;
  const Tensor<T>& A = a.value();
  const Tensor<T>& B = b.value();
  masa::detail::require(A.cols() == B.rows(), "matmul: inner dimensions differ " +
                                                  shape_string(A.dims()) + " · " +
                                                  shape_string(B.dims()));
  const std::size_t m = A.rows(), k = A.cols(), n = B.cols();
  Tensor<T> C = Tensor<T>::matrix(m, n);
  kernels::gemm_nn(A.data(), B.data(), C.data(), m, k, n);
  const std::size_t ia = a.id, ib = b.id;
  return t.record(std::move(C), t.needs_grad(ia) || t.needs_grad(ib),
                  [ia, ib, m, k, n](Tape<T>& t, std::size_t self) {
                    const Tensor<T>& dC = t.grad(self);
                    if (t.needs_grad(ia))
                      kernels::gemm_nt(dC.data(), t.value(ib).data(), t.accumulate(ia).data(), m, n, k);
                    if (t.needs_grad(ib))
                      kernels::gemm_tn(t.value(ia).data(), dC.data(), t.accumulate(ib).data(), m, k, n);
                  });
}

/// x·W + b with b broadcast over rows (b is 1×n).
template <typename T>
Var<T> linear(Var<T> x, Var<T> w, Var<T> b) {
  auto& t = *x.tape;
  const Tensor<T>& X = x.value();
  const Tensor<T>& W = w.value();
  const Tensor<T>& B = b.value();
  masa::detail::require(X.cols() == W.rows(), "linear: input width " + std::to_string(X.cols()) +
                                                  " != weight rows " + std::to_string(W.rows()));
  masa::detail::require(B.size() == W.cols(), "linear: bias size mismatch");
  const std::size_t m = X.rows(), k = X.cols(), n = W.cols();
  Tensor<T> Y = Tensor<T>::matrix(m, n);
  for (std::size_t i = 0; i < m; ++i) std::copy(B.data(), B.data() + n, Y.data() + i * n);
  kernels::gemm_nn(X.data(), W.data(), Y.data(), m, k, n);
  const std::size_t ix = x.id, iw = w.id, ib = b.id;
  const bool ng = t.needs_grad(ix) || t.needs_grad(iw) || t.needs_grad(ib);
  return t.record(std::move(Y), ng, [ix, iw, ib, m, k, n](Tape<T>& t, std::size_t self) {
    const Tensor<T>& dY = t.grad(self);
    if (t.needs_grad(ix))
      kernels::gemm_nt(dY.data(), t.value(iw).data(), t.accumulate(ix).data(), m, n, k);
    if (t.needs_grad(iw))
      kernels::gemm_tn(t.value(ix).data(), dY.data(), t.accumulate(iw).data(), m, k, n);
    if (t.needs_grad(ib)) {
      Tensor<T>& dB = t.accumulate(ib);
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) dB[j] += dY[i * n + j];
    }
  });
}

template <typename T>
Var<T> transpose(Var<T> a) {
  auto& t = *a.tape;
  const Tensor<T>& A = a.value();
  const std::size_t m = A.rows(), n = A.cols();
  Tensor<T> Y = Tensor<T>::matrix(n, m);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) Y(j, i) = A(i, j);
  const std::size_t ia = a.id;
  return t.record(std::move(Y), t.needs_grad(ia), [ia, m, n](Tape<T>& t, std::size_t self) {
    const Tensor<T>& g = t.grad(self);
    Tensor<T>& dA = t.accumulate(ia);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) dA[i * n + j] += g[j * m + i];
  });
}

// ---------------------------------------------------------------------------
// Elementwise

template <typename T>
Var<T> add(Var<T> a, Var<T> b) {
  detail::check_same(a, b, "add");
  auto& t = *a.tape;
  Tensor<T> y = a.value();
  const Tensor<T>& B = b.value();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += B[i];
  const std::size_t ia = a.id, ib = b.id;
  return t.record(std::move(y), t.needs_grad(ia) || t.needs_grad(ib),
                  [ia, ib](Tape<T>& t, std::size_t self) {
                    const Tensor<T>& g = t.grad(self);
                    for (std::size_t id : {ia, ib}) {
                      if (!t.needs_grad(id)) continue;
                      Tensor<T>& d = t.accumulate(id);
                      for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i];
                    }
                  });
}

template <typename T>
Var<T> sub(Var<T> a, Var<T> b) {
  detail::check_same(a, b, "sub");
  auto& t = *a.tape;
  Tensor<T> y = a.value();
  const Tensor<T>& B = b.value();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] -= B[i];
  const std::size_t ia = a.id, ib = b.id;
  return t.record(std::move(y), t.needs_grad(ia) || t.needs_grad(ib),
                  [ia, ib](Tape<T>& t, std::size_t self) {
                    const Tensor<T>& g = t.grad(self);
                    if (t.needs_grad(ia)) {
                      Tensor<T>& d = t.accumulate(ia);
                      for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i];
                    }
                    if (t.needs_grad(ib)) {
                      Tensor<T>& d = t.accumulate(ib);
                      for (std::size_t i = 0; i < g.size(); ++i) d[i] -= g[i];
                    }
                  });
}

template <typename T>
Var<T> mul(Var<T> a, Var<T> b) {
  detail::check_same(a, b, "mul");
  auto& t = *a.tape;
  Tensor<T> y = a.value();
  const Tensor<T>& B = b.value();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] *= B[i];
  const std::size_t ia = a.id, ib = b.id;
  return t.record(std::move(y), t.needs_grad(ia) || t.needs_grad(ib),
                  [ia, ib](Tape<T>& t, std::size_t self) {
                    const Tensor<T>& g = t.grad(self);
                    if (t.needs_grad(ia)) {
                      const Tensor<T>& B = t.value(ib);
                      Tensor<T>& d = t.accumulate(ia);
                      for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i] * B[i];
                    }
                    if (t.needs_grad(ib)) {
                      const Tensor<T>& A = t.value(ia);
                      Tensor<T>& d = t.accumulate(ib);
                      for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i] * A[i];
                    }
                  });
}

template <typename T>
Var<T> div(Var<T> a, Var<T> b) {
  detail::check_same(a, b, "div");
  auto& t = *a.tape;
  Tensor<T> y = a.value();
  const Tensor<T>& B = b.value();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] /= B[i];
  const std::size_t ia = a.id, ib = b.id;
  return t.record(std::move(y), t.needs_grad(ia) || t.needs_grad(ib),
                  [ia, ib](Tape<T>& t, std::size_t self) {
                    const Tensor<T>& g = t.grad(self);
                    const Tensor<T>& B = t.value(ib);
                    if (t.needs_grad(ia)) {
                      Tensor<T>& d = t.accumulate(ia);
                      for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i] / B[i];
                    }
                    if (t.needs_grad(ib)) {
                      const Tensor<T>& Y = t.value(self);
                      Tensor<T>& d = t.accumulate(ib);
                      for (std::size_t i = 0; i < g.size(); ++i) d[i] -= g[i] * Y[i] / B[i];
                    }
                  });
}

/// a (m×n) + r (1×n) broadcast over rows.
template <typename T>
Var<T> add_row(Var<T> a, Var<T> r) {
  auto& t = *a.tape;
  const std::size_t m = a.rows(), n = a.cols();
  masa::detail::require(r.value().size() == n, "add_row: row vector size mismatch");
  Tensor<T> y = a.value();
  const Tensor<T>& R = r.value();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) y[i * n + j] += R[j];
  const std::size_t ia = a.id, ir = r.id;
  return t.record(std::move(y), t.needs_grad(ia) || t.needs_grad(ir),
                  [ia, ir, m, n](Tape<T>& t, std::size_t self) {
                    const Tensor<T>& g = t.grad(self);
                    if (t.needs_grad(ia)) {
                      Tensor<T>& d = t.accumulate(ia);
                      for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i];
                    }
                    if (t.needs_grad(ir)) {
                      Tensor<T>& d = t.accumulate(ir);
                      for (std::size_t i = 0; i < m; ++i)
                        for (std::size_t j = 0; j < n; ++j) d[j] += g[i * n + j];
                    }
                  });
}

/// a (m×n) ⊙ r (1×n) broadcast over rows.
template <typename T>
Var<T> mul_row(Var<T> a, Var<T> r) {
  auto& t = *a.tape;
  const std::size_t m = a.rows(), n = a.cols();
  masa::detail::require(r.value().size() == n, "mul_row: row vector size mismatch");
  Tensor<T> y = a.value();
  const Tensor<T>& R = r.value();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) y[i * n + j] *= R[j];
  const std::size_t ia = a.id, ir = r.id;
  return t.record(std::move(y), t.needs_grad(ia) || t.needs_grad(ir),
                  [ia, ir, m, n](Tape<T>& t, std::size_t self) {
                    const Tensor<T>& g = t.grad(self);
                    if (t.needs_grad(ia)) {
                      const Tensor<T>& R = t.value(ir);
                      Tensor<T>& d = t.accumulate(ia);
                      for (std::size_t i = 0; i < m; ++i)
                        for (std::size_t j = 0; j < n; ++j) d[i * n + j] += g[i * n + j] * R[j];
                    }
                    if (t.needs_grad(ir)) {
                      const Tensor<T>& A = t.value(ia);
                      Tensor<T>& d = t.accumulate(ir);
                      for (std::size_t i = 0; i < m; ++i)
                        for (std::size_t j = 0; j < n; ++j) d[j] += g[i * n + j] * A[i * n + j];
                    }
                  });
}

template <typename T>
Var<T> scale(Var<T> a, T s) {
  return detail::unary(a, [s](T x) { return x * s; }, [s](T, T) { return s; });
}

template <typename T>
Var<T> add_scalar(Var<T> a, T s) {
  return detail::unary(a, [s](T x) { return x + s; }, [](T, T) { return T(1); });
}

template <typename T>
Var<T> relu(Var<T> a) {
  return detail::unary(
      a, [](T x) { return x > T(0) ? x : T(0); }, [](T x, T) { return x > T(0) ? T(1) : T(0); });
}

template <typename T>
Var<T> abs(Var<T> a) {
  return detail::unary(
      a, [](T x) { return std::abs(x); },
      [](T x, T) { return x > T(0) ? T(1) : (x < T(0) ? T(-1) : T(0)); });
}

template <typename T>
Var<T> square(Var<T> a) {
  return detail::unary(a, [](T x) { return x * x; }, [](T x, T) { return T(2) * x; });
}

/// max(x, floor); gradient is zero where the floor is active.
template <typename T>
Var<T> clamp_min(Var<T> a, T floor) {
  return detail::unary(
      a, [floor](T x) { return x < floor ? floor : x; },
      [floor](T x, T) { return x < floor ? T(0) : T(1); });
}

/// Forward identity; contributes no gradient to its input.
template <typename T>
Var<T> stop_gradient(Var<T> a) {
  return a.tape->detached(a.value());
}

// ---------------------------------------------------------------------------
// Reductions and shape utilities

template <typename T>
Var<T> sum(Var<T> a) {
  auto& t = *a.tape;
  T s = T(0);
  for (T v : a.value().values()) s += v;
  const std::size_t ia = a.id;
  return t.record(Tensor<T>::scalar(s), t.needs_grad(ia), [ia](Tape<T>& t, std::size_t self) {
    const T g = t.grad(self)[0];
    Tensor<T>& d = t.accumulate(ia);
    for (std::size_t i = 0; i < d.size(); ++i) d[i] += g;
  });
}

template <typename T>
Var<T> mean(Var<T> a) {
  const std::size_t n = a.value().size();
  masa::detail::require(n > 0, "mean: empty tensor");
  return scale(sum(a), T(1) / static_cast<T>(n));
}

template <typename T>
Var<T> gather_rows(Var<T> a, std::vector<std::size_t> idx) {
  auto& t = *a.tape;
  const Tensor<T>& A = a.value();
  const std::size_t n = A.cols();
  Tensor<T> y = Tensor<T>::matrix(idx.size(), n);
  for (std::size_t r = 0; r < idx.size(); ++r) {
    masa::detail::require(idx[r] < A.rows(), "gather_rows: index out of range");
    std::copy_n(A.data() + idx[r] * n, n, y.data() + r * n);
  }
  const std::size_t ia = a.id;
  return t.record(std::move(y), t.needs_grad(ia),
                  [ia, n, idx = std::move(idx)](Tape<T>& t, std::size_t self) {
                    const Tensor<T>& g = t.grad(self);
                    Tensor<T>& d = t.accumulate(ia);
                    for (std::size_t r = 0; r < idx.size(); ++r)
                      for (std::size_t j = 0; j < n; ++j) d[idx[r] * n + j] += g[r * n + j];
                  });
}

/// Zeroes rows whose mask entry is false.
template <typename T>
Var<T> mask_rows(Var<T> a, const std::vector<bool>& mask) {
  auto& t = *a.tape;
  masa::detail::require(mask.size() == a.rows(), "mask_rows: mask length mismatch");
  Tensor<T> y = a.value();
  const std::size_t n = y.cols();
  for (std::size_t i = 0; i < mask.size(); ++i)
    if (!mask[i]) std::fill_n(y.data() + i * n, n, T(0));
  const std::size_t ia = a.id;
  return t.record(std::move(y), t.needs_grad(ia), [ia, n, mask](Tape<T>& t, std::size_t self) {
    const Tensor<T>& g = t.grad(self);
    Tensor<T>& d = t.accumulate(ia);
    for (std::size_t i = 0; i < mask.size(); ++i)
      if (mask[i])
        for (std::size_t j = 0; j < n; ++j) d[i * n + j] += g[i * n + j];
  });
}

template <typename T>
Var<T> concat_cols(const std::vector<Var<T>>& parts) {
  masa::detail::require(!parts.empty(), "concat_cols: no inputs");
  auto& t = *parts.front().tape;
  const std::size_t m = parts.front().rows();
  std::vector<std::size_t> ids, widths;
  std::size_t n = 0;
  bool ng = false;
  for (const auto& p : parts) {
    masa::detail::require(p.rows() == m, "concat_cols: row count mismatch");
    ids.push_back(p.id);
    widths.push_back(p.cols());
    n += p.cols();
    ng = ng || p.needs_grad();
  }
  Tensor<T> y = Tensor<T>::matrix(m, n);
  std::size_t off = 0;
  for (const auto& p : parts) {
    const std::size_t w = p.cols();
    for (std::size_t i = 0; i < m; ++i) std::copy_n(p.value().data() + i * w, w, y.data() + i * n + off);
    off += w;
  }
  return t.record(std::move(y), ng, [ids, widths, m, n](Tape<T>& t, std::size_t self) {
    const Tensor<T>& g = t.grad(self);
    std::size_t off = 0;
    for (std::size_t p = 0; p < ids.size(); ++p) {
      const std::size_t w = widths[p];
      if (t.needs_grad(ids[p])) {
        Tensor<T>& d = t.accumulate(ids[p]);
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t j = 0; j < w; ++j) d[i * w + j] += g[i * n + off + j];
      }
      off += w;
    }
  });
}

// ---------------------------------------------------------------------------
// Normalization

/// Per-row standardization without affine terms: (x − μ)/√(σ² + eps).
/// A constant row maps to zeros.
template <typename T>
Var<T> layer_norm(Var<T> a, T eps = T(kLayerNormGuard)) {
  auto& t = *a.tape;
  const Tensor<T>& X = a.value();
  const std::size_t m = X.rows(), n = X.cols();
  Tensor<T> y = detail::like(X);
  std::vector<T> inv_std(m);
  for (std::size_t i = 0; i < m; ++i) {
    const T* x = X.data() + i * n;
    T mu = T(0);
    for (std::size_t j = 0; j < n; ++j) mu += x[j];
    mu /= static_cast<T>(n);
    T var = T(0);
    for (std::size_t j = 0; j < n; ++j) var += (x[j] - mu) * (x[j] - mu);
    var /= static_cast<T>(n);
    inv_std[i] = T(1) / std::sqrt(var + eps);
    for (std::size_t j = 0; j < n; ++j) y[i * n + j] = (x[j] - mu) * inv_std[i];
  }
  const std::size_t ia = a.id;
  return t.record(std::move(y), t.needs_grad(ia),
                  [ia, m, n, inv_std = std::move(inv_std)](Tape<T>& t, std::size_t self) {
                    const Tensor<T>& g = t.grad(self);
                    const Tensor<T>& Y = t.value(self);
                    Tensor<T>& d = t.accumulate(ia);
                    for (std::size_t i = 0; i < m; ++i) {
                      const T* gi = g.data() + i * n;
                      const T* yi = Y.data() + i * n;
                      T mg = T(0), mgy = T(0);
                      for (std::size_t j = 0; j < n; ++j) {
                        mg += gi[j];
                        mgy += gi[j] * yi[j];
                      }
                      mg /= static_cast<T>(n);
                      mgy /= static_cast<T>(n);
                      for (std::size_t j = 0; j < n; ++j)
                        d[i * n + j] += inv_std[i] * (gi[j] - mg - yi[j] * mgy);
                    }
                  });
}

/// Batch statistics computed by batch_norm_normalize.
template <typename T>
struct BatchStats {
  std::vector<T> mean;
  std::vector<T> var;
  std::size_t count = 0;
};

/// Per-column standardization over the rows selected by `rows` (all rows if
/// empty). Unselected rows produce zeros and receive no gradient. Uses the
/// biased batch variance.
template <typename T>
Var<T> batch_norm_normalize(Var<T> a, const std::vector<bool>& rows, T eps, BatchStats<T>* stats = nullptr) {
  auto& t = *a.tape;
  const Tensor<T>& X = a.value();
  const std::size_t m = X.rows(), n = X.cols();
  std::vector<bool> sel = rows.empty() ? std::vector<bool>(m, true) : rows;
  masa::detail::require(sel.size() == m, "batch_norm: row mask length mismatch");
  const std::size_t cnt = static_cast<std::size_t>(std::count(sel.begin(), sel.end(), true));
  masa::detail::require(cnt >= 1, "batch_norm: no rows selected");
  std::vector<T> mu(n, T(0)), var(n, T(0)), inv(n);
  for (std::size_t i = 0; i < m; ++i)
    if (sel[i])
      for (std::size_t j = 0; j < n; ++j) mu[j] += X[i * n + j];
  for (auto& v : mu) v /= static_cast<T>(cnt);
  for (std::size_t i = 0; i < m; ++i)
    if (sel[i])
      for (std::size_t j = 0; j < n; ++j) var[j] += (X[i * n + j] - mu[j]) * (X[i * n + j] - mu[j]);
  for (auto& v : var) v /= static_cast<T>(cnt);
  for (std::size_t j = 0; j < n; ++j) inv[j] = T(1) / std::sqrt(var[j] + eps);
  Tensor<T> y = detail::like(X);
  for (std::size_t i = 0; i < m; ++i)
    if (sel[i])
      for (std::size_t j = 0; j < n; ++j) y[i * n + j] = (X[i * n + j] - mu[j]) * inv[j];
  if (stats) *stats = BatchStats<T>{mu, var, cnt};
  const std::size_t ia = a.id;
  return t.record(std::move(y), t.needs_grad(ia),
                  [ia, m, n, cnt, sel = std::move(sel), inv = std::move(inv)](Tape<T>& t, std::size_t self) {
                    const Tensor<T>& g = t.grad(self);
                    const Tensor<T>& Y = t.value(self);
                    std::vector<T> mg(n, T(0)), mgy(n, T(0));
                    for (std::size_t i = 0; i < m; ++i)
                      if (sel[i])
                        for (std::size_t j = 0; j < n; ++j) {
                          mg[j] += g[i * n + j];
                          mgy[j] += g[i * n + j] * Y[i * n + j];
                        }
                    const T c = static_cast<T>(cnt);
                    Tensor<T>& d = t.accumulate(ia);
                    for (std::size_t i = 0; i < m; ++i)
                      if (sel[i])
                        for (std::size_t j = 0; j < n; ++j)
                          d[i * n + j] += inv[j] * (g[i * n + j] - mg[j] / c - Y[i * n + j] * mgy[j] / c);
                  });
}

// ---------------------------------------------------------------------------
// Softmax and similarity

/// Row-wise softmax, stabilized by subtracting each row's maximum.
template <typename T>
Var<T> softmax_rows(Var<T> a) {
  auto& t = *a.tape;
  const Tensor<T>& X = a.value();
  const std::size_t m = X.rows(), n = X.cols();
  Tensor<T> y = detail::like(X);
  for (std::size_t i = 0; i < m; ++i) {
    const T* x = X.data() + i * n;
    T* yi = y.data() + i * n;
    const T mx = *std::max_element(x, x + n);
    T s = T(0);
    for (std::size_t j = 0; j < n; ++j) s += (yi[j] = std::exp(x[j] - mx));
    for (std::size_t j = 0; j < n; ++j) yi[j] /= s;
  }
  const std::size_t ia = a.id;
  return t.record(std::move(y), t.needs_grad(ia), [ia, m, n](Tape<T>& t, std::size_t self) {
    const Tensor<T>& g = t.grad(self);
    const Tensor<T>& Y = t.value(self);
    Tensor<T>& d = t.accumulate(ia);
    for (std::size_t i = 0; i < m; ++i) {
      T dot = T(0);
      for (std::size_t j = 0; j < n; ++j) dot += g[i * n + j] * Y[i * n + j];
      for (std::size_t j = 0; j < n; ++j) d[i * n + j] += Y[i * n + j] * (g[i * n + j] - dot);
    }
  });
}

/// u·v / (‖u‖‖v‖ + guard). Two zero vectors give 0; `degenerate` reports a
/// zero-norm operand.
template <typename T>
T cosine_similarity(std::span<const T> u, std::span<const T> v, bool* degenerate = nullptr,
                    T guard = T(kCosineGuard)) {
  masa::detail::require(u.size() == v.size() && !u.empty(), "cosine_similarity: dimension mismatch");
  T dot = T(0), nu = T(0), nv = T(0);
  for (std::size_t i = 0; i < u.size(); ++i) {
    dot += u[i] * v[i];
    nu += u[i] * u[i];
    nv += v[i] * v[i];
  }
  if (degenerate) *degenerate = (nu == T(0) || nv == T(0));
  return dot / (std::sqrt(nu) * std::sqrt(nv) + guard);
}

namespace detail {

template <typename T>
std::vector<T> row_norms(const Tensor<T>& X) {
  const std::size_t m = X.rows(), n = X.cols();
  std::vector<T> out(m);
  for (std::size_t i = 0; i < m; ++i) {
    T s = T(0);
    for (std::size_t j = 0; j < n; ++j) s += X[i * n + j] * X[i * n + j];
    out[i] = std::sqrt(s);
  }
  return out;
}

// Adds Σ_k w1[j,k]·other[k] − (Σ_k w2[j,k]) · self[j] / ‖self[j]‖ into d[j].
template <typename T>
void cosine_pullback_side(const Tensor<T>& self, const std::vector<T>& self_norm, const Tensor<T>& w1,
                          const Tensor<T>& other, const std::vector<T>& w2sum, Tensor<T>& d) {
  const std::size_t m = self.rows(), n = self.cols(), k = other.rows();
  kernels::gemm_nn(w1.data(), other.data(), d.data(), m, k, n);
  for (std::size_t j = 0; j < m; ++j) {
    if (self_norm[j] == T(0)) continue;
    const T c = w2sum[j] / self_norm[j];
    for (std::size_t e = 0; e < n; ++e) d[j * n + e] -= c * self[j * n + e];
  }
}

}  // namespace detail

/// C[j,k] = cos(a_j, b_k) with the zero-norm guard.
template <typename T>
Var<T> cosine_matrix(Var<T> a, Var<T> b, T guard = T(kCosineGuard)) {
  auto& t = *a.tape;
  const Tensor<T>& A = a.value();
  const Tensor<T>& B = b.value();
  masa::detail::require(A.cols() == B.cols(), "cosine_matrix: embedding widths differ");
  const std::size_t m = A.rows(), n = B.rows(), d = A.cols();
  Tensor<T> dots = Tensor<T>::matrix(m, n);
  kernels::gemm_nt(A.data(), B.data(), dots.data(), m, d, n);
  std::vector<T> na = detail::row_norms(A), nb = detail::row_norms(B);
  Tensor<T> C = Tensor<T>::matrix(m, n);
  for (std::size_t j = 0; j < m; ++j)
    for (std::size_t k = 0; k < n; ++k) C(j, k) = dots(j, k) / (na[j] * nb[k] + guard);
  const std::size_t ia = a.id, ib = b.id;
  return t.record(
      std::move(C), t.needs_grad(ia) || t.needs_grad(ib),
      [ia, ib, m, n, guard, na = std::move(na), nb = std::move(nb), dots = std::move(dots)](
          Tape<T>& t, std::size_t self) {
        const Tensor<T>& G = t.grad(self);
        Tensor<T> w1 = Tensor<T>::matrix(m, n);
        Tensor<T> w2 = Tensor<T>::matrix(m, n);
        for (std::size_t j = 0; j < m; ++j)
          for (std::size_t k = 0; k < n; ++k) {
            const T den = na[j] * nb[k] + guard;
            w1(j, k) = G(j, k) / den;
            w2(j, k) = G(j, k) * dots(j, k) / (den * den);
          }
        if (t.needs_grad(ia)) {
          std::vector<T> s(m, T(0));
          for (std::size_t j = 0; j < m; ++j)
            for (std::size_t k = 0; k < n; ++k) s[j] += w2(j, k) * nb[k];
          detail::cosine_pullback_side(t.value(ia), na, w1, t.value(ib), s, t.accumulate(ia));
        }
        if (t.needs_grad(ib)) {
          Tensor<T> w1t = Tensor<T>::matrix(n, m);
          std::vector<T> s(n, T(0));
          for (std::size_t j = 0; j < m; ++j)
            for (std::size_t k = 0; k < n; ++k) {
              w1t(k, j) = w1(j, k);
              s[k] += w2(j, k) * na[j];
            }
          detail::cosine_pullback_side(t.value(ib), nb, w1t, t.value(ia), s, t.accumulate(ib));
        }
      });
}

/// Row-paired cosine: out[j] = cos(a_j, b_j), shape m×1.
template <typename T>
Var<T> cosine_rows(Var<T> a, Var<T> b, T guard = T(kCosineGuard)) {
  detail::check_same(a, b, "cosine_rows");
  auto& t = *a.tape;
  const Tensor<T>& A = a.value();
  const Tensor<T>& B = b.value();
  const std::size_t m = A.rows(), d = A.cols();
  std::vector<T> na = detail::row_norms(A), nb = detail::row_norms(B), dots(m, T(0));
  Tensor<T> C = Tensor<T>::matrix(m, 1);
  for (std::size_t j = 0; j < m; ++j) {
    for (std::size_t e = 0; e < d; ++e) dots[j] += A[j * d + e] * B[j * d + e];
    C[j] = dots[j] / (na[j] * nb[j] + guard);
  }
  const std::size_t ia = a.id, ib = b.id;
  return t.record(
      std::move(C), t.needs_grad(ia) || t.needs_grad(ib),
      [ia, ib, m, d, guard, na = std::move(na), nb = std::move(nb), dots = std::move(dots)](
          Tape<T>& t, std::size_t self) {
        const Tensor<T>& G = t.grad(self);
        const Tensor<T>& A = t.value(ia);
        const Tensor<T>& B = t.value(ib);
        for (int side = 0; side < 2; ++side) {
          const std::size_t id = side == 0 ? ia : ib;
          if (!t.needs_grad(id)) continue;
          const Tensor<T>& S = side == 0 ? A : B;
          const Tensor<T>& O = side == 0 ? B : A;
          const std::vector<T>& ns = side == 0 ? na : nb;
          const std::vector<T>& no = side == 0 ? nb : na;
          Tensor<T>& dd = t.accumulate(id);
          for (std::size_t j = 0; j < m; ++j) {
            const T den = ns[j] * no[j] + guard;
            const T w1 = G[j] / den;
            const T w2 = ns[j] == T(0) ? T(0) : G[j] * dots[j] * no[j] / (den * den * ns[j]);
            for (std::size_t e = 0; e < d; ++e) dd[j * d + e] += w1 * O[j * d + e] - w2 * S[j * d + e];
          }
        }
      });
}

// ---------------------------------------------------------------------------
// Attention

/// Multi-head scaled dot-product attention over pre-projected inputs.
///
/// q is Tq×d, k and v are Tk×d; d is split into `heads` contiguous blocks.
/// Keys with key_mask[j] == false get zero weight. If `weights` is given it
/// receives the attention probabilities as a heads×Tq×Tk tensor.
template <typename T>
Var<T> attention(Var<T> q, Var<T> k, Var<T> v, std::size_t heads, const std::vector<bool>& key_mask,
                 Tensor<T>* weights = nullptr) {
  auto& t = *q.tape;
  const Tensor<T>& Q = q.value();
  const Tensor<T>& K = k.value();
  const Tensor<T>& V = v.value();
  const std::size_t tq = Q.rows(), tk = K.rows(), d = Q.cols();
  masa::detail::require(K.cols() == d && V.cols() == d && V.rows() == tk, "attention: shape mismatch");
  masa::detail::require(heads >= 1 && d % heads == 0, "attention: width not divisible by head count");
  std::vector<bool> km = key_mask.empty() ? std::vector<bool>(tk, true) : key_mask;
  masa::detail::require(km.size() == tk, "attention: key mask length mismatch");
  masa::detail::require(std::find(km.begin(), km.end(), true) != km.end(),
                        "attention: every key position is masked (empty view)");
  const std::size_t dh = d / heads;
  const T scale = T(1) / std::sqrt(static_cast<T>(dh));
  auto P = std::make_shared<Tensor<T>>(std::vector<std::size_t>{heads, tq, tk});
  Tensor<T> out = Tensor<T>::matrix(tq, d);
  for (std::size_t h = 0; h < heads; ++h) {
    const std::size_t off = h * dh;
    for (std::size_t i = 0; i < tq; ++i) {
      T* p = P->data() + (h * tq + i) * tk;
      const T* qi = Q.data() + i * d + off;
      T mx = -std::numeric_limits<T>::infinity();
      for (std::size_t j = 0; j < tk; ++j) {
        if (!km[j]) continue;
        const T* kj = K.data() + j * d + off;
        T s = T(0);
        for (std::size_t c = 0; c < dh; ++c) s += qi[c] * kj[c];
        p[j] = s * scale;
        mx = std::max(mx, p[j]);
      }
      T z = T(0);
      for (std::size_t j = 0; j < tk; ++j) {
        if (!km[j]) continue;
        z += (p[j] = std::exp(p[j] - mx));
      }
      T* oi = out.data() + i * d + off;
      for (std::size_t j = 0; j < tk; ++j) {
        if (!km[j]) continue;
        p[j] /= z;
        const T* vj = V.data() + j * d + off;
        for (std::size_t c = 0; c < dh; ++c) oi[c] += p[j] * vj[c];
      }
    }
  }
  if (weights) *weights = *P;
  const std::size_t iq = q.id, ik = k.id, iv = v.id;
  const bool ng = t.needs_grad(iq) || t.needs_grad(ik) || t.needs_grad(iv);
  return t.record(std::move(out), ng, [iq, ik, iv, heads, tq, tk, d, dh, scale, P](Tape<T>& t, std::size_t self) {
    const Tensor<T>& G = t.grad(self);
    const Tensor<T>& Q = t.value(iq);
    const Tensor<T>& K = t.value(ik);
    const Tensor<T>& V = t.value(iv);
    Tensor<T>* dQ = t.needs_grad(iq) ? &t.accumulate(iq) : nullptr;
    Tensor<T>* dK = t.needs_grad(ik) ? &t.accumulate(ik) : nullptr;
    Tensor<T>* dV = t.needs_grad(iv) ? &t.accumulate(iv) : nullptr;
    std::vector<T> dp(tk);
    for (std::size_t h = 0; h < heads; ++h) {
      const std::size_t off = h * dh;
      for (std::size_t i = 0; i < tq; ++i) {
        const T* p = P->data() + (h * tq + i) * tk;
        const T* gi = G.data() + i * d + off;
        T dot = T(0);
        for (std::size_t j = 0; j < tk; ++j) {
          if (p[j] == T(0)) {
            dp[j] = T(0);
            continue;
          }
          const T* vj = V.data() + j * d + off;
          T s = T(0);
          for (std::size_t c = 0; c < dh; ++c) s += gi[c] * vj[c];
          dp[j] = s;
          dot += p[j] * s;
          if (dV) {
            T* dvj = dV->data() + j * d + off;
            for (std::size_t c = 0; c < dh; ++c) dvj[c] += p[j] * gi[c];
          }
        }
        if (!dQ && !dK) continue;
        const T* qi = Q.data() + i * d + off;
        for (std::size_t j = 0; j < tk; ++j) {
          if (p[j] == T(0)) continue;
          const T ds = p[j] * (dp[j] - dot) * scale;
          if (dQ) {
            const T* kj = K.data() + j * d + off;
            T* dqi = dQ->data() + i * d + off;
            for (std::size_t c = 0; c < dh; ++c) dqi[c] += ds * kj[c];
          }
          if (dK) {
            T* dkj = dK->data() + j * d + off;
            for (std::size_t c = 0; c < dh; ++c) dkj[c] += ds * qi[c];
          }
        }
      }
    }
  });
}

}  // namespace masa::ops
