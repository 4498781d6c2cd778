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

#include <gtest/gtest.h>

#include <cmath>
#include <cstring>

#include "masa/diffcore/checkpoint.hpp"
#include "masa/diffcore/container.hpp"
#include "masa/diffcore/grad_check.hpp"
#include "masa/diffcore/ops.hpp"
#include "masa/diffcore/optimizer.hpp"
#include "masa/diffcore/tape.hpp"
#include "support.hpp"

using namespace masa;
using masa::testing::random_matrix;

namespace {

using D = double;

Tensor<D> md(std::initializer_list<std::initializer_list<D>> rows) { return Tensor<D>::from_rows(rows); }

// Builds a store with a single parameter "x" and checks the gradient of
// `f` against central differences in double precision.
GradCheckReport check_unary(const Tensor<D>& x, const std::function<Var<D>(Var<D>)>& f, double tol = 1e-6) {
  ParameterStore<D> s;
  s.add("x", x);
  LossBuilder<D> loss = [&](Tape<D>& t, ParameterStore<D>& st) { return ops::sum(f(t.parameter(st, "x"))); };
  GradCheckOptions opt;
  opt.tolerance = tol;
  return grad_check(s, loss, opt);
}

// Weighted sum so that every output element gets a distinct upstream
// gradient; plain sums hide errors for ops whose outputs sum to a constant.
Var<D> weighted(Var<D> y, std::uint64_t seed = 99) {
  return ops::sum(ops::mul(y, y.tape->constant(random_matrix<D>(y.rows(), y.cols(), seed))));
}

}  // namespace

// ---- forward values -----------------------------------------------------------

TEST(Matmul, IdentityAndForcedArithmetic) {
  Tape<D> t;
  auto r = ops::matmul(t.constant(md({{1, 0}, {0, 1}})), t.constant(md({{1, 2}, {3, 4}})));
  EXPECT_EQ(r.value(), md({{1, 2}, {3, 4}}));
  auto z = ops::matmul(t.constant(md({{1, 0}})), t.constant(md({{0}, {5}})));
  EXPECT_EQ(z.value(), md({{0}}));
}

TEST(Matmul, MatchesTripleLoop) {
  Tape<D> t;
  const auto a = random_matrix<D>(3, 4, 1), b = random_matrix<D>(4, 2, 2);
  const auto c = ops::matmul(t.constant(a), t.constant(b)).value();
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 2; ++j) {
      double acc = 0;
      for (std::size_t k = 0; k < 4; ++k) acc += a(i, k) * b(k, j);
      EXPECT_NEAR(c(i, j), acc, 1e-12);
    }
}

TEST(Matmul, DimensionMismatchIsContractError) {
  Tape<D> t;
  EXPECT_THROW(ops::matmul(t.constant(Tensor<D>::matrix(2, 3)), t.constant(Tensor<D>::matrix(2, 3))), ContractError);
}

TEST(Softmax, UniformShiftAndOracle) {
  Tape<D> t;
  auto u = ops::softmax_rows(t.constant(md({{0, 0, 0, 0}}))).value();
  for (double v : u.values()) EXPECT_DOUBLE_EQ(v, 0.25);
  for (double c : {-1000.0, 0.0, 3.5, 1000.0}) {
    auto p = ops::softmax_rows(t.constant(md({{c, c}}))).value();
    EXPECT_DOUBLE_EQ(p[0], 0.5);
    EXPECT_DOUBLE_EQ(p[1], 0.5);
  }
  // exp(x)/Σexp from a 30-digit arbitrary-precision evaluation.
  auto p = ops::softmax_rows(t.constant(md({{1, 0, -1}}))).value();
  EXPECT_NEAR(p[0], 0.665240955774821889529018280175, 1e-15);
  EXPECT_NEAR(p[1], 0.244728471054797652472959618341, 1e-15);
  EXPECT_NEAR(p[2], 0.0900305731703804579980221014845, 1e-15);
}

TEST(Softmax, RowsSumToOneAndShiftInvariant) {
  Tape<float> t;
  auto x = random_matrix(5, 7, 3, -30, 30);
  auto p = ops::softmax_rows(t.constant(x)).value();
  auto shifted = x;
  for (std::size_t r = 0; r < 5; ++r)
    for (std::size_t c = 0; c < 7; ++c) shifted(r, c) += static_cast<float>(r) * 11.f;
  auto q = ops::softmax_rows(t.constant(shifted)).value();
  for (std::size_t r = 0; r < 5; ++r) {
    double s = 0;
    for (std::size_t c = 0; c < 7; ++c) {
      s += p(r, c);
      EXPECT_GE(p(r, c), 0.f);
      EXPECT_NEAR(p(r, c), q(r, c), 1e-6);
    }
    EXPECT_NEAR(s, 1.0, 1e-6);
  }
}

TEST(Cosine, Examples) {
  auto cs = [](std::vector<double> u, std::vector<double> v) {
    return ops::cosine_similarity<double>(std::span<const double>(u), std::span<const double>(v));
  };
  // The zero-norm guard sits in the denominator: 1 / (1 + 1e-12).
  EXPECT_NEAR(cs({1, 0}, {1, 0}), 1.0, 1e-6);
  EXPECT_EQ(cs({1, 0}, {1, 0}), 1.0 / (1.0 + 1e-12));
  EXPECT_EQ(cs({1, 0}, {0, 1}), 0.0);
  EXPECT_EQ(cs({1, 1}, {1, -1}), 0.0);
  bool degenerate = false;
  std::vector<double> z = {0, 0};
  EXPECT_EQ(ops::cosine_similarity<double>(std::span<const double>(z), std::span<const double>(z), &degenerate), 0.0);
  EXPECT_TRUE(degenerate);
}

TEST(Cosine, MatrixAgreesWithPairwiseAndStaysInRange) {
  Tape<D> t;
  auto a = random_matrix<D>(4, 6, 5), b = random_matrix<D>(3, 6, 6);
  auto c = ops::cosine_matrix(t.constant(a), t.constant(b)).value();
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 3; ++j) {
      EXPECT_NEAR(c(i, j), ops::cosine_similarity<double>(a.row(i), b.row(j)), 1e-12);
      EXPECT_LE(std::abs(c(i, j)), 1 + 1e-6);
    }
}

TEST(StopGradient, ForwardIdentityAndBlockedEdge) {
  ParameterStore<D> s;
  s.add("x", md({{1.5, -2, 3}}));
  {
    Tape<D> t;
    auto x = t.parameter(s, "x");
    auto sg = ops::stop_gradient(x);
    EXPECT_EQ(sg.value(), x.value());
    t.backward(ops::sum(sg));
    for (double g : s.grad("x").values()) EXPECT_EQ(g, 0.0);
  }
  s.zero_grad();
  {
    Tape<D> t;
    auto x = t.parameter(s, "x");
    t.backward(ops::sum(ops::mul(x, ops::stop_gradient(x))));
    EXPECT_EQ(s.grad("x"), s.value("x"));  // x, not 2x
  }
}

TEST(Elementwise, ReluAddLayerNorm) {
  Tape<D> t;
  EXPECT_EQ(ops::relu(t.constant(md({{-1, 2}}))).value(), md({{0, 2}}));
  auto x = random_matrix<D>(3, 4, 8);
  EXPECT_EQ(ops::add(t.constant(x), t.constant(Tensor<D>::matrix(3, 4))).value(), x);
  auto ln = ops::layer_norm(t.constant(md({{2, 2, 2, 2}, {-7, -7, -7, -7}}))).value();
  for (double v : ln.values()) EXPECT_EQ(v, 0.0);
  EXPECT_THROW(ops::add(t.constant(Tensor<D>::matrix(2, 2)), t.constant(Tensor<D>::matrix(2, 3))), ContractError);
}

TEST(BatchNorm, ConstantColumnAndPlusMinusOne) {
  Tape<D> t;
  ops::BatchStats<D> st;
  auto n = ops::batch_norm_normalize(t.constant(md({{4, -1}, {4, 1}})), {true, true}, 1e-5, &st).value();
  EXPECT_EQ(n(0, 0), 0.0);
  EXPECT_EQ(n(1, 0), 0.0);
  // 1/√(1+1e-5) evaluated at 30 digits.
  EXPECT_NEAR(n(0, 1), -0.999995000037499687502734350391, 1e-15);
  EXPECT_NEAR(n(1, 1), 0.999995000037499687502734350391, 1e-15);
  EXPECT_DOUBLE_EQ(st.var[1], 1.0);
  EXPECT_DOUBLE_EQ(st.mean[0], 4.0);
}

TEST(BatchNorm, MaskedRowsIgnored) {
  Tape<D> t;
  ops::BatchStats<D> st;
  auto n = ops::batch_norm_normalize(t.constant(md({{-1}, {1}, {100}})), {true, true, false}, 1e-5, &st).value();
  EXPECT_EQ(st.count, 2u);
  EXPECT_DOUBLE_EQ(st.mean[0], 0.0);
  EXPECT_EQ(n(2, 0), 0.0);
}

TEST(Attention, MaskedKeysGetZeroWeight) {
  Tape<D> t;
  auto q = t.constant(random_matrix<D>(5, 4, 11));
  auto k = t.constant(random_matrix<D>(5, 4, 12));
  auto v = t.constant(random_matrix<D>(5, 4, 13));
  Tensor<D> w;
  ops::attention(q, k, v, 2, {true, true, true, false, false}, &w);
  ASSERT_EQ(w.dims(), (std::vector<std::size_t>{2, 5, 5}));
  for (std::size_t h = 0; h < 2; ++h)
    for (std::size_t i = 0; i < 5; ++i) {
      double s = 0;
      for (std::size_t j = 0; j < 5; ++j) {
        const double p = w[(h * 5 + i) * 5 + j];
        if (j >= 3) {
          EXPECT_EQ(p, 0.0);
        }
        s += p;
      }
      EXPECT_NEAR(s, 1.0, 1e-6);
    }
  EXPECT_THROW(ops::attention(q, k, v, 2, {false, false, false, false, false}), ContractError);
}

// ---- gradients --------------------------------------------------------------

TEST(Backward, ConstantHasZeroGradientAndLossMustBeScalar) {
  ParameterStore<D> s;
  s.add("w", md({{1, 2}}));
  Tape<D> t;
  t.parameter(s, "w");
  auto c = t.constant(md({{3}}));
  t.backward(ops::scale(c, 2.0));
  for (double g : s.grad("w").values()) EXPECT_EQ(g, 0.0);
  EXPECT_THROW(t.backward(t.constant(md({{1, 2}}))), ContractError);
}

TEST(Backward, TwoCallsAccumulate) {
  ParameterStore<D> s;
  s.add("w", random_matrix<D>(3, 2, 21));
  Tape<D> t;
  auto x = t.constant(random_matrix<D>(4, 3, 22));
  auto loss = ops::sum(ops::square(ops::matmul(x, t.parameter(s, "w"))));
  t.backward(loss);
  const auto once = s.grad("w");
  t.backward(loss);
  for (std::size_t i = 0; i < once.size(); ++i) EXPECT_DOUBLE_EQ(s.grad("w")[i], 2 * once[i]);
}

TEST(Backward, VisitsEachOperationOnce) {
  ParameterStore<D> s;
  s.add("w", md({{1, 2}}));
  Tape<D> t;
  auto w = t.parameter(s, "w");
  auto a = ops::relu(w);                 // 1
  auto b = ops::add(a, w);               // 2
  auto loss = ops::sum(ops::mul(b, a));  // 3, 4
  EXPECT_EQ(t.backward(loss), 4u);
}

TEST(Backward, LinearMapMatchesOuterProduct) {
  // d(sum(W·x))/dW[i][j] = x[j] for every row i; also via h=1e-4 differences.
  ParameterStore<D> s;
  s.add("W", random_matrix<D>(2, 3, 31));
  const auto x = random_matrix<D>(3, 1, 32);
  LossBuilder<D> f = [&](Tape<D>& t, ParameterStore<D>& st) {
    return ops::sum(ops::matmul(t.parameter(st, "W"), t.constant(x)));
  };
  GradCheckOptions opt;
  opt.step = 1e-4;
  opt.tolerance = 1e-8;
  auto rep = grad_check(s, f, opt);
  EXPECT_TRUE(rep.passed()) << rep.summary();
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t j = 0; j < 3; ++j) EXPECT_DOUBLE_EQ(s.grad("W")(i, j), x[j]);
}

TEST(GradCheck, Quadratic) {
  ParameterStore<D> s;
  s.add("w", md({{3}}));
  LossBuilder<D> f = [](Tape<D>& t, ParameterStore<D>& st) {
    auto w = t.parameter(st, "w");
    return ops::sum(ops::mul(w, w));
  };
  GradCheckOptions opt;
  opt.tolerance = 1e-8;
  auto rep = grad_check(s, f, opt);
  ASSERT_TRUE(rep.passed()) << rep.summary();
  EXPECT_NEAR(rep.entries[0].analytic, 6.0, 1e-12);
  EXPECT_NEAR(rep.entries[0].numeric, 6.0, 1e-8);
}

TEST(GradCheck, StopGradientBranchIsZeroBothWays) {
  ParameterStore<D> s;
  s.add("x", random_matrix<D>(2, 3, 41));
  LossBuilder<D> f = [](Tape<D>& t, ParameterStore<D>& st) {
    return ops::sum(ops::square(ops::stop_gradient(t.parameter(st, "x"))));
  };
  auto rep = grad_check(s, f, {});
  ASSERT_TRUE(rep.passed());
  for (const auto& e : rep.entries) {
    EXPECT_EQ(e.analytic, 0.0);
    EXPECT_EQ(e.numeric, 0.0);
  }
}

TEST(GradCheck, DetachedFactorHeldFixed) {
  // d/dx [x · sg(x)] = sg(x): the numeric pass must see sg(x) as a constant.
  ParameterStore<D> s;
  s.add("x", random_matrix<D>(2, 3, 42));
  LossBuilder<D> f = [](Tape<D>& t, ParameterStore<D>& st) {
    auto x = t.parameter(st, "x");
    return ops::sum(ops::mul(x, ops::stop_gradient(x)));
  };
  auto rep = grad_check(s, f, {});
  EXPECT_TRUE(rep.passed()) << rep.summary();
  for (const auto& e : rep.entries) EXPECT_NEAR(e.numeric, s.value("x")[e.index], 1e-8);
}

TEST(GradCheck, ReportsWorstOffender) {
  // A deliberately wrong pullback must be caught and named.
  ParameterStore<D> s;
  s.add("x", md({{1, 2}}));
  LossBuilder<D> f = [](Tape<D>& t, ParameterStore<D>& st) {
    auto x = t.parameter(st, "x");
    Tensor<D> v = x.value();
    for (auto& e : v.values()) e = e * e;
    auto bad = t.record(v, true, [x](Tape<D>& tp, std::size_t self) {
      auto& g = tp.accumulate(x.id);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += tp.grad(self)[i];  // should be 2x·g
    });
    return ops::sum(bad);
  };
  auto rep = grad_check(s, f, {});
  EXPECT_FALSE(rep.passed());
  EXPECT_EQ(rep.entries.front().name, "x");
  EXPECT_EQ(rep.entries.front().index, 1u);
}

// Every differentiable op against fp64 central differences at 1e-6.
TEST(GradCheck, AllOpsDouble) {
  const auto x = random_matrix<D>(3, 4, 51, -2, 2);
  const auto r = random_matrix<D>(1, 4, 52);
  const auto other = random_matrix<D>(3, 4, 53);
  const auto pos = random_matrix<D>(3, 4, 54, 0.5, 2);
  std::vector<std::pair<const char*, std::function<Var<D>(Var<D>)>>> cases = {
      {"matmul", [&](Var<D> v) { return weighted(ops::matmul(v, v.tape->constant(random_matrix<D>(4, 2, 60)))); }},
      {"matmul_rhs", [&](Var<D> v) { return weighted(ops::matmul(v.tape->constant(random_matrix<D>(2, 3, 61)), v)); }},
      {"transpose", [&](Var<D> v) { return weighted(ops::transpose(v)); }},
      {"add", [&](Var<D> v) { return weighted(ops::add(v, v.tape->constant(other))); }},
      {"sub", [&](Var<D> v) { return weighted(ops::sub(v.tape->constant(other), v)); }},
      {"mul", [&](Var<D> v) { return weighted(ops::mul(v, v)); }},
      {"div", [&](Var<D> v) { return weighted(ops::div(v.tape->constant(other), ops::add_scalar(ops::square(v), 1.0))); }},
      {"add_row", [&](Var<D> v) { return weighted(ops::add_row(v.tape->constant(other), ops::gather_rows(v, {0}))); }},
      {"mul_row", [&](Var<D> v) { return weighted(ops::mul_row(v, v.tape->constant(r))); }},
      {"mul_row_rhs", [&](Var<D> v) { return weighted(ops::mul_row(v.tape->constant(other), ops::gather_rows(v, {1}))); }},
      {"scale", [&](Var<D> v) { return weighted(ops::scale(v, -2.5)); }},
      {"relu", [&](Var<D> v) { return weighted(ops::relu(v)); }},
      {"abs", [&](Var<D> v) { return weighted(ops::abs(v)); }},
      {"square", [&](Var<D> v) { return weighted(ops::square(v)); }},
      {"clamp_min", [&](Var<D> v) { return weighted(ops::clamp_min(v, 0.1)); }},
      {"mean", [&](Var<D> v) { return ops::mean(ops::square(v)); }},
      {"gather_rows", [&](Var<D> v) { return weighted(ops::gather_rows(v, {2, 0, 2})); }},
      {"mask_rows", [&](Var<D> v) { return weighted(ops::mask_rows(v, {true, false, true})); }},
      {"concat_cols", [&](Var<D> v) { return weighted(ops::concat_cols<D>({v, ops::square(v)})); }},
      {"layer_norm", [&](Var<D> v) { return weighted(ops::layer_norm(v)); }},
      {"batch_norm", [&](Var<D> v) { return weighted(ops::batch_norm_normalize(v, {true, true, true}, 1e-5)); }},
      {"batch_norm_masked", [&](Var<D> v) { return weighted(ops::batch_norm_normalize(v, {true, false, true}, 1e-5)); }},
      {"softmax", [&](Var<D> v) { return weighted(ops::softmax_rows(v)); }},
      {"cosine_matrix", [&](Var<D> v) { return weighted(ops::cosine_matrix(v, v.tape->constant(other))); }},
      {"cosine_matrix_self", [&](Var<D> v) { return weighted(ops::cosine_matrix(v, ops::gather_rows(v, {1, 2}))); }},
      {"cosine_rows", [&](Var<D> v) { return weighted(ops::cosine_rows(v, ops::square(v))); }},
      {"linear", [&](Var<D> v) {
         return weighted(ops::linear(v, v.tape->constant(random_matrix<D>(4, 5, 62)), v.tape->constant(random_matrix<D>(1, 5, 63))));
       }},
      {"attention_self", [&](Var<D> v) { return weighted(ops::attention(v, v, v, 2, {true, true, true})); }},
      {"attention_masked", [&](Var<D> v) {
         return weighted(ops::attention(v, ops::square(v), ops::scale(v, 0.5), 2, {true, false, true}));
       }},
  };
  for (const auto& [name, f] : cases) {
    auto rep = check_unary(name == std::string("div") ? x : (name == std::string("clamp_min") ? pos : x), f);
    EXPECT_TRUE(rep.passed()) << name << ": " << rep.summary();
  }
}

TEST(GradCheck, LinearAndAttentionParametersDouble) {
  ParameterStore<D> s;
  s.add("w", random_matrix<D>(4, 3, 71));
  s.add("b", random_matrix<D>(1, 3, 72));
  s.add("kv", random_matrix<D>(5, 4, 73));
  const auto x = random_matrix<D>(3, 4, 74);
  LossBuilder<D> f = [&](Tape<D>& t, ParameterStore<D>& st) {
    auto q = t.constant(x);
    auto kv = t.parameter(st, "kv");
    auto a = ops::attention(q, kv, ops::square(kv), 2, {true, true, false, true, true});
    return weighted(ops::linear(a, t.parameter(st, "w"), t.parameter(st, "b")));
  };
  auto rep = grad_check(s, f, {});
  EXPECT_TRUE(rep.passed()) << rep.summary();
}

// ---- optimizer --------------------------------------------------------------

TEST(Adam, ZeroGradientLeavesParameters) {
  ParameterStore<D> s;
  s.add("w", md({{1, -2}}));
  adam_step(s, 0.1);
  EXPECT_EQ(s.value("w"), md({{1, -2}}));
  EXPECT_EQ(s.step(), 1u);
}

TEST(Adam, FirstAndSecondStepOracle) {
  // Reference values from the Adam recurrence evaluated at 30 digits.
  ParameterStore<D> s;
  s.add("w", md({{0}}));
  s.grad("w")[0] = 1;
  adam_step(s, 1e-3);
  EXPECT_NEAR(s.value("w")[0], -0.000999999990000000099999999, 1e-12);
  EXPECT_EQ(s.grad("w")[0], 0.0);  // zeroed after the step
  s.grad("w")[0] = 1;
  adam_step(s, 1e-3);
  EXPECT_NEAR(s.value("w")[0], -0.00199999998000000019999999799999, 1e-12);
  EXPECT_EQ(s.step(), 2u);
}

TEST(Adam, StateBuffersUntouched) {
  ParameterStore<D> s;
  s.add("state/x", md({{5}}), false);
  s.grad("state/x")[0] = 3;
  adam_step(s, 1.0);
  EXPECT_EQ(s.value("state/x")[0], 5.0);
}

TEST(LrSchedule, StepDecay) {
  EXPECT_DOUBLE_EQ(lr_schedule(0, 3e-3), 3e-3);
  EXPECT_DOUBLE_EQ(lr_schedule(49, 3e-3), 3e-3);
  EXPECT_DOUBLE_EQ(lr_schedule(50, 3e-3), 1.5e-3);
  EXPECT_DOUBLE_EQ(lr_schedule(149, 3e-3), 7.5e-4);
  EXPECT_DOUBLE_EQ(lr_schedule(150, 3e-3), 3.75e-4);
  EXPECT_DOUBLE_EQ(lr_schedule(400, 3e-3), 3.75e-4);
}

// ---- container and checkpoint ---------------------------------------------------

TEST(Container, RoundTripIsBitExact) {
  std::vector<container::NamedTensor> ts = {{"a", random_matrix(5, 3, 81)},
                                            {"b/c", Tensor<float>({2, 3, 4}, 0.25f)},
                                            {"v", Tensor<float>({3}, std::vector<float>{1.f, -0.f, 3.5e-38f})}};
  const auto bytes = container::encode(ts);
  const auto back = container::decode(bytes);
  ASSERT_EQ(back.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(back[i].first, ts[i].first);
    EXPECT_EQ(back[i].second.dims(), ts[i].second.dims());
    EXPECT_EQ(std::memcmp(back[i].second.data(), ts[i].second.data(), ts[i].second.size() * 4), 0);
  }
  EXPECT_EQ(container::encode(back), bytes);
}

TEST(Container, HeaderLayout) {
  const auto bytes = container::encode({{"ab", Tensor<float>({1}, std::vector<float>{1.0f})}});
  const std::vector<std::uint8_t> expect = {'M', 'A', 'S', 'A', 1, 0, 1, 0, 0, 0, 2, 0, 'a', 'b',
                                            1,   1,   0,   0,   0, 0, 0, 0x80, 0x3f};
  EXPECT_EQ(bytes, expect);
}

TEST(Container, CorruptionIsPositioned) {
  auto bytes = container::encode({{"x", random_matrix(2, 2, 91)}});
  auto expect_offset = [](const std::vector<std::uint8_t>& b, std::size_t off) {
    try {
      container::decode(b);
      ADD_FAILURE() << "decode accepted corrupted bytes";
    } catch (const FormatError& e) {
      EXPECT_EQ(e.offset(), off) << e.what();
    }
  };
  auto bad = bytes;
  bad[2] = 'X';
  expect_offset(bad, 2);
  bad = bytes;
  bad[4] = 7;
  expect_offset(bad, 4);
  bad = bytes;
  bad.resize(bytes.size() - 3);  // truncated payload
  expect_offset(bad, 22);
  bad = bytes;
  bad.push_back(0);
  expect_offset(bad, bytes.size());
  bad = bytes;
  bad[14] = 0;  // first dim zero
  expect_offset(bad, 14);
  bad = bytes;
  bad[21] = 0x7f;  // second dim far beyond the payload
  expect_offset(bad, 18);
}

TEST(Checkpoint, RoundTripWithOptimizerState) {
  ParameterStore<float> s;
  s.add("w", random_matrix(3, 2, 101));
  s.add("state/bn/mean", random_matrix(1, 2, 102), false);
  s.grad("w").fill(0.5f);
  for (int i = 0; i < 3; ++i) {
    s.grad("w").fill(0.5f * static_cast<float>(i + 1));
    adam_step(s, 1e-2);
  }
  s.set_step((1ull << 30) + 12345);
  const auto dir = masa::testing::scratch_dir("ckpt");
  const auto path = (dir / "c.masa").string();
  checkpoint::save(path, s, {{"meta/x", Tensor<float>({1}, 7.f)}});
  auto l = checkpoint::load(path);
  EXPECT_EQ(l.store, s);
  ASSERT_EQ(l.meta.size(), 1u);
  EXPECT_EQ(l.meta[0].first, "meta/x");
  EXPECT_EQ(container::encode(checkpoint::to_tensors(l.store, l.meta)),
            container::encode(checkpoint::to_tensors(s, {{"meta/x", Tensor<float>({1}, 7.f)}})));
}
