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

// Evaluation suite over frozen frame embeddings: phase classification and
// action recognition linear probes, phase progress regression, Kendall's
// tau of nearest-neighbour alignments, frame retrieval AP@K, and a collapse
// indicator. Only embeddings and labels are consumed.

#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "masa/data/sequence.hpp"
#include "masa/diffcore/container.hpp"
#include "masa/errors.hpp"

namespace masa::metrics {

enum class Pooling { kMean, kConcat };

struct ProbeConfig {
  std::vector<double> label_fractions = {0.10, 0.50, 1.00};
  std::size_t probe_epochs = 500;
  double probe_lr = 0.1;
  double ridge = 1e-3;
  std::vector<std::size_t> ks = {5, 10, 15};
  double train_fraction = 0.7;
  std::size_t action_frames = 16;
  Pooling pooling = Pooling::kMean;
  std::uint64_t seed = 0;

  void validate() const {
    for (double f : label_fractions)
      if (!(f > 0.0 && f <= 1.0)) throw ConfigError("metrics: label fractions must lie in (0,1]");
    if (probe_epochs < 1 || !(probe_lr > 0)) throw ConfigError("metrics: probe epochs and lr must be positive");
    if (!(ridge >= 0)) throw ConfigError("metrics: ridge strength must be >= 0");
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw ConfigError("metrics: train_fraction must be in (0,1)");
    if (action_frames < 1) throw ConfigError("metrics: action_frames must be >= 1");
    for (std::size_t k : ks)
      if (k < 1) throw ConfigError("metrics: retrieval K must be >= 1");
  }
};

/// One sequence's exported embedding with its evaluation labels.
struct EvalSequence {
  std::string id;
  Matrix embedding;  // T×d
  int activity = -1;
  std::vector<int> phases;
};

struct MetricsReport {
  std::map<double, double> phase_accuracy;  // label fraction -> accuracy
  double progress_r2 = 0;
  double kendall_tau = 0;
  std::map<std::size_t, double> ap_at_k;
  double action_accuracy = 0;
  double collapse_indicator = 0;
  std::vector<std::string> warnings;

  std::string to_key_value() const {
    std::ostringstream os;
    os.precision(9);
    for (const auto& [f, a] : phase_accuracy) os << "phase_accuracy@" << f << '=' << a << '\n';
    os << "progress_r2=" << progress_r2 << '\n';
    os << "kendall_tau=" << kendall_tau << '\n';
    for (const auto& [k, v] : ap_at_k) os << "ap@" << k << '=' << v << '\n';
    os << "action_accuracy=" << action_accuracy << '\n';
    os << "collapse_indicator=" << collapse_indicator << '\n';
    return os.str();
  }

  nlohmann::json to_json() const {
    nlohmann::json j;
    for (const auto& [f, a] : phase_accuracy) {
      std::ostringstream key;
      key << f;
      j["phase_accuracy"][key.str()] = a;
    }
    j["progress_r2"] = progress_r2;
    j["kendall_tau"] = kendall_tau;
    for (const auto& [k, v] : ap_at_k) j["ap_at_k"][std::to_string(k)] = v;
    j["action_accuracy"] = action_accuracy;
    j["collapse_indicator"] = collapse_indicator;
    j["warnings"] = warnings;
    return j;
  }
};

// ---- shared helpers -------------------------------------------------------

namespace detail {

inline Eigen::MatrixXd to_eigen(const Matrix& m) {
  Eigen::MatrixXd out(m.rows(), m.cols());
  for (std::size_t r = 0; r < m.rows(); ++r)
    for (std::size_t c = 0; c < m.cols(); ++c) out(r, c) = m(r, c);
  return out;
}

inline void normalize_rows(Eigen::MatrixXd& x) {
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const double n = x.row(r).norm();
    if (n > 0) x.row(r) /= n;
  }
}

inline Eigen::MatrixXd unit_rows(const Matrix& m) {
  Eigen::MatrixXd x = to_eigen(m);
  normalize_rows(x);
  return x;
}

}  // namespace detail

/// Sequence indices split into probe-training and evaluation sets.
struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> eval;
};

/// Per-activity stratified split by sequence. Every group with at least two
/// sequences contributes to both sides.
inline Split split_by_sequence(const std::vector<int>& activities, double train_fraction, std::uint64_t seed) {
  std::map<int, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < activities.size(); ++i) groups[activities[i]].push_back(i);
  std::mt19937_64 rng(seed);
  Split out;
  for (auto& [activity, idx] : groups) {
    std::shuffle(idx.begin(), idx.end(), rng);
    std::size_t n_train = static_cast<std::size_t>(std::lround(train_fraction * static_cast<double>(idx.size())));
    if (idx.size() >= 2) n_train = std::clamp<std::size_t>(n_train, 1, idx.size() - 1);
    for (std::size_t i = 0; i < idx.size(); ++i) (i < n_train ? out.train : out.eval).push_back(idx[i]);
  }
  std::sort(out.train.begin(), out.train.end());
  std::sort(out.eval.begin(), out.eval.end());
  return out;
}

// ---- linear probes ----------------------------------------------------------

/// Multinomial logistic regression with a bias, fitted by full-batch
/// gradient descent on the mean cross-entropy from zero weights.
class SoftmaxProbe {
 public:
  void fit(const Eigen::MatrixXd& x, const std::vector<int>& y, std::size_t classes, std::size_t epochs, double lr) {
    const Eigen::Index n = x.rows(), d = x.cols();
    classes_ = classes;
    mu_ = x.colwise().mean();
    sd_ = ((x.rowwise() - mu_).array().square().colwise().mean()).sqrt();
    for (Eigen::Index c = 0; c < d; ++c)
      if (!(sd_(c) > 1e-12)) sd_(c) = 1.0;
    w_ = Eigen::MatrixXd::Zero(d + 1, static_cast<Eigen::Index>(classes));
    const Eigen::MatrixXd xb = design(x);
    Eigen::MatrixXd onehot = Eigen::MatrixXd::Zero(n, static_cast<Eigen::Index>(classes));
    for (Eigen::Index i = 0; i < n; ++i) onehot(i, y[i]) = 1.0;
    for (std::size_t e = 0; e < epochs; ++e) {
      Eigen::MatrixXd p = softmax(xb * w_);
      w_ -= lr * (xb.transpose() * (p - onehot)) / static_cast<double>(n);
    }
  }

  std::vector<int> predict(const Eigen::MatrixXd& x) const {
    const Eigen::MatrixXd logits = design(x) * w_;
    std::vector<int> out(x.rows());
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      Eigen::Index best;
      logits.row(i).maxCoeff(&best);
      out[i] = static_cast<int>(best);
    }
    return out;
  }

 private:
  // Columns standardized with the training statistics, then a bias column.
  // This is an affine reparameterization, so the hypothesis class is still
  // linear in the input; it only conditions gradient descent.
  Eigen::MatrixXd design(const Eigen::MatrixXd& x) const {
    Eigen::MatrixXd xb(x.rows(), x.cols() + 1);
    xb << ((x.rowwise() - mu_).array().rowwise() / sd_.array()).matrix(), Eigen::VectorXd::Ones(x.rows());
    return xb;
  }

  static Eigen::MatrixXd softmax(Eigen::MatrixXd z) {
    for (Eigen::Index i = 0; i < z.rows(); ++i) {
      z.row(i).array() -= z.row(i).maxCoeff();
      z.row(i) = z.row(i).array().exp().matrix();
      z.row(i) /= z.row(i).sum();
    }
    return z;
  }

  std::size_t classes_ = 0;
  Eigen::RowVectorXd mu_, sd_;
  Eigen::MatrixXd w_;
};

inline double accuracy(const std::vector<int>& pred, const std::vector<int>& truth) {
  if (truth.empty()) return 0.0;
  std::size_t hit = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) hit += pred[i] == truth[i];
  return static_cast<double>(hit) / static_cast<double>(truth.size());
}

/// Per-frame phase probe within one label space. Training frames are the
/// given fraction of all frames of the training sequences, sampled without
/// replacement; evaluation uses every frame of the evaluation sequences.
inline double phase_classification(const std::vector<EvalSequence>& seqs, const Split& split, double fraction,
                                   const ProbeConfig& cfg, std::vector<std::string>* warnings = nullptr) {
  if (!(fraction > 0.0 && fraction <= 1.0)) throw ContractError("phase_classification: fraction must be in (0,1]");
  std::vector<std::pair<std::size_t, std::size_t>> train_frames;
  int classes = 0;
  for (const auto& s : seqs) {
    if (s.phases.size() != s.embedding.rows())
      throw ContractError("phase_classification: sequence '" + s.id + "' has " + std::to_string(s.phases.size()) +
                          " labels for " + std::to_string(s.embedding.rows()) + " frames");
    for (int p : s.phases) {
      if (p < 0) throw ContractError("phase_classification: negative phase label in '" + s.id + "'");
      classes = std::max(classes, p + 1);
    }
  }
  for (std::size_t i : split.train)
    for (std::size_t t = 0; t < seqs[i].embedding.rows(); ++t) train_frames.emplace_back(i, t);
  if (train_frames.empty() || split.eval.empty()) throw ContractError("phase_classification: empty split");
  if (fraction < 1.0) {
    std::mt19937_64 rng(cfg.seed + 1);
    std::shuffle(train_frames.begin(), train_frames.end(), rng);
    train_frames.resize(std::max<std::size_t>(
        1, static_cast<std::size_t>(std::lround(fraction * static_cast<double>(train_frames.size())))));
    std::sort(train_frames.begin(), train_frames.end());
  }
  const std::size_t d = seqs.front().embedding.cols();
  Eigen::MatrixXd x(train_frames.size(), d);
  std::vector<int> y;
  std::vector<bool> seen(classes, false);
  for (std::size_t r = 0; r < train_frames.size(); ++r) {
    const auto& [i, t] = train_frames[r];
    for (std::size_t c = 0; c < d; ++c) x(r, c) = seqs[i].embedding(t, c);
    y.push_back(seqs[i].phases[t]);
    seen[y.back()] = true;
  }
  detail::normalize_rows(x);
  if (warnings)
    for (int c = 0; c < classes; ++c)
      if (!seen[c])
        warnings->push_back("phase class " + std::to_string(c) + " absent from probe training data (fraction " +
                            std::to_string(fraction) + ")");
  SoftmaxProbe probe;
  probe.fit(x, y, static_cast<std::size_t>(classes), cfg.probe_epochs, cfg.probe_lr);
  std::vector<int> pred, truth;
  for (std::size_t i : split.eval) {
    const auto p = probe.predict(detail::unit_rows(seqs[i].embedding));
    pred.insert(pred.end(), p.begin(), p.end());
    truth.insert(truth.end(), seqs[i].phases.begin(), seqs[i].phases.end());
  }
  return accuracy(pred, truth);
}

/// Normalized frame index t/(T−1) of every frame.
inline std::vector<double> progress_targets(std::size_t length) {
  std::vector<double> out(length, 0.0);
  for (std::size_t t = 0; t < length && length > 1; ++t)
    out[t] = static_cast<double>(t) / static_cast<double>(length - 1);
  return out;
}

/// Ridge regression with intercept on column-standardized embeddings; R² of
/// the evaluation frames, floored at 0. Constant columns are dropped.
inline double phase_progress(const std::vector<EvalSequence>& seqs, const Split& split, const ProbeConfig& cfg) {
  auto stack = [&](const std::vector<std::size_t>& idx, Eigen::MatrixXd& x, Eigen::VectorXd& y) {
    std::size_t n = 0;
    for (std::size_t i : idx) n += seqs[i].embedding.rows();
    const std::size_t d = seqs.front().embedding.cols();
    x.resize(n, d);
    y.resize(n);
    std::size_t r = 0;
    for (std::size_t i : idx) {
      const auto target = progress_targets(seqs[i].embedding.rows());
      for (std::size_t t = 0; t < target.size(); ++t, ++r) {
        for (std::size_t c = 0; c < d; ++c) x(r, c) = seqs[i].embedding(t, c);
        y(r) = target[t];
      }
    }
  };
  Eigen::MatrixXd xt, xe;
  Eigen::VectorXd yt, ye;
  stack(split.train, xt, yt);
  stack(split.eval, xe, ye);
  if (xt.rows() < 2 || xe.rows() < 1) throw ContractError("phase_progress: empty split");
  const double y_mean = yt.mean();
  if ((yt.array() - y_mean).abs().maxCoeff() == 0.0) throw ContractError("phase_progress: constant targets");

  const Eigen::RowVectorXd mu = xt.colwise().mean();
  Eigen::RowVectorXd sd = ((xt.rowwise() - mu).array().square().colwise().mean()).sqrt();
  const double scale = sd.maxCoeff();
  for (Eigen::Index c = 0; c < sd.size(); ++c)
    if (!(sd(c) > 1e-12 * std::max(scale, 1e-300))) sd(c) = 0.0;
  auto standardize = [&](const Eigen::MatrixXd& x) {
    Eigen::MatrixXd z = x.rowwise() - mu;
    for (Eigen::Index c = 0; c < z.cols(); ++c) z.col(c) = sd(c) > 0 ? Eigen::VectorXd(z.col(c) / sd(c))
                                                                       : Eigen::VectorXd::Zero(z.rows());
    return z;
  };
  const Eigen::MatrixXd zt = standardize(xt), ze = standardize(xe);
  Eigen::MatrixXd a = zt.transpose() * zt;
  a.diagonal().array() += cfg.ridge * static_cast<double>(zt.rows());
  const Eigen::VectorXd w = a.ldlt().solve(zt.transpose() * (yt.array() - y_mean).matrix());
  const Eigen::VectorXd pred = (ze * w).array() + y_mean;
  const double ss_res = (ye - pred).squaredNorm();
  const double ss_tot = (ye.array() - ye.mean()).square().sum();
  if (ss_tot == 0.0) throw ContractError("phase_progress: constant evaluation targets");
  return std::max(0.0, 1.0 - ss_res / ss_tot);
}

// ---- alignment ------------------------------------------------------------

/// Nearest neighbour in b (cosine) of every row of a; ties go to the
/// smaller index.
inline std::vector<std::size_t> nearest_neighbors(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols()) throw ContractError("nearest_neighbors: embedding widths differ");
  const Eigen::MatrixXd ua = detail::unit_rows(a), ub = detail::unit_rows(b);
  const Eigen::MatrixXd sim = ua * ub.transpose();
  std::vector<std::size_t> out(a.rows());
  for (Eigen::Index i = 0; i < sim.rows(); ++i) {
    Eigen::Index best = 0;
    for (Eigen::Index k = 1; k < sim.cols(); ++k)
      if (sim(i, k) > sim(i, best)) best = k;
    out[i] = static_cast<std::size_t>(best);
  }
  return out;
}

/// (concordant − discordant) / (n(n−1)/2) over pairs i<j, where a pair is
/// concordant when n(i) < n(j). Equal assignments count as discordant.
inline double kendall_tau_from_assignment(const std::vector<std::size_t>& nn) {
  const std::size_t n = nn.size();
  if (n < 2) throw ContractError("kendall_tau: need at least 2 frames");
  long long score = 0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) score += nn[i] < nn[j] ? 1 : -1;
  return static_cast<double>(score) / (static_cast<double>(n) * static_cast<double>(n - 1) / 2.0);
}

/// Mean of the A→B and B→A nearest-neighbour taus.
inline double kendall_tau(const Matrix& a, const Matrix& b) {
  if (a.rows() < 2 || b.rows() < 2) throw ContractError("kendall_tau: both sequences need at least 2 frames");
  return 0.5 * (kendall_tau_from_assignment(nearest_neighbors(a, b)) +
                kendall_tau_from_assignment(nearest_neighbors(b, a)));
}

/// Mean tau over all unordered pairs of the given sequences that share an
/// activity.
inline double mean_pairwise_tau(const std::vector<EvalSequence>& seqs, const std::vector<std::size_t>& idx) {
  double total = 0;
  std::size_t pairs = 0;
  for (std::size_t x = 0; x < idx.size(); ++x)
    for (std::size_t y = x + 1; y < idx.size(); ++y) {
      const auto& a = seqs[idx[x]];
      const auto& b = seqs[idx[y]];
      if (a.activity != b.activity) continue;
      total += kendall_tau(a.embedding, b.embedding);
      ++pairs;
    }
  return pairs ? total / static_cast<double>(pairs) : 0.0;
}

// ---- retrieval ------------------------------------------------------------

struct RetrievalResult {
  std::map<std::size_t, double> ap;
  bool truncated = false;  // some query had fewer than K candidates
};

/// For every frame, its K nearest cosine neighbours among frames of other
/// videos of the same activity (any other video when the activity is
/// unknown); the score is the fraction sharing the query's phase label.
inline RetrievalResult frame_retrieval_ap(const std::vector<EvalSequence>& seqs, const std::vector<std::size_t>& ks) {
  if (seqs.size() < 2) throw ContractError("frame_retrieval_ap: need at least 2 videos");
  std::vector<Eigen::MatrixXd> unit;
  for (const auto& s : seqs) {
    if (s.phases.size() != s.embedding.rows())
      throw ContractError("frame_retrieval_ap: label count differs from frame count for '" + s.id + "'");
    unit.push_back(detail::unit_rows(s.embedding));
  }
  const std::size_t kmax = *std::max_element(ks.begin(), ks.end());
  RetrievalResult out;
  std::map<std::size_t, double> sum;
  std::size_t queries = 0;
  struct Hit {
    double sim;
    std::size_t order;
    int label;
  };
  std::vector<Hit> hits;
  for (std::size_t q = 0; q < seqs.size(); ++q) {
    for (std::size_t t = 0; t < seqs[q].embedding.rows(); ++t) {
      hits.clear();
      std::size_t order = 0;
      for (std::size_t v = 0; v < seqs.size(); ++v) {
        const bool comparable = seqs[q].activity < 0 || seqs[v].activity == seqs[q].activity;
        if (v == q || !comparable) {
          order += seqs[v].embedding.rows();
          continue;
        }
        const Eigen::VectorXd s = unit[v] * unit[q].row(t).transpose();
        for (Eigen::Index r = 0; r < s.size(); ++r) hits.push_back({s(r), order++, seqs[v].phases[r]});
      }
      if (hits.empty()) continue;
      const std::size_t take = std::min(kmax, hits.size());
      if (take < kmax) out.truncated = true;
      std::partial_sort(hits.begin(), hits.begin() + static_cast<std::ptrdiff_t>(take), hits.end(),
                        [](const Hit& a, const Hit& b) { return a.sim != b.sim ? a.sim > b.sim : a.order < b.order; });
      for (std::size_t k : ks) {
        const std::size_t kk = std::min(k, hits.size());
        std::size_t same = 0;
        for (std::size_t i = 0; i < kk; ++i) same += hits[i].label == seqs[q].phases[t];
        sum[k] += static_cast<double>(same) / static_cast<double>(kk);
      }
      ++queries;
    }
  }
  for (std::size_t k : ks) out.ap[k] = queries ? sum[k] / static_cast<double>(queries) : 0.0;
  return out;
}

// ---- clip level -------------------------------------------------------------

/// Indices of `count` frames spread uniformly over [0, T−1]; repeats when
/// T < count.
inline std::vector<std::size_t> uniform_frames(std::size_t length, std::size_t count) {
  std::vector<std::size_t> out(count, 0);
  for (std::size_t i = 0; i < count && count > 1; ++i)
    out[i] = static_cast<std::size_t>(
        std::lround(static_cast<double>(i) * static_cast<double>(length - 1) / static_cast<double>(count - 1)));
  return out;
}

inline Eigen::VectorXd clip_descriptor(const Matrix& emb, std::size_t frames, Pooling pooling) {
  const Eigen::MatrixXd u = detail::to_eigen(emb);
  const auto idx = uniform_frames(emb.rows(), frames);
  if (pooling == Pooling::kMean) {
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(u.cols());
    for (std::size_t i : idx) acc += u.row(static_cast<Eigen::Index>(i)).transpose();
    return acc / static_cast<double>(idx.size());
  }
  Eigen::VectorXd out(u.cols() * static_cast<Eigen::Index>(idx.size()));
  for (std::size_t j = 0; j < idx.size(); ++j)
    out.segment(static_cast<Eigen::Index>(j) * u.cols(), u.cols()) = u.row(static_cast<Eigen::Index>(idx[j])).transpose();
  return out;
}

/// Clip-level activity probe: pooled descriptors of uniformly sampled
/// frames, softmax regression on the training clips, accuracy on the rest.
inline double action_recognition(const std::vector<EvalSequence>& seqs, const Split& split, const ProbeConfig& cfg,
                                 std::vector<std::string>* warnings = nullptr) {
  if (split.train.empty() || split.eval.empty()) throw ContractError("action_recognition: empty split");
  int classes = 0;
  for (const auto& s : seqs) {
    if (s.activity < 0) throw ContractError("action_recognition: sequence '" + s.id + "' has no activity label");
    classes = std::max(classes, s.activity + 1);
  }
  auto build = [&](const std::vector<std::size_t>& idx, std::vector<int>& y) {
    const Eigen::Index d = clip_descriptor(seqs[idx[0]].embedding, cfg.action_frames, cfg.pooling).size();
    Eigen::MatrixXd x(static_cast<Eigen::Index>(idx.size()), d);
    for (std::size_t r = 0; r < idx.size(); ++r) {
      x.row(static_cast<Eigen::Index>(r)) = clip_descriptor(seqs[idx[r]].embedding, cfg.action_frames, cfg.pooling);
      y.push_back(seqs[idx[r]].activity);
    }
    detail::normalize_rows(x);
    return x;
  };
  std::vector<int> yt, ye;
  const Eigen::MatrixXd xt = build(split.train, yt), xe = build(split.eval, ye);
  if (warnings) {
    std::vector<int> count(classes, 0);
    for (int y : yt) ++count[y];
    for (int c = 0; c < classes; ++c)
      if (count[c] < 2) warnings->push_back("activity " + std::to_string(c) + " has " + std::to_string(count[c]) +
                                            " training clip(s)");
  }
  SoftmaxProbe probe;
  probe.fit(xt, yt, static_cast<std::size_t>(classes), cfg.probe_epochs, cfg.probe_lr);
  return accuracy(probe.predict(xe), ye);
}

/// Mean cosine over all pairs of unit-normalized frames taken from
/// sequences of different activities. 0 when only one activity exists.
inline double collapse_indicator(const std::vector<EvalSequence>& seqs) {
  std::map<int, std::pair<Eigen::VectorXd, double>> sums;  // activity -> (sum of unit rows, count)
  for (const auto& s : seqs) {
    const Eigen::MatrixXd u = detail::unit_rows(s.embedding);
    auto it = sums.find(s.activity);
    if (it == sums.end()) it = sums.emplace(s.activity, std::make_pair(Eigen::VectorXd::Zero(u.cols()), 0.0)).first;
    it->second.first += u.colwise().sum().transpose();
    it->second.second += static_cast<double>(u.rows());
  }
  double total = 0, pairs = 0;
  for (auto a = sums.begin(); a != sums.end(); ++a)
    for (auto b = std::next(a); b != sums.end(); ++b) {
      total += a->second.first.dot(b->second.first);
      pairs += a->second.second * b->second.second;
    }
  return pairs > 0 ? total / pairs : 0.0;
}

// ---- full suite -------------------------------------------------------------

/// Runs every metric. Phase probes, progress regression and tau are computed
/// within each activity (each has its own phase vocabulary) and averaged
/// over activities; action recognition and the collapse indicator span all
/// activities.
inline MetricsReport evaluate(const std::vector<EvalSequence>& seqs, const ProbeConfig& cfg) {
  cfg.validate();
  if (seqs.size() < 2) throw ContractError("evaluate: need at least 2 sequences");
  MetricsReport rep;
  std::vector<int> acts;
  for (const auto& s : seqs) acts.push_back(s.activity);
  const Split split = split_by_sequence(acts, cfg.train_fraction, cfg.seed);

  std::map<int, std::vector<std::size_t>> by_activity;
  for (std::size_t i = 0; i < seqs.size(); ++i) by_activity[seqs[i].activity].push_back(i);
  std::size_t groups = 0;
  double r2 = 0, tau = 0;
  std::map<double, double> phase;
  for (const auto& [activity, members] : by_activity) {
    std::vector<EvalSequence> group;
    for (std::size_t i : members) group.push_back(seqs[i]);
    std::vector<int> ga(group.size(), activity);
    const Split gs = split_by_sequence(ga, cfg.train_fraction, cfg.seed);
    if (gs.train.empty() || gs.eval.empty()) {
      rep.warnings.push_back("activity " + std::to_string(activity) + " has too few sequences for probes");
      continue;
    }
    for (double f : cfg.label_fractions) phase[f] += phase_classification(group, gs, f, cfg, &rep.warnings);
    r2 += phase_progress(group, gs, cfg);
    std::vector<std::size_t> eval_idx = gs.eval;
    if (eval_idx.size() < 2) eval_idx = gs.train;
    tau += mean_pairwise_tau(group, eval_idx);
    ++groups;
  }
  if (groups) {
    for (auto& [f, v] : phase) rep.phase_accuracy[f] = v / static_cast<double>(groups);
    rep.progress_r2 = r2 / static_cast<double>(groups);
    rep.kendall_tau = tau / static_cast<double>(groups);
  }
  const RetrievalResult ret = frame_retrieval_ap(seqs, cfg.ks);
  rep.ap_at_k = ret.ap;
  if (ret.truncated) rep.warnings.push_back("retrieval: some queries had fewer than K candidates");
  if (by_activity.size() >= 2 && !split.train.empty() && !split.eval.empty())
    rep.action_accuracy = action_recognition(seqs, split, cfg, &rep.warnings);
  rep.collapse_indicator = collapse_indicator(seqs);
  return rep;
}

// ---- files ------------------------------------------------------------------

/// Reads labels/<id>.phases and labels/activities.tsv ("id<TAB>activity")
/// for every tensor of an embedding container.
inline std::vector<EvalSequence> load_eval_set(const std::string& embeddings_path, const std::string& labels_dir) {
  namespace fs = std::filesystem;
  std::map<std::string, int> activity_of;
  const fs::path tsv = fs::path(labels_dir) / "activities.tsv";
  if (fs::exists(tsv)) {
    std::ifstream in(tsv);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty()) continue;
      const auto tab = line.find('\t');
      if (tab == std::string::npos)
        throw FormatError(tsv.string() + ": line " + std::to_string(lineno) + " lacks a tab separator", 0);
      activity_of[line.substr(0, tab)] = std::stoi(line.substr(tab + 1));
    }
  }
  std::vector<EvalSequence> out;
  for (auto& [name, tensor] : container::read_file(embeddings_path)) {
    EvalSequence s;
    s.id = name;
    s.embedding = std::move(tensor);
    const fs::path phases = fs::path(labels_dir) / (name + ".phases");
    if (!fs::exists(phases)) throw ConfigError("missing phase labels for '" + name + "': " + phases.string());
    s.phases = data::read_int_lines(phases.string());
    auto it = activity_of.find(name);
    s.activity = it == activity_of.end() ? 0 : it->second;
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace masa::metrics
