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

// Acceptance run. Prints one PASS/FAIL line per criterion and exits nonzero
// if any criterion fails. Usage: acceptance [WORKDIR]
// MASA_ACCEPTANCE_EPOCHS overrides the benchmark epoch count (default 150).

#include <chrono>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "masa/masa.hpp"
#include "support.hpp"

namespace fs = std::filesystem;
using namespace masa;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
  bool pass = true;
  std::string detail;
};

/// Collects failed checks of one criterion.
class Checks {
 public:
  void expect(bool ok, const std::string& what) {
    ++total_;
    if (!ok) failed_.push_back(what);
  }
  void near(double got, double want, double tol, const std::string& what) {
    std::ostringstream os;
    os.precision(12);
    os << what << " got " << got << " want " << want;
    expect(std::abs(got - want) <= tol, os.str());
  }
  Outcome outcome(const std::string& extra = "") const {
    std::ostringstream os;
    os << (total_ - failed_.size()) << "/" << total_ << " checks";
    if (!extra.empty()) os << "; " << extra;
    for (std::size_t i = 0; i < std::min<std::size_t>(3, failed_.size()); ++i) os << "; " << failed_[i];
    return {failed_.empty(), os.str()};
  }

 private:
  std::size_t total_ = 0;
  std::vector<std::string> failed_;
};

int g_failures = 0;

void emit(const std::string& name, const Outcome& o) {
  if (!o.pass) ++g_failures;
  std::cout << (o.pass ? "PASS " : "FAIL ") << name << ": " << o.detail << std::endl;
}

template <typename F>
void run(const std::string& name, F&& body) {
  try {
    emit(name, body());
  } catch (const std::exception& e) {
    emit(name, {false, std::string("exception: ") + e.what()});
  }
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(4);
  os << std::fixed << v;
  return os.str();
}

// ---- gradient validation ----------------------------------------------------

template <typename T>
Var<T> micro_batch_loss(Tape<T>& t, ParameterStore<T>& s, const model::Network<T>& net,
                        const trainer::TrainConfig& cfg,
                        const std::vector<std::pair<augment::AugmentedView, augment::AugmentedView>>& views,
                        std::size_t length) {
  std::vector<Var<T>> items;
  for (const auto& [a, b] : views) {
    model::ForwardContext<T> ctx;
    items.push_back(trainer::item_loss(t, s, net, cfg, a, b, length, ctx).total);
  }
  Var<T> sum = items[0];
  for (std::size_t i = 1; i < items.size(); ++i) sum = ops::add(sum, items[i]);
  return ops::scale(sum, T(1) / static_cast<T>(items.size()));
}

Outcome gradient_validation() {
  const auto t0 = Clock::now();
  trainer::TrainConfig cfg;
  cfg.model.input_dim = 8;
  cfg.model.mlp_hidden = 16;
  cfg.model.embed_dim = 8;
  cfg.model.projection_dim = 8;
  cfg.model.encoder_layers = 2;
  cfg.model.heads = 2;
  cfg.augment.min_overlap_frames = 3;
  cfg.validate();
  const std::size_t T = 6;
  std::vector<std::pair<augment::AugmentedView, augment::AugmentedView>> views;
  for (std::uint64_t i = 0; i < 2; ++i) {
    augment::Rng rng(40 + i);
    views.push_back(augment::dual_augment(masa::testing::random_matrix(T, 8, 30 + i), cfg.effective_augment(), rng));
  }
  const model::Network<float> net_f(cfg.effective_model());
  const model::Network<double> net_d(cfg.effective_model());
  ParameterStore<float> store;
  net_f.init(store, 5);
  const ParameterStore<double> reference = store.cast<double>();
  LossBuilder<float> analytic = [&](Tape<float>& t, ParameterStore<float>& s) {
    return micro_batch_loss(t, s, net_f, cfg, views, T);
  };
  LossBuilder<double> numeric = [&](Tape<double>& t, ParameterStore<double>& s) {
    return micro_batch_loss(t, s, net_d, cfg, views, T);
  };
  GradCheckOptions opt;
  opt.tolerance = 1e-3;
  opt.step = 1e-6;
  const auto rep = grad_check_against(store, analytic, reference, numeric, opt);
  const double secs = seconds_since(t0);
  std::ostringstream os;
  os << rep.checked << " elements, " << rep.failures << " above 1e-3, worst "
     << (rep.entries.empty() ? 0.0 : rep.entries.front().error) << ", " << fmt(secs) << " s";
  return {rep.passed() && secs < 60.0, os.str()};
}

// ---- loss unit suite --------------------------------------------------------

Outcome loss_suite() {
  using D = double;
  using losses::IndexMap;
  Checks c;
  Tape<D> t;
  auto rows = [&](std::initializer_list<std::initializer_list<D>> r) { return t.constant(Tensor<D>::from_rows(r)); };
  auto rnd = [&](std::size_t r, std::size_t k, std::uint64_t seed) {
    return t.constant(masa::testing::random_matrix<D>(r, k, seed));
  };
  const double tol = 1e-6;

  auto uniform = losses::match_matrix(rnd(3, 3, 1), rows({{1, 2, 3}, {1, 2, 3}, {1, 2, 3}, {1, 2, 3}})).value();
  for (double v : uniform.values()) c.near(v, 0.25, tol, "identical z_b rows give uniform gamma");
  auto single = losses::match_matrix(rnd(4, 3, 2), rnd(1, 3, 3)).value();
  for (double v : single.values()) c.near(v, 1.0, tol, "single-frame z_b gives gamma 1");

  c.near(losses::predict_indices(rows({{0, 0, 1}}), IndexMap{{0, 3, 7}}).item(), 7.0, tol, "one-hot gamma");
  c.near(losses::predict_indices(rows({{1. / 3, 1. / 3, 1. / 3}}), IndexMap{{0, 2, 4}}).item(), 2.0, tol,
         "uniform gamma");
  c.near(losses::predict_indices(rows({{0.5, 0.25, 0.25}}), IndexMap{{1, 2, 5}}).item(), 2.25, tol,
         "weighted gamma");

  losses::LossConfig cfg;
  c.near(losses::directional_matching_loss(rows({{1, 0, 0}, {0, 0, 1}}), IndexMap{{2, 9}}, IndexMap{{2, 5, 9}}, cfg)
             .item(),
         0.0, tol, "perfect match loss");
  c.near(losses::directional_matching_loss(rows({{0.5, 0.5}}), IndexMap{{4}}, IndexMap{{2, 3}}, cfg).item(), 1.5, tol,
         "absolute index error");
  auto sq = cfg;
  sq.index_error = losses::IndexError::kSquared;
  c.near(losses::directional_matching_loss(rows({{0.5, 0.5}}), IndexMap{{4}}, IndexMap{{2, 3}}, sq).item(), 2.25, tol,
         "squared index error");

  auto z = rnd(5, 4, 7);
  const IndexMap m{{0, 2, 3, 6, 8}};
  auto same = losses::matching_loss(z, z, m, m, cfg);
  c.near(same.l_forward.item(), same.l_backward.item(), tol, "identical views are symmetric");

  auto v = rows({{1, 0}, {0, 1}, {0.6, 0.8}});
  auto w = rows({{0, 1}, {0.6, 0.8}, {5, 5}});
  c.near(losses::cluster_agreement(v, w, IndexMap{{0, 1, 2}}, IndexMap{{1, 2, 7}}).value.item(), 1.0, tol,
         "identical matched rows agree");
  c.near(losses::cluster_agreement(rows({{1, 0}}), rows({{0, 2}}), IndexMap{{4}}, IndexMap{{4}}).value.item(), 0.0,
         tol, "orthogonal rows");
  auto none = losses::cluster_agreement(v, w, IndexMap{{0, 1, 2}}, IndexMap{{3, 4, 5}});
  c.expect(none.pairs == 0 && none.value.item() == 0.0, "no overlap gives (0, 0 pairs)");
  auto zc = rnd(5, 4, 14);
  c.near(losses::clustering_loss(zc, zc, zc, zc, IndexMap::identity(5), IndexMap::identity(5)).value.item(), 1.0, tol,
         "identical clips, identity predictor");

  auto scalar = [&](double x) { return t.constant(Tensor<D>::scalar(x)); };
  c.near(losses::combined_loss(scalar(1.0), scalar(1.0), cfg).item(), 1.0, tol, "L_c = 1");
  c.near(losses::combined_loss(scalar(1.0), scalar(0.0), cfg).item(), 2.0, tol, "L_c = 0");
  c.near(losses::combined_loss(scalar(1.0), scalar(-1.0), cfg).item(), 2000.0, tol * 2000, "L_c = -1");
  c.near(losses::combined_loss(scalar(0.37), scalar(-1.0), cfg).item(), 2000.0 * 0.37, tol * 2000, "L_c = -1 scales");
  return c.outcome();
}

// ---- synthetic benchmark and ablations --------------------------------------

struct Benchmark {
  metrics::MetricsReport report;
  double train_seconds = 0;
  double eval_seconds = 0;
};

std::vector<metrics::EvalSequence> eval_set(const data::SynthDataset& ds, const std::vector<container::NamedTensor>& emb) {
  std::vector<metrics::EvalSequence> out;
  for (std::size_t i = 0; i < ds.sequences.size(); ++i)
    out.push_back({emb[i].first, emb[i].second, ds.sequences[i].activity_id, ds.sequences[i].phase_labels});
  return out;
}

/// Mean within-activity tau over the first few sequences of each activity.
double tau_monitor(const std::vector<metrics::EvalSequence>& seqs) {
  std::map<int, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < seqs.size(); ++i)
    if (groups[seqs[i].activity].size() < 6) groups[seqs[i].activity].push_back(i);
  double sum = 0;
  for (const auto& [a, idx] : groups) sum += metrics::mean_pairwise_tau(seqs, idx);
  return sum / static_cast<double>(groups.size());
}

Benchmark run_benchmark(const std::string& name, trainer::TrainConfig cfg, const data::SynthDataset& ds,
                        const fs::path& work) {
  std::vector<data::TrainingSample> samples;
  for (const auto& s : ds.sequences) samples.push_back({s.sequence_id, s.features});
  trainer::TrainLog log;
  trainer::TrainHooks hooks;
  hooks.checkpoint_path = (work / (name + ".ckpt.masa")).string();
  std::ofstream tau_csv(work / (name + "_tau_vs_epoch.csv"));
  tau_csv << "epoch,kendall_tau\n";
  hooks.on_epoch = [&](int epoch, const ParameterStore<float>& store) {
    if ((epoch + 1) % 10 != 0) return;
    trainer::TrainedModel m{cfg.effective_model(), store};
    tau_csv << epoch + 1 << ',' << tau_monitor(eval_set(ds, trainer::export_embeddings(m, samples))) << std::endl;
  };
  const auto t0 = Clock::now();
  auto store = trainer::train(samples, cfg, &log, hooks);
  Benchmark b;
  b.train_seconds = seconds_since(t0);
  log.write_csv((work / (name + "_loss.csv")).string());
  const auto t1 = Clock::now();
  trainer::TrainedModel m{cfg.effective_model(), store};
  const auto emb = trainer::export_embeddings(m, samples);
  container::write_file((work / (name + ".emb.masa")).string(), emb);
  b.report = metrics::evaluate(eval_set(ds, emb), metrics::ProbeConfig{});
  b.eval_seconds = seconds_since(t1);
  std::ofstream(work / (name + "_metrics.txt")) << b.report.to_key_value();
  std::ofstream(work / (name + "_metrics.json")) << b.report.to_json().dump(2) << '\n';
  std::cerr << name << ": train " << fmt(b.train_seconds) << " s, eval " << fmt(b.eval_seconds) << " s\n"
            << b.report.to_key_value();
  return b;
}

// ---- augmentation bookkeeping -----------------------------------------------

Outcome augmentation_bookkeeping(const data::SynthDataset& ds) {
  const augment::AugmentConfig cfg;
  std::size_t violations = 0, short_overlap = 0;
  for (std::uint64_t trial = 0; trial < 1000; ++trial) {
    const auto& seq = ds.sequences[trial % ds.sequences.size()];
    augment::Rng rng(trial);
    auto [a, b] = augment::dual_augment(seq.features, cfg, rng, seq.sequence_id);
    violations += masa::testing::view_violations(a, seq.features) + masa::testing::view_violations(b, seq.features);
    if (augment::overlap(a.index_map, b.index_map) < cfg.min_overlap_frames) ++short_overlap;
  }
  return {violations == 0 && short_overlap == 0, "1000 trials, " + std::to_string(violations) +
                                                     " index/copy violations, " + std::to_string(short_overlap) +
                                                     " overlap violations"};
}

// ---- metric oracles ---------------------------------------------------------

Outcome metric_oracles() {
  using masa::testing::mean_se;
  using masa::testing::noise_sequence;
  Checks c;
  std::mt19937_64 rng(3);
  std::size_t mismatches = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 2 + rng() % 19;
    std::vector<std::size_t> nn(n);
    for (auto& v : nn) v = rng() % n;
    if (metrics::kendall_tau_from_assignment(nn) != masa::testing::tau_oracle(nn)) ++mismatches;
  }
  c.expect(mismatches == 0, std::to_string(mismatches) + " tau mismatches");

  auto within_3se = [&](const std::vector<double>& runs, double expect, const std::string& what) {
    const auto ms = mean_se(runs);
    c.expect(std::abs(ms.mean - expect) <= 3 * ms.se, what + " mean " + fmt(ms.mean) + " vs " + fmt(expect));
  };
  {
    std::vector<double> runs;
    std::mt19937_64 r(5);
    for (int run = 0; run < 200; ++run) {
      std::vector<metrics::EvalSequence> seqs;
      for (int v = 0; v < 3; ++v) seqs.push_back(noise_sequence("v" + std::to_string(v), 0, 20, 4, 4, r));
      runs.push_back(metrics::frame_retrieval_ap(seqs, {5}).ap.at(5));
    }
    within_3se(runs, 0.25, "AP@5 chance");
  }
  metrics::ProbeConfig pc;
  pc.probe_epochs = 100;
  {
    std::vector<double> runs;
    std::mt19937_64 r(6);
    for (int run = 0; run < 60; ++run) {
      std::vector<metrics::EvalSequence> seqs;
      for (int v = 0; v < 6; ++v) seqs.push_back(noise_sequence("v" + std::to_string(v), 0, 30, 4, 3, r));
      runs.push_back(metrics::phase_classification(seqs, metrics::Split{{0, 1, 2, 3}, {4, 5}}, 1.0, pc));
    }
    within_3se(runs, 1.0 / 3.0, "phase probe chance");
  }
  {
    std::vector<double> runs;
    std::mt19937_64 r(10);
    for (int run = 0; run < 100; ++run) {
      std::vector<metrics::EvalSequence> seqs;
      std::vector<int> acts;
      for (int a = 0; a < 4; ++a)
        for (int i = 0; i < 5; ++i) {
          seqs.push_back(noise_sequence("s", a, 12, 6, 2, r));
          acts.push_back(a);
        }
      runs.push_back(
          metrics::action_recognition(seqs, metrics::split_by_sequence(acts, 0.6, static_cast<std::uint64_t>(run)), pc));
    }
    within_3se(runs, 0.25, "action probe chance");
  }
  return c.outcome();
}

// ---- determinism ------------------------------------------------------------

Outcome determinism(const data::SynthDataset& ds) {
  std::vector<data::TrainingSample> samples;
  for (std::size_t i = 0; i < ds.sequences.size(); i += 10)
    samples.push_back({ds.sequences[i].sequence_id, ds.sequences[i].features});
  trainer::TrainConfig cfg;
  cfg.epochs = 4;
  cfg.seed = 11;
  double final_loss[2];
  std::vector<std::uint8_t> bytes[2];
  for (int r = 0; r < 2; ++r) {
    trainer::TrainLog log;
    trainer::TrainedModel m{cfg.effective_model(), trainer::train(samples, cfg, &log)};
    final_loss[r] = log.final_total();
    bytes[r] = container::encode(trainer::export_embeddings(m, samples));
  }
  const double diff = std::abs(final_loss[0] - final_loss[1]);
  const bool same = bytes[0] == bytes[1];
  return {diff <= 1e-6 && same, std::to_string(samples.size()) + " sequences, final loss diff " + std::to_string(diff) +
                                    ", embeddings " + (same ? "byte-identical" : "differ")};
}

// ---- format round trips -----------------------------------------------------

std::vector<std::uint8_t> read_all(const fs::path& p) { return container::read_bytes(p.string()); }

void write_all(const fs::path& p, const std::vector<std::uint8_t>& b) {
  std::ofstream(p, std::ios::binary).write(reinterpret_cast<const char*>(b.data()), static_cast<std::streamsize>(b.size()));
}

template <typename Load>
void expect_rejected(Checks& c, const fs::path& good, const fs::path& scratch, const std::string& kind, Load load) {
  const auto bytes = read_all(good);
  struct Corruption {
    std::string what;
    std::size_t at;
    std::vector<std::uint8_t> bytes;
  };
  std::vector<Corruption> cases;
  auto b = bytes;
  b[0] = 'X';
  cases.push_back({"magic", 0, b});
  b = bytes;
  b[4] = 9;
  cases.push_back({"version", 4, b});
  b = bytes;
  b.resize(11);
  cases.push_back({"truncated name length", 10, b});
  for (const auto& cs : cases) {
    write_all(scratch, cs.bytes);
    try {
      load(scratch.string());
      c.expect(false, kind + " accepted corrupted " + cs.what);
    } catch (const FormatError& e) {
      c.expect(e.offset() == cs.at, kind + " " + cs.what + " offset " + std::to_string(e.offset()));
    }
  }
}

Outcome format_round_trips(const data::SynthDataset& ds, const fs::path& work) {
  Checks c;
  const auto& seq = ds.sequences.front();
  const fs::path seq_path = work / "roundtrip_seq.masa";
  data::save_sequence(seq, seq_path.string());
  const auto back = data::load_sequence(seq_path.string());
  c.expect(back.features.dims() == seq.features.dims() &&
               std::memcmp(back.features.data(), seq.features.data(), seq.features.size() * sizeof(float)) == 0,
           "sequence bit-exact");

  trainer::TrainConfig cfg;
  cfg.epochs = 1;
  std::vector<data::TrainingSample> samples;
  for (std::size_t i = 0; i < 4; ++i) samples.push_back({ds.sequences[i].sequence_id, ds.sequences[i].features});
  auto store = trainer::train(samples, cfg);
  const fs::path ck = work / "roundtrip_ckpt.masa";
  checkpoint::save(ck.string(), store, trainer::checkpoint_meta(cfg));
  auto loaded = trainer::load_model(ck.string());
  c.expect(loaded.store == store, "checkpoint store equal");
  c.expect(loaded.config.to_tensor() == cfg.effective_model().to_tensor(), "checkpoint model config equal");
  checkpoint::save((work / "roundtrip_ckpt2.masa").string(), loaded.store, trainer::checkpoint_meta(cfg));
  c.expect(read_all(ck) == read_all(work / "roundtrip_ckpt2.masa"), "checkpoint re-save byte-identical");

  trainer::TrainedModel m{cfg.effective_model(), store};
  const auto emb = trainer::export_embeddings(m, samples);
  const fs::path ep = work / "roundtrip_emb.masa";
  container::write_file(ep.string(), emb);
  const auto emb_back = container::read_file(ep.string());
  bool same = emb_back.size() == emb.size();
  for (std::size_t i = 0; same && i < emb.size(); ++i)
    same = emb_back[i].first == emb[i].first && emb_back[i].second.dims() == emb[i].second.dims() &&
           std::memcmp(emb_back[i].second.data(), emb[i].second.data(), emb[i].second.size() * sizeof(float)) == 0;
  c.expect(same, "embeddings bit-exact");

  const fs::path bad = work / "corrupt.masa";
  expect_rejected(c, seq_path, bad, "sequence", [](const std::string& p) { data::load_sequence(p); });
  expect_rejected(c, ck, bad, "checkpoint", [](const std::string& p) { trainer::load_model(p); });
  expect_rejected(c, ep, bad, "embeddings", [](const std::string& p) { container::read_file(p); });
  {
    auto b = read_all(seq_path);
    std::memset(b.data() + 21, 0, 4);  // zero row count
    write_all(bad, b);
    try {
      data::load_sequence(bad.string());
      c.expect(false, "sequence accepted zero dims");
    } catch (const FormatError& e) {
      c.expect(e.offset() == 21, "sequence zero dims offset " + std::to_string(e.offset()));
    }
  }
  return c.outcome();
}

}  // namespace

int main(int argc, char** argv) {
  const fs::path work = argc > 1 ? fs::path(argv[1]) : fs::path("acceptance_work");
  fs::create_directories(work);
  int epochs = 150;
  if (const char* e = std::getenv("MASA_ACCEPTANCE_EPOCHS")) epochs = std::atoi(e);

  const data::SynthDataset ds = data::synthesize(data::SynthConfig{});

  run("gradient_validation", gradient_validation);
  run("loss_suite", loss_suite);
  run("augmentation_bookkeeping", [&] { return augmentation_bookkeeping(ds); });
  run("metric_oracles", metric_oracles);
  run("determinism", [&] { return determinism(ds); });
  run("format_round_trips", [&] { return format_round_trips(ds, work); });

  trainer::TrainConfig full;
  full.epochs = epochs;
  trainer::TrainConfig matching = full;
  matching.disable_cluster_predictor = true;
  matching.disable_clustering_loss = true;
  trainer::TrainConfig no_sg = full;
  no_sg.disable_stop_gradient = true;

  Benchmark bf;
  bool have_full = false;
  run("synthetic_benchmark", [&] {
    bf = run_benchmark("full", full, ds, work);
    have_full = true;
    const auto& r = bf.report;
    const double phase = r.phase_accuracy.at(1.0);
    const double secs = bf.train_seconds + bf.eval_seconds;
    Checks c;
    c.expect(phase >= 0.90, "phase@1.0 " + fmt(phase) + " < 0.90");
    c.expect(r.kendall_tau >= 0.90, "tau " + fmt(r.kendall_tau) + " < 0.90");
    c.expect(r.ap_at_k.at(5) >= 0.80, "AP@5 " + fmt(r.ap_at_k.at(5)) + " < 0.80");
    c.expect(r.action_accuracy >= 0.95, "action " + fmt(r.action_accuracy) + " < 0.95");
    c.expect(secs <= 900, "runtime " + fmt(secs) + " s > 900 s");
    return c.outcome(std::to_string(epochs) + " epochs, phase " + fmt(phase) + ", tau " + fmt(r.kendall_tau) +
                     ", AP@5 " + fmt(r.ap_at_k.at(5)) + ", action " + fmt(r.action_accuracy) + ", " + fmt(secs) +
                     " s");
  });
  run("anti_collapse", [&]() -> Outcome {
    if (!have_full) return {false, "full model unavailable"};
    const Benchmark bm = run_benchmark("matching_only", matching, ds, work);
    const double gap = bf.report.action_accuracy - bm.report.action_accuracy;
    return {gap >= 0.10, "action full " + fmt(bf.report.action_accuracy) + " vs matching-only " +
                             fmt(bm.report.action_accuracy) + ", gap " + fmt(100 * gap) + " points (need >= 10)"};
  });
  run("stop_gradient_ablation", [&]() -> Outcome {
    if (!have_full) return {false, "full model unavailable"};
    const Benchmark bs = run_benchmark("no_stop_gradient", no_sg, ds, work);
    const double drop = bf.report.phase_accuracy.at(1.0) - bs.report.phase_accuracy.at(1.0);
    const double collapse = bs.report.collapse_indicator;
    return {drop >= 0.05 || collapse > 0.95, "phase drop " + fmt(100 * drop) + " points (need >= 5), collapse " +
                                                 fmt(collapse) + " (need > 0.95)"};
  });

  std::cout << (g_failures == 0 ? "ALL PASS" : std::to_string(g_failures) + " FAILED") << std::endl;
  return g_failures == 0 ? 0 : 1;
}
