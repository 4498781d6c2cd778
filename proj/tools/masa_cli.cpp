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

// Command line front end. Errors go to stderr as a single line:
//   error kind=<kind> [offset=<byte>] message="<json-escaped text>"
// with a nonzero exit code per kind.

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "masa/masa.hpp"

namespace {

using namespace masa;
using trainer::Config;

enum Exit : int {
  kOk = 0,
  kOther = 1,
  kUsage = 2,
  kConfig = 3,
  kFormat = 4,
  kContract = 5,
  kAugment = 6,
  kTraining = 7,
  kIo = 8,
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

int report(const char* kind, int code, const std::string& message, std::optional<std::size_t> offset = {}) {
  std::cerr << "error kind=" << kind;
  if (offset) std::cerr << " offset=" << *offset;
  std::cerr << " message=" << nlohmann::json(message).dump() << '\n';
  return code;
}

void require_file(const std::string& path) {
  if (!std::filesystem::is_regular_file(path)) throw IoError("no such file: " + path);
}

std::ofstream open_out(const std::string& path) {
  const auto parent = std::filesystem::path(path).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path);
  out.precision(9);
  return out;
}

Config config_or_default(const std::string& path) {
  if (path.empty()) return Config{};
  require_file(path);
  return trainer::load_config(path);
}

data::DatasetManifest open_manifest(const std::string& path) {
  require_file(path);
  auto m = data::load_manifest(path);
  data::validate_manifest(m);
  return m;
}

trainer::TrainedModel open_model(const std::string& path) {
  require_file(path);
  return trainer::load_model(path);
}

Matrix open_sequence(const std::string& path) {
  require_file(path);
  return data::load_sequence(path).features;
}

// ---- commands ---------------------------------------------------------------

struct GenerateArgs {
  std::string config, out;
};

int run_generate(const GenerateArgs& a) {
  const Config cfg = config_or_default(a.config);
  const auto m = data::generate_synthetic(cfg.synth, a.out);
  std::cout << "sequences=" << m.sequences.size() << " activities=" << m.activities.size()
            << " manifest=" << (std::filesystem::path(a.out) / "manifest.json").string() << '\n';
  return kOk;
}

struct TrainArgs {
  std::string config, data, out, log;
  std::optional<int> epochs;
  std::optional<std::uint64_t> seed;
};

int run_train(const TrainArgs& a) {
  Config cfg = config_or_default(a.config);
  if (a.epochs) cfg.train.epochs = *a.epochs;
  if (a.seed) cfg.train.seed = *a.seed;
  const auto manifest = open_manifest(a.data);
  const auto samples = data::load_training_samples(manifest);
  trainer::TrainLog log;
  trainer::TrainHooks hooks;
  hooks.checkpoint_path = a.out;
  if (auto parent = std::filesystem::path(a.out).parent_path(); !parent.empty())
    std::filesystem::create_directories(parent);
  trainer::train(samples, cfg.train, &log, hooks);
  if (!a.log.empty()) {
    open_out(a.log);
    log.write_csv(a.log);
  }
  std::cout << "steps=" << log.steps.size() << " final_loss=" << log.final_total()
            << " seconds=" << log.wall_seconds << " checkpoint=" << a.out << '\n';
  return kOk;
}

struct ExportArgs {
  std::string ckpt, data, out;
};

int run_export(const ExportArgs& a) {
  auto model = open_model(a.ckpt);
  const auto manifest = open_manifest(a.data);
  const auto emb = trainer::export_embeddings(model, data::load_training_samples(manifest));
  open_out(a.out);
  container::write_file(a.out, emb);
  std::cout << "tensors=" << emb.size() << " embeddings=" << a.out << '\n';
  return kOk;
}

struct EvalArgs {
  std::string emb, labels, report, config;
};

int run_eval(const EvalArgs& a) {
  const Config cfg = config_or_default(a.config);
  require_file(a.emb);
  if (!std::filesystem::is_directory(a.labels)) throw IoError("no such directory: " + a.labels);
  const auto seqs = metrics::load_eval_set(a.emb, a.labels);
  const auto rep = metrics::evaluate(seqs, cfg.metrics);
  open_out(a.report) << rep.to_key_value();
  open_out(a.report + ".json") << rep.to_json().dump(2) << '\n';
  std::cout << rep.to_key_value();
  for (const auto& w : rep.warnings) std::cerr << "warning message=" << nlohmann::json(w).dump() << '\n';
  return kOk;
}

struct AlignArgs {
  std::string ckpt, a, b, out, space = "u";
  double temperature = 1.0;
};

int run_align(const AlignArgs& a) {
  auto model = open_model(a.ckpt);
  const Matrix sa = open_sequence(a.a);
  const Matrix sb = open_sequence(a.b);
  const auto space = a.space == "z" ? trainer::AlignSpace::kZ : trainer::AlignSpace::kU;
  const auto al = trainer::align(model, sa, sb, space, a.temperature);
  auto out = open_out(a.out);
  out << "frame_a,frame_b,gamma\n";
  for (std::size_t i = 0; i < al.assignment.size(); ++i)
    out << i << ',' << al.assignment[i] << ',' << al.gamma(i, al.assignment[i]) << '\n';
  std::cout << "frames=" << al.assignment.size() << " tau=" << metrics::kendall_tau_from_assignment(al.assignment)
            << " alignment=" << a.out << '\n';
  return kOk;
}

struct RetrieveArgs {
  std::string emb, query;
  std::size_t k = 5;
};

int run_retrieve(const RetrieveArgs& a) {
  const auto colon = a.query.rfind(':');
  if (colon == std::string::npos || colon == 0 || colon + 1 == a.query.size())
    throw ConfigError("query must look like ID:FRAME, got '" + a.query + "'");
  const std::string id = a.query.substr(0, colon);
  std::size_t frame = 0;
  try {
    std::size_t used = 0;
    if (a.query[colon + 1] == '-') throw std::invalid_argument("negative");
    frame = std::stoul(a.query.substr(colon + 1), &used);
    if (used != a.query.size() - colon - 1) throw std::invalid_argument("trailing text");
  } catch (const std::logic_error&) {
    throw ConfigError("query frame is not a non-negative integer: '" + a.query.substr(colon + 1) + "'");
  }
  if (a.k < 1) throw ConfigError("k must be >= 1");
  require_file(a.emb);
  const auto tensors = container::read_file(a.emb);
  const Matrix* q = nullptr;
  for (const auto& [name, t] : tensors)
    if (name == id) q = &t;
  if (!q) throw ContractError("sequence '" + id + "' is not in " + a.emb);
  if (frame >= q->rows())
    throw ContractError("frame " + std::to_string(frame) + " out of range for '" + id + "' with " +
                        std::to_string(q->rows()) + " frames");

  auto unit_row = [](const Matrix& m, std::size_t r) {
    std::vector<double> v(m.cols());
    double n = 0;
    for (std::size_t c = 0; c < m.cols(); ++c) n += static_cast<double>(m(r, c)) * m(r, c);
    n = std::sqrt(n) + 1e-12;
    for (std::size_t c = 0; c < m.cols(); ++c) v[c] = m(r, c) / n;
    return v;
  };
  const auto qv = unit_row(*q, frame);
  struct Hit {
    double score;
    std::string id;
    std::size_t frame;
  };
  std::vector<Hit> hits;
  for (const auto& [name, t] : tensors) {
    if (name == id) continue;
    if (t.cols() != q->cols()) throw ContractError("embedding width differs for '" + name + "'");
    for (std::size_t r = 0; r < t.rows(); ++r) {
      const auto v = unit_row(t, r);
      double s = 0;
      for (std::size_t c = 0; c < v.size(); ++c) s += qv[c] * v[c];
      hits.push_back({s, name, r});
    }
  }
  const std::size_t k = std::min(a.k, hits.size());
  std::partial_sort(hits.begin(), hits.begin() + static_cast<std::ptrdiff_t>(k), hits.end(),
                    [](const Hit& x, const Hit& y) { return x.score > y.score; });
  std::cout.precision(9);
  std::cout << "rank,sequence_id,frame,cosine\n";
  for (std::size_t i = 0; i < k; ++i)
    std::cout << i + 1 << ',' << hits[i].id << ',' << hits[i].frame << ',' << hits[i].score << '\n';
  if (k < a.k) std::cerr << "warning message=\"only " << k << " candidate frames available\"\n";
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"masa-align: self-supervised multi-activity sequence alignment"};
  app.require_subcommand(1);

  GenerateArgs gen;
  auto* c_gen = app.add_subcommand("generate", "write a synthetic procedural-activity dataset");
  c_gen->add_option("--config", gen.config, "config file (synth section)");
  c_gen->add_option("--out", gen.out, "output directory")->required();

  TrainArgs tr;
  auto* c_train = app.add_subcommand("train", "self-supervised training");
  c_train->add_option("--config", tr.config, "config file");
  c_train->add_option("--data", tr.data, "dataset manifest")->required();
  c_train->add_option("--out", tr.out, "checkpoint path")->required();
  c_train->add_option("--log", tr.log, "per-step loss CSV");
  c_train->add_option("--epochs", tr.epochs, "override train.epochs");
  c_train->add_option("--seed", tr.seed, "override train.seed");

  ExportArgs ex;
  auto* c_export = app.add_subcommand("export-embeddings", "embed every sequence of a manifest");
  c_export->add_option("--ckpt", ex.ckpt, "checkpoint")->required();
  c_export->add_option("--data", ex.data, "dataset manifest")->required();
  c_export->add_option("--out", ex.out, "embedding container")->required();

  EvalArgs ev;
  auto* c_eval = app.add_subcommand("eval", "alignment evaluation suite");
  c_eval->add_option("--emb", ev.emb, "embedding container")->required();
  c_eval->add_option("--labels", ev.labels, "label directory")->required();
  c_eval->add_option("--report", ev.report, "key=value report; JSON goes to <report>.json")->required();
  c_eval->add_option("--config", ev.config, "config file (metrics section)");

  AlignArgs al;
  auto* c_align = app.add_subcommand("align", "frame correspondence between two sequences");
  c_align->add_option("--ckpt", al.ckpt, "checkpoint")->required();
  c_align->add_option("--a", al.a, "sequence file")->required();
  c_align->add_option("--b", al.b, "sequence file")->required();
  c_align->add_option("--out", al.out, "alignment CSV")->required();
  c_align->add_option("--space", al.space, "embedding space")->check(CLI::IsMember({"u", "z"}));
  c_align->add_option("--temperature", al.temperature, "softmax temperature")->check(CLI::PositiveNumber);

  RetrieveArgs re;
  auto* c_retrieve = app.add_subcommand("retrieve", "nearest frames in other sequences");
  c_retrieve->add_option("--emb", re.emb, "embedding container")->required();
  c_retrieve->add_option("--query", re.query, "ID:FRAME")->required();
  c_retrieve->add_option("--k", re.k, "number of neighbours");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return report("usage", kUsage, e.what());
  }

  try {
    if (*c_gen) return run_generate(gen);
    if (*c_train) return run_train(tr);
    if (*c_export) return run_export(ex);
    if (*c_eval) return run_eval(ev);
    if (*c_align) return run_align(al);
    if (*c_retrieve) return run_retrieve(re);
  } catch (const FormatError& e) {
    return report("format", kFormat, e.what(), e.offset());
  } catch (const ConfigError& e) {
    return report("config", kConfig, e.what());
  } catch (const ContractError& e) {
    return report("contract", kContract, e.what());
  } catch (const AugmentError& e) {
    return report("augment", kAugment, e.what());
  } catch (const TrainingError& e) {
    return report("training", kTraining, e.what());
  } catch (const IoError& e) {
    return report("io", kIo, e.what());
  } catch (const std::filesystem::filesystem_error& e) {
    return report("io", kIo, e.what());
  } catch (const std::exception& e) {
    return report("internal", kOther, e.what());
  }
  return kOk;
}
