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

#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "masa/data/sequence.hpp"
#include "masa/errors.hpp"

namespace masa::data {

struct SequenceRecord {
  std::string id;
  std::string file;    // relative to the manifest directory
  int activity = -1;
  std::size_t length = 0;
  std::string phases;  // optional phase label sidecar, relative
};

struct DatasetManifest {
  int version = 1;
  std::size_t feature_dim = 0;
  std::size_t max_length = 0;
  std::vector<std::string> activities;
  std::vector<SequenceRecord> sequences;
  std::filesystem::path base_dir;

  std::filesystem::path resolve(const std::string& rel) const { return base_dir / rel; }
};

inline nlohmann::json to_json(const DatasetManifest& m) {
  nlohmann::json seqs = nlohmann::json::array();
  for (const auto& r : m.sequences) {
    nlohmann::json j = {{"id", r.id}, {"file", r.file}, {"activity", r.activity}, {"length", r.length}};
    if (!r.phases.empty()) j["phases"] = r.phases;
    seqs.push_back(std::move(j));
  }
  return {{"version", m.version},
          {"feature_dim", m.feature_dim},
          {"max_length", m.max_length},
          {"activities", m.activities},
          {"sequences", std::move(seqs)}};
}

inline void save_manifest(const DatasetManifest& m, const std::string& path) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw std::runtime_error("cannot open '" + path + "' for writing");
  f << to_json(m).dump(2) << '\n';
}

/// Parses a manifest document; structural problems raise ConfigError.
inline DatasetManifest parse_manifest(const nlohmann::json& j, const std::filesystem::path& base_dir) {
  DatasetManifest m;
  m.base_dir = base_dir;
  try {
    m.version = j.at("version").get<int>();
    m.feature_dim = j.at("feature_dim").get<std::size_t>();
    m.max_length = j.at("max_length").get<std::size_t>();
    m.activities = j.at("activities").get<std::vector<std::string>>();
    std::set<std::string> ids;
    for (const auto& s : j.at("sequences")) {
      SequenceRecord r;
      r.id = s.at("id").get<std::string>();
      r.file = s.at("file").get<std::string>();
      r.activity = s.at("activity").get<int>();
      r.length = s.at("length").get<std::size_t>();
      if (s.contains("phases") && !s.at("phases").is_null()) r.phases = s.at("phases").get<std::string>();
      if (!ids.insert(r.id).second) throw ConfigError("manifest: duplicate sequence id '" + r.id + "'");
      m.sequences.push_back(std::move(r));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("manifest: ") + e.what());
  }
  if (m.version != 1) throw ConfigError("manifest: unsupported version " + std::to_string(m.version));
  if (m.feature_dim == 0 || m.max_length < 2) throw ConfigError("manifest: invalid feature_dim/max_length");
  return m;
}

inline DatasetManifest load_manifest(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open manifest '" + path + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(f);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(std::string("manifest '") + path + "' is not valid JSON: " + e.what(),
                      e.byte > 0 ? e.byte - 1 : 0);
  }
  return parse_manifest(j, std::filesystem::path(path).parent_path());
}

/// Checks that every referenced file exists and that its header agrees with
/// the record. Throws ConfigError naming the first offending record.
inline void validate_manifest(const DatasetManifest& m) {
  for (const auto& r : m.sequences) {
    const auto path = m.resolve(r.file);
    if (!std::filesystem::exists(path))
      throw ConfigError("manifest record '" + r.id + "': missing file " + path.string());
    if (r.activity < 0 || static_cast<std::size_t>(r.activity) >= m.activities.size())
      throw ConfigError("manifest record '" + r.id + "': activity index out of range");
    std::vector<std::size_t> dims;
    try {
      dims = container::peek_first(path.string()).second;
    } catch (const FormatError& e) {
      throw ConfigError("manifest record '" + r.id + "': " + e.what());
    }
    if (dims.size() != 2 || dims[0] != r.length || dims[1] != m.feature_dim)
      throw ConfigError("manifest record '" + r.id + "': header dims " + shape_string(dims) +
                        " disagree with manifest (length " + std::to_string(r.length) + ", feature_dim " +
                        std::to_string(m.feature_dim) + ")");
    if (r.length > m.max_length)
      throw ConfigError("manifest record '" + r.id + "': length exceeds max_length");
    if (!r.phases.empty() && !std::filesystem::exists(m.resolve(r.phases)))
      throw ConfigError("manifest record '" + r.id + "': missing phase label file");
  }
}

/// Features only. Label sidecars are never opened.
inline std::vector<TrainingSample> load_training_samples(const DatasetManifest& m) {
  std::vector<TrainingSample> out;
  for (const auto& r : m.sequences) {
    auto seq = load_sequence(m.resolve(r.file).string());
    out.push_back(TrainingSample{r.id, std::move(seq.features)});
  }
  return out;
}

/// Features plus activity ids and phase labels, for evaluation only.
inline std::vector<FeatureSequence> load_labeled(const DatasetManifest& m) {
  std::vector<FeatureSequence> out;
  for (const auto& r : m.sequences) {
    auto seq = load_sequence(m.resolve(r.file).string());
    seq.sequence_id = r.id;
    seq.activity_id = r.activity;
    if (!r.phases.empty()) {
      seq.phase_labels = read_int_lines(m.resolve(r.phases).string());
      if (seq.phase_labels.size() != seq.length())
        throw ConfigError("labels for '" + r.id + "' do not match the sequence length");
    }
    out.push_back(std::move(seq));
  }
  return out;
}

}  // namespace masa::data
