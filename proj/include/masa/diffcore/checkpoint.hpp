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
#include <string>
#include <vector>

#include "masa/diffcore/container.hpp"
#include "masa/diffcore/parameter_store.hpp"

namespace masa::checkpoint {

// Reserved name prefixes. Entries under kStatePrefix are non-trainable
// buffers; everything under kOptPrefix is optimizer state; kMetaPrefix holds
// auxiliary numeric metadata (e.g. the model configuration).
inline constexpr const char* kOptPrefix = "opt/";
inline constexpr const char* kStatePrefix = "state/";
inline constexpr const char* kMetaPrefix = "meta/";

inline bool has_prefix(const std::string& s, const std::string& p) { return s.rfind(p, 0) == 0; }

inline std::vector<container::NamedTensor> to_tensors(const ParameterStore<float>& store,
                                                      const std::vector<container::NamedTensor>& meta = {}) {
  std::vector<container::NamedTensor> out;
  for (const auto& m : meta) out.push_back(m);
  for (const auto& [name, p] : store.entries()) {
    detail::require(p.trainable != has_prefix(name, kStatePrefix),
                    "checkpoint: entry '" + name + "' violates the state/ naming convention");
    out.emplace_back(name, p.value);
  }
  for (const auto& [name, mv] : store.moments()) {
    out.emplace_back(std::string(kOptPrefix) + "m/" + name, mv.m);
    out.emplace_back(std::string(kOptPrefix) + "v/" + name, mv.v);
  }
  // The step counter is stored as two 24-bit halves so it survives the f32
  // payload exactly.
  const std::uint64_t step = store.step();
  out.emplace_back(std::string(kOptPrefix) + "step",
                   Tensor<float>({2}, std::vector<float>{static_cast<float>(step & 0xFFFFFF),
                                                         static_cast<float>((step >> 24) & 0xFFFFFF)}));
  return out;
}

struct Loaded {
  ParameterStore<float> store;
  std::vector<container::NamedTensor> meta;
};

inline Loaded from_tensors(const std::vector<container::NamedTensor>& tensors) {
  Loaded out;
  for (const auto& [name, t] : tensors) {
    if (has_prefix(name, kMetaPrefix)) {
      out.meta.emplace_back(name, t);
    } else if (!has_prefix(name, kOptPrefix)) {
      out.store.add(name, t, !has_prefix(name, kStatePrefix));
    }
  }
  const std::string m_prefix = std::string(kOptPrefix) + "m/";
  const std::string v_prefix = std::string(kOptPrefix) + "v/";
  for (const auto& [name, t] : tensors) {
    if (has_prefix(name, m_prefix) || has_prefix(name, v_prefix)) {
      const bool is_m = has_prefix(name, m_prefix);
      const std::string param = name.substr(m_prefix.size());
      if (!out.store.contains(param))
        throw FormatError("optimizer state '" + name + "' has no matching parameter", 0);
      if (out.store.value(param).dims() != t.dims())
        throw FormatError("optimizer state '" + name + "' dims differ from parameter", 0);
      auto& mv = out.store.moments()[param];
      (is_m ? mv.m : mv.v) = t;
    } else if (name == std::string(kOptPrefix) + "step") {
      if (t.size() != 2) throw FormatError("malformed optimizer step counter", 0);
      out.store.set_step(static_cast<std::uint64_t>(t[0]) | (static_cast<std::uint64_t>(t[1]) << 24));
    }
  }
  return out;
}

inline void save(const std::string& path, const ParameterStore<float>& store,
                 const std::vector<container::NamedTensor>& meta = {}) {
  container::write_file(path, to_tensors(store, meta));
}

inline Loaded load(const std::string& path) { return from_tensors(container::read_file(path)); }

}  // namespace masa::checkpoint
