// Copyright 2026 The MTDT Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Binary checkpoint: magic line, 8-byte little-endian header length, JSON
// header, then every parameter as contiguous little-endian float64 values in
// header order.

#include <iosfwd>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mtdt/model.hpp"
#include "mtdt/normalization.hpp"
#include "mtdt/sim/topology.hpp"

namespace mtdt::model {

inline constexpr char kCheckpointMagic[] = "MTDTCKPT1\n";

struct Checkpoint {
  ModelConfig config;
  Normalizer norm;
  Parameters params;
  /// Training hyperparameters and selection results, kept verbatim.
  nlohmann::json hyperparameters = nlohmann::json::object();
  /// Topologies the model was trained on, so inference needs no side files.
  std::vector<sim::IntersectionTopology> topologies;

  /// 16 hex digits of FNV-1a over the header (without the id) and payload.
  std::string id() const;
  const sim::IntersectionTopology& topology(const std::string& isc) const;
};

void write_checkpoint(std::ostream& out, const Checkpoint& c);
/// Throws ConfigError on a bad magic, truncated data, shape mismatch with
/// the model config, or an id that does not match the contents.
Checkpoint read_checkpoint(std::istream& in);
void save_checkpoint(const std::string& path, const Checkpoint& c);
Checkpoint load_checkpoint(const std::string& path);

/// Header summary without the payload: id, config, shapes, normalizer.
nlohmann::json checkpoint_info(const Checkpoint& c);

}  // namespace mtdt::model
