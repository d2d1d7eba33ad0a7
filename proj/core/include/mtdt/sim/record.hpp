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

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "mtdt/matrix.hpp"
#include "mtdt/sim/behavior.hpp"

namespace mtdt::sim {

/// One simulation run over an 80-bucket window: inputs and ground truth.
struct SimulationRecord {
  std::string isc;  // intersection id
  IntMatrix sig;    // 8 x 80
  RealMatrix tmc;   // N x N
  DrivingBehavior drv;
  IntMatrix stp;  // 48 x 80
  IntMatrix ext;  // 16 x 80
  IntMatrix inf;  // 12 x 80
  IntMatrix ql;   // 8 x 80, metres
  IntMatrix tt;   // 8 x 200
  std::uint64_t seed = 0;

  friend bool operator==(const SimulationRecord&, const SimulationRecord&) = default;
};

/// Shape and range checks; throws ShapeError or ContractError.
void validate(const SimulationRecord& r);

void to_json(nlohmann::json& j, const SimulationRecord& r);
void from_json(const nlohmann::json& j, SimulationRecord& r);

void write_jsonl(std::ostream& out, const std::vector<SimulationRecord>& records);
std::vector<SimulationRecord> read_jsonl(std::istream& in);
void save_jsonl(const std::string& path, const std::vector<SimulationRecord>& records);
std::vector<SimulationRecord> load_jsonl(const std::string& path);

}  // namespace mtdt::sim
