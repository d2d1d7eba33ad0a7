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

#include "mtdt/sim/record.hpp"

#include <fstream>
#include <limits>
#include <istream>
#include <ostream>

#include <nlohmann/json.hpp>

#include "mtdt/error.hpp"
#include "mtdt/sim/moe.hpp"
#include "mtdt/sim/signal.hpp"

namespace mtdt::sim {

namespace {

void check_range(const IntMatrix& m, int lo, int hi, const std::string& what) {
  for (int v : m.values())
    if (v < lo || v > hi)
      throw ContractError(what + " value " + std::to_string(v) + " outside [" + std::to_string(lo) + ", " +
                          std::to_string(hi) + "]");
}

}  // namespace

void validate(const SimulationRecord& r) {
  require_shape(r.sig, kPhases, kBuckets, "sig");
  require_shape(r.stp, kStopLanes, kBuckets, "stp");
  require_shape(r.ext, kExitLanes, kBuckets, "ext");
  require_shape(r.inf, kInflowLanes, kBuckets, "inf");
  require_shape(r.ql, kPhases, kBuckets, "ql");
  require_shape(r.tt, kPhases, kTravelTimeBuckets, "tt");
  require_shape(r.tmc, r.tmc.rows(), r.tmc.rows(), "tmc");
  check_range(r.sig, 0, 1, "sig");
  check_range(r.stp, 0, kWaveformMax, "stp");
  check_range(r.ext, 0, kWaveformMax, "ext");
  check_range(r.inf, 0, kWaveformMax, "inf");
  check_range(r.ql, 0, static_cast<int>(kMaxProximityLength), "ql");
  check_range(r.tt, 0, std::numeric_limits<int>::max(), "tt");
  for (double v : r.tmc.values())
    if (!(v >= 0.0 && v <= 1.0)) throw ContractError("tmc value outside [0, 1]");
  validate(r.drv);
}

void to_json(nlohmann::json& j, const SimulationRecord& r) {
  j = nlohmann::json{{"isc", r.isc}, {"sig", r.sig}, {"tmc", r.tmc}, {"drv", r.drv}, {"stp", r.stp},
                     {"ext", r.ext}, {"inf", r.inf}, {"ql", r.ql},   {"tt", r.tt},   {"seed", r.seed}};
}

void from_json(const nlohmann::json& j, SimulationRecord& r) {
  SimulationRecord out;
  out.isc = j.at("isc").get<std::string>();
  out.sig = j.at("sig").get<IntMatrix>();
  out.tmc = j.at("tmc").get<RealMatrix>();
  out.drv = j.at("drv").get<DrivingBehavior>();
  out.stp = j.at("stp").get<IntMatrix>();
  out.ext = j.at("ext").get<IntMatrix>();
  out.inf = j.at("inf").get<IntMatrix>();
  out.ql = j.at("ql").get<IntMatrix>();
  out.tt = j.at("tt").get<IntMatrix>();
  out.seed = j.value("seed", std::uint64_t{0});
  r = std::move(out);
}

void write_jsonl(std::ostream& out, const std::vector<SimulationRecord>& records) {
  for (const auto& r : records) out << nlohmann::json(r).dump() << '\n';
}

std::vector<SimulationRecord> read_jsonl(std::istream& in) {
  std::vector<SimulationRecord> out;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      SimulationRecord r = nlohmann::json::parse(line).get<SimulationRecord>();
      validate(r);
      out.push_back(std::move(r));
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError("line " + std::to_string(number) + ": " + e.what());
    } catch (const std::exception& e) {
      throw ConfigError("line " + std::to_string(number) + ": " + e.what());
    }
  }
  return out;
}

void save_jsonl(const std::string& path, const std::vector<SimulationRecord>& records) {
  std::ofstream f(path);
  if (!f) throw ConfigError("cannot write " + path);
  write_jsonl(f, records);
}

std::vector<SimulationRecord> load_jsonl(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot read " + path);
  return read_jsonl(f);
}

}  // namespace mtdt::sim
