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
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "mtdt/sim/behavior.hpp"
#include "mtdt/sim/record.hpp"
#include "mtdt/sim/signal.hpp"
#include "mtdt/sim/simulator.hpp"
#include "mtdt/sim/topology.hpp"

namespace mtdt::sim {

/// Everything needed to reproduce one record.
struct Scenario {
  IntersectionTopology topology;
  SignalTimingPlan plan;
  DrivingBehavior drv;
  TurnRatios ratios;
  DemandRates demand{};
  Window window;
  std::uint64_t seed = 0;
};

/// Simulates up to the end of the window and assembles the record.
SimulationRecord run_scenario(const Scenario& s);

/// Same, also returning the traces the record was built from.
SimulationRecord run_scenario(const Scenario& s, std::vector<VehicleTrace>& traces);

struct DatasetConfig {
  std::vector<IntersectionTopology> topologies;
  SignalGenerationConfig signal;
  BehaviorRanges behavior;
  TurnRatioRanges turns;
  double demand_lo = 0.03;  // veh/s on each major approach, drawn log-uniformly
  double demand_hi = 0.40;
  double minor_lo = 0.3;    // minor approaches scale the major rate
  double minor_hi = 0.8;
  int scenario_length = 2400;
  int warmup = 600;
};

/// Default config over the standard topology set.
DatasetConfig default_dataset_config();

/// Draws scenario `index` of a dataset; topologies are used round-robin and
/// every draw comes from a stream seeded by (master, index).
Scenario sample_scenario(const DatasetConfig& config, std::uint64_t master_seed, std::size_t index);

std::vector<SimulationRecord> generate_dataset(const DatasetConfig& config, std::size_t n_records,
                                               std::uint64_t master_seed);

void to_json(nlohmann::json& j, const DatasetConfig& c);
/// Reads ranges over the defaults; "topologies" may hold inline topology
/// objects, otherwise the standard set is used.
void from_json(const nlohmann::json& j, DatasetConfig& c);

}  // namespace mtdt::sim
