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

// Shared record fixtures for the model-side suites.

#include <stdexcept>
#include <string>
#include <vector>

#include "mtdt/sim/dataset.hpp"
#include "mtdt/sim/moe.hpp"
#include "mtdt/sim/record.hpp"
#include "mtdt/sim/topology.hpp"

namespace mtdt::testing {

inline sim::SimulationRecord zero_record(const sim::IntersectionTopology& topo) {
  sim::SimulationRecord r;
  r.isc = topo.id;
  r.sig = IntMatrix(sim::kPhases, sim::kBuckets);
  r.tmc = RealMatrix(topo.tmc.size, topo.tmc.size);
  r.stp = IntMatrix(sim::kStopLanes, sim::kBuckets);
  r.ext = IntMatrix(sim::kExitLanes, sim::kBuckets);
  r.inf = IntMatrix(sim::kInflowLanes, sim::kBuckets);
  r.ql = IntMatrix(sim::kPhases, sim::kBuckets);
  r.tt = IntMatrix(sim::kPhases, sim::kTravelTimeBuckets);
  return r;
}

/// A small simulated dataset, generated once per process.
inline const std::vector<sim::SimulationRecord>& small_dataset() {
  static const std::vector<sim::SimulationRecord> data =
      sim::generate_dataset(sim::default_dataset_config(), 12, 2024);
  return data;
}

inline const std::vector<sim::IntersectionTopology>& topologies() {
  static const std::vector<sim::IntersectionTopology> t = sim::standard_topology_set();
  return t;
}

inline const sim::IntersectionTopology& topology_of(const sim::SimulationRecord& r) {
  for (const auto& t : topologies())
    if (t.id == r.isc) return t;
  throw std::out_of_range("no topology " + r.isc);
}

}  // namespace mtdt::testing
