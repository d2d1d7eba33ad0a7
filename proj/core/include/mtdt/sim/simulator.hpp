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

// Per-second mesoscopic traffic model of one intersection.
//
// Vehicles enter at the upstream end of a 2-hop lane, follow a Krauss-type
// safe-speed rule, move onto a 1-hop (stop-bar) lane, wait for a green
// indication and a discharge token at the stop bar, spend a fixed time in
// the junction box and are sampled once on the receiving exit lane before
// leaving the model.

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

#include "mtdt/sim/behavior.hpp"
#include "mtdt/sim/signal.hpp"
#include "mtdt/sim/topology.hpp"

namespace mtdt::sim {

enum class Stage : std::uint8_t { Upstream, Stop, Junction, Exit };

struct TraceSample {
  int t = 0;
  Stage stage = Stage::Upstream;
  int slot = 0;           // inflow slot, stop slot, or exit slot (Junction, Exit)
  double distance = 0.0;  // stop bar (or lane end) to the vehicle's rear, clamped to the lane
  double speed = 0.0;
  friend bool operator==(const TraceSample&, const TraceSample&) = default;
};

struct VehicleTrace {
  int id = 0;
  Approach approach = Approach::North;
  Movement movement = Movement::Through;
  int phase = 2;
  int entry_time = 0;             // entered the 2-hop lane
  std::optional<int> exit_time;   // crossed the stop bar
  std::vector<TraceSample> samples;

  bool completed() const { return exit_time.has_value(); }
  friend bool operator==(const VehicleTrace&, const VehicleTrace&) = default;
};

using DemandRates = std::array<double, kApproaches>;  // vehicles per second

struct SimulationOptions {
  int horizon = 2400;     // seconds simulated, t = 1 .. horizon
  int record_from = 0;    // samples before this second are dropped
};

std::vector<VehicleTrace> simulate(const IntersectionTopology& topology, const SignalTimingPlan& plan,
                                   const DrivingBehavior& drv, const TurnRatios& ratios, const DemandRates& demand,
                                   std::uint64_t seed, const SimulationOptions& options = {});

/// Stop-bar discharge headway in seconds implied by the behaviour.
double saturation_headway(const IntersectionTopology& topology, const DrivingBehavior& drv);

}  // namespace mtdt::sim
