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

#include <vector>

#include "mtdt/matrix.hpp"
#include "mtdt/sim/signal.hpp"
#include "mtdt/sim/simulator.hpp"
#include "mtdt/sim/topology.hpp"

namespace mtdt::sim {

inline constexpr int kWaveformMax = 8;
inline constexpr std::size_t kTravelTimeBuckets = 200;
inline constexpr double kStopSpeedThreshold = 0.1;  // m/s

struct Waveforms {
  IntMatrix stp;  // 48 x buckets, stop-bar crossings
  IntMatrix ext;  // 16 x buckets, exit-lane arrivals
  IntMatrix inf;  // 12 x buckets, 2-hop to 1-hop transfers
};

/// Detector events are read off consecutive samples: leaving a 2-hop lane
/// (inflow), leaving a stop lane (stop bar) and arriving on an exit lane.
/// Counts are clamped to [0, 8].
Waveforms extract_waveforms(const std::vector<VehicleTrace>& traces, const IntersectionTopology& topology,
                            const Window& window);

/// Per phase and bucket: max stopped-queue tail over the phase's 1-hop lanes
/// plus the max over its 2-hop lanes, rounded to metres and capped at 1200.
IntMatrix compute_queue_series(const std::vector<VehicleTrace>& traces, const IntersectionTopology& topology,
                               const Window& window, double stop_speed_threshold = kStopSpeedThreshold);

/// Histogram of (exit - entry) in 5-s buckets for vehicles crossing the stop
/// bar inside the window, one row per phase served.
IntMatrix compute_travel_time_hist(const std::vector<VehicleTrace>& traces, const IntersectionTopology& topology,
                                   const Window& window);

}  // namespace mtdt::sim
