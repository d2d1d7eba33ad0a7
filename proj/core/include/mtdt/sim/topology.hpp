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

// Intersection layout: lane tables, NEMA phase assignment, hop graph used for
// queue and travel-time measurement, and the graph templates for the exit and
// inflow imputation modules.
//
// Slot conventions (fixed tensor shapes): stop-bar lanes are blocked 12 per
// approach, inflow (2-hop) lanes 3 per approach, exit lanes 4 per leg, with
// approaches ordered N, E, S, W. Rows of every 8-row phase matrix are phases
// 1..8 in order.

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace mtdt::sim {

inline constexpr std::size_t kStopLanes = 48;
inline constexpr std::size_t kExitLanes = 16;
inline constexpr std::size_t kInflowLanes = 12;
inline constexpr std::size_t kPhases = 8;
inline constexpr std::size_t kApproaches = 4;
inline constexpr std::size_t kStopSlotsPerApproach = kStopLanes / kApproaches;
inline constexpr std::size_t kInflowSlotsPerApproach = kInflowLanes / kApproaches;
inline constexpr std::size_t kExitSlotsPerLeg = kExitLanes / kApproaches;
inline constexpr double kMaxProximityLength = 1200.0;

enum class Approach { North = 0, East = 1, South = 2, West = 3 };
enum class Movement { Left = 0, Through = 1, Right = 2 };

std::string to_string(Approach a);
std::string to_string(Movement m);
Approach approach_from_string(const std::string& s);
Movement movement_from_string(const std::string& s);

/// NEMA phase (1..8) serving the through/right movements of an approach.
int through_phase(Approach a);
/// NEMA phase (1..8) serving the protected left of an approach.
int left_phase(Approach a);
int phase_for(Approach a, Movement m);
inline bool is_through_phase(int phase) { return phase % 2 == 0; }
/// Row index of a phase in 8-row matrices.
inline std::size_t phase_row(int phase) { return static_cast<std::size_t>(phase - 1); }
/// Leg a movement from `from` discharges into (right-hand traffic).
Approach receiving_leg(Approach from, Movement m);

struct StopLane {
  int slot = 0;
  Approach approach = Approach::North;
  Movement movement = Movement::Through;
  int phase = 2;
  double length = 200.0;  // 1-hop lane length, meters
};

struct InflowLane {
  int slot = 0;
  Approach approach = Approach::North;
  int position = 0;  // 0 = left-most
  int phase = 2;
  double length = 300.0;  // 2-hop lane length, meters
  bool present = true;
};

struct ExitLane {
  int slot = 0;
  Approach leg = Approach::North;
  int phase = 2;
  bool present = true;
};

/// Upstream lanes that define one phase's queue and proximity.
struct HopGroup {
  int phase = 0;
  std::vector<int> one_hop;  // stop-lane slots
  std::vector<int> two_hop;  // inflow-lane slots; for left phases the left-most lane only
};

/// How the raw turning-movement matrix reduces to per-approach (L, T, R).
struct TmcLayout {
  std::size_t size = 35;
  std::array<int, kApproaches> approach_row{0, 1, 2, 3};
  /// movement_columns[approach][movement] lists destination columns.
  std::array<std::array<std::vector<int>, 3>, kApproaches> movement_columns;
};

struct IntersectionTopology {
  std::string id;
  std::array<bool, kApproaches> approach_present{true, true, true, true};
  std::vector<StopLane> stop_lanes;      // present stop-bar lanes only
  std::vector<InflowLane> inflow_lanes;  // all 12 slots
  std::vector<ExitLane> exit_lanes;      // all 16 slots
  std::vector<HopGroup> hop_graph;       // one entry per phase 1..8
  std::vector<std::pair<int, int>> exit_edges;    // (stop slot, exit slot)
  std::vector<std::pair<int, int>> inflow_edges;  // (stop slot, inflow slot)
  std::size_t expected_exit_edges = 22;
  std::size_t expected_inflow_edges = 72;
  TmcLayout tmc;
  double free_speed = 13.9;    // m/s
  double vehicle_length = 5.0;  // m
  int junction_time_through = 2;  // s from stop bar to exit detector
  int junction_time_left = 3;

  const StopLane* stop_lane(int slot) const;
  const InflowLane& inflow_lane(int slot) const;
  const ExitLane& exit_lane(int slot) const;
  const HopGroup& hop_group(int phase) const;
  /// Present stop lanes of an approach serving a movement, ascending slot.
  std::vector<int> stop_lanes_for(Approach a, Movement m) const;
  bool movement_available(Approach a, Movement m) const;
};

/// Throws ConfigError describing the first violated invariant.
void validate(const IntersectionTopology& topo);

/// Per-approach lane layout for the standard four-leg family.
struct ApproachLayout {
  bool present = true;
  int left_lanes = 1;     // 0..2 (N/S approaches: 0..1)
  int through_lanes = 2;  // 0..3
  bool right_lane = true;
  double one_hop_length = 200.0;
  double two_hop_length = 300.0;
};

/// Builds a topology of the standard family: shared 22-edge exit template
/// and 72-edge inflow template over fixed slots, lanes present per layout.
IntersectionTopology make_standard_topology(const std::string& id, const std::array<ApproachLayout, kApproaches>& layout,
                                            double free_speed = 13.9);

/// Eight intersections of the standard family with varied geometry,
/// including two three-leg layouts.
std::vector<IntersectionTopology> standard_topology_set();

void to_json(nlohmann::json& j, const IntersectionTopology& t);
void from_json(const nlohmann::json& j, IntersectionTopology& t);

/// Accepts a single topology object, an array, or {"topologies": [...]}.
std::vector<IntersectionTopology> topologies_from_json(const nlohmann::json& j);
std::vector<IntersectionTopology> load_topologies(const std::string& path);
void save_topologies(const std::string& path, const std::vector<IntersectionTopology>& topologies);

}  // namespace mtdt::sim
