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

// Ring-and-barrier signal timing with a common cycle.
//
// Ring A runs phases 1,2 before the barrier and 3,4 after it; ring B runs
// 5,6 then 7,8. Each phase occupies green, yellow and red (clearance)
// seconds in sequence inside its barrier group. Both rings cross the barrier
// at the same instant.

#include <array>
#include <cstdint>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "mtdt/matrix.hpp"
#include "mtdt/rng.hpp"
#include "mtdt/sim/topology.hpp"

namespace mtdt::sim {

inline constexpr int kBucketSeconds = 5;
inline constexpr std::size_t kBuckets = 80;
inline constexpr int kMinCycle = 120;
inline constexpr int kMaxCycle = 240;

struct PhaseTiming {
  int min_green = 0;
  int max_green = 0;
  int green = 0;
  int yellow = 0;
  int red = 0;

  int duration() const { return green + yellow + red; }
  friend bool operator==(const PhaseTiming&, const PhaseTiming&) = default;
};

struct SignalTimingPlan {
  int cycle_length = 160;
  int offset = 0;
  int barrier_time = 80;  // seconds after cycle start when group 2 begins
  std::array<PhaseTiming, kPhases> phases{};

  PhaseTiming& phase(int p) { return phases[phase_row(p)]; }
  const PhaseTiming& phase(int p) const { return phases[phase_row(p)]; }
  friend bool operator==(const SignalTimingPlan&, const SignalTimingPlan&) = default;
};

enum class SignalState { Green, Yellow, Red };

/// Throws ContractError on structural violations (group overruns, negative
/// durations, green outside [min, max] for served phases).
void validate(const SignalTimingPlan& plan);

/// Indication of `phase` at absolute second `t`.
SignalState state_at(const SignalTimingPlan& plan, int phase, int t);

/// Observation window: `length` seconds starting at absolute second `start`,
/// split into buckets of `bucket` seconds.
struct Window {
  int start = 0;
  int length = static_cast<int>(kBuckets) * kBucketSeconds;
  int bucket = kBucketSeconds;

  int end() const { return start + length; }
  std::size_t buckets() const { return static_cast<std::size_t>(length / bucket); }
  bool contains(int t) const { return t >= start && t < end(); }
  std::size_t bucket_of(int t) const { return static_cast<std::size_t>((t - start) / bucket); }
};

/// Throws ContractError unless the window splits into whole buckets.
void validate(const Window& w);

/// 8 x buckets binary matrix: 1 where the phase is green for the majority of
/// the bucket's seconds.
IntMatrix render_signal(const SignalTimingPlan& plan, const Window& window);

/// Timing-sheet constants and ranges used when drawing random plans.
struct SignalGenerationConfig {
  int min_cycle = kMinCycle;
  int max_cycle = kMaxCycle;
  double min_barrier_fraction = 0.50;
  double max_barrier_fraction = 0.95;
  int left_min_green = 5, left_max_green = 40, left_yellow = 3, left_red = 1;
  int through_min_green = 8, through_max_green = 200, through_yellow = 4, through_red = 2;
};

/// Random common cycle, offset and barrier; left greens drawn per ring and the
/// through phase takes the remainder of its barrier group. Phases with no
/// lanes in `topology` are skipped (zero duration).
SignalTimingPlan random_plan(const IntersectionTopology& topology, const SignalGenerationConfig& config, Rng& rng);

void to_json(nlohmann::json& j, const SignalTimingPlan& p);
void from_json(const nlohmann::json& j, SignalTimingPlan& p);

}  // namespace mtdt::sim
