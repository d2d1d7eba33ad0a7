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

#include <array>
#include <cstddef>
#include <string>

#include <nlohmann/json_fwd.hpp>

#include "mtdt/matrix.hpp"
#include "mtdt/rng.hpp"
#include "mtdt/sim/topology.hpp"

namespace mtdt::sim {

inline constexpr std::size_t kBehaviorParams = 9;
inline constexpr double kBehaviorMax = 30.0;

/// Driver model parameters, in the fixed slot order of the `drv` vector.
struct DrivingBehavior {
  enum Slot : std::size_t {
    Accel,
    Decel,
    EmergencyDecel,
    MinGap,
    HeadwayTau,
    SpeedDevSigma,
    LcCooperative,
    LcSpeedGain,
    LcKeepRight,
  };
  std::array<double, kBehaviorParams> values{2.6, 4.5, 9.0, 2.5, 1.0, 0.1, 1.0, 1.0, 1.0};

  double operator[](Slot s) const { return values[s]; }
  double& operator[](Slot s) { return values[s]; }
  double accel() const { return values[Accel]; }
  double decel() const { return values[Decel]; }
  double emergency_decel() const { return values[EmergencyDecel]; }
  double min_gap() const { return values[MinGap]; }
  double headway_tau() const { return values[HeadwayTau]; }
  double speed_dev_sigma() const { return values[SpeedDevSigma]; }
  double lc_cooperative() const { return values[LcCooperative]; }
  double lc_speed_gain() const { return values[LcSpeedGain]; }
  double lc_keep_right() const { return values[LcKeepRight]; }

  friend bool operator==(const DrivingBehavior&, const DrivingBehavior&) = default;
};

const std::array<std::string, kBehaviorParams>& behavior_names();

/// Throws ContractError when a slot is outside [0, 30] or a rate that the
/// car-following model divides by is zero.
void validate(const DrivingBehavior& drv);

struct BehaviorRanges {
  std::array<double, kBehaviorParams> lo{1.0, 3.5, 7.0, 1.5, 0.8, 0.0, 0.0, 0.0, 0.0};
  std::array<double, kBehaviorParams> hi{3.0, 5.5, 9.0, 3.5, 1.8, 0.2, 1.0, 5.0, 5.0};
};

DrivingBehavior random_behavior(const BehaviorRanges& ranges, Rng& rng);

/// Turning-movement ratios: the raw row-stochastic matrix over the TMC
/// layout and the per-approach (left, through, right) split derived from it.
struct TurnRatios {
  RealMatrix raw;
  std::array<std::array<double, 3>, kApproaches> reduced{};
};

/// Sums raw row entries over each movement's columns and normalises.
/// Approaches with no mass on any movement get an all-zero triple.
std::array<std::array<double, 3>, kApproaches> reduce(const RealMatrix& raw, const TmcLayout& layout);

/// Checks raw rows sum to one and entries lie in [0,1]; throws ContractError.
void validate(const TurnRatios& ratios, const TmcLayout& layout);

struct TurnRatioRanges {
  double left_lo = 0.05, left_hi = 0.30;
  double right_lo = 0.05, right_hi = 0.25;
};

/// Random raw matrix: approach rows split mass over the columns of available
/// movements; rows with no originating traffic are self-loops.
TurnRatios random_turn_ratios(const IntersectionTopology& topology, const TurnRatioRanges& ranges, Rng& rng);

/// Builds ratios from explicit per-approach (L, T, R) splits, spreading each
/// movement evenly over its columns.
TurnRatios turn_ratios_from_split(const IntersectionTopology& topology,
                                  const std::array<std::array<double, 3>, kApproaches>& split);

void to_json(nlohmann::json& j, const DrivingBehavior& d);
void from_json(const nlohmann::json& j, DrivingBehavior& d);

}  // namespace mtdt::sim
