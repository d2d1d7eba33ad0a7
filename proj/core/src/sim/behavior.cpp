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

#include "mtdt/sim/behavior.hpp"

#include <cmath>

#include <nlohmann/json.hpp>

#include "mtdt/error.hpp"

namespace mtdt::sim {

const std::array<std::string, kBehaviorParams>& behavior_names() {
  static const std::array<std::string, kBehaviorParams> names{
      "accel",           "decel",          "emergency_decel", "min_gap",      "headway_tau",
      "speed_dev_sigma", "lc_cooperative", "lc_speed_gain",   "lc_keep_right"};
  return names;
}

void validate(const DrivingBehavior& drv) {
  for (std::size_t k = 0; k < kBehaviorParams; ++k) {
    const double v = drv.values[k];
    if (!std::isfinite(v) || v < 0.0 || v > kBehaviorMax)
      throw ContractError("drv." + behavior_names()[k] + " = " + std::to_string(v) + " outside [0, 30]");
  }
  if (drv.accel() <= 0.0 || drv.decel() <= 0.0 || drv.headway_tau() <= 0.0)
    throw ContractError("drv.accel, drv.decel and drv.headway_tau must be positive");
}

DrivingBehavior random_behavior(const BehaviorRanges& ranges, Rng& rng) {
  DrivingBehavior d;
  for (std::size_t k = 0; k < kBehaviorParams; ++k) d.values[k] = rng.uniform(ranges.lo[k], ranges.hi[k]);
  return d;
}

std::array<std::array<double, 3>, kApproaches> reduce(const RealMatrix& raw, const TmcLayout& layout) {
  require_shape(raw, layout.size, layout.size, "tmc");
  std::array<std::array<double, 3>, kApproaches> out{};
  for (std::size_t a = 0; a < kApproaches; ++a) {
    const auto row = static_cast<std::size_t>(layout.approach_row[a]);
    double total = 0.0;
    for (std::size_t m = 0; m < 3; ++m) {
      for (int c : layout.movement_columns[a][m]) out[a][m] += raw(row, static_cast<std::size_t>(c));
      total += out[a][m];
    }
    if (total <= 0.0) {
      out[a] = {0.0, 0.0, 0.0};
      continue;
    }
    for (double& v : out[a]) v /= total;
  }
  return out;
}

void validate(const TurnRatios& ratios, const TmcLayout& layout) {
  require_shape(ratios.raw, layout.size, layout.size, "tmc");
  for (std::size_t r = 0; r < ratios.raw.rows(); ++r) {
    double sum = 0.0;
    for (std::size_t c = 0; c < ratios.raw.cols(); ++c) {
      const double v = ratios.raw(r, c);
      if (!(v >= 0.0 && v <= 1.0)) throw ContractError("tmc entry outside [0,1] in row " + std::to_string(r));
      sum += v;
    }
    if (std::abs(sum - 1.0) > 1e-9) throw ContractError("tmc row " + std::to_string(r) + " does not sum to 1");
  }
}

namespace {

TurnRatios assemble(const IntersectionTopology& topology,
                    const std::array<std::array<double, 3>, kApproaches>& split,
                    const std::array<std::array<double, 3>, kApproaches>& column_share) {
  const TmcLayout& layout = topology.tmc;
  TurnRatios out;
  out.raw = RealMatrix(layout.size, layout.size);
  std::vector<bool> origin(layout.size, false);
  for (std::size_t a = 0; a < kApproaches; ++a) {
    std::array<double, 3> s{};
    double total = 0.0;
    for (std::size_t m = 0; m < 3; ++m) {
      const bool ok = topology.movement_available(static_cast<Approach>(a), static_cast<Movement>(m)) &&
                      !layout.movement_columns[a][m].empty();
      s[m] = ok ? std::max(0.0, split[a][m]) : 0.0;
      total += s[m];
    }
    if (total <= 0.0) continue;
    const auto row = static_cast<std::size_t>(layout.approach_row[a]);
    origin[row] = true;
    for (std::size_t m = 0; m < 3; ++m) {
      const auto& cols = layout.movement_columns[a][m];
      if (s[m] == 0.0) continue;
      const double mass = s[m] / total;
      // First column takes `share`, the rest split the remainder evenly.
      const double share = cols.size() == 1 ? 1.0 : column_share[a][m];
      for (std::size_t k = 0; k < cols.size(); ++k) {
        const double w = k == 0 ? share : (1.0 - share) / static_cast<double>(cols.size() - 1);
        out.raw(row, static_cast<std::size_t>(cols[k])) += mass * w;
      }
    }
    // Absorb rounding so the row sums to one exactly enough for validation.
    double sum = 0.0;
    for (std::size_t c = 0; c < layout.size; ++c) sum += out.raw(row, c);
    for (std::size_t c = 0; c < layout.size; ++c) out.raw(row, c) /= sum;
  }
  for (std::size_t r = 0; r < layout.size; ++r)
    if (!origin[r]) out.raw(r, r) = 1.0;
  out.reduced = reduce(out.raw, layout);
  return out;
}

}  // namespace

TurnRatios random_turn_ratios(const IntersectionTopology& topology, const TurnRatioRanges& ranges, Rng& rng) {
  std::array<std::array<double, 3>, kApproaches> split{};
  std::array<std::array<double, 3>, kApproaches> share{};
  for (std::size_t a = 0; a < kApproaches; ++a) {
    const double l = rng.uniform(ranges.left_lo, ranges.left_hi);
    const double r = rng.uniform(ranges.right_lo, ranges.right_hi);
    split[a] = {l, 1.0 - l - r, r};
    for (std::size_t m = 0; m < 3; ++m) share[a][m] = rng.uniform(0.3, 0.7);
  }
  return assemble(topology, split, share);
}

TurnRatios turn_ratios_from_split(const IntersectionTopology& topology,
                                  const std::array<std::array<double, 3>, kApproaches>& split) {
  std::array<std::array<double, 3>, kApproaches> share{};
  for (std::size_t a = 0; a < kApproaches; ++a)
    for (std::size_t m = 0; m < 3; ++m) {
      const auto n = topology.tmc.movement_columns[a][m].size();
      share[a][m] = n == 0 ? 1.0 : 1.0 / static_cast<double>(n);
    }
  return assemble(topology, split, share);
}

void to_json(nlohmann::json& j, const DrivingBehavior& d) { j = d.values; }

void from_json(const nlohmann::json& j, DrivingBehavior& d) {
  if (!j.is_array() || j.size() != kBehaviorParams)
    throw ShapeError("drv must be an array of " + std::to_string(kBehaviorParams) + " numbers");
  d.values = j.get<std::array<double, kBehaviorParams>>();
}

}  // namespace mtdt::sim
