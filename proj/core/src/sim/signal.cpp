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

#include "mtdt/sim/signal.hpp"

#include <algorithm>
#include <cmath>

#include <nlohmann/json.hpp>

#include "mtdt/error.hpp"

namespace mtdt::sim {

namespace {

// Phases of each ring inside each barrier group, in service order.
constexpr int kRingGroups[2][2][2] = {{{1, 2}, {3, 4}}, {{5, 6}, {7, 8}}};

struct Interval {
  int start;  // seconds after cycle start
  int green_end;
  int yellow_end;
  int end;
};

Interval phase_interval(const SignalTimingPlan& plan, int phase) {
  for (int ring = 0; ring < 2; ++ring)
    for (int group = 0; group < 2; ++group) {
      int t = group == 0 ? 0 : plan.barrier_time;
      for (int k = 0; k < 2; ++k) {
        const int p = kRingGroups[ring][group][k];
        const PhaseTiming& pt = plan.phase(p);
        if (p == phase) return {t, t + pt.green, t + pt.green + pt.yellow, t + pt.duration()};
        t += pt.duration();
      }
    }
  throw ContractError("phase " + std::to_string(phase) + " out of range 1..8");
}

}  // namespace

void validate(const SignalTimingPlan& plan) {
  if (plan.cycle_length <= 0) throw ContractError("cycle_length must be positive");
  if (plan.barrier_time < 0 || plan.barrier_time > plan.cycle_length)
    throw ContractError("barrier_time must lie within the cycle");
  for (int p = 1; p <= 8; ++p) {
    const PhaseTiming& t = plan.phase(p);
    if (t.green < 0 || t.yellow < 0 || t.red < 0 || t.min_green < 0 || t.max_green < 0)
      throw ContractError("phase " + std::to_string(p) + ": durations must be non-negative");
    if (t.green > 0 && (t.green < t.min_green || (t.max_green > 0 && t.green > t.max_green)))
      throw ContractError("phase " + std::to_string(p) + ": green " + std::to_string(t.green) + " outside [" +
                          std::to_string(t.min_green) + ", " + std::to_string(t.max_green) + "]");
  }
  for (int ring = 0; ring < 2; ++ring)
    for (int group = 0; group < 2; ++group) {
      const int span = group == 0 ? plan.barrier_time : plan.cycle_length - plan.barrier_time;
      int used = 0;
      for (int k = 0; k < 2; ++k) used += plan.phase(kRingGroups[ring][group][k]).duration();
      if (used > span)
        throw ContractError("ring " + std::string(ring == 0 ? "A" : "B") + " group " + std::to_string(group + 1) +
                            " needs " + std::to_string(used) + " s but the barrier leaves " + std::to_string(span));
    }
}

SignalState state_at(const SignalTimingPlan& plan, int phase, int t) {
  const Interval iv = phase_interval(plan, phase);
  const int c = ((t - plan.offset) % plan.cycle_length + plan.cycle_length) % plan.cycle_length;
  if (c >= iv.start && c < iv.green_end) return SignalState::Green;
  if (c >= iv.green_end && c < iv.yellow_end) return SignalState::Yellow;
  return SignalState::Red;
}

void validate(const Window& w) {
  if (w.bucket <= 0 || w.length <= 0 || w.length % w.bucket != 0)
    throw ContractError("window of " + std::to_string(w.length) + " s does not divide into " +
                        std::to_string(w.bucket) + "-s buckets");
}

IntMatrix render_signal(const SignalTimingPlan& plan, const Window& window) {
  validate(plan);
  validate(window);
  IntMatrix sig(kPhases, window.buckets());
  for (int p = 1; p <= 8; ++p) {
    const Interval iv = phase_interval(plan, p);
    for (std::size_t b = 0; b < window.buckets(); ++b) {
      int green = 0;
      for (int s = 0; s < window.bucket; ++s) {
        const int t = window.start + static_cast<int>(b) * window.bucket + s;
        const int c = ((t - plan.offset) % plan.cycle_length + plan.cycle_length) % plan.cycle_length;
        green += (c >= iv.start && c < iv.green_end) ? 1 : 0;
      }
      sig(phase_row(p), b) = 2 * green > window.bucket ? 1 : 0;
    }
  }
  return sig;
}

SignalTimingPlan random_plan(const IntersectionTopology& topology, const SignalGenerationConfig& cfg, Rng& rng) {
  SignalTimingPlan plan;
  plan.cycle_length = static_cast<int>(rng.uniform_int(cfg.min_cycle, cfg.max_cycle));
  plan.offset = static_cast<int>(rng.uniform_int(0, plan.cycle_length - 1));

  auto served = [&](int p) { return !topology.hop_group(p).one_hop.empty(); };
  auto base = [&](int p) {
    PhaseTiming t;
    if (is_through_phase(p)) {
      t = {cfg.through_min_green, cfg.through_max_green, 0, cfg.through_yellow, cfg.through_red};
    } else {
      t = {cfg.left_min_green, cfg.left_max_green, 0, cfg.left_yellow, cfg.left_red};
    }
    return t;
  };
  auto clearance = [&](int p) { return served(p) ? base(p).yellow + base(p).red : 0; };

  // Smallest span each group needs so every served phase gets its min green.
  int need[2] = {0, 0};
  for (int ring = 0; ring < 2; ++ring)
    for (int group = 0; group < 2; ++group) {
      int n = 0;
      for (int k = 0; k < 2; ++k) {
        const int p = kRingGroups[ring][group][k];
        if (served(p)) n += base(p).min_green + clearance(p);
      }
      need[group] = std::max(need[group], n);
    }
  const double frac = rng.uniform(cfg.min_barrier_fraction, cfg.max_barrier_fraction);
  int barrier = static_cast<int>(std::lround(frac * plan.cycle_length));
  barrier = std::clamp(barrier, need[0], plan.cycle_length - need[1]);
  plan.barrier_time = barrier;

  for (int ring = 0; ring < 2; ++ring)
    for (int group = 0; group < 2; ++group) {
      const int span = group == 0 ? barrier : plan.cycle_length - barrier;
      const int left = kRingGroups[ring][group][0];
      const int thru = kRingGroups[ring][group][1];
      PhaseTiming lt = base(left), tt = base(thru);
      lt.yellow = served(left) ? lt.yellow : 0;
      lt.red = served(left) ? lt.red : 0;
      tt.yellow = served(thru) ? tt.yellow : 0;
      tt.red = served(thru) ? tt.red : 0;
      int remaining = span - lt.yellow - lt.red - tt.yellow - tt.red;
      if (served(left)) {
        const int reserve = served(thru) ? tt.min_green : 0;
        const int hi = std::max(lt.min_green, std::min(lt.max_green, std::min(remaining - reserve, span / 3)));
        lt.green = static_cast<int>(rng.uniform_int(lt.min_green, hi));
        remaining -= lt.green;
      }
      if (served(thru)) {
        tt.green = std::min(remaining, tt.max_green);
      } else if (served(left)) {
        lt.green = std::min(lt.green + remaining, lt.max_green);
      }
      plan.phase(left) = lt;
      plan.phase(thru) = tt;
    }
  validate(plan);
  return plan;
}

void to_json(nlohmann::json& j, const SignalTimingPlan& p) {
  j = {{"cycle_length", p.cycle_length}, {"offset", p.offset}, {"barrier_time", p.barrier_time}};
  auto phases = nlohmann::json::array();
  for (int k = 1; k <= 8; ++k) {
    const PhaseTiming& t = p.phase(k);
    phases.push_back({{"phase", k},
                      {"min_green", t.min_green},
                      {"max_green", t.max_green},
                      {"green", t.green},
                      {"yellow", t.yellow},
                      {"red", t.red}});
  }
  j["phases"] = phases;
}

void from_json(const nlohmann::json& j, SignalTimingPlan& p) {
  SignalTimingPlan out;
  out.cycle_length = j.at("cycle_length").get<int>();
  out.offset = j.value("offset", 0);
  out.barrier_time = j.at("barrier_time").get<int>();
  for (const auto& ph : j.at("phases")) {
    const int k = ph.at("phase").get<int>();
    if (k < 1 || k > 8) throw ContractError("phase number out of range 1..8");
    PhaseTiming& t = out.phase(k);
    t.min_green = ph.value("min_green", 0);
    t.max_green = ph.value("max_green", 0);
    t.green = ph.value("green", 0);
    t.yellow = ph.value("yellow", 0);
    t.red = ph.value("red", 0);
  }
  p = out;
}

}  // namespace mtdt::sim
