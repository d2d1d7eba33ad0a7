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

// Brute-force reference computations over vehicle traces and signal plans.
// They scan time second by second and avoid the grids and interval tables
// used by the production code.

#include <algorithm>
#include <cmath>
#include <map>
#include <vector>

#include "mtdt/matrix.hpp"
#include "mtdt/sim/signal.hpp"
#include "mtdt/sim/simulator.hpp"
#include "mtdt/sim/topology.hpp"

namespace mtdt::testing {

using sim::IntersectionTopology;
using sim::SignalTimingPlan;
using sim::Stage;
using sim::VehicleTrace;
using sim::Window;

/// Green phase per ring for every second of one cycle, built by walking the
/// ring sequences; 0 marks "no green".
inline std::vector<std::array<int, 2>> green_schedule(const SignalTimingPlan& plan) {
  std::vector<std::array<int, 2>> out(static_cast<std::size_t>(plan.cycle_length), {0, 0});
  const int rings[2][4] = {{1, 2, 3, 4}, {5, 6, 7, 8}};
  for (int r = 0; r < 2; ++r) {
    int c = 0;
    for (int k = 0; k < 4; ++k) {
      if (k == 2) c = plan.barrier_time;
      const auto& t = plan.phase(rings[r][k]);
      for (int s = 0; s < t.green; ++s) out[static_cast<std::size_t>(c + s)][static_cast<std::size_t>(r)] = rings[r][k];
      c += t.green + t.yellow + t.red;
    }
  }
  return out;
}

inline IntMatrix majority_signal(const SignalTimingPlan& plan, const Window& w) {
  const auto sched = green_schedule(plan);
  IntMatrix sig(8, w.buckets());
  for (std::size_t b = 0; b < w.buckets(); ++b) {
    std::array<int, 9> votes{};
    for (int s = 0; s < w.bucket; ++s) {
      const int t = w.start + static_cast<int>(b) * w.bucket + s;
      int c = (t - plan.offset) % plan.cycle_length;
      if (c < 0) c += plan.cycle_length;
      for (int g : sched[static_cast<std::size_t>(c)])
        if (g != 0) ++votes[static_cast<std::size_t>(g)];
    }
    for (int p = 1; p <= 8; ++p) sig(static_cast<std::size_t>(p - 1), b) = votes[static_cast<std::size_t>(p)] * 2 > w.bucket;
  }
  return sig;
}

/// Per-second queue tracker: each second, the longest stopped tail over the
/// phase's 1-hop lanes and over its 2-hop lanes; per bucket, the max of each
/// then their sum.
inline IntMatrix brute_force_queue(const std::vector<VehicleTrace>& traces, const IntersectionTopology& topo,
                                   const Window& w, double threshold = 0.1) {
  std::map<int, std::vector<const sim::TraceSample*>> by_second;
  for (const auto& tr : traces)
    for (const auto& s : tr.samples) by_second[s.t].push_back(&s);
  IntMatrix out(8, w.buckets());
  for (int p = 1; p <= 8; ++p) {
    const auto& g = topo.hop_group(p);
    for (std::size_t b = 0; b < w.buckets(); ++b) {
      double a_max = 0.0, b_max = 0.0;
      for (int s = 0; s < w.bucket; ++s) {
        const int t = w.start + static_cast<int>(b) * w.bucket + s;
        double a_t = 0.0, b_t = 0.0;
        for (const auto* smp : by_second[t]) {
          if (smp->speed >= threshold) continue;
          const bool one = smp->stage == Stage::Stop &&
                           std::find(g.one_hop.begin(), g.one_hop.end(), smp->slot) != g.one_hop.end();
          const bool two = smp->stage == Stage::Upstream &&
                           std::find(g.two_hop.begin(), g.two_hop.end(), smp->slot) != g.two_hop.end();
          if (one) a_t = std::max(a_t, smp->distance);
          if (two) b_t = std::max(b_t, smp->distance);
        }
        a_max = std::max(a_max, a_t);
        b_max = std::max(b_max, b_t);
      }
      out(static_cast<std::size_t>(p - 1), b) = static_cast<int>(std::min(1200.0, std::round(a_max + b_max)));
    }
  }
  return out;
}

/// Tracks each vehicle second by second from its samples alone: entry is the
/// first second seen on a 2-hop lane, exit the first second seen past the
/// stop bar. Requires traces recorded from t = 1.
inline IntMatrix brute_force_travel_time(const std::vector<VehicleTrace>& traces, const Window& w) {
  IntMatrix out(8, 200);
  for (const auto& tr : traces) {
    int entry = -1, exit = -1;
    for (const auto& s : tr.samples) {
      if (entry < 0 && s.stage == Stage::Upstream) entry = s.t;
      if (exit < 0 && (s.stage == Stage::Junction || s.stage == Stage::Exit)) exit = s.t;
    }
    if (entry < 0 || exit < 0 || exit < w.start || exit >= w.end()) continue;
    const int bucket = std::min(199, (exit - entry) / 5);
    out(static_cast<std::size_t>(tr.phase - 1), static_cast<std::size_t>(bucket)) += 1;
  }
  return out;
}

}  // namespace mtdt::testing
