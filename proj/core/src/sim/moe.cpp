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

#include "mtdt/sim/moe.hpp"

#include <algorithm>
#include <cmath>

namespace mtdt::sim {

namespace {

void bump(IntMatrix& m, int row, const Window& w, int t) {
  if (!w.contains(t) || row < 0 || static_cast<std::size_t>(row) >= m.rows()) return;
  m(static_cast<std::size_t>(row), w.bucket_of(t)) += 1;
}

void clamp_counts(IntMatrix& m) {
  for (int& v : m.values()) v = std::min(v, kWaveformMax);
}

}  // namespace

Waveforms extract_waveforms(const std::vector<VehicleTrace>& traces, const IntersectionTopology& topology,
                            const Window& window) {
  (void)topology;
  validate(window);
  Waveforms w{IntMatrix(kStopLanes, window.buckets()), IntMatrix(kExitLanes, window.buckets()),
              IntMatrix(kInflowLanes, window.buckets())};
  for (const VehicleTrace& tr : traces) {
    for (std::size_t k = 1; k < tr.samples.size(); ++k) {
      const TraceSample& prev = tr.samples[k - 1];
      const TraceSample& cur = tr.samples[k];
      if (cur.t != prev.t + 1 || cur.stage == prev.stage) continue;
      if (prev.stage == Stage::Upstream && cur.stage == Stage::Stop) bump(w.inf, prev.slot, window, cur.t);
      if (prev.stage == Stage::Stop && cur.stage == Stage::Junction) bump(w.stp, prev.slot, window, cur.t);
      if (prev.stage == Stage::Junction && cur.stage == Stage::Exit) bump(w.ext, cur.slot, window, cur.t);
    }
  }
  clamp_counts(w.stp);
  clamp_counts(w.ext);
  clamp_counts(w.inf);
  return w;
}

IntMatrix compute_queue_series(const std::vector<VehicleTrace>& traces, const IntersectionTopology& topology,
                               const Window& window, double stop_speed_threshold) {
  validate(window);
  const std::size_t nb = window.buckets();
  RealMatrix stop_q(kStopLanes, nb);
  RealMatrix up_q(kInflowLanes, nb);
  for (const VehicleTrace& tr : traces)
    for (const TraceSample& s : tr.samples) {
      if (!window.contains(s.t) || s.speed >= stop_speed_threshold) continue;
      const auto lane = static_cast<std::size_t>(s.slot);
      const std::size_t b = window.bucket_of(s.t);
      if (s.stage == Stage::Stop) {
        stop_q(lane, b) = std::max(stop_q(lane, b), s.distance);
      } else if (s.stage == Stage::Upstream) {
        up_q(lane, b) = std::max(up_q(lane, b), s.distance);
      }
    }
  IntMatrix ql(kPhases, nb);
  for (int p = 1; p <= static_cast<int>(kPhases); ++p) {
    const HopGroup& g = topology.hop_group(p);
    for (std::size_t b = 0; b < nb; ++b) {
      double a = 0.0, c = 0.0;
      for (int s : g.one_hop) a = std::max(a, stop_q(static_cast<std::size_t>(s), b));
      for (int s : g.two_hop) c = std::max(c, up_q(static_cast<std::size_t>(s), b));
      ql(phase_row(p), b) = static_cast<int>(std::min(kMaxProximityLength, std::round(a + c)));
    }
  }
  return ql;
}

IntMatrix compute_travel_time_hist(const std::vector<VehicleTrace>& traces, const IntersectionTopology& topology,
                                   const Window& window) {
  (void)topology;
  IntMatrix tt(kPhases, kTravelTimeBuckets);
  for (const VehicleTrace& tr : traces) {
    if (!tr.completed() || !window.contains(*tr.exit_time)) continue;
    const int elapsed = std::max(0, *tr.exit_time - tr.entry_time);
    const auto b = std::min<std::size_t>(kTravelTimeBuckets - 1, static_cast<std::size_t>(elapsed / kBucketSeconds));
    tt(phase_row(tr.phase), b) += 1;
  }
  return tt;
}

}  // namespace mtdt::sim
