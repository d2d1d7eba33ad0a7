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

#include "mtdt/sim/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>

#include "mtdt/error.hpp"

namespace mtdt::sim {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Vehicle {
  int id = 0;
  Approach approach = Approach::North;
  Movement movement = Movement::Through;
  Stage stage = Stage::Upstream;
  int slot = 0;          // lane of the current stage
  int stop_slot = -1;    // chosen when the vehicle heads the 2-hop lane
  int junction_left = 0;
  double pos = 0.0;      // front bumper to the end of the current lane
  double speed = 0.0;
  double desired = 0.0;
  bool alive = true;
};

struct Pending {
  Movement movement;
  int inflow_slot;
};

class Simulation {
 public:
  Simulation(const IntersectionTopology& topo, const SignalTimingPlan& plan, const DrivingBehavior& drv,
             const TurnRatios& ratios, const DemandRates& demand, std::uint64_t seed, const SimulationOptions& opt)
      : topo_(topo), plan_(plan), drv_(drv), ratios_(ratios), demand_(demand), rng_(seed), opt_(opt) {
    upstream_.resize(kInflowLanes);
    stop_.resize(kStopLanes);
    token_.assign(kStopLanes, 1.0);
    exit_of_.assign(kStopLanes, -1);
    for (const auto& [s, e] : topo_.exit_edges) exit_of_[static_cast<std::size_t>(s)] = e;
    headway_ = saturation_headway(topo_, drv_);
  }

  std::vector<VehicleTrace> run() {
    for (int t = 1; t <= opt_.horizon; ++t) step(t);
    return std::move(traces_);
  }

 private:
  // Next-second speed under the safe-speed rule; `gap` is the usable space
  // ahead and `leader_speed` the speed of whatever bounds it.
  double follow(const Vehicle& v, double gap, double leader_speed) const {
    const double g = std::max(0.0, gap);
    double safe = kInf;
    if (std::isfinite(g)) {
      const double tau = drv_.headway_tau();
      safe = leader_speed + (g - leader_speed * tau) / ((v.speed + leader_speed) / (2.0 * drv_.decel()) + tau);
    }
    return std::max(0.0, std::min({v.speed + drv_.accel(), v.desired, safe, g}));
  }

  double stop_length(int slot) const { return topo_.stop_lane(slot)->length; }
  double inflow_length(int slot) const { return topo_.inflow_lane(slot).length; }

  void step(int t) {
    for (double& k : token_) k = std::min(1.0, k + 1.0 / headway_);
    advance_junction();
    for (std::size_t s = 0; s < kStopLanes; ++s)
      if (!stop_[s].empty()) advance_stop_lane(static_cast<int>(s), t);
    for (std::size_t s = 0; s < kInflowLanes; ++s)
      if (!upstream_[s].empty()) advance_upstream_lane(static_cast<int>(s));
    spawn(t);
    if (t >= opt_.record_from) sample(t);
    std::erase_if(active_, [&](int id) { return !vehicles_[static_cast<std::size_t>(id)].alive; });
  }

  void advance_junction() {
    for (int id : active_) {
      Vehicle& v = vehicles_[static_cast<std::size_t>(id)];
      if (v.stage == Stage::Exit) {
        v.alive = false;
      } else if (v.stage == Stage::Junction && --v.junction_left <= 0) {
        v.stage = Stage::Exit;
      }
    }
  }

  void advance_stop_lane(int slot, int t) {
    auto& lane = stop_[static_cast<std::size_t>(slot)];
    const StopLane& info = *topo_.stop_lane(slot);
    const SignalState state = state_at(plan_, info.phase, t);
    const Vehicle* leader = nullptr;
    const std::deque<int> order = lane;
    for (int id : order) {
      Vehicle& v = vehicles_[static_cast<std::size_t>(id)];
      if (leader == nullptr) {
        bool go = false;
        if (state == SignalState::Green) {
          go = token_[static_cast<std::size_t>(slot)] >= 1.0 - 1e-12;
        } else if (state == SignalState::Yellow) {
          go = v.speed * v.speed / (2.0 * drv_.decel()) > v.pos;
        }
        v.speed = go ? follow(v, kInf, 0.0) : follow(v, v.pos, 0.0);
        // A vehicle held at the line stops on it, it does not cross.
        v.pos -= v.speed;
        if (go && v.pos <= 0.0) {
          if (state == SignalState::Green) token_[static_cast<std::size_t>(slot)] -= 1.0;
          lane.pop_front();
          v.stage = Stage::Junction;
          v.slot = exit_of_[static_cast<std::size_t>(slot)];
          v.junction_left = v.movement == Movement::Left ? topo_.junction_time_left : topo_.junction_time_through;
          v.pos = 0.0;
          traces_[static_cast<std::size_t>(id)].exit_time = t;
          continue;
        }
      } else {
        const double gap = v.pos - (leader->pos + topo_.vehicle_length) - drv_.min_gap();
        v.speed = follow(v, gap, leader->speed);
        v.pos -= v.speed;
      }
      leader = &v;
    }
  }

  int choose_stop_lane(const Vehicle& v) {
    const std::vector<int> options = topo_.stop_lanes_for(v.approach, v.movement);
    if (options.empty()) throw ContractError("vehicle routed to an unavailable movement");
    const double gain = drv_.lc_speed_gain();
    if (rng_.bernoulli(gain / (1.0 + gain))) {
      int best = options.front();
      for (int s : options)
        if (stop_[static_cast<std::size_t>(s)].size() < stop_[static_cast<std::size_t>(best)].size()) best = s;
      return best;
    }
    return options[static_cast<std::size_t>(rng_.uniform_int(0, static_cast<std::int64_t>(options.size()) - 1))];
  }

  void advance_upstream_lane(int slot) {
    auto& lane = upstream_[static_cast<std::size_t>(slot)];
    const Vehicle* leader = nullptr;
    const std::deque<int> order = lane;
    const double merge_gap = drv_.min_gap() * (2.0 - std::clamp(drv_.lc_cooperative(), 0.0, 1.0));
    for (int id : order) {
      Vehicle& v = vehicles_[static_cast<std::size_t>(id)];
      if (leader == nullptr) {
        if (v.stop_slot < 0) v.stop_slot = choose_stop_lane(v);
        const auto& target = stop_[static_cast<std::size_t>(v.stop_slot)];
        const double len = stop_length(v.stop_slot);
        if (target.empty()) {
          v.speed = follow(v, kInf, 0.0);
        } else {
          const Vehicle& tail = vehicles_[static_cast<std::size_t>(target.back())];
          const double gap = v.pos + len - (tail.pos + topo_.vehicle_length) - merge_gap;
          v.speed = follow(v, gap, tail.speed);
        }
        v.pos -= v.speed;
        if (v.pos <= 0.0) {
          lane.pop_front();
          v.stage = Stage::Stop;
          v.slot = v.stop_slot;
          v.pos += len;
          stop_[static_cast<std::size_t>(v.stop_slot)].push_back(id);
          continue;
        }
      } else {
        const double gap = v.pos - (leader->pos + topo_.vehicle_length) - drv_.min_gap();
        v.speed = follow(v, gap, leader->speed);
        v.pos -= v.speed;
      }
      leader = &v;
    }
  }

  Pending draw_pending(Approach a) {
    const auto& split = ratios_.reduced[static_cast<std::size_t>(a)];
    const double u = rng_.uniform();
    Movement m = Movement::Right;
    if (u < split[0]) {
      m = Movement::Left;
    } else if (u < split[0] + split[1]) {
      m = Movement::Through;
    }
    const int base = static_cast<int>(a) * static_cast<int>(kInflowSlotsPerApproach);
    int position = 0;
    if (m == Movement::Right) {
      position = 2;
    } else if (m == Movement::Through) {
      const double w[3] = {0.25, 1.0, 1.0 + 0.2 * drv_.lc_keep_right()};
      const double r = rng_.uniform() * (w[0] + w[1] + w[2]);
      position = r < w[0] ? 0 : (r < w[0] + w[1] ? 1 : 2);
    }
    return {m, base + position};
  }

  void spawn(int t) {
    for (std::size_t a = 0; a < kApproaches; ++a) {
      const auto& split = ratios_.reduced[a];
      if (!topo_.approach_present[a] || split[0] + split[1] + split[2] <= 0.0) continue;
      const int arrivals = rng_.poisson(demand_[a]);
      for (int k = 0; k < arrivals; ++k) backlog_[a].push_back(draw_pending(static_cast<Approach>(a)));
      std::array<bool, kInflowLanes> used{};
      while (!backlog_[a].empty()) {
        const Pending p = backlog_[a].front();
        const auto lane_index = static_cast<std::size_t>(p.inflow_slot);
        if (used[lane_index]) break;
        auto& lane = upstream_[lane_index];
        const double len = inflow_length(p.inflow_slot);
        Vehicle v;
        v.id = static_cast<int>(vehicles_.size());
        v.approach = static_cast<Approach>(a);
        v.movement = p.movement;
        v.slot = p.inflow_slot;
        v.pos = len;
        v.desired = topo_.free_speed * std::clamp(1.0 + drv_.speed_dev_sigma() * rng_.normal(), 0.5, 1.5);
        v.speed = v.desired;
        if (!lane.empty()) {
          const Vehicle& tail = vehicles_[static_cast<std::size_t>(lane.back())];
          const double gap = len - (tail.pos + topo_.vehicle_length) - drv_.min_gap();
          if (gap < 0.0) break;
          const double tau = drv_.headway_tau();
          const double safe = tail.speed + (gap - tail.speed * tau) / ((v.desired + tail.speed) / (2.0 * drv_.decel()) + tau);
          v.speed = std::max(0.0, std::min({v.desired, safe, gap}));
        }
        backlog_[a].pop_front();
        used[lane_index] = true;
        lane.push_back(v.id);
        VehicleTrace trace;
        trace.id = v.id;
        trace.approach = v.approach;
        trace.movement = v.movement;
        trace.phase = phase_for(v.approach, v.movement);
        trace.entry_time = t;
        traces_.push_back(std::move(trace));
        vehicles_.push_back(v);
        active_.push_back(v.id);
      }
    }
  }

  void sample(int t) {
    for (int id : active_) {
      const Vehicle& v = vehicles_[static_cast<std::size_t>(id)];
      if (!v.alive) continue;
      double distance = 0.0;
      if (v.stage == Stage::Upstream) {
        distance = std::clamp(v.pos + topo_.vehicle_length, 0.0, inflow_length(v.slot));
      } else if (v.stage == Stage::Stop) {
        distance = std::clamp(v.pos + topo_.vehicle_length, 0.0, stop_length(v.slot));
      }
      traces_[static_cast<std::size_t>(id)].samples.push_back({t, v.stage, v.slot, distance, v.speed});
    }
  }

  const IntersectionTopology& topo_;
  const SignalTimingPlan& plan_;
  const DrivingBehavior& drv_;
  const TurnRatios& ratios_;
  DemandRates demand_;
  Rng rng_;
  SimulationOptions opt_;
  double headway_ = 2.0;

  std::vector<Vehicle> vehicles_;
  std::vector<VehicleTrace> traces_;
  std::vector<int> active_;
  std::vector<std::deque<int>> upstream_;
  std::vector<std::deque<int>> stop_;
  std::vector<double> token_;
  std::vector<int> exit_of_;
  std::array<std::deque<Pending>, kApproaches> backlog_;
};

}  // namespace

double saturation_headway(const IntersectionTopology& topology, const DrivingBehavior& drv) {
  return drv.headway_tau() + (topology.vehicle_length + drv.min_gap()) / topology.free_speed;
}

std::vector<VehicleTrace> simulate(const IntersectionTopology& topology, const SignalTimingPlan& plan,
                                   const DrivingBehavior& drv, const TurnRatios& ratios, const DemandRates& demand,
                                   std::uint64_t seed, const SimulationOptions& options) {
  validate(plan);
  validate(drv);
  for (double d : demand)
    if (!(d >= 0.0) || !std::isfinite(d)) throw ContractError("demand rate must be a finite non-negative number");
  return Simulation(topology, plan, drv, ratios, demand, seed, options).run();
}

}  // namespace mtdt::sim
