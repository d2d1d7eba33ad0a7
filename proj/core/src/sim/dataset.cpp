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

#include "mtdt/sim/dataset.hpp"

#include <cmath>

#include <nlohmann/json.hpp>

#include "mtdt/error.hpp"
#include "mtdt/sim/moe.hpp"

namespace mtdt::sim {

SimulationRecord run_scenario(const Scenario& s) {
  std::vector<VehicleTrace> traces;
  return run_scenario(s, traces);
}

SimulationRecord run_scenario(const Scenario& s, std::vector<VehicleTrace>& traces) {
  validate(s.window);
  SimulationOptions opt;
  opt.horizon = s.window.end() - 1;
  opt.record_from = s.window.start - 1;
  traces = simulate(s.topology, s.plan, s.drv, s.ratios, s.demand, s.seed, opt);

  SimulationRecord r;
  r.isc = s.topology.id;
  r.sig = render_signal(s.plan, s.window);
  r.tmc = s.ratios.raw;
  r.drv = s.drv;
  Waveforms w = extract_waveforms(traces, s.topology, s.window);
  r.stp = std::move(w.stp);
  r.ext = std::move(w.ext);
  r.inf = std::move(w.inf);
  r.ql = compute_queue_series(traces, s.topology, s.window);
  r.tt = compute_travel_time_hist(traces, s.topology, s.window);
  r.seed = s.seed;
  return r;
}

DatasetConfig default_dataset_config() {
  DatasetConfig c;
  c.topologies = standard_topology_set();
  return c;
}

Scenario sample_scenario(const DatasetConfig& config, std::uint64_t master_seed, std::size_t index) {
  if (config.topologies.empty()) throw ConfigError("dataset config lists no topologies");
  const int window_length = static_cast<int>(kBuckets) * kBucketSeconds;
  if (config.scenario_length - config.warmup < window_length)
    throw ConfigError("scenario_length leaves no room for a window after warmup");

  Scenario s;
  s.seed = derive_seed(master_seed, index);
  Rng rng(s.seed);
  s.topology = config.topologies[index % config.topologies.size()];
  s.plan = random_plan(s.topology, config.signal, rng);
  s.drv = random_behavior(config.behavior, rng);
  s.ratios = random_turn_ratios(s.topology, config.turns, rng);

  const double level = std::exp(rng.uniform(std::log(config.demand_lo), std::log(config.demand_hi)));
  const double minor = level * rng.uniform(config.minor_lo, config.minor_hi);
  // East and west legs carry the major street.
  s.demand = {minor, level, minor, level};

  const int slots = (config.scenario_length - window_length - config.warmup) / kBucketSeconds;
  s.window.start = config.warmup + kBucketSeconds * static_cast<int>(rng.uniform_int(0, slots));
  return s;
}

std::vector<SimulationRecord> generate_dataset(const DatasetConfig& config, std::size_t n_records,
                                               std::uint64_t master_seed) {
  if (config.topologies.empty()) throw ConfigError("dataset config lists no topologies");
  std::vector<SimulationRecord> out;
  out.reserve(n_records);
  for (std::size_t i = 0; i < n_records; ++i) out.push_back(run_scenario(sample_scenario(config, master_seed, i)));
  return out;
}

void to_json(nlohmann::json& j, const DatasetConfig& c) {
  const auto& s = c.signal;
  j = {{"topologies", c.topologies},
       {"signal",
        {{"min_cycle", s.min_cycle},
         {"max_cycle", s.max_cycle},
         {"min_barrier_fraction", s.min_barrier_fraction},
         {"max_barrier_fraction", s.max_barrier_fraction}}},
       {"behavior", {{"lo", c.behavior.lo}, {"hi", c.behavior.hi}}},
       {"turns",
        {{"left_lo", c.turns.left_lo},
         {"left_hi", c.turns.left_hi},
         {"right_lo", c.turns.right_lo},
         {"right_hi", c.turns.right_hi}}},
       {"demand_lo", c.demand_lo},
       {"demand_hi", c.demand_hi},
       {"minor_lo", c.minor_lo},
       {"minor_hi", c.minor_hi},
       {"scenario_length", c.scenario_length},
       {"warmup", c.warmup}};
}

void from_json(const nlohmann::json& j, DatasetConfig& c) {
  DatasetConfig out = default_dataset_config();
  if (j.contains("topologies")) out.topologies = topologies_from_json(j.at("topologies"));
  if (j.contains("signal")) {
    const auto& s = j.at("signal");
    out.signal.min_cycle = s.value("min_cycle", out.signal.min_cycle);
    out.signal.max_cycle = s.value("max_cycle", out.signal.max_cycle);
    out.signal.min_barrier_fraction = s.value("min_barrier_fraction", out.signal.min_barrier_fraction);
    out.signal.max_barrier_fraction = s.value("max_barrier_fraction", out.signal.max_barrier_fraction);
  }
  if (j.contains("behavior")) {
    const auto& b = j.at("behavior");
    if (b.contains("lo")) out.behavior.lo = b.at("lo").get<std::array<double, kBehaviorParams>>();
    if (b.contains("hi")) out.behavior.hi = b.at("hi").get<std::array<double, kBehaviorParams>>();
  }
  if (j.contains("turns")) {
    const auto& t = j.at("turns");
    out.turns.left_lo = t.value("left_lo", out.turns.left_lo);
    out.turns.left_hi = t.value("left_hi", out.turns.left_hi);
    out.turns.right_lo = t.value("right_lo", out.turns.right_lo);
    out.turns.right_hi = t.value("right_hi", out.turns.right_hi);
  }
  out.demand_lo = j.value("demand_lo", out.demand_lo);
  out.demand_hi = j.value("demand_hi", out.demand_hi);
  out.minor_lo = j.value("minor_lo", out.minor_lo);
  out.minor_hi = j.value("minor_hi", out.minor_hi);
  out.scenario_length = j.value("scenario_length", out.scenario_length);
  out.warmup = j.value("warmup", out.warmup);
  for (std::size_t k = 0; k < kBehaviorParams; ++k)
    if (out.behavior.lo[k] < 0.0 || out.behavior.hi[k] > kBehaviorMax || out.behavior.lo[k] > out.behavior.hi[k])
      throw ConfigError("behavior range for " + behavior_names()[k] + " must lie within [0, 30]");
  if (out.signal.min_cycle < kMinCycle || out.signal.max_cycle > kMaxCycle || out.signal.min_cycle > out.signal.max_cycle)
    throw ConfigError("cycle range must lie within [120, 240]");
  if (!(out.demand_lo > 0.0 && out.demand_lo <= out.demand_hi)) throw ConfigError("demand range must be positive");
  c = std::move(out);
}

}  // namespace mtdt::sim
