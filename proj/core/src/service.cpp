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

#include "mtdt/service.hpp"

#include <chrono>
#include <cmath>

#include "mtdt/error.hpp"
#include "mtdt/graph.hpp"
#include "mtdt/sim/moe.hpp"

namespace mtdt::service {

using nlohmann::json;

namespace {

constexpr double kMaxDemand = 1.0;  // veh/s per approach
constexpr int kMaxWindowStart = 2000;

std::string format_bound(double v) {
  return v == std::floor(v) ? std::to_string(static_cast<long long>(v)) : json(v).dump();
}

bool is_number(const json& v) { return v.is_number() && std::isfinite(v.get<double>()); }

void check_range(std::vector<FieldError>& errors, const std::string& field, const json& v, double lo, double hi) {
  if (!is_number(v))
    errors.push_back({field, "must be a number"});
  else if (v.get<double>() < lo || v.get<double>() > hi)
    errors.push_back({field, "must lie within [" + format_bound(lo) + ", " + format_bound(hi) + "], got " + v.dump()});
}

std::array<std::array<double, 3>, sim::kApproaches> default_turns() {
  std::array<std::array<double, 3>, sim::kApproaches> t{};
  t.fill({0.15, 0.75, 0.10});
  return t;
}

json tensor_json(const tensor::Tensor& t) {
  json rows = json::array();
  for (std::size_t r = 0; r < t.dim(0); ++r) {
    json row = json::array();
    for (std::size_t c = 0; c < t.dim(1); ++c) row.push_back(t.at(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

double elapsed_ms(std::chrono::steady_clock::time_point since) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - since).count();
}

}  // namespace

Response error_response(int status, const std::string& message, const std::vector<FieldError>& fields) {
  json body = {{"error", message}};
  if (!fields.empty()) {
    json list = json::array();
    for (const auto& f : fields) list.push_back({{"field", f.field}, {"message", f.message}});
    body["fields"] = list;
  }
  return {status, body};
}

ParseResult parse_request(const json& body, std::span<const sim::IntersectionTopology> topologies) {
  ParseResult out;
  auto& errors = out.errors;
  if (!body.is_object()) {
    errors.push_back({"", "request body must be a JSON object"});
    return out;
  }
  PredictRequest r;

  const sim::IntersectionTopology* topo = nullptr;
  if (!body.contains("topology") || !body["topology"].is_string()) {
    errors.push_back({"topology", "required string naming a known intersection"});
  } else {
    r.topology = body["topology"].get<std::string>();
    for (const auto& t : topologies)
      if (t.id == r.topology) topo = &t;
    if (!topo) errors.push_back({"topology", "unknown intersection '" + r.topology + "'"});
  }

  if (!body.contains("plan") || !body["plan"].is_object()) {
    errors.push_back({"plan", "required signal timing plan object"});
  } else {
    const json& plan = body["plan"];
    const std::size_t before = errors.size();
    if (plan.contains("cycle_length"))
      check_range(errors, "plan.cycle_length", plan["cycle_length"], sim::kMinCycle, sim::kMaxCycle);
    if (errors.size() == before) {
      try {
        r.plan = plan.get<sim::SignalTimingPlan>();
        sim::validate(r.plan);
      } catch (const std::exception& e) {
        errors.push_back({"plan", e.what()});
      }
    }
  }

  if (body.contains("drv")) {
    const json& d = body["drv"];
    if (!d.is_array() || d.size() != sim::kBehaviorParams) {
      errors.push_back({"drv", "must be an array of " + std::to_string(sim::kBehaviorParams) + " numbers"});
    } else {
      const std::size_t before = errors.size();
      for (std::size_t k = 0; k < d.size(); ++k) check_range(errors, "drv[" + std::to_string(k) + "]", d[k], 0.0, 30.0);
      if (errors.size() == before) {
        for (std::size_t k = 0; k < d.size(); ++k) r.drv.values[k] = d[k].get<double>();
        try {
          sim::validate(r.drv);
        } catch (const std::exception& e) {
          errors.push_back({"drv", e.what()});
        }
      }
    }
  }

  r.turns = default_turns();
  if (body.contains("turns")) {
    const json& t = body["turns"];
    if (!t.is_array() || t.size() != sim::kApproaches) {
      errors.push_back({"turns", "must be 4 rows (N, E, S, W) of [left, through, right]"});
    } else {
      for (std::size_t a = 0; a < sim::kApproaches; ++a) {
        const std::string field = "turns[" + std::to_string(a) + "]";
        if (!t[a].is_array() || t[a].size() != 3) {
          errors.push_back({field, "must be [left, through, right]"});
          continue;
        }
        for (std::size_t m = 0; m < 3; ++m) {
          const std::size_t before = errors.size();
          check_range(errors, field + "[" + std::to_string(m) + "]", t[a][m], 0.0, 1.0);
          if (errors.size() == before) r.turns[a][m] = t[a][m].get<double>();
        }
      }
    }
  }

  r.demand = {0.10, 0.20, 0.10, 0.20};
  if (body.contains("demand")) {
    const json& d = body["demand"];
    if (!d.is_array() || d.size() != sim::kApproaches) {
      errors.push_back({"demand", "must be 4 arrival rates in veh/s (N, E, S, W)"});
    } else {
      for (std::size_t a = 0; a < sim::kApproaches; ++a) {
        const std::size_t before = errors.size();
        check_range(errors, "demand[" + std::to_string(a) + "]", d[a], 0.0, kMaxDemand);
        if (errors.size() == before) r.demand[a] = d[a].get<double>();
      }
    }
  }

  if (body.contains("window_start")) {
    const json& w = body["window_start"];
    if (!w.is_number_integer() || w.get<long long>() < 0 || w.get<long long>() > kMaxWindowStart ||
        w.get<long long>() % sim::kBucketSeconds != 0)
      errors.push_back({"window_start", "must be a multiple of 5 within [0, 2000]"});
    else
      r.window_start = w.get<int>();
  }

  if (body.contains("seed")) {
    const json& s = body["seed"];
    if (!s.is_number_unsigned() && !(s.is_number_integer() && s.get<long long>() >= 0))
      errors.push_back({"seed", "must be a non-negative integer"});
    else
      r.seed = s.get<std::uint64_t>();
  }

  if (body.contains("include_truth")) {
    if (!body["include_truth"].is_boolean())
      errors.push_back({"include_truth", "must be a boolean"});
    else
      r.include_truth = body["include_truth"].get<bool>();
  }

  if (body.contains("stp") && !body["stp"].is_null()) {
    const json& s = body["stp"];
    bool ok = s.is_array() && s.size() == sim::kStopLanes;
    for (std::size_t l = 0; ok && l < s.size(); ++l) ok = s[l].is_array() && s[l].size() == sim::kBuckets;
    if (!ok) {
      errors.push_back({"stp", "must be a 48 x 80 array of counts"});
    } else {
      IntMatrix m(sim::kStopLanes, sim::kBuckets);
      for (std::size_t l = 0; l < sim::kStopLanes && ok; ++l)
        for (std::size_t t = 0; t < sim::kBuckets; ++t) {
          const json& v = s[l][t];
          if (!v.is_number_integer() || v.get<long long>() < 0 || v.get<long long>() > sim::kWaveformMax) {
            errors.push_back({"stp[" + std::to_string(l) + "][" + std::to_string(t) + "]",
                              "must be an integer count within [0, 8]"});
            ok = false;
            break;
          }
          m(l, t) = v.get<int>();
        }
      if (ok) r.stp = std::move(m);
    }
  }

  if (topo && errors.empty()) {
    try {
      sim::validate(sim::turn_ratios_from_split(*topo, r.turns), topo->tmc);
    } catch (const std::exception& e) {
      errors.push_back({"turns", e.what()});
    }
  }
  if (errors.empty()) out.request = std::move(r);
  return out;
}

sim::Scenario to_scenario(const PredictRequest& r, const sim::IntersectionTopology& topology) {
  sim::Scenario s;
  s.topology = topology;
  s.plan = r.plan;
  s.drv = r.drv;
  s.ratios = sim::turn_ratios_from_split(topology, r.turns);
  s.demand = r.demand;
  s.window.start = r.window_start;
  s.seed = r.seed;
  return s;
}

// ---------------------------------------------------------------------------
// Service

Service::Service(std::vector<sim::IntersectionTopology> topologies, std::optional<model::Checkpoint> checkpoint)
    : topologies_(std::move(topologies)), checkpoint_(std::move(checkpoint)) {
  if (checkpoint_) {
    checkpoint_id_ = checkpoint_->id();
    for (const auto& t : checkpoint_->topologies) {
      bool known = false;
      for (const auto& have : topologies_) known = known || have.id == t.id;
      if (!known) topologies_.push_back(t);
    }
  }
  if (topologies_.empty()) throw ConfigError("service needs at least one topology");
}

const sim::IntersectionTopology& Service::topology(const std::string& id) const {
  for (const auto& t : topologies_)
    if (t.id == id) return t;
  throw ConfigError("unknown intersection '" + id + "'");
}

namespace {

json phase_views(const model::PhaseMap& map, const std::optional<tensor::Tensor>& ext,
                 const std::optional<tensor::Tensor>& inf, const tensor::Tensor& stp) {
  json v = {{"stp", tensor_json(model::aggregate_to_phases(stp, map.stop_row))}};
  v["ext"] = ext ? tensor_json(model::aggregate_to_phases(*ext, map.exit_row)) : json(nullptr);
  v["inf"] = inf ? tensor_json(model::aggregate_to_phases(*inf, map.inflow_row)) : json(nullptr);
  return v;
}

}  // namespace

Response Service::simulate(const PredictRequest& r) const {
  const auto start = std::chrono::steady_clock::now();
  const auto& topo = topology(r.topology);
  const sim::SimulationRecord record = sim::run_scenario(to_scenario(r, topo));
  const auto ext = graph::to_tensor(record.ext);
  const auto inf = graph::to_tensor(record.inf);
  json body = {{"ext", record.ext},
               {"inf", record.inf},
               {"ql", record.ql},
               {"tt", record.tt},
               {"phases", phase_views(model::make_phase_map(topo), ext, inf, graph::to_tensor(record.stp))},
               {"record", record}};
  body["metadata"] = {{"source", "simulation"},
                      {"topology", topo.id},
                      {"seed", r.seed},
                      {"window_start", r.window_start},
                      {"latency_ms", elapsed_ms(start)}};
  return {200, body};
}

Response Service::predict(const PredictRequest& r) const {
  if (!checkpoint_) return error_response(409, "no model checkpoint is loaded");
  const auto start = std::chrono::steady_clock::now();
  const auto& topo = topology(r.topology);
  const model::Checkpoint& c = *checkpoint_;

  sim::SimulationRecord record;
  const bool observed = r.stp.has_value();
  if (observed) {
    if (c.config.variant == model::Variant::MoeOnly)
      return error_response(400, "validation failed",
                            {{"stp", "the mtdt-moe model needs simulated exit and inflow waveforms; omit stp"}});
    const sim::Scenario s = to_scenario(r, topo);
    record.isc = topo.id;
    record.sig = sim::render_signal(s.plan, s.window);
    record.tmc = s.ratios.raw;
    record.drv = s.drv;
    record.stp = *r.stp;
    record.ext = IntMatrix(sim::kExitLanes, sim::kBuckets);
    record.inf = IntMatrix(sim::kInflowLanes, sim::kBuckets);
    record.ql = IntMatrix(sim::kPhases, sim::kBuckets);
    record.tt = IntMatrix(sim::kPhases, sim::kTravelTimeBuckets);
    record.seed = r.seed;
  } else {
    record = sim::run_scenario(to_scenario(r, topo));
  }

  const model::Prediction p = model::predict(c.params, c.config, c.norm, record, topo);
  json body = {{"ql", tensor_json(p.ql)},
               {"tt", tensor_json(p.tt)},
               {"phases", phase_views(model::make_phase_map(topo), p.ext, p.inf, graph::to_tensor(record.stp))}};
  body["ext"] = p.ext ? tensor_json(*p.ext) : json(nullptr);
  body["inf"] = p.inf ? tensor_json(*p.inf) : json(nullptr);
  if (r.include_truth && !observed) body["truth"] = record;
  body["metadata"] = {{"source", "model"},
                      {"variant", model::to_string(c.config.variant)},
                      {"checkpoint_id", checkpoint_id_},
                      {"topology", topo.id},
                      {"seed", r.seed},
                      {"window_start", r.window_start},
                      {"observed", observed ? "request" : "simulation"},
                      {"latency_ms", elapsed_ms(start)}};
  return {200, body};
}

Response Service::topologies() const {
  json list = json::array();
  for (const auto& t : topologies_) list.push_back(t);
  return {200, {{"topologies", list}}};
}

Response Service::model_info() const {
  if (!checkpoint_) return error_response(409, "no model checkpoint is loaded");
  return {200, model::checkpoint_info(*checkpoint_)};
}

Response Service::handle(const std::string& method, const std::string& path, const std::string& body) const {
  try {
    if (path == "/v1/topologies" || path == "/v1/model/info") {
      if (method != "GET") return error_response(405, "use GET for " + path);
      return path == "/v1/topologies" ? topologies() : model_info();
    }
    if (path == "/v1/simulate" || path == "/v1/predict") {
      if (method != "POST") return error_response(405, "use POST for " + path);
      const bool predicting = path == "/v1/predict";
      if (predicting && !checkpoint_) return error_response(409, "no model checkpoint is loaded");
      json parsed;
      try {
        parsed = json::parse(body);
      } catch (const json::parse_error& e) {
        return error_response(400, std::string("malformed JSON: ") + e.what());
      }
      ParseResult req = parse_request(parsed, topologies_);
      if (!req.request) return error_response(400, "validation failed", req.errors);
      return predicting ? predict(*req.request) : simulate(*req.request);
    }
    return error_response(404, "no route for " + path);
  } catch (const std::exception& e) {
    return error_response(500, e.what());
  }
}

}  // namespace mtdt::service
