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

#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "mtdt/rng.hpp"
#include "mtdt/sim/signal.hpp"

namespace mtdt::service {
namespace {

using nlohmann::json;

json plan_for(const std::string& topology_id, std::uint64_t seed = 5) {
  for (const auto& t : testing::topologies())
    if (t.id == topology_id) {
      Rng rng(seed);
      return sim::random_plan(t, sim::SignalGenerationConfig{}, rng);
    }
  throw std::out_of_range(topology_id);
}

json base_request() {
  return {{"topology", "I1"}, {"plan", plan_for("I1")}, {"seed", 11}, {"window_start", 900}};
}

model::Checkpoint checkpoint(model::Variant variant = model::Variant::Full) {
  model::Checkpoint c;
  c.config.variant = variant;
  c.params = model::init_parameters(c.config, 4);
  c.norm = Normalizer::fit(testing::small_dataset());
  c.topologies = testing::topologies();
  return c;
}

const Service& bare() {
  static const Service s(testing::topologies(), std::nullopt);
  return s;
}

const Service& loaded() {
  static const Service s(testing::topologies(), checkpoint());
  return s;
}

bool has_field(const json& body, const std::string& field) {
  if (!body.contains("fields")) return false;
  for (const auto& f : body["fields"])
    if (f["field"] == field) return true;
  return false;
}

json without_latency(json body) {
  body["metadata"].erase("latency_ms");
  return body;
}

TEST(ParseRequest, AcceptsMinimalRequestWithDefaults) {
  const ParseResult r = parse_request(base_request(), testing::topologies());
  ASSERT_TRUE(r.request) << json(r.errors.size());
  EXPECT_EQ(r.request->topology, "I1");
  EXPECT_EQ(r.request->window_start, 900);
  EXPECT_EQ(r.request->seed, 11u);
  EXPECT_DOUBLE_EQ(r.request->turns[2][1], 0.75);
  EXPECT_FALSE(r.request->stp);
}

TEST(ParseRequest, CycleOutsideRangeNamesFieldAndRange) {
  json req = base_request();
  req["plan"]["cycle_length"] = 500;
  const ParseResult r = parse_request(req, testing::topologies());
  ASSERT_FALSE(r.request);
  ASSERT_EQ(r.errors.size(), 1u);
  EXPECT_EQ(r.errors[0].field, "plan.cycle_length");
  EXPECT_NE(r.errors[0].message.find("[120, 240]"), std::string::npos);
}

TEST(ParseRequest, CollectsEveryBadField) {
  json req = base_request();
  req["topology"] = "nowhere";
  req["drv"] = json::array({1, 2, 3});
  req["demand"] = json::array({0.1, -0.2, 0.1, 3.0});
  req["window_start"] = 901;
  req["seed"] = -4;
  const ParseResult r = parse_request(req, testing::topologies());
  ASSERT_FALSE(r.request);
  json body = error_response(400, "x", r.errors).body;
  for (const char* f : {"topology", "drv", "demand[1]", "demand[3]", "window_start", "seed"})
    EXPECT_TRUE(has_field(body, f)) << f;
}

TEST(ParseRequest, DrvEntriesAreRangeChecked) {
  json req = base_request();
  req["drv"] = json::array({1, 1, 1, 1, 31, 1, 1, 1, 1});
  const ParseResult r = parse_request(req, testing::topologies());
  ASSERT_FALSE(r.request);
  EXPECT_EQ(r.errors[0].field, "drv[4]");
}

TEST(ParseRequest, StpMustBeFullGridOfSmallCounts) {
  json req = base_request();
  req["stp"] = json::array({json::array({1, 2})});
  EXPECT_FALSE(parse_request(req, testing::topologies()).request);

  json grid = json::array();
  for (std::size_t l = 0; l < sim::kStopLanes; ++l) grid.push_back(json(std::vector<int>(sim::kBuckets, 1)));
  req["stp"] = grid;
  EXPECT_TRUE(parse_request(req, testing::topologies()).request);
  req["stp"][3][7] = 9;
  const ParseResult r = parse_request(req, testing::topologies());
  ASSERT_FALSE(r.request);
  EXPECT_EQ(r.errors[0].field, "stp[3][7]");
}

TEST(Handle, RoutesAndStatusCodes) {
  EXPECT_EQ(bare().handle("GET", "/v1/topologies", "").status, 200);
  EXPECT_EQ(bare().handle("GET", "/v1/model/info", "").status, 409);
  EXPECT_EQ(bare().handle("POST", "/v1/predict", base_request().dump()).status, 409);
  EXPECT_EQ(bare().handle("GET", "/v1/simulate", "").status, 405);
  EXPECT_EQ(bare().handle("GET", "/v2/anything", "").status, 404);
  EXPECT_EQ(bare().handle("POST", "/v1/simulate", "{not json").status, 400);
  EXPECT_EQ(loaded().handle("GET", "/v1/model/info", "").status, 200);
}

TEST(Handle, ValidationErrorsCarryFieldList) {
  json req = base_request();
  req["plan"]["cycle_length"] = 500;
  const Response r = bare().handle("POST", "/v1/simulate", req.dump());
  EXPECT_EQ(r.status, 400);
  EXPECT_TRUE(has_field(r.body, "plan.cycle_length"));
}

TEST(Handle, TopologiesListsStandardSet) {
  const Response r = bare().topologies();
  EXPECT_EQ(r.body["topologies"].size(), testing::topologies().size());
  EXPECT_EQ(r.body["topologies"][0]["id"], "I1");
}

TEST(Simulate, ShapesAndMetadata) {
  const Response r = bare().handle("POST", "/v1/simulate", base_request().dump());
  ASSERT_EQ(r.status, 200) << r.body.dump();
  EXPECT_EQ(r.body["metadata"]["source"], "simulation");
  EXPECT_EQ(r.body["phases"]["stp"].size(), sim::kPhases);
  EXPECT_EQ(r.body["phases"]["stp"][0].size(), sim::kBuckets);
  EXPECT_EQ(r.body["phases"]["ext"].size(), sim::kPhases);
  EXPECT_TRUE(r.body["metadata"]["latency_ms"].is_number());
}

TEST(Simulate, IdenticalRequestsGiveIdenticalBodies) {
  const std::string req = base_request().dump();
  EXPECT_EQ(without_latency(bare().handle("POST", "/v1/simulate", req).body),
            without_latency(bare().handle("POST", "/v1/simulate", req).body));
}

TEST(Simulate, ZeroDemandGivesEmptyWaveforms) {
  json req = base_request();
  req["demand"] = json::array({0, 0, 0, 0});
  const Response r = bare().handle("POST", "/v1/simulate", req.dump());
  ASSERT_EQ(r.status, 200);
  for (const char* key : {"ext", "inf"})
    for (const auto& row : r.body["phases"][key])
      for (const auto& v : row) EXPECT_EQ(v.get<double>(), 0.0) << key;
  for (const auto& row : r.body["phases"]["stp"])
    for (const auto& v : row) EXPECT_EQ(v.get<double>(), 0.0);
}

TEST(Predict, ShapesMatchSimulation) {
  json req = base_request();
  req["include_truth"] = true;
  const Response sim = loaded().handle("POST", "/v1/simulate", req.dump());
  const Response pred = loaded().handle("POST", "/v1/predict", req.dump());
  ASSERT_EQ(pred.status, 200) << pred.body.dump();
  EXPECT_EQ(pred.body["ql"].size(), sim::kPhases);
  EXPECT_EQ(pred.body["ql"][0].size(), sim::kBuckets);
  EXPECT_EQ(pred.body["tt"].size(), sim::kPhases);
  EXPECT_EQ(pred.body["tt"][0].size(), sim::kTravelTimeBuckets);
  EXPECT_EQ(pred.body["ext"].size(), sim.body["ext"].size());
  EXPECT_EQ(pred.body["inf"].size(), sim.body["inf"].size());
  EXPECT_EQ(pred.body["truth"], sim.body["record"]);
  EXPECT_EQ(pred.body["metadata"]["observed"], "simulation");
  EXPECT_EQ(pred.body["metadata"]["variant"], "mtdt");
}

TEST(Predict, Deterministic) {
  const std::string req = base_request().dump();
  EXPECT_EQ(without_latency(loaded().handle("POST", "/v1/predict", req).body),
            without_latency(loaded().handle("POST", "/v1/predict", req).body));
}

TEST(Predict, ObservedStpSkipsSimulation) {
  json req = base_request();
  json grid = json::array();
  for (std::size_t l = 0; l < sim::kStopLanes; ++l) grid.push_back(json(std::vector<int>(sim::kBuckets, 0)));
  req["stp"] = grid;
  req["include_truth"] = true;
  const Response r = loaded().handle("POST", "/v1/predict", req.dump());
  ASSERT_EQ(r.status, 200) << r.body.dump();
  EXPECT_EQ(r.body["metadata"]["observed"], "request");
  EXPECT_FALSE(r.body.contains("truth"));
}

TEST(Predict, MoeOnlyRejectsObservedStp) {
  const Service s(testing::topologies(), checkpoint(model::Variant::MoeOnly));
  json req = base_request();
  json grid = json::array();
  for (std::size_t l = 0; l < sim::kStopLanes; ++l) grid.push_back(json(std::vector<int>(sim::kBuckets, 0)));
  req["stp"] = grid;
  const Response r = s.handle("POST", "/v1/predict", req.dump());
  EXPECT_EQ(r.status, 400);
  EXPECT_TRUE(has_field(r.body, "stp"));
  EXPECT_EQ(s.handle("POST", "/v1/predict", base_request().dump()).status, 200);
}

}  // namespace
}  // namespace mtdt::service
