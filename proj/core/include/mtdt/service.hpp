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

// Request parsing, validation and the /v1 handlers behind the HTTP server
// and the predict verb. Nothing here touches sockets.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mtdt/checkpoint.hpp"
#include "mtdt/sim/dataset.hpp"

namespace mtdt::service {

struct FieldError {
  std::string field;
  std::string message;
};

struct PredictRequest {
  std::string topology;
  sim::SignalTimingPlan plan;
  sim::DrivingBehavior drv;
  /// Per approach (N, E, S, W) left / through / right shares.
  std::array<std::array<double, 3>, sim::kApproaches> turns{};
  sim::DemandRates demand{};
  int window_start = 1200;
  std::uint64_t seed = 0;
  /// Observed stop-bar counts; when absent they come from simulating the
  /// request.
  std::optional<IntMatrix> stp;
  /// Attach the simulated ground truth to a predict response.
  bool include_truth = false;
};

struct ParseResult {
  std::optional<PredictRequest> request;
  std::vector<FieldError> errors;
};

/// Field-level validation against the input ranges. Unknown topology ids
/// are reported on "topology".
ParseResult parse_request(const nlohmann::json& body, std::span<const sim::IntersectionTopology> topologies);

/// The scenario a request describes.
sim::Scenario to_scenario(const PredictRequest& r, const sim::IntersectionTopology& topology);

struct Response {
  int status = 200;
  nlohmann::json body;
};

/// Immutable after construction; handle() is safe to call concurrently.
class Service {
 public:
  /// Without a checkpoint, simulate and topology requests still work and
  /// predict / model info answer 409.
  Service(std::vector<sim::IntersectionTopology> topologies, std::optional<model::Checkpoint> checkpoint);

  Response handle(const std::string& method, const std::string& path, const std::string& body) const;

  Response simulate(const PredictRequest& r) const;
  Response predict(const PredictRequest& r) const;
  Response topologies() const;
  Response model_info() const;

  const std::vector<sim::IntersectionTopology>& topology_set() const { return topologies_; }
  bool has_checkpoint() const { return checkpoint_.has_value(); }

 private:
  const sim::IntersectionTopology& topology(const std::string& id) const;

  std::vector<sim::IntersectionTopology> topologies_;
  std::optional<model::Checkpoint> checkpoint_;
  std::string checkpoint_id_;
};

Response error_response(int status, const std::string& message, const std::vector<FieldError>& fields = {});

}  // namespace mtdt::service
