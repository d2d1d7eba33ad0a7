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
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "mtdt/checkpoint.hpp"
#include "mtdt/model.hpp"
#include "mtdt/normalization.hpp"
#include "mtdt/sim/record.hpp"
#include "mtdt/sim/topology.hpp"

namespace mtdt::train {

using tensor::Var;

struct TrainConfig {
  std::size_t epochs = 100;
  double learning_rate = 0.01;
  double momentum = 0.9;
  std::vector<double> weight_decay_grid{0.0, 1e-4, 1e-3};
  std::size_t batch_size = 8;
  std::uint64_t seed = 1;
  std::array<double, 3> split{0.75, 0.15, 0.10};
  /// Rescales a batch gradient whose global L2 norm exceeds this; 0 disables.
  double clip_norm = 10.0;
  /// Restricts training to one intersection id when non-empty.
  std::string single_intersection;
  model::ModelConfig model;

  /// Tasks that contribute to the loss; the MOE-only variant has no waveform tasks.
  std::vector<Task> tasks() const;
};

/// Throws ConfigError on inconsistent settings (fractions not summing to one,
/// empty grid, zero batch size...).
void validate(const TrainConfig& c);

void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);

struct Split {
  std::vector<std::size_t> train, val, test;
};

/// Deterministic shuffle by seed, then train = round(n * f0), val =
/// round(n * f1), test = the rest.
Split split(std::size_t n, const std::array<double, 3>& fractions, std::uint64_t seed);

/// MSE for waveform and queue tasks, soft-target cross-entropy for tt.
Var task_loss(Task t, Var pred, Var target);

/// Unweighted sum of the parts.
Var total_loss(std::span<const Var> parts);

struct LossParts {
  double ext = 0.0, inf = 0.0, ql = 0.0, tt = 0.0;
  double total = 0.0;
  double get(Task t) const;
  void add(Task t, double v);
};

struct EpochLog {
  std::size_t epoch = 0;  // 1-based
  LossParts train;
  LossParts val;
};

struct GridResult {
  double weight_decay = 0.0;
  bool diverged = false;
  std::string failure;
  std::vector<EpochLog> epochs;
  std::size_t best_epoch = 0;
  double best_val = 0.0;
};

struct TrainReport {
  std::vector<GridResult> grid;
  double selected_weight_decay = 0.0;
  std::size_t best_epoch = 0;
  double best_val = 0.0;
  std::string variant;
  std::size_t train_records = 0, val_records = 0, test_records = 0;
  std::string checkpoint_id;
};

void to_json(nlohmann::json& j, const LossParts& l);
void to_json(nlohmann::json& j, const TrainReport& r);

struct TrainResult {
  model::Parameters params;
  Normalizer norm;
  TrainReport report;
  Split split;
};

/// Records whose intersection id is unknown raise ConfigError.
const sim::IntersectionTopology& topology_for(const sim::SimulationRecord& r,
                                              std::span<const sim::IntersectionTopology> topologies);

/// Teacher-forced losses of one record on an existing tape.
std::vector<std::pair<Task, Var>> record_losses(tensor::Tape& tape, const model::ForwardInputs& in,
                                                const model::Bound& params, const TrainConfig& config);

/// Mean teacher-forced losses over `records`.
LossParts evaluate_loss(const model::Parameters& params, const TrainConfig& config, const Normalizer& norm,
                        std::span<const sim::SimulationRecord> records,
                        std::span<const sim::IntersectionTopology> topologies);

/// Packages the selected parameters with everything inference needs.
/// Hyperparameters carry the train config and the selection outcome.
model::Checkpoint to_checkpoint(const TrainResult& result, const TrainConfig& config,
                                std::span<const sim::IntersectionTopology> topologies);

/// Grid search over weight decay; each grid point trains for `epochs` and
/// keeps its best-validation epoch. Returns the overall best; the report's
/// checkpoint_id is the id of to_checkpoint() on the result.
TrainResult train(std::span<const sim::SimulationRecord> data, std::span<const sim::IntersectionTopology> topologies,
                  const TrainConfig& config);

}  // namespace mtdt::train
