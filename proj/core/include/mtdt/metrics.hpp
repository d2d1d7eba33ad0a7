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

// Error measures and the evaluation report: overall errors, coarser time
// buckets, travel-time percentiles, and queue / green-time partitions.

#include <array>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "mtdt/checkpoint.hpp"
#include "mtdt/model.hpp"
#include "mtdt/sim/record.hpp"
#include "mtdt/tensor.hpp"

namespace mtdt::metrics {

using tensor::Tensor;

/// Inputs must be equal-length and nonempty (ContractError otherwise).
double mae(std::span<const double> pred, std::span<const double> truth);
double rmse(std::span<const double> pred, std::span<const double> truth);
/// RMSE over the range of `truth`; absent when the range is zero.
std::optional<double> nrmse(std::span<const double> pred, std::span<const double> truth);
inline double ci95(double rmse_value) { return 1.96 * rmse_value; }

struct ErrorStats {
  double mae = 0.0;
  double rmse = 0.0;
  double ci95 = 0.0;
  std::optional<double> nrmse;
  std::size_t count = 0;
};

/// Streaming form of the measures above, so large evaluation sets need not
/// be materialized.
class ErrorAccumulator {
 public:
  void add(double pred, double truth);
  void add(std::span<const double> pred, std::span<const double> truth);
  std::size_t count() const { return n_; }
  /// Absent when nothing was added.
  std::optional<ErrorStats> finish() const;

 private:
  double abs_ = 0.0, sq_ = 0.0;
  double lo_ = 0.0, hi_ = 0.0;
  std::size_t n_ = 0;
};

enum class Aggregation { Sum, Max };

/// Merges each run of `factor` columns; a trailing partial run is dropped.
/// Counts use Sum, queue lengths Max.
Tensor reaggregate(const Tensor& series, std::size_t factor, Aggregation how);

/// Smallest bin whose cumulative share reaches q percent; absent for an
/// empty histogram.
std::optional<std::size_t> percentile_bin(std::span<const double> hist, double q);

/// Errors over bins 0..percentile_bin(truth row) of every phase with a
/// nonempty true histogram. Absent when every true row is empty.
std::optional<ErrorStats> percentile_errors(const Tensor& pred, const Tensor& truth, double q);

// ---------------------------------------------------------------------------
// Partitions

enum class QueuePartition { L1, L2, M1, M2, H1, H2 };
inline constexpr std::size_t kQueuePartitions = 6;
std::string to_string(QueuePartition p);
/// [0,40) L1, [40,80) L2, ..., [200,inf) H2.
QueuePartition queue_partition(double max_queue);
std::string queue_partition_range(QueuePartition p);

enum class GreenPartition { Low, Medium, High };
inline constexpr std::size_t kGreenPartitions = 3;
std::string to_string(GreenPartition p);
/// Share of buckets in which phase 2 or phase 6 shows green.
double major_green_fraction(const IntMatrix& sig);
/// [0.45,0.60) Low, [0.60,0.75) Medium, [0.75,0.90] High, else absent.
std::optional<GreenPartition> green_partition(double fraction);
std::string green_partition_range(GreenPartition p);

struct QueueGroups {
  std::array<std::vector<std::size_t>, kQueuePartitions> groups;
};
QueueGroups partition_by_max_queue(std::span<const sim::SimulationRecord> records);

struct GreenGroups {
  std::array<std::vector<std::size_t>, kGreenPartitions> groups;
  std::vector<std::size_t> excluded;
};
GreenGroups partition_by_green_time(std::span<const sim::SimulationRecord> records);

// ---------------------------------------------------------------------------
// Report

struct TaskErrors {
  std::optional<ErrorStats> ext, inf, ql, tt;
};

struct AggregationRow {
  int seconds = 5;
  std::optional<ErrorStats> ext, inf, ql;
};

struct PercentileRow {
  int percentile = 60;
  std::optional<ErrorStats> tt;
};

struct PartitionRow {
  std::string name;
  std::string range;
  std::size_t records = 0;
  TaskErrors errors;
};

struct MoeReport {
  std::string variant;
  std::string checkpoint_id;
  std::size_t records = 0;
  TaskErrors overall;
  std::vector<AggregationRow> by_aggregation;  // 5, 10, 15, 20 s
  std::vector<PercentileRow> by_percentile;    // 60, 75, 85, 90
  std::vector<PartitionRow> by_queue;          // L1..H2
  std::vector<PartitionRow> by_green;          // Low, Medium, High
  std::size_t green_excluded = 0;
};

/// `pred[k]` is the prediction for `truth[k]`; waveform tasks missing from a
/// prediction (MOE-only variant) are reported as absent.
MoeReport build_report(std::span<const sim::SimulationRecord> truth, std::span<const model::Prediction> pred,
                       const std::string& variant, const std::string& checkpoint_id);

/// Inference-mode predictions from `ckpt` on every record, then build_report.
MoeReport evaluate(const model::Checkpoint& ckpt, std::span<const sim::SimulationRecord> records);

void to_json(nlohmann::json& j, const ErrorStats& e);
void to_json(nlohmann::json& j, const MoeReport& r);
/// One row per (table, row, task): table,row,task,records,mae,rmse,nrmse,ci95,n.
void write_csv(std::ostream& out, const MoeReport& r);

}  // namespace mtdt::metrics
