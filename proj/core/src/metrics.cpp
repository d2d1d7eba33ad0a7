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

#include "mtdt/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include <nlohmann/json.hpp>

#include "mtdt/error.hpp"
#include "mtdt/graph.hpp"
#include "mtdt/sim/signal.hpp"

namespace mtdt::metrics {

namespace {

void check_pair(std::span<const double> pred, std::span<const double> truth) {
  if (pred.size() != truth.size())
    throw ContractError("metric inputs differ in length: " + std::to_string(pred.size()) + " vs " +
                        std::to_string(truth.size()));
  if (pred.empty()) throw ContractError("metric inputs are empty");
}

}  // namespace

double mae(std::span<const double> pred, std::span<const double> truth) {
  check_pair(pred, truth);
  double s = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) s += std::abs(pred[i] - truth[i]);
  return s / static_cast<double>(pred.size());
}

double rmse(std::span<const double> pred, std::span<const double> truth) {
  check_pair(pred, truth);
  double s = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) s += (pred[i] - truth[i]) * (pred[i] - truth[i]);
  return std::sqrt(s / static_cast<double>(pred.size()));
}

std::optional<double> nrmse(std::span<const double> pred, std::span<const double> truth) {
  const double r = rmse(pred, truth);
  const auto [lo, hi] = std::minmax_element(truth.begin(), truth.end());
  if (!(*hi > *lo)) return std::nullopt;
  return r / (*hi - *lo);
}

void ErrorAccumulator::add(double pred, double truth) {
  const double d = pred - truth;
  abs_ += std::abs(d);
  sq_ += d * d;
  lo_ = n_ == 0 ? truth : std::min(lo_, truth);
  hi_ = n_ == 0 ? truth : std::max(hi_, truth);
  ++n_;
}

void ErrorAccumulator::add(std::span<const double> pred, std::span<const double> truth) {
  if (pred.size() != truth.size()) throw ContractError("metric inputs differ in length");
  for (std::size_t i = 0; i < pred.size(); ++i) add(pred[i], truth[i]);
}

std::optional<ErrorStats> ErrorAccumulator::finish() const {
  if (n_ == 0) return std::nullopt;
  ErrorStats e;
  e.count = n_;
  e.mae = abs_ / static_cast<double>(n_);
  e.rmse = std::sqrt(sq_ / static_cast<double>(n_));
  e.ci95 = ci95(e.rmse);
  if (hi_ > lo_) e.nrmse = e.rmse / (hi_ - lo_);
  return e;
}

Tensor reaggregate(const Tensor& series, std::size_t factor, Aggregation how) {
  if (series.rank() != 2) throw ShapeError("reaggregate expects a rows x time matrix");
  if (factor == 0 || factor > series.dim(1))
    throw ContractError("reaggregate factor " + std::to_string(factor) + " does not fit " +
                        std::to_string(series.dim(1)) + " buckets");
  const std::size_t rows = series.dim(0), cols = series.dim(1) / factor;
  Tensor out({rows, cols});
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) {
      double acc = how == Aggregation::Sum ? 0.0 : series.at(r, c * factor);
      for (std::size_t k = 0; k < factor; ++k) {
        const double v = series.at(r, c * factor + k);
        acc = how == Aggregation::Sum ? acc + v : std::max(acc, v);
      }
      out.at(r, c) = acc;
    }
  return out;
}

std::optional<std::size_t> percentile_bin(std::span<const double> hist, double q) {
  if (!(q > 0.0 && q <= 100.0)) throw ContractError("percentile must lie in (0, 100]");
  double total = 0.0;
  for (double v : hist) total += v;
  if (!(total > 0.0)) return std::nullopt;
  const double need = q / 100.0 * total;
  double cum = 0.0;
  for (std::size_t b = 0; b < hist.size(); ++b) {
    cum += hist[b];
    if (cum >= need) return b;
  }
  return hist.size() - 1;
}

namespace {

void accumulate_percentile(ErrorAccumulator& acc, const Tensor& pred, const Tensor& truth, double q) {
  if (pred.shape() != truth.shape() || truth.rank() != 2) throw ShapeError("percentile_errors: shapes differ");
  const std::size_t bins = truth.dim(1);
  for (std::size_t r = 0; r < truth.dim(0); ++r) {
    const auto row = truth.data().subspan(r * bins, bins);
    const auto b = percentile_bin(row, q);
    if (!b) continue;
    for (std::size_t c = 0; c <= *b; ++c) acc.add(pred.at(r, c), truth.at(r, c));
  }
}

}  // namespace

std::optional<ErrorStats> percentile_errors(const Tensor& pred, const Tensor& truth, double q) {
  ErrorAccumulator acc;
  accumulate_percentile(acc, pred, truth, q);
  return acc.finish();
}

// ---------------------------------------------------------------------------
// Partitions

std::string to_string(QueuePartition p) {
  static const char* names[] = {"L1", "L2", "M1", "M2", "H1", "H2"};
  return names[static_cast<int>(p)];
}

QueuePartition queue_partition(double max_queue) {
  if (max_queue < 0.0) throw ContractError("queue length must be non-negative");
  const auto k = static_cast<int>(std::min(5.0, std::floor(max_queue / 40.0)));
  return static_cast<QueuePartition>(k);
}

std::string queue_partition_range(QueuePartition p) {
  const int k = static_cast<int>(p);
  return k == 5 ? "200+ m" : std::to_string(40 * k) + "-" + std::to_string(40 * (k + 1)) + " m";
}

std::string to_string(GreenPartition p) {
  static const char* names[] = {"Low", "Medium", "High"};
  return names[static_cast<int>(p)];
}

double major_green_fraction(const IntMatrix& sig) {
  require_shape(sig, sim::kPhases, sig.cols(), "sig");
  if (sig.cols() == 0) throw ContractError("sig has no buckets");
  std::size_t green = 0;
  for (std::size_t t = 0; t < sig.cols(); ++t)
    if (sig(sim::phase_row(2), t) != 0 || sig(sim::phase_row(6), t) != 0) ++green;
  return static_cast<double>(green) / static_cast<double>(sig.cols());
}

std::optional<GreenPartition> green_partition(double f) {
  if (f >= 0.45 && f < 0.60) return GreenPartition::Low;
  if (f >= 0.60 && f < 0.75) return GreenPartition::Medium;
  if (f >= 0.75 && f <= 0.90) return GreenPartition::High;
  return std::nullopt;
}

std::string green_partition_range(GreenPartition p) {
  static const char* ranges[] = {"45-60 %", "60-75 %", "75-90 %"};
  return ranges[static_cast<int>(p)];
}

QueueGroups partition_by_max_queue(std::span<const sim::SimulationRecord> records) {
  QueueGroups g;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& v = records[i].ql.values();
    const int m = v.empty() ? 0 : *std::max_element(v.begin(), v.end());
    g.groups[static_cast<std::size_t>(queue_partition(m))].push_back(i);
  }
  return g;
}

GreenGroups partition_by_green_time(std::span<const sim::SimulationRecord> records) {
  GreenGroups g;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto p = green_partition(major_green_fraction(records[i].sig));
    if (p)
      g.groups[static_cast<std::size_t>(*p)].push_back(i);
    else
      g.excluded.push_back(i);
  }
  return g;
}

// ---------------------------------------------------------------------------
// Report

namespace {

constexpr int kSeconds[] = {5, 10, 15, 20};
constexpr int kPercentiles[] = {60, 75, 85, 90};

struct TaskAccumulators {
  ErrorAccumulator ext, inf, ql, tt;

  void add(const sim::SimulationRecord& r, const model::Prediction& p) {
    if (p.ext) ext.add(p.ext->data(), graph::to_tensor(r.ext).data());
    if (p.inf) inf.add(p.inf->data(), graph::to_tensor(r.inf).data());
    ql.add(p.ql.data(), graph::to_tensor(r.ql).data());
    tt.add(p.tt.data(), graph::to_tensor(r.tt).data());
  }
  TaskErrors finish() const { return {ext.finish(), inf.finish(), ql.finish(), tt.finish()}; }
};

void check_prediction(const sim::SimulationRecord& r, const model::Prediction& p) {
  auto same = [](const Tensor& t, std::size_t rows, std::size_t cols) {
    return t.rank() == 2 && t.dim(0) == rows && t.dim(1) == cols;
  };
  if (!same(p.ql, r.ql.rows(), r.ql.cols()) || !same(p.tt, r.tt.rows(), r.tt.cols()) ||
      (p.ext && !same(*p.ext, r.ext.rows(), r.ext.cols())) || (p.inf && !same(*p.inf, r.inf.rows(), r.inf.cols())))
    throw ShapeError("prediction shapes do not match record " + r.isc);
}

PartitionRow partition_row(std::string name, std::string range, const std::vector<std::size_t>& members,
                           std::span<const sim::SimulationRecord> truth, std::span<const model::Prediction> pred) {
  TaskAccumulators acc;
  for (std::size_t i : members) acc.add(truth[i], pred[i]);
  return {std::move(name), std::move(range), members.size(), acc.finish()};
}

}  // namespace

MoeReport build_report(std::span<const sim::SimulationRecord> truth, std::span<const model::Prediction> pred,
                       const std::string& variant, const std::string& checkpoint_id) {
  if (truth.size() != pred.size()) throw ContractError("one prediction per record required");
  if (truth.empty()) throw ContractError("cannot report on an empty record set");
  for (std::size_t i = 0; i < truth.size(); ++i) check_prediction(truth[i], pred[i]);

  MoeReport rep;
  rep.variant = variant;
  rep.checkpoint_id = checkpoint_id;
  rep.records = truth.size();

  TaskAccumulators overall;
  for (std::size_t i = 0; i < truth.size(); ++i) overall.add(truth[i], pred[i]);
  rep.overall = overall.finish();

  for (int seconds : kSeconds) {
    const auto factor = static_cast<std::size_t>(seconds / sim::kBucketSeconds);
    ErrorAccumulator ext, inf, ql;
    for (std::size_t i = 0; i < truth.size(); ++i) {
      const auto& p = pred[i];
      if (p.ext)
        ext.add(reaggregate(*p.ext, factor, Aggregation::Sum).data(),
                reaggregate(graph::to_tensor(truth[i].ext), factor, Aggregation::Sum).data());
      if (p.inf)
        inf.add(reaggregate(*p.inf, factor, Aggregation::Sum).data(),
                reaggregate(graph::to_tensor(truth[i].inf), factor, Aggregation::Sum).data());
      ql.add(reaggregate(p.ql, factor, Aggregation::Max).data(),
             reaggregate(graph::to_tensor(truth[i].ql), factor, Aggregation::Max).data());
    }
    rep.by_aggregation.push_back({seconds, ext.finish(), inf.finish(), ql.finish()});
  }

  for (int q : kPercentiles) {
    ErrorAccumulator acc;
    for (std::size_t i = 0; i < truth.size(); ++i)
      accumulate_percentile(acc, pred[i].tt, graph::to_tensor(truth[i].tt), q);
    rep.by_percentile.push_back({q, acc.finish()});
  }

  const auto queues = partition_by_max_queue(truth);
  for (std::size_t k = 0; k < kQueuePartitions; ++k) {
    const auto p = static_cast<QueuePartition>(k);
    rep.by_queue.push_back(partition_row(to_string(p), queue_partition_range(p), queues.groups[k], truth, pred));
  }
  const auto greens = partition_by_green_time(truth);
  for (std::size_t k = 0; k < kGreenPartitions; ++k) {
    const auto p = static_cast<GreenPartition>(k);
    rep.by_green.push_back(partition_row(to_string(p), green_partition_range(p), greens.groups[k], truth, pred));
  }
  rep.green_excluded = greens.excluded.size();
  return rep;
}

MoeReport evaluate(const model::Checkpoint& ckpt, std::span<const sim::SimulationRecord> records) {
  std::vector<model::Prediction> preds;
  preds.reserve(records.size());
  for (const auto& r : records)
    preds.push_back(model::predict(ckpt.params, ckpt.config, ckpt.norm, r, ckpt.topology(r.isc)));
  return build_report(records, preds, model::to_string(ckpt.config.variant), ckpt.id());
}

// ---------------------------------------------------------------------------
// Serialization

void to_json(nlohmann::json& j, const ErrorStats& e) {
  j = {{"mae", e.mae}, {"rmse", e.rmse}, {"ci95", e.ci95}, {"count", e.count}};
  j["nrmse"] = e.nrmse ? nlohmann::json(*e.nrmse) : nlohmann::json(nullptr);
}

namespace {

nlohmann::json optional_json(const std::optional<ErrorStats>& e) { return e ? nlohmann::json(*e) : nlohmann::json(nullptr); }

nlohmann::json task_json(const TaskErrors& t) {
  return {{"ext", optional_json(t.ext)}, {"inf", optional_json(t.inf)}, {"ql", optional_json(t.ql)},
          {"tt", optional_json(t.tt)}};
}

nlohmann::json partition_json(const std::vector<PartitionRow>& rows) {
  auto out = nlohmann::json::array();
  for (const auto& r : rows)
    out.push_back({{"partition", r.name}, {"range", r.range}, {"records", r.records}, {"errors", task_json(r.errors)}});
  return out;
}

}  // namespace

void to_json(nlohmann::json& j, const MoeReport& r) {
  auto agg = nlohmann::json::array();
  for (const auto& row : r.by_aggregation)
    agg.push_back({{"seconds", row.seconds},
                   {"ext", optional_json(row.ext)},
                   {"inf", optional_json(row.inf)},
                   {"ql", optional_json(row.ql)}});
  auto pct = nlohmann::json::array();
  for (const auto& row : r.by_percentile) pct.push_back({{"percentile", row.percentile}, {"tt", optional_json(row.tt)}});
  j = {{"variant", r.variant},
       {"checkpoint_id", r.checkpoint_id},
       {"records", r.records},
       {"overall", task_json(r.overall)},
       {"temporal", {{"aggregation", agg}, {"tt_percentiles", pct}}},
       {"queue_partitions", partition_json(r.by_queue)},
       {"green_partitions", partition_json(r.by_green)},
       {"green_excluded", r.green_excluded}};
}

namespace {

void csv_row(std::ostream& out, const std::string& table, const std::string& row, const char* task, std::size_t records,
             const std::optional<ErrorStats>& e) {
  out << table << ',' << row << ',' << task << ',' << records << ',';
  if (e) {
    out << e->mae << ',' << e->rmse << ',';
    if (e->nrmse) out << *e->nrmse;
    out << ',' << e->ci95 << ',' << e->count;
  } else {
    out << ",,,,0";
  }
  out << '\n';
}

void csv_tasks(std::ostream& out, const std::string& table, const std::string& row, std::size_t records,
               const TaskErrors& t) {
  csv_row(out, table, row, "ext", records, t.ext);
  csv_row(out, table, row, "inf", records, t.inf);
  csv_row(out, table, row, "ql", records, t.ql);
  csv_row(out, table, row, "tt", records, t.tt);
}

}  // namespace

void write_csv(std::ostream& out, const MoeReport& r) {
  const auto precision = out.precision(10);
  out << "table,row,task,records,mae,rmse,nrmse,ci95,n\n";
  csv_tasks(out, "overall", "all", r.records, r.overall);
  for (const auto& row : r.by_aggregation) {
    const std::string name = std::to_string(row.seconds) + "s";
    csv_row(out, "aggregation", name, "ext", r.records, row.ext);
    csv_row(out, "aggregation", name, "inf", r.records, row.inf);
    csv_row(out, "aggregation", name, "ql", r.records, row.ql);
  }
  for (const auto& row : r.by_percentile)
    csv_row(out, "tt_percentile", "p" + std::to_string(row.percentile), "tt", r.records, row.tt);
  for (const auto& row : r.by_queue) csv_tasks(out, "queue_partition", row.name, row.records, row.errors);
  for (const auto& row : r.by_green) csv_tasks(out, "green_partition", row.name, row.records, row.errors);
  out.precision(precision);
}

}  // namespace mtdt::metrics
