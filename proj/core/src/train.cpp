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

#include "mtdt/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <nlohmann/json.hpp>

#include "mtdt/error.hpp"
#include "mtdt/rng.hpp"

namespace mtdt::train {

using model::Parameters;
using tensor::Tape;
using tensor::Tensor;

std::vector<Task> TrainConfig::tasks() const {
  if (model.variant == model::Variant::MoeOnly) return {Task::Ql, Task::Tt};
  return {Task::Ext, Task::Inf, Task::Ql, Task::Tt};
}

void validate(const TrainConfig& c) {
  const double sum = c.split[0] + c.split[1] + c.split[2];
  if (std::abs(sum - 1.0) > 1e-9) throw ConfigError("split fractions must sum to 1");
  for (double f : c.split)
    if (f < 0.0) throw ConfigError("split fractions must be non-negative");
  if (c.weight_decay_grid.empty()) throw ConfigError("weight_decay grid is empty");
  for (double wd : c.weight_decay_grid)
    if (!(wd >= 0.0)) throw ConfigError("weight decay must be non-negative");
  if (c.batch_size == 0) throw ConfigError("batch_size must be positive");
  if (!(c.learning_rate >= 0.0)) throw ConfigError("learning_rate must be non-negative");
  if (!(c.momentum >= 0.0 && c.momentum < 1.0)) throw ConfigError("momentum must lie in [0, 1)");
  if (!(c.clip_norm >= 0.0)) throw ConfigError("clip_norm must be non-negative");
  (void)c.model.pooled_length();
}

void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = {{"epochs", c.epochs},
       {"learning_rate", c.learning_rate},
       {"momentum", c.momentum},
       {"weight_decay_grid", c.weight_decay_grid},
       {"batch_size", c.batch_size},
       {"seed", c.seed},
       {"split", c.split},
       {"clip_norm", c.clip_norm},
       {"single_intersection", c.single_intersection},
       {"model", c.model}};
}

void from_json(const nlohmann::json& j, TrainConfig& c) {
  TrainConfig out;
  out.epochs = j.value("epochs", out.epochs);
  out.learning_rate = j.value("learning_rate", out.learning_rate);
  out.momentum = j.value("momentum", out.momentum);
  if (j.contains("weight_decay_grid")) out.weight_decay_grid = j.at("weight_decay_grid").get<std::vector<double>>();
  out.batch_size = j.value("batch_size", out.batch_size);
  out.seed = j.value("seed", out.seed);
  if (j.contains("split")) out.split = j.at("split").get<std::array<double, 3>>();
  out.clip_norm = j.value("clip_norm", out.clip_norm);
  out.single_intersection = j.value("single_intersection", std::string());
  if (j.contains("model")) out.model = j.at("model").get<model::ModelConfig>();
  validate(out);
  c = std::move(out);
}

Split split(std::size_t n, const std::array<double, 3>& fractions, std::uint64_t seed) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  for (std::size_t i = n; i > 1; --i)
    std::swap(order[i - 1], order[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(i) - 1))]);
  const auto n_train = std::min(n, static_cast<std::size_t>(std::llround(static_cast<double>(n) * fractions[0])));
  const auto n_val =
      std::min(n - n_train, static_cast<std::size_t>(std::llround(static_cast<double>(n) * fractions[1])));
  Split s;
  s.train.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
  s.val.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train),
               order.begin() + static_cast<std::ptrdiff_t>(n_train + n_val));
  s.test.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train + n_val), order.end());
  return s;
}

Var task_loss(Task t, Var pred, Var target) {
  return t == Task::Tt ? tensor::soft_cross_entropy(pred, target) : tensor::mse(pred, target);
}

Var total_loss(std::span<const Var> parts) {
  if (parts.empty()) throw ContractError("total_loss needs at least one part");
  Var acc = parts[0];
  for (std::size_t k = 1; k < parts.size(); ++k) acc = tensor::add(acc, parts[k]);
  return acc;
}

double LossParts::get(Task t) const {
  switch (t) {
    case Task::Ext: return ext;
    case Task::Inf: return inf;
    case Task::Ql: return ql;
    case Task::Tt: return tt;
  }
  return 0.0;
}

void LossParts::add(Task t, double v) {
  switch (t) {
    case Task::Ext: ext += v; break;
    case Task::Inf: inf += v; break;
    case Task::Ql: ql += v; break;
    case Task::Tt: tt += v; break;
  }
  total += v;
}

namespace {

LossParts scaled(LossParts l, double f) {
  l.ext *= f;
  l.inf *= f;
  l.ql *= f;
  l.tt *= f;
  l.total *= f;
  return l;
}

}  // namespace

void to_json(nlohmann::json& j, const LossParts& l) {
  j = {{"ext", l.ext}, {"inf", l.inf}, {"ql", l.ql}, {"tt", l.tt}, {"total", l.total}};
}

void to_json(nlohmann::json& j, const TrainReport& r) {
  auto grid = nlohmann::json::array();
  for (const auto& g : r.grid) {
    auto epochs = nlohmann::json::array();
    for (const auto& e : g.epochs) epochs.push_back({{"epoch", e.epoch}, {"train", e.train}, {"val", e.val}});
    grid.push_back({{"weight_decay", g.weight_decay},
                    {"diverged", g.diverged},
                    {"failure", g.failure},
                    {"best_epoch", g.best_epoch},
                    {"best_val", g.best_val},
                    {"epochs", epochs}});
  }
  j = {{"variant", r.variant},
       {"selected_weight_decay", r.selected_weight_decay},
       {"best_epoch", r.best_epoch},
       {"best_val", r.best_val},
       {"records", {{"train", r.train_records}, {"val", r.val_records}, {"test", r.test_records}}},
       {"checkpoint_id", r.checkpoint_id},
       {"grid", grid}};
}

const sim::IntersectionTopology& topology_for(const sim::SimulationRecord& r,
                                              std::span<const sim::IntersectionTopology> topologies) {
  for (const auto& t : topologies)
    if (t.id == r.isc) return t;
  throw ConfigError("no topology for intersection '" + r.isc + "'");
}

std::vector<std::pair<Task, Var>> record_losses(Tape& tape, const model::ForwardInputs& in, const model::Bound& params,
                                                const TrainConfig& config) {
  const model::ForwardOutputs out = model::mtdt_forward(tape, in, params, config.model, model::Mode::Training);
  std::vector<std::pair<Task, Var>> parts;
  for (Task t : config.tasks()) {
    switch (t) {
      case Task::Ext: parts.emplace_back(t, task_loss(t, *out.ext, tape.constant(*in.ext))); break;
      case Task::Inf: parts.emplace_back(t, task_loss(t, *out.inf, tape.constant(*in.inf))); break;
      case Task::Ql: parts.emplace_back(t, task_loss(t, out.ql, tape.constant(*in.ql))); break;
      case Task::Tt: parts.emplace_back(t, task_loss(t, out.tt, tape.constant(*in.tt))); break;
    }
  }
  return parts;
}

namespace {

std::vector<model::ForwardInputs> prepare_all(std::span<const sim::SimulationRecord> data,
                                              const std::vector<std::size_t>& index,
                                              std::span<const sim::IntersectionTopology> topologies,
                                              const Normalizer& norm) {
  std::vector<model::ForwardInputs> out;
  out.reserve(index.size());
  for (std::size_t i : index) out.push_back(model::prepare_inputs(data[i], topology_for(data[i], topologies), norm, true));
  return out;
}

LossParts mean_loss(const Parameters& params, const TrainConfig& config,
                    const std::vector<model::ForwardInputs>& inputs) {
  LossParts acc;
  for (const auto& in : inputs) {
    Tape tape;
    const model::Bound bound(tape, params, false);
    for (const auto& [t, v] : record_losses(tape, in, bound, config)) acc.add(t, v.value().item());
  }
  return inputs.empty() ? acc : scaled(acc, 1.0 / static_cast<double>(inputs.size()));
}

GridResult run_grid_point(double weight_decay, const TrainConfig& config,
                          const std::vector<model::ForwardInputs>& train_in,
                          const std::vector<model::ForwardInputs>& val_in, Parameters& best_params) {
  GridResult result;
  result.weight_decay = weight_decay;
  Parameters params = model::init_parameters(config.model, config.seed);
  std::vector<Tensor> velocity;
  for (const auto& [name, value] : params.items()) velocity.emplace_back(value.shape());
  best_params = params;
  bool have_best = false;

  std::vector<std::size_t> order(train_in.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    Rng shuffle(derive_seed(config.seed, epoch));
    for (std::size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[static_cast<std::size_t>(shuffle.uniform_int(0, static_cast<std::int64_t>(i) - 1))]);

    LossParts epoch_loss;
    for (std::size_t start = 0; start < order.size() && !result.diverged; start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      std::vector<Tensor> grad;
      for (const auto& [name, value] : params.items()) grad.emplace_back(value.shape());
      for (std::size_t k = start; k < end; ++k) {
        Tape tape;
        const model::Bound bound(tape, params, true);
        const auto parts = record_losses(tape, train_in[order[k]], bound, config);
        std::vector<Var> vars;
        for (const auto& [t, v] : parts) {
          epoch_loss.add(t, v.value().item());
          vars.push_back(v);
        }
        const Var total = total_loss(vars);
        if (!std::isfinite(total.value().item())) {
          result.diverged = true;
          result.failure = "non-finite loss in epoch " + std::to_string(epoch);
          break;
        }
        tape.backward(total);
        for (std::size_t p = 0; p < grad.size(); ++p) {
          const Tensor g = tape.grad(bound.vars()[p].second);
          for (std::size_t e = 0; e < g.size(); ++e) grad[p][e] += g[e];
        }
      }
      if (result.diverged) break;

      const double inv = 1.0 / static_cast<double>(end - start);
      double norm2 = 0.0;
      for (auto& g : grad)
        for (double& v : g.data()) {
          v *= inv;
          norm2 += v * v;
        }
      const double norm = std::sqrt(norm2);
      const double clip = config.clip_norm > 0.0 && norm > config.clip_norm ? config.clip_norm / norm : 1.0;
      for (std::size_t p = 0; p < grad.size(); ++p) {
        Tensor& theta = params.items()[p].second;
        for (std::size_t e = 0; e < theta.size(); ++e) {
          const double g = grad[p][e] * clip + weight_decay * theta[e];
          velocity[p][e] = config.momentum * velocity[p][e] - config.learning_rate * g;
          theta[e] += velocity[p][e];
        }
      }
      if (!params.all_finite()) {
        result.diverged = true;
        result.failure = "non-finite parameters in epoch " + std::to_string(epoch);
      }
    }
    if (result.diverged) break;

    EpochLog log;
    log.epoch = epoch;
    log.train = scaled(epoch_loss, 1.0 / static_cast<double>(std::max<std::size_t>(1, train_in.size())));
    log.val = val_in.empty() ? log.train : mean_loss(params, config, val_in);
    if (!std::isfinite(log.val.total)) {
      result.diverged = true;
      result.failure = "non-finite validation loss in epoch " + std::to_string(epoch);
      break;
    }
    result.epochs.push_back(log);
    if (!have_best || log.val.total < result.best_val) {
      have_best = true;
      result.best_val = log.val.total;
      result.best_epoch = epoch;
      best_params = params;
    }
  }
  return result;
}

}  // namespace

LossParts evaluate_loss(const Parameters& params, const TrainConfig& config, const Normalizer& norm,
                        std::span<const sim::SimulationRecord> records,
                        std::span<const sim::IntersectionTopology> topologies) {
  std::vector<std::size_t> all(records.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  return mean_loss(params, config, prepare_all(records, all, topologies, norm));
}

model::Checkpoint to_checkpoint(const TrainResult& result, const TrainConfig& config,
                                std::span<const sim::IntersectionTopology> topologies) {
  model::Checkpoint c;
  c.config = config.model;
  c.norm = result.norm;
  c.params = result.params;
  c.hyperparameters = {{"train", config},
                       {"selected_weight_decay", result.report.selected_weight_decay},
                       {"best_epoch", result.report.best_epoch},
                       {"best_val", result.report.best_val}};
  c.topologies.assign(topologies.begin(), topologies.end());
  return c;
}

TrainResult train(std::span<const sim::SimulationRecord> data, std::span<const sim::IntersectionTopology> topologies,
                  const TrainConfig& config) {
  validate(config);
  std::vector<sim::SimulationRecord> pool;
  for (const auto& r : data)
    if (config.single_intersection.empty() || r.isc == config.single_intersection) pool.push_back(r);
  if (pool.size() < 4) throw ContractError("training needs at least 4 records, got " + std::to_string(pool.size()));

  TrainResult result;
  result.split = split(pool.size(), config.split, config.seed);
  std::vector<sim::SimulationRecord> train_records;
  for (std::size_t i : result.split.train) train_records.push_back(pool[i]);
  result.norm = Normalizer::fit(train_records);

  const auto train_in = prepare_all(pool, result.split.train, topologies, result.norm);
  const auto val_in = prepare_all(pool, result.split.val, topologies, result.norm);

  TrainReport& report = result.report;
  report.variant = model::to_string(config.model.variant);
  report.train_records = result.split.train.size();
  report.val_records = result.split.val.size();
  report.test_records = result.split.test.size();
  bool selected = false;
  for (double wd : config.weight_decay_grid) {
    Parameters best;
    GridResult g = run_grid_point(wd, config, train_in, val_in, best);
    if (!g.diverged && (!selected || g.best_val < report.best_val)) {
      selected = true;
      report.best_val = g.best_val;
      report.best_epoch = g.best_epoch;
      report.selected_weight_decay = wd;
      result.params = std::move(best);
    }
    report.grid.push_back(std::move(g));
  }
  if (!selected) throw ConfigError("every weight-decay grid point diverged; lower the learning rate");
  report.checkpoint_id = to_checkpoint(result, config, topologies).id();
  return result;
}

}  // namespace mtdt::train
