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

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <set>

#include <nlohmann/json.hpp>

#include "fixtures.hpp"
#include "gradcheck.hpp"
#include "mtdt/error.hpp"

namespace mtdt::train {
namespace {

using testing::random_tensor;
using testing::small_dataset;
using testing::topologies;
using tensor::Tensor;

TrainConfig quick_config(std::size_t epochs = 2) {
  TrainConfig c;
  c.epochs = epochs;
  c.weight_decay_grid = {0.0};
  c.batch_size = 4;
  c.seed = 11;
  return c;
}

// ---------------------------------------------------------------------------
// Normalization

TEST(Normalization, MinMaxExamples) {
  const MinMax m{0.0, 8.0};
  EXPECT_EQ(m.forward(4.0), 0.5);
  EXPECT_EQ(m.forward(8.0), 1.0);
  EXPECT_EQ(m.inverse(0.25), 2.0);
  const MinMax flat{3.0, 3.0};
  EXPECT_TRUE(flat.degenerate());
  EXPECT_EQ(flat.forward(3.0), 0.0);
  EXPECT_EQ(flat.inverse(0.0), 3.0);
}

TEST(Normalization, QueueLengthUsesLog1p) {
  const Normalizer n = Normalizer::fit(small_dataset());
  EXPECT_EQ(n.normalize(Task::Ql, 0.0), 0.0);
  EXPECT_NEAR(n.normalize(Task::Ql, std::exp(1.0) - 1.0), 1.0, 1e-15);
  EXPECT_NEAR(n.denormalize(Task::Ql, std::log1p(120.0)), 120.0, 1e-9);
  EXPECT_THROW((void)n.stats(Channel::Ql), ContractError);
}

TEST(Normalization, RoundTripIsIdentity) {
  const Normalizer n = Normalizer::fit(small_dataset());
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> waveform(0.0, 8.0), queue(0.0, 1200.0), hist(0.0, 60.0);
  for (int k = 0; k < 1000; ++k) {
    for (Task t : {Task::Ext, Task::Inf}) {
      const double v = waveform(rng);
      EXPECT_NEAR(n.denormalize(t, n.normalize(t, v)), v, 1e-9);
    }
    const double q = queue(rng);
    EXPECT_NEAR(n.denormalize(Task::Ql, n.normalize(Task::Ql, q)), q, 1e-9);
    const double h = hist(rng);
    EXPECT_NEAR(n.denormalize(Task::Tt, n.normalize(Task::Tt, h)), h, 1e-9);
    const double s = waveform(rng);
    EXPECT_NEAR(n.denormalize(Channel::Stp, n.normalize(Channel::Stp, s)), s, 1e-9);
  }
}

TEST(Normalization, TensorRoundTripOnRecords) {
  const Normalizer n = Normalizer::fit(small_dataset());
  for (const auto& r : small_dataset()) {
    const Tensor back = n.denormalize(Task::Ql, n.normalize(Task::Ql, r.ql));
    for (std::size_t i = 0; i < back.size(); ++i) EXPECT_NEAR(back[i], r.ql.values()[i], 1e-9);
    const Tensor tt = n.denormalize(Task::Tt, n.normalize(Task::Tt, r.tt));
    for (std::size_t i = 0; i < tt.size(); ++i) EXPECT_NEAR(tt[i], r.tt.values()[i], 1e-9);
  }
}

TEST(Normalization, StatisticsComeFromTheGivenRecordsOnly) {
  auto a = testing::zero_record(topologies().front());
  auto b = a;
  a.ext(0, 0) = 2;
  b.ext(3, 4) = 6;
  const std::vector<sim::SimulationRecord> only_a{a}, both{a, b};
  EXPECT_EQ(Normalizer::fit(only_a).stats(Channel::Ext).max, 2.0);
  EXPECT_EQ(Normalizer::fit(both).stats(Channel::Ext).max, 6.0);
  EXPECT_EQ(Normalizer::fit(both).stats(Channel::Ext).min, 0.0);
}

TEST(Normalization, UnfittedUseIsContractError) {
  const Normalizer n;
  EXPECT_THROW((void)n.normalize(Task::Ext, 1.0), ContractError);
}

TEST(Normalization, JsonRoundTrip) {
  const Normalizer n = Normalizer::fit(small_dataset());
  const nlohmann::json j = n;
  const Normalizer back = j.get<Normalizer>();
  for (Channel c : {Channel::Ext, Channel::Inf, Channel::Tt, Channel::Stp}) {
    EXPECT_EQ(back.stats(c).min, n.stats(c).min);
    EXPECT_EQ(back.stats(c).max, n.stats(c).max);
  }
}

// ---------------------------------------------------------------------------
// Losses

TEST(Loss, UniformPredictorCrossEntropyIsLog200) {
  tensor::Tape tape;
  Tensor target({1, 200});
  target.at(0, 9) = 1.0;
  const Var l = task_loss(Task::Tt, tape.constant(Tensor({1, 200})), tape.constant(target));
  EXPECT_NEAR(l.value().item(), std::log(200.0), 1e-9);
}

TEST(Loss, CrossEntropyIsAtLeastTargetEntropy) {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 200; ++trial) {
    const Tensor p = random_tensor({1, 200}, rng, 0.0, 1.0);
    const Tensor logits = random_tensor({1, 200}, rng, -3.0, 3.0);
    double total = 0.0, entropy = 0.0;
    for (double v : p.data()) total += v;
    for (double v : p.data()) entropy -= v / total * std::log(v / total);
    tensor::Tape tape;
    const double ce = task_loss(Task::Tt, tape.constant(logits), tape.constant(p)).value().item();
    EXPECT_GE(ce, entropy - 1e-12);
    Tensor exact = p;
    for (double& v : exact.data()) v = std::log(v / total);
    const double at_p = task_loss(Task::Tt, tape.constant(exact), tape.constant(p)).value().item();
    EXPECT_NEAR(at_p, entropy, 1e-12);
  }
}

TEST(Loss, EmptyHistogramRowContributesNothing) {
  tensor::Tape tape;
  Tensor target({2, 200});
  target.at(0, 3) = 5.0;
  const Tensor logits({2, 200});
  const double both = task_loss(Task::Tt, tape.constant(logits), tape.constant(target)).value().item();
  EXPECT_NEAR(both, std::log(200.0) / 2.0, 1e-12);
}

TEST(Loss, WaveformTasksUseMeanSquaredError) {
  tensor::Tape tape;
  const Var l = task_loss(Task::Ext, tape.constant(Tensor::matrix({{1, 2}})), tape.constant(Tensor::matrix({{0, 0}})));
  EXPECT_DOUBLE_EQ(l.value().item(), 2.5);
}

TEST(Loss, TotalIsSumOfParts) {
  tensor::Tape tape;
  const std::vector<Var> parts{tape.constant(Tensor::scalar(0.1)), tape.constant(Tensor::scalar(0.2)),
                               tape.constant(Tensor::scalar(0.3)), tape.constant(Tensor::scalar(0.4))};
  EXPECT_NEAR(total_loss(parts).value().item(), 1.0, 1e-15);
  EXPECT_THROW(total_loss(std::vector<Var>{}), ContractError);
}

TEST(Loss, TotalGradientIsSumOfPartGradients) {
  const auto& r = small_dataset()[0];
  const auto& topo = testing::topology_of(r);
  const Normalizer norm = Normalizer::fit(small_dataset());
  const auto in = model::prepare_inputs(r, topo, norm, true);
  const TrainConfig config;
  const auto params = model::init_parameters(config.model, 3);

  std::vector<Tensor> total_grad;
  double total_value = 0.0;
  {
    tensor::Tape tape;
    const model::Bound bound(tape, params, true);
    const auto parts = record_losses(tape, in, bound, config);
    std::vector<Var> vars;
    for (const auto& [t, v] : parts) vars.push_back(v);
    const Var total = total_loss(vars);
    total_value = total.value().item();
    tape.backward(total);
    for (const auto& [n, v] : bound.vars()) total_grad.push_back(tape.grad(v));
  }
  std::vector<Tensor> summed;
  double summed_value = 0.0;
  for (std::size_t k = 0; k < config.tasks().size(); ++k) {
    tensor::Tape tape;
    const model::Bound bound(tape, params, true);
    const auto parts = record_losses(tape, in, bound, config);
    summed_value += parts[k].second.value().item();
    tape.backward(parts[k].second);
    for (std::size_t p = 0; p < bound.vars().size(); ++p) {
      const Tensor g = tape.grad(bound.vars()[p].second);
      if (summed.size() <= p) summed.push_back(Tensor(g.shape()));
      for (std::size_t e = 0; e < g.size(); ++e) summed[p][e] += g[e];
    }
  }
  EXPECT_NEAR(total_value, summed_value, 1e-12);
  for (std::size_t p = 0; p < summed.size(); ++p)
    for (std::size_t e = 0; e < summed[p].size(); ++e) EXPECT_NEAR(total_grad[p][e], summed[p][e], 1e-12);
}

TEST(Loss, TaskGradientsStayInTheirModule) {
  const auto& r = small_dataset()[1];
  const Normalizer norm = Normalizer::fit(small_dataset());
  const auto in = model::prepare_inputs(r, testing::topology_of(r), norm, true);
  const TrainConfig config;
  const auto params = model::init_parameters(config.model, 5);
  const std::array<std::string, 4> owner{"ext.", "inf.", "ql.", "tt."};
  for (std::size_t k = 0; k < 4; ++k) {
    tensor::Tape tape;
    const model::Bound bound(tape, params, true);
    const auto parts = record_losses(tape, in, bound, config);
    ASSERT_EQ(parts[k].first, static_cast<Task>(k));
    tape.backward(parts[k].second);
    for (const auto& [name, v] : bound.vars()) {
      const Tensor g = tape.grad(v);
      const bool moved = std::any_of(g.data().begin(), g.data().end(), [](double x) { return x != 0.0; });
      if (name.rfind(owner[k], 0) != 0) EXPECT_FALSE(moved) << to_string(static_cast<Task>(k)) << " -> " << name;
    }
  }
}

// ---------------------------------------------------------------------------
// Splits and configuration

TEST(Split, TwentyRecordsGiveFifteenThreeTwo) {
  const Split s = split(20, {0.75, 0.15, 0.10}, 1);
  EXPECT_EQ(s.train.size(), 15u);
  EXPECT_EQ(s.val.size(), 3u);
  EXPECT_EQ(s.test.size(), 2u);
}

TEST(Split, DisjointCoverDeterministicPerSeed) {
  for (std::size_t n : {4u, 9u, 20u, 137u}) {
    const Split s = split(n, {0.75, 0.15, 0.10}, n);
    std::set<std::size_t> all;
    for (const auto* part : {&s.train, &s.val, &s.test})
      for (std::size_t i : *part) EXPECT_TRUE(all.insert(i).second);
    EXPECT_EQ(all.size(), n);
    EXPECT_EQ(*all.rbegin(), n - 1);
    const Split again = split(n, {0.75, 0.15, 0.10}, n);
    EXPECT_EQ(again.train, s.train);
    EXPECT_EQ(again.val, s.val);
  }
  EXPECT_NE(split(50, {0.75, 0.15, 0.10}, 1).train, split(50, {0.75, 0.15, 0.10}, 2).train);
}

TEST(TrainConfigTest, ValidationAndJson) {
  TrainConfig c;
  c.split = {0.5, 0.5, 0.5};
  EXPECT_THROW(validate(c), ConfigError);
  c = TrainConfig{};
  c.weight_decay_grid.clear();
  EXPECT_THROW(validate(c), ConfigError);
  c = TrainConfig{};
  c.batch_size = 0;
  EXPECT_THROW(validate(c), ConfigError);

  c = TrainConfig{};
  c.epochs = 7;
  c.single_intersection = "I2";
  c.model.variant = model::Variant::MoeOnly;
  const nlohmann::json j = c;
  const nlohmann::json back = j.get<TrainConfig>();
  EXPECT_EQ(j, back);
  EXPECT_EQ(c.tasks(), (std::vector<Task>{Task::Ql, Task::Tt}));
}

TEST(TopologyLookup, UnknownIntersectionIsConfigError) {
  auto r = small_dataset()[0];
  r.isc = "nowhere";
  EXPECT_THROW((void)topology_for(r, topologies()), ConfigError);
}

// ---------------------------------------------------------------------------
// Training loop

TEST(Train, ZeroLearningRateLeavesParametersUnchanged) {
  TrainConfig c = quick_config(3);
  c.learning_rate = 0.0;
  const auto result = train(small_dataset(), topologies(), c);
  EXPECT_EQ(result.params, model::init_parameters(c.model, c.seed));
  const auto& epochs = result.report.grid.front().epochs;
  ASSERT_EQ(epochs.size(), 3u);
  for (const auto& e : epochs) {
    EXPECT_NEAR(e.train.total, epochs.front().train.total, 1e-12);
    EXPECT_NEAR(e.val.total, epochs.front().val.total, 1e-12);
  }
}

TEST(Train, BestEpochHasLowestValidationLoss) {
  TrainConfig c = quick_config(4);
  c.weight_decay_grid = {0.0, 1e-3};
  const auto result = train(small_dataset(), topologies(), c);
  ASSERT_EQ(result.report.grid.size(), 2u);
  for (const auto& g : result.report.grid) {
    ASSERT_FALSE(g.diverged);
    for (const auto& e : g.epochs) EXPECT_LE(g.best_val, e.val.total);
    EXPECT_EQ(g.epochs[g.best_epoch - 1].val.total, g.best_val);
  }
  double best = std::numeric_limits<double>::infinity();
  for (const auto& g : result.report.grid) best = std::min(best, g.best_val);
  EXPECT_EQ(result.report.best_val, best);
}

TEST(Train, SelectedParametersReproduceBestValidationLoss) {
  const TrainConfig c = quick_config(3);
  const auto result = train(small_dataset(), topologies(), c);
  std::vector<sim::SimulationRecord> val;
  for (std::size_t i : result.split.val) val.push_back(small_dataset()[i]);
  const LossParts l = evaluate_loss(result.params, c, result.norm, val, topologies());
  EXPECT_NEAR(l.total, result.report.best_val, 1e-12);
  EXPECT_NEAR(l.total, l.ext + l.inf + l.ql + l.tt, 1e-12);
}

TEST(Train, SplitSizesAndLossesAreReported) {
  const auto result = train(small_dataset(), topologies(), quick_config(1));
  EXPECT_EQ(result.report.train_records, 9u);
  EXPECT_EQ(result.report.val_records, 2u);
  EXPECT_EQ(result.report.test_records, 1u);
  const nlohmann::json j = result.report;
  EXPECT_EQ(j.at("variant"), "mtdt");
  EXPECT_EQ(j.at("grid").size(), 1u);
  const auto& e = j.at("grid")[0].at("epochs")[0];
  for (const char* k : {"ext", "inf", "ql", "tt", "total"}) EXPECT_TRUE(e.at("train").contains(k));
  EXPECT_EQ(result.report.checkpoint_id, to_checkpoint(result, quick_config(1), topologies()).id());
}

TEST(Train, IsDeterministic) {
  const auto a = train(small_dataset(), topologies(), quick_config(2));
  const auto b = train(small_dataset(), topologies(), quick_config(2));
  EXPECT_EQ(a.params, b.params);
  EXPECT_EQ(a.report.best_val, b.report.best_val);
}

TEST(Train, TrainingLossDecreases) {
  TrainConfig c = quick_config(6);
  c.learning_rate = 0.05;
  const auto result = train(small_dataset(), topologies(), c);
  const auto& epochs = result.report.grid.front().epochs;
  EXPECT_LT(epochs.back().train.total, epochs.front().train.total);
}

TEST(Train, DivergentGridPointIsRecordedAndSkipped) {
  TrainConfig c = quick_config(2);
  c.weight_decay_grid = {0.0, 1e9};
  const auto result = train(small_dataset(), topologies(), c);
  ASSERT_EQ(result.report.grid.size(), 2u);
  EXPECT_FALSE(result.report.grid[0].diverged);
  EXPECT_TRUE(result.report.grid[1].diverged);
  EXPECT_FALSE(result.report.grid[1].failure.empty());
  EXPECT_EQ(result.report.selected_weight_decay, 0.0);
  EXPECT_TRUE(result.params.all_finite());
}

TEST(Train, EveryGridPointDivergingIsConfigError) {
  TrainConfig c = quick_config(2);
  c.weight_decay_grid = {1e9};
  EXPECT_THROW(train(small_dataset(), topologies(), c), ConfigError);
}

TEST(Train, SingleIntersectionFilter) {
  const std::string id = small_dataset()[0].isc;
  std::vector<sim::SimulationRecord> data;
  for (std::uint64_t k = 0; k < 5; ++k) {
    auto more = sim::generate_dataset(sim::default_dataset_config(), 16, 300 + k);
    data.insert(data.end(), more.begin(), more.end());
  }
  const auto count = static_cast<std::size_t>(
      std::count_if(data.begin(), data.end(), [&](const auto& r) { return r.isc == id; }));
  TrainConfig c = quick_config(1);
  c.single_intersection = id;
  const auto result = train(data, topologies(), c);
  EXPECT_EQ(result.report.train_records + result.report.val_records + result.report.test_records, count);
}

TEST(Train, TooFewRecordsIsContractError) {
  const std::vector<sim::SimulationRecord> three(small_dataset().begin(), small_dataset().begin() + 3);
  EXPECT_THROW(train(three, topologies(), quick_config(1)), ContractError);
}

TEST(Train, MoeVariantTrainsOnlyHeads) {
  TrainConfig c = quick_config(1);
  c.model.variant = model::Variant::MoeOnly;
  const auto result = train(small_dataset(), topologies(), c);
  EXPECT_FALSE(result.params.contains("ext.B"));
  EXPECT_EQ(result.report.variant, "mtdt-moe");
  EXPECT_EQ(result.report.grid[0].epochs[0].train.ext, 0.0);
}

}  // namespace
}  // namespace mtdt::train
