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

// Finite-difference checks of the two full module forwards, shared by the
// model suite and the acceptance runner.

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "fixtures.hpp"
#include "gradcheck.hpp"
#include "mtdt/model.hpp"

namespace mtdt::testing {

inline constexpr std::size_t kModuleProbeCoords = 12;

/// Checks every GAT parameter of one module on
/// a standard-topology graph. Even seeds use the exit graph, odd seeds the
/// inflow graph.
inline GradCheckResult gat_fd_check(std::uint64_t seed, double h = 1e-5) {
  const model::ModelConfig config;
  const auto& topo = topologies()[seed % topologies().size()];
  std::mt19937_64 rng(seed);
  const Tensor stp = random_tensor({48, config.window}, rng, 0.0, 1.0);
  const Tensor z = random_tensor({config.edge_feature_size()}, rng, 0.0, 1.0);
  const auto kind = seed % 2 == 0 ? graph::GraphKind::Exit : graph::GraphKind::Inflow;
  const std::string pre = kind == graph::GraphKind::Exit ? "ext" : "inf";
  const auto g = graph::build_graph(kind, stp, z, topo);
  const Tensor target = random_tensor({g.targets(), config.window}, rng, 0.0, 1.0);

  const auto params = model::init_parameters(config, seed);
  std::vector<std::string> names;
  std::vector<Tensor> inputs;
  for (const auto& [name, value] : params.items())
    if (name.rfind(pre + ".", 0) == 0) {
      names.push_back(name);
      inputs.push_back(value);
    }
  auto loss = [&](Tape& tape, const std::vector<Var>& vars) {
    std::vector<std::pair<std::string, Var>> bound;
    for (std::size_t k = 0; k < names.size(); ++k) bound.emplace_back(names[k], vars[k]);
    const auto out = model::gat_forward(tape, g, model::Bound(std::move(bound)), pre);
    return tensor::mse(out.targets, tape.constant(target));
  };
  return grad_check(loss, inputs, h, kModuleProbeCoords, seed);
}

/// Checks the CNN head parameters and the primary series
/// for both heads.
inline GradCheckResult cnn_fd_check(std::uint64_t seed, double h = 1e-5) {
  const model::ModelConfig config;
  std::mt19937_64 rng(seed ^ 0x5eedULL);
  const std::size_t w = config.window;
  const Tensor stp_phase = random_tensor({8, w}, rng, 0.0, 1.0);
  const Tensor stp_total = random_tensor({1, w}, rng, 0.0, 4.0);
  Tensor sig({8, w});
  for (double& v : sig.data()) v = rng() % 2 == 0 ? 0.0 : 1.0;
  const model::DriverChannels drv{0.1, 0.05, 0.08};
  const Tensor primary = random_tensor({8, w}, rng, 0.0, 2.0);
  const auto params = model::init_parameters(config, seed);

  GradCheckResult worst;
  for (model::Head head : {model::Head::Ql, model::Head::Tt}) {
    const std::string pre = head == model::Head::Ql ? "ql." : "tt.";
    std::vector<std::string> names;
    std::vector<Tensor> inputs{primary};
    for (const auto& [name, value] : params.items())
      if (name.rfind(pre, 0) == 0) {
        names.push_back(name);
        inputs.push_back(value);
      }
    const Tensor target = random_tensor({8, config.head_size(head)}, rng, 0.0, 1.0);
    auto loss = [&](Tape& tape, const std::vector<Var>& vars) {
      std::vector<std::pair<std::string, Var>> bound;
      for (std::size_t k = 0; k < names.size(); ++k) bound.emplace_back(names[k], vars[k + 1]);
      const Var out =
          model::cnn_forward(model::mts_slices(vars[0], stp_phase, stp_total, sig, drv), model::Bound(std::move(bound)), head);
      return head == model::Head::Ql ? tensor::mse(out, tape.constant(target))
                                     : tensor::soft_cross_entropy(out, tape.constant(target));
    };
    const auto r = grad_check(loss, inputs, h, kModuleProbeCoords, seed);
    worst.checked += r.checked;
    worst.skipped += r.skipped;
    if (r.worst_relative_error >= worst.worst_relative_error) {
      worst.worst_relative_error = r.worst_relative_error;
      worst.worst_input = r.worst_input;
    }
  }
  return worst;
}

}  // namespace mtdt::testing
