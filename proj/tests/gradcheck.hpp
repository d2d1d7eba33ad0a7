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

// Central finite-difference gradient oracle used across the test suites.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "mtdt/tensor.hpp"

namespace mtdt::testing {

using tensor::Tape;
using tensor::Tensor;
using tensor::Var;

using LossFn = std::function<Var(Tape&, const std::vector<Var>&)>;

inline Tensor random_tensor(tensor::Shape shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  Tensor t(std::move(shape));
  std::uniform_real_distribution<double> dist(lo, hi);
  for (double& v : t.data()) v = dist(rng);
  return t;
}

struct GradCheckResult {
  double worst_relative_error = 0.0;
  std::size_t worst_input = 0;
  std::size_t checked = 0;
  std::size_t skipped = 0;  // coordinates whose +-h step changes a relu/maxpool branch
};

/// Evaluates `loss` on fresh tapes and compares the autodiff gradient of every
/// input with a central difference of step `h`. Relative error per input is
/// ||g_auto - g_fd|| / max(||g_auto||, ||g_fd||, floor). When `max_coords` is
/// nonzero, at most that many coordinates per input are compared (sampled
/// with `seed`). A coordinate whose +-h evaluations take a different branch
/// of a piecewise op than the base point straddles a kink; it is skipped and
/// counted, and the next sampled coordinate is used instead.
inline GradCheckResult grad_check(const LossFn& loss, const std::vector<Tensor>& inputs, double h = 1e-5,
                                  std::size_t max_coords = 0, std::uint64_t seed = 0, double floor = 1e-8) {
  std::vector<Tensor> analytic;
  std::uint64_t base_branch = 0;
  {
    Tape tape;
    std::vector<Var> vars;
    for (const auto& t : inputs) vars.push_back(tape.parameter(t));
    Var l = loss(tape, vars);
    base_branch = tape.branch_signature();
    tape.backward(l);
    for (const auto& v : vars) analytic.push_back(tape.grad(v));
  }
  auto eval = [&](const std::vector<Tensor>& xs) {
    Tape tape;
    std::vector<Var> vars;
    for (const auto& t : xs) vars.push_back(tape.constant(t));
    const double value = loss(tape, vars).value().item();
    return std::pair{value, tape.branch_signature()};
  };
  GradCheckResult result;
  std::vector<Tensor> work = inputs;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    double diff2 = 0.0, a2 = 0.0, n2 = 0.0;
    std::vector<std::size_t> coords(inputs[i].size());
    for (std::size_t k = 0; k < coords.size(); ++k) coords[k] = k;
    if (max_coords != 0) std::shuffle(coords.begin(), coords.end(), std::mt19937_64(seed + i));
    std::size_t used = 0;
    for (std::size_t k : coords) {
      if (max_coords != 0 && used == max_coords) break;
      const double orig = work[i][k];
      work[i][k] = orig + h;
      const auto [up, up_branch] = eval(work);
      work[i][k] = orig - h;
      const auto [down, down_branch] = eval(work);
      work[i][k] = orig;
      if (up_branch != base_branch || down_branch != base_branch) {
        ++result.skipped;
        continue;
      }
      ++used;
      const double fd = (up - down) / (2.0 * h);
      const double an = analytic[i][k];
      diff2 += (an - fd) * (an - fd);
      a2 += an * an;
      n2 += fd * fd;
    }
    result.checked += used;
    const double denom = std::max({std::sqrt(a2), std::sqrt(n2), floor});
    const double rel = std::sqrt(diff2) / denom;
    if (rel > result.worst_relative_error) {
      result.worst_relative_error = rel;
      result.worst_input = i;
    }
  }
  return result;
}

}  // namespace mtdt::testing
