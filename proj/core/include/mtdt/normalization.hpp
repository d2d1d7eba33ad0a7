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

// Per-task value scaling. Waveforms and histograms use min-max, queue
// lengths use log1p. Statistics come from the training split only.

#include <span>
#include <string>

#include <nlohmann/json_fwd.hpp>

#include "mtdt/matrix.hpp"
#include "mtdt/sim/record.hpp"
#include "mtdt/tensor.hpp"

namespace mtdt {

enum class Task { Ext, Inf, Ql, Tt };

std::string to_string(Task t);

/// Stop-bar inputs are scaled like the waveform targets; they get their own
/// statistics.
enum class Channel { Ext, Inf, Ql, Tt, Stp };

inline Channel channel(Task t) { return static_cast<Channel>(static_cast<int>(t)); }

struct MinMax {
  double min = 0.0;
  double max = 0.0;

  /// max == min: everything maps to 0 and back to the constant.
  bool degenerate() const { return !(max > min); }
  double forward(double v) const { return degenerate() ? 0.0 : (v - min) / (max - min); }
  double inverse(double y) const { return degenerate() ? min : min + y * (max - min); }
};

class Normalizer {
 public:
  Normalizer() = default;

  /// Fits min-max statistics for ext, inf, tt and stp on `train`.
  static Normalizer fit(std::span<const sim::SimulationRecord> train);

  bool fitted() const { return fitted_; }
  const MinMax& stats(Channel c) const;

  double normalize(Channel c, double v) const;
  double denormalize(Channel c, double y) const;
  double normalize(Task t, double v) const { return normalize(channel(t), v); }
  double denormalize(Task t, double y) const { return denormalize(channel(t), y); }

  tensor::Tensor normalize(Channel c, const IntMatrix& m) const;
  tensor::Tensor normalize(Task t, const IntMatrix& m) const { return normalize(channel(t), m); }
  tensor::Tensor denormalize(Channel c, const tensor::Tensor& y) const;
  tensor::Tensor denormalize(Task t, const tensor::Tensor& y) const { return denormalize(channel(t), y); }

  friend void to_json(nlohmann::json& j, const Normalizer& n);
  friend void from_json(const nlohmann::json& j, Normalizer& n);

 private:
  void require_fitted() const;

  bool fitted_ = false;
  MinMax ext_, inf_, tt_, stp_;
};

}  // namespace mtdt
