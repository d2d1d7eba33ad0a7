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

// The four learnable modules: two graph-attention imputers (exit, inflow)
// and two 1D CNN heads (queue length, travel time), plus the lane-to-phase
// aggregation and multivariate series that connect them.

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "mtdt/graph.hpp"
#include "mtdt/normalization.hpp"
#include "mtdt/sim/record.hpp"
#include "mtdt/sim/topology.hpp"
#include "mtdt/tensor.hpp"

namespace mtdt::model {

using tensor::Tape;
using tensor::Tensor;
using tensor::Var;

inline constexpr std::size_t kMtsChannels = 7;

enum class Variant { Full, MoeOnly };
enum class Mode { Training, Inference };
enum class Head { Ql, Tt };

std::string to_string(Variant v);
Variant variant_from_string(const std::string& s);

struct ModelConfig {
  std::size_t window = 80;
  std::size_t hidden = 64;
  std::array<std::size_t, 3> channels{16, 32, 32};
  std::size_t kernel = 5;
  std::size_t tmc_size = 35;
  std::size_t tt_bins = 200;
  Variant variant = Variant::Full;

  std::size_t edge_feature_size() const { return 8 * window + tmc_size * tmc_size + 9; }
  /// Length after three valid conv + pool-by-2 stages; ConfigError if it
  /// collapses to zero.
  std::size_t pooled_length() const;
  std::size_t flat_size() const { return channels[2] * pooled_length(); }
  std::size_t head_size(Head h) const { return h == Head::Ql ? window : tt_bins; }

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

void to_json(nlohmann::json& j, const ModelConfig& c);
void from_json(const nlohmann::json& j, ModelConfig& c);

/// Named parameter tensors in a fixed order.
class Parameters {
 public:
  void add(std::string name, Tensor value);
  bool contains(const std::string& name) const;
  const Tensor& get(const std::string& name) const;
  Tensor& get(const std::string& name);
  const std::vector<std::pair<std::string, Tensor>>& items() const { return items_; }
  std::vector<std::pair<std::string, Tensor>>& items() { return items_; }
  std::size_t scalar_count() const;
  bool all_finite() const;

  friend bool operator==(const Parameters&, const Parameters&) = default;

 private:
  std::vector<std::pair<std::string, Tensor>> items_;
};

/// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights and biases. Modules
/// disabled by the variant get no parameters.
Parameters init_parameters(const ModelConfig& config, std::uint64_t seed);

/// Parameters placed on a tape, looked up by name.
class Bound {
 public:
  Bound(Tape& tape, const Parameters& params, bool trainable);
  explicit Bound(std::vector<std::pair<std::string, Var>> vars) : vars_(std::move(vars)) {}
  Var operator[](const std::string& name) const;
  const std::vector<std::pair<std::string, Var>>& vars() const { return vars_; }

 private:
  std::vector<std::pair<std::string, Var>> vars_;
};

// ---------------------------------------------------------------------------
// Graph attention

struct GatOutput {
  Var x_hat;    // N x w; observed rows equal the input rows
  Var targets;  // T x w imputed rows
  Var alpha;    // E x 1 attention weights
};

/// `prefix` selects the parameter set ("ext" or "inf").
GatOutput gat_forward(Tape& tape, const graph::SimulationGraph& g, const Bound& params, const std::string& prefix);

// ---------------------------------------------------------------------------
// Phase aggregation

struct PhaseMap {
  std::vector<std::size_t> exit_row;    // 16 entries, phase row per exit lane
  std::vector<std::size_t> inflow_row;  // 12 entries
  std::vector<std::size_t> stop_row;    // 48 entries

  std::vector<std::size_t> members(const std::vector<std::size_t>& rows, std::size_t phase_row) const;
};

/// Exit and inflow lanes take the phase recorded in the topology; stop slots
/// take their lane's phase, absent slots their approach's through phase.
PhaseMap make_phase_map(const sim::IntersectionTopology& topology);

/// Per-phase sum of member lane rows. Throws ConfigError if a lane has no
/// phase or the map does not cover every lane.
Tensor aggregate_to_phases(const Tensor& lanes, std::span<const std::size_t> lane_row);
Var aggregate_to_phases(Var lanes, std::span<const std::size_t> lane_row);

// ---------------------------------------------------------------------------
// Multivariate series

/// The three behaviour parameters fed to the CNN heads, already scaled.
struct DriverChannels {
  double accel = 0.0;
  double lc_cooperative = 0.0;
  double min_gap = 0.0;
};

/// 8 x 7 x w: [primary, stp, sig, accel, lc_cooperative, min_gap, stp total].
Tensor build_mts(const Tensor& primary, const Tensor& stp_phase, const Tensor& stp_total, const Tensor& sig,
                 const DriverChannels& drv);

/// Per-phase 7 x w slices of the same series; gradients flow into `primary`.
std::vector<Var> mts_slices(Var primary, const Tensor& stp_phase, const Tensor& stp_total, const Tensor& sig,
                            const DriverChannels& drv);

// ---------------------------------------------------------------------------
// CNN heads

/// Applies the same conv stack to each phase slice; returns 8 x w for the
/// queue head (ReLU) or 8 x bins raw logits for the travel-time head.
Var cnn_forward(const std::vector<Var>& slices, const Bound& params, Head head);

// ---------------------------------------------------------------------------
// Full model

/// Record contents in model scale.
struct ForwardInputs {
  Tensor stp;        // 48 x w normalised
  Tensor stp_phase;  // 8 x w
  Tensor stp_total;  // 1 x w
  Tensor sig;        // 8 x w
  Tensor z;          // edge features
  DriverChannels drv;
  std::optional<Tensor> ext;  // 16 x w normalised ground truth
  std::optional<Tensor> inf;  // 12 x w
  std::optional<Tensor> ql;   // 8 x w, log1p scale
  std::optional<Tensor> tt;   // 8 x bins, min-max scale
  PhaseMap phases;
  graph::SimulationGraph exit_graph;
  graph::SimulationGraph inflow_graph;
};

/// Behaviour values enter the network divided by this (the top of their allowed range).
inline constexpr double kDriverScale = 30.0;

ForwardInputs prepare_inputs(const sim::SimulationRecord& record, const sim::IntersectionTopology& topology,
                             const Normalizer& norm, bool with_targets);

struct ForwardOutputs {
  std::optional<Var> ext;  // 16 x w, normalised scale
  std::optional<Var> inf;  // 12 x w
  Var ql;                  // 8 x w, log1p scale
  Var tt;                  // 8 x bins logits
  std::optional<Var> alpha_ext;
  std::optional<Var> alpha_inf;
};

/// Training mode feeds the CNN heads ground-truth ext/inf aggregates;
/// inference mode feeds them the GAT outputs. The MTDT-MOE variant has no
/// GAT modules and always uses ground truth.
ForwardOutputs mtdt_forward(Tape& tape, const ForwardInputs& in, const Bound& params, const ModelConfig& config,
                            Mode mode);

/// Model outputs mapped back to record units.
struct Prediction {
  std::optional<Tensor> ext;  // 16 x w vehicles per bucket
  std::optional<Tensor> inf;  // 12 x w
  Tensor ql;                  // 8 x w metres
  Tensor tt;                  // 8 x bins vehicles per bucket
};

/// Travel-time counts are the predicted per-phase distribution scaled by the
/// phase's observed stop-bar volume.
Prediction denormalize(const ForwardOutputs& out, const ForwardInputs& in, const sim::SimulationRecord& record,
                       const Normalizer& norm);

/// Inference-mode forward on a record, returned in record units.
Prediction predict(const Parameters& params, const ModelConfig& config, const Normalizer& norm,
                   const sim::SimulationRecord& record, const sim::IntersectionTopology& topology);

}  // namespace mtdt::model
