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

#include "mtdt/model.hpp"

#include <algorithm>
#include <cmath>

#include <nlohmann/json.hpp>

#include "mtdt/error.hpp"
#include "mtdt/rng.hpp"
#include "mtdt/sim/moe.hpp"

namespace mtdt::model {

using namespace tensor;

namespace {

const char* head_prefix(Head h) { return h == Head::Ql ? "ql" : "tt"; }

void require_matrix(const Tensor& t, std::size_t rows, std::size_t cols, const std::string& what) {
  if (t.rank() != 2 || t.dim(0) != rows || t.dim(1) != cols)
    throw ShapeError(what + ": expected " + std::to_string(rows) + "x" + std::to_string(cols) + ", got " +
                     tensor::to_string(t.shape()));
}

}  // namespace

std::string to_string(Variant v) { return v == Variant::Full ? "mtdt" : "mtdt-moe"; }

Variant variant_from_string(const std::string& s) {
  if (s == "mtdt") return Variant::Full;
  if (s == "mtdt-moe") return Variant::MoeOnly;
  throw ConfigError("unknown model variant '" + s + "' (expected mtdt or mtdt-moe)");
}

std::size_t ModelConfig::pooled_length() const {
  std::size_t len = window;
  for (int stage = 0; stage < 3; ++stage) {
    if (len < kernel) throw ConfigError("window too short for three conv stages");
    len = (len - kernel + 1) / 2;
  }
  if (len == 0) throw ConfigError("conv stack leaves no features to flatten");
  return len;
}

void to_json(nlohmann::json& j, const ModelConfig& c) {
  j = {{"window", c.window},     {"hidden", c.hidden},   {"channels", c.channels},
       {"kernel", c.kernel},     {"tmc_size", c.tmc_size}, {"tt_bins", c.tt_bins},
       {"variant", to_string(c.variant)}};
}

void from_json(const nlohmann::json& j, ModelConfig& c) {
  ModelConfig out;
  out.window = j.value("window", out.window);
  out.hidden = j.value("hidden", out.hidden);
  if (j.contains("channels")) out.channels = j.at("channels").get<std::array<std::size_t, 3>>();
  out.kernel = j.value("kernel", out.kernel);
  out.tmc_size = j.value("tmc_size", out.tmc_size);
  out.tt_bins = j.value("tt_bins", out.tt_bins);
  out.variant = variant_from_string(j.value("variant", std::string("mtdt")));
  (void)out.pooled_length();
  c = out;
}

// ---------------------------------------------------------------------------
// Parameters

void Parameters::add(std::string name, Tensor value) {
  if (contains(name)) throw ContractError("duplicate parameter " + name);
  items_.emplace_back(std::move(name), std::move(value));
}

bool Parameters::contains(const std::string& name) const {
  return std::any_of(items_.begin(), items_.end(), [&](const auto& it) { return it.first == name; });
}

const Tensor& Parameters::get(const std::string& name) const {
  for (const auto& [n, t] : items_)
    if (n == name) return t;
  throw ContractError("no parameter named " + name);
}

Tensor& Parameters::get(const std::string& name) {
  return const_cast<Tensor&>(static_cast<const Parameters&>(*this).get(name));
}

std::size_t Parameters::scalar_count() const {
  std::size_t n = 0;
  for (const auto& it : items_) n += it.second.size();
  return n;
}

bool Parameters::all_finite() const {
  return std::all_of(items_.begin(), items_.end(), [](const auto& it) { return it.second.all_finite(); });
}

Parameters init_parameters(const ModelConfig& c, std::uint64_t seed) {
  Rng rng(seed);
  Parameters p;
  auto uniform = [&](tensor::Shape shape, std::size_t fan_in) {
    Tensor t(std::move(shape));
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (double& v : t.data()) v = rng.uniform(-bound, bound);
    return t;
  };
  if (c.variant == Variant::Full) {
    for (const std::string pre : {"ext", "inf"}) {
      p.add(pre + ".B", uniform({c.window, c.hidden}, c.window));
      p.add(pre + ".b", uniform({c.hidden}, c.window));
      p.add(pre + ".Wz", uniform({c.edge_feature_size(), c.hidden}, c.edge_feature_size()));
      p.add(pre + ".bz", uniform({c.hidden}, c.edge_feature_size()));
      p.add(pre + ".a", uniform({2 * c.hidden, 1}, 2 * c.hidden));
      p.add(pre + ".Wout", uniform({c.hidden, c.window}, c.hidden));
      p.add(pre + ".bout", uniform({c.window}, c.hidden));
    }
  }
  for (Head h : {Head::Ql, Head::Tt}) {
    const std::string pre = head_prefix(h);
    std::size_t in = kMtsChannels;
    for (std::size_t k = 0; k < 3; ++k) {
      const std::string n = std::to_string(k + 1);
      p.add(pre + ".k" + n, uniform({c.channels[k], in, c.kernel}, in * c.kernel));
      p.add(pre + ".c" + n, uniform({c.channels[k]}, in * c.kernel));
      in = c.channels[k];
    }
    p.add(pre + ".W", uniform({c.flat_size(), c.head_size(h)}, c.flat_size()));
    p.add(pre + ".b", uniform({c.head_size(h)}, c.flat_size()));
  }
  return p;
}

Bound::Bound(Tape& tape, const Parameters& params, bool trainable) {
  for (const auto& [name, value] : params.items())
    vars_.emplace_back(name, trainable ? tape.parameter(value) : tape.constant(value));
}

Var Bound::operator[](const std::string& name) const {
  for (const auto& [n, v] : vars_)
    if (n == name) return v;
  throw ContractError("parameter " + name + " is not bound (disabled module?)");
}

// ---------------------------------------------------------------------------
// Graph attention

GatOutput gat_forward(Tape& tape, const graph::SimulationGraph& g, const Bound& p, const std::string& pre) {
  const std::size_t n_obs = g.observed();
  const std::size_t n_tgt = g.targets();
  Var x = tape.constant(g.x);
  Var h = relu(add_row_bias(matmul(x, p[pre + ".B"]), p[pre + ".b"]));
  Var z = tape.constant(g.z.reshaped({1, g.z.size()}));
  Var proj = add_row_bias(matmul(z, p[pre + ".Wz"]), p[pre + ".bz"]);

  Var hs = gather_rows(h, g.src);
  Var hd = gather_rows(h, g.dst);
  Var e = relu(matmul(concat({hs, hd}, 1), p[pre + ".a"]));
  std::vector<std::size_t> seg(g.dst.size());
  for (std::size_t k = 0; k < seg.size(); ++k) seg[k] = g.dst[k] - n_obs;
  Var alpha = segment_softmax(e, seg, n_tgt);

  const std::vector<std::size_t> first(g.src.size(), 0);
  Var msg = add(hs, gather_rows(proj, first));
  Var m = scatter_add_rows(scale_rows(msg, alpha), seg, n_tgt);
  Var y = relu(add_row_bias(matmul(m, p[pre + ".Wout"]), p[pre + ".bout"]));

  std::vector<std::size_t> observed(n_obs);
  for (std::size_t k = 0; k < n_obs; ++k) observed[k] = k;
  Var x_hat = concat({gather_rows(x, observed), y}, 0);
  return {x_hat, y, alpha};
}

// ---------------------------------------------------------------------------
// Phase aggregation

std::vector<std::size_t> PhaseMap::members(const std::vector<std::size_t>& rows, std::size_t phase_row) const {
  std::vector<std::size_t> out;
  for (std::size_t k = 0; k < rows.size(); ++k)
    if (rows[k] == phase_row) out.push_back(k);
  return out;
}

PhaseMap make_phase_map(const sim::IntersectionTopology& topo) {
  PhaseMap m;
  for (std::size_t s = 0; s < sim::kExitLanes; ++s)
    m.exit_row.push_back(sim::phase_row(topo.exit_lane(static_cast<int>(s)).phase));
  for (std::size_t s = 0; s < sim::kInflowLanes; ++s)
    m.inflow_row.push_back(sim::phase_row(topo.inflow_lane(static_cast<int>(s)).phase));
  for (std::size_t s = 0; s < sim::kStopLanes; ++s) {
    const sim::StopLane* lane = topo.stop_lane(static_cast<int>(s));
    const auto approach = static_cast<sim::Approach>(s / sim::kStopSlotsPerApproach);
    m.stop_row.push_back(sim::phase_row(lane ? lane->phase : sim::through_phase(approach)));
  }
  return m;
}

namespace {

void check_lane_rows(std::size_t lanes, std::span<const std::size_t> lane_row) {
  if (lane_row.size() != lanes)
    throw ConfigError("phase map covers " + std::to_string(lane_row.size()) + " lanes, input has " +
                      std::to_string(lanes));
  for (std::size_t k = 0; k < lane_row.size(); ++k)
    if (lane_row[k] >= sim::kPhases) throw ConfigError("lane " + std::to_string(k) + " is in no phase group");
}

}  // namespace

Tensor aggregate_to_phases(const Tensor& lanes, std::span<const std::size_t> lane_row) {
  if (lanes.rank() != 2) throw ShapeError("aggregate_to_phases expects a lane x time matrix");
  check_lane_rows(lanes.dim(0), lane_row);
  Tensor out({sim::kPhases, lanes.dim(1)});
  for (std::size_t l = 0; l < lanes.dim(0); ++l)
    for (std::size_t t = 0; t < lanes.dim(1); ++t) out.at(lane_row[l], t) += lanes.at(l, t);
  return out;
}

Var aggregate_to_phases(Var lanes, std::span<const std::size_t> lane_row) {
  if (lanes.value().rank() != 2) throw ShapeError("aggregate_to_phases expects a lane x time matrix");
  check_lane_rows(lanes.value().dim(0), lane_row);
  return scatter_add_rows(lanes, lane_row, sim::kPhases);
}

// ---------------------------------------------------------------------------
// Multivariate series

std::vector<Var> mts_slices(Var primary, const Tensor& stp_phase, const Tensor& stp_total, const Tensor& sig,
                            const DriverChannels& drv) {
  const std::size_t w = primary.value().rank() == 2 ? primary.value().dim(1) : 0;
  require_matrix(primary.value(), sim::kPhases, w, "primary series");
  require_matrix(stp_phase, sim::kPhases, w, "stp phase series");
  require_matrix(stp_total, 1, w, "stp total series");
  require_matrix(sig, sim::kPhases, w, "sig");
  Tape& tape = primary.tape();
  std::vector<Var> out;
  for (std::size_t p = 0; p < sim::kPhases; ++p) {
    Tensor rest({kMtsChannels - 1, w});
    for (std::size_t t = 0; t < w; ++t) {
      rest.at(0, t) = stp_phase.at(p, t);
      rest.at(1, t) = sig.at(p, t);
      rest.at(2, t) = drv.accel;
      rest.at(3, t) = drv.lc_cooperative;
      rest.at(4, t) = drv.min_gap;
      rest.at(5, t) = stp_total.at(0, t);
    }
    const std::size_t row[1] = {p};
    out.push_back(concat({gather_rows(primary, row), tape.constant(std::move(rest))}, 0));
  }
  return out;
}

Tensor build_mts(const Tensor& primary, const Tensor& stp_phase, const Tensor& stp_total, const Tensor& sig,
                 const DriverChannels& drv) {
  Tape tape;
  const auto slices = mts_slices(tape.constant(primary), stp_phase, stp_total, sig, drv);
  const std::size_t w = primary.dim(1);
  Tensor out({sim::kPhases, kMtsChannels, w});
  for (std::size_t p = 0; p < slices.size(); ++p) {
    const auto& v = slices[p].value();
    std::copy(v.data().begin(), v.data().end(), out.data().begin() + static_cast<std::ptrdiff_t>(p * v.size()));
  }
  return out;
}

// ---------------------------------------------------------------------------
// CNN heads

Var cnn_forward(const std::vector<Var>& slices, const Bound& p, Head head) {
  const std::string pre = head_prefix(head);
  std::vector<Var> rows;
  for (Var h : slices) {
    for (int k = 1; k <= 3; ++k) {
      const std::string n = std::to_string(k);
      h = maxpool1d(relu(add_channel_bias(conv1d(h, p[pre + ".k" + n]), p[pre + ".c" + n])));
    }
    Var flat = reshape(h, {1, h.value().size()});
    Var out = add_row_bias(matmul(flat, p[pre + ".W"]), p[pre + ".b"]);
    rows.push_back(head == Head::Ql ? relu(out) : out);
  }
  return concat(rows, 0);
}

// ---------------------------------------------------------------------------
// Full model

ForwardInputs prepare_inputs(const sim::SimulationRecord& record, const sim::IntersectionTopology& topology,
                             const Normalizer& norm, bool with_targets) {
  ForwardInputs in;
  in.phases = make_phase_map(topology);
  in.stp = norm.normalize(Channel::Stp, record.stp);
  in.stp_phase = aggregate_to_phases(in.stp, in.phases.stop_row);
  const std::size_t w = in.stp.dim(1);
  in.stp_total = Tensor({1, w});
  for (std::size_t l = 0; l < in.stp.dim(0); ++l)
    for (std::size_t t = 0; t < w; ++t) in.stp_total.at(0, t) += in.stp.at(l, t);
  in.sig = graph::to_tensor(record.sig);
  sim::DrivingBehavior scaled = record.drv;
  for (double& v : scaled.values) v /= kDriverScale;
  in.z = graph::edge_features(record.sig, record.tmc, scaled);
  in.drv = {scaled.accel(), scaled.lc_cooperative(), scaled.min_gap()};
  in.exit_graph = graph::build_graph(graph::GraphKind::Exit, in.stp, in.z, topology);
  in.inflow_graph = graph::build_graph(graph::GraphKind::Inflow, in.stp, in.z, topology);
  if (with_targets) {
    in.ext = norm.normalize(Task::Ext, record.ext);
    in.inf = norm.normalize(Task::Inf, record.inf);
    in.ql = norm.normalize(Task::Ql, record.ql);
    in.tt = norm.normalize(Task::Tt, record.tt);
  }
  return in;
}

ForwardOutputs mtdt_forward(Tape& tape, const ForwardInputs& in, const Bound& params, const ModelConfig& config,
                            Mode mode) {
  const bool use_truth = mode == Mode::Training || config.variant == Variant::MoeOnly;
  if (use_truth && (!in.ext || !in.inf))
    throw ContractError(mode == Mode::Training ? "training mode needs ground-truth ext and inf"
                                               : "the MOE-only variant needs ground-truth ext and inf");
  ForwardOutputs out;
  if (config.variant == Variant::Full) {
    const GatOutput ge = gat_forward(tape, in.exit_graph, params, "ext");
    const GatOutput gi = gat_forward(tape, in.inflow_graph, params, "inf");
    out.ext = ge.targets;
    out.inf = gi.targets;
    out.alpha_ext = ge.alpha;
    out.alpha_inf = gi.alpha;
  }
  Var primary_ext, primary_inf;
  if (use_truth) {
    primary_ext = tape.constant(aggregate_to_phases(*in.ext, in.phases.exit_row));
    primary_inf = tape.constant(aggregate_to_phases(*in.inf, in.phases.inflow_row));
  } else {
    primary_ext = aggregate_to_phases(*out.ext, in.phases.exit_row);
    primary_inf = aggregate_to_phases(*out.inf, in.phases.inflow_row);
  }
  out.ql = cnn_forward(mts_slices(primary_ext, in.stp_phase, in.stp_total, in.sig, in.drv), params, Head::Ql);
  out.tt = cnn_forward(mts_slices(primary_inf, in.stp_phase, in.stp_total, in.sig, in.drv), params, Head::Tt);
  return out;
}

Prediction denormalize(const ForwardOutputs& out, const ForwardInputs& in, const sim::SimulationRecord& record,
                       const Normalizer& norm) {
  Prediction p;
  auto waveform = [&](Task t, const Var& v) {
    Tensor y = norm.denormalize(t, v.value());
    for (double& e : y.data()) e = std::clamp(e, 0.0, static_cast<double>(sim::kWaveformMax));
    return y;
  };
  if (out.ext) p.ext = waveform(Task::Ext, *out.ext);
  if (out.inf) p.inf = waveform(Task::Inf, *out.inf);
  p.ql = out.ql.value();
  for (double& e : p.ql.data()) e = std::min(sim::kMaxProximityLength, std::expm1(std::max(0.0, e)));

  const Tensor q = tensor::softmax(out.tt.value(), 1);
  std::vector<double> volume(sim::kPhases, 0.0);
  for (std::size_t l = 0; l < sim::kStopLanes; ++l)
    volume[in.phases.stop_row[l]] += static_cast<double>(record.stp.row_sum(l));
  p.tt = q;
  for (std::size_t r = 0; r < q.dim(0); ++r)
    for (std::size_t c = 0; c < q.dim(1); ++c) p.tt.at(r, c) = q.at(r, c) * volume[r];
  return p;
}

Prediction predict(const Parameters& params, const ModelConfig& config, const Normalizer& norm,
                   const sim::SimulationRecord& record, const sim::IntersectionTopology& topology) {
  Tape tape;
  const Bound bound(tape, params, false);
  const ForwardInputs in = prepare_inputs(record, topology, norm, config.variant == Variant::MoeOnly);
  const ForwardOutputs out = mtdt_forward(tape, in, bound, config, Mode::Inference);
  return denormalize(out, in, record, norm);
}

}  // namespace mtdt::model
