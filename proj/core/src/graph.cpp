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

#include "mtdt/graph.hpp"

#include "mtdt/error.hpp"
#include "mtdt/sim/signal.hpp"

namespace mtdt::graph {

using tensor::Tensor;

std::size_t target_count(GraphKind kind) { return kind == GraphKind::Exit ? sim::kExitLanes : sim::kInflowLanes; }

Tensor edge_features(const IntMatrix& sig, const RealMatrix& tmc, const sim::DrivingBehavior& drv) {
  require_shape(sig, sim::kPhases, sim::kBuckets, "sig");
  require_shape(tmc, tmc.rows(), tmc.rows(), "tmc");
  std::vector<double> z;
  z.reserve(sig.size() + tmc.size() + drv.values.size());
  for (int v : sig.values()) z.push_back(v);
  z.insert(z.end(), tmc.values().begin(), tmc.values().end());
  z.insert(z.end(), drv.values.begin(), drv.values.end());
  const std::size_t n = z.size();
  return Tensor({n}, std::move(z));
}

SimulationGraph build_graph(GraphKind kind, const Tensor& stp, Tensor z, const sim::IntersectionTopology& topology) {
  if (stp.rank() != 2 || stp.dim(0) != sim::kStopLanes)
    throw ShapeError("stop-bar block must be 48 x w, got " + tensor::to_string(stp.shape()));
  const std::size_t w = stp.dim(1);
  const std::size_t targets = target_count(kind);
  const auto& edges = kind == GraphKind::Exit ? topology.exit_edges : topology.inflow_edges;
  const std::size_t expected = kind == GraphKind::Exit ? topology.expected_exit_edges : topology.expected_inflow_edges;
  if (edges.size() != expected)
    throw ConfigError("topology '" + topology.id + "': template has " + std::to_string(edges.size()) +
                      " edges, expected " + std::to_string(expected));

  SimulationGraph g;
  g.kind = kind;
  g.x = Tensor({sim::kStopLanes + targets, w});
  std::copy(stp.data().begin(), stp.data().end(), g.x.data().begin());
  g.mask.assign(sim::kStopLanes + targets, false);
  std::fill(g.mask.begin(), g.mask.begin() + static_cast<std::ptrdiff_t>(sim::kStopLanes), true);

  std::vector<int> in_degree(targets, 0);
  for (const auto& [s, t] : edges) {
    if (s < 0 || static_cast<std::size_t>(s) >= sim::kStopLanes || t < 0 || static_cast<std::size_t>(t) >= targets)
      throw ConfigError("topology '" + topology.id + "': edge endpoint out of range");
    g.src.push_back(static_cast<std::size_t>(s));
    g.dst.push_back(sim::kStopLanes + static_cast<std::size_t>(t));
    ++in_degree[static_cast<std::size_t>(t)];
  }
  for (std::size_t t = 0; t < targets; ++t)
    if (in_degree[t] == 0)
      throw ConfigError("topology '" + topology.id + "': target node " + std::to_string(t) + " has no incoming edge");
  g.z = std::move(z);
  return g;
}

Tensor to_tensor(const IntMatrix& m) {
  std::vector<double> v(m.values().begin(), m.values().end());
  return Tensor({m.rows(), m.cols()}, std::move(v));
}

Tensor to_tensor(const RealMatrix& m) { return Tensor({m.rows(), m.cols()}, m.values()); }

SimulationGraph build_exit_graph(const sim::SimulationRecord& record, const sim::IntersectionTopology& topology) {
  require_shape(record.stp, sim::kStopLanes, sim::kBuckets, "stp");
  return build_graph(GraphKind::Exit, to_tensor(record.stp), edge_features(record.sig, record.tmc, record.drv),
                     topology);
}

SimulationGraph build_inflow_graph(const sim::SimulationRecord& record, const sim::IntersectionTopology& topology) {
  require_shape(record.stp, sim::kStopLanes, sim::kBuckets, "stp");
  return build_graph(GraphKind::Inflow, to_tensor(record.stp), edge_features(record.sig, record.tmc, record.drv),
                     topology);
}

}  // namespace mtdt::graph
