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

// Bipartite simulation graphs: stop-bar nodes carry observed waveforms,
// exit or inflow nodes are zero-filled targets to be imputed.

#include <cstddef>
#include <vector>

#include "mtdt/sim/record.hpp"
#include "mtdt/sim/topology.hpp"
#include "mtdt/tensor.hpp"

namespace mtdt::graph {

enum class GraphKind { Exit, Inflow };

struct SimulationGraph {
  GraphKind kind = GraphKind::Exit;
  tensor::Tensor x;               // N x w; rows 0..47 stop bar, then targets
  std::vector<bool> mask;         // true = observed stop-bar node
  std::vector<std::size_t> src;   // edge sources (stop-bar node ids)
  std::vector<std::size_t> dst;   // edge targets (node ids >= 48)
  tensor::Tensor z;               // shared edge features, length 8*80 + N_tmc^2 + 9

  std::size_t nodes() const { return mask.size(); }
  std::size_t observed() const { return sim::kStopLanes; }
  std::size_t targets() const { return nodes() - observed(); }
  std::size_t edges() const { return src.size(); }
};

std::size_t target_count(GraphKind kind);

/// Concatenation [sig row-major, tmc row-major, drv].
tensor::Tensor edge_features(const IntMatrix& sig, const RealMatrix& tmc, const sim::DrivingBehavior& drv);

/// Builds from an already prepared stop-bar block (48 x w) and edge-feature
/// vector. Throws ShapeError for wrong shapes and ConfigError when the
/// template leaves a target without incoming edges or has the wrong size.
SimulationGraph build_graph(GraphKind kind, const tensor::Tensor& stp, tensor::Tensor z,
                            const sim::IntersectionTopology& topology);

SimulationGraph build_exit_graph(const sim::SimulationRecord& record, const sim::IntersectionTopology& topology);
SimulationGraph build_inflow_graph(const sim::SimulationRecord& record, const sim::IntersectionTopology& topology);

/// Converts an integer waveform matrix to a tensor of the same shape.
tensor::Tensor to_tensor(const IntMatrix& m);
tensor::Tensor to_tensor(const RealMatrix& m);

}  // namespace mtdt::graph
