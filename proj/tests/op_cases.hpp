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

// One finite-difference case per tensor op, shared by the tensor suite and
// the acceptance runner.

#include <cmath>
#include <vector>

#include "gradcheck.hpp"
#include "mtdt/tensor.hpp"

namespace mtdt::testing {

using namespace mtdt::tensor;

struct OpCase {
  const char* name;
  std::vector<Shape> shapes;
  mtdt::testing::LossFn loss;
};

inline std::vector<OpCase> op_cases() {
  auto target_mse = [](Var y) {
    // Fixed pseudo-random target makes the loss depend on every output.
    Tensor t(y.shape());
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = std::sin(1.7 * static_cast<double>(i) + 0.3);
    return mse(y, y.tape().constant(t));
  };
  std::vector<OpCase> cases;
  cases.push_back({"matmul", {{3, 4}, {4, 2}}, [=](Tape&, const auto& v) { return target_mse(matmul(v[0], v[1])); }});
  cases.push_back({"add", {{3, 4}, {3, 4}}, [=](Tape&, const auto& v) { return target_mse(add(v[0], v[1])); }});
  cases.push_back({"add_row_bias", {{3, 4}, {4}},
                   [=](Tape&, const auto& v) { return target_mse(add_row_bias(v[0], v[1])); }});
  cases.push_back({"add_channel_bias", {{3, 4}, {3}},
                   [=](Tape&, const auto& v) { return target_mse(add_channel_bias(v[0], v[1])); }});
  cases.push_back({"scale_rows", {{5, 3}, {5, 1}},
                   [=](Tape&, const auto& v) { return target_mse(scale_rows(v[0], v[1])); }});
  cases.push_back({"scale", {{2, 3}}, [=](Tape&, const auto& v) { return target_mse(scale(v[0], -2.5)); }});
  cases.push_back({"relu", {{4, 6}}, [=](Tape&, const auto& v) { return target_mse(relu(v[0])); }});
  cases.push_back({"softmax_rows", {{3, 5}}, [=](Tape&, const auto& v) { return target_mse(softmax(v[0], 1)); }});
  cases.push_back({"softmax_cols", {{3, 5}}, [=](Tape&, const auto& v) { return target_mse(softmax(v[0], 0)); }});
  cases.push_back({"segment_softmax", {{7, 1}}, [=](Tape&, const auto& v) {
                     static const std::vector<std::size_t> seg{0, 0, 1, 2, 2, 2, 1};
                     return target_mse(segment_softmax(v[0], seg, 3));
                   }});
  cases.push_back({"concat", {{2, 3}, {2, 2}, {2, 1}}, [=](Tape&, const auto& v) {
                     return target_mse(concat({concat({v[0], v[1]}, 1), concat({v[2], v[2]}, 1)}, 1));
                   }});
  cases.push_back({"concat_rows", {{2, 3}, {1, 3}}, [=](Tape&, const auto& v) {
                     return target_mse(concat({v[0], v[1], v[0]}, 0));
                   }});
  cases.push_back({"gather_rows", {{4, 3}}, [=](Tape&, const auto& v) {
                     static const std::vector<std::size_t> idx{3, 0, 3, 1};
                     return target_mse(gather_rows(v[0], idx));
                   }});
  cases.push_back({"scatter_add_rows", {{5, 3}}, [=](Tape&, const auto& v) {
                     static const std::vector<std::size_t> idx{1, 0, 1, 2, 1};
                     return target_mse(scatter_add_rows(v[0], idx, 3));
                   }});
  cases.push_back({"conv1d", {{3, 12}, {2, 3, 4}}, [=](Tape&, const auto& v) { return target_mse(conv1d(v[0], v[1])); }});
  cases.push_back({"maxpool1d", {{3, 9}}, [=](Tape&, const auto& v) { return target_mse(maxpool1d(v[0])); }});
  cases.push_back({"reshape", {{3, 4}}, [=](Tape&, const auto& v) { return target_mse(reshape(v[0], {2, 6})); }});
  cases.push_back({"sum", {{3, 4}}, [=](Tape&, const auto& v) {
                     Var s = sum(v[0]);
                     return mse(s, s.tape().constant(Tensor::scalar(0.7)));
                   }});
  cases.push_back({"mse_both_sides", {{3, 4}, {3, 4}}, [=](Tape&, const auto& v) { return mse(v[0], v[1]); }});
  cases.push_back({"soft_cross_entropy", {{4, 6}}, [=](Tape& t, const auto& v) {
                     Tensor p({4, 6});
                     for (std::size_t i = 0; i < p.size(); ++i) p[i] = static_cast<double>((i * 7) % 5);
                     for (std::size_t c = 0; c < 6; ++c) p.at(2, c) = 0.0;  // one empty row
                     return soft_cross_entropy(v[0], t.constant(p));
                   }});
  return cases;
}

}  // namespace mtdt::testing
