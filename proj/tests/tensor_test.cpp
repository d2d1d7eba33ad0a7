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

#include "mtdt/tensor.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "gradcheck.hpp"
#include "op_cases.hpp"
#include "mtdt/error.hpp"

namespace mtdt::tensor {
namespace {

using mtdt::testing::grad_check;
using mtdt::testing::op_cases;
using mtdt::testing::OpCase;
using mtdt::testing::random_tensor;

// Naive oracles, written independently of the kernels under test.
Tensor naive_matmul(const Tensor& a, const Tensor& b) {
  Tensor out({a.dim(0), b.dim(1)});
  for (std::size_t i = 0; i < a.dim(0); ++i)
    for (std::size_t j = 0; j < b.dim(1); ++j) {
      double acc = 0.0;
      for (std::size_t p = 0; p < a.dim(1); ++p) acc += a.at(i, p) * b.at(p, j);
      out.at(i, j) = acc;
    }
  return out;
}

Tensor naive_conv(const Tensor& x, const Tensor& k) {
  const std::size_t out_len = x.dim(1) - k.dim(2) + 1;
  Tensor out({k.dim(0), out_len});
  for (std::size_t o = 0; o < k.dim(0); ++o)
    for (std::size_t t = 0; t < out_len; ++t) {
      double acc = 0.0;
      for (std::size_t c = 0; c < x.dim(0); ++c)
        for (std::size_t q = 0; q < k.dim(2); ++q) acc += x.at(c, t + q) * k.at(o, c, q);
      out.at(o, t) = acc;
    }
  return out;
}

void expect_near_all(const Tensor& a, const Tensor& b, double tol) {
  ASSERT_EQ(a.shape(), b.shape());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], tol) << "at " << i;
}

TEST(Matmul, IdentityAndProjector) {
  const Tensor m = Tensor::matrix({{1, 2}, {3, 4}});
  EXPECT_EQ(matmul(Tensor::matrix({{1, 0}, {0, 1}}), m), m);
  EXPECT_EQ(matmul(Tensor::matrix({{1, 0}, {0, 0}}), Tensor::matrix({{5, 6}, {7, 8}})),
            Tensor::matrix({{5, 6}, {0, 0}}));
}

TEST(Matmul, MatchesTripleLoop) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    std::mt19937_64 rng(seed);
    const Tensor a = random_tensor({3, 4}, rng), b = random_tensor({4, 2}, rng);
    expect_near_all(matmul(a, b), naive_matmul(a, b), 1e-12);
  }
}

TEST(Matmul, DimensionMismatchThrows) {
  EXPECT_THROW(matmul(Tensor::zeros({2, 3}), Tensor::zeros({2, 3})), ShapeError);
}

TEST(Conv1d, SmallExamples) {
  EXPECT_EQ(conv1d(Tensor({1, 3}, {1, 2, 3}), Tensor({1, 1, 2}, {1, 0})), Tensor({1, 2}, {1, 2}));
  EXPECT_EQ(conv1d(Tensor({1, 4}, {1, 1, 1, 1}), Tensor({1, 1, 2}, {1, 1})), Tensor({1, 3}, {2, 2, 2}));
}

TEST(Conv1d, MatchesNestedLoops) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    std::mt19937_64 rng(seed);
    const Tensor x = random_tensor({2, 17}, rng), k = random_tensor({3, 2, 4}, rng);
    expect_near_all(conv1d(x, k), naive_conv(x, k), 1e-12);
  }
}

TEST(Conv1d, KernelLongerThanInputThrows) {
  EXPECT_THROW(conv1d(Tensor::zeros({1, 2}), Tensor::zeros({1, 1, 3})), ShapeError);
}

TEST(MaxPool1d, PairsAndTieBreak) {
  EXPECT_EQ(maxpool1d(Tensor({1, 4}, {1, 3, 2, 2})), Tensor({1, 2}, {3, 2}));

  Tape tape;
  Var x = tape.parameter(Tensor({1, 2}, {5, 5}));
  Var y = maxpool1d(x);
  EXPECT_EQ(y.value(), Tensor({1, 1}, {5}));
  tape.backward(sum(y));
  EXPECT_EQ(tape.grad(x), Tensor({1, 2}, {1, 0}));
}

TEST(MaxPool1d, MatchesPairwiseOracle) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    std::mt19937_64 rng(seed);
    const Tensor x = random_tensor({3, 80}, rng);
    const Tensor y = maxpool1d(x);
    ASSERT_EQ(y.shape(), (Shape{3, 40}));
    for (std::size_t c = 0; c < 3; ++c)
      for (std::size_t t = 0; t < 40; ++t) EXPECT_EQ(y.at(c, t), std::max(x.at(c, 2 * t), x.at(c, 2 * t + 1)));
  }
}

TEST(MaxPool1d, TooShortThrows) { EXPECT_THROW(maxpool1d(Tensor::zeros({1, 1})), ShapeError); }

TEST(Activations, ReluAndSoftmaxExamples) {
  EXPECT_EQ(relu(Tensor({1, 2}, {-1, 2})), Tensor({1, 2}, {0, 2}));
  const Tensor s = softmax(Tensor({1, 3}, {0, 0, 0}), 1);
  for (double v : s.data()) EXPECT_NEAR(v, 1.0 / 3.0, 1e-15);
  const Tensor big = softmax(Tensor({1, 2}, {1000, 0}), 1);
  EXPECT_TRUE(big.all_finite());
  EXPECT_NEAR(big[0], 1.0, 1e-15);
  EXPECT_NEAR(big[1], 0.0, 1e-15);
  EXPECT_THROW(softmax(Tensor::zeros({2, 2}), 2), ShapeError);
}

TEST(Activations, ReluGradientAtZeroIsZero) {
  Tape tape;
  Var x = tape.parameter(Tensor({1, 3}, {-1, 0, 2}));
  tape.backward(sum(relu(x)));
  EXPECT_EQ(tape.grad(x), Tensor({1, 3}, {0, 0, 1}));
}

TEST(Activations, SoftmaxRowsAreDistributions) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    std::mt19937_64 rng(seed);
    const Tensor x = random_tensor({5, 7}, rng, -50, 50);
    for (std::size_t axis : {0u, 1u}) {
      const Tensor y = softmax(x, axis);
      const std::size_t outer = axis == 1 ? 5 : 7, inner = axis == 1 ? 7 : 5;
      for (std::size_t o = 0; o < outer; ++o) {
        double total = 0.0;
        for (std::size_t i = 0; i < inner; ++i) {
          const double v = axis == 1 ? y.at(o, i) : y.at(i, o);
          EXPECT_GE(v, 0.0);
          EXPECT_LE(v, 1.0);
          total += v;
        }
        EXPECT_NEAR(total, 1.0, 1e-12);
      }
    }
  }
}

TEST(Concat, ShapesMustAgreeOffAxis) {
  Tape tape;
  Var a = tape.constant(Tensor::zeros({2, 3}));
  Var b = tape.constant(Tensor::zeros({3, 3}));
  EXPECT_EQ(concat({a, b}, 0).shape(), (Shape{5, 3}));
  EXPECT_THROW(concat({a, b}, 1), ShapeError);
  EXPECT_THROW(concat({a, b}, 2), ShapeError);
}

TEST(Backward, SumGivesOnes) {
  Tape tape;
  Var p = tape.parameter(Tensor::filled({2, 3, 4}, 0.5));
  tape.backward(sum(p));
  EXPECT_EQ(tape.grad(p), Tensor::filled({2, 3, 4}, 1.0));
}

TEST(Backward, MseOfSelfGivesZeros) {
  Tape tape;
  std::mt19937_64 rng(3);
  Var p = tape.parameter(random_tensor({4, 4}, rng));
  tape.backward(mse(p, p));
  EXPECT_EQ(tape.grad(p), Tensor::zeros({4, 4}));
}

TEST(Backward, NonScalarLossIsContractError) {
  Tape tape;
  Var p = tape.parameter(Tensor::zeros({2, 2}));
  EXPECT_THROW(tape.backward(relu(p)), ContractError);
}

TEST(Backward, UntouchedParameterGetsZeroGradient) {
  Tape tape;
  Var used = tape.parameter(Tensor::filled({2}, 1.0));
  Var unused = tape.parameter(Tensor::filled({3}, 1.0));
  tape.backward(sum(used));
  EXPECT_EQ(tape.grad(unused), Tensor::zeros({3}));
}

TEST(Backward, DeterministicOnRepeat) {
  auto run = [] {
    std::mt19937_64 rng(11);
    Tape tape;
    Var x = tape.parameter(random_tensor({3, 20}, rng));
    Var k = tape.parameter(random_tensor({4, 3, 5}, rng));
    Var y = maxpool1d(relu(conv1d(x, k)));
    tape.backward(sum(softmax(y, 1)));
    return std::pair{tape.grad(x), tape.grad(k)};
  };
  EXPECT_EQ(run(), run());
}

TEST(CrossEntropy, UniformPredictorAgainstOneHot) {
  Tape tape;
  Tensor p({1, 200});
  p[9] = 1.0;
  Var loss = soft_cross_entropy(tape.constant(Tensor::zeros({1, 200})), tape.constant(p));
  EXPECT_NEAR(loss.value().item(), std::log(200.0), 1e-12);
}

TEST(CrossEntropy, EmptyRowContributesZeroAndNegativeMassRejected) {
  Tape tape;
  Tensor p({2, 3});
  p.at(0, 1) = 2.0;
  std::mt19937_64 rng(5);
  Var logits = tape.constant(random_tensor({2, 3}, rng));
  Tensor only_first({1, 3}, {p.at(0, 0), p.at(0, 1), p.at(0, 2)});
  Var first = gather_rows(logits, std::vector<std::size_t>{0});
  const double two_rows = soft_cross_entropy(logits, tape.constant(p)).value().item();
  const double one_row = soft_cross_entropy(first, tape.constant(only_first)).value().item();
  EXPECT_NEAR(two_rows, one_row / 2.0, 1e-12);
  p.at(1, 1) = -1.0;
  EXPECT_THROW(soft_cross_entropy(logits, tape.constant(p)), ContractError);
}

// --- finite-difference suite: every op, ten seeds each -----------------------

class OpGradient : public ::testing::TestWithParam<std::size_t> {};

TEST_P(OpGradient, FiniteDifferencesAgree) {
  const OpCase c = op_cases()[GetParam()];
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    std::mt19937_64 rng(seed * 977 + GetParam());
    std::vector<Tensor> inputs;
    for (const auto& s : c.shapes) inputs.push_back(random_tensor(s, rng));
    const auto r = grad_check(c.loss, inputs);
    EXPECT_LT(r.worst_relative_error, 1e-4) << c.name << " seed " << seed << " input " << r.worst_input;
  }
}

INSTANTIATE_TEST_SUITE_P(AllOps, OpGradient, ::testing::Range<std::size_t>(0, op_cases().size()),
                         [](const auto& info) { return std::string(op_cases()[info.param].name); });

}  // namespace
}  // namespace mtdt::tensor
