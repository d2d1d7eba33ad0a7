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

// Dense float64 tensors and a tape-based reverse-mode autodiff engine.
//
// The op set is exactly what the MTDT modules need: matrix products, bias
// adds, ReLU, softmax (row-wise and per edge segment), gather/scatter of
// rows, concatenation, 1D convolution and pooling, plus the two losses.
// There is no general broadcasting.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace mtdt::tensor {

using Shape = std::vector<std::size_t>;

std::string to_string(const Shape& shape);

class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape);
  Tensor(Shape shape, std::vector<double> data);

  static Tensor zeros(Shape shape) { return Tensor(std::move(shape)); }
  static Tensor filled(Shape shape, double value);
  static Tensor scalar(double value);
  /// Row-major matrix from nested initializer lists.
  static Tensor matrix(std::initializer_list<std::initializer_list<double>> rows);

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  std::span<const double> data() const { return data_; }
  std::span<double> data() { return data_; }
  const std::vector<double>& values() const { return data_; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }
  double& at(std::size_t r, std::size_t c);
  double at(std::size_t r, std::size_t c) const;
  double at(std::size_t i, std::size_t j, std::size_t k) const;
  double item() const;

  /// Same data, new shape with equal element count.
  Tensor reshaped(Shape shape) const;
  /// Contiguous sub-tensor at index `i` along axis 0.
  Tensor slice0(std::size_t i) const;

  bool all_finite() const;

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  Shape shape_;
  std::vector<double> data_;
};

class Tape;

/// Handle to a value recorded on a Tape.
class Var {
 public:
  Var() = default;
  std::size_t id() const { return id_; }
  Tape& tape() const { return *tape_; }
  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  bool valid() const { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Ordered record of operations. Node ids are assigned in creation order, so
/// the record is already topologically sorted and backward() walks it once in
/// reverse. A tape is single-writer; independent tapes may run concurrently.
class Tape {
 public:
  using Backward = std::function<void(Tape&, const Tensor& out_grad)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Leaf that does not receive gradients.
  Var constant(Tensor value);
  /// Leaf whose gradient is accumulated by backward().
  Var parameter(Tensor value);

  /// Records an op result. `backward` is invoked only when some input tracks
  /// gradients.
  Var record(Tensor value, std::initializer_list<Var> inputs, Backward backward);
  Var record(Tensor value, std::span<const Var> inputs, Backward backward);

  const Tensor& value(Var v) const;
  bool requires_grad(Var v) const;
  /// Gradient after backward(); zeros if the node was never reached.
  Tensor grad(Var v) const;

  /// Mutable gradient buffer for `v`, allocated on first use; nullptr when
  /// `v` does not track gradients. Used by op backward closures.
  Tensor* grad_buffer(Var v);

  void backward(Var loss);

  std::size_t size() const { return nodes_.size(); }

  /// Hash of every branch taken by piecewise ops so far (relu masks, maxpool
  /// winners). Two evaluations with equal signatures lie in the same smooth
  /// piece, which finite-difference checks rely on.
  std::uint64_t branch_signature() const { return branch_; }
  void note_branch(std::uint64_t bits);

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    Backward backward;
  };
  Var push(Tensor value, bool requires_grad, Backward backward);

  std::vector<Node> nodes_;
  std::uint64_t branch_ = 1469598103934665603ULL;
};

// ---------------------------------------------------------------------------
// Differentiable ops. All inputs must live on the same tape.

/// a[m x k] * b[k x n].
Var matmul(Var a, Var b);
/// Elementwise sum of equal shapes.
Var add(Var a, Var b);
/// x[m x n] + bias[n] added to every row.
Var add_row_bias(Var x, Var bias);
/// x[c x L] + bias[c] added along each channel row.
Var add_channel_bias(Var x, Var bias);
/// Row i of x[m x n] scaled by s[i]; s has m elements.
Var scale_rows(Var x, Var s);
Var scale(Var x, double factor);
Var relu(Var x);
/// Softmax of a rank-2 tensor along `axis` (0 or 1), max-subtracted.
Var softmax(Var x, std::size_t axis);
/// Softmax over groups: entries sharing segment[e] are normalized together.
Var segment_softmax(Var x, std::span<const std::size_t> segment, std::size_t segments);
/// Concatenation of rank-2 tensors along `axis`.
Var concat(std::span<const Var> parts, std::size_t axis);
Var concat(std::initializer_list<Var> parts, std::size_t axis);
/// Sub-tensors along axis 0 picked by `index` (repeats allowed).
Var gather_rows(Var x, std::span<const std::size_t> index);
/// out[index[e]] += x[e]; output has `rows` rows.
Var scatter_add_rows(Var x, std::span<const std::size_t> index, std::size_t rows);
/// Valid cross-correlation, stride 1: x[c_in x L], k[c_out x c_in x K].
Var conv1d(Var x, Var kernel);
/// Non-overlapping max over pairs along the last axis of x[c x L].
Var maxpool1d(Var x);
Var reshape(Var x, Shape shape);
Var sum(Var x);
/// Mean squared error over all elements.
Var mse(Var pred, Var target);
/// Soft-target cross-entropy of logits[r x C] against target distributions
/// p[r x C]: mean over rows of -sum p log softmax(logits). Rows of p that sum
/// to zero contribute zero.
Var soft_cross_entropy(Var logits, Var target);

// ---------------------------------------------------------------------------
// Plain (untracked) kernels, shared by the ops above and usable directly.

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor conv1d(const Tensor& x, const Tensor& kernel);
Tensor maxpool1d(const Tensor& x);
Tensor softmax(const Tensor& x, std::size_t axis);
Tensor relu(const Tensor& x);

}  // namespace mtdt::tensor
