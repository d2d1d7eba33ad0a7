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

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <sstream>

#include "mtdt/error.hpp"

namespace mtdt::tensor {

namespace {

std::size_t element_count(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

// The message is only built when the check fails; several checks sit on
// hot paths.
#define MTDT_REQUIRE(ok, what)          \
  do {                                  \
    if (!(ok)) throw ShapeError(what);  \
  } while (0)

void require_rank(const Tensor& t, std::size_t rank, const char* op) {
  MTDT_REQUIRE(t.rank() == rank, std::string(op) + ": expected rank " + std::to_string(rank) +
                                     ", got " + to_string(t.shape()));
}

void accumulate(Tensor* dst, const Tensor& src) {
  if (dst == nullptr) return;
  auto d = dst->data();
  auto s = src.data();
  for (std::size_t i = 0; i < d.size(); ++i) d[i] += s[i];
}

Tape& same_tape(Var a, Var b) {
  if (&a.tape() != &b.tape()) throw ContractError("operands recorded on different tapes");
  return a.tape();
}

}  // namespace

std::string to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
  os << ']';
  return os.str();
}

// ---------------------------------------------------------------------------
// Tensor

Tensor::Tensor(Shape shape) : shape_(std::move(shape)) {
  for (auto d : shape_) MTDT_REQUIRE(d > 0, "tensor dimensions must be positive: " + to_string(shape_));
  data_.assign(element_count(shape_), 0.0);
}

Tensor::Tensor(Shape shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  for (auto d : shape_) MTDT_REQUIRE(d > 0, "tensor dimensions must be positive: " + to_string(shape_));
  MTDT_REQUIRE(data_.size() == element_count(shape_),
          "data length " + std::to_string(data_.size()) + " does not match shape " + to_string(shape_));
}

Tensor Tensor::filled(Shape shape, double value) {
  Tensor t(std::move(shape));
  std::fill(t.data_.begin(), t.data_.end(), value);
  return t;
}

Tensor Tensor::scalar(double value) { return Tensor({1}, {value}); }

Tensor Tensor::matrix(std::initializer_list<std::initializer_list<double>> rows) {
  MTDT_REQUIRE(rows.size() > 0, "matrix: no rows");
  const std::size_t cols = rows.begin()->size();
  std::vector<double> data;
  data.reserve(rows.size() * cols);
  for (const auto& r : rows) {
    MTDT_REQUIRE(r.size() == cols, "matrix: ragged rows");
    data.insert(data.end(), r.begin(), r.end());
  }
  return Tensor({rows.size(), cols}, std::move(data));
}

std::size_t Tensor::dim(std::size_t axis) const {
  MTDT_REQUIRE(axis < shape_.size(), "axis " + std::to_string(axis) + " out of range for " + to_string(shape_));
  return shape_[axis];
}

double& Tensor::at(std::size_t r, std::size_t c) { return data_[r * shape_[1] + c]; }
double Tensor::at(std::size_t r, std::size_t c) const { return data_[r * shape_[1] + c]; }
double Tensor::at(std::size_t i, std::size_t j, std::size_t k) const {
  return data_[(i * shape_[1] + j) * shape_[2] + k];
}

double Tensor::item() const {
  MTDT_REQUIRE(data_.size() == 1, "item() on non-scalar " + to_string(shape_));
  return data_[0];
}

Tensor Tensor::reshaped(Shape shape) const {
  MTDT_REQUIRE(element_count(shape) == data_.size(),
          "cannot reshape " + to_string(shape_) + " to " + to_string(shape));
  return Tensor(std::move(shape), data_);
}

Tensor Tensor::slice0(std::size_t i) const {
  MTDT_REQUIRE(!shape_.empty() && i < shape_[0], "slice0 index out of range");
  Shape sub(shape_.begin() + 1, shape_.end());
  if (sub.empty()) sub = {1};
  const std::size_t n = element_count(sub);
  return Tensor(std::move(sub), std::vector<double>(data_.begin() + i * n, data_.begin() + (i + 1) * n));
}

bool Tensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

// ---------------------------------------------------------------------------
// Tape

const Tensor& Var::value() const { return tape_->value(*this); }

Var Tape::push(Tensor value, bool requires_grad, Backward backward) {
  nodes_.push_back(Node{std::move(value), Tensor{}, requires_grad, std::move(backward)});
  return Var(this, nodes_.size() - 1);
}

Var Tape::constant(Tensor value) { return push(std::move(value), false, nullptr); }

Var Tape::parameter(Tensor value) { return push(std::move(value), true, nullptr); }

Var Tape::record(Tensor value, std::initializer_list<Var> inputs, Backward backward) {
  return record(std::move(value), std::span<const Var>(inputs.begin(), inputs.size()), std::move(backward));
}

Var Tape::record(Tensor value, std::span<const Var> inputs, Backward backward) {
  bool tracked = false;
  for (const Var& in : inputs) {
    if (&in.tape() != this) throw ContractError("operand recorded on a different tape");
    tracked = tracked || nodes_[in.id()].requires_grad;
  }
  return push(std::move(value), tracked, tracked ? std::move(backward) : nullptr);
}

const Tensor& Tape::value(Var v) const { return nodes_.at(v.id()).value; }

bool Tape::requires_grad(Var v) const { return nodes_.at(v.id()).requires_grad; }

Tensor Tape::grad(Var v) const {
  const Node& n = nodes_.at(v.id());
  if (n.grad.empty()) return Tensor::zeros(n.value.shape());
  return n.grad;
}

Tensor* Tape::grad_buffer(Var v) {
  Node& n = nodes_.at(v.id());
  if (!n.requires_grad) return nullptr;
  if (n.grad.empty()) n.grad = Tensor::zeros(n.value.shape());
  return &n.grad;
}

void Tape::note_branch(std::uint64_t bits) {
  // FNV-1a over the 8 bytes of `bits`.
  for (int b = 0; b < 8; ++b) {
    branch_ ^= (bits >> (8 * b)) & 0xffU;
    branch_ *= 1099511628211ULL;
  }
}

void Tape::backward(Var loss) {
  if (&loss.tape() != this) throw ContractError("loss recorded on a different tape");
  const Tensor& lv = value(loss);
  if (lv.size() != 1) throw ContractError("backward() needs a scalar loss, got " + to_string(lv.shape()));
  for (auto& n : nodes_) n.grad = Tensor{};
  if (!nodes_[loss.id()].requires_grad) return;
  nodes_[loss.id()].grad = Tensor::filled(lv.shape(), 1.0);
  for (std::size_t i = loss.id() + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.backward || n.grad.empty()) continue;
    // Copy: the closure may allocate grad buffers for other nodes, never this one.
    const Tensor g = n.grad;
    n.backward(*this, g);
  }
}

// ---------------------------------------------------------------------------
// Plain kernels

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_rank(a, 2, "matmul");
  require_rank(b, 2, "matmul");
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  MTDT_REQUIRE(b.dim(0) == k, "matmul: inner dimensions differ " + to_string(a.shape()) + " * " + to_string(b.shape()));
  Tensor out({m, n});
  auto A = a.data();
  auto B = b.data();
  auto C = out.data();
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      const double av = A[i * k + p];
      if (av == 0.0) continue;
      const double* brow = &B[p * n];
      double* crow = &C[i * n];
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
  return out;
}

namespace {

// a^T * b without materializing the transpose.
Tensor matmul_tn(const Tensor& a, const Tensor& b) {
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  Tensor out({k, n});
  auto A = a.data();
  auto B = b.data();
  auto C = out.data();
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      const double av = A[i * k + p];
      if (av == 0.0) continue;
      const double* brow = &B[i * n];
      double* crow = &C[p * n];
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
  return out;
}

// a * b^T.
Tensor matmul_nt(const Tensor& a, const Tensor& b) {
  const std::size_t m = a.dim(0), n = a.dim(1), k = b.dim(0);
  Tensor out({m, k});
  auto A = a.data();
  auto B = b.data();
  auto C = out.data();
  for (std::size_t i = 0; i < m; ++i) {
    const double* arow = &A[i * n];
    for (std::size_t p = 0; p < k; ++p) {
      const double* brow = &B[p * n];
      double acc = 0.0;
      for (std::size_t j = 0; j < n; ++j) acc += arow[j] * brow[j];
      C[i * k + p] = acc;
    }
  }
  return out;
}

}  // namespace

Tensor conv1d(const Tensor& x, const Tensor& kernel) {
  require_rank(x, 2, "conv1d input");
  require_rank(kernel, 3, "conv1d kernel");
  const std::size_t c_in = x.dim(0), len = x.dim(1);
  const std::size_t c_out = kernel.dim(0), width = kernel.dim(2);
  MTDT_REQUIRE(kernel.dim(1) == c_in, "conv1d: kernel expects " + std::to_string(kernel.dim(1)) +
                                     " input channels, got " + std::to_string(c_in));
  MTDT_REQUIRE(width <= len, "conv1d: kernel width " + std::to_string(width) + " exceeds length " + std::to_string(len));
  const std::size_t out_len = len - width + 1;
  Tensor out({c_out, out_len});
  auto X = x.data();
  auto K = kernel.data();
  auto Y = out.data();
  for (std::size_t o = 0; o < c_out; ++o) {
    double* yrow = &Y[o * out_len];
    for (std::size_t c = 0; c < c_in; ++c) {
      const double* xrow = &X[c * len];
      const double* krow = &K[(o * c_in + c) * width];
      for (std::size_t q = 0; q < width; ++q) {
        const double kv = krow[q];
        for (std::size_t t = 0; t < out_len; ++t) yrow[t] += kv * xrow[t + q];
      }
    }
  }
  return out;
}

namespace {

// Pooled values plus the flat source index of each maximum (ties -> first).
std::pair<Tensor, std::vector<std::size_t>> maxpool_with_index(const Tensor& x) {
  require_rank(x, 2, "maxpool1d");
  const std::size_t c = x.dim(0), len = x.dim(1);
  MTDT_REQUIRE(len >= 2, "maxpool1d: length " + std::to_string(len) + " < 2");
  const std::size_t out_len = len / 2;
  Tensor out({c, out_len});
  std::vector<std::size_t> argmax(c * out_len);
  auto X = x.data();
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t t = 0; t < out_len; ++t) {
      const std::size_t i0 = ch * len + 2 * t;
      const std::size_t pick = X[i0 + 1] > X[i0] ? i0 + 1 : i0;
      out.at(ch, t) = X[pick];
      argmax[ch * out_len + t] = pick;
    }
  }
  return {std::move(out), std::move(argmax)};
}

}  // namespace

Tensor maxpool1d(const Tensor& x) { return maxpool_with_index(x).first; }

Tensor relu(const Tensor& x) {
  Tensor out = x;
  for (double& v : out.data()) v = v > 0.0 ? v : 0.0;
  return out;
}

Tensor softmax(const Tensor& x, std::size_t axis) {
  require_rank(x, 2, "softmax");
  MTDT_REQUIRE(axis < 2, "softmax: axis " + std::to_string(axis) + " out of range");
  const std::size_t rows = x.dim(0), cols = x.dim(1);
  Tensor out(x.shape());
  const std::size_t outer = axis == 1 ? rows : cols;
  const std::size_t inner = axis == 1 ? cols : rows;
  auto idx = [&](std::size_t o, std::size_t i) { return axis == 1 ? o * cols + i : i * cols + o; };
  for (std::size_t o = 0; o < outer; ++o) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < inner; ++i) mx = std::max(mx, x[idx(o, i)]);
    double total = 0.0;
    for (std::size_t i = 0; i < inner; ++i) {
      const double e = std::exp(x[idx(o, i)] - mx);
      out[idx(o, i)] = e;
      total += e;
    }
    for (std::size_t i = 0; i < inner; ++i) out[idx(o, i)] /= total;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Differentiable ops

Var matmul(Var a, Var b) {
  Tape& tape = same_tape(a, b);
  return tape.record(matmul(a.value(), b.value()), {a, b}, [a, b](Tape& t, const Tensor& g) {
    if (Tensor* ga = t.grad_buffer(a)) accumulate(ga, matmul_nt(g, t.value(b)));
    if (Tensor* gb = t.grad_buffer(b)) accumulate(gb, matmul_tn(t.value(a), g));
  });
}

Var add(Var a, Var b) {
  Tape& tape = same_tape(a, b);
  MTDT_REQUIRE(a.shape() == b.shape(), "add: shapes differ " + to_string(a.shape()) + " vs " + to_string(b.shape()));
  Tensor out = a.value();
  auto B = b.value().data();
  auto O = out.data();
  for (std::size_t i = 0; i < O.size(); ++i) O[i] += B[i];
  return tape.record(std::move(out), {a, b}, [a, b](Tape& t, const Tensor& g) {
    accumulate(t.grad_buffer(a), g);
    accumulate(t.grad_buffer(b), g);
  });
}

Var add_row_bias(Var x, Var bias) {
  Tape& tape = same_tape(x, bias);
  require_rank(x.value(), 2, "add_row_bias");
  const std::size_t rows = x.value().dim(0), cols = x.value().dim(1);
  MTDT_REQUIRE(bias.value().size() == cols, "add_row_bias: bias length " + std::to_string(bias.value().size()) +
                                           " != columns " + std::to_string(cols));
  Tensor out = x.value();
  auto B = bias.value().data();
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) out.at(r, c) += B[c];
  return tape.record(std::move(out), {x, bias}, [x, bias, rows, cols](Tape& t, const Tensor& g) {
    accumulate(t.grad_buffer(x), g);
    if (Tensor* gb = t.grad_buffer(bias)) {
      auto G = gb->data();
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c) G[c] += g.at(r, c);
    }
  });
}

Var add_channel_bias(Var x, Var bias) {
  Tape& tape = same_tape(x, bias);
  require_rank(x.value(), 2, "add_channel_bias");
  const std::size_t rows = x.value().dim(0), cols = x.value().dim(1);
  MTDT_REQUIRE(bias.value().size() == rows, "add_channel_bias: bias length " + std::to_string(bias.value().size()) +
                                           " != channels " + std::to_string(rows));
  Tensor out = x.value();
  auto B = bias.value().data();
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) out.at(r, c) += B[r];
  return tape.record(std::move(out), {x, bias}, [x, bias, rows, cols](Tape& t, const Tensor& g) {
    accumulate(t.grad_buffer(x), g);
    if (Tensor* gb = t.grad_buffer(bias)) {
      auto G = gb->data();
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c) G[r] += g.at(r, c);
    }
  });
}

Var scale_rows(Var x, Var s) {
  Tape& tape = same_tape(x, s);
  require_rank(x.value(), 2, "scale_rows");
  const std::size_t rows = x.value().dim(0), cols = x.value().dim(1);
  MTDT_REQUIRE(s.value().size() == rows, "scale_rows: scale length != rows");
  Tensor out = x.value();
  auto S = s.value().data();
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) out.at(r, c) *= S[r];
  return tape.record(std::move(out), {x, s}, [x, s, rows, cols](Tape& t, const Tensor& g) {
    const Tensor& xv = t.value(x);
    const Tensor& sv = t.value(s);
    if (Tensor* gx = t.grad_buffer(x)) {
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c) gx->at(r, c) += g.at(r, c) * sv[r];
    }
    if (Tensor* gs = t.grad_buffer(s)) {
      for (std::size_t r = 0; r < rows; ++r) {
        double acc = 0.0;
        for (std::size_t c = 0; c < cols; ++c) acc += g.at(r, c) * xv.at(r, c);
        (*gs)[r] += acc;
      }
    }
  });
}

Var scale(Var x, double factor) {
  Tensor out = x.value();
  for (double& v : out.data()) v *= factor;
  return x.tape().record(std::move(out), {x}, [x, factor](Tape& t, const Tensor& g) {
    if (Tensor* gx = t.grad_buffer(x)) {
      auto G = gx->data();
      for (std::size_t i = 0; i < G.size(); ++i) G[i] += factor * g[i];
    }
  });
}

Var relu(Var x) {
  {
    std::uint64_t bits = 0;
    std::size_t k = 0;
    for (double v : x.value().data()) {
      bits = (bits << 1) | (v > 0.0 ? 1U : 0U);
      if (++k % 64 == 0) x.tape().note_branch(bits), bits = 0;
    }
    x.tape().note_branch(bits);
  }
  return x.tape().record(relu(x.value()), {x}, [x](Tape& t, const Tensor& g) {
    if (Tensor* gx = t.grad_buffer(x)) {
      const Tensor& xv = t.value(x);
      auto G = gx->data();
      // Subgradient at exactly zero is zero.
      for (std::size_t i = 0; i < G.size(); ++i)
        if (xv[i] > 0.0) G[i] += g[i];
    }
  });
}

Var softmax(Var x, std::size_t axis) {
  Tensor out = softmax(x.value(), axis);
  Tensor kept = out;
  return x.tape().record(std::move(out), {x}, [x, axis, y = std::move(kept)](Tape& t, const Tensor& g) {
    Tensor* gx = t.grad_buffer(x);
    if (!gx) return;
    const std::size_t rows = y.dim(0), cols = y.dim(1);
    const std::size_t outer = axis == 1 ? rows : cols;
    const std::size_t inner = axis == 1 ? cols : rows;
    auto idx = [&](std::size_t o, std::size_t i) { return axis == 1 ? o * cols + i : i * cols + o; };
    for (std::size_t o = 0; o < outer; ++o) {
      double dot = 0.0;
      for (std::size_t i = 0; i < inner; ++i) dot += g[idx(o, i)] * y[idx(o, i)];
      for (std::size_t i = 0; i < inner; ++i) (*gx)[idx(o, i)] += y[idx(o, i)] * (g[idx(o, i)] - dot);
    }
  });
}

Var segment_softmax(Var x, std::span<const std::size_t> segment, std::size_t segments) {
  const Tensor& xv = x.value();
  MTDT_REQUIRE(xv.size() == segment.size(), "segment_softmax: one segment id per entry required");
  std::vector<double> mx(segments, -std::numeric_limits<double>::infinity());
  for (std::size_t e = 0; e < segment.size(); ++e) {
    MTDT_REQUIRE(segment[e] < segments, "segment_softmax: segment id out of range");
    mx[segment[e]] = std::max(mx[segment[e]], xv[e]);
  }
  Tensor out(xv.shape());
  std::vector<double> total(segments, 0.0);
  for (std::size_t e = 0; e < segment.size(); ++e) {
    out[e] = std::exp(xv[e] - mx[segment[e]]);
    total[segment[e]] += out[e];
  }
  for (std::size_t e = 0; e < segment.size(); ++e) out[e] /= total[segment[e]];
  Tensor kept = out;
  std::vector<std::size_t> seg(segment.begin(), segment.end());
  return x.tape().record(std::move(out), {x},
                         [x, segments, seg = std::move(seg), y = std::move(kept)](Tape& t, const Tensor& g) {
                           Tensor* gx = t.grad_buffer(x);
                           if (!gx) return;
                           std::vector<double> dot(segments, 0.0);
                           for (std::size_t e = 0; e < seg.size(); ++e) dot[seg[e]] += g[e] * y[e];
                           for (std::size_t e = 0; e < seg.size(); ++e) (*gx)[e] += y[e] * (g[e] - dot[seg[e]]);
                         });
}

Var concat(std::initializer_list<Var> parts, std::size_t axis) {
  return concat(std::span<const Var>(parts.begin(), parts.size()), axis);
}

Var concat(std::span<const Var> parts, std::size_t axis) {
  MTDT_REQUIRE(!parts.empty(), "concat: no inputs");
  MTDT_REQUIRE(axis < 2, "concat: axis " + std::to_string(axis) + " out of range");
  Tape& tape = parts.front().tape();
  std::size_t rows = 0, cols = 0;
  for (const Var& p : parts) {
    require_rank(p.value(), 2, "concat");
    const std::size_t r = p.value().dim(0), c = p.value().dim(1);
    if (axis == 0) {
      MTDT_REQUIRE(cols == 0 || c == cols, "concat: column counts differ");
      cols = c;
      rows += r;
    } else {
      MTDT_REQUIRE(rows == 0 || r == rows, "concat: row counts differ");
      rows = r;
      cols += c;
    }
  }
  Tensor out({rows, cols});
  std::vector<std::size_t> offsets;
  std::size_t off = 0;
  for (const Var& p : parts) {
    const Tensor& v = p.value();
    offsets.push_back(off);
    for (std::size_t r = 0; r < v.dim(0); ++r)
      for (std::size_t c = 0; c < v.dim(1); ++c) {
        if (axis == 0) out.at(off + r, c) = v.at(r, c);
        else out.at(r, off + c) = v.at(r, c);
      }
    off += axis == 0 ? v.dim(0) : v.dim(1);
  }
  std::vector<Var> inputs(parts.begin(), parts.end());
  return tape.record(std::move(out), parts,
                     [inputs, offsets = std::move(offsets), axis](Tape& t, const Tensor& g) {
                       for (std::size_t i = 0; i < inputs.size(); ++i) {
                         Tensor* gi = t.grad_buffer(inputs[i]);
                         if (!gi) continue;
                         for (std::size_t r = 0; r < gi->dim(0); ++r)
                           for (std::size_t c = 0; c < gi->dim(1); ++c)
                             gi->at(r, c) += axis == 0 ? g.at(offsets[i] + r, c) : g.at(r, offsets[i] + c);
                       }
                     });
}

Var gather_rows(Var x, std::span<const std::size_t> index) {
  const Tensor& xv = x.value();
  MTDT_REQUIRE(xv.rank() >= 1 && !index.empty(), "gather_rows: empty input");
  const std::size_t rows = xv.dim(0);
  const std::size_t stride = xv.size() / rows;
  Shape shape = xv.shape();
  shape[0] = index.size();
  Tensor out(shape);
  for (std::size_t e = 0; e < index.size(); ++e) {
    MTDT_REQUIRE(index[e] < rows, "gather_rows: index " + std::to_string(index[e]) + " out of range");
    std::copy_n(xv.data().begin() + index[e] * stride, stride, out.data().begin() + e * stride);
  }
  std::vector<std::size_t> idx(index.begin(), index.end());
  return x.tape().record(std::move(out), {x}, [x, stride, idx = std::move(idx)](Tape& t, const Tensor& g) {
    Tensor* gx = t.grad_buffer(x);
    if (!gx) return;
    for (std::size_t e = 0; e < idx.size(); ++e)
      for (std::size_t k = 0; k < stride; ++k) (*gx)[idx[e] * stride + k] += g[e * stride + k];
  });
}

Var scatter_add_rows(Var x, std::span<const std::size_t> index, std::size_t rows) {
  const Tensor& xv = x.value();
  MTDT_REQUIRE(xv.rank() >= 1 && xv.dim(0) == index.size(), "scatter_add_rows: one target per input row required");
  const std::size_t stride = xv.size() / xv.dim(0);
  Shape shape = xv.shape();
  shape[0] = rows;
  Tensor out(shape);
  for (std::size_t e = 0; e < index.size(); ++e) {
    MTDT_REQUIRE(index[e] < rows, "scatter_add_rows: index " + std::to_string(index[e]) + " out of range");
    for (std::size_t k = 0; k < stride; ++k) out[index[e] * stride + k] += xv[e * stride + k];
  }
  std::vector<std::size_t> idx(index.begin(), index.end());
  return x.tape().record(std::move(out), {x}, [x, stride, idx = std::move(idx)](Tape& t, const Tensor& g) {
    Tensor* gx = t.grad_buffer(x);
    if (!gx) return;
    for (std::size_t e = 0; e < idx.size(); ++e)
      for (std::size_t k = 0; k < stride; ++k) (*gx)[e * stride + k] += g[idx[e] * stride + k];
  });
}

Var conv1d(Var x, Var kernel) {
  Tape& tape = same_tape(x, kernel);
  return tape.record(conv1d(x.value(), kernel.value()), {x, kernel}, [x, kernel](Tape& t, const Tensor& g) {
    const Tensor& xv = t.value(x);
    const Tensor& kv = t.value(kernel);
    const std::size_t c_in = xv.dim(0), len = xv.dim(1);
    const std::size_t c_out = kv.dim(0), width = kv.dim(2);
    const std::size_t out_len = len - width + 1;
    Tensor* gx = t.grad_buffer(x);
    Tensor* gk = t.grad_buffer(kernel);
    for (std::size_t o = 0; o < c_out; ++o) {
      const double* grow = &g.data()[o * out_len];
      for (std::size_t c = 0; c < c_in; ++c) {
        const double* xrow = &xv.data()[c * len];
        for (std::size_t q = 0; q < width; ++q) {
          const std::size_t kidx = (o * c_in + c) * width + q;
          if (gk) {
            double acc = 0.0;
            for (std::size_t s = 0; s < out_len; ++s) acc += grow[s] * xrow[s + q];
            (*gk)[kidx] += acc;
          }
          if (gx) {
            const double kq = kv[kidx];
            double* gxrow = &gx->data()[c * len];
            for (std::size_t s = 0; s < out_len; ++s) gxrow[s + q] += kq * grow[s];
          }
        }
      }
    }
  });
}

Var maxpool1d(Var x) {
  auto [out, argmax] = maxpool_with_index(x.value());
  for (std::size_t i : argmax) x.tape().note_branch(i);
  return x.tape().record(std::move(out), {x}, [x, argmax = std::move(argmax)](Tape& t, const Tensor& g) {
    Tensor* gx = t.grad_buffer(x);
    if (!gx) return;
    for (std::size_t i = 0; i < argmax.size(); ++i) (*gx)[argmax[i]] += g[i];
  });
}

Var reshape(Var x, Shape shape) {
  return x.tape().record(x.value().reshaped(std::move(shape)), {x}, [x](Tape& t, const Tensor& g) {
    if (Tensor* gx = t.grad_buffer(x)) {
      auto G = gx->data();
      for (std::size_t i = 0; i < G.size(); ++i) G[i] += g[i];
    }
  });
}

Var sum(Var x) {
  double total = 0.0;
  for (double v : x.value().data()) total += v;
  return x.tape().record(Tensor::scalar(total), {x}, [x](Tape& t, const Tensor& g) {
    if (Tensor* gx = t.grad_buffer(x))
      for (double& v : gx->data()) v += g[0];
  });
}

Var mse(Var pred, Var target) {
  Tape& tape = same_tape(pred, target);
  MTDT_REQUIRE(pred.shape() == target.shape(),
          "mse: shapes differ " + to_string(pred.shape()) + " vs " + to_string(target.shape()));
  const Tensor& p = pred.value();
  const Tensor& y = target.value();
  const double n = static_cast<double>(p.size());
  double total = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) total += (p[i] - y[i]) * (p[i] - y[i]);
  return tape.record(Tensor::scalar(total / n), {pred, target}, [pred, target, n](Tape& t, const Tensor& g) {
    const Tensor& pv = t.value(pred);
    const Tensor& yv = t.value(target);
    Tensor* gp = t.grad_buffer(pred);
    Tensor* gy = t.grad_buffer(target);
    for (std::size_t i = 0; i < pv.size(); ++i) {
      const double d = 2.0 * (pv[i] - yv[i]) / n * g[0];
      if (gp) (*gp)[i] += d;
      if (gy) (*gy)[i] -= d;
    }
  });
}

Var soft_cross_entropy(Var logits, Var target) {
  Tape& tape = same_tape(logits, target);
  require_rank(logits.value(), 2, "soft_cross_entropy");
  MTDT_REQUIRE(logits.shape() == target.shape(), "soft_cross_entropy: shapes differ " + to_string(logits.shape()) +
                                                " vs " + to_string(target.shape()));
  const Tensor& p = target.value();
  for (double v : p.data())
    if (v < 0.0) throw ContractError("soft_cross_entropy: negative target mass");
  const std::size_t rows = p.dim(0), cols = p.dim(1);
  Tensor q = softmax(logits.value(), 1);
  std::vector<double> mass(rows, 0.0);
  double total = 0.0;
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) mass[r] += p.at(r, c);
    if (mass[r] <= 0.0) continue;
    // log softmax computed from shifted logits for stability.
    const auto row = logits.value().data().subspan(r * cols, cols);
    const double mx = *std::max_element(row.begin(), row.end());
    double lse = 0.0;
    for (double v : row) lse += std::exp(v - mx);
    lse = mx + std::log(lse);
    for (std::size_t c = 0; c < cols; ++c) total -= p.at(r, c) / mass[r] * (row[c] - lse);
  }
  const double n = static_cast<double>(rows);
  return tape.record(Tensor::scalar(total / n), {logits, target},
                     [logits, n, rows, cols, q = std::move(q), mass = std::move(mass), target](Tape& t, const Tensor& g) {
                       Tensor* gl = t.grad_buffer(logits);
                       if (!gl) return;
                       const Tensor& pv = t.value(target);
                       for (std::size_t r = 0; r < rows; ++r) {
                         if (mass[r] <= 0.0) continue;
                         for (std::size_t c = 0; c < cols; ++c)
                           gl->at(r, c) += g[0] / n * (q.at(r, c) - pv.at(r, c) / mass[r]);
                       }
                     });
}

}  // namespace mtdt::tensor
