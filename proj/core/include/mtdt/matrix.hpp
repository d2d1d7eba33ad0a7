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

#include <cstddef>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mtdt/error.hpp"

namespace mtdt {

/// Row-major 2D grid used for record waveforms, histograms and signal rows.
template <typename T>
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, T fill = T{}) : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }

  T& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  const T& operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  const std::vector<T>& values() const { return data_; }
  std::vector<T>& values() { return data_; }

  T row_sum(std::size_t r) const {
    T total{};
    for (std::size_t c = 0; c < cols_; ++c) total += (*this)(r, c);
    return total;
  }

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<T> data_;
};

using IntMatrix = Matrix<int>;
using RealMatrix = Matrix<double>;

template <typename T>
void to_json(nlohmann::json& j, const Matrix<T>& m) {
  j = nlohmann::json::array();
  for (std::size_t r = 0; r < m.rows(); ++r) {
    auto row = nlohmann::json::array();
    for (std::size_t c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    j.push_back(std::move(row));
  }
}

template <typename T>
void from_json(const nlohmann::json& j, Matrix<T>& m) {
  if (!j.is_array()) throw ShapeError("matrix must be a nested array");
  const std::size_t rows = j.size();
  const std::size_t cols = rows == 0 ? 0 : j.front().size();
  Matrix<T> out(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    if (!j[r].is_array() || j[r].size() != cols) throw ShapeError("matrix rows must have equal length");
    for (std::size_t c = 0; c < cols; ++c) out(r, c) = j[r][c].get<T>();
  }
  m = std::move(out);
}

/// Throws ShapeError unless `m` is rows x cols.
template <typename T>
void require_shape(const Matrix<T>& m, std::size_t rows, std::size_t cols, const std::string& what) {
  if (m.rows() != rows || m.cols() != cols)
    throw ShapeError(what + ": expected " + std::to_string(rows) + "x" + std::to_string(cols) + ", got " +
                     std::to_string(m.rows()) + "x" + std::to_string(m.cols()));
}

}  // namespace mtdt
