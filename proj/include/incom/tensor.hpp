// Copyright 2026 The incom Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace incom {

/// Dense row-major matrix of doubles. Rows are tokens, columns are channels.
class Tensor {
 public:
  Tensor() = default;
  Tensor(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Tensor(std::size_t rows, std::size_t cols, std::vector<double> data);

  /// Builds a matrix from nested row lists; all rows must have equal length.
  static Tensor from_rows(std::initializer_list<std::initializer_list<double>> rows);
  static Tensor row_vector(std::span<const double> values);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::span<double> flat() { return data_; }
  std::span<const double> flat() const { return data_; }
  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }

  void fill(double v);
  Tensor transposed() const;

  Tensor& operator+=(const Tensor& other);
  Tensor& operator*=(double s);

  bool same_shape(const Tensor& other) const {
    return rows_ == other.rows_ && cols_ == other.cols_;
  }
  /// Bitwise equality of shape and contents.
  bool operator==(const Tensor& other) const;

  std::string shape_string() const;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

double max_abs_diff(const Tensor& a, const Tensor& b);
bool all_finite(const Tensor& t);

// Kernels. Every output element accumulates over the reduction index in
// ascending order, independent of its row position, so results are bitwise
// reproducible under row permutations.

/// out += a * b
void gemm_nn_acc(const Tensor& a, const Tensor& b, Tensor& out);
/// out += a * b^T
void gemm_nt_acc(const Tensor& a, const Tensor& b, Tensor& out);
/// out += a^T * b
void gemm_tn_acc(const Tensor& a, const Tensor& b, Tensor& out);

Tensor matmul(const Tensor& a, const Tensor& b);

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

}  // namespace incom
