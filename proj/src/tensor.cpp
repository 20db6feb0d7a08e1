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

#include "incom/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace incom {

Tensor::Tensor(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows * cols) {
    throw ShapeError("tensor data size does not match shape");
  }
}

Tensor Tensor::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r == 0 ? 0 : rows.begin()->size();
  Tensor t(r, c);
  std::size_t i = 0;
  for (const auto& row : rows) {
    if (row.size() != c) throw ShapeError("ragged rows in Tensor::from_rows");
    std::copy(row.begin(), row.end(), t.row(i++).begin());
  }
  return t;
}

Tensor Tensor::row_vector(std::span<const double> values) {
  return Tensor(1, values.size(), std::vector<double>(values.begin(), values.end()));
}

void Tensor::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

Tensor Tensor::transposed() const {
  Tensor t(cols_, rows_);
  for (std::size_t r = 0; r < rows_; ++r)
    for (std::size_t c = 0; c < cols_; ++c) t(c, r) = (*this)(r, c);
  return t;
}

Tensor& Tensor::operator+=(const Tensor& other) {
  if (!same_shape(other)) {
    throw ShapeError("tensor add: " + shape_string() + " vs " + other.shape_string());
  }
  double* dst = data_.data();
  const double* src = other.data_.data();
  const std::size_t n = data_.size();
  for (std::size_t i = 0; i < n; ++i) dst[i] += src[i];
  return *this;
}

Tensor& Tensor::operator*=(double s) {
  for (double& v : data_) v *= s;
  return *this;
}

bool Tensor::operator==(const Tensor& other) const {
  return same_shape(other) && data_ == other.data_;
}

std::string Tensor::shape_string() const {
  std::ostringstream os;
  os << "[" << rows_ << "x" << cols_ << "]";
  return os.str();
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b)) throw ShapeError("max_abs_diff: shape mismatch");
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    m = std::max(m, std::abs(a.flat()[i] - b.flat()[i]));
  }
  return m;
}

bool all_finite(const Tensor& t) {
  return std::all_of(t.flat().begin(), t.flat().end(),
                     [](double v) { return std::isfinite(v); });
}

void gemm_nn_acc(const Tensor& a, const Tensor& b, Tensor& out) {
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  if (b.rows() != k || out.rows() != m || out.cols() != n) {
    throw ShapeError("gemm_nn: " + a.shape_string() + " * " + b.shape_string() +
                     " -> " + out.shape_string());
  }
  // Every output element accumulates a(i,p) * b(p,j) for p = 0..k-1 in order,
  // whatever the row blocking, so a row's result never depends on its position.
  const double* bd = b.data();
  std::size_t i = 0;
  for (; i + 4 <= m; i += 4) {
    double* __restrict o0 = out.data() + i * n;
    double* __restrict o1 = o0 + n;
    double* __restrict o2 = o1 + n;
    double* __restrict o3 = o2 + n;
    const double* a0 = a.data() + i * k;
    const double* a1 = a0 + k;
    const double* a2 = a1 + k;
    const double* a3 = a2 + k;
    for (std::size_t p = 0; p < k; ++p) {
      const double s0 = a0[p], s1 = a1[p], s2 = a2[p], s3 = a3[p];
      const double* __restrict br = bd + p * n;
      for (std::size_t j = 0; j < n; ++j) {
        const double bv = br[j];
        o0[j] += s0 * bv;
        o1[j] += s1 * bv;
        o2[j] += s2 * bv;
        o3[j] += s3 * bv;
      }
    }
  }
  for (; i < m; ++i) {
    double* __restrict o = out.data() + i * n;
    const double* ar = a.data() + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double s = ar[p];
      const double* __restrict br = bd + p * n;
      for (std::size_t j = 0; j < n; ++j) o[j] += s * br[j];
    }
  }
}

void gemm_nt_acc(const Tensor& a, const Tensor& b, Tensor& out) {
  // a^T-free formulation: transpose b once, then reuse the axpy kernel.
  gemm_nn_acc(a, b.transposed(), out);
}

void gemm_tn_acc(const Tensor& a, const Tensor& b, Tensor& out) {
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  if (b.rows() != m || out.rows() != k || out.cols() != n) {
    throw ShapeError("gemm_tn: " + a.shape_string() + "^T * " + b.shape_string() +
                     " -> " + out.shape_string());
  }
  for (std::size_t i = 0; i < m; ++i) {
    const double* ar = a.data() + i * k;
    const double* __restrict br = b.data() + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double s = ar[p];
      double* __restrict o = out.data() + p * n;
      for (std::size_t j = 0; j < n; ++j) o[j] += s * br[j];
    }
  }
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  Tensor out(a.rows(), b.cols());
  gemm_nn_acc(a, b, out);
  return out;
}

}  // namespace incom
