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

#include <gtest/gtest.h>

#include "incom/rng.hpp"
#include "incom/tensor.hpp"

namespace incom {
namespace {

Tensor random_tensor(Rng& rng, std::size_t r, std::size_t c) {
  Tensor t(r, c);
  for (double& v : t.flat()) v = rng.gaussian();
  return t;
}

Tensor naive_matmul(const Tensor& a, const Tensor& b) {
  Tensor out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < b.cols(); ++j) {
      double s = 0.0;
      for (std::size_t p = 0; p < a.cols(); ++p) s += a(i, p) * b(p, j);
      out(i, j) = s;
    }
  }
  return out;
}

TEST(Gemm, MatchesNaiveProductsForAllVariants) {
  Rng rng(1);
  for (std::size_t m : {1u, 3u, 4u, 7u, 9u}) {
    for (std::size_t k : {1u, 5u, 8u}) {
      for (std::size_t n : {1u, 2u, 6u}) {
        const Tensor a = random_tensor(rng, m, k), b = random_tensor(rng, k, n);
        EXPECT_LT(max_abs_diff(matmul(a, b), naive_matmul(a, b)), 1e-12);
        Tensor nt(m, n);
        gemm_nt_acc(a, b.transposed(), nt);
        EXPECT_LT(max_abs_diff(nt, naive_matmul(a, b)), 1e-12);
        Tensor tn(k, n);
        const Tensor c = random_tensor(rng, m, n);
        gemm_tn_acc(a, c, tn);
        EXPECT_LT(max_abs_diff(tn, naive_matmul(a.transposed(), c)), 1e-12);
      }
    }
  }
}

TEST(Gemm, RowResultIndependentOfRowPosition) {
  Rng rng(2);
  const Tensor b = random_tensor(rng, 13, 11);
  const Tensor a = random_tensor(rng, 9, 13);
  const Tensor full = matmul(a, b);
  for (std::size_t r = 0; r < a.rows(); ++r) {
    Tensor single(1, a.cols());
    for (std::size_t c = 0; c < a.cols(); ++c) single(0, c) = a(r, c);
    const Tensor one = matmul(single, b);
    for (std::size_t c = 0; c < b.cols(); ++c) EXPECT_EQ(one(0, c), full(r, c));
  }
}

TEST(Gemm, RejectsShapeMismatch) {
  Tensor out(2, 2);
  EXPECT_THROW(gemm_nn_acc(Tensor(2, 3), Tensor(2, 2), out), ShapeError);
  EXPECT_THROW(gemm_tn_acc(Tensor(2, 3), Tensor(3, 2), out), ShapeError);
}

TEST(TensorBasics, FromRowsAndEquality) {
  const Tensor t = Tensor::from_rows({{1, 2, 3}, {4, 5, 6}});
  EXPECT_EQ(t.rows(), 2u);
  EXPECT_EQ(t(1, 2), 6.0);
  EXPECT_EQ(t.transposed()(2, 1), 6.0);
  Tensor u = t;
  EXPECT_TRUE(u == t);
  u(0, 0) = 1.0000000001;
  EXPECT_FALSE(u == t);
  EXPECT_THROW(Tensor::from_rows({{1, 2}, {3}}), ShapeError);
}

TEST(Rng, DeterministicAndInRange) {
  Rng a(42), b(42), c(43);
  bool differs = false;
  for (int i = 0; i < 1000; ++i) {
    const auto x = a.next_u64();
    EXPECT_EQ(x, b.next_u64());
    differs |= x != c.next_u64();
    const double u = a.uniform01();
    b.uniform01();
    EXPECT_GE(u, 0.0);
    EXPECT_LT(u, 1.0);
    const int k = a.uniform_int(-2, 3);
    b.uniform_int(-2, 3);
    EXPECT_GE(k, -2);
    EXPECT_LE(k, 3);
  }
  EXPECT_TRUE(differs);
  EXPECT_NE(mix_seed(1, 2), mix_seed(2, 1));
}

TEST(Rng, GaussianMoments) {
  Rng rng(7);
  double sum = 0.0, sq = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double g = rng.gaussian();
    sum += g;
    sq += g * g;
  }
  EXPECT_NEAR(sum / n, 0.0, 0.01);
  EXPECT_NEAR(sq / n, 1.0, 0.02);
}

}  // namespace
}  // namespace incom
