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

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "gradcheck.hpp"
#include "incom/nn.hpp"
#include "oracles.hpp"

namespace incom::nn {
namespace {

using geometry::BinaryMask;

Tensor random_tensor(Rng& rng, std::size_t r, std::size_t c, double scale = 1.0) {
  Tensor t(r, c);
  for (double& v : t.flat()) v = scale * rng.gaussian();
  return t;
}

struct AttentionFixture {
  ParameterSet set;
  AttentionParams attn;

  AttentionFixture(std::size_t dim, std::size_t heads, std::size_t kv_dim = 0, std::uint64_t seed = 1) {
    Rng rng(seed);
    attn = make_attention(set, rng, "a", dim, heads, kv_dim);
    oracle::randomize(set, rng, 0.5);
  }
};

TEST(MaskedSelfAttention, MatchesDenseInfinityOracleOnSmallIntegerCase) {
  // N = 3, D = 2, one head, small integer weights, mask {0, 2}.
  ParameterSet set;
  Rng rng(1);
  const AttentionParams p = make_attention(set, rng, "a", 2, 1);
  set[p.query.weight].value = Tensor::from_rows({{1, 0}, {0, 1}});
  set[p.key.weight].value = Tensor::from_rows({{1, 1}, {0, 1}});
  set[p.value.weight].value = Tensor::from_rows({{2, 0}, {1, -1}});
  set[p.out.weight].value = Tensor::from_rows({{1, 0}, {1, 1}});
  set[p.out.bias].value = Tensor::from_rows({{0, 1}});
  const Tensor x = Tensor::from_rows({{1, 2}, {-1, 0}, {0, 3}});
  const BinaryMask mask = BinaryMask::from_indices(3, std::vector<std::size_t>{0, 2});
  Tape tape(false);
  const Var out = masked_self_attention(tape, set, tape.constant(x), mask, p);
  const auto expected = oracle::masked_self_attention(set, "a", oracle::to_mat(x), mask, 1);
  EXPECT_EQ(out.rows(), 2u);
  EXPECT_LE(oracle::max_abs_diff(expected, out.value()), 1e-12);
}

TEST(MaskedSelfAttention, RandomMasksMatchOracle) {
  AttentionFixture f(8, 2);
  Rng rng(2);
  for (int t = 0; t < 50; ++t) {
    const Tensor x = random_tensor(rng, 16, 8);
    BinaryMask mask(16);
    for (std::size_t i = 0; i < 16; ++i) mask.set(i, rng.uniform01() < 0.4);
    if (mask.none()) mask.set(5);
    Tape tape(false);
    const Var out = masked_self_attention(tape, f.set, tape.constant(x), mask, f.attn);
    EXPECT_LE(oracle::max_abs_diff(oracle::masked_self_attention(f.set, "a", oracle::to_mat(x), mask, 2), out.value()),
              1e-12);
  }
}

TEST(MaskedSelfAttention, AllOnesEqualsPlainSelfAttention) {
  AttentionFixture f(6, 3);
  Rng rng(3);
  const Tensor x = random_tensor(rng, 9, 6);
  Tape tape(false);
  const Var a = masked_self_attention(tape, f.set, tape.constant(x), BinaryMask(9, true), f.attn);
  const Var b = self_attention(tape, f.set, tape.constant(x), f.attn);
  EXPECT_EQ(a.value(), b.value());
}

TEST(MaskedSelfAttention, SinglePositionIsProjectedValue) {
  AttentionFixture f(4, 2);
  Rng rng(4);
  const Tensor x = random_tensor(rng, 5, 4);
  Tape tape(false);
  const Var out = masked_self_attention(tape, f.set, tape.constant(x), BinaryMask::from_indices(5, std::vector<std::size_t>{3}), f.attn);
  const auto xj = oracle::to_mat(x);
  const auto expected = oracle::linear(f.set, "a.o", oracle::linear(f.set, "a.v", {xj[3]}));
  EXPECT_LE(oracle::max_abs_diff(expected, out.value()), 1e-12);
}

TEST(MaskedSelfAttention, IgnoresTokensOutsideTheMask) {
  AttentionFixture f(4, 2);
  Rng rng(5);
  Tensor x = random_tensor(rng, 8, 4);
  const BinaryMask mask = BinaryMask::from_indices(8, std::vector<std::size_t>{1, 4, 6});
  Tape tape(false);
  const Tensor before = masked_self_attention(tape, f.set, tape.constant(x), mask, f.attn).value();
  for (std::size_t r : {0u, 2u, 3u, 5u, 7u}) {
    for (double& v : x.row(r)) v = 1e3 * rng.gaussian();
  }
  EXPECT_EQ(masked_self_attention(tape, f.set, tape.constant(x), mask, f.attn).value(), before);
}

TEST(MaskedSelfAttention, RejectsEmptyOrMismatchedMask) {
  AttentionFixture f(4, 1);
  Tape tape(false);
  const Var x = tape.constant(Tensor(3, 4));
  EXPECT_THROW(masked_self_attention(tape, f.set, x, BinaryMask(3), f.attn), std::invalid_argument);
  EXPECT_THROW(masked_self_attention(tape, f.set, x, BinaryMask(4, true), f.attn), std::invalid_argument);
}

TEST(CrossAttention, MatchesOracleTwoQueriesThreeKeys) {
  AttentionFixture f(4, 2, 6);
  Rng rng(6);
  const Tensor q = random_tensor(rng, 2, 4), kv = random_tensor(rng, 3, 6);
  Tape tape(false);
  AttentionWeights weights;
  const Var out = cross_attention(tape, f.set, tape.constant(q), tape.constant(kv), f.attn, &weights);
  EXPECT_LE(oracle::max_abs_diff(oracle::attention(f.set, "a", oracle::to_mat(q), oracle::to_mat(kv), 2), out.value()),
            1e-12);
  ASSERT_EQ(weights.size(), 2u);
  for (const auto& w : weights) {
    for (std::size_t r = 0; r < w.rows(); ++r) {
      double s = 0.0;
      for (double v : w.row(r)) s += v;
      EXPECT_NEAR(s, 1.0, 1e-12);
    }
  }
}

TEST(CrossAttention, SingleKeyIgnoresQueries) {
  AttentionFixture f(4, 2, 3);
  Rng rng(7);
  const Tensor kv = random_tensor(rng, 1, 3);
  Tape tape(false);
  const Tensor a = cross_attention(tape, f.set, tape.constant(random_tensor(rng, 3, 4)), tape.constant(kv), f.attn).value();
  const Tensor b = cross_attention(tape, f.set, tape.constant(random_tensor(rng, 3, 4)), tape.constant(kv), f.attn).value();
  EXPECT_LT(max_abs_diff(a, b), 1e-12);
  const auto expected = oracle::linear(f.set, "a.o", oracle::linear(f.set, "a.v", oracle::to_mat(kv)));
  for (std::size_t r = 0; r < 3; ++r) {
    for (std::size_t c = 0; c < 4; ++c) EXPECT_NEAR(a(r, c), expected[0][c], 1e-12);
  }
}

TEST(CrossAttention, DuplicatedKeyEqualsSingleKey) {
  AttentionFixture f(4, 1, 3);
  Rng rng(8);
  const Tensor q = random_tensor(rng, 2, 4);
  const Tensor one = random_tensor(rng, 1, 3);
  Tensor two(2, 3);
  for (std::size_t r = 0; r < 2; ++r) {
    for (std::size_t c = 0; c < 3; ++c) two(r, c) = one(0, c);
  }
  Tape tape(false);
  EXPECT_LT(max_abs_diff(cross_attention(tape, f.set, tape.constant(q), tape.constant(one), f.attn).value(),
                         cross_attention(tape, f.set, tape.constant(q), tape.constant(two), f.attn).value()),
            1e-12);
}

TEST(CrossAttention, SingleQueryStaysInConvexHullOfValues) {
  AttentionFixture f(3, 1, 3);
  Rng rng(9);
  for (int t = 0; t < 20; ++t) {
    const Tensor kv = random_tensor(rng, 5, 3);
    Tape tape(false);
    const Tensor out = cross_attention(tape, f.set, tape.constant(random_tensor(rng, 1, 3)), tape.constant(kv), f.attn).value();
    const auto projected = oracle::linear(f.set, "a.o", oracle::linear(f.set, "a.v", oracle::to_mat(kv)));
    for (std::size_t c = 0; c < 3; ++c) {
      double lo = projected[0][c], hi = projected[0][c];
      for (const auto& row : projected) {
        lo = std::min(lo, row[c]);
        hi = std::max(hi, row[c]);
      }
      EXPECT_GE(out(0, c), lo - 1e-12);
      EXPECT_LE(out(0, c), hi + 1e-12);
    }
  }
}

TEST(CrossAttention, RejectsEmptyKeysAndWidthMismatch) {
  AttentionFixture f(4, 1, 3);
  Tape tape(false);
  EXPECT_THROW(cross_attention(tape, f.set, tape.constant(Tensor(1, 4)), tape.constant(Tensor(0, 3)), f.attn),
               std::invalid_argument);
  EXPECT_THROW(cross_attention(tape, f.set, tape.constant(Tensor(1, 4)), tape.constant(Tensor(2, 4)), f.attn),
               std::invalid_argument);
}

TEST(Attention, HeadCountMustDivideWidth) {
  ParameterSet set;
  Rng rng(1);
  EXPECT_THROW(make_attention(set, rng, "a", 6, 4), std::invalid_argument);
}

TEST(SetSelfAttention, ExactlyPermutationEquivariant) {
  AttentionFixture f(8, 2);
  Rng rng(10);
  const Tensor x = random_tensor(rng, 7, 8);
  std::vector<std::size_t> perm(7);
  std::iota(perm.begin(), perm.end(), 0u);
  for (int t = 0; t < 20; ++t) {
    for (std::size_t i = perm.size(); i > 1; --i) std::swap(perm[i - 1], perm[rng.next_u64() % i]);
    Tensor px(7, 8);
    for (std::size_t r = 0; r < 7; ++r) {
      for (std::size_t c = 0; c < 8; ++c) px(r, c) = x(perm[r], c);
    }
    Tape tape(false);
    const Tensor base = set_self_attention(tape, f.set, tape.constant(x), f.attn).value();
    const Tensor permuted = set_self_attention(tape, f.set, tape.constant(px), f.attn).value();
    for (std::size_t r = 0; r < 7; ++r) {
      for (std::size_t c = 0; c < 8; ++c) ASSERT_EQ(permuted(r, c), base(perm[r], c));
    }
    EXPECT_LT(max_abs_diff(base, oracle::to_tensor(oracle::attention(f.set, "a", oracle::to_mat(x), oracle::to_mat(x), 2))),
              1e-12);
  }
}

TEST(Ffn, ZeroWeightsGiveSecondBias) {
  ParameterSet set;
  Rng rng(1);
  const FfnParams p = make_ffn(set, rng, "f", 3, 5, 2);
  set[p.hidden.weight].value.fill(0.0);
  set[p.out.weight].value.fill(0.0);
  set[p.out.bias].value = Tensor::from_rows({{0.25, -4.0}});
  Tape tape(false);
  const Tensor out = ffn(tape, set, tape.constant(random_tensor(rng, 4, 3)), p).value();
  for (std::size_t r = 0; r < 4; ++r) {
    EXPECT_EQ(out(r, 0), 0.25);
    EXPECT_EQ(out(r, 1), -4.0);
  }
}

TEST(Ffn, EmptyInputGivesEmptyOutput) {
  ParameterSet set;
  Rng rng(1);
  const FfnParams p = make_ffn(set, rng, "f", 3, 5, 2);
  Tape tape(false);
  const Var out = ffn(tape, set, tape.constant(Tensor(0, 3)), p);
  EXPECT_EQ(out.rows(), 0u);
  EXPECT_EQ(out.cols(), 2u);
}

TEST(Ffn, ScalarCaseMatchesHandEvaluation) {
  // D = 1: layer norm of a single value is exactly its shift, so the output is
  // w2 * gelu(w1 * shift + b1) + b2 whatever the input.
  ParameterSet set;
  Rng rng(1);
  const FfnParams p = make_ffn(set, rng, "f", 1, 1, 1);
  set[p.norm.shift].value(0, 0) = 0.5;
  set[p.hidden.weight].value(0, 0) = 2.0;
  set[p.hidden.bias].value(0, 0) = -0.25;
  set[p.out.weight].value(0, 0) = -3.0;
  set[p.out.bias].value(0, 0) = 1.0;
  Tape tape(false);
  const double got = ffn(tape, set, tape.constant(Tensor(1, 1, 7.0)), p).value()(0, 0);
  const double h = 0.75;
  const double gelu = 0.5 * h * (1.0 + std::erf(h / std::sqrt(2.0)));
  EXPECT_NEAR(got, -3.0 * gelu + 1.0, 1e-12);
}

TEST(Ffn, MatchesOracle) {
  ParameterSet set;
  Rng rng(11);
  const FfnParams p = make_ffn(set, rng, "f", 6, 12, 4);
  oracle::randomize(set, rng, 0.5);
  const Tensor x = random_tensor(rng, 5, 6);
  Tape tape(false);
  EXPECT_LE(oracle::max_abs_diff(oracle::ffn(set, "f", oracle::to_mat(x)), ffn(tape, set, tape.constant(x), p).value()),
            1e-12);
}

TEST(NnGradients, InputsAndParametersMatchFiniteDifferences) {
  ParameterSet set;
  Rng rng(12);
  const AttentionParams attn = make_attention(set, rng, "a", 4, 2);
  const AttentionParams cross = make_attention(set, rng, "c", 4, 2, 3);
  const FfnParams f = make_ffn(set, rng, "f", 4, 8, 4);
  oracle::randomize(set, rng, 0.4);
  const BinaryMask mask = BinaryMask::from_indices(6, std::vector<std::size_t>{0, 2, 3});
  const Tensor kv = random_tensor(rng, 5, 3);
  const auto build = [&](Tape& tape, Var x) {
    const Var m = masked_self_attention(tape, set, x, mask, attn);
    const Var c = cross_attention(tape, set, m, tape.constant(kv), cross);
    const Var y = ffn(tape, set, c, f);
    const Var ones_r = tape.constant(Tensor(1, y.rows(), 1.0));
    Rng w(3);
    return ad::matmul(ad::matmul(ones_r, y), tape.constant(random_tensor(w, y.cols(), 1)));
  };
  const double input_err = oracle::check_input_gradients(
      [&](ad::Tape& t, std::span<const ad::Var> v) { return build(t, v[0]); }, {random_tensor(rng, 6, 4)});
  EXPECT_LT(input_err, 1e-3);
  const Tensor x = random_tensor(rng, 6, 4);
  Rng probe(4);
  for (const auto& g : oracle::check_param_gradients(
           set, [&](Tape& t) { return build(t, t.constant(x)); }, probe, 8, 1e-5, 1)) {
    EXPECT_LT(g.worst, 1e-3) << g.group;
  }
}

}  // namespace
}  // namespace incom::nn
