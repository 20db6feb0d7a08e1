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
#include <string>
#include <vector>

#include "incom/autodiff.hpp"
#include "incom/geometry.hpp"
#include "incom/parameters.hpp"
#include "incom/rng.hpp"

namespace incom::nn {

using ad::Tape;
using ad::Var;

struct LinearParams {
  ParamId weight;  // in x out
  ParamId bias;    // 1 x out
  std::size_t in_dim = 0;
  std::size_t out_dim = 0;
};

struct LayerNormParams {
  ParamId gain;
  ParamId shift;
  std::size_t dim = 0;
};

/// Multi-head attention. Queries have width `model_dim`; keys and values are
/// read from tokens of width `kv_dim` and projected to `model_dim`.
struct AttentionParams {
  LinearParams query;
  LinearParams key;
  LinearParams value;
  LinearParams out;
  std::size_t heads = 1;
  std::size_t model_dim = 0;
  std::size_t kv_dim = 0;

  std::size_t head_dim() const { return model_dim / heads; }
};

/// Pre-LN feed-forward block: LN -> affine -> GELU -> affine.
struct FfnParams {
  LayerNormParams norm;
  LinearParams hidden;
  LinearParams out;
};

LinearParams make_linear(ParameterSet& set, Rng& rng, const std::string& prefix,
                         std::size_t in_dim, std::size_t out_dim);
LayerNormParams make_layer_norm(ParameterSet& set, const std::string& prefix, std::size_t dim);
/// kv_dim = 0 means keys/values share the query width.
AttentionParams make_attention(ParameterSet& set, Rng& rng, const std::string& prefix,
                               std::size_t model_dim, std::size_t heads, std::size_t kv_dim = 0);
FfnParams make_ffn(ParameterSet& set, Rng& rng, const std::string& prefix, std::size_t in_dim,
                   std::size_t hidden_dim, std::size_t out_dim);

/// Receives one softmax weight matrix (queries x keys) per head.
using AttentionWeights = std::vector<Tensor>;

Var linear(Tape& tape, const ParameterSet& set, Var x, const LinearParams& p);
Var layer_norm(Tape& tape, const ParameterSet& set, Var x, const LayerNormParams& p);
Var ffn(Tape& tape, const ParameterSet& set, Var x, const FfnParams& p);

/// Scaled dot-product attention of `query` rows over all `keyvalue` rows.
Var cross_attention(Tape& tape, const ParameterSet& set, Var query, Var keyvalue,
                    const AttentionParams& p, AttentionWeights* weights = nullptr);

Var self_attention(Tape& tape, const ParameterSet& set, Var x, const AttentionParams& p,
                   AttentionWeights* weights = nullptr);

/// Self-attention restricted to the masked positions: queries, keys and
/// values all come from the subsequence where mask = 1. Output has
/// popcount(mask) rows in position order.
Var masked_self_attention(Tape& tape, const ParameterSet& set, Var x,
                          const geometry::BinaryMask& mask, const AttentionParams& p,
                          AttentionWeights* weights = nullptr);

/// Self-attention over an unordered set of tokens. Keys are visited in a
/// canonical (lexicographic) order so the result is exactly equivariant to
/// any permutation of the input rows, including in floating point.
Var set_self_attention(Tape& tape, const ParameterSet& set, Var x, const AttentionParams& p);

/// Row order sorting the tensor's rows lexicographically (stable).
std::vector<std::size_t> canonical_row_order(const Tensor& t);

}  // namespace incom::nn
