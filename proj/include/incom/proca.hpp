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

#include <array>
#include <cstddef>
#include <span>
#include <vector>

#include "incom/autodiff.hpp"
#include "incom/backbones.hpp"
#include "incom/geometry.hpp"
#include "incom/icr.hpp"
#include "incom/nn.hpp"

namespace incom::proca {

struct ProcaLayerParams {
  /// Maps a detector query (width D_q) into the aggregation width D.
  nn::FfnParams query_ffn;
  /// Cross-attention against G, R_i and C_i, in that order.
  std::array<nn::AttentionParams, icr::kContextKinds> cross;
  /// 3D -> D fusion of the concatenated branch outputs.
  nn::FfnParams fusion;
};

struct ProcaParams {
  std::vector<ProcaLayerParams> layers;

  static ProcaParams create(ParameterSet& set, Rng& rng, std::size_t layer_count,
                            std::size_t query_dim, std::size_t dim, std::size_t context_dim,
                            std::size_t heads, std::size_t ffn_mult);
};

/// One aggregation layer. `f_prev` and `queries` are K-row matrices; the
/// result row i is FFN([CA(f^_i, G) || CA(f^_i, R_i) || CA(f^_i, C_i)]) with
/// f^_i = f_prev_i + FFN(q_i). Disabled context streams contribute zeros.
ad::Var aggregate_step(ad::Tape& tape, const ParameterSet& set, ad::Var f_prev, ad::Var queries,
                       const icr::ContextBundle& bundle, const ProcaLayerParams& params,
                       std::size_t layer);

/// Optional instrumentation of run_context_mining.
struct MiningTrace {
  std::size_t icr_calls = 0;
  std::size_t proca_calls = 0;
  std::vector<ad::Var> aggregated;  // f^1 .. f^L
  std::vector<icr::ContextBundle> bundles;
};

/// Runs refine_contexts then aggregate_step for every layer, starting from
/// f^0 = 0, and returns f^L (K x D).
ad::Var run_context_mining(ad::Tape& tape, const ParameterSet& set,
                           const backbones::TokenStack& tokens,
                           const backbones::QueryStack& queries, const geometry::MaskSet& masks,
                           const icr::IcrParams& icr_params, const ProcaParams& proca_params,
                           const icr::ContextSelection& selection = {},
                           MiningTrace* trace = nullptr);

/// Same as above over tape values, so token and query layers may be
/// differentiable inputs.
ad::Var run_context_mining(ad::Tape& tape, const ParameterSet& set,
                           std::span<const ad::Var> token_layers,
                           std::span<const ad::Var> query_layers, const geometry::MaskSet& masks,
                           const icr::IcrParams& icr_params, const ProcaParams& proca_params,
                           const icr::ContextSelection& selection = {},
                           MiningTrace* trace = nullptr);

}  // namespace incom::proca
