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

#include "incom/proca.hpp"

#include <stdexcept>
#include <string>

namespace incom::proca {

ProcaParams ProcaParams::create(ParameterSet& set, Rng& rng, std::size_t layer_count,
                                std::size_t query_dim, std::size_t dim, std::size_t context_dim,
                                std::size_t heads, std::size_t ffn_mult) {
  constexpr const char* kBranch[icr::kContextKinds] = {"global", "intra", "inter"};
  ProcaParams p;
  for (std::size_t l = 0; l < layer_count; ++l) {
    const std::string prefix = "proca.l" + std::to_string(l);
    ProcaLayerParams layer;
    layer.query_ffn = nn::make_ffn(set, rng, prefix + ".query_ffn", query_dim, ffn_mult * dim, dim);
    for (std::size_t k = 0; k < icr::kContextKinds; ++k) {
      layer.cross[k] = nn::make_attention(set, rng, prefix + ".cross_" + kBranch[k], dim, heads, context_dim);
    }
    layer.fusion = nn::make_ffn(set, rng, prefix + ".fusion", 3 * dim, ffn_mult * dim, dim);
    p.layers.push_back(std::move(layer));
  }
  return p;
}

ad::Var aggregate_step(ad::Tape& tape, const ParameterSet& set, ad::Var f_prev, ad::Var queries,
                       const icr::ContextBundle& bundle, const ProcaLayerParams& params,
                       std::size_t layer) {
  const std::size_t k = f_prev.rows();
  if (queries.rows() != k) {
    throw std::invalid_argument("ProCA: " + std::to_string(queries.rows()) + " queries for " +
                                std::to_string(k) + " instances");
  }
  if (bundle.layer != layer) {
    throw std::invalid_argument("ProCA layer " + std::to_string(layer) +
                                " received the context bundle of layer " +
                                std::to_string(bundle.layer));
  }
  if ((!bundle.intra_ctx.empty() && bundle.intra_ctx.size() != k) ||
      (!bundle.inter_ctx.empty() && bundle.inter_ctx.size() != k)) {
    throw std::invalid_argument("ProCA: context bundle instance count does not match K");
  }
  const std::size_t dim = f_prev.cols();

  const ad::Var f_hat = ad::add(f_prev, nn::ffn(tape, set, queries, params.query_ffn));
  const ad::Var zeros = tape.constant(Tensor(k, dim));

  ad::Var branch[icr::kContextKinds];
  branch[icr::kGlobal] = bundle.global_ctx.valid()
                             ? nn::cross_attention(tape, set, f_hat, bundle.global_ctx,
                                                   params.cross[icr::kGlobal])
                             : zeros;
  const auto per_instance = [&](const std::vector<ad::Var>& contexts, icr::ContextKind kind) {
    if (contexts.empty()) return zeros;
    std::vector<ad::Var> rows;
    rows.reserve(k);
    for (std::size_t i = 0; i < k; ++i) {
      const std::size_t idx[] = {i};
      rows.push_back(nn::cross_attention(tape, set, ad::gather_rows(f_hat, idx), contexts[i],
                                         params.cross[kind]));
    }
    return ad::concat_rows(rows);
  };
  branch[icr::kIntra] = per_instance(bundle.intra_ctx, icr::kIntra);
  branch[icr::kInter] = per_instance(bundle.inter_ctx, icr::kInter);
  return nn::ffn(tape, set, ad::concat_cols(branch), params.fusion);
}

ad::Var run_context_mining(ad::Tape& tape, const ParameterSet& set,
                           const backbones::TokenStack& tokens,
                           const backbones::QueryStack& queries, const geometry::MaskSet& masks,
                           const icr::IcrParams& icr_params, const ProcaParams& proca_params,
                           const icr::ContextSelection& selection, MiningTrace* trace) {
  std::vector<ad::Var> token_layers, query_layers;
  for (const auto& t : tokens.layers) token_layers.push_back(tape.constant(t));
  for (const auto& q : queries.layers) query_layers.push_back(tape.constant(q));
  return run_context_mining(tape, set, token_layers, query_layers, masks, icr_params, proca_params,
                            selection, trace);
}

ad::Var run_context_mining(ad::Tape& tape, const ParameterSet& set,
                           std::span<const ad::Var> token_layers,
                           std::span<const ad::Var> query_layers, const geometry::MaskSet& masks,
                           const icr::IcrParams& icr_params, const ProcaParams& proca_params,
                           const icr::ContextSelection& selection, MiningTrace* trace) {
  const std::size_t layers = proca_params.layers.size();
  if (token_layers.size() != layers || query_layers.size() != layers) {
    throw std::invalid_argument("context mining expects " + std::to_string(layers) +
                                " layers, got " + std::to_string(token_layers.size()) +
                                " token layers and " + std::to_string(query_layers.size()) +
                                " query layers");
  }
  const std::size_t k = masks.instance_count();
  const std::size_t dim = proca_params.layers.at(0).fusion.out.out_dim;
  ad::Var f = tape.constant(Tensor(k, dim));
  for (std::size_t l = 0; l < layers; ++l) {
    icr::ContextBundle bundle =
        icr::refine_contexts(tape, set, token_layers[l], masks, icr_params.layer(l), l, selection);
    f = aggregate_step(tape, set, f, query_layers[l], bundle, proca_params.layers[l], l);
    if (trace != nullptr) {
      ++trace->icr_calls;
      ++trace->proca_calls;
      trace->aggregated.push_back(f);
      trace->bundles.push_back(std::move(bundle));
    }
  }
  return f;
}

}  // namespace incom::proca
