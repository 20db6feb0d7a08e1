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

#include "incom/icr.hpp"

#include <stdexcept>
#include <string>

namespace incom::icr {

namespace {

constexpr const char* kKindNames[kContextKinds] = {"global", "intra", "inter"};

}  // namespace

IcrParams IcrParams::create(ParameterSet& set, Rng& rng, std::size_t layer_count, std::size_t dim,
                            std::size_t heads, std::size_t ffn_hidden, bool shared) {
  IcrParams p;
  p.shared = shared;
  const std::size_t n = shared ? 1 : layer_count;
  for (std::size_t l = 0; l < n; ++l) {
    IcrLayerParams layer;
    for (std::size_t k = 0; k < kContextKinds; ++k) {
      const std::string prefix = "icr.l" + std::to_string(l) + "." + kKindNames[k];
      layer.attn[k] = nn::make_attention(set, rng, prefix + ".attn", dim, heads);
      layer.ffn[k] = nn::make_ffn(set, rng, prefix + ".ffn", dim, ffn_hidden, dim);
    }
    p.layers.push_back(std::move(layer));
  }
  return p;
}

ContextBundle refine_contexts(ad::Tape& tape, const ParameterSet& set, ad::Var v_layer,
                              const geometry::MaskSet& masks, const IcrLayerParams& params,
                              std::size_t layer, const ContextSelection& selection) {
  if (v_layer.rows() != masks.grid.size()) {
    throw std::invalid_argument("VLM layer has " + std::to_string(v_layer.rows()) +
                                " tokens but the mask grid has " +
                                std::to_string(masks.grid.size()));
  }
  const std::size_t k = masks.instance_count();
  if (masks.surrounding_masks.size() != k) throw std::invalid_argument("mask set is inconsistent");

  const auto context = [&](const geometry::BinaryMask& mask, ContextKind kind) {
    const ad::Var attended = nn::masked_self_attention(tape, set, v_layer, mask, params.attn[kind]);
    return nn::ffn(tape, set, attended, params.ffn[kind]);
  };

  ContextBundle bundle;
  bundle.layer = layer;
  if (selection.global) bundle.global_ctx = context(masks.global_mask, kGlobal);
  for (std::size_t i = 0; i < k; ++i) {
    if (selection.intra) bundle.intra_ctx.push_back(context(masks.instance_masks[i], kIntra));
    if (selection.inter) bundle.inter_ctx.push_back(context(masks.surrounding_masks[i], kInter));
  }
  return bundle;
}

}  // namespace incom::icr
