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
#include <vector>

#include "incom/autodiff.hpp"
#include "incom/geometry.hpp"
#include "incom/nn.hpp"
#include "incom/parameters.hpp"
#include "incom/rng.hpp"

namespace incom::icr {

enum ContextKind : std::size_t { kGlobal = 0, kIntra = 1, kInter = 2 };
inline constexpr std::size_t kContextKinds = 3;

/// Which context streams are computed; disabled streams are absent from the
/// bundle and contribute zeros downstream.
struct ContextSelection {
  bool global = true;
  bool intra = true;
  bool inter = true;

  bool enabled(ContextKind kind) const {
    return kind == kGlobal ? global : (kind == kIntra ? intra : inter);
  }
  bool operator==(const ContextSelection&) const = default;
};

/// Independent attention + FFN per context kind.
struct IcrLayerParams {
  std::array<nn::AttentionParams, kContextKinds> attn;
  std::array<nn::FfnParams, kContextKinds> ffn;
};

struct IcrParams {
  std::vector<IcrLayerParams> layers;
  bool shared = false;

  const IcrLayerParams& layer(std::size_t l) const { return shared ? layers.at(0) : layers.at(l); }

  static IcrParams create(ParameterSet& set, Rng& rng, std::size_t layer_count, std::size_t dim,
                          std::size_t heads, std::size_t ffn_hidden, bool shared);
};

struct ContextBundle {
  std::size_t layer = 0;
  ad::Var global_ctx;
  std::vector<ad::Var> intra_ctx;
  std::vector<ad::Var> inter_ctx;
};

/// G = FFN_G(SA(V, 1)), R_i = FFN_R(SA(V, M^R_i)), C_i = FFN_C(SA(V, M^C_i)).
ContextBundle refine_contexts(ad::Tape& tape, const ParameterSet& set, ad::Var v_layer,
                              const geometry::MaskSet& masks, const IcrLayerParams& params,
                              std::size_t layer, const ContextSelection& selection = {});

}  // namespace incom::icr
