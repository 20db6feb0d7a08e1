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

#include <vector>

#include "incom/config.hpp"
#include "incom/model.hpp"

namespace incom::testing_support {

/// A config small enough for fast gradient checks and short training runs.
inline ExperimentConfig small_config(std::uint64_t seed = 1) {
  ExperimentConfig c;
  c.gen.max_humans = 2;
  c.gen.max_objects = 2;
  c.backbone.vlm_grid = {4, 4};
  c.backbone.cnn_grid = {3, 3};
  c.backbone.vlm_dim = 8;
  c.backbone.query_dim = 8;
  c.backbone.cnn_dim = 8;
  c.backbone.layers = 2;
  c.backbone.layer_embed_dim = 4;
  c.model.dim = 8;
  c.model.pair_dim = 8;
  c.model.heads = 2;
  c.model.ffn_mult = 2;
  c.model.layers = 2;
  c.model.decoder_layers = 1;
  c.train.batch_size = 4;
  c.apply_seed(seed);
  return c;
}

inline std::vector<SceneFeatures> encode_all(const std::vector<synth::SceneSample>& scenes,
                                             const backbones::BackboneParams& bb, const ModelConfig& model) {
  std::vector<SceneFeatures> out;
  out.reserve(scenes.size());
  for (const auto& s : scenes) out.push_back(encode_scene(s, bb, model));
  return out;
}

}  // namespace incom::testing_support
