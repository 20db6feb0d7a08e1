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
#include <cstdint>
#include <vector>

#include "incom/geometry.hpp"
#include "incom/nn.hpp"
#include "incom/parameters.hpp"
#include "incom/synth_data.hpp"
#include "incom/tensor.hpp"

namespace incom::backbones {

using geometry::PatchGrid;

struct BackboneConfig {
  PatchGrid vlm_grid{8, 8};
  PatchGrid cnn_grid{8, 8};
  std::size_t vlm_dim = 32;
  std::size_t query_dim = 32;
  std::size_t cnn_dim = 32;
  /// Number of VLM token layers and detector query layers.
  std::size_t layers = 3;
  std::size_t mixing_heads = 2;
  std::size_t layer_embed_dim = 8;
  int num_classes = 5;
  /// Gaussian noise added to painted VLM and CNN tokens.
  double noise_scale = 0.1;
  /// Gaussian noise added to detector queries.
  double query_noise_scale = 0.05;
  /// Uniform per-coordinate perturbation applied to detected boxes.
  double box_jitter = 0.0;
  std::uint64_t seed = 0;

  bool operator==(const BackboneConfig&) const = default;
};

void validate(const BackboneConfig& config);

/// Frozen weights of the three encoders, fully determined by the config.
/// Training never sees this parameter set.
struct BackboneParams {
  BackboneConfig config;
  ParameterSet weights;
  ParamId vlm_class_embed;
  ParamId vlm_pos_embed;
  std::vector<nn::AttentionParams> vlm_mix_attn;
  std::vector<nn::FfnParams> vlm_mix_ffn;
  ParamId cnn_class_embed;
  ParamId cnn_pos_embed;
  nn::AttentionParams cnn_mix_attn;
  nn::FfnParams cnn_mix_ffn;
  ParamId det_weight;
  ParamId det_bias;
  ParamId det_layer_embed;

  static BackboneParams create(const BackboneConfig& config);
};

/// One N x D_v token sequence per layer.
struct TokenStack {
  PatchGrid grid;
  std::vector<Tensor> layers;
};

/// One K x D_q query matrix per layer, rows aligned with `detections`.
struct QueryStack {
  std::vector<Tensor> layers;
  std::vector<synth::Instance> detections;
};

struct SpatialMap {
  PatchGrid grid;
  Tensor tokens;
};

/// Painted tokens before any mixing: class embeddings of instances whose
/// boxes cover each patch center, plus positional embedding and noise.
Tensor paint_tokens(const synth::SceneSample& scene, const PatchGrid& grid, const Tensor& class_embed,
                    const Tensor& pos_embed, double noise_scale, std::uint64_t noise_seed);

TokenStack encode_scene_vlm(const synth::SceneSample& scene, const BackboneParams& params);
QueryStack encode_scene_detector(const synth::SceneSample& scene, const BackboneParams& params);
SpatialMap encode_scene_cnn(const synth::SceneSample& scene, const BackboneParams& params);

}  // namespace incom::backbones
