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
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "incom/autodiff.hpp"
#include "incom/backbones.hpp"
#include "incom/geometry.hpp"
#include "incom/icr.hpp"
#include "incom/pair_decoder.hpp"
#include "incom/proca.hpp"
#include "incom/synth_data.hpp"

namespace incom {

struct ModelConfig {
  /// Width of the aggregated instance features f^l.
  std::size_t dim = 32;
  /// Width of the HO pair tokens.
  std::size_t pair_dim = 32;
  std::size_t heads = 2;
  std::size_t ffn_mult = 4;
  /// Context-mining depth; must equal the backbone's layer count.
  std::size_t layers = 3;
  std::size_t decoder_layers = 2;
  std::size_t verbs = synth::kRuleVerbCount;
  bool share_icr = false;
  /// Pre-LN residual decoder blocks; false gives the residual-free update.
  bool decoder_residual = true;
  /// When false, ICR/ProCA are skipped and pairs see detector queries only.
  bool context_mining = true;
  icr::ContextSelection contexts;
  double overlap_threshold = geometry::kDefaultOverlapThreshold;
  std::uint64_t seed = 0;

  bool operator==(const ModelConfig&) const = default;
};

void validate(const ModelConfig& model, const backbones::BackboneConfig& backbone);
nlohmann::json to_json(const ModelConfig& c);
ModelConfig model_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const backbones::BackboneConfig& c);
backbones::BackboneConfig backbone_config_from_json(const nlohmann::json& j);

/// Frozen backbone outputs and labels for one scene. Computed once per scene
/// and reused by every training step.
struct SceneFeatures {
  std::uint64_t scene_id = 0;
  backbones::TokenStack tokens;
  backbones::QueryStack queries;
  backbones::SpatialMap spatial;
  geometry::MaskSet masks;
  std::vector<pair::PairIndex> pairs;
  /// P x verbs multi-label targets.
  Tensor targets;
};

SceneFeatures encode_scene(const synth::SceneSample& scene, const backbones::BackboneParams& backbone,
                           const ModelConfig& config);

/// Multi-hot verb targets aligned with `pairs`.
Tensor interaction_targets(const synth::SceneSample& scene, std::span<const pair::PairIndex> pairs,
                           std::size_t verbs);

class Model {
 public:
  static Model create(const ModelConfig& config, const backbones::BackboneConfig& backbone);

  const ModelConfig& config() const { return config_; }
  const backbones::BackboneConfig& backbone_config() const { return backbone_; }
  const ParameterSet& params() const { return params_; }
  ParameterSet& params() { return params_; }
  const icr::IcrParams& icr() const { return icr_; }
  const proca::ProcaParams& proca() const { return proca_; }
  const pair::PairDecoderParams& pair_params() const { return pair_; }

  /// f^L (K x dim). Invalid Var when context mining is disabled.
  ad::Var mine(ad::Tape& tape, const SceneFeatures& features, proca::MiningTrace* trace = nullptr) const;

  /// Interaction logits of the sub-module under one input configuration.
  ad::Var interact(ad::Tape& tape, const SceneFeatures& features, ad::Var aggregated,
                   pair::MftConfig config, pair::DecoderTrace* trace = nullptr,
                   pair::PairFeatures* pair_features = nullptr) const;

  /// Non-recording forward returning P x verbs logits.
  Tensor predict_logits(const SceneFeatures& features, pair::MftConfig config) const;

  std::vector<eval::HoiPrediction> predict(const SceneFeatures& features, pair::MftConfig config) const;

 private:
  ModelConfig config_;
  backbones::BackboneConfig backbone_;
  ParameterSet params_;
  icr::IcrParams icr_;
  proca::ProcaParams proca_;
  pair::PairDecoderParams pair_;
};

}  // namespace incom
