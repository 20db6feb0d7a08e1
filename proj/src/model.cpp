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

#include "incom/model.hpp"

#include <stdexcept>
#include <string>

#include "incom/rng.hpp"

namespace incom {

void validate(const ModelConfig& m, const backbones::BackboneConfig& b) {
  const auto fail = [](const std::string& field, const std::string& why) {
    throw std::invalid_argument("model." + field + ": " + why);
  };
  if (m.heads == 0) fail("heads", "must be >= 1");
  if (m.dim == 0 || m.dim % m.heads != 0) fail("dim", "must be a positive multiple of heads");
  if (m.pair_dim == 0 || m.pair_dim % m.heads != 0) fail("pair_dim", "must be a positive multiple of heads");
  if (b.vlm_dim % m.heads != 0) fail("heads", "must divide backbone.vlm_dim");
  if (m.ffn_mult == 0) fail("ffn_mult", "must be >= 1");
  if (m.layers < 1) fail("layers", "must be >= 1");
  if (m.layers != b.layers) {
    fail("layers", std::to_string(m.layers) + " does not match backbone.layers " + std::to_string(b.layers));
  }
  if (m.decoder_layers < 1) fail("decoder_layers", "must be >= 1");
  if (m.verbs < 1) fail("verbs", "must be >= 1");
  if (!(m.overlap_threshold > 0.0 && m.overlap_threshold <= 1.0)) fail("overlap_threshold", "must lie in (0, 1]");
  if (m.context_mining && !m.contexts.global && !m.contexts.intra && !m.contexts.inter) {
    fail("contexts", "at least one context stream must be enabled");
  }
  backbones::validate(b);
}

nlohmann::json to_json(const ModelConfig& c) {
  return {{"dim", c.dim},
          {"pair_dim", c.pair_dim},
          {"heads", c.heads},
          {"ffn_mult", c.ffn_mult},
          {"layers", c.layers},
          {"decoder_layers", c.decoder_layers},
          {"verbs", c.verbs},
          {"share_icr", c.share_icr},
          {"decoder_residual", c.decoder_residual},
          {"context_mining", c.context_mining},
          {"context_global", c.contexts.global},
          {"context_intra", c.contexts.intra},
          {"context_inter", c.contexts.inter},
          {"overlap_threshold", c.overlap_threshold},
          {"seed", c.seed}};
}

ModelConfig model_config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  c.dim = j.at("dim").get<std::size_t>();
  c.pair_dim = j.at("pair_dim").get<std::size_t>();
  c.heads = j.at("heads").get<std::size_t>();
  c.ffn_mult = j.at("ffn_mult").get<std::size_t>();
  c.layers = j.at("layers").get<std::size_t>();
  c.decoder_layers = j.at("decoder_layers").get<std::size_t>();
  c.verbs = j.at("verbs").get<std::size_t>();
  c.share_icr = j.at("share_icr").get<bool>();
  c.decoder_residual = j.at("decoder_residual").get<bool>();
  c.context_mining = j.at("context_mining").get<bool>();
  c.contexts.global = j.at("context_global").get<bool>();
  c.contexts.intra = j.at("context_intra").get<bool>();
  c.contexts.inter = j.at("context_inter").get<bool>();
  c.overlap_threshold = j.at("overlap_threshold").get<double>();
  c.seed = j.at("seed").get<std::uint64_t>();
  return c;
}

nlohmann::json to_json(const backbones::BackboneConfig& c) {
  return {{"vlm_grid_rows", c.vlm_grid.rows},
          {"vlm_grid_cols", c.vlm_grid.cols},
          {"cnn_grid_rows", c.cnn_grid.rows},
          {"cnn_grid_cols", c.cnn_grid.cols},
          {"vlm_dim", c.vlm_dim},
          {"query_dim", c.query_dim},
          {"cnn_dim", c.cnn_dim},
          {"layers", c.layers},
          {"mixing_heads", c.mixing_heads},
          {"layer_embed_dim", c.layer_embed_dim},
          {"num_classes", c.num_classes},
          {"noise_scale", c.noise_scale},
          {"query_noise_scale", c.query_noise_scale},
          {"box_jitter", c.box_jitter},
          {"seed", c.seed}};
}

backbones::BackboneConfig backbone_config_from_json(const nlohmann::json& j) {
  backbones::BackboneConfig c;
  c.vlm_grid = {j.at("vlm_grid_rows").get<std::size_t>(), j.at("vlm_grid_cols").get<std::size_t>()};
  c.cnn_grid = {j.at("cnn_grid_rows").get<std::size_t>(), j.at("cnn_grid_cols").get<std::size_t>()};
  c.vlm_dim = j.at("vlm_dim").get<std::size_t>();
  c.query_dim = j.at("query_dim").get<std::size_t>();
  c.cnn_dim = j.at("cnn_dim").get<std::size_t>();
  c.layers = j.at("layers").get<std::size_t>();
  c.mixing_heads = j.at("mixing_heads").get<std::size_t>();
  c.layer_embed_dim = j.at("layer_embed_dim").get<std::size_t>();
  c.num_classes = j.at("num_classes").get<int>();
  c.noise_scale = j.at("noise_scale").get<double>();
  c.query_noise_scale = j.at("query_noise_scale").get<double>();
  c.box_jitter = j.at("box_jitter").get<double>();
  c.seed = j.at("seed").get<std::uint64_t>();
  return c;
}

Tensor interaction_targets(const synth::SceneSample& scene, std::span<const pair::PairIndex> pairs,
                           std::size_t verbs) {
  Tensor t(pairs.size(), verbs);
  for (const auto& tr : scene.gt_triplets) {
    for (std::size_t p = 0; p < pairs.size(); ++p) {
      if (pairs[p].human == static_cast<std::size_t>(tr.human) &&
          pairs[p].object == static_cast<std::size_t>(tr.object) &&
          static_cast<std::size_t>(tr.verb) < verbs) {
        t(p, static_cast<std::size_t>(tr.verb)) = 1.0;
      }
    }
  }
  return t;
}

SceneFeatures encode_scene(const synth::SceneSample& scene, const backbones::BackboneParams& backbone,
                           const ModelConfig& config) {
  SceneFeatures f;
  f.scene_id = scene.scene_id;
  f.tokens = backbones::encode_scene_vlm(scene, backbone);
  f.queries = backbones::encode_scene_detector(scene, backbone);
  f.spatial = backbones::encode_scene_cnn(scene, backbone);
  std::vector<geometry::Box> boxes;
  for (const auto& d : f.queries.detections) boxes.push_back(d.box);
  if (!boxes.empty()) {
    f.masks = geometry::build_mask_set(boxes, backbone.config.vlm_grid, config.overlap_threshold);
  } else {
    f.masks.grid = backbone.config.vlm_grid;
    f.masks.global_mask = geometry::BinaryMask(backbone.config.vlm_grid.size(), true);
  }
  f.pairs = pair::generate_pairs(f.queries.detections);
  f.targets = interaction_targets(scene, f.pairs, config.verbs);
  return f;
}

Model Model::create(const ModelConfig& config, const backbones::BackboneConfig& backbone) {
  validate(config, backbone);
  Model m;
  m.config_ = config;
  m.backbone_ = backbone;
  Rng rng(mix_seed(config.seed, 0x6d6f64656cULL));
  const std::size_t hidden = config.ffn_mult * backbone.vlm_dim;
  m.icr_ = icr::IcrParams::create(m.params_, rng, config.layers, backbone.vlm_dim, config.heads, hidden,
                                  config.share_icr);
  m.proca_ = proca::ProcaParams::create(m.params_, rng, config.layers, backbone.query_dim, config.dim,
                                        backbone.vlm_dim, config.heads, config.ffn_mult);
  m.pair_ = pair::PairDecoderParams::create(m.params_, rng, backbone.query_dim, config.dim, config.pair_dim,
                                            backbone.cnn_dim, backbone.vlm_dim, config.heads,
                                            config.ffn_mult, config.decoder_layers, config.verbs,
                                            config.decoder_residual);
  return m;
}

ad::Var Model::mine(ad::Tape& tape, const SceneFeatures& features, proca::MiningTrace* trace) const {
  if (!config_.context_mining || features.masks.instance_count() == 0) return {};
  return proca::run_context_mining(tape, params_, features.tokens, features.queries, features.masks,
                                   icr_, proca_, config_.contexts, trace);
}

ad::Var Model::interact(ad::Tape& tape, const SceneFeatures& features, ad::Var aggregated,
                        pair::MftConfig config, pair::DecoderTrace* trace,
                        pair::PairFeatures* pair_features) const {
  if (features.pairs.empty()) return tape.constant(Tensor(0, config_.verbs));
  const ad::Var q = tape.constant(features.queries.layers.back());
  const auto fused = pair::fuse_pair_features(tape, params_, q, aggregated, features.pairs, config, pair_);
  if (pair_features != nullptr) *pair_features = fused;
  return pair::decode_interactions(tape, params_, fused, tape.constant(features.spatial.tokens),
                                   tape.constant(features.tokens.layers.back()), config, pair_, trace);
}

Tensor Model::predict_logits(const SceneFeatures& features, pair::MftConfig config) const {
  ad::Tape tape(false);
  if (features.pairs.empty()) return Tensor(0, config_.verbs);
  // Context mining only feeds f^L, which d-only never reads.
  const bool needs_f = pair::flags_of(config).use_aggregated;
  const ad::Var f = needs_f ? mine(tape, features) : ad::Var{};
  return interact(tape, features, f, config).value();
}

std::vector<eval::HoiPrediction> Model::predict(const SceneFeatures& features, pair::MftConfig config) const {
  return pair::score_hoi(predict_logits(features, config), features.pairs, features.queries.detections,
                         features.scene_id);
}

}  // namespace incom
