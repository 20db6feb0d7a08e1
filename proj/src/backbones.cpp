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

#include "incom/backbones.hpp"

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cmath>
#include <stdexcept>
#include <string>
#include <tuple>

#include "incom/autodiff.hpp"
#include "incom/rng.hpp"

namespace incom::backbones {

namespace {

enum StreamTag : std::uint64_t { kWeights = 1, kVlmNoise = 2, kCnnNoise = 3, kDetNoise = 4, kJitter = 5 };

Tensor mix(const ParameterSet& weights, const Tensor& tokens, const nn::AttentionParams& attn,
           const nn::FfnParams& ffn) {
  ad::Tape tape(false);
  const ad::Var x = tape.constant(tokens);
  const ad::Var h = ad::add(x, nn::self_attention(tape, weights, x, attn));
  return ad::add(h, nn::ffn(tape, weights, h, ffn)).value();
}

}  // namespace

void validate(const BackboneConfig& c) {
  const auto fail = [](const std::string& field, const std::string& why) {
    throw std::invalid_argument("backbone." + field + ": " + why);
  };
  if (c.vlm_grid.size() == 0) fail("vlm_grid", "must be non-empty");
  if (c.cnn_grid.size() == 0) fail("cnn_grid", "must be non-empty");
  if (c.layers < 1) fail("layers", "must be >= 1");
  if (c.mixing_heads == 0) fail("mixing_heads", "must be >= 1");
  if (c.vlm_dim % c.mixing_heads != 0) fail("vlm_dim", "must be divisible by mixing_heads");
  if (c.cnn_dim % c.mixing_heads != 0) fail("cnn_dim", "must be divisible by mixing_heads");
  if (c.query_dim == 0) fail("query_dim", "must be >= 1");
  if (c.num_classes < 1) fail("num_classes", "must be >= 1");
  if (c.noise_scale < 0.0) fail("noise_scale", "must be >= 0");
  if (c.query_noise_scale < 0.0) fail("query_noise_scale", "must be >= 0");
  if (c.box_jitter < 0.0 || c.box_jitter >= 0.5) fail("box_jitter", "must lie in [0, 0.5)");
}

BackboneParams BackboneParams::create(const BackboneConfig& config) {
  validate(config);
  BackboneParams p;
  p.config = config;
  Rng rng(mix_seed(config.seed, kWeights));
  auto& w = p.weights;
  const auto classes = static_cast<std::size_t>(config.num_classes);
  p.vlm_class_embed = w.add("vlm.class_embed", gaussian_tensor(rng, classes, config.vlm_dim, 1.0));
  p.vlm_pos_embed = w.add("vlm.pos_embed", gaussian_tensor(rng, config.vlm_grid.size(), config.vlm_dim, 0.5));
  for (std::size_t l = 0; l < config.layers; ++l) {
    const std::string prefix = "vlm.mix" + std::to_string(l);
    p.vlm_mix_attn.push_back(nn::make_attention(w, rng, prefix + ".attn", config.vlm_dim, config.mixing_heads));
    p.vlm_mix_ffn.push_back(
        nn::make_ffn(w, rng, prefix + ".ffn", config.vlm_dim, 2 * config.vlm_dim, config.vlm_dim));
  }
  p.cnn_class_embed = w.add("cnn.class_embed", gaussian_tensor(rng, classes, config.cnn_dim, 1.0));
  p.cnn_pos_embed = w.add("cnn.pos_embed", gaussian_tensor(rng, config.cnn_grid.size(), config.cnn_dim, 0.5));
  p.cnn_mix_attn = nn::make_attention(w, rng, "cnn.mix.attn", config.cnn_dim, config.mixing_heads);
  p.cnn_mix_ffn = nn::make_ffn(w, rng, "cnn.mix.ffn", config.cnn_dim, 2 * config.cnn_dim, config.cnn_dim);
  const std::size_t det_in = 4 + classes + config.layer_embed_dim;
  p.det_weight = w.add("det.w", gaussian_tensor(rng, det_in, config.query_dim, 1.0 / std::sqrt(double(det_in)) * 2.0));
  p.det_bias = w.add("det.b", gaussian_tensor(rng, 1, config.query_dim, 0.1));
  p.det_layer_embed = w.add("det.layer_embed", gaussian_tensor(rng, config.layers, config.layer_embed_dim, 1.0));
  return p;
}

Tensor paint_tokens(const synth::SceneSample& scene, const PatchGrid& grid, const Tensor& class_embed,
                    const Tensor& pos_embed, double noise_scale, std::uint64_t noise_seed) {
  if (pos_embed.rows() != grid.size()) throw ShapeError("positional table does not match grid");
  // Sum in a canonical instance order so that reordering a scene's instances
  // cannot change the floating-point result.
  std::vector<const synth::Instance*> order;
  for (const auto& inst : scene.instances) order.push_back(&inst);
  std::sort(order.begin(), order.end(), [](const synth::Instance* a, const synth::Instance* b) {
    return std::tie(a->class_id, a->box.x_min, a->box.y_min, a->box.x_max, a->box.y_max) <
           std::tie(b->class_id, b->box.x_min, b->box.y_min, b->box.x_max, b->box.y_max);
  });
  Tensor tokens = pos_embed;
  for (std::size_t n = 0; n < grid.size(); ++n) {
    const auto patch = grid.patch_box(n);
    const double cx = patch.center_x(), cy = patch.center_y();
    auto row = tokens.row(n);
    for (const auto* inst : order) {
      const auto& b = inst->box;
      if (cx < b.x_min || cx > b.x_max || cy < b.y_min || cy > b.y_max) continue;
      const auto emb = class_embed.row(static_cast<std::size_t>(inst->class_id));
      for (std::size_t c = 0; c < row.size(); ++c) row[c] += emb[c];
    }
  }
  if (noise_scale > 0.0) {
    Rng rng(noise_seed);
    for (double& v : tokens.flat()) v += noise_scale * rng.gaussian();
  }
  return tokens;
}

namespace {

void check_classes(const synth::SceneSample& scene, int num_classes) {
  for (const auto& inst : scene.instances) {
    if (inst.class_id < 0 || inst.class_id >= num_classes) {
      throw std::invalid_argument("scene " + std::to_string(scene.scene_id) + ": class " +
                                  std::to_string(inst.class_id) + " outside the backbone's " +
                                  std::to_string(num_classes) + " classes");
    }
  }
}

}  // namespace

TokenStack encode_scene_vlm(const synth::SceneSample& scene, const BackboneParams& params) {
  const auto& c = params.config;
  check_classes(scene, c.num_classes);
  TokenStack stack;
  stack.grid = c.vlm_grid;
  Tensor tokens = paint_tokens(scene, c.vlm_grid, params.weights[params.vlm_class_embed].value,
                               params.weights[params.vlm_pos_embed].value, c.noise_scale,
                               mix_seed(mix_seed(c.seed, kVlmNoise), scene.seed));
  for (std::size_t l = 0; l < c.layers; ++l) {
    tokens = mix(params.weights, tokens, params.vlm_mix_attn[l], params.vlm_mix_ffn[l]);
    stack.layers.push_back(tokens);
  }
  return stack;
}

SpatialMap encode_scene_cnn(const synth::SceneSample& scene, const BackboneParams& params) {
  const auto& c = params.config;
  check_classes(scene, c.num_classes);
  Tensor tokens = paint_tokens(scene, c.cnn_grid, params.weights[params.cnn_class_embed].value,
                               params.weights[params.cnn_pos_embed].value, c.noise_scale,
                               mix_seed(mix_seed(c.seed, kCnnNoise), scene.seed));
  return {c.cnn_grid, mix(params.weights, tokens, params.cnn_mix_attn, params.cnn_mix_ffn)};
}

namespace {

// Keys the per-detection random streams by content, so a detection's query
// does not depend on where it sits in the instance list.
std::uint64_t instance_key(const synth::Instance& inst) {
  std::uint64_t key = static_cast<std::uint64_t>(inst.class_id);
  for (const double v : {inst.box.x_min, inst.box.y_min, inst.box.x_max, inst.box.y_max}) {
    key = mix_seed(key, std::bit_cast<std::uint64_t>(v));
  }
  return key;
}

}  // namespace

QueryStack encode_scene_detector(const synth::SceneSample& scene, const BackboneParams& params) {
  const auto& c = params.config;
  check_classes(scene, c.num_classes);
  QueryStack out;
  out.detections = scene.instances;
  if (c.box_jitter > 0.0) {
    for (auto& det : out.detections) {
      Rng rng(mix_seed(mix_seed(mix_seed(c.seed, kJitter), scene.seed), instance_key(det)));
      for (int attempt = 0; attempt < 16; ++attempt) {
        const auto jit = [&](double v) { return std::clamp(v + rng.uniform(-c.box_jitter, c.box_jitter), 0.0, 1.0); };
        const geometry::Box b{jit(det.box.x_min), jit(det.box.y_min), jit(det.box.x_max), jit(det.box.y_max)};
        if (geometry::is_valid(b)) {
          det.box = b;
          break;
        }
      }
    }
  }

  const std::size_t k = out.detections.size();
  const auto classes = static_cast<std::size_t>(c.num_classes);
  const std::size_t det_in = 4 + classes + c.layer_embed_dim;
  const Tensor& layer_embed = params.weights[params.det_layer_embed].value;
  const Tensor& weight = params.weights[params.det_weight].value;
  const Tensor& bias = params.weights[params.det_bias].value;
  std::vector<Rng> noise;
  for (const auto& inst : scene.instances) {
    noise.emplace_back(mix_seed(mix_seed(mix_seed(c.seed, kDetNoise), scene.seed), instance_key(inst)));
  }
  for (std::size_t l = 0; l < c.layers; ++l) {
    Tensor input(k, det_in);
    for (std::size_t i = 0; i < k; ++i) {
      const auto& d = out.detections[i];
      auto row = input.row(i);
      row[0] = d.box.x_min;
      row[1] = d.box.y_min;
      row[2] = d.box.x_max;
      row[3] = d.box.y_max;
      row[4 + static_cast<std::size_t>(d.class_id)] = 1.0;
      std::copy(layer_embed.row(l).begin(), layer_embed.row(l).end(), row.begin() + 4 + classes);
    }
    Tensor q = incom::matmul(input, weight);
    for (std::size_t i = 0; i < k; ++i) {
      auto row = q.row(i);
      for (std::size_t d = 0; d < row.size(); ++d) {
        row[d] += bias(0, d);
        if (c.query_noise_scale > 0.0) row[d] += c.query_noise_scale * noise[i].gaussian();
      }
    }
    out.layers.push_back(std::move(q));
  }
  return out;
}

}  // namespace incom::backbones
