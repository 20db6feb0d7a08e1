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

#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "incom/backbones.hpp"

namespace incom::backbones {
namespace {

BackboneConfig quiet_config() {
  BackboneConfig c;
  c.noise_scale = 0.0;
  c.query_noise_scale = 0.0;
  c.seed = 11;
  return c;
}

synth::SceneSample scene_with(std::vector<synth::Instance> instances, std::uint64_t seed = 3) {
  synth::SceneSample s;
  s.seed = seed;
  s.instances = std::move(instances);
  return s;
}

const synth::SceneSample& sample_scene() {
  static const auto scene = synth::generate_scene(42, synth::GenConfig{});
  return scene;
}

TEST(Backbones, SameSeedGivesBitIdenticalStacks) {
  BackboneConfig c;
  c.seed = 5;
  const auto a = BackboneParams::create(c);
  const auto b = BackboneParams::create(c);
  const auto& s = sample_scene();
  const auto va = encode_scene_vlm(s, a), vb = encode_scene_vlm(s, b);
  ASSERT_EQ(va.layers.size(), c.layers);
  for (std::size_t l = 0; l < c.layers; ++l) {
    EXPECT_EQ(va.layers[l], vb.layers[l]);
    EXPECT_EQ(va.layers[l].rows(), c.vlm_grid.size());
    EXPECT_EQ(va.layers[l].cols(), c.vlm_dim);
  }
  const auto qa = encode_scene_detector(s, a), qb = encode_scene_detector(s, b);
  ASSERT_EQ(qa.layers.size(), c.layers);
  for (std::size_t l = 0; l < c.layers; ++l) {
    EXPECT_EQ(qa.layers[l], qb.layers[l]);
    EXPECT_EQ(qa.layers[l].rows(), s.instances.size());
    EXPECT_EQ(qa.layers[l].cols(), c.query_dim);
  }
  EXPECT_EQ(encode_scene_cnn(s, a).tokens, encode_scene_cnn(s, b).tokens);
  c.seed = 6;
  EXPECT_NE(encode_scene_vlm(s, BackboneParams::create(c)).layers[0], va.layers[0]);
}

TEST(Backbones, CnnGridSizeSetsTokenCount) {
  BackboneConfig c;
  c.cnn_grid = {8, 8};
  const auto map = encode_scene_cnn(sample_scene(), BackboneParams::create(c));
  EXPECT_EQ(map.tokens.rows(), 64u);
  EXPECT_EQ(map.tokens.cols(), c.cnn_dim);
  c.cnn_grid = {3, 5};
  EXPECT_EQ(encode_scene_cnn(sample_scene(), BackboneParams::create(c)).tokens.rows(), 15u);
}

TEST(Painting, UncoveredPatchIsPositionalEmbeddingOnly) {
  const auto p = BackboneParams::create(quiet_config());
  const PatchGrid grid{8, 8};
  // Box covers only the top-left quarter of patch centers.
  const auto scene = scene_with({{{0.0, 0.0, 0.5, 0.5}, 2, false, 1.0}});
  const Tensor& cls = p.weights[p.vlm_class_embed].value;
  const Tensor& pos = p.weights[p.vlm_pos_embed].value;
  const Tensor tokens = paint_tokens(scene, grid, cls, pos, 0.0, 0);
  for (std::size_t n = 0; n < grid.size(); ++n) {
    const bool covered = grid.row_of(n) < 4 && grid.col_of(n) < 4;
    for (std::size_t c = 0; c < tokens.cols(); ++c) {
      const double expected = pos(n, c) + (covered ? cls(2, c) : 0.0);
      EXPECT_EQ(tokens(n, c), expected);
    }
  }
  const Tensor empty = paint_tokens(scene_with({}), grid, cls, pos, 0.0, 0);
  EXPECT_EQ(empty, pos);
}

TEST(Painting, FullCoverDifferencesArePositionalDifferences) {
  const auto p = BackboneParams::create(quiet_config());
  const PatchGrid grid{8, 8};
  const auto scene = scene_with({{{0.0, 0.0, 1.0, 1.0}, 1, false, 1.0}});
  const Tensor& cls = p.weights[p.vlm_class_embed].value;
  const Tensor& pos = p.weights[p.vlm_pos_embed].value;
  const Tensor tokens = paint_tokens(scene, grid, cls, pos, 0.0, 0);
  for (std::size_t n = 0; n < grid.size(); ++n) {
    for (std::size_t c = 0; c < tokens.cols(); ++c) {
      EXPECT_NEAR(tokens(n, c), cls(1, c) + pos(n, c), 1e-15);
      EXPECT_NEAR(tokens(n, c) - tokens(0, c), pos(n, c) - pos(0, c), 1e-12);
    }
  }
}

TEST(Painting, OverlappingInstancesSumEmbeddings) {
  const auto p = BackboneParams::create(quiet_config());
  const PatchGrid grid{4, 4};
  const Tensor cls = p.weights[p.vlm_class_embed].value;
  Rng rng(1);
  const Tensor pos = gaussian_tensor(rng, grid.size(), cls.cols(), 1.0);
  const auto scene = scene_with({{{0.0, 0.0, 1.0, 1.0}, 1, false, 1.0}, {{0.0, 0.0, 1.0, 1.0}, 3, false, 1.0}});
  const Tensor t = paint_tokens(scene, grid, cls, pos, 0.0, 0);
  for (std::size_t c = 0; c < t.cols(); ++c) EXPECT_NEAR(t(5, c), pos(5, c) + cls(1, c) + cls(3, c), 1e-12);
  EXPECT_THROW(paint_tokens(scene, PatchGrid{8, 8}, cls, pos, 0.0, 0), ShapeError);
}

TEST(Detector, QueriesAreFunctionsOfBoxClassAndLayer) {
  const auto p = BackboneParams::create(quiet_config());
  const synth::Instance a{{0.1, 0.2, 0.4, 0.6}, 2, false, 1.0};
  const synth::Instance h{{0.5, 0.1, 0.9, 0.9}, 0, true, 1.0};
  const auto q = encode_scene_detector(scene_with({a, h, a}, 1), p);
  const auto q2 = encode_scene_detector(scene_with({a}, 99), p);
  for (std::size_t l = 0; l < q.layers.size(); ++l) {
    for (std::size_t c = 0; c < q.layers[l].cols(); ++c) {
      EXPECT_EQ(q.layers[l](0, c), q.layers[l](2, c));
      EXPECT_EQ(q.layers[l](0, c), q2.layers[l](0, c));
    }
  }
  EXPECT_NE(q.layers[0], q.layers[1]);
  EXPECT_EQ(q.detections, (std::vector<synth::Instance>{a, h, a}));
}

TEST(Detector, JitterStaysWithinAmplitude) {
  auto c = quiet_config();
  c.box_jitter = 0.05;
  const auto p = BackboneParams::create(c);
  const auto scenes = synth::generate_dataset(8, 200, synth::GenConfig{});
  std::size_t moved = 0;
  for (const auto& s : scenes) {
    const auto q = encode_scene_detector(s, p);
    ASSERT_EQ(q.detections.size(), s.instances.size());
    for (std::size_t i = 0; i < s.instances.size(); ++i) {
      const auto& g = s.instances[i].box;
      const auto& d = q.detections[i].box;
      EXPECT_TRUE(geometry::is_valid(d));
      for (const auto [gv, dv] : {std::pair{g.x_min, d.x_min}, {g.y_min, d.y_min}, {g.x_max, d.x_max}, {g.y_max, d.y_max}}) {
        EXPECT_LE(std::abs(gv - dv), 0.05 + 1e-12);
        EXPECT_GE(dv, 0.0);
        EXPECT_LE(dv, 1.0);
      }
      if (!(g == d)) ++moved;
      EXPECT_EQ(q.detections[i].class_id, s.instances[i].class_id);
    }
  }
  EXPECT_GT(moved, 0u);
}

TEST(Backbones, RejectsUnknownClassAndBadConfig) {
  const auto p = BackboneParams::create(BackboneConfig{});
  const auto scene = scene_with({{{0.1, 0.1, 0.3, 0.3}, 9, false, 1.0}});
  EXPECT_THROW(encode_scene_vlm(scene, p), std::invalid_argument);
  EXPECT_THROW(encode_scene_detector(scene, p), std::invalid_argument);
  BackboneConfig bad;
  bad.vlm_dim = 33;
  EXPECT_THROW(BackboneParams::create(bad), std::invalid_argument);
  bad = {};
  bad.layers = 0;
  EXPECT_THROW(BackboneParams::create(bad), std::invalid_argument);
}

// Logistic-regression probe on mean-pooled tokens, one binary head per class.
double probe_accuracy(const std::vector<std::vector<double>>& xs, const std::vector<std::vector<int>>& ys,
                      std::size_t train) {
  const std::size_t dim = xs[0].size(), classes = ys[0].size();
  std::vector<double> mean(dim, 0.0), sd(dim, 0.0);
  for (std::size_t i = 0; i < train; ++i) {
    for (std::size_t d = 0; d < dim; ++d) mean[d] += xs[i][d] / double(train);
  }
  for (std::size_t i = 0; i < train; ++i) {
    for (std::size_t d = 0; d < dim; ++d) sd[d] += (xs[i][d] - mean[d]) * (xs[i][d] - mean[d]) / double(train);
  }
  auto feature = [&](std::size_t i, std::size_t d) { return (xs[i][d] - mean[d]) / std::sqrt(sd[d] + 1e-12); };
  std::size_t correct = 0, total = 0;
  for (std::size_t k = 0; k < classes; ++k) {
    std::vector<double> w(dim + 1, 0.0);
    for (int it = 0; it < 1500; ++it) {
      std::vector<double> g(dim + 1, 0.0);
      for (std::size_t i = 0; i < train; ++i) {
        double z = w[dim];
        for (std::size_t d = 0; d < dim; ++d) z += w[d] * feature(i, d);
        const double err = 1.0 / (1.0 + std::exp(-z)) - ys[i][k];
        for (std::size_t d = 0; d < dim; ++d) g[d] += err * feature(i, d);
        g[dim] += err;
      }
      for (std::size_t d = 0; d <= dim; ++d) w[d] -= 0.5 * g[d] / double(train);
    }
    for (std::size_t i = train; i < xs.size(); ++i) {
      double z = w[dim];
      for (std::size_t d = 0; d < dim; ++d) z += w[d] * feature(i, d);
      correct += (z > 0.0) == (ys[i][k] == 1);
      ++total;
    }
  }
  return double(correct) / double(total);
}

TEST(Backbones, LinearProbeRecoversClassPresence) {
  BackboneConfig c;
  c.noise_scale = 0.1;
  c.seed = 21;
  const auto p = BackboneParams::create(c);
  const auto scenes = synth::generate_dataset(77, 800, synth::GenConfig{});
  std::vector<std::vector<double>> painted, mixed;
  std::vector<std::vector<int>> labels;
  for (const auto& s : scenes) {
    const Tensor t = paint_tokens(s, c.vlm_grid, p.weights[p.vlm_class_embed].value,
                                  p.weights[p.vlm_pos_embed].value, c.noise_scale, s.seed);
    const Tensor top = encode_scene_vlm(s, p).layers.back();
    std::vector<double> a(t.cols(), 0.0), b(top.cols(), 0.0);
    for (std::size_t n = 0; n < t.rows(); ++n) {
      for (std::size_t d = 0; d < a.size(); ++d) a[d] += t(n, d) / double(t.rows());
      for (std::size_t d = 0; d < b.size(); ++d) b[d] += top(n, d) / double(top.rows());
    }
    painted.push_back(a);
    mixed.push_back(b);
    std::vector<int> y(static_cast<std::size_t>(c.num_classes), 0);
    for (const auto& inst : s.instances) y[static_cast<std::size_t>(inst.class_id)] = 1;
    labels.push_back(y);
  }
  const double acc_painted = probe_accuracy(painted, labels, 600);
  const double acc_mixed = probe_accuracy(mixed, labels, 600);
  RecordProperty("painted_accuracy", std::to_string(acc_painted));
  RecordProperty("top_layer_accuracy", std::to_string(acc_mixed));
  EXPECT_GT(acc_painted, 0.9);
  EXPECT_GT(acc_mixed, 0.9);
}

}  // namespace
}  // namespace incom::backbones
