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
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "incom/geometry.hpp"

namespace incom::synth {

using geometry::Box;

/// Verb ids produced by the geometric labeling rules.
enum Verb : int { kHold = 0, kRide = 1, kNextTo = 2, kLookAt = 3, kNoInteraction = 4 };
inline constexpr int kRuleVerbCount = 5;
inline constexpr int kPersonClass = 0;
inline constexpr int kSchemaVersion = 1;

const char* verb_name(int verb);

struct Instance {
  Box box;
  int class_id = 0;
  bool is_human = false;
  double score = 1.0;

  bool operator==(const Instance&) const = default;
};

struct Triplet {
  int human = 0;
  int object = 0;
  int verb = 0;

  bool operator==(const Triplet&) const = default;
  auto operator<=>(const Triplet&) const = default;
};

struct SceneSample {
  std::uint64_t scene_id = 0;
  std::uint64_t seed = 0;
  std::vector<Instance> instances;
  std::vector<Triplet> gt_triplets;

  std::size_t human_count() const;
  bool operator==(const SceneSample&) const = default;
};

/// Class 0 is the person class; object classes are 1..num_object_classes.
struct GenConfig {
  int min_humans = 1;
  int max_humans = 3;
  int min_objects = 1;
  int max_objects = 4;
  int num_object_classes = 4;
  int num_verbs = kRuleVerbCount;
  double human_min_width = 0.15;
  double human_max_width = 0.35;
  double human_min_height = 0.3;
  double human_max_height = 0.6;
  double object_min_size = 0.08;
  double object_max_size = 0.35;
  /// Probability that an object is placed near a random human.
  double near_human_prob = 0.7;
  /// Object class k is drawn with probability proportional to k^-rarity_skew.
  double rarity_skew = 1.0;
  double min_score = 0.8;
  double max_score = 1.0;
  /// Boxes overlapping an existing instance above this IoU are resampled.
  double max_instance_iou = 0.7;
  int max_retries = 1000;

  int num_classes() const { return num_object_classes + 1; }
  int num_categories() const { return num_verbs * num_classes(); }
};

/// Throws std::invalid_argument naming the offending field.
void validate(const GenConfig& config);

/// Verbs fired by one (human, other) box pair, ascending. "no-interaction"
/// appears alone when no other rule fires.
std::vector<int> rule_verbs(const Box& human, const Box& other);

/// Triplets for every ordered (human h, other o != h), in (h, o, verb) order.
std::vector<Triplet> label_interactions(std::span<const Instance> instances);

class GenerationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

SceneSample generate_scene(std::uint64_t seed, const GenConfig& config, std::uint64_t scene_id = 0);

/// Scene i uses id first_id + i and a seed derived from (seed, i).
std::vector<SceneSample> generate_dataset(std::uint64_t seed, std::size_t count,
                                          const GenConfig& config, std::uint64_t first_id = 0);

/// HOI category index for (verb, object class) = verb * num_classes + class.
inline int category_of(int verb, int object_class, int num_classes) {
  return verb * num_classes + object_class;
}

/// Training-instance counts per category.
std::vector<int> category_counts(std::span<const SceneSample> scenes, const GenConfig& config);

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

nlohmann::json scene_to_json(const SceneSample& scene);
/// `line` is used only for error messages.
SceneSample scene_from_json(const nlohmann::json& j, std::size_t line = 0);

void save_dataset(std::span<const SceneSample> scenes, const std::filesystem::path& path);
std::vector<SceneSample> load_dataset(const std::filesystem::path& path);

}  // namespace incom::synth
