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
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "incom/geometry.hpp"
#include "incom/synth_data.hpp"

namespace incom::eval {

using geometry::Box;

struct HoiPrediction {
  std::uint64_t scene_id = 0;
  Box human_box;
  Box object_box;
  int object_class = 0;
  int verb = 0;
  double score = 0.0;
};

struct GroundTruth {
  std::uint64_t scene_id = 0;
  Box human_box;
  Box object_box;
  int object_class = 0;
  int verb = 0;
};

inline constexpr double kIouThreshold = 0.5;
inline constexpr int kRareThreshold = 10;

/// Greedy matching for one category. `preds` must already be ranked by
/// descending score. A prediction is a true positive when an unmatched
/// ground truth of the same scene has IoU > threshold on both boxes; among
/// candidates the larger min(IoU_h, IoU_o) wins, then the lower index.
std::vector<bool> match_predictions(std::span<const HoiPrediction> preds,
                                    std::span<const GroundTruth> gts,
                                    double iou_threshold = kIouThreshold);

/// All-point interpolated AP of a ranked TP/FP list. Empty when n_gt == 0.
std::optional<double> average_precision(const std::vector<bool>& ranked_tp, std::size_t n_gt);

struct CategoryResult {
  int category = 0;
  int verb = 0;
  int object_class = 0;
  std::size_t n_gt = 0;
  int train_count = 0;
  bool rare = false;
  double ap = 0.0;
};

struct EvalReport {
  std::string mode = "full";
  int rare_threshold = kRareThreshold;
  std::vector<CategoryResult> categories;
  /// NaN when a split has no categories.
  double map_full = 0.0;
  double map_rare = 0.0;
  double map_non_rare = 0.0;

  nlohmann::json to_json() const;
};

/// Arithmetic means of the per-category APs over Full / Rare / Non-rare.
EvalReport mean_ap(std::vector<CategoryResult> categories, int rare_threshold = kRareThreshold);

std::vector<GroundTruth> ground_truths(std::span<const synth::SceneSample> scenes);

/// Groups by (verb, object class), ranks predictions, matches and averages.
/// `train_counts[c]` holds the training instances of category c; categories
/// below `rare_threshold` form the Rare split.
EvalReport evaluate(std::span<const HoiPrediction> preds, std::span<const GroundTruth> gts,
                    std::span<const int> train_counts, int num_classes,
                    int rare_threshold = kRareThreshold);

nlohmann::json prediction_to_json(const HoiPrediction& p);
HoiPrediction prediction_from_json(const nlohmann::json& j);
void save_predictions(std::span<const HoiPrediction> preds, const std::filesystem::path& path);
std::vector<HoiPrediction> load_predictions(const std::filesystem::path& path);

}  // namespace incom::eval
