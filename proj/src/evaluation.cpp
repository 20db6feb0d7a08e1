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

#include "incom/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <stdexcept>

namespace incom::eval {

std::vector<bool> match_predictions(std::span<const HoiPrediction> preds,
                                    std::span<const GroundTruth> gts, double iou_threshold) {
  std::vector<bool> tp(preds.size(), false);
  std::vector<bool> used(gts.size(), false);
  for (std::size_t p = 0; p < preds.size(); ++p) {
    const auto& pred = preds[p];
    std::optional<std::size_t> best;
    double best_quality = -1.0;
    for (std::size_t g = 0; g < gts.size(); ++g) {
      const auto& gt = gts[g];
      if (used[g] || gt.scene_id != pred.scene_id || gt.verb != pred.verb ||
          gt.object_class != pred.object_class) {
        continue;
      }
      const double iou_h = geometry::iou(pred.human_box, gt.human_box);
      const double iou_o = geometry::iou(pred.object_box, gt.object_box);
      if (iou_h <= iou_threshold || iou_o <= iou_threshold) continue;
      const double quality = std::min(iou_h, iou_o);
      if (quality > best_quality) {
        best_quality = quality;
        best = g;
      }
    }
    if (best) {
      used[*best] = true;
      tp[p] = true;
    }
  }
  return tp;
}

std::optional<double> average_precision(const std::vector<bool>& ranked_tp, std::size_t n_gt) {
  if (n_gt == 0) return std::nullopt;
  const std::size_t n = ranked_tp.size();
  std::vector<double> precision(n), recall(n);
  std::size_t tps = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (ranked_tp[i]) ++tps;
    precision[i] = static_cast<double>(tps) / static_cast<double>(i + 1);
    recall[i] = static_cast<double>(tps) / static_cast<double>(n_gt);
  }
  // Precision envelope, then area under the step curve at every recall change.
  for (std::size_t i = n; i-- > 1;) precision[i - 1] = std::max(precision[i - 1], precision[i]);
  double ap = 0.0, prev_recall = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (recall[i] > prev_recall) {
      ap += (recall[i] - prev_recall) * precision[i];
      prev_recall = recall[i];
    }
  }
  return ap;
}

namespace {

double mean_of(const std::vector<double>& v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

nlohmann::json number_or_null(double v) {
  return std::isnan(v) ? nlohmann::json(nullptr) : nlohmann::json(v);
}

}  // namespace

EvalReport mean_ap(std::vector<CategoryResult> categories, int rare_threshold) {
  EvalReport report;
  report.rare_threshold = rare_threshold;
  std::vector<double> full, rare, non_rare;
  for (auto& c : categories) {
    full.push_back(c.ap);
    (c.rare ? rare : non_rare).push_back(c.ap);
  }
  report.categories = std::move(categories);
  report.map_full = mean_of(full);
  report.map_rare = mean_of(rare);
  report.map_non_rare = mean_of(non_rare);
  return report;
}

nlohmann::json EvalReport::to_json() const {
  nlohmann::json cats = nlohmann::json::array();
  for (const auto& c : categories) {
    cats.push_back({{"category", c.category},
                    {"verb", c.verb},
                    {"verb_name", synth::verb_name(c.verb)},
                    {"object_class", c.object_class},
                    {"n_gt", c.n_gt},
                    {"train_count", c.train_count},
                    {"rare", c.rare},
                    {"ap", c.ap}});
  }
  std::size_t n_rare = 0;
  for (const auto& c : categories) n_rare += c.rare ? 1 : 0;
  return {{"mode", mode},
          {"rare_threshold", rare_threshold},
          {"map_full", number_or_null(map_full)},
          {"map_rare", number_or_null(map_rare)},
          {"map_non_rare", number_or_null(map_non_rare)},
          {"num_categories", categories.size()},
          {"num_rare", n_rare},
          {"categories", std::move(cats)}};
}

std::vector<GroundTruth> ground_truths(std::span<const synth::SceneSample> scenes) {
  std::vector<GroundTruth> out;
  for (const auto& s : scenes) {
    for (const auto& t : s.gt_triplets) {
      const auto& h = s.instances.at(t.human);
      const auto& o = s.instances.at(t.object);
      out.push_back({s.scene_id, h.box, o.box, o.class_id, t.verb});
    }
  }
  return out;
}

EvalReport evaluate(std::span<const HoiPrediction> preds, std::span<const GroundTruth> gts,
                    std::span<const int> train_counts, int num_classes, int rare_threshold) {
  if (num_classes <= 0) throw std::invalid_argument("evaluate: num_classes must be positive");
  const auto category = [num_classes](int verb, int cls) {
    return synth::category_of(verb, cls, num_classes);
  };
  std::map<int, std::vector<GroundTruth>> gt_by_cat;
  for (const auto& g : gts) gt_by_cat[category(g.verb, g.object_class)].push_back(g);
  std::map<int, std::vector<HoiPrediction>> pred_by_cat;
  for (const auto& p : preds) pred_by_cat[category(p.verb, p.object_class)].push_back(p);

  std::vector<CategoryResult> results;
  for (auto& [cat, cat_gts] : gt_by_cat) {
    auto& cat_preds = pred_by_cat[cat];
    std::stable_sort(cat_preds.begin(), cat_preds.end(),
                     [](const HoiPrediction& a, const HoiPrediction& b) { return a.score > b.score; });
    const auto tp = match_predictions(cat_preds, cat_gts);
    CategoryResult r;
    r.category = cat;
    r.verb = cat / num_classes;
    r.object_class = cat % num_classes;
    r.n_gt = cat_gts.size();
    r.train_count = static_cast<std::size_t>(cat) < train_counts.size() ? train_counts[cat] : 0;
    r.rare = r.train_count < rare_threshold;
    r.ap = average_precision(tp, r.n_gt).value_or(0.0);
    results.push_back(r);
  }
  return mean_ap(std::move(results), rare_threshold);
}

nlohmann::json prediction_to_json(const HoiPrediction& p) {
  const auto box = [](const Box& b) { return nlohmann::json{b.x_min, b.y_min, b.x_max, b.y_max}; };
  return {{"scene_id", p.scene_id}, {"h_box", box(p.human_box)}, {"o_box", box(p.object_box)},
          {"o_class", p.object_class}, {"verb", p.verb}, {"score", p.score}};
}

HoiPrediction prediction_from_json(const nlohmann::json& j) {
  const auto box = [](const nlohmann::json& a) {
    if (!a.is_array() || a.size() != 4) throw std::invalid_argument("box must have 4 numbers");
    return Box{a[0].get<double>(), a[1].get<double>(), a[2].get<double>(), a[3].get<double>()};
  };
  HoiPrediction p;
  p.scene_id = j.at("scene_id").get<std::uint64_t>();
  p.human_box = box(j.at("h_box"));
  p.object_box = box(j.at("o_box"));
  p.object_class = j.at("o_class").get<int>();
  p.verb = j.at("verb").get<int>();
  p.score = j.at("score").get<double>();
  return p;
}

void save_predictions(std::span<const HoiPrediction> preds, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  for (const auto& p : preds) out << prediction_to_json(p).dump() << '\n';
}

std::vector<HoiPrediction> load_predictions(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open predictions " + path.string());
  std::vector<HoiPrediction> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(prediction_from_json(nlohmann::json::parse(line)));
    } catch (const std::exception& e) {
      throw std::runtime_error(path.string() + ": line " + std::to_string(n) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace incom::eval
