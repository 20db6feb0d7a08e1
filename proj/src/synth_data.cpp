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

#include "incom/synth_data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "incom/rng.hpp"

namespace incom::synth {

const char* verb_name(int verb) {
  switch (verb) {
    case kHold: return "hold";
    case kRide: return "ride";
    case kNextTo: return "next-to";
    case kLookAt: return "look-at";
    case kNoInteraction: return "no-interaction";
    default: return "verb";
  }
}

std::size_t SceneSample::human_count() const {
  return static_cast<std::size_t>(
      std::count_if(instances.begin(), instances.end(), [](const Instance& i) { return i.is_human; }));
}

void validate(const GenConfig& c) {
  const auto fail = [](const std::string& field, const std::string& why) {
    throw std::invalid_argument("gen." + field + ": " + why);
  };
  if (c.min_humans < 0 || c.max_humans < c.min_humans) fail("max_humans", "invalid human range");
  if (c.min_objects < 0 || c.max_objects < c.min_objects) fail("max_objects", "invalid object range");
  if (c.num_object_classes < 1) fail("num_object_classes", "must be >= 1");
  if (c.num_verbs < kRuleVerbCount) fail("num_verbs", "must cover the 5 rule verbs");
  const auto size_ok = [](double lo, double hi) { return lo > 0.0 && hi >= lo && hi < 1.0; };
  if (!size_ok(c.human_min_width, c.human_max_width)) fail("human_max_width", "invalid range");
  if (!size_ok(c.human_min_height, c.human_max_height)) fail("human_max_height", "invalid range");
  if (!size_ok(c.object_min_size, c.object_max_size)) fail("object_max_size", "invalid range");
  if (c.near_human_prob < 0.0 || c.near_human_prob > 1.0) fail("near_human_prob", "not a probability");
  if (c.rarity_skew < 0.0) fail("rarity_skew", "must be >= 0");
  if (!(c.min_score > 0.0 && c.max_score <= 1.0 && c.min_score <= c.max_score)) {
    fail("max_score", "scores must lie in (0, 1]");
  }
  if (!(c.max_instance_iou > 0.0 && c.max_instance_iou <= 1.0)) fail("max_instance_iou", "must lie in (0, 1]");
  if (c.max_retries < 1) fail("max_retries", "must be >= 1");
}

std::vector<int> rule_verbs(const Box& h, const Box& o) {
  std::vector<int> verbs;
  const bool center_inside = o.center_x() > h.x_min && o.center_x() < h.x_max &&
                             o.center_y() > h.y_min && o.center_y() < h.y_max;
  if (center_inside && o.area() < h.area()) verbs.push_back(kHold);
  if (h.center_y() < o.center_y() && geometry::iou(h, o) > 0.1) verbs.push_back(kRide);
  const double dx = h.center_x() - o.center_x();
  const double dy = h.center_y() - o.center_y();
  const bool disjoint = geometry::intersection_area(h, o) <= 0.0;
  if (disjoint && std::sqrt(dx * dx + dy * dy) < 0.2) verbs.push_back(kNextTo);
  if (verbs.empty()) {
    const double x_overlap = std::min(h.x_max, o.x_max) - std::max(h.x_min, o.x_min);
    const double gap = std::max({0.0, o.y_min - h.y_max, h.y_min - o.y_max});
    if (x_overlap > 0.0 && gap < 0.1) verbs.push_back(kLookAt);
  }
  if (verbs.empty()) verbs.push_back(kNoInteraction);
  return verbs;
}

std::vector<Triplet> label_interactions(std::span<const Instance> instances) {
  std::vector<Triplet> out;
  for (std::size_t h = 0; h < instances.size(); ++h) {
    if (!instances[h].is_human) continue;
    for (std::size_t o = 0; o < instances.size(); ++o) {
      if (o == h) continue;
      for (int v : rule_verbs(instances[h].box, instances[o].box)) {
        out.push_back({static_cast<int>(h), static_cast<int>(o), v});
      }
    }
  }
  return out;
}

namespace {

int sample_object_class(Rng& rng, const GenConfig& c) {
  std::vector<double> weights(c.num_object_classes);
  double total = 0.0;
  for (int k = 0; k < c.num_object_classes; ++k) {
    weights[k] = std::pow(static_cast<double>(k + 1), -c.rarity_skew);
    total += weights[k];
  }
  double u = rng.uniform01() * total;
  for (int k = 0; k < c.num_object_classes; ++k) {
    if (u < weights[k]) return k + 1;
    u -= weights[k];
  }
  return c.num_object_classes;
}

Box place_box(Rng& rng, double w, double h, const Box* anchor) {
  double cx = 0.0, cy = 0.0;
  if (anchor != nullptr) {
    cx = rng.uniform(anchor->x_min - 0.1, anchor->x_max + 0.1);
    cy = rng.uniform(anchor->y_min - 0.1, anchor->y_max + 0.1);
  } else {
    cx = rng.uniform(0.0, 1.0);
    cy = rng.uniform(0.0, 1.0);
  }
  cx = std::clamp(cx, 0.5 * w, 1.0 - 0.5 * w);
  cy = std::clamp(cy, 0.5 * h, 1.0 - 0.5 * h);
  return {cx - 0.5 * w, cy - 0.5 * h, cx + 0.5 * w, cy + 0.5 * h};
}

}  // namespace

SceneSample generate_scene(std::uint64_t seed, const GenConfig& config, std::uint64_t scene_id) {
  validate(config);
  Rng rng(seed);
  SceneSample scene;
  scene.scene_id = scene_id;
  scene.seed = seed;
  const int humans = rng.uniform_int(config.min_humans, config.max_humans);
  const int objects = rng.uniform_int(config.min_objects, config.max_objects);

  const auto accept = [&](const Box& b) {
    if (!geometry::is_valid(b)) return false;
    return std::none_of(scene.instances.begin(), scene.instances.end(), [&](const Instance& i) {
      return geometry::iou(i.box, b) > config.max_instance_iou;
    });
  };
  const auto add = [&](int class_id, bool human) {
    for (int attempt = 0; attempt < config.max_retries; ++attempt) {
      Box b;
      if (human) {
        const double w = rng.uniform(config.human_min_width, config.human_max_width);
        const double h = rng.uniform(config.human_min_height, config.human_max_height);
        b = place_box(rng, w, h, nullptr);
      } else {
        const double w = rng.uniform(config.object_min_size, config.object_max_size);
        const double h = rng.uniform(config.object_min_size, config.object_max_size);
        const bool near = humans > 0 && rng.uniform01() < config.near_human_prob;
        const Box* anchor = near ? &scene.instances[rng.uniform_int(0, humans - 1)].box : nullptr;
        b = place_box(rng, w, h, anchor);
      }
      if (accept(b)) {
        const double score = rng.uniform(config.min_score, config.max_score);
        scene.instances.push_back({b, class_id, human, score});
        return;
      }
    }
    throw GenerationError("scene " + std::to_string(scene_id) + ": no valid box after " +
                          std::to_string(config.max_retries) + " attempts");
  };

  for (int i = 0; i < humans; ++i) add(kPersonClass, true);
  for (int i = 0; i < objects; ++i) add(sample_object_class(rng, config), false);
  scene.gt_triplets = label_interactions(scene.instances);
  return scene;
}

std::vector<SceneSample> generate_dataset(std::uint64_t seed, std::size_t count,
                                          const GenConfig& config, std::uint64_t first_id) {
  std::vector<SceneSample> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    out.push_back(generate_scene(mix_seed(seed, i), config, first_id + i));
  }
  return out;
}

std::vector<int> category_counts(std::span<const SceneSample> scenes, const GenConfig& config) {
  std::vector<int> counts(config.num_categories(), 0);
  for (const auto& s : scenes) {
    for (const auto& t : s.gt_triplets) {
      ++counts.at(category_of(t.verb, s.instances.at(t.object).class_id, config.num_classes()));
    }
  }
  return counts;
}

nlohmann::json scene_to_json(const SceneSample& scene) {
  nlohmann::json instances = nlohmann::json::array();
  for (const auto& i : scene.instances) {
    instances.push_back({{"box", {i.box.x_min, i.box.y_min, i.box.x_max, i.box.y_max}},
                         {"class", i.class_id},
                         {"is_human", i.is_human},
                         {"score", i.score}});
  }
  nlohmann::json triplets = nlohmann::json::array();
  for (const auto& t : scene.gt_triplets) {
    triplets.push_back({{"h", t.human}, {"o", t.object}, {"verb", t.verb}});
  }
  return {{"schema_version", kSchemaVersion},
          {"scene_id", scene.scene_id},
          {"seed", scene.seed},
          {"instances", std::move(instances)},
          {"triplets", std::move(triplets)}};
}

namespace {

[[noreturn]] void field_error(std::size_t line, const std::string& field, const std::string& why) {
  std::ostringstream os;
  if (line > 0) os << "line " << line << ": ";
  os << "field '" << field << "' " << why;
  throw DataError(os.str());
}

const nlohmann::json& member(const nlohmann::json& j, const char* key, std::size_t line,
                             const std::string& path) {
  if (!j.is_object() || !j.contains(key)) field_error(line, path + key, "is missing");
  return j.at(key);
}

}  // namespace

SceneSample scene_from_json(const nlohmann::json& j, std::size_t line) {
  if (!j.is_object()) field_error(line, "<scene>", "is not a JSON object");
  const auto& version = member(j, "schema_version", line, "");
  if (!version.is_number_integer() || version.get<int>() != kSchemaVersion) {
    field_error(line, "schema_version", "must be " + std::to_string(kSchemaVersion));
  }
  SceneSample s;
  const auto& id = member(j, "scene_id", line, "");
  if (!id.is_number_unsigned()) field_error(line, "scene_id", "must be a non-negative integer");
  s.scene_id = id.get<std::uint64_t>();
  const auto& seed = member(j, "seed", line, "");
  if (!seed.is_number_unsigned()) field_error(line, "seed", "must be a non-negative integer");
  s.seed = seed.get<std::uint64_t>();

  const auto& instances = member(j, "instances", line, "");
  if (!instances.is_array()) field_error(line, "instances", "must be an array");
  for (std::size_t k = 0; k < instances.size(); ++k) {
    const std::string path = "instances[" + std::to_string(k) + "].";
    const auto& inst = instances[k];
    const auto& box = member(inst, "box", line, path);
    if (!box.is_array() || box.size() != 4 ||
        !std::all_of(box.begin(), box.end(), [](const auto& v) { return v.is_number(); })) {
      field_error(line, path + "box", "must be an array of 4 numbers");
    }
    Instance i;
    i.box = {box[0].get<double>(), box[1].get<double>(), box[2].get<double>(), box[3].get<double>()};
    if (!geometry::is_valid(i.box)) field_error(line, path + "box", "is not a valid box");
    const auto& cls = member(inst, "class", line, path);
    if (!cls.is_number_integer() || cls.get<int>() < 0) {
      field_error(line, path + "class", "must be a non-negative integer");
    }
    i.class_id = cls.get<int>();
    const auto& human = member(inst, "is_human", line, path);
    if (!human.is_boolean()) field_error(line, path + "is_human", "must be a boolean");
    i.is_human = human.get<bool>();
    const auto& score = member(inst, "score", line, path);
    if (!score.is_number()) field_error(line, path + "score", "must be a number");
    i.score = score.get<double>();
    s.instances.push_back(i);
  }

  const auto& triplets = member(j, "triplets", line, "");
  if (!triplets.is_array()) field_error(line, "triplets", "must be an array");
  const int k = static_cast<int>(s.instances.size());
  for (std::size_t t = 0; t < triplets.size(); ++t) {
    const std::string path = "triplets[" + std::to_string(t) + "].";
    Triplet tr;
    int* targets[] = {&tr.human, &tr.object, &tr.verb};
    const char* keys[] = {"h", "o", "verb"};
    for (int f = 0; f < 3; ++f) {
      const auto& v = member(triplets[t], keys[f], line, path);
      if (!v.is_number_integer()) field_error(line, path + keys[f], "must be an integer");
      *targets[f] = v.get<int>();
    }
    if (tr.human < 0 || tr.human >= k || !s.instances[tr.human].is_human) {
      field_error(line, path + "h", "does not index a human instance");
    }
    if (tr.object < 0 || tr.object >= k || tr.object == tr.human) {
      field_error(line, path + "o", "does not index another instance");
    }
    if (tr.verb < 0) field_error(line, path + "verb", "must be non-negative");
    s.gt_triplets.push_back(tr);
  }
  return s;
}

void save_dataset(std::span<const SceneSample> scenes, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open " + path.string() + " for writing");
  for (const auto& s : scenes) out << scene_to_json(s).dump() << '\n';
  if (!out) throw DataError("write failed for " + path.string());
}

std::vector<SceneSample> load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open dataset " + path.string());
  std::vector<SceneSample> scenes;
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
      throw DataError(path.string() + ": line " + std::to_string(line) + ": malformed JSON (" +
                      e.what() + ")");
    }
    try {
      scenes.push_back(scene_from_json(j, line));
    } catch (const DataError& e) {
      throw DataError(path.string() + ": " + e.what());
    }
  }
  return scenes;
}

}  // namespace incom::synth
