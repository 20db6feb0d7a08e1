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

#include "incom/config.hpp"

#include <cstdlib>
#include <fstream>

namespace incom {

void ExperimentConfig::apply_seed(std::uint64_t value) {
  seed = value;
  backbone.seed = value;
  model.seed = value;
  train.seed = value;
}

nlohmann::json to_json(const synth::GenConfig& c) {
  return {{"min_humans", c.min_humans},
          {"max_humans", c.max_humans},
          {"min_objects", c.min_objects},
          {"max_objects", c.max_objects},
          {"num_object_classes", c.num_object_classes},
          {"num_verbs", c.num_verbs},
          {"human_min_width", c.human_min_width},
          {"human_max_width", c.human_max_width},
          {"human_min_height", c.human_min_height},
          {"human_max_height", c.human_max_height},
          {"object_min_size", c.object_min_size},
          {"object_max_size", c.object_max_size},
          {"near_human_prob", c.near_human_prob},
          {"rarity_skew", c.rarity_skew},
          {"min_score", c.min_score},
          {"max_score", c.max_score},
          {"max_instance_iou", c.max_instance_iou},
          {"max_retries", c.max_retries}};
}

synth::GenConfig gen_config_from_json(const nlohmann::json& j) {
  synth::GenConfig c;
  c.min_humans = j.at("min_humans").get<int>();
  c.max_humans = j.at("max_humans").get<int>();
  c.min_objects = j.at("min_objects").get<int>();
  c.max_objects = j.at("max_objects").get<int>();
  c.num_object_classes = j.at("num_object_classes").get<int>();
  c.num_verbs = j.at("num_verbs").get<int>();
  c.human_min_width = j.at("human_min_width").get<double>();
  c.human_max_width = j.at("human_max_width").get<double>();
  c.human_min_height = j.at("human_min_height").get<double>();
  c.human_max_height = j.at("human_max_height").get<double>();
  c.object_min_size = j.at("object_min_size").get<double>();
  c.object_max_size = j.at("object_max_size").get<double>();
  c.near_human_prob = j.at("near_human_prob").get<double>();
  c.rarity_skew = j.at("rarity_skew").get<double>();
  c.min_score = j.at("min_score").get<double>();
  c.max_score = j.at("max_score").get<double>();
  c.max_instance_iou = j.at("max_instance_iou").get<double>();
  c.max_retries = j.at("max_retries").get<int>();
  return c;
}

namespace {

nlohmann::json without_seed(nlohmann::json j) {
  j.erase("seed");
  return j;
}

bool same_kind(const nlohmann::json& def, const nlohmann::json& v) {
  if (def.is_boolean()) return v.is_boolean();
  if (def.is_number_unsigned()) return v.is_number_unsigned() || (v.is_number_integer() && v.get<std::int64_t>() >= 0);
  if (def.is_number_integer()) return v.is_number_integer();
  if (def.is_number()) return v.is_number();
  return def.type() == v.type();
}

}  // namespace

nlohmann::json to_json(const ExperimentConfig& c) {
  return {{"seed", c.seed},
          {"gen", to_json(c.gen)},
          {"backbone", without_seed(to_json(c.backbone))},
          {"model", without_seed(to_json(c.model))},
          {"train", without_seed(train::to_json(c.train))}};
}

ExperimentConfig merge_config(const ExperimentConfig& base, const nlohmann::json& overrides) {
  if (!overrides.is_object()) throw ConfigError("config must be a JSON object");
  nlohmann::json merged = to_json(base);
  for (const auto& [section, body] : overrides.items()) {
    if (!merged.contains(section)) throw ConfigError("unknown config key '" + section + "'");
    if (section == "seed") {
      if (!same_kind(merged["seed"], body)) throw ConfigError("config key 'seed' must be a non-negative integer");
      merged["seed"] = body;
      continue;
    }
    if (!body.is_object()) throw ConfigError("config section '" + section + "' must be an object");
    for (const auto& [key, value] : body.items()) {
      const std::string name = section + "." + key;
      if (!merged[section].contains(key)) throw ConfigError("unknown config key '" + name + "'");
      if (!same_kind(merged[section][key], value)) {
        throw ConfigError("config key '" + name + "' has the wrong type (expected " +
                          std::string(merged[section][key].type_name()) + ")");
      }
      merged[section][key] = value;
    }
  }
  ExperimentConfig out;
  const auto seed = merged["seed"].get<std::uint64_t>();
  merged["backbone"]["seed"] = seed;
  merged["model"]["seed"] = seed;
  merged["train"]["seed"] = seed;
  out.gen = gen_config_from_json(merged["gen"]);
  out.backbone = backbone_config_from_json(merged["backbone"]);
  out.model = model_config_from_json(merged["model"]);
  out.train = train::train_config_from_json(merged["train"]);
  out.apply_seed(seed);
  return out;
}

void validate(const ExperimentConfig& c) {
  try {
    synth::validate(c.gen);
    backbones::validate(c.backbone);
    validate(c.model, c.backbone);
    train::validate(c.train);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (c.backbone.num_classes != c.gen.num_classes()) {
    throw ConfigError("backbone.num_classes must equal gen.num_object_classes + 1");
  }
  if (static_cast<int>(c.model.verbs) != c.gen.num_verbs) {
    throw ConfigError("model.verbs must equal gen.num_verbs");
  }
}

std::optional<std::uint64_t> seed_from_environment() {
  const char* raw = std::getenv("INCOM_SEED");
  if (raw == nullptr || *raw == '\0') return std::nullopt;
  const std::string text(raw);
  std::size_t used = 0;
  unsigned long long value = 0;
  try {
    value = std::stoull(text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != text.size() || text.front() == '-') throw ConfigError("INCOM_SEED is not a non-negative integer: " + text);
  return static_cast<std::uint64_t>(value);
}

ExperimentConfig load_experiment_config(const std::optional<std::filesystem::path>& path) {
  ExperimentConfig config;
  if (path) {
    std::ifstream in(*path);
    if (!in) throw ConfigError("cannot read config " + path->string());
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(path->string() + ": " + e.what());
    }
    config = merge_config(config, j);
  }
  if (const auto env = seed_from_environment()) config.apply_seed(*env);
  return config;
}

}  // namespace incom
