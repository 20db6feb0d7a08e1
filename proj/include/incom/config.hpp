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

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>

#include <nlohmann/json.hpp>

#include "incom/backbones.hpp"
#include "incom/model.hpp"
#include "incom/synth_data.hpp"
#include "incom/training.hpp"

namespace incom {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Everything a run needs. The file form is a JSON object with an optional
/// top-level "seed" and the sections "gen", "backbone", "model" and "train";
/// the seed is copied into every section.
struct ExperimentConfig {
  std::uint64_t seed = 0;
  synth::GenConfig gen;
  backbones::BackboneConfig backbone;
  ModelConfig model;
  train::TrainConfig train;

  /// Copies `seed` into the per-section seeds.
  void apply_seed(std::uint64_t value);
};

nlohmann::json to_json(const synth::GenConfig& c);
synth::GenConfig gen_config_from_json(const nlohmann::json& j);

nlohmann::json to_json(const ExperimentConfig& c);

/// Overlays `overrides` on `base`. Unknown sections or keys, and values whose
/// JSON type differs from the default's, are rejected naming "section.key".
ExperimentConfig merge_config(const ExperimentConfig& base, const nlohmann::json& overrides);

/// Cross-checks the sections and each section's own constraints.
void validate(const ExperimentConfig& c);

/// Defaults, then the file (if any), then INCOM_SEED. Flags are applied by the caller.
ExperimentConfig load_experiment_config(const std::optional<std::filesystem::path>& path);

/// Parses INCOM_SEED; nullopt when unset. Throws ConfigError when malformed.
std::optional<std::uint64_t> seed_from_environment();

}  // namespace incom
