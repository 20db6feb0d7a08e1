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
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "incom/model.hpp"
#include "incom/training.hpp"

namespace incom {

inline constexpr int kCheckpointFormatVersion = 1;

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct CheckpointMeta {
  /// Number of completed epochs.
  int epoch = 0;
  train::TrainConfig train;
  /// Per-HOI-category training instance counts, used for the rare split.
  std::vector<int> category_counts;
};

struct Checkpoint {
  Model model;
  train::AdamW optimizer;
  CheckpointMeta meta;
};

/// Writes `dir/manifest.json` and `dir/tensors.bin`. Each file is written to a
/// temporary name first and renamed, so an interrupted save leaves the previous
/// checkpoint readable.
void save_checkpoint(const std::filesystem::path& dir, const Model& model, const train::AdamW& optimizer,
                     const CheckpointMeta& meta);

Checkpoint load_checkpoint(const std::filesystem::path& dir);

/// Reads only the manifest.
nlohmann::json read_manifest(const std::filesystem::path& dir);

}  // namespace incom
