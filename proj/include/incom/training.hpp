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
#include <functional>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "incom/autodiff.hpp"
#include "incom/model.hpp"
#include "incom/pair_decoder.hpp"

namespace incom::train {

struct TrainConfig {
  int epochs = 30;
  double learning_rate = 1e-4;
  double weight_decay = 1e-4;
  /// The learning rate is multiplied by this factor every `lr_decay_every` epochs.
  double lr_decay_factor = 0.2;
  int lr_decay_every = 10;
  std::size_t batch_size = 16;
  std::uint64_t seed = 0;
  double focal_gamma = 2.0;
  double focal_alpha = 0.25;
  bool mft = true;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  /// Worker threads for per-scene gradients; results do not depend on it.
  std::size_t threads = 1;

  bool operator==(const TrainConfig&) const = default;
};

void validate(const TrainConfig& config);
nlohmann::json to_json(const TrainConfig& c);
TrainConfig train_config_from_json(const nlohmann::json& j);

double learning_rate_at(const TrainConfig& config, int epoch);

/// Mean sigmoid focal loss over all cells (value only).
double focal_loss(const Tensor& logits, const Tensor& targets, double gamma, double alpha);

/// Configurations summed by the objective: all three with MFT, full only without.
std::vector<pair::MftConfig> objective_configs(bool mft);

/// Sum over the objective's configurations of the focal loss of one scene.
/// Context mining runs once and is shared by the configurations.
ad::Var scene_loss(ad::Tape& tape, const Model& model, const SceneFeatures& features,
                   const TrainConfig& config);

struct StepResult {
  /// Mean of the per-scene losses.
  double loss = 0.0;
  /// Gradients of that mean, shaped like the model's parameters.
  std::vector<Tensor> grads;
};

StepResult mft_step(const Model& model, std::span<const SceneFeatures* const> batch,
                    const TrainConfig& config);

/// Adam with decoupled weight decay.
class AdamW {
 public:
  AdamW() = default;
  explicit AdamW(const ParameterSet& params);

  void step(ParameterSet& params, const std::vector<Tensor>& grads, double lr,
            const TrainConfig& config);

  std::int64_t steps() const { return steps_; }
  std::vector<Tensor>& first_moment() { return m_; }
  std::vector<Tensor>& second_moment() { return v_; }
  const std::vector<Tensor>& first_moment() const { return m_; }
  const std::vector<Tensor>& second_moment() const { return v_; }
  void set_steps(std::int64_t steps) { steps_ = steps; }

 private:
  std::vector<Tensor> m_;
  std::vector<Tensor> v_;
  std::int64_t steps_ = 0;
};

struct EpochMetrics {
  int epoch = 0;
  double lr = 0.0;
  double loss = 0.0;
  bool mft = true;
};

struct TrainHooks {
  /// Called after each epoch with the updated model and optimizer.
  std::function<void(const EpochMetrics&, const Model&, const AdamW&)> on_epoch_end;
};

/// Runs epochs [start_epoch, config.epochs). Scene order is reshuffled each
/// epoch from (seed, epoch), so a resumed run replays the same sequence.
std::vector<EpochMetrics> train(Model& model, AdamW& optimizer, std::span<const SceneFeatures> data,
                                const TrainConfig& config, int start_epoch = 0,
                                const TrainHooks& hooks = {});

/// Runs fn(i) for i in [0, n) on up to `threads` workers.
void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& fn);

}  // namespace incom::train
