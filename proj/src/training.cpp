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

#include "incom/training.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <stdexcept>
#include <string>
#include <thread>

#include "incom/rng.hpp"

namespace incom::train {

void validate(const TrainConfig& c) {
  const auto fail = [](const std::string& field, const std::string& why) {
    throw std::invalid_argument("train." + field + ": " + why);
  };
  if (c.epochs < 0) fail("epochs", "must be >= 0");
  if (!(c.learning_rate > 0.0)) fail("learning_rate", "must be positive");
  if (c.weight_decay < 0.0) fail("weight_decay", "must be >= 0");
  if (!(c.lr_decay_factor > 0.0 && c.lr_decay_factor <= 1.0)) fail("lr_decay_factor", "must lie in (0, 1]");
  if (c.lr_decay_every < 1) fail("lr_decay_every", "must be >= 1");
  if (c.batch_size < 1) fail("batch_size", "must be >= 1");
  if (c.focal_gamma < 0.0) fail("focal_gamma", "must be >= 0");
  if (!(c.focal_alpha >= 0.0 && c.focal_alpha <= 1.0)) fail("focal_alpha", "must lie in [0, 1]");
  if (!(c.beta1 >= 0.0 && c.beta1 < 1.0)) fail("beta1", "must lie in [0, 1)");
  if (!(c.beta2 >= 0.0 && c.beta2 < 1.0)) fail("beta2", "must lie in [0, 1)");
  if (!(c.adam_eps > 0.0)) fail("adam_eps", "must be positive");
  if (c.threads < 1) fail("threads", "must be >= 1");
}

nlohmann::json to_json(const TrainConfig& c) {
  return {{"epochs", c.epochs},
          {"learning_rate", c.learning_rate},
          {"weight_decay", c.weight_decay},
          {"lr_decay_factor", c.lr_decay_factor},
          {"lr_decay_every", c.lr_decay_every},
          {"batch_size", c.batch_size},
          {"seed", c.seed},
          {"focal_gamma", c.focal_gamma},
          {"focal_alpha", c.focal_alpha},
          {"mft", c.mft},
          {"beta1", c.beta1},
          {"beta2", c.beta2},
          {"adam_eps", c.adam_eps},
          {"threads", c.threads}};
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
  TrainConfig c;
  c.epochs = j.at("epochs").get<int>();
  c.learning_rate = j.at("learning_rate").get<double>();
  c.weight_decay = j.at("weight_decay").get<double>();
  c.lr_decay_factor = j.at("lr_decay_factor").get<double>();
  c.lr_decay_every = j.at("lr_decay_every").get<int>();
  c.batch_size = j.at("batch_size").get<std::size_t>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.focal_gamma = j.at("focal_gamma").get<double>();
  c.focal_alpha = j.at("focal_alpha").get<double>();
  c.mft = j.at("mft").get<bool>();
  c.beta1 = j.at("beta1").get<double>();
  c.beta2 = j.at("beta2").get<double>();
  c.adam_eps = j.at("adam_eps").get<double>();
  c.threads = j.at("threads").get<std::size_t>();
  return c;
}

double learning_rate_at(const TrainConfig& config, int epoch) {
  return config.learning_rate * std::pow(config.lr_decay_factor, epoch / config.lr_decay_every);
}

double focal_loss(const Tensor& logits, const Tensor& targets, double gamma, double alpha) {
  ad::Tape tape(false);
  return ad::focal_loss(tape.constant(logits), targets, gamma, alpha).value()(0, 0);
}

std::vector<pair::MftConfig> objective_configs(bool mft) {
  if (!mft) return {pair::MftConfig::kFull};
  return {pair::MftConfig::kFull, pair::MftConfig::kDetectorOnly, pair::MftConfig::kVlmOnly};
}

ad::Var scene_loss(ad::Tape& tape, const Model& model, const SceneFeatures& features,
                   const TrainConfig& config) {
  if (features.pairs.empty()) return tape.constant(Tensor(1, 1));
  const ad::Var aggregated = model.mine(tape, features);
  ad::Var total;
  for (const auto mode : objective_configs(config.mft)) {
    const ad::Var logits = model.interact(tape, features, aggregated, mode);
    const ad::Var loss = ad::focal_loss(logits, features.targets, config.focal_gamma, config.focal_alpha);
    total = total.valid() ? ad::add(total, loss) : loss;
  }
  return total;
}

void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& fn) {
  threads = std::min(threads, n);
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> workers;
  for (std::size_t t = 0; t < threads; ++t) {
    workers.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (auto& w : workers) w.join();
  if (error) std::rethrow_exception(error);
}

StepResult mft_step(const Model& model, std::span<const SceneFeatures* const> batch,
                    const TrainConfig& config) {
  if (batch.empty()) throw std::invalid_argument("mft_step on an empty batch");
  struct SceneResult {
    double loss = 0.0;
    std::vector<Tensor> grads;
  };
  std::vector<SceneResult> results(batch.size());
  parallel_for(batch.size(), config.threads, [&](std::size_t i) {
    ad::Tape tape;
    const ad::Var loss = scene_loss(tape, model, *batch[i], config);
    tape.backward(loss);
    results[i].loss = loss.value()(0, 0);
    results[i].grads = model.params().zeros_like();
    tape.accumulate_param_grads(results[i].grads);
  });
  // Fixed reduction order keeps the step independent of thread scheduling.
  StepResult out;
  out.grads = model.params().zeros_like();
  const double inv = 1.0 / static_cast<double>(batch.size());
  for (auto& r : results) {
    out.loss += r.loss;
    for (std::size_t p = 0; p < out.grads.size(); ++p) out.grads[p] += r.grads[p];
  }
  out.loss *= inv;
  for (auto& g : out.grads) g *= inv;
  return out;
}

AdamW::AdamW(const ParameterSet& params) : m_(params.zeros_like()), v_(params.zeros_like()) {}

void AdamW::step(ParameterSet& params, const std::vector<Tensor>& grads, double lr,
                 const TrainConfig& config) {
  if (grads.size() != params.size() || m_.size() != params.size()) {
    throw std::invalid_argument("AdamW: gradient/state count does not match the parameters");
  }
  ++steps_;
  const double bc1 = 1.0 - std::pow(config.beta1, static_cast<double>(steps_));
  const double bc2 = 1.0 - std::pow(config.beta2, static_cast<double>(steps_));
  for (std::size_t p = 0; p < params.size(); ++p) {
    auto w = params.all()[p].value.flat();
    const auto g = grads[p].flat();
    auto m = m_[p].flat();
    auto v = v_[p].flat();
    for (std::size_t i = 0; i < w.size(); ++i) {
      w[i] -= lr * config.weight_decay * w[i];
      m[i] = config.beta1 * m[i] + (1.0 - config.beta1) * g[i];
      v[i] = config.beta2 * v[i] + (1.0 - config.beta2) * g[i] * g[i];
      const double m_hat = m[i] / bc1;
      const double v_hat = v[i] / bc2;
      w[i] -= lr * m_hat / (std::sqrt(v_hat) + config.adam_eps);
    }
  }
}

std::vector<EpochMetrics> train(Model& model, AdamW& optimizer, std::span<const SceneFeatures> data,
                                const TrainConfig& config, int start_epoch, const TrainHooks& hooks) {
  validate(config);
  if (data.empty()) throw std::invalid_argument("training set is empty");
  std::vector<EpochMetrics> history;
  std::vector<std::size_t> order(data.size());
  for (int epoch = start_epoch; epoch < config.epochs; ++epoch) {
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng rng(mix_seed(config.seed, static_cast<std::uint64_t>(epoch)));
    for (std::size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[rng.next_u64() % i]);
    }
    const double lr = learning_rate_at(config, epoch);
    double loss_sum = 0.0;
    std::size_t batches = 0;
    std::vector<const SceneFeatures*> batch;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      batch.clear();
      for (std::size_t i = start; i < std::min(order.size(), start + config.batch_size); ++i) {
        batch.push_back(&data[order[i]]);
      }
      const StepResult step = mft_step(model, batch, config);
      optimizer.step(model.params(), step.grads, lr, config);
      loss_sum += step.loss;
      ++batches;
    }
    EpochMetrics m{epoch, lr, loss_sum / static_cast<double>(batches), config.mft};
    history.push_back(m);
    if (hooks.on_epoch_end) hooks.on_epoch_end(m, model, optimizer);
  }
  return history;
}

}  // namespace incom::train
