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

// Command-line front end: gen, train, eval, infer and inspect.

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "incom/checkpoint.hpp"
#include "incom/config.hpp"
#include "incom/evaluation.hpp"
#include "incom/model.hpp"
#include "incom/synth_data.hpp"
#include "incom/training.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace incom::cli {
namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitRuntime = 2;

const std::vector<std::string> kModes = {"full", "d-only", "v-only"};

std::size_t default_threads() {
  const unsigned n = std::thread::hardware_concurrency();
  return n == 0 ? 1 : n;
}

void write_json(const fs::path& path, const json& j) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << j.dump(2) << "\n";
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

std::vector<SceneFeatures> encode_all(std::span<const synth::SceneSample> scenes,
                                      const backbones::BackboneParams& backbone, const ModelConfig& model,
                                      std::size_t threads) {
  std::vector<SceneFeatures> out(scenes.size());
  train::parallel_for(scenes.size(), threads,
                      [&](std::size_t i) { out[i] = encode_scene(scenes[i], backbone, model); });
  return out;
}

std::vector<eval::HoiPrediction> predict_all(const Model& model, std::span<const SceneFeatures> features,
                                             pair::MftConfig mode, std::size_t threads) {
  std::vector<std::vector<eval::HoiPrediction>> per_scene(features.size());
  train::parallel_for(features.size(), threads,
                      [&](std::size_t i) { per_scene[i] = model.predict(features[i], mode); });
  std::vector<eval::HoiPrediction> out;
  for (auto& p : per_scene) out.insert(out.end(), p.begin(), p.end());
  return out;
}

std::vector<synth::SceneSample> load_scenes(const fs::path& path, int num_classes) {
  auto scenes = synth::load_dataset(path);
  for (const auto& s : scenes) {
    for (const auto& inst : s.instances) {
      if (inst.class_id >= num_classes) {
        throw synth::DataError(path.string() + ": scene " + std::to_string(s.scene_id) + " has class " +
                               std::to_string(inst.class_id) + " but the model knows " +
                               std::to_string(num_classes) + " classes");
      }
    }
  }
  return scenes;
}

/// Names the first field where the config disagrees with the checkpoint.
void check_matches_checkpoint(const ExperimentConfig& config, const Model& model) {
  const auto compare = [](const std::string& section, json expected, json actual) {
    expected.erase("seed");
    actual.erase("seed");
    for (const auto& [key, value] : expected.items()) {
      if (!actual.contains(key) || actual[key] != value) {
        throw ConfigError("config field '" + section + "." + key + "' is " + value.dump() +
                          " but the checkpoint has " + (actual.contains(key) ? actual[key].dump() : "nothing"));
      }
    }
  };
  compare("model", to_json(config.model), to_json(model.config()));
  compare("backbone", to_json(config.backbone), to_json(model.backbone_config()));
  if (config.backbone.seed != model.backbone_config().seed) {
    throw ConfigError("config field 'seed' (" + std::to_string(config.backbone.seed) +
                      ") does not match the checkpoint's backbone seed (" +
                      std::to_string(model.backbone_config().seed) + ")");
  }
}

std::string timestamp_now() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

/// Keeps only metric lines for epochs before `epoch`, so a resumed run
/// produces the same log as an uninterrupted one.
void truncate_metrics(const fs::path& path, int epoch) {
  std::ifstream in(path);
  if (!in) return;
  std::vector<std::string> kept;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const json j = json::parse(line, nullptr, false);
    if (!j.is_discarded() && j.contains("epoch") && j["epoch"].get<int>() < epoch) kept.push_back(line);
  }
  in.close();
  std::ofstream out(path, std::ios::trunc);
  for (const auto& l : kept) out << l << "\n";
}

// ---------------------------------------------------------------------------

struct CommonOptions {
  std::optional<std::string> config_path;
  std::optional<std::uint64_t> seed;
  std::size_t threads = default_threads();
};

ExperimentConfig resolve_config(const CommonOptions& o) {
  ExperimentConfig config =
      load_experiment_config(o.config_path ? std::optional<fs::path>(*o.config_path) : std::nullopt);
  if (o.seed) config.apply_seed(*o.seed);
  config.train.threads = o.threads;
  validate(config);
  return config;
}

struct GenOptions {
  CommonOptions common;
  std::string out;
  std::size_t num_scenes = 2000;
  std::uint64_t first_id = 0;
};

int run_gen(const GenOptions& o) {
  const ExperimentConfig config = resolve_config(o.common);
  const auto scenes = synth::generate_dataset(config.seed, o.num_scenes, config.gen, o.first_id);
  synth::save_dataset(scenes, o.out);
  const auto counts = synth::category_counts(scenes, config.gen);
  std::size_t rare = 0, present = 0;
  std::cout << "wrote " << scenes.size() << " scenes to " << o.out << "\n";
  std::cout << "category  verb           class  count  split\n";
  for (int v = 0; v < config.gen.num_verbs; ++v) {
    for (int c = 0; c < config.gen.num_classes(); ++c) {
      const int count = counts[static_cast<std::size_t>(synth::category_of(v, c, config.gen.num_classes()))];
      if (count == 0) continue;
      ++present;
      const bool is_rare = count < eval::kRareThreshold;
      rare += is_rare ? 1 : 0;
      char line[96];
      std::snprintf(line, sizeof line, "%8d  %-13s  %5d  %5d  %s\n", synth::category_of(v, c, config.gen.num_classes()),
                    synth::verb_name(v), c, count, is_rare ? "rare" : "non-rare");
      std::cout << line;
    }
  }
  std::cout << present << " categories present, " << rare << " rare (< " << eval::kRareThreshold
            << " instances)\n";
  return kExitOk;
}

struct TrainOptions {
  CommonOptions common;
  std::string data;
  std::string out_ckpt;
  std::optional<std::string> eval_data;
  std::optional<std::string> metrics;
  std::optional<int> epochs;
  bool no_mft = false;
  bool resume = false;
};

int run_train(const TrainOptions& o) {
  ExperimentConfig config = resolve_config(o.common);
  if (o.no_mft) config.train.mft = false;
  if (o.epochs) config.train.epochs = *o.epochs;

  const fs::path ckpt_dir = o.out_ckpt;
  const fs::path metrics_path = o.metrics ? fs::path(*o.metrics) : ckpt_dir / "metrics.jsonl";

  std::optional<Checkpoint> resumed;
  if (o.resume && fs::exists(ckpt_dir / "manifest.json")) {
    resumed = load_checkpoint(ckpt_dir);
    // The interrupted run's settings win; only the epoch budget and thread count may change.
    const int epochs = config.train.epochs;
    config.model = resumed->model.config();
    config.backbone = resumed->model.backbone_config();
    config.train = resumed->meta.train;
    config.train.threads = o.common.threads;
    if (o.epochs) config.train.epochs = epochs;
    validate(config.model, config.backbone);
  }

  const auto scenes = load_scenes(o.data, config.backbone.num_classes);
  if (scenes.empty()) throw synth::DataError(o.data + ": dataset is empty");
  const auto backbone = backbones::BackboneParams::create(config.backbone);
  const auto features = encode_all(scenes, backbone, config.model, config.train.threads);
  const auto counts = synth::category_counts(scenes, config.gen);

  std::vector<synth::SceneSample> eval_scenes;
  std::vector<SceneFeatures> eval_features;
  std::vector<eval::GroundTruth> eval_gts;
  if (o.eval_data) {
    eval_scenes = load_scenes(*o.eval_data, config.backbone.num_classes);
    eval_features = encode_all(eval_scenes, backbone, config.model, config.train.threads);
    eval_gts = eval::ground_truths(eval_scenes);
  }

  Model model = resumed ? resumed->model : Model::create(config.model, config.backbone);
  train::AdamW optimizer = resumed ? resumed->optimizer : train::AdamW(model.params());
  const int start_epoch = resumed ? resumed->meta.epoch : 0;

  fs::create_directories(ckpt_dir);
  if (metrics_path.has_parent_path()) fs::create_directories(metrics_path.parent_path());
  if (resumed) {
    truncate_metrics(metrics_path, start_epoch);
  } else {
    std::ofstream(metrics_path, std::ios::trunc);
  }

  CheckpointMeta meta{start_epoch, config.train, counts};
  if (!resumed) save_checkpoint(ckpt_dir, model, optimizer, meta);

  train::TrainHooks hooks;
  hooks.on_epoch_end = [&](const train::EpochMetrics& m, const Model& current, const train::AdamW& opt) {
    json line = {{"epoch", m.epoch}, {"lr", m.lr}, {"loss", m.loss}, {"mft", m.mft}};
    if (o.eval_data) {
      const auto preds = predict_all(current, eval_features, pair::MftConfig::kFull, config.train.threads);
      const auto report = eval::evaluate(preds, eval_gts, counts, config.gen.num_classes());
      const json r = report.to_json();
      line["map_full"] = r["map_full"];
      line["map_rare"] = r["map_rare"];
      line["map_non_rare"] = r["map_non_rare"];
    }
    line["timestamp"] = timestamp_now();
    {
      std::ofstream out(metrics_path, std::ios::app);
      if (!out) throw std::runtime_error("cannot append to " + metrics_path.string());
      out << line.dump() << "\n";
    }
    meta.epoch = m.epoch + 1;
    save_checkpoint(ckpt_dir, current, opt, meta);
    std::cout << "epoch " << m.epoch << " lr " << m.lr << " loss " << m.loss << "\n";
  };
  const auto history = train::train(model, optimizer, features, config.train, start_epoch, hooks);
  if (history.empty()) save_checkpoint(ckpt_dir, model, optimizer, meta);
  std::cout << "checkpoint: " << ckpt_dir.string() << " (epoch " << meta.epoch << ")\n";
  return kExitOk;
}

struct EvalOptions {
  CommonOptions common;
  std::string ckpt;
  std::string data;
  std::string mode = "full";
  std::string report;
};

int run_eval(const EvalOptions& o) {
  const Checkpoint ckpt = load_checkpoint(o.ckpt);
  if (o.common.config_path) check_matches_checkpoint(resolve_config(o.common), ckpt.model);
  const auto& model = ckpt.model;
  const auto scenes = load_scenes(o.data, model.backbone_config().num_classes);
  const auto backbone = backbones::BackboneParams::create(model.backbone_config());
  const auto features = encode_all(scenes, backbone, model.config(), o.common.threads);
  const auto mode = pair::mft_config_from_string(o.mode);
  const auto preds = predict_all(model, features, mode, o.common.threads);
  auto report = eval::evaluate(preds, eval::ground_truths(scenes), ckpt.meta.category_counts,
                               model.backbone_config().num_classes);
  report.mode = o.mode;
  write_json(o.report, report.to_json());
  std::printf("mode %s: mAP full %.4f rare %.4f non-rare %.4f\n", o.mode.c_str(), report.map_full,
              report.map_rare, report.map_non_rare);
  return kExitOk;
}

struct InferOptions {
  CommonOptions common;
  std::string ckpt;
  std::string data;
  std::string mode = "full";
  std::string out;
};

int run_infer(const InferOptions& o) {
  const Checkpoint ckpt = load_checkpoint(o.ckpt);
  if (o.common.config_path) check_matches_checkpoint(resolve_config(o.common), ckpt.model);
  const auto& model = ckpt.model;
  const auto scenes = load_scenes(o.data, model.backbone_config().num_classes);
  const auto backbone = backbones::BackboneParams::create(model.backbone_config());
  const auto features = encode_all(scenes, backbone, model.config(), o.common.threads);
  const auto preds = predict_all(model, features, pair::mft_config_from_string(o.mode), o.common.threads);
  eval::save_predictions(preds, o.out);
  std::cout << "wrote " << preds.size() << " predictions to " << o.out << "\n";
  return kExitOk;
}

struct InspectOptions {
  CommonOptions common;
  std::string ckpt;
  std::string data;
  std::uint64_t scene_id = 0;
  std::string out_dir;
  std::string mode = "full";
};

json tensor_json(const Tensor& t) {
  json rows = json::array();
  for (std::size_t r = 0; r < t.rows(); ++r) {
    const auto row = t.row(r);
    rows.push_back(std::vector<double>(row.begin(), row.end()));
  }
  return rows;
}

json weights_json(const nn::AttentionWeights& heads) {
  json out = json::array();
  for (const auto& h : heads) out.push_back(tensor_json(h));
  return out;
}

int run_inspect(const InspectOptions& o) {
  const Checkpoint ckpt = load_checkpoint(o.ckpt);
  const auto& model = ckpt.model;
  const auto scenes = load_scenes(o.data, model.backbone_config().num_classes);
  const synth::SceneSample* scene = nullptr;
  for (const auto& s : scenes) {
    if (s.scene_id == o.scene_id) scene = &s;
  }
  if (scene == nullptr) {
    throw synth::DataError(o.data + ": no scene with id " + std::to_string(o.scene_id));
  }
  const auto backbone = backbones::BackboneParams::create(model.backbone_config());
  const SceneFeatures features = encode_scene(*scene, backbone, model.config());
  const auto mode = pair::mft_config_from_string(o.mode);

  ad::Tape tape(false);
  proca::MiningTrace mining;
  const ad::Var aggregated = model.mine(tape, features, &mining);
  pair::DecoderTrace trace;
  const ad::Var logits = model.interact(tape, features, aggregated, mode, &trace);

  const fs::path dir = o.out_dir;
  fs::create_directories(dir);
  write_json(dir / "masks.json", geometry::mask_set_to_json(features.masks));

  json contexts = json::array();
  for (std::size_t i = 0; i < features.masks.instance_masks.size(); ++i) {
    contexts.push_back({{"instance", i},
                        {"class_id", features.queries.detections[i].class_id},
                        {"intra_tokens", features.masks.instance_masks[i].indices()},
                        {"inter_tokens", features.masks.surrounding_masks[i].indices()}});
  }
  write_json(dir / "contexts.json",
             {{"scene_id", features.scene_id}, {"token_count", features.masks.grid.size()}, {"instances", contexts}});

  json pairs = json::array();
  for (const auto& p : features.pairs) pairs.push_back({{"human", p.human}, {"object", p.object}});
  json layers = json::array();
  for (std::size_t l = 0; l < trace.spatial_weights.size(); ++l) {
    layers.push_back({{"layer", l},
                      {"spatial", weights_json(trace.spatial_weights[l])},
                      {"vlm", weights_json(trace.vlm_weights[l])}});
  }
  write_json(dir / "attention.json", {{"scene_id", features.scene_id},
                                      {"mode", o.mode},
                                      {"pairs", pairs},
                                      {"spatial_grid", {{"rows", model.backbone_config().cnn_grid.rows},
                                                        {"cols", model.backbone_config().cnn_grid.cols}}},
                                      {"vlm_grid", {{"rows", model.backbone_config().vlm_grid.rows},
                                                    {"cols", model.backbone_config().vlm_grid.cols}}},
                                      {"decoder_layers", layers},
                                      {"logits", tensor_json(logits.value())}});
  std::cout << "wrote masks.json, contexts.json and attention.json to " << dir.string() << "\n";
  return kExitOk;
}

void add_common(CLI::App* cmd, CommonOptions& o, bool with_seed) {
  cmd->add_option("--config", o.config_path, "JSON experiment config (sections gen/backbone/model/train)");
  if (with_seed) cmd->add_option("--seed", o.seed, "Seed; overrides INCOM_SEED and the config file");
  cmd->add_option("--threads", o.threads, "Worker threads (results do not depend on this)")
      ->check(CLI::PositiveNumber);
}

}  // namespace

int run(int argc, char** argv) {
  CLI::App app{
      "incom: instance-centric context mining for human-object interaction detection on a synthetic world.\n"
      "Settings resolve as: command-line flag > INCOM_SEED (seed only) > --config file > built-in default."};
  app.require_subcommand(1);

  GenOptions gen;
  auto* gen_cmd = app.add_subcommand("gen", "Generate a synthetic dataset (JSON lines)");
  add_common(gen_cmd, gen.common, true);
  gen_cmd->add_option("--out", gen.out, "Output dataset path")->required();
  gen_cmd->add_option("--num-scenes", gen.num_scenes, "Number of scenes")->capture_default_str();
  gen_cmd->add_option("--first-id", gen.first_id, "Scene id of the first scene")->capture_default_str();

  TrainOptions tr;
  auto* train_cmd = app.add_subcommand("train", "Train a model and write a checkpoint directory");
  add_common(train_cmd, tr.common, true);
  train_cmd->add_option("--data", tr.data, "Training dataset")->required();
  train_cmd->add_option("--out-ckpt", tr.out_ckpt, "Checkpoint directory")->required();
  train_cmd->add_option("--eval-data", tr.eval_data, "Dataset scored (full mode) after every epoch");
  train_cmd->add_option("--metrics", tr.metrics, "Metrics log (default: <out-ckpt>/metrics.jsonl)");
  train_cmd->add_option("--epochs", tr.epochs, "Total epochs")->check(CLI::NonNegativeNumber);
  train_cmd->add_flag("--no-mft", tr.no_mft, "Train on the full configuration only");
  train_cmd->add_flag("--resume", tr.resume, "Continue from the checkpoint in --out-ckpt if present");

  EvalOptions ev;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint and write an mAP report");
  add_common(eval_cmd, ev.common, true);
  eval_cmd->add_option("--ckpt", ev.ckpt, "Checkpoint directory")->required();
  eval_cmd->add_option("--data", ev.data, "Evaluation dataset")->required();
  eval_cmd->add_option("--mode", ev.mode, "Input configuration")->check(CLI::IsMember(kModes))->capture_default_str();
  eval_cmd->add_option("--report", ev.report, "Report path")->required();

  InferOptions inf;
  auto* infer_cmd = app.add_subcommand("infer", "Write scored HOI predictions (JSON lines)");
  add_common(infer_cmd, inf.common, true);
  infer_cmd->add_option("--ckpt", inf.ckpt, "Checkpoint directory")->required();
  infer_cmd->add_option("--data", inf.data, "Dataset")->required();
  infer_cmd->add_option("--mode", inf.mode, "Input configuration")->check(CLI::IsMember(kModes))->capture_default_str();
  infer_cmd->add_option("--out", inf.out, "Predictions path")->required();

  InspectOptions ins;
  auto* inspect_cmd = app.add_subcommand("inspect", "Dump masks, context tokens and decoder attention for one scene");
  add_common(inspect_cmd, ins.common, false);
  inspect_cmd->add_option("--ckpt", ins.ckpt, "Checkpoint directory")->required();
  inspect_cmd->add_option("--data", ins.data, "Dataset")->required();
  inspect_cmd->add_option("--scene-id", ins.scene_id, "Scene id")->required();
  inspect_cmd->add_option("--out-dir", ins.out_dir, "Output directory")->required();
  inspect_cmd->add_option("--mode", ins.mode, "Input configuration")->check(CLI::IsMember(kModes))->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*gen_cmd) return run_gen(gen);
    if (*train_cmd) return run_train(tr);
    if (*eval_cmd) return run_eval(ev);
    if (*infer_cmd) return run_infer(inf);
    if (*inspect_cmd) return run_inspect(ins);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitUsage;
}

}  // namespace incom::cli

int main(int argc, char** argv) { return incom::cli::run(argc, argv); }
