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

#include "incom/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

namespace incom {
namespace {

namespace fs = std::filesystem;

constexpr const char* kManifest = "manifest.json";
constexpr const char* kBlob = "tensors.bin";

std::uint64_t to_little(std::uint64_t v) {
  if constexpr (std::endian::native == std::endian::big) {
    std::uint64_t r = 0;
    for (int i = 0; i < 8; ++i) r = (r << 8) | ((v >> (8 * i)) & 0xffu);
    return r;
  }
  return v;
}

void write_atomically(const fs::path& path, const std::string& bytes) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw CheckpointError("cannot write " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw CheckpointError("write failed: " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw CheckpointError("cannot rename " + tmp.string() + ": " + ec.message());
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void append_tensor(std::string& blob, const Tensor& t) {
  for (const double d : t.flat()) {
    const std::uint64_t bits = to_little(std::bit_cast<std::uint64_t>(d));
    char buf[8];
    std::memcpy(buf, &bits, 8);
    blob.append(buf, 8);
  }
}

void read_tensor(const std::string& blob, std::size_t offset, Tensor& t, const std::string& name) {
  const std::size_t bytes = t.flat().size() * 8;
  if (offset + bytes > blob.size()) throw CheckpointError("tensor '" + name + "' extends past the blob");
  auto out = t.flat();
  for (std::size_t i = 0; i < out.size(); ++i) {
    std::uint64_t bits = 0;
    std::memcpy(&bits, blob.data() + offset + 8 * i, 8);
    out[i] = std::bit_cast<double>(to_little(bits));
  }
}

}  // namespace

void save_checkpoint(const fs::path& dir, const Model& model, const train::AdamW& optimizer,
                     const CheckpointMeta& meta) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw CheckpointError("cannot create " + dir.string() + ": " + ec.message());

  const auto& params = model.params().all();
  const bool has_state = optimizer.first_moment().size() == params.size();
  std::string blob;
  nlohmann::json table = nlohmann::json::array();
  const auto add = [&](const std::string& name, const std::string& group, const Tensor& t) {
    table.push_back({{"name", name}, {"group", group}, {"rows", t.rows()}, {"cols", t.cols()},
                     {"offset", blob.size()}});
    append_tensor(blob, t);
  };
  for (const auto& p : params) add(p.name, "param", p.value);
  if (has_state) {
    for (std::size_t i = 0; i < params.size(); ++i) add(params[i].name, "adam.m", optimizer.first_moment()[i]);
    for (std::size_t i = 0; i < params.size(); ++i) add(params[i].name, "adam.v", optimizer.second_moment()[i]);
  }

  nlohmann::json manifest = {
      {"format", "incom-checkpoint"},
      {"format_version", kCheckpointFormatVersion},
      {"dtype", "float64-le"},
      {"epoch", meta.epoch},
      {"model", to_json(model.config())},
      {"backbone", to_json(model.backbone_config())},
      {"train", train::to_json(meta.train)},
      {"category_counts", meta.category_counts},
      {"optimizer", {{"steps", optimizer.steps()}, {"has_state", has_state}}},
      {"blob_bytes", blob.size()},
      {"tensors", table},
  };
  // Blob first: a manifest on disk always refers to a complete blob.
  write_atomically(dir / kBlob, blob);
  write_atomically(dir / kManifest, manifest.dump(2) + "\n");
}

nlohmann::json read_manifest(const fs::path& dir) {
  const fs::path path = dir / kManifest;
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(path.string() + ": " + e.what());
  }
  if (manifest.value("format", "") != "incom-checkpoint") {
    throw CheckpointError(path.string() + ": not a checkpoint manifest");
  }
  if (manifest.value("format_version", -1) != kCheckpointFormatVersion) {
    throw CheckpointError(path.string() + ": unsupported format_version");
  }
  if (manifest.value("dtype", "") != "float64-le") throw CheckpointError(path.string() + ": unsupported dtype");
  return manifest;
}

Checkpoint load_checkpoint(const fs::path& dir) {
  const nlohmann::json manifest = read_manifest(dir);
  try {
    const ModelConfig model_cfg = model_config_from_json(manifest.at("model"));
    const backbones::BackboneConfig backbone_cfg = backbone_config_from_json(manifest.at("backbone"));
    Checkpoint ckpt{Model::create(model_cfg, backbone_cfg), train::AdamW{}, {}};
    ckpt.meta.epoch = manifest.at("epoch").get<int>();
    ckpt.meta.train = train::train_config_from_json(manifest.at("train"));
    ckpt.meta.category_counts = manifest.at("category_counts").get<std::vector<int>>();

    const std::string blob = read_file(dir / kBlob);
    if (blob.size() != manifest.at("blob_bytes").get<std::size_t>()) {
      throw CheckpointError((dir / kBlob).string() + ": size does not match the manifest");
    }
    auto& params = ckpt.model.params();
    const bool has_state = manifest.at("optimizer").at("has_state").get<bool>();
    if (has_state) ckpt.optimizer = train::AdamW(params);
    std::vector<bool> seen(params.size(), false);
    for (const auto& entry : manifest.at("tensors")) {
      const auto name = entry.at("name").get<std::string>();
      const auto group = entry.at("group").get<std::string>();
      ParamId id;
      try {
        id = params.find(name);
      } catch (const std::out_of_range&) {
        throw CheckpointError("checkpoint tensor '" + name + "' has no matching parameter");
      }
      Tensor* target = nullptr;
      if (group == "param") {
        target = &params[id].value;
        seen[id.index] = true;
      } else if (group == "adam.m" && has_state) {
        target = &ckpt.optimizer.first_moment()[id.index];
      } else if (group == "adam.v" && has_state) {
        target = &ckpt.optimizer.second_moment()[id.index];
      } else {
        throw CheckpointError("checkpoint tensor '" + name + "' has unknown group '" + group + "'");
      }
      const auto rows = entry.at("rows").get<std::size_t>();
      const auto cols = entry.at("cols").get<std::size_t>();
      if (rows != target->rows() || cols != target->cols()) {
        throw CheckpointError("checkpoint tensor '" + name + "' has shape " + std::to_string(rows) + "x" +
                              std::to_string(cols) + ", model expects " + target->shape_string());
      }
      read_tensor(blob, entry.at("offset").get<std::size_t>(), *target, name);
    }
    for (std::size_t i = 0; i < seen.size(); ++i) {
      if (!seen[i]) throw CheckpointError("checkpoint lacks parameter '" + params.all()[i].name + "'");
    }
    ckpt.optimizer.set_steps(manifest.at("optimizer").at("steps").get<std::int64_t>());
    return ckpt;
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError((dir / kManifest).string() + ": " + e.what());
  }
}

}  // namespace incom
