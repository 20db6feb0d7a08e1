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

#include "incom/pair_decoder.hpp"

#include <stdexcept>

namespace incom::pair {

MftFlags flags_of(MftConfig config) {
  switch (config) {
    case MftConfig::kFull: return {true, true, true, true};
    case MftConfig::kDetectorOnly: return {true, false, true, false};
    case MftConfig::kVlmOnly: return {false, true, false, true};
  }
  throw std::invalid_argument("unknown MFT configuration");
}

const char* to_string(MftConfig config) {
  switch (config) {
    case MftConfig::kFull: return "full";
    case MftConfig::kDetectorOnly: return "d-only";
    case MftConfig::kVlmOnly: return "v-only";
  }
  return "unknown";
}

MftConfig mft_config_from_string(const std::string& name) {
  if (name == "full") return MftConfig::kFull;
  if (name == "d-only" || name == "detector_only") return MftConfig::kDetectorOnly;
  if (name == "v-only" || name == "vlm_only") return MftConfig::kVlmOnly;
  throw std::invalid_argument("unknown mode '" + name + "' (expected full, v-only or d-only)");
}

std::vector<PairIndex> generate_pairs(std::span<const synth::Instance> instances) {
  std::vector<PairIndex> pairs;
  for (std::size_t h = 0; h < instances.size(); ++h) {
    if (!instances[h].is_human) continue;
    for (std::size_t o = 0; o < instances.size(); ++o) {
      if (o != h) pairs.push_back({h, o});
    }
  }
  return pairs;
}

PairDecoderParams PairDecoderParams::create(ParameterSet& set, Rng& rng, std::size_t query_dim,
                                            std::size_t aggregated_dim, std::size_t pair_dim,
                                            std::size_t spatial_dim, std::size_t vlm_dim,
                                            std::size_t heads, std::size_t ffn_mult,
                                            std::size_t decoder_layers, std::size_t verbs,
                                            bool residual) {
  PairDecoderParams p;
  p.residual = residual;
  p.query_proj = nn::make_linear(set, rng, "pair.query_proj", 2 * query_dim, pair_dim);
  p.query_norm = nn::make_layer_norm(set, "pair.query_norm", pair_dim);
  p.aggregated_proj = nn::make_linear(set, rng, "pair.aggregated_proj", 2 * aggregated_dim, pair_dim);
  p.aggregated_norm = nn::make_layer_norm(set, "pair.aggregated_norm", pair_dim);
  p.encoder_norm = nn::make_layer_norm(set, "pair.encoder.ln", pair_dim);
  p.encoder_attn = nn::make_attention(set, rng, "pair.encoder.attn", pair_dim, heads);
  p.encoder_ffn = nn::make_ffn(set, rng, "pair.encoder.ffn", pair_dim, ffn_mult * pair_dim, pair_dim);
  for (std::size_t l = 0; l < decoder_layers; ++l) {
    const std::string prefix = "decoder.l" + std::to_string(l);
    DecoderLayerParams d;
    if (residual) {
      d.self_norm = nn::make_layer_norm(set, prefix + ".self_ln", pair_dim);
      d.cross_norm = nn::make_layer_norm(set, prefix + ".cross_ln", pair_dim);
    }
    d.self_attn = nn::make_attention(set, rng, prefix + ".self_attn", pair_dim, heads);
    d.cross_spatial = nn::make_attention(set, rng, prefix + ".cross_spatial", pair_dim, heads, spatial_dim);
    d.cross_vlm = nn::make_attention(set, rng, prefix + ".cross_vlm", pair_dim, heads, vlm_dim);
    d.ffn = nn::make_ffn(set, rng, prefix + ".ffn", pair_dim, ffn_mult * pair_dim, pair_dim);
    p.decoder.push_back(std::move(d));
  }
  if (residual) p.output_norm = nn::make_layer_norm(set, "decoder.output_ln", pair_dim);
  p.classifier = nn::make_linear(set, rng, "classifier", pair_dim, verbs);
  return p;
}

namespace {

ad::Var pair_concat(ad::Var rows, std::span<const PairIndex> pairs) {
  std::vector<std::size_t> hs, os;
  for (const auto& p : pairs) {
    if (p.human >= rows.rows() || p.object >= rows.rows()) {
      throw std::out_of_range("pair index (" + std::to_string(p.human) + ", " +
                              std::to_string(p.object) + ") out of range for " +
                              std::to_string(rows.rows()) + " instances");
    }
    hs.push_back(p.human);
    os.push_back(p.object);
  }
  const ad::Var parts[] = {ad::gather_rows(rows, hs), ad::gather_rows(rows, os)};
  return ad::concat_cols(parts);
}

}  // namespace

PairFeatures fuse_pair_features(ad::Tape& tape, const ParameterSet& set, ad::Var q_final,
                                ad::Var f_final, std::span<const PairIndex> pairs,
                                MftConfig config, const PairDecoderParams& params) {
  const auto flags = flags_of(config);
  ad::Var s;
  const auto accumulate = [&s](ad::Var term) { s = s.valid() ? ad::add(s, term) : term; };
  if (flags.use_queries) {
    accumulate(nn::layer_norm(tape, set, nn::linear(tape, set, pair_concat(q_final, pairs), params.query_proj),
                              params.query_norm));
  }
  if (flags.use_aggregated && f_final.valid()) {
    accumulate(nn::layer_norm(tape, set,
                              nn::linear(tape, set, pair_concat(f_final, pairs), params.aggregated_proj),
                              params.aggregated_norm));
  }
  if (!s.valid()) s = tape.constant(Tensor(pairs.size(), params.pair_dim()));
  if (pairs.empty()) return {s, s};

  const ad::Var attended =
      nn::set_self_attention(tape, set, nn::layer_norm(tape, set, s, params.encoder_norm), params.encoder_attn);
  const ad::Var h = ad::add(s, attended);
  return {s, ad::add(h, nn::ffn(tape, set, h, params.encoder_ffn))};
}

ad::Var decode_interactions(ad::Tape& tape, const ParameterSet& set, const PairFeatures& pairs,
                            ad::Var spatial, ad::Var vlm_final, MftConfig config,
                            const PairDecoderParams& params, DecoderTrace* trace) {
  ad::Var z = pairs.encoded;
  if (z.rows() == 0) return tape.constant(Tensor(0, params.verb_count()));
  const auto flags = flags_of(config);
  if (trace != nullptr) trace->states.push_back(z);
  for (const auto& layer : params.decoder) {
    ad::Var z_hat;
    ad::Var query;
    if (params.residual) {
      z_hat = ad::add(z, nn::set_self_attention(tape, set, nn::layer_norm(tape, set, z, layer.self_norm),
                                                layer.self_attn));
      query = nn::layer_norm(tape, set, z_hat, layer.cross_norm);
    } else {
      z_hat = nn::set_self_attention(tape, set, z, layer.self_attn);
      query = z_hat;
    }
    nn::AttentionWeights spatial_w, vlm_w;
    ad::Var sum;
    if (flags.use_spatial) {
      sum = nn::cross_attention(tape, set, query, spatial, layer.cross_spatial,
                                trace != nullptr ? &spatial_w : nullptr);
    }
    if (flags.use_vlm) {
      const ad::Var v = nn::cross_attention(tape, set, query, vlm_final, layer.cross_vlm,
                                            trace != nullptr ? &vlm_w : nullptr);
      sum = sum.valid() ? ad::add(sum, v) : v;
    }
    const ad::Var update = nn::ffn(tape, set, sum, layer.ffn);
    z = params.residual ? ad::add(z_hat, update) : update;
    if (trace != nullptr) {
      trace->states.push_back(z);
      trace->spatial_weights.push_back(std::move(spatial_w));
      trace->vlm_weights.push_back(std::move(vlm_w));
    }
  }
  if (params.residual) z = nn::layer_norm(tape, set, z, params.output_norm);
  return nn::linear(tape, set, z, params.classifier);
}

std::vector<eval::HoiPrediction> score_hoi(const Tensor& logits, std::span<const PairIndex> pairs,
                                           std::span<const synth::Instance> detections,
                                           std::uint64_t scene_id) {
  if (logits.rows() != pairs.size()) {
    throw std::invalid_argument("score_hoi: " + std::to_string(logits.rows()) + " logit rows for " +
                                std::to_string(pairs.size()) + " pairs");
  }
  std::vector<eval::HoiPrediction> out;
  out.reserve(logits.size());
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    const auto& h = detections[pairs[p].human];
    const auto& o = detections[pairs[p].object];
    for (std::size_t v = 0; v < logits.cols(); ++v) {
      out.push_back({scene_id, h.box, o.box, o.class_id, static_cast<int>(v),
                     ad::sigmoid(logits(p, v)) * h.score * o.score});
    }
  }
  return out;
}

}  // namespace incom::pair
