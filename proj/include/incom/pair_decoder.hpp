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
#include <span>
#include <string>
#include <vector>

#include "incom/autodiff.hpp"
#include "incom/evaluation.hpp"
#include "incom/nn.hpp"
#include "incom/synth_data.hpp"

namespace incom::pair {

/// Masked input configurations of the interaction sub-module.
enum class MftConfig { kFull, kDetectorOnly, kVlmOnly };

struct MftFlags {
  bool use_queries = true;     // q^L in pair fusion
  bool use_aggregated = true;  // f^L in pair fusion
  bool use_spatial = true;     // F in the decoder
  bool use_vlm = true;         // V^L in the decoder
};

MftFlags flags_of(MftConfig config);
const char* to_string(MftConfig config);
/// Accepts "full", "d-only"/"detector_only", "v-only"/"vlm_only".
MftConfig mft_config_from_string(const std::string& name);

struct PairIndex {
  std::size_t human = 0;
  std::size_t object = 0;

  bool operator==(const PairIndex&) const = default;
};

/// Every ordered (human h, instance o != h), h ascending then o ascending.
std::vector<PairIndex> generate_pairs(std::span<const synth::Instance> instances);

struct DecoderLayerParams {
  // Present only in the residual form.
  nn::LayerNormParams self_norm;
  nn::LayerNormParams cross_norm;
  nn::AttentionParams self_attn;
  nn::AttentionParams cross_spatial;
  nn::AttentionParams cross_vlm;
  nn::FfnParams ffn;
};

struct PairDecoderParams {
  nn::LinearParams query_proj;
  nn::LayerNormParams query_norm;
  nn::LinearParams aggregated_proj;
  nn::LayerNormParams aggregated_norm;
  // Single pre-LN encoder layer over the pair tokens.
  nn::LayerNormParams encoder_norm;
  nn::AttentionParams encoder_attn;
  nn::FfnParams encoder_ffn;
  std::vector<DecoderLayerParams> decoder;
  /// Residual form: pre-LN blocks with skip connections and a final LN.
  /// Literal form: the update exactly as written, without either.
  bool residual = true;
  nn::LayerNormParams output_norm;
  nn::LinearParams classifier;

  std::size_t pair_dim() const { return classifier.in_dim; }
  std::size_t verb_count() const { return classifier.out_dim; }

  static PairDecoderParams create(ParameterSet& set, Rng& rng, std::size_t query_dim,
                                  std::size_t aggregated_dim, std::size_t pair_dim,
                                  std::size_t spatial_dim, std::size_t vlm_dim, std::size_t heads,
                                  std::size_t ffn_mult, std::size_t decoder_layers,
                                  std::size_t verbs, bool residual = true);
};

struct PairFeatures {
  ad::Var raw;      // s
  ad::Var encoded;  // s^ = z^0
};

/// s = LN(Linear(q_h || q_o)) + LN(Linear(f_h || f_o)); a masked branch is
/// left out of the sum entirely. s^ is one encoder layer over the pair set.
PairFeatures fuse_pair_features(ad::Tape& tape, const ParameterSet& set, ad::Var q_final,
                                ad::Var f_final, std::span<const PairIndex> pairs,
                                MftConfig config, const PairDecoderParams& params);

struct DecoderTrace {
  std::vector<ad::Var> states;  // z^0 .. z^{L_z}
  std::vector<nn::AttentionWeights> spatial_weights;
  std::vector<nn::AttentionWeights> vlm_weights;
};

/// Per layer, literal form: z^ = SA(z); z' = FFN(CA(z^, F) + CA(z^, V^L)).
/// Residual form: z^ = z + SA(LN(z)); c = LN(z^); z' = z^ + FFN(CA(c, F) + CA(c, V^L)),
/// and the classifier reads LN(z). Masked branches are left out. Returns
/// P x verbs logits (P = 0 gives an empty matrix).
ad::Var decode_interactions(ad::Tape& tape, const ParameterSet& set, const PairFeatures& pairs,
                            ad::Var spatial, ad::Var vlm_final, MftConfig config,
                            const PairDecoderParams& params, DecoderTrace* trace = nullptr);

/// score = sigmoid(logit) * det_score(h) * det_score(o) for every pair and verb.
std::vector<eval::HoiPrediction> score_hoi(const Tensor& logits, std::span<const PairIndex> pairs,
                                           std::span<const synth::Instance> detections,
                                           std::uint64_t scene_id);

}  // namespace incom::pair
