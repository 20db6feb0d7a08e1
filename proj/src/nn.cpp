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

#include "incom/nn.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace incom::nn {

LinearParams make_linear(ParameterSet& set, Rng& rng, const std::string& prefix,
                         std::size_t in_dim, std::size_t out_dim) {
  LinearParams p;
  p.weight = set.add(prefix + ".w", xavier_uniform(rng, in_dim, out_dim));
  p.bias = set.add(prefix + ".b", Tensor(1, out_dim));
  p.in_dim = in_dim;
  p.out_dim = out_dim;
  return p;
}

LayerNormParams make_layer_norm(ParameterSet& set, const std::string& prefix, std::size_t dim) {
  return {set.add(prefix + ".gain", Tensor(1, dim, 1.0)), set.add(prefix + ".shift", Tensor(1, dim)),
          dim};
}

AttentionParams make_attention(ParameterSet& set, Rng& rng, const std::string& prefix,
                               std::size_t model_dim, std::size_t heads, std::size_t kv_dim) {
  if (heads == 0 || model_dim % heads != 0) {
    throw std::invalid_argument(prefix + ": model dim " + std::to_string(model_dim) +
                                " is not divisible by " + std::to_string(heads) + " heads");
  }
  if (kv_dim == 0) kv_dim = model_dim;
  AttentionParams p;
  p.query = make_linear(set, rng, prefix + ".q", model_dim, model_dim);
  p.key = make_linear(set, rng, prefix + ".k", kv_dim, model_dim);
  p.value = make_linear(set, rng, prefix + ".v", kv_dim, model_dim);
  p.out = make_linear(set, rng, prefix + ".o", model_dim, model_dim);
  p.heads = heads;
  p.model_dim = model_dim;
  p.kv_dim = kv_dim;
  return p;
}

FfnParams make_ffn(ParameterSet& set, Rng& rng, const std::string& prefix, std::size_t in_dim,
                   std::size_t hidden_dim, std::size_t out_dim) {
  FfnParams p;
  p.norm = make_layer_norm(set, prefix + ".ln", in_dim);
  p.hidden = make_linear(set, rng, prefix + ".fc1", in_dim, hidden_dim);
  p.out = make_linear(set, rng, prefix + ".fc2", hidden_dim, out_dim);
  return p;
}

Var linear(Tape& tape, const ParameterSet& set, Var x, const LinearParams& p) {
  return ad::add_bias(ad::matmul(x, tape.param(set, p.weight)), tape.param(set, p.bias));
}

Var layer_norm(Tape& tape, const ParameterSet& set, Var x, const LayerNormParams& p) {
  return ad::layer_norm(x, tape.param(set, p.gain), tape.param(set, p.shift));
}

Var ffn(Tape& tape, const ParameterSet& set, Var x, const FfnParams& p) {
  Var h = layer_norm(tape, set, x, p.norm);
  h = ad::gelu(linear(tape, set, h, p.hidden));
  return linear(tape, set, h, p.out);
}

Var cross_attention(Tape& tape, const ParameterSet& set, Var query, Var keyvalue,
                    const AttentionParams& p, AttentionWeights* weights) {
  if (keyvalue.rows() == 0) throw std::invalid_argument("attention over an empty key set");
  if (query.cols() != p.model_dim || keyvalue.cols() != p.kv_dim) {
    throw ShapeError("attention input widths " + std::to_string(query.cols()) + "/" +
                     std::to_string(keyvalue.cols()) + " do not match parameters " +
                     std::to_string(p.model_dim) + "/" + std::to_string(p.kv_dim));
  }
  const Var q = linear(tape, set, query, p.query);
  const Var k = linear(tape, set, keyvalue, p.key);
  const Var v = linear(tape, set, keyvalue, p.value);
  const std::size_t dh = p.head_dim();
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  std::vector<Var> heads;
  heads.reserve(p.heads);
  for (std::size_t h = 0; h < p.heads; ++h) {
    const Var qh = p.heads == 1 ? q : ad::slice_cols(q, h * dh, dh);
    const Var kh = p.heads == 1 ? k : ad::slice_cols(k, h * dh, dh);
    const Var vh = p.heads == 1 ? v : ad::slice_cols(v, h * dh, dh);
    const Var attn = ad::softmax_rows(ad::scale(ad::matmul_nt(qh, kh), scale));
    if (weights != nullptr) weights->push_back(attn.value());
    heads.push_back(ad::matmul(attn, vh));
  }
  const Var merged = heads.size() == 1 ? heads[0] : ad::concat_cols(heads);
  return linear(tape, set, merged, p.out);
}

Var self_attention(Tape& tape, const ParameterSet& set, Var x, const AttentionParams& p,
                   AttentionWeights* weights) {
  return cross_attention(tape, set, x, x, p, weights);
}

Var masked_self_attention(Tape& tape, const ParameterSet& set, Var x,
                          const geometry::BinaryMask& mask, const AttentionParams& p,
                          AttentionWeights* weights) {
  if (mask.size() != x.rows()) {
    throw std::invalid_argument("mask length " + std::to_string(mask.size()) +
                                " does not match sequence length " + std::to_string(x.rows()));
  }
  if (mask.none()) throw std::invalid_argument("masked self-attention with an all-zero mask");
  if (mask.all()) return self_attention(tape, set, x, p, weights);
  const auto idx = mask.indices();
  return self_attention(tape, set, ad::gather_rows(x, idx), p, weights);
}

std::vector<std::size_t> canonical_row_order(const Tensor& t) {
  std::vector<std::size_t> order(t.rows());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&t](std::size_t a, std::size_t b) {
    const auto ra = t.row(a), rb = t.row(b);
    return std::lexicographical_compare(ra.begin(), ra.end(), rb.begin(), rb.end());
  });
  return order;
}

Var set_self_attention(Tape& tape, const ParameterSet& set, Var x, const AttentionParams& p) {
  if (x.rows() <= 1) return self_attention(tape, set, x, p);
  const auto order = canonical_row_order(x.value());
  std::vector<std::size_t> inverse(order.size());
  for (std::size_t i = 0; i < order.size(); ++i) inverse[order[i]] = i;
  const Var sorted = ad::gather_rows(x, order);
  return ad::gather_rows(self_attention(tape, set, sorted, p), inverse);
}

}  // namespace incom::nn
