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
#include <string>
#include <vector>

#include "incom/rng.hpp"
#include "incom/tensor.hpp"

namespace incom {

struct ParamId {
  std::size_t index = 0;
};

struct Parameter {
  std::string name;
  Tensor value;
};

/// Flat, ordered store of named trainable tensors. Names mirror the module
/// path of the owning block (e.g. "icr.l0.intra.attn.wq").
class ParameterSet {
 public:
  ParamId add(std::string name, Tensor value);

  std::size_t size() const { return params_.size(); }
  const Parameter& operator[](ParamId id) const { return params_.at(id.index); }
  Parameter& operator[](ParamId id) { return params_.at(id.index); }
  const std::vector<Parameter>& all() const { return params_; }
  std::vector<Parameter>& all() { return params_; }

  std::size_t scalar_count() const;
  /// Throws std::out_of_range for unknown names.
  ParamId find(const std::string& name) const;

  std::vector<Tensor> zeros_like() const;

 private:
  std::vector<Parameter> params_;
};

/// Uniform(-a, a) with a = sqrt(6 / (fan_in + fan_out)).
Tensor xavier_uniform(Rng& rng, std::size_t fan_in, std::size_t fan_out);
Tensor gaussian_tensor(Rng& rng, std::size_t rows, std::size_t cols, double stddev);

}  // namespace incom
