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

#include "incom/parameters.hpp"

#include <cmath>
#include <stdexcept>

namespace incom {

ParamId ParameterSet::add(std::string name, Tensor value) {
  for (const auto& p : params_) {
    if (p.name == name) throw std::invalid_argument("duplicate parameter name: " + name);
  }
  params_.push_back({std::move(name), std::move(value)});
  return ParamId{params_.size() - 1};
}

std::size_t ParameterSet::scalar_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.value.size();
  return n;
}

ParamId ParameterSet::find(const std::string& name) const {
  for (std::size_t i = 0; i < params_.size(); ++i) {
    if (params_[i].name == name) return ParamId{i};
  }
  throw std::out_of_range("no parameter named " + name);
}

std::vector<Tensor> ParameterSet::zeros_like() const {
  std::vector<Tensor> out;
  out.reserve(params_.size());
  for (const auto& p : params_) out.emplace_back(p.value.rows(), p.value.cols());
  return out;
}

Tensor xavier_uniform(Rng& rng, std::size_t fan_in, std::size_t fan_out) {
  const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  Tensor t(fan_in, fan_out);
  for (double& v : t.flat()) v = rng.uniform(-a, a);
  return t;
}

Tensor gaussian_tensor(Rng& rng, std::size_t rows, std::size_t cols, double stddev) {
  Tensor t(rows, cols);
  for (double& v : t.flat()) v = rng.gaussian() * stddev;
  return t;
}

}  // namespace incom
