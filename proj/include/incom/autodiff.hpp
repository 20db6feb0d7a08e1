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
#include <deque>
#include <functional>
#include <span>
#include <vector>

#include "incom/parameters.hpp"
#include "incom/tensor.hpp"

namespace incom::ad {

class Tape;

/// Handle to a value recorded on a Tape. Cheap to copy; only valid while the
/// owning tape is alive.
class Var {
 public:
  Var() = default;

  const Tensor& value() const;
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
  bool valid() const { return tape_ != nullptr; }
  bool requires_grad() const;
  Tape& tape() const { return *tape_; }
  int id() const { return id_; }

 private:
  friend class Tape;
  Var(Tape* tape, int id) : tape_(tape), id_(id) {}
  Tape* tape_ = nullptr;
  int id_ = -1;
};

/// Reverse-mode recorder. Create one per forward pass; a tape built with
/// `record = false` evaluates values only and rejects backward().
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, int self)>;

  explicit Tape(bool record = true) : record_(record) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value);
  /// A differentiable input that is not a parameter (used by gradient checks).
  Var input(Tensor value);
  /// Leaf bound to a trainable parameter; repeated calls share one node.
  Var param(const ParameterSet& params, ParamId id);

  /// Records an op result. `fn` is kept only if some parent needs a gradient.
  Var push(Tensor value, std::span<const Var> parents, BackwardFn fn);

  /// Seeds d(loss)/d(loss) = 1 for a 1x1 loss and propagates.
  void backward(Var loss);

  const Tensor& value(int id) const { return nodes_[id].value; }
  bool requires_grad(int id) const { return nodes_[id].requires_grad; }
  /// Gradient buffer of a node, allocated as zeros on first access.
  Tensor& grad(int id);
  /// Gradient of a node after backward(); zeros if it received none.
  Tensor grad_of(Var v);

  /// Adds this tape's parameter gradients into `into` (shaped like the set).
  void accumulate_param_grads(std::vector<Tensor>& into) const;

  bool recording() const { return record_; }
  std::size_t node_count() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    BackwardFn backward;
  };

  bool record_;
  // A deque keeps value() references valid while the tape grows.
  std::deque<Node> nodes_;
  const ParameterSet* params_ = nullptr;
  std::vector<int> param_nodes_;
};

// Differentiable ops. Shapes are rows x cols; rows index tokens.

Var matmul(Var a, Var b);
/// a * b^T
Var matmul_nt(Var a, Var b);
Var add(Var a, Var b);
/// Adds a 1 x cols row vector to every row.
Var add_bias(Var a, Var bias);
Var scale(Var a, double s);
/// Exact GELU, x * Phi(x).
Var gelu(Var a);
/// Row-wise normalization with affine 1 x cols gain and shift.
Var layer_norm(Var a, Var gain, Var shift, double eps = 1e-5);
Var softmax_rows(Var a);
Var gather_rows(Var a, std::span<const std::size_t> rows);
Var concat_cols(std::span<const Var> parts);
Var concat_rows(std::span<const Var> parts);
Var slice_cols(Var a, std::size_t start, std::size_t count);
/// Mean over all cells of the sigmoid focal loss; targets are 0/1.
Var focal_loss(Var logits, const Tensor& targets, double gamma, double alpha);

double gelu_scalar(double x);
double sigmoid(double x);

}  // namespace incom::ad
