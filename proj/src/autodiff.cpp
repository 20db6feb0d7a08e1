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

#include "incom/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <utility>

namespace incom::ad {

const Tensor& Var::value() const { return tape_->value(id_); }
bool Var::requires_grad() const { return tape_->requires_grad(id_); }

Var Tape::constant(Tensor value) {
  nodes_.push_back({std::move(value), {}, false, {}});
  return Var(this, static_cast<int>(nodes_.size() - 1));
}

Var Tape::input(Tensor value) {
  nodes_.push_back({std::move(value), {}, record_, {}});
  return Var(this, static_cast<int>(nodes_.size() - 1));
}

Var Tape::param(const ParameterSet& params, ParamId id) {
  if (params_ == nullptr) {
    params_ = &params;
    param_nodes_.assign(params.size(), -1);
  } else if (params_ != &params) {
    throw std::logic_error("a tape can bind parameters from one ParameterSet only");
  }
  int& slot = param_nodes_.at(id.index);
  if (slot < 0) {
    nodes_.push_back({params[id].value, {}, record_, {}});
    slot = static_cast<int>(nodes_.size() - 1);
  }
  return Var(this, slot);
}

Var Tape::push(Tensor value, std::span<const Var> parents, BackwardFn fn) {
  bool needs = false;
  if (record_) {
    for (const Var& p : parents) {
      if (&p.tape() != this) throw std::logic_error("mixing vars from different tapes");
      needs = needs || p.requires_grad();
    }
  }
  nodes_.push_back({std::move(value), {}, needs, needs ? std::move(fn) : BackwardFn{}});
  return Var(this, static_cast<int>(nodes_.size() - 1));
}

Tensor& Tape::grad(int id) {
  Node& n = nodes_[id];
  if (n.grad.empty() && !n.value.empty()) n.grad = Tensor(n.value.rows(), n.value.cols());
  return n.grad;
}

Tensor Tape::grad_of(Var v) {
  const Node& n = nodes_[v.id()];
  if (n.grad.empty()) return Tensor(n.value.rows(), n.value.cols());
  return n.grad;
}

void Tape::backward(Var loss) {
  if (!record_) throw std::logic_error("backward() on a non-recording tape");
  if (loss.rows() != 1 || loss.cols() != 1) {
    throw ShapeError("backward() needs a 1x1 loss, got " + loss.value().shape_string());
  }
  if (!loss.requires_grad()) return;
  grad(loss.id())(0, 0) += 1.0;
  for (int id = loss.id(); id >= 0; --id) {
    Node& n = nodes_[id];
    if (!n.requires_grad || !n.backward || n.grad.empty()) continue;
    n.backward(*this, id);
  }
}

void Tape::accumulate_param_grads(std::vector<Tensor>& into) const {
  if (params_ == nullptr) return;
  if (into.size() != param_nodes_.size()) throw ShapeError("gradient buffer count mismatch");
  for (std::size_t i = 0; i < param_nodes_.size(); ++i) {
    const int id = param_nodes_[i];
    if (id < 0 || nodes_[id].grad.empty()) continue;
    into[i] += nodes_[id].grad;
  }
}

namespace {

void require(bool ok, const char* op, const Tensor& a, const Tensor& b) {
  if (!ok) {
    throw ShapeError(std::string(op) + ": incompatible shapes " + a.shape_string() + " and " +
                     b.shape_string());
  }
}

double softplus(double z) { return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))); }

}  // namespace

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double gelu_scalar(double x) { return 0.5 * x * (1.0 + std::erf(x / std::numbers::sqrt2)); }

Var matmul(Var a, Var b) {
  require(a.cols() == b.rows(), "matmul", a.value(), b.value());
  Tensor out = incom::matmul(a.value(), b.value());
  const Var parents[] = {a, b};
  return a.tape().push(std::move(out), parents, [ia = a.id(), ib = b.id()](Tape& t, int self) {
    const Tensor& g = t.grad(self);
    if (t.requires_grad(ia)) gemm_nt_acc(g, t.value(ib), t.grad(ia));
    if (t.requires_grad(ib)) gemm_tn_acc(t.value(ia), g, t.grad(ib));
  });
}

Var matmul_nt(Var a, Var b) {
  require(a.cols() == b.cols(), "matmul_nt", a.value(), b.value());
  Tensor out(a.rows(), b.rows());
  gemm_nt_acc(a.value(), b.value(), out);
  const Var parents[] = {a, b};
  return a.tape().push(std::move(out), parents, [ia = a.id(), ib = b.id()](Tape& t, int self) {
    const Tensor& g = t.grad(self);
    if (t.requires_grad(ia)) gemm_nn_acc(g, t.value(ib), t.grad(ia));
    if (t.requires_grad(ib)) gemm_tn_acc(g, t.value(ia), t.grad(ib));
  });
}

Var add(Var a, Var b) {
  require(a.value().same_shape(b.value()), "add", a.value(), b.value());
  Tensor out = a.value();
  out += b.value();
  const Var parents[] = {a, b};
  return a.tape().push(std::move(out), parents, [ia = a.id(), ib = b.id()](Tape& t, int self) {
    const Tensor& g = t.grad(self);
    if (t.requires_grad(ia)) t.grad(ia) += g;
    if (t.requires_grad(ib)) t.grad(ib) += g;
  });
}

Var add_bias(Var a, Var bias) {
  require(bias.rows() == 1 && bias.cols() == a.cols(), "add_bias", a.value(), bias.value());
  Tensor out = a.value();
  const auto b = bias.value().row(0);
  for (std::size_t r = 0; r < out.rows(); ++r) {
    auto row = out.row(r);
    for (std::size_t c = 0; c < row.size(); ++c) row[c] += b[c];
  }
  const Var parents[] = {a, bias};
  return a.tape().push(std::move(out), parents, [ia = a.id(), ib = bias.id()](Tape& t, int self) {
    const Tensor& g = t.grad(self);
    if (t.requires_grad(ia)) t.grad(ia) += g;
    if (t.requires_grad(ib)) {
      auto gb = t.grad(ib).row(0);
      for (std::size_t r = 0; r < g.rows(); ++r) {
        const auto row = g.row(r);
        for (std::size_t c = 0; c < row.size(); ++c) gb[c] += row[c];
      }
    }
  });
}

Var scale(Var a, double s) {
  Tensor out = a.value();
  out *= s;
  const Var parents[] = {a};
  return a.tape().push(std::move(out), parents, [ia = a.id(), s](Tape& t, int self) {
    Tensor g = t.grad(self);
    g *= s;
    t.grad(ia) += g;
  });
}

Var gelu(Var a) {
  Tensor out = a.value();
  for (double& v : out.flat()) v = gelu_scalar(v);
  const Var parents[] = {a};
  return a.tape().push(std::move(out), parents, [ia = a.id()](Tape& t, int self) {
    const Tensor& g = t.grad(self);
    const Tensor& x = t.value(ia);
    Tensor& ga = t.grad(ia);
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double v = x.flat()[i];
      const double cdf = 0.5 * (1.0 + std::erf(v / std::numbers::sqrt2));
      const double pdf = std::exp(-0.5 * v * v) / std::sqrt(2.0 * std::numbers::pi);
      ga.flat()[i] += g.flat()[i] * (cdf + v * pdf);
    }
  });
}

Var layer_norm(Var a, Var gain, Var shift, double eps) {
  const std::size_t n = a.cols();
  require(gain.rows() == 1 && gain.cols() == n, "layer_norm gain", a.value(), gain.value());
  require(shift.rows() == 1 && shift.cols() == n, "layer_norm shift", a.value(), shift.value());
  const Tensor& x = a.value();
  Tensor xhat(x.rows(), n);
  std::vector<double> inv_std(x.rows());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    const auto row = x.row(r);
    double mean = 0.0;
    for (double v : row) mean += v;
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (double v : row) var += (v - mean) * (v - mean);
    var /= static_cast<double>(n);
    inv_std[r] = 1.0 / std::sqrt(var + eps);
    auto h = xhat.row(r);
    for (std::size_t c = 0; c < n; ++c) h[c] = (row[c] - mean) * inv_std[r];
  }
  Tensor out(x.rows(), n);
  const auto gv = gain.value().row(0);
  const auto sv = shift.value().row(0);
  for (std::size_t r = 0; r < x.rows(); ++r) {
    const auto h = xhat.row(r);
    auto o = out.row(r);
    for (std::size_t c = 0; c < n; ++c) o[c] = h[c] * gv[c] + sv[c];
  }
  const Var parents[] = {a, gain, shift};
  return a.tape().push(
      std::move(out), parents,
      [ia = a.id(), ig = gain.id(), is = shift.id(), xhat = std::move(xhat),
       inv_std = std::move(inv_std)](Tape& t, int self) {
        const Tensor& g = t.grad(self);
        const std::size_t cols = g.cols();
        if (t.requires_grad(ig) || t.requires_grad(is)) {
          const bool wg = t.requires_grad(ig), ws = t.requires_grad(is);
          for (std::size_t r = 0; r < g.rows(); ++r) {
            const auto gr = g.row(r);
            const auto h = xhat.row(r);
            for (std::size_t c = 0; c < cols; ++c) {
              if (wg) t.grad(ig)(0, c) += gr[c] * h[c];
              if (ws) t.grad(is)(0, c) += gr[c];
            }
          }
        }
        if (!t.requires_grad(ia)) return;
        const auto gv = t.value(ig).row(0);
        Tensor& ga = t.grad(ia);
        std::vector<double> dh(cols);
        for (std::size_t r = 0; r < g.rows(); ++r) {
          const auto gr = g.row(r);
          const auto h = xhat.row(r);
          double mean_dh = 0.0, mean_dh_h = 0.0;
          for (std::size_t c = 0; c < cols; ++c) {
            dh[c] = gr[c] * gv[c];
            mean_dh += dh[c];
            mean_dh_h += dh[c] * h[c];
          }
          mean_dh /= static_cast<double>(cols);
          mean_dh_h /= static_cast<double>(cols);
          auto out_row = ga.row(r);
          for (std::size_t c = 0; c < cols; ++c) {
            out_row[c] += inv_std[r] * (dh[c] - mean_dh - h[c] * mean_dh_h);
          }
        }
      });
}

Var softmax_rows(Var a) {
  Tensor out = a.value();
  for (std::size_t r = 0; r < out.rows(); ++r) {
    auto row = out.row(r);
    const double mx = *std::max_element(row.begin(), row.end());
    double sum = 0.0;
    for (double& v : row) {
      v = std::exp(v - mx);
      sum += v;
    }
    for (double& v : row) v /= sum;
  }
  const Var parents[] = {a};
  return a.tape().push(std::move(out), parents, [ia = a.id()](Tape& t, int self) {
    const Tensor& g = t.grad(self);
    const Tensor& y = t.value(self);
    Tensor& ga = t.grad(ia);
    for (std::size_t r = 0; r < y.rows(); ++r) {
      const auto yr = y.row(r);
      const auto gr = g.row(r);
      double dot = 0.0;
      for (std::size_t c = 0; c < yr.size(); ++c) dot += gr[c] * yr[c];
      auto out_row = ga.row(r);
      for (std::size_t c = 0; c < yr.size(); ++c) out_row[c] += yr[c] * (gr[c] - dot);
    }
  });
}

Var gather_rows(Var a, std::span<const std::size_t> rows) {
  const Tensor& x = a.value();
  Tensor out(rows.size(), x.cols());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r] >= x.rows()) throw ShapeError("gather_rows: row index out of range");
    std::copy(x.row(rows[r]).begin(), x.row(rows[r]).end(), out.row(r).begin());
  }
  const Var parents[] = {a};
  return a.tape().push(
      std::move(out), parents,
      [ia = a.id(), idx = std::vector<std::size_t>(rows.begin(), rows.end())](Tape& t, int self) {
        const Tensor& g = t.grad(self);
        Tensor& ga = t.grad(ia);
        for (std::size_t r = 0; r < idx.size(); ++r) {
          auto dst = ga.row(idx[r]);
          const auto src = g.row(r);
          for (std::size_t c = 0; c < src.size(); ++c) dst[c] += src[c];
        }
      });
}

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no inputs");
  const std::size_t rows = parts[0].rows();
  std::size_t cols = 0;
  for (const Var& p : parts) {
    require(p.rows() == rows, "concat_cols", parts[0].value(), p.value());
    cols += p.cols();
  }
  Tensor out(rows, cols);
  std::vector<int> ids;
  std::size_t offset = 0;
  for (const Var& p : parts) {
    for (std::size_t r = 0; r < rows; ++r) {
      std::copy(p.value().row(r).begin(), p.value().row(r).end(), out.row(r).begin() + offset);
    }
    offset += p.cols();
    ids.push_back(p.id());
  }
  return parts[0].tape().push(std::move(out), parts, [ids = std::move(ids)](Tape& t, int self) {
    const Tensor& g = t.grad(self);
    std::size_t off = 0;
    for (int id : ids) {
      const std::size_t w = t.value(id).cols();
      if (t.requires_grad(id)) {
        Tensor& gp = t.grad(id);
        for (std::size_t r = 0; r < g.rows(); ++r) {
          auto dst = gp.row(r);
          for (std::size_t c = 0; c < w; ++c) dst[c] += g(r, off + c);
        }
      }
      off += w;
    }
  });
}

Var concat_rows(std::span<const Var> parts) {
  if (parts.empty()) throw ShapeError("concat_rows: no inputs");
  const std::size_t cols = parts[0].cols();
  std::size_t rows = 0;
  for (const Var& p : parts) {
    require(p.cols() == cols, "concat_rows", parts[0].value(), p.value());
    rows += p.rows();
  }
  Tensor out(rows, cols);
  std::vector<int> ids;
  std::size_t offset = 0;
  for (const Var& p : parts) {
    std::copy(p.value().flat().begin(), p.value().flat().end(), out.data() + offset * cols);
    offset += p.rows();
    ids.push_back(p.id());
  }
  return parts[0].tape().push(std::move(out), parts, [ids = std::move(ids)](Tape& t, int self) {
    const Tensor& g = t.grad(self);
    std::size_t off = 0;
    for (int id : ids) {
      const std::size_t n = t.value(id).size();
      if (t.requires_grad(id)) {
        Tensor& gp = t.grad(id);
        for (std::size_t i = 0; i < n; ++i) gp.flat()[i] += g.data()[off + i];
      }
      off += n;
    }
  });
}

Var slice_cols(Var a, std::size_t start, std::size_t count) {
  if (start + count > a.cols()) throw ShapeError("slice_cols: range exceeds columns");
  const Tensor& x = a.value();
  Tensor out(x.rows(), count);
  for (std::size_t r = 0; r < x.rows(); ++r) {
    std::copy_n(x.row(r).begin() + start, count, out.row(r).begin());
  }
  const Var parents[] = {a};
  return a.tape().push(std::move(out), parents, [ia = a.id(), start](Tape& t, int self) {
    const Tensor& g = t.grad(self);
    Tensor& ga = t.grad(ia);
    for (std::size_t r = 0; r < g.rows(); ++r) {
      for (std::size_t c = 0; c < g.cols(); ++c) ga(r, start + c) += g(r, c);
    }
  });
}

Var focal_loss(Var logits, const Tensor& targets, double gamma, double alpha) {
  require(logits.value().same_shape(targets), "focal_loss", logits.value(), targets);
  for (const double y : targets.flat()) {
    if (y != 0.0 && y != 1.0) throw std::invalid_argument("focal_loss: targets must be 0 or 1");
  }
  const Tensor& x = logits.value();
  const double cells = static_cast<double>(x.size());
  double total = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double z = x.flat()[i];
    const double y = targets.flat()[i];
    const double p = sigmoid(z), q = sigmoid(-z);
    const double log_p = -softplus(-z), log_q = -softplus(z);
    total += -alpha * y * std::pow(q, gamma) * log_p -
             (1.0 - alpha) * (1.0 - y) * std::pow(p, gamma) * log_q;
  }
  Tensor out(1, 1, cells > 0 ? total / cells : 0.0);
  const Var parents[] = {logits};
  return logits.tape().push(
      std::move(out), parents,
      [ia = logits.id(), targets, gamma, alpha, cells](Tape& t, int self) {
        const double g = t.grad(self)(0, 0) / cells;
        const Tensor& x = t.value(ia);
        Tensor& ga = t.grad(ia);
        for (std::size_t i = 0; i < x.size(); ++i) {
          const double z = x.flat()[i];
          const double y = targets.flat()[i];
          const double p = sigmoid(z), q = sigmoid(-z);
          const double log_p = -softplus(-z), log_q = -softplus(z);
          const double d_pos = -alpha * y * std::pow(q, gamma) * (q - gamma * p * log_p);
          const double d_neg =
              -(1.0 - alpha) * (1.0 - y) * std::pow(p, gamma) * (gamma * q * log_q - p);
          ga.flat()[i] += g * (d_pos + d_neg);
        }
      });
}

}  // namespace incom::ad
