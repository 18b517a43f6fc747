// Copyright 2026 The Autocam Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "autocam/rng.hpp"

namespace autocam::engine {

// Dense double-precision tensor, up to 4-D, row-major. Handle semantics:
// copies share storage (clone() for a deep copy). The gradient buffer is
// allocated lazily and always matches the value shape.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(std::vector<int> shape, bool requires_grad = false);
  static Tensor full(std::vector<int> shape, double value, bool requires_grad = false);
  static Tensor from_values(std::vector<int> shape, std::vector<double> values,
                            bool requires_grad = false);

  bool defined() const { return static_cast<bool>(s_); }
  const std::vector<int>& shape() const { return s_->shape; }
  int rank() const { return static_cast<int>(s_->shape.size()); }
  int dim(int i) const { return s_->shape[static_cast<size_t>(i)]; }
  int64_t numel() const { return static_cast<int64_t>(s_->v.size()); }

  double* data() { return s_->v.data(); }
  const double* data() const { return s_->v.data(); }
  std::vector<double>& values() { return s_->v; }
  const std::vector<double>& values() const { return s_->v; }

  bool requires_grad() const { return s_->requires_grad; }
  void set_requires_grad(bool rg) { s_->requires_grad = rg; }
  bool has_grad() const { return !s_->g.empty(); }
  void ensure_grad();
  void zero_grad();
  double* grad() { return s_->g.data(); }
  const double* grad() const { return s_->g.data(); }
  std::vector<double>& grad_values() { return s_->g; }

  /// Value of a scalar (1-element) tensor.
  double value() const;

  Tensor clone() const;

  bool same_storage(const Tensor& o) const { return s_ == o.s_; }

 private:
  struct Storage {
    std::vector<int> shape;
    std::vector<double> v;
    std::vector<double> g;
    bool requires_grad = false;
  };
  std::shared_ptr<Storage> s_;
};

// Reverse-mode tape. Operations executed under a recording graph append a
// backward step; backward() replays the steps in reverse execution order,
// which is a valid reverse topological order of the recorded expression.
// Gradients of leaf tensors accumulate across repeated backward calls;
// intermediate buffers (op outputs, tracked by the tape) are reset per call.
class Graph {
 public:
  explicit Graph(bool enabled = true) : enabled_(enabled) {}

  bool recording() const { return enabled_; }
  void record(std::function<void()> backward_step);
  /// Registers an op output so backward() can reset its buffer.
  void track_output(const Tensor& t);
  size_t size() const { return steps_.size(); }
  void clear() {
    steps_.clear();
    outputs_.clear();
  }

  /// Seeds d(loss)/d(loss) = 1 and propagates. Throws if loss is not scalar.
  void backward(Tensor loss);

 private:
  bool enabled_;
  std::vector<std::function<void()>> steps_;
  std::vector<Tensor> outputs_;
};

// ---------------------------------------------------------------------------
// Operations. x: (N, C, H, W) activations unless noted. All ops are pure with
// respect to their inputs and deterministic.
// ---------------------------------------------------------------------------

/// Cross-correlation with zero padding. w: (O, C, kh, kw), bias: (O) or
/// undefined. Output spatial dims: floor((in + 2*pad - k) / stride) + 1.
Tensor conv2d(Graph& g, const Tensor& x, const Tensor& w, const Tensor& bias, int stride,
              int padding);

Tensor relu(Graph& g, const Tensor& x);

/// Elementwise sum of identically shaped tensors (identity shortcut).
Tensor residual_add(Graph& g, const Tensor& x, const Tensor& fx);

/// Non-overlapping k x k mean pooling; spatial dims must be divisible by k.
Tensor avg_pool(Graph& g, const Tensor& x, int k);

/// (N, C, H, W) -> (N, C) spatial mean.
Tensor global_avg_pool(Graph& g, const Tensor& x);

/// x: (N, in), w: (out, in), b: (out) or undefined -> (N, out).
Tensor linear(Graph& g, const Tensor& x, const Tensor& w, const Tensor& b);

/// Max-subtracted softmax along the given axis.
Tensor softmax(Graph& g, const Tensor& x, int axis);

/// Concatenation along an axis; all other dims must match.
Tensor concat(Graph& g, const std::vector<Tensor>& xs, int axis);

/// (N, C, H, W) -> (N, 1, H, W) view-copy of one channel.
Tensor select_channel(Graph& g, const Tensor& x, int channel);

Tensor sigmoid(Graph& g, const Tensor& x);

/// Elementwise k * x + c.
Tensor affine(Graph& g, const Tensor& x, double k, double c);

// ---------------------------------------------------------------------------
// Loss heads (scalar outputs, mean over the batch dimension)
// ---------------------------------------------------------------------------

constexpr double kProbFloor = 1e-12;

/// -(1/N) sum_i sum_j weights[i,j] * log(max(probs[i,j], kProbFloor)).
Tensor weighted_nll(Graph& g, const Tensor& probs, const Tensor& weights);

/// Smooth-L1 of log2((probs . bins) / gt_iso), mean over the batch. Ties the
/// distribution's linear expectation to the labeled ISO.
Tensor expectation_consistency(Graph& g, const Tensor& probs, const std::vector<double>& bins,
                               const std::vector<double>& gt_iso);

/// Smooth-L1 of (pred - target) / scale, mean over the batch. pred: (N) or (N, 1).
Tensor smooth_l1(Graph& g, const Tensor& pred, const std::vector<double>& target, double scale);

/// Scalar sum of squared entries.
Tensor sum_squares(Graph& g, const Tensor& x);

/// Scalar weighted sum of scalar terms.
Tensor scale_add(Graph& g, const std::vector<Tensor>& terms, const std::vector<double>& coeffs);

// ---------------------------------------------------------------------------
// Initialization and gradient checking
// ---------------------------------------------------------------------------

/// Kaiming-uniform fill: U(-sqrt(6/fan_in), sqrt(6/fan_in)).
void kaiming_uniform(Tensor& w, int fan_in, Rng& rng);

struct GradCheckEntry {
  std::string name;
  double max_rel_err = 0.0;
  int checked = 0;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  double max_rel_err = 0.0;
  bool pass = false;
};

/// Central-difference check of d(loss)/d(param) against the recorded
/// backward. make_loss must be deterministic; it is re-evaluated with
/// recording disabled for the numeric probes. At most max_per_tensor
/// randomly chosen entries are checked per parameter tensor.
GradCheckReport grad_check(const std::function<Tensor(Graph&)>& make_loss,
                           const std::vector<std::pair<std::string, Tensor>>& params, double h,
                           double tol, int max_per_tensor, uint64_t seed);

}  // namespace autocam::engine
