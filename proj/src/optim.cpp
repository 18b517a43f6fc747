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

#include "autocam/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace autocam {

Adam::Adam(std::vector<engine::Tensor> params, AdamConfig config)
    : params_(std::move(params)), config_(config) {
  m_.reserve(params_.size());
  v_.reserve(params_.size());
  for (engine::Tensor& p : params_) {
    if (!p.defined()) throw std::invalid_argument("Adam: undefined parameter");
    p.ensure_grad();
    m_.emplace_back(static_cast<size_t>(p.numel()), 0.0);
    v_.emplace_back(static_cast<size_t>(p.numel()), 0.0);
  }
}

void Adam::step(double lr) {
  ++step_count_;
  const double bc1 = 1.0 - std::pow(config_.beta1, static_cast<double>(step_count_));
  const double bc2 = 1.0 - std::pow(config_.beta2, static_cast<double>(step_count_));
  for (size_t pi = 0; pi < params_.size(); ++pi) {
    engine::Tensor& p = params_[pi];
    double* value = p.data();
    const double* grad = p.grad();
    double* m = m_[pi].data();
    double* v = v_[pi].data();
    const int64_t n = p.numel();
    for (int64_t i = 0; i < n; ++i) {
      double gi = grad[i];
      if (config_.weight_decay != 0.0 && !config_.decoupled) gi += config_.weight_decay * value[i];
      m[i] = config_.beta1 * m[i] + (1.0 - config_.beta1) * gi;
      v[i] = config_.beta2 * v[i] + (1.0 - config_.beta2) * gi * gi;
      const double m_hat = m[i] / bc1;
      const double v_hat = v[i] / bc2;
      double update = m_hat / (std::sqrt(v_hat) + config_.eps);
      if (config_.weight_decay != 0.0 && config_.decoupled) {
        update += config_.weight_decay * value[i];
      }
      value[i] -= lr * update;
    }
  }
}

void Adam::zero_grad() {
  for (engine::Tensor& p : params_) p.zero_grad();
}

void Adam::restore_state(size_t i, std::vector<double> m, std::vector<double> v) {
  if (i >= params_.size() || m.size() != m_[i].size() || v.size() != v_[i].size()) {
    throw std::invalid_argument("Adam::restore_state: shape mismatch");
  }
  m_[i] = std::move(m);
  v_[i] = std::move(v);
}

double lr_at(int epoch, int total_epochs, double lr0, double lr_floor) {
  if (total_epochs <= 0) throw std::invalid_argument("lr_at: total_epochs must be positive");
  if (epoch < 0 || epoch > total_epochs) {
    throw std::invalid_argument("lr_at: epoch out of [0, total_epochs]");
  }
  const double t = static_cast<double>(epoch) / total_epochs;
  return lr_floor + (lr0 - lr_floor) * 0.5 * (1.0 + std::cos(3.14159265358979323846 * t));
}

}  // namespace autocam
