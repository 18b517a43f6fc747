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
#include <string>
#include <vector>

#include "autocam/engine.hpp"

namespace autocam {

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;
  bool decoupled = false;  // true = AdamW (decay applied to the parameter, not the gradient)
};

/// Adam with bias correction over a fixed parameter list. step() consumes the
/// gradients currently stored on the parameters.
class Adam {
 public:
  Adam(std::vector<engine::Tensor> params, AdamConfig config);

  void step(double lr);
  void step() { step(config_.lr); }
  void zero_grad();

  int64_t step_count() const { return step_count_; }
  const AdamConfig& config() const { return config_; }
  size_t param_count() const { return params_.size(); }

  // State access for checkpointing.
  const std::vector<double>& first_moment(size_t i) const { return m_[i]; }
  const std::vector<double>& second_moment(size_t i) const { return v_[i]; }
  void restore_state(size_t i, std::vector<double> m, std::vector<double> v);
  void set_step_count(int64_t c) { step_count_ = c; }

 private:
  std::vector<engine::Tensor> params_;
  AdamConfig config_;
  std::vector<std::vector<double>> m_, v_;
  int64_t step_count_ = 0;
};

/// Cosine decay from lr0 at epoch 0 to lr_floor at epoch == total_epochs.
double lr_at(int epoch, int total_epochs, double lr0, double lr_floor);

}  // namespace autocam
