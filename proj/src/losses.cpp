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

#include "autocam/losses.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "autocam/engine.hpp"

namespace autocam {

IsoBinWeights iso_bin_weights(double gt_iso, const std::vector<double>& bins, double delta,
                              BinDistance mode) {
  if (!(delta > 0.0)) throw std::invalid_argument("iso_bin_weights: delta must be positive");
  if (bins.size() < 2) throw std::invalid_argument("iso_bin_weights: need at least 2 bins");
  if (!std::is_sorted(bins.begin(), bins.end(), std::less_equal<double>())) {
    throw std::invalid_argument("iso_bin_weights: bins must be strictly ascending");
  }
  if (!(gt_iso > 0.0)) throw std::invalid_argument("iso_bin_weights: gt_iso must be positive");

  IsoBinWeights out;
  out.gt_iso = gt_iso;
  out.delta = delta;
  out.w.resize(bins.size());
  const double gt_log = std::log2(gt_iso);
  for (size_t i = 0; i < bins.size(); ++i) {
    const double dist = mode == BinDistance::Log2 ? std::abs(gt_log - std::log2(bins[i]))
                                                  : std::abs(gt_iso - bins[i]);
    out.w[i] = std::max(kWeightFloor, 1.0 - dist / delta);
  }
  return out;
}

double iso_bin_loss(const std::vector<double>& probs, const IsoBinWeights& weights) {
  if (probs.size() != weights.w.size()) {
    throw std::invalid_argument("iso_bin_loss: probability/weight size mismatch");
  }
  double acc = 0.0;
  for (size_t i = 0; i < probs.size(); ++i) {
    acc -= weights.w[i] * std::log(std::max(probs[i], engine::kProbFloor));
  }
  return acc;
}

double smooth_l1_scalar(double r) {
  const double a = std::abs(r);
  return a < 1.0 ? 0.5 * r * r : a - 0.5;
}

double color_loss_value(double temp_pred, double delta_r_pred, double delta_b_pred,
                        double temp_gt, double delta_r_gt, double delta_b_gt) {
  return smooth_l1_scalar((temp_pred - temp_gt) / kTempLossScale) +
         smooth_l1_scalar((delta_r_pred - delta_r_gt) / kDeltaLossScale) +
         smooth_l1_scalar((delta_b_pred - delta_b_gt) / kDeltaLossScale);
}

double total_loss(double l_exp, double l_color, double l_mod, const LossWeights& lw) {
  if (!(lw.l1 >= 0.0 && lw.l2 >= 0.0 && lw.l3 >= 0.0)) {
    throw std::invalid_argument("total_loss: weights must be nonnegative");
  }
  return lw.l1 * l_exp + lw.l2 * l_color + lw.l3 * l_mod;
}

LossWeights LossBalancer::update(const std::array<double, 3>& component_means) {
  for (size_t i = 0; i < 3; ++i) {
    const double m = std::abs(component_means[i]);
    running_[i] = primed_ ? smoothing_ * running_[i] + (1.0 - smoothing_) * m : m;
  }
  primed_ = true;
  std::array<double, 3> inv;
  double sum = 0.0;
  for (size_t i = 0; i < 3; ++i) {
    inv[i] = 1.0 / std::max(running_[i], 1e-8);
    sum += inv[i];
  }
  weights_.l1 = 3.0 * inv[0] / sum;
  weights_.l2 = 3.0 * inv[1] / sum;
  weights_.l3 = 3.0 - weights_.l1 - weights_.l2;  // exact renormalization
  return weights_;
}

}  // namespace autocam
