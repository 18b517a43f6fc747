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

#include <array>
#include <vector>

namespace autocam {

constexpr double kWeightFloor = 0.1;
constexpr double kTempLossScale = 6000.0;  // Kelvin span per unit residual
constexpr double kDeltaLossScale = 50.0;   // DN per unit residual
constexpr double kModRegWeight = 1e-4;

enum class BinDistance { Log2, Linear };

/// Per-bin emphasis weights around the labeled ISO:
///   w_i = max(0.1, 1 - |gt - b_i| / delta)
/// with the distance taken in log2(ISO) by default (delta in stops).
struct IsoBinWeights {
  std::vector<double> w;
  double gt_iso = 0.0;
  double delta = 1.0;
};

IsoBinWeights iso_bin_weights(double gt_iso, const std::vector<double>& bins, double delta = 1.0,
                              BinDistance mode = BinDistance::Log2);

/// Soft-weighted cross-entropy over one distribution: -sum_i w_i log(p_i),
/// probabilities floored at 1e-12. Engine-side batched version lives in
/// engine.hpp (weighted_nll).
double iso_bin_loss(const std::vector<double>& probs, const IsoBinWeights& weights);

double smooth_l1_scalar(double r);

/// Sum of smooth-L1 terms on normalized residuals (temp / 6000 K, deltas / 50 DN).
double color_loss_value(double temp_pred, double delta_r_pred, double delta_b_pred,
                        double temp_gt, double delta_r_gt, double delta_b_gt);

struct LossWeights {
  double l1 = 1.0;
  double l2 = 1.0;
  double l3 = 1.0;
};

double total_loss(double l_exp, double l_color, double l_mod, const LossWeights& lw);

/// Optional dynamic loss weighting: each lambda is proportional to the
/// inverse running mean of its component, renormalized so the three sum to 3.
class LossBalancer {
 public:
  explicit LossBalancer(double smoothing = 0.9) : smoothing_(smoothing) {}
  LossWeights update(const std::array<double, 3>& component_means);
  const LossWeights& weights() const { return weights_; }

 private:
  double smoothing_;
  std::array<double, 3> running_{0.0, 0.0, 0.0};
  bool primed_ = false;
  LossWeights weights_{};
};

}  // namespace autocam
