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

#include <doctest.h>

#include <cmath>
#include <stdexcept>
#include <vector>

#include "autocam/losses.hpp"
#include "autocam/rng.hpp"

using namespace autocam;

namespace {

const std::vector<double> kBins = {100, 200, 400, 800, 1600, 3200, 6400};

// Independent simplex minimizer of the soft-weighted cross-entropy: plain
// gradient descent in logit space with finite-difference gradients only.
std::vector<double> minimize_on_simplex(const std::vector<double>& w, int iters, double lr,
                                        uint64_t seed) {
  const size_t n = w.size();
  Rng rng(seed);
  std::vector<double> z(n);
  for (double& v : z) v = rng.uniform(-0.5, 0.5);
  auto softmax = [&](const std::vector<double>& logits) {
    std::vector<double> p(logits.size());
    double mx = logits[0];
    for (double v : logits) mx = std::max(mx, v);
    double sum = 0;
    for (size_t i = 0; i < logits.size(); ++i) {
      p[i] = std::exp(logits[i] - mx);
      sum += p[i];
    }
    for (double& v : p) v /= sum;
    return p;
  };
  auto loss_of = [&](const std::vector<double>& logits) {
    const std::vector<double> p = softmax(logits);
    double acc = 0.0;
    for (size_t i = 0; i < n; ++i) acc -= w[i] * std::log(std::max(p[i], 1e-300));
    return acc;
  };
  const double h = 1e-6;
  for (int it = 0; it < iters; ++it) {
    std::vector<double> grad(n);
    for (size_t i = 0; i < n; ++i) {
      std::vector<double> zp = z, zm = z;
      zp[i] += h;
      zm[i] -= h;
      grad[i] = (loss_of(zp) - loss_of(zm)) / (2 * h);
    }
    for (size_t i = 0; i < n; ++i) z[i] -= lr * grad[i];
  }
  return softmax(z);
}

}  // namespace

TEST_CASE("iso_bin_weights: exact bin, one stop away, half a stop away") {
  const IsoBinWeights at_bin = iso_bin_weights(800.0, kBins);
  CHECK(at_bin.w[3] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(at_bin.w[2] == doctest::Approx(0.1).epsilon(1e-12));  // 1 stop -> floor
  CHECK(at_bin.w[4] == doctest::Approx(0.1).epsilon(1e-12));
  CHECK(at_bin.w[0] == doctest::Approx(0.1).epsilon(1e-12));

  const IsoBinWeights half = iso_bin_weights(800.0 * std::sqrt(2.0), kBins);
  CHECK(half.w[3] == doctest::Approx(0.5).epsilon(1e-9));
  CHECK(half.w[4] == doctest::Approx(0.5).epsilon(1e-9));
}

TEST_CASE("iso_bin_weights: bounds and argmax location") {
  Rng rng(1);
  for (int trial = 0; trial < 50; ++trial) {
    const double gt = std::exp2(rng.uniform(std::log2(100.0), std::log2(6400.0)));
    const IsoBinWeights w = iso_bin_weights(gt, kBins);
    size_t nearest = 0;
    double best = 1e300;
    double wmax = 0;
    size_t argmax = 0;
    for (size_t i = 0; i < kBins.size(); ++i) {
      CHECK(w.w[i] >= 0.1);
      CHECK(w.w[i] <= 1.0);
      const double d = std::abs(std::log2(gt) - std::log2(kBins[i]));
      if (d < best) {
        best = d;
        nearest = i;
      }
      if (w.w[i] > wmax) {
        wmax = w.w[i];
        argmax = i;
      }
    }
    CHECK(w.w[nearest] == doctest::Approx(wmax).epsilon(1e-12));
    CHECK(argmax == nearest);
  }
}

TEST_CASE("iso_bin_weights: linear distance mode and validation") {
  const IsoBinWeights lin = iso_bin_weights(800.0, kBins, 400.0, BinDistance::Linear);
  CHECK(lin.w[3] == doctest::Approx(1.0));
  CHECK(lin.w[2] == doctest::Approx(0.1));  // |800-400|/400 = 1 -> floor
  CHECK_THROWS_AS(iso_bin_weights(800.0, kBins, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(iso_bin_weights(-5.0, kBins), std::invalid_argument);
}

TEST_CASE("iso_bin_loss: uniform distribution evaluates to log(n) * sum(w)") {
  const IsoBinWeights w = iso_bin_weights(400.0, kBins);
  double wsum = 0;
  for (double v : w.w) wsum += v;
  const std::vector<double> uniform(kBins.size(), 1.0 / kBins.size());
  CHECK(iso_bin_loss(uniform, w) ==
        doctest::Approx(std::log(static_cast<double>(kBins.size())) * wsum).epsilon(1e-12));
}

TEST_CASE("iso_bin_loss: near-one-hot distributions are penalized above the minimum") {
  const IsoBinWeights w = iso_bin_weights(800.0, kBins);
  double wsum = 0;
  for (double v : w.w) wsum += v;
  std::vector<double> pstar(kBins.size());
  for (size_t i = 0; i < kBins.size(); ++i) pstar[i] = w.w[i] / wsum;
  const double lstar = iso_bin_loss(pstar, w);

  std::vector<double> onehot(kBins.size(), 1e-9);
  onehot[3] = 1.0 - 6e-9;
  CHECK(iso_bin_loss(onehot, w) > lstar + 1.0);  // concentration costs loss
}

TEST_CASE("iso_bin_loss: numeric simplex minimizer recovers w / sum(w)") {
  Rng rng(77);
  for (int trial = 0; trial < 5; ++trial) {
    const double gt = std::exp2(rng.uniform(std::log2(100.0), std::log2(6400.0)));
    const IsoBinWeights w = iso_bin_weights(gt, kBins);
    double wsum = 0;
    for (double v : w.w) wsum += v;

    const std::vector<double> p = minimize_on_simplex(w.w, 1500, 0.5, 1000 + trial);
    double max_err = 0;
    for (size_t i = 0; i < p.size(); ++i) {
      max_err = std::max(max_err, std::abs(p[i] - w.w[i] / wsum));
    }
    CHECK(max_err < 1e-6);

    double expected = 0;
    for (size_t i = 0; i < p.size(); ++i) expected -= w.w[i] * std::log(w.w[i] / wsum);
    std::vector<double> pstar(kBins.size());
    for (size_t i = 0; i < kBins.size(); ++i) pstar[i] = w.w[i] / wsum;
    CHECK(std::abs(iso_bin_loss(pstar, w) - expected) < 1e-9);
  }
}

TEST_CASE("iso_bin_loss: random distributions never beat the analytic minimum") {
  Rng rng(78);
  const IsoBinWeights w = iso_bin_weights(1600.0, kBins);
  double wsum = 0;
  for (double v : w.w) wsum += v;
  std::vector<double> pstar(kBins.size());
  for (size_t i = 0; i < kBins.size(); ++i) pstar[i] = w.w[i] / wsum;
  const double lstar = iso_bin_loss(pstar, w);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> p(kBins.size());
    double sum = 0;
    for (double& v : p) {
      v = rng.uniform(1e-6, 1.0);
      sum += v;
    }
    for (double& v : p) v /= sum;
    CHECK(iso_bin_loss(p, w) >= lstar - 1e-9);
  }
}

TEST_CASE("color loss: zero at the labels, 0.5 at one temp-scale of error") {
  CHECK(color_loss_value(5500, 3, -2, 5500, 3, -2) == doctest::Approx(0.0));
  CHECK(color_loss_value(11500, 0, 0, 5500, 0, 0) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(color_loss_value(5500, 50, 0, 5500, 0, 0) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("total_loss: weighted sum and degenerate weights") {
  CHECK(total_loss(2, 3, 4, LossWeights{1, 1, 1}) == doctest::Approx(9.0));
  CHECK(total_loss(2, 3, 4, LossWeights{0, 0, 0}) == doctest::Approx(0.0));
  CHECK(total_loss(2, 3, 4, LossWeights{2, 0.5, 0}) == doctest::Approx(5.5));
  CHECK_THROWS_AS(total_loss(1, 1, 1, LossWeights{-1, 0, 0}), std::invalid_argument);
}

TEST_CASE("loss balancer: weights renormalize to exactly 3") {
  LossBalancer balancer;
  const LossWeights w1 = balancer.update({2.0, 0.5, 0.01});
  CHECK(w1.l1 + w1.l2 + w1.l3 == doctest::Approx(3.0).epsilon(1e-15));
  CHECK(w1.l3 > w1.l1);  // small components get large weights
  const LossWeights w2 = balancer.update({0.1, 0.1, 0.1});
  CHECK(w2.l1 + w2.l2 + w2.l3 == doctest::Approx(3.0).epsilon(1e-15));
}
