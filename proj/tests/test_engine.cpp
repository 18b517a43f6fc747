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
#include <vector>

#include "autocam/engine.hpp"

using namespace autocam;
using engine::Graph;
using engine::Tensor;

namespace {

Tensor random_tensor(std::vector<int> shape, Rng& rng, bool requires_grad = false,
                     double lo = -1.0, double hi = 1.0) {
  Tensor t = Tensor::zeros(std::move(shape), requires_grad);
  for (int64_t i = 0; i < t.numel(); ++i) t.data()[i] = rng.uniform(lo, hi);
  return t;
}

// Naive six-loop cross-correlation oracle.
std::vector<double> conv_oracle(const Tensor& x, const Tensor& w, const Tensor& bias, int stride,
                                int pad, int& ho_out, int& wo_out) {
  const int B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  const int O = w.dim(0), KH = w.dim(2), KW = w.dim(3);
  const int HO = (H + 2 * pad - KH) / stride + 1;
  const int WO = (W + 2 * pad - KW) / stride + 1;
  ho_out = HO;
  wo_out = WO;
  std::vector<double> out(static_cast<size_t>(B) * O * HO * WO, 0.0);
  for (int b = 0; b < B; ++b) {
    for (int o = 0; o < O; ++o) {
      for (int oy = 0; oy < HO; ++oy) {
        for (int ox = 0; ox < WO; ++ox) {
          double acc = bias.defined() ? bias.data()[o] : 0.0;
          for (int c = 0; c < C; ++c) {
            for (int ky = 0; ky < KH; ++ky) {
              for (int kx = 0; kx < KW; ++kx) {
                const int iy = oy * stride - pad + ky;
                const int ix = ox * stride - pad + kx;
                if (iy < 0 || iy >= H || ix < 0 || ix >= W) continue;
                acc += x.data()[((static_cast<int64_t>(b) * C + c) * H + iy) * W + ix] *
                       w.data()[((static_cast<int64_t>(o) * C + c) * KH + ky) * KW + kx];
              }
            }
          }
          out[((static_cast<int64_t>(b) * O + o) * HO + oy) * WO + ox] = acc;
        }
      }
    }
  }
  return out;
}

// Scalar loss for gradient checking: a fixed random projection of the output,
// recorded as a custom tape op.
Tensor project(Graph& g, const Tensor& y, uint64_t seed) {
  Rng rng(seed);
  Tensor w = Tensor::zeros({1, static_cast<int>(y.numel())});
  for (int64_t i = 0; i < y.numel(); ++i) w.data()[i] = rng.uniform(-1.0, 1.0);
  double acc = 0.0;
  for (int64_t i = 0; i < y.numel(); ++i) acc += w.data()[i] * y.data()[i];
  Tensor out = Tensor::from_values({1}, {acc});
  if (g.recording() && y.requires_grad()) {
    out.set_requires_grad(true);
    out.ensure_grad();
    g.track_output(out);
    Tensor yc = y, wc = w, oc = out;
    g.record([yc, wc, oc]() mutable {
      yc.ensure_grad();
      const double og = oc.grad()[0];
      for (int64_t i = 0; i < yc.numel(); ++i) yc.grad()[i] += og * wc.data()[i];
    });
  }
  return out;
}

}  // namespace

TEST_CASE("conv2d: 1x1 identity kernel") {
  Rng rng(1);
  Tensor x = random_tensor({1, 1, 4, 4}, rng);
  Tensor w = Tensor::full({1, 1, 1, 1}, 1.0);
  Graph g(false);
  Tensor y = engine::conv2d(g, x, w, Tensor(), 1, 0);
  CHECK(y.shape() == x.shape());
  for (int64_t i = 0; i < x.numel(); ++i) CHECK(y.data()[i] == x.data()[i]);
}

TEST_CASE("conv2d: all-ones 3x3 on all-ones 3x3 input sums to 9") {
  Tensor x = Tensor::full({1, 1, 3, 3}, 1.0);
  Tensor w = Tensor::full({1, 1, 3, 3}, 1.0);
  Graph g(false);
  Tensor y = engine::conv2d(g, x, w, Tensor(), 1, 0);
  CHECK(y.numel() == 1);
  CHECK(y.value() == doctest::Approx(9.0).epsilon(1e-15));
}

TEST_CASE("conv2d matches the naive six-loop oracle") {
  Rng rng(2);
  struct Case {
    int b, c, h, w, o, k, stride, pad;
  };
  const Case cases[] = {{2, 3, 8, 8, 4, 3, 1, 1}, {1, 2, 9, 7, 3, 3, 2, 1},
                        {2, 4, 6, 6, 2, 1, 2, 0}, {1, 1, 5, 5, 1, 5, 1, 2},
                        {3, 2, 8, 10, 5, 3, 3, 0}};
  for (const Case& c : cases) {
    Tensor x = random_tensor({c.b, c.c, c.h, c.w}, rng);
    Tensor w = random_tensor({c.o, c.c, c.k, c.k}, rng);
    Tensor bias = random_tensor({c.o}, rng);
    Graph g(false);
    Tensor y = engine::conv2d(g, x, w, bias, c.stride, c.pad);
    int ho = 0, wo = 0;
    const std::vector<double> ref = conv_oracle(x, w, bias, c.stride, c.pad, ho, wo);
    REQUIRE(y.shape() == std::vector<int>{c.b, c.o, ho, wo});
    double max_diff = 0.0;
    for (int64_t i = 0; i < y.numel(); ++i) {
      max_diff = std::max(max_diff, std::abs(y.data()[i] - ref[static_cast<size_t>(i)]));
    }
    CHECK(max_diff < 1e-12);
  }
}

TEST_CASE("conv2d: shape mismatch names both shapes") {
  Tensor x = Tensor::zeros({1, 3, 8, 8});
  Tensor w = Tensor::zeros({4, 2, 3, 3});
  Graph g(false);
  try {
    engine::conv2d(g, x, w, Tensor(), 1, 1);
    FAIL("expected error");
  } catch (const std::invalid_argument& e) {
    const std::string msg = e.what();
    CHECK(msg.find("(1,3,8,8)") != std::string::npos);
    CHECK(msg.find("(4,2,3,3)") != std::string::npos);
  }
}

TEST_CASE("softmax: equal logits give the uniform distribution") {
  Tensor x = Tensor::full({2, 7}, 3.25);
  Graph g(false);
  Tensor y = engine::softmax(g, x, 1);
  for (int64_t i = 0; i < y.numel(); ++i) {
    CHECK(y.data()[i] == doctest::Approx(1.0 / 7).epsilon(1e-12));
  }
}

TEST_CASE("softmax: rows are nonnegative and sum to one") {
  Rng rng(3);
  Tensor x = random_tensor({5, 9}, rng, false, -30.0, 30.0);
  Graph g(false);
  Tensor y = engine::softmax(g, x, 1);
  for (int r = 0; r < 5; ++r) {
    double sum = 0.0;
    for (int c = 0; c < 9; ++c) {
      const double p = y.data()[r * 9 + c];
      CHECK(p >= 0.0);
      sum += p;
    }
    CHECK(std::abs(sum - 1.0) < 1e-12);
  }
  CHECK_THROWS_AS(engine::softmax(g, x, 2), std::invalid_argument);
}

TEST_CASE("residual_add with zeros is the identity") {
  Rng rng(4);
  Tensor x = random_tensor({2, 3, 4, 4}, rng);
  Tensor z = Tensor::zeros({2, 3, 4, 4});
  Graph g(false);
  Tensor y = engine::residual_add(g, x, z);
  for (int64_t i = 0; i < x.numel(); ++i) CHECK(y.data()[i] == x.data()[i]);
}

TEST_CASE("global_avg_pool: mean of 1..9 is 5") {
  Tensor x = Tensor::from_values({1, 1, 3, 3}, {1, 2, 3, 4, 5, 6, 7, 8, 9});
  Graph g(false);
  Tensor y = engine::global_avg_pool(g, x);
  CHECK(y.value() == doctest::Approx(5.0).epsilon(1e-15));
}

TEST_CASE("avg_pool: 2x2 means and divisibility check") {
  Tensor x = Tensor::from_values({1, 1, 2, 4}, {1, 3, 5, 7, 2, 4, 6, 8});
  Graph g(false);
  Tensor y = engine::avg_pool(g, x, 2);
  CHECK(y.shape() == std::vector<int>{1, 1, 1, 2});
  CHECK(y.data()[0] == doctest::Approx(2.5));
  CHECK(y.data()[1] == doctest::Approx(6.5));
  Tensor odd = Tensor::zeros({1, 1, 3, 4});
  CHECK_THROWS_AS(engine::avg_pool(g, odd, 2), std::invalid_argument);
}

TEST_CASE("concat along the feature axis and its backward split") {
  Tensor a = Tensor::from_values({2, 2}, {1, 2, 3, 4}, true);
  Tensor b = Tensor::from_values({2, 1}, {5, 6}, true);
  Graph g(true);
  Tensor y = engine::concat(g, {a, b}, 1);
  REQUIRE(y.shape() == std::vector<int>{2, 3});
  CHECK(y.data()[2] == 5);
  CHECK(y.data()[5] == 6);
  Tensor loss = engine::sum_squares(g, y);
  g.backward(loss);
  CHECK(a.grad()[0] == doctest::Approx(2.0));
  CHECK(b.grad()[1] == doctest::Approx(12.0));
}

TEST_CASE("backward: gradient of sum(x*x) is 2x and repeats accumulate") {
  Rng rng(5);
  Tensor x = random_tensor({3, 4}, rng, true);
  x.zero_grad();
  Graph g(true);
  Tensor loss = engine::sum_squares(g, x);
  g.backward(loss);
  for (int64_t i = 0; i < x.numel(); ++i) {
    CHECK(x.grad()[i] == doctest::Approx(2.0 * x.data()[i]).epsilon(1e-12));
  }
  // Repeated backward without zeroing accumulates.
  g.backward(loss);
  for (int64_t i = 0; i < x.numel(); ++i) {
    CHECK(x.grad()[i] == doctest::Approx(4.0 * x.data()[i]).epsilon(1e-12));
  }
}

TEST_CASE("backward: unit gradient of a plain sum via linear") {
  Tensor x = Tensor::from_values({1, 6}, {1, 2, 3, 4, 5, 6}, true);
  Tensor w = Tensor::full({1, 6}, 1.0);
  Graph g(true);
  Tensor y = engine::linear(g, x, w, Tensor());
  g.backward(y);
  for (int i = 0; i < 6; ++i) CHECK(x.grad()[i] == doctest::Approx(1.0));
}

TEST_CASE("backward rejects non-scalar losses") {
  Tensor x = Tensor::zeros({2, 2}, true);
  Graph g(true);
  Tensor y = engine::relu(g, x);
  CHECK_THROWS_AS(g.backward(y), std::invalid_argument);
}

TEST_CASE("grad_check: every op passes central differences at 1e-6") {
  Rng rng(6);

  SUBCASE("conv2d stride 1 pad 1") {
    Tensor x = random_tensor({2, 3, 6, 6}, rng, true);
    Tensor w = random_tensor({4, 3, 3, 3}, rng, true);
    Tensor b = random_tensor({4}, rng, true);
    auto make = [&](Graph& g) { return project(g, engine::conv2d(g, x, w, b, 1, 1), 11); };
    const auto report = engine::grad_check(
        make, {{"x", x}, {"w", w}, {"b", b}}, 1e-5, 1e-6, 60, 77);
    CHECK(report.pass);
  }

  SUBCASE("conv2d stride 2 pad 0") {
    Tensor x = random_tensor({1, 2, 7, 7}, rng, true);
    Tensor w = random_tensor({3, 2, 3, 3}, rng, true);
    Tensor b = random_tensor({3}, rng, true);
    auto make = [&](Graph& g) { return project(g, engine::conv2d(g, x, w, b, 2, 0), 12); };
    CHECK(engine::grad_check(make, {{"x", x}, {"w", w}, {"b", b}}, 1e-5, 1e-6, 60, 78).pass);
  }

  SUBCASE("relu away from the kink") {
    Tensor x = random_tensor({3, 5}, rng, true);
    for (int64_t i = 0; i < x.numel(); ++i) {
      if (std::abs(x.data()[i]) < 0.05) x.data()[i] = 0.1;  // nudge away from 0
    }
    auto make = [&](Graph& g) { return project(g, engine::relu(g, x), 13); };
    CHECK(engine::grad_check(make, {{"x", x}}, 1e-6, 1e-6, 30, 79).pass);
  }

  SUBCASE("linear") {
    Tensor x = random_tensor({4, 6}, rng, true);
    Tensor w = random_tensor({3, 6}, rng, true);
    Tensor b = random_tensor({3}, rng, true);
    auto make = [&](Graph& g) { return project(g, engine::linear(g, x, w, b), 14); };
    CHECK(engine::grad_check(make, {{"x", x}, {"w", w}, {"b", b}}, 1e-6, 1e-6, 60, 80).pass);
  }

  SUBCASE("softmax") {
    Tensor x = random_tensor({3, 7}, rng, true, -2.0, 2.0);
    auto make = [&](Graph& g) { return project(g, engine::softmax(g, x, 1), 15); };
    CHECK(engine::grad_check(make, {{"x", x}}, 1e-6, 1e-6, 30, 81).pass);
  }

  SUBCASE("pooling") {
    Tensor x = random_tensor({2, 3, 4, 4}, rng, true);
    auto make_avg = [&](Graph& g) { return project(g, engine::avg_pool(g, x, 2), 16); };
    CHECK(engine::grad_check(make_avg, {{"x", x}}, 1e-6, 1e-6, 40, 82).pass);
    auto make_gap = [&](Graph& g) { return project(g, engine::global_avg_pool(g, x), 17); };
    CHECK(engine::grad_check(make_gap, {{"x", x}}, 1e-6, 1e-6, 40, 83).pass);
  }

  SUBCASE("residual, concat, select, sigmoid, affine") {
    Tensor a = random_tensor({2, 2, 4, 4}, rng, true);
    Tensor b = random_tensor({2, 2, 4, 4}, rng, true);
    auto make = [&](Graph& g) {
      Tensor sum = engine::residual_add(g, a, b);
      Tensor ch = engine::select_channel(g, sum, 1);
      Tensor sg = engine::sigmoid(g, ch);
      Tensor sc = engine::affine(g, sg, 3.0, -1.0);
      Tensor feats = engine::concat(g, {engine::global_avg_pool(g, sc),
                                        engine::global_avg_pool(g, sum)}, 1);
      return project(g, feats, 18);
    };
    CHECK(engine::grad_check(make, {{"a", a}, {"b", b}}, 1e-6, 1e-6, 50, 84).pass);
  }

  SUBCASE("loss heads") {
    Tensor logits = random_tensor({3, 5}, rng, true, -1.5, 1.5);
    Tensor w = random_tensor({3, 5}, rng, false, 0.1, 1.0);
    const std::vector<double> bins = {100, 200, 400, 800, 1600};
    const std::vector<double> gt = {200, 800, 400};
    auto make_nll = [&](Graph& g) {
      return engine::weighted_nll(g, engine::softmax(g, logits, 1), w);
    };
    CHECK(engine::grad_check(make_nll, {{"logits", logits}}, 1e-6, 1e-6, 30, 85).pass);

    auto make_cons = [&](Graph& g) {
      return engine::expectation_consistency(g, engine::softmax(g, logits, 1), bins, gt);
    };
    CHECK(engine::grad_check(make_cons, {{"logits", logits}}, 1e-6, 1e-6, 30, 86).pass);

    Tensor pred = random_tensor({4, 1}, rng, true, -2.0, 2.0);
    const std::vector<double> target = {0.5, -0.25, 1.75, 0.0};
    auto make_sl1 = [&](Graph& g) { return engine::smooth_l1(g, pred, target, 0.7); };
    CHECK(engine::grad_check(make_sl1, {{"pred", pred}}, 1e-6, 1e-6, 10, 87).pass);

    Tensor sq = random_tensor({3, 3}, rng, true);
    auto make_sq = [&](Graph& g) { return engine::sum_squares(g, sq); };
    CHECK(engine::grad_check(make_sq, {{"sq", sq}}, 1e-6, 1e-6, 9, 88).pass);
  }
}

TEST_CASE("grad_check: deliberately corrupted backward fails (negative control)") {
  Rng rng(7);
  Tensor x = random_tensor({2, 3}, rng, true);
  // A broken op: forward computes sum(2x) but backward claims the gradient
  // is 1.9 instead of 2.
  auto make = [&](Graph& g) {
    double acc = 0.0;
    for (int64_t i = 0; i < x.numel(); ++i) acc += 2.0 * x.data()[i];
    Tensor out = Tensor::from_values({1}, {acc});
    if (g.recording()) {
      out.set_requires_grad(true);
      out.ensure_grad();
      g.track_output(out);
      Tensor xc = x, oc = out;
      g.record([xc, oc]() mutable {
        xc.ensure_grad();
        for (int64_t i = 0; i < xc.numel(); ++i) xc.grad()[i] += 1.9 * oc.grad()[0];
      });
    }
    return out;
  };
  CHECK_FALSE(engine::grad_check(make, {{"x", x}}, 1e-6, 1e-6, 6, 89).pass);
}

TEST_CASE("forward passes are bit-deterministic") {
  Rng rng(8);
  Tensor x = random_tensor({2, 4, 8, 8}, rng);
  Tensor w = random_tensor({8, 4, 3, 3}, rng);
  Tensor b = random_tensor({8}, rng);
  Graph g(false);
  Tensor y1 = engine::conv2d(g, x, w, b, 2, 1);
  Tensor y2 = engine::conv2d(g, x, w, b, 2, 1);
  CHECK(y1.values() == y2.values());
}
