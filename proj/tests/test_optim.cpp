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

#include "autocam/optim.hpp"

using namespace autocam;
using engine::Tensor;

TEST_CASE("adam: zero gradients leave parameters unchanged") {
  Tensor p = Tensor::from_values({3}, {1.0, -2.0, 0.5}, true);
  p.zero_grad();
  Adam opt({p}, AdamConfig{});
  const std::vector<double> before = p.values();
  for (int i = 0; i < 5; ++i) opt.step();
  CHECK(p.values() == before);
  CHECK(opt.step_count() == 5);
}

TEST_CASE("adam: minimizes a 1-D quadratic within 200 steps") {
  Tensor x = Tensor::from_values({1}, {1.0}, true);
  AdamConfig cfg;
  cfg.lr = 0.1;
  Adam opt({x}, cfg);
  for (int i = 0; i < 200; ++i) {
    x.zero_grad();
    x.grad()[0] = 2.0 * x.data()[0];  // d/dx x^2
    opt.step();
  }
  CHECK(std::abs(x.data()[0]) < 1e-3);
}

TEST_CASE("adam: bit-identical across two identical runs") {
  auto run = [] {
    Tensor x = Tensor::from_values({4}, {0.3, -0.7, 1.1, 0.0}, true);
    AdamConfig cfg;
    cfg.lr = 0.01;
    cfg.weight_decay = 1e-4;
    cfg.decoupled = true;
    Adam opt({x}, cfg);
    for (int i = 1; i <= 10; ++i) {
      x.zero_grad();
      for (int j = 0; j < 4; ++j) x.grad()[j] = std::sin(i * (j + 1.0));
      opt.step();
    }
    return x.values();
  };
  CHECK(run() == run());
}

TEST_CASE("adam vs adamw: decoupled decay changes the trajectory") {
  auto run = [](bool decoupled) {
    Tensor x = Tensor::from_values({1}, {1.0}, true);
    AdamConfig cfg;
    cfg.lr = 0.01;
    cfg.weight_decay = 0.1;
    cfg.decoupled = decoupled;
    Adam opt({x}, cfg);
    for (int i = 0; i < 20; ++i) {
      x.zero_grad();
      x.grad()[0] = 0.5;
      opt.step();
    }
    return x.data()[0];
  };
  CHECK(run(true) != run(false));
}

TEST_CASE("lr_at: cosine endpoints and midpoint") {
  CHECK(lr_at(0, 100, 1e-4, 1e-6) == doctest::Approx(1e-4).epsilon(1e-12));
  CHECK(lr_at(100, 100, 1e-4, 1e-6) == doctest::Approx(1e-6).epsilon(1e-12));
  CHECK(lr_at(50, 100, 1e-4, 1e-6) == doctest::Approx(5.05e-5).epsilon(1e-9));
  CHECK_THROWS_AS(lr_at(-1, 100, 1e-4, 1e-6), std::invalid_argument);
  CHECK_THROWS_AS(lr_at(101, 100, 1e-4, 1e-6), std::invalid_argument);
  // Monotone decay.
  double prev = 1e-4;
  for (int e = 1; e <= 100; ++e) {
    const double lr = lr_at(e, 100, 1e-4, 1e-6);
    CHECK(lr < prev);
    prev = lr;
  }
}
