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
#include <filesystem>

#include "autocam/quantize.hpp"
#include "autocam/rng.hpp"
#include "autocam/synth.hpp"
#include "autocam/train.hpp"

using namespace autocam;
using engine::Graph;
using engine::Tensor;
namespace fs = std::filesystem;

TEST_CASE("quantize: all-zero tensor gets scale 1 and zero values") {
  const QuantizedTensor qt = quantize_values({0, 0, 0, 0}, {4});
  CHECK(qt.scale == 1.0);
  for (int8_t q : qt.q) CHECK(q == 0);
}

TEST_CASE("quantize: endpoints map to +-127 with scale 1/127") {
  const QuantizedTensor qt = quantize_values({-1.0, 0.0, 1.0}, {3});
  CHECK(qt.scale == doctest::Approx(1.0 / 127.0).epsilon(1e-15));
  CHECK(qt.q[0] == -127);
  CHECK(qt.q[1] == 0);
  CHECK(qt.q[2] == 127);
}

TEST_CASE("quantize: round-trip error bounded by scale/2 for every element") {
  Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> v(257);
    for (double& x : v) x = rng.uniform(-4.0, 4.0);
    const QuantizedTensor qt = quantize_values(v, {257});
    const std::vector<double> back = dequantize(qt);
    for (size_t i = 0; i < v.size(); ++i) {
      CHECK(std::abs(back[i] - v[i]) <= qt.scale / 2.0 + 1e-15);
    }
  }
}

TEST_CASE("quantize: zero maps to zero exactly and quantization is idempotent") {
  Rng rng(4);
  std::vector<double> v(64);
  for (double& x : v) x = rng.uniform(-2.0, 2.0);
  v[7] = 0.0;
  const QuantizedTensor q1 = quantize_values(v, {64});
  CHECK(q1.q[7] == 0);
  const std::vector<double> deq = dequantize(q1);
  CHECK(deq[7] == 0.0);
  const QuantizedTensor q2 = quantize_values(deq, {64});
  CHECK(q2.scale == doctest::Approx(q1.scale).epsilon(1e-15));
  CHECK(q2.q == q1.q);
}

TEST_CASE("quantize: non-finite values rejected") {
  CHECK_THROWS_AS(quantize_values({1.0, std::nan("")}, {2}), std::invalid_argument);
}

TEST_CASE("fake-quantized identity conv stays within scale/2 per element") {
  Tensor w = Tensor::full({1, 1, 1, 1}, 1.0);
  Tensor wq = w.clone();
  fake_quantize(wq);
  Rng rng(5);
  Tensor x = Tensor::zeros({1, 1, 4, 4});
  for (int64_t i = 0; i < x.numel(); ++i) x.data()[i] = rng.uniform(-1, 1);
  Graph g(false);
  Tensor y = engine::conv2d(g, x, w, Tensor(), 1, 0);
  Tensor yq = engine::conv2d(g, x, wq, Tensor(), 1, 0);
  const double scale = 1.0 / 127.0;
  for (int64_t i = 0; i < y.numel(); ++i) {
    CHECK(std::abs(y.data()[i] - yq.data()[i]) <= scale / 2.0);
  }
}

TEST_CASE("quantize_checkpoint: weights become int8, biases stay f64, model loads") {
  DatasetConfig dcfg;
  dcfg.width = 64;
  dcfg.height = 64;
  const fs::path dir = fs::temp_directory_path() / "autocam_quant_ckpt";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const fs::path manifest = generate_dataset(dcfg, 41, 6, dir);
  SampleCache cache(manifest, 32);
  TrainConfig tcfg;
  tcfg.epochs_total = 2;
  tcfg.stage1_epochs = 1;
  tcfg.batch_size = 4;
  tcfg.seed = 3;
  train_stage1(cache, tcfg, dir / "s1.ckpt");
  train_stage2(cache, tcfg, dir / "s1.ckpt", dir / "s2.ckpt");

  const int n = quantize_checkpoint(dir / "s2.ckpt", dir / "s2q.ckpt");
  CHECK(n > 0);
  const Checkpoint ck = load_checkpoint(dir / "s2q.ckpt");
  CHECK(ck.quantized());
  int i8 = 0, f64 = 0;
  for (const CheckpointEntry& e : ck.model) {
    const bool is_weight = e.name.size() > 2 && e.name.rfind(".w") == e.name.size() - 2;
    if (e.dtype == TensorDType::I8) {
      CHECK(is_weight);
      ++i8;
    } else {
      ++f64;
    }
  }
  CHECK(i8 == n);
  CHECK(f64 > 0);
  CHECK(ck.optimizer.empty());

  const ModelBundle bundle = load_model(dir / "s2q.ckpt");
  CHECK(bundle.quantized);
  CHECK(bundle.color != nullptr);

  // Per-tensor round-trip bound against the float model.
  const ModelBundle fb = load_model(dir / "s2.ckpt");
  for (size_t p = 0; p < fb.exposure->params().size(); ++p) {
    const auto& [name, ft] = fb.exposure->params()[p];
    const auto& qt = bundle.exposure->params()[p].second;
    double max_abs = 0.0;
    for (int64_t i = 0; i < ft.numel(); ++i) max_abs = std::max(max_abs, std::abs(ft.data()[i]));
    const bool is_weight = name.size() > 2 && name.rfind(".w") == name.size() - 2;
    const double bound = is_weight ? (max_abs > 0 ? max_abs / 127.0 : 1.0) / 2.0 + 1e-15 : 0.0;
    for (int64_t i = 0; i < ft.numel(); ++i) {
      CHECK(std::abs(ft.data()[i] - qt.data()[i]) <= bound);
    }
  }
}
