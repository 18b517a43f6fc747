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

#include "autocam/errors.hpp"
#include "autocam/metrics.hpp"
#include "autocam/rng.hpp"
#include "autocam/synth.hpp"

using namespace autocam;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const char* leaf) {
  fs::path p = fs::temp_directory_path() / leaf;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

}  // namespace

TEST_CASE("srgb_to_lab: reference white, black and mid gray") {
  const LabColor white = srgb_to_lab(1, 1, 1);
  CHECK(std::abs(white.L - 100.0) < 1e-6);
  CHECK(std::abs(white.a) < 1e-6);
  CHECK(std::abs(white.b) < 1e-6);

  const LabColor black = srgb_to_lab(0, 0, 0);
  CHECK(std::abs(black.L) < 1e-6);
  CHECK(std::abs(black.a) < 1e-6);
  CHECK(std::abs(black.b) < 1e-6);

  // Standard colorimetry anchor: sRGB 0.4663 gray sits at L* = 50.
  const LabColor gray = srgb_to_lab(0.4663, 0.4663, 0.4663);
  CHECK(gray.L == doctest::Approx(50.0).epsilon(2e-4));
  CHECK(std::abs(gray.a) < 1e-9);
  CHECK(std::abs(gray.b) < 1e-9);
}

TEST_CASE("srgb_to_lab round-trips with its inverse away from the toe") {
  Rng rng(1);
  for (int trial = 0; trial < 200; ++trial) {
    const double r = rng.uniform(0.05, 1.0);
    const double g = rng.uniform(0.05, 1.0);
    const double b = rng.uniform(0.05, 1.0);
    const auto back = lab_to_srgb(srgb_to_lab(r, g, b));
    CHECK(std::abs(back[0] - r) < 1e-6);
    CHECK(std::abs(back[1] - g) < 1e-6);
    CHECK(std::abs(back[2] - b) < 1e-6);
  }
}

TEST_CASE("delta_e76: identity, 3-4-5 triangle, metric properties") {
  const LabColor x{50, 0, 0};
  CHECK(delta_e76(x, x) == 0.0);
  CHECK(delta_e76(x, LabColor{50, 3, 4}) == doctest::Approx(5.0).epsilon(1e-12));

  Rng rng(2);
  for (int trial = 0; trial < 100; ++trial) {
    const LabColor a{rng.uniform(0, 100), rng.uniform(-60, 60), rng.uniform(-60, 60)};
    const LabColor b{rng.uniform(0, 100), rng.uniform(-60, 60), rng.uniform(-60, 60)};
    const LabColor c{rng.uniform(0, 100), rng.uniform(-60, 60), rng.uniform(-60, 60)};
    CHECK(delta_e76(a, b) == delta_e76(b, a));
    CHECK(delta_e76(a, b) >= 0.0);
    CHECK(delta_e76(a, c) <= delta_e76(a, b) + delta_e76(b, c) + 1e-12);
  }
}

TEST_CASE("scene_delta_e: zero when gains match, near zero for neutral scenes") {
  SceneSpec scene;
  scene.family = SceneFamily::Flat;
  scene.flat_level = 0.5;
  scene.scene_gain = 350.0;
  const IlluminantSpec illum{6500.0};
  const RawImage img =
      render_raw(scene, illum, CaptureParams{1000, 10, 2, 4}, 0, RenderOptions{false, 0.0});

  const Gains unit{1.0, 1.0, 0};
  CHECK(scene_delta_e(img, unit, unit) == 0.0);

  // Ground-truth gains from the labeling route; at 6500 K they are ~1, so
  // identity gains are nearly perfect.
  const CfaPlanes p = decompose_cfa(img);
  const double g_ref = 0.5 * (channel_mean(p.gr, 64) + channel_mean(p.gb, 64));
  const WbOracleResult wb = oracle_wb(illum, img, g_ref, g_ref);
  const Gains gt = compute_gains(ColorPrediction{wb.gt_temp, wb.gt_delta_r, wb.gt_delta_b},
                                 channel_mean(p.r, 64), channel_mean(p.b, 64), g_ref, g_ref);
  CHECK(scene_delta_e(img, unit, gt) < 0.5);
}

TEST_CASE("scene_delta_e: unit gains under warm light shows a large cast") {
  SceneSpec scene;
  scene.family = SceneFamily::Flat;
  scene.flat_level = 0.5;
  scene.scene_gain = 350.0;
  const IlluminantSpec illum{3000.0};
  const RawImage img =
      render_raw(scene, illum, CaptureParams{1000, 10, 2, 4}, 0, RenderOptions{false, 0.0});
  const CfaPlanes p = decompose_cfa(img);
  const double g_ref = 0.5 * (channel_mean(p.gr, 64) + channel_mean(p.gb, 64));
  const WbOracleResult wb = oracle_wb(illum, img, g_ref, g_ref);
  const Gains gt = compute_gains(ColorPrediction{wb.gt_temp, wb.gt_delta_r, wb.gt_delta_b},
                                 channel_mean(p.r, 64), channel_mean(p.b, 64), g_ref, g_ref);
  // Same order as the reported auto-mode errors (tens of delta E).
  CHECK(scene_delta_e(img, Gains{1.0, 1.0, 0}, gt) > 10.0);
}

TEST_CASE("scene_delta_e: black frame (zero green) rejected") {
  RawImage raw;
  raw.width = 4;
  raw.height = 4;
  raw.samples.assign(16, 64);
  CHECK_THROWS_AS(scene_delta_e(raw, Gains{}, Gains{}), std::invalid_argument);
}

TEST_CASE("luminance_deviation: trivial cases on the 8-bit scale") {
  const double target = kDefaultTargetLuma;
  CHECK(luminance_deviation({target, target, target}, target) == 0.0);
  const double ten = 10.0 / kLumaScale8Bit;  // 10 units on the 8-bit scale, in DN
  CHECK(luminance_deviation({target + ten, target - ten}, target) ==
        doctest::Approx(10.0).epsilon(1e-12));
  CHECK_THROWS_AS(luminance_deviation({}, target), std::invalid_argument);
}

TEST_CASE("evaluate: oracle passthrough reaches the metric floor") {
  DatasetConfig cfg;
  cfg.width = 64;
  cfg.height = 64;
  const fs::path dir = temp_dir("autocam_eval_oracle");
  const fs::path manifest = generate_dataset(cfg, 31, 12, dir);
  SampleCache cache(manifest, 32);

  const EvalReport oracle = evaluate(nullptr, cache, EvalMode::Oracle);
  CHECK(oracle.agg.count == 12);
  CHECK(oracle.agg.iso_mae_log2 == 0.0);  // exact label passthrough
  CHECK(oracle.agg.top1_acc == 1.0);
  CHECK(oracle.agg.mean_delta_e == 0.0);
  CHECK(oracle.agg.luminance_dev8 < 3.0);  // noise floor

  const EvalReport baseline = evaluate(nullptr, cache, EvalMode::Baseline);
  CHECK(baseline.agg.mean_delta_e > oracle.agg.mean_delta_e);
  CHECK(baseline.agg.iso_mae_log2 > oracle.agg.iso_mae_log2);

  // Aggregates equal recomputation from the per-sample records.
  const EvalAggregates re = recompute_aggregates(baseline.samples);
  CHECK(re.iso_mae_log2 == doctest::Approx(baseline.agg.iso_mae_log2).epsilon(1e-12));
  CHECK(re.mean_delta_e == doctest::Approx(baseline.agg.mean_delta_e).epsilon(1e-12));
  CHECK(re.luminance_dev8 == doctest::Approx(baseline.agg.luminance_dev8).epsilon(1e-12));
}

TEST_CASE("evaluate: report write/read round trip and plot data") {
  DatasetConfig cfg;
  cfg.width = 64;
  cfg.height = 64;
  const fs::path dir = temp_dir("autocam_eval_report");
  const fs::path manifest = generate_dataset(cfg, 32, 6, dir);
  SampleCache cache(manifest, 32);
  const EvalReport rep = evaluate(nullptr, cache, EvalMode::Baseline);

  write_report(rep, dir / "report.txt");
  const EvalReport back = read_report(dir / "report.txt");
  REQUIRE(back.samples.size() == rep.samples.size());
  CHECK(back.model_kind == "baseline");
  CHECK(back.agg.mean_delta_e == rep.agg.mean_delta_e);
  CHECK(back.samples[3].pred_iso == rep.samples[3].pred_iso);
  CHECK(back.samples[3].delta_e == rep.samples[3].delta_e);

  write_plot_data(rep, dir / "plots");
  CHECK(fs::exists(dir / "plots" / "iso_pred_vs_gt.txt"));
  CHECK(fs::exists(dir / "plots" / "luminance_deviation.txt"));
  CHECK(fs::exists(dir / "plots" / "delta_e.txt"));
}

TEST_CASE("evaluate: determinism") {
  DatasetConfig cfg;
  cfg.width = 64;
  cfg.height = 64;
  const fs::path dir = temp_dir("autocam_eval_det");
  const fs::path manifest = generate_dataset(cfg, 33, 6, dir);
  SampleCache cache(manifest, 32);
  const EvalReport a = evaluate(nullptr, cache, EvalMode::Baseline);
  const EvalReport b = evaluate(nullptr, cache, EvalMode::Baseline);
  CHECK(a.agg.mean_delta_e == b.agg.mean_delta_e);
  CHECK(a.agg.luminance_dev8 == b.agg.luminance_dev8);
  for (size_t i = 0; i < a.samples.size(); ++i) {
    CHECK(a.samples[i].luma2 == b.samples[i].luma2);
    CHECK(a.samples[i].delta_e == b.samples[i].delta_e);
  }
}
