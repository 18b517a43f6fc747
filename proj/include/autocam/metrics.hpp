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
#include <filesystem>
#include <string>
#include <vector>

#include "autocam/nets.hpp"
#include "autocam/raw.hpp"
#include "autocam/train.hpp"

namespace autocam {

// ---------------------------------------------------------------------------
// Colorimetry
// ---------------------------------------------------------------------------

struct LabColor {
  double L = 0.0;
  double a = 0.0;
  double b = 0.0;
};

/// sRGB (gamma-encoded, components clamped to [0, 1] with a one-time warning)
/// -> linear -> XYZ (D65) -> CIE L*a*b*. Reference white maps to (100, 0, 0).
LabColor srgb_to_lab(double r, double g, double b);

/// Inverse of srgb_to_lab; provided so round trips are testable.
std::array<double, 3> lab_to_srgb(const LabColor& lab);

/// CIE76 color difference: Euclidean distance in L*a*b*.
double delta_e76(const LabColor& x, const LabColor& y);

/// Gray-patch color error of applying `applied` white-balance gains instead
/// of `reference` gains to the image's channel means. Both variants are
/// normalized by the green mean and compared in Lab.
double scene_delta_e(const RawImage& raw, const Gains& applied, const Gains& reference);

/// 8-bit-equivalent scale for luminance deviation numbers.
constexpr double kLumaScale8Bit = 255.0 / 959.0;

/// Mean over images of |mean_luma - target_luma|, reported on the 8-bit scale.
double luminance_deviation(const std::vector<double>& mean_lumas, double target_luma);

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

struct SampleEval {
  int index = 0;
  int gt_bin = 0;
  double gt_iso = 0;
  double pred_iso = 0;
  int top_bin = 0;
  double iso_err_log2 = 0;
  double luma2 = 0;  // mean luma of the second capture, DN
  double dev8 = 0;
  double delta_e = 0;
  double temp_pred = 0, temp_gt = 0;
  double delta_r_pred = 0, delta_r_gt = 0;
  double delta_b_pred = 0, delta_b_gt = 0;
  double gain_r = 1, gain_b = 1, gt_gain_r = 1, gt_gain_b = 1;
  int clamp_events = 0;
};

struct EvalAggregates {
  int count = 0;
  double iso_mae_log2 = 0;
  double iso_mae_units = 0;
  double top1_acc = 0;
  double luminance_dev8 = 0;
  double mean_delta_e = 0;
  double temp_mae = 0;
  int clamp_events = 0;
};

struct EvalReport {
  std::string model_kind;  // "checkpoint", "baseline" or "oracle"
  EvalAggregates agg;
  std::vector<SampleEval> samples;
};

enum class EvalMode {
  Model,     // exposure + color networks from a checkpoint
  Baseline,  // constant prediction: ISO 800, unit gains, 6500 K
  Oracle,    // labels fed back (upper bound)
};

/// Runs the two-capture protocol per sample: probe -> ISO distribution ->
/// expectation decode -> re-render at the predicted ISO -> color prediction
/// -> gains -> metrics. `bundle` is required for EvalMode::Model and must
/// carry a color net whose bin set matches the dataset.
EvalReport evaluate(const ModelBundle* bundle, const SampleCache& cache, EvalMode mode);

EvalAggregates recompute_aggregates(const std::vector<SampleEval>& samples);

void write_report(const EvalReport& report, const std::filesystem::path& path);
EvalReport read_report(const std::filesystem::path& path);

/// Writes per-sample (x, y) series for the ISO, luminance-deviation and
/// delta-E comparisons into dir.
void write_plot_data(const EvalReport& report, const std::filesystem::path& dir);

}  // namespace autocam
