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
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "autocam/raw.hpp"

namespace autocam {

// ---------------------------------------------------------------------------
// Illuminant model
// ---------------------------------------------------------------------------

constexpr double kCctMin = 2500.0;
constexpr double kCctMax = 8500.0;

struct IlluminantSpec {
  double cct_kelvin = 6500.0;
  void validate() const;
};

/// Green-relative sensor response ratios (r, b) for a Planck blackbody at the
/// given correlated color temperature.
///
/// The blackbody spectrum is integrated against three Gaussian sensitivity
/// curves (peaks 600/540/460 nm, sigma 40 nm) over 380-780 nm, and the result
/// is normalized so that 6500 K maps to exactly (1, 1). r decreases and b
/// increases monotonically with temperature.
std::pair<double, double> kelvin_to_channel_ratios(double cct_kelvin);

// ---------------------------------------------------------------------------
// Scene + renderer
// ---------------------------------------------------------------------------

enum class SceneFamily : uint8_t { Flat = 0, Gradient = 1, Checker = 2, Patches = 3 };

const char* to_string(SceneFamily f);
SceneFamily scene_family_from_string(const std::string& s);

struct SceneSpec {
  int width = 64;
  int height = 64;
  SceneFamily family = SceneFamily::Flat;
  double scene_gain = 100.0;
  uint64_t seed = 0;        // drives the procedural radiance field
  double flat_level = -1.0;  // >= 0: fixed radiance for Flat scenes (else seeded)
};

/// Procedural relative radiance in [0, 1], row-major width x height.
std::vector<double> radiance_field(const SceneSpec& scene);

struct RenderOptions {
  bool noise = true;
  double read_sigma = 2.0;  // DN
};

/// Linear sensor model. Expected electron count per pixel (1 electron = 1 DN
/// at ISO 1000):
///   e = scene_gain * radiance * ratio_channel * (shutter_ms / 10)
/// Signal DN = e * (iso / 1000); with noise on, e is Poisson-sampled and
/// Gaussian read noise (read_sigma DN) is added post-gain. Offset by the
/// black level, rounded, clipped to [0, 1023]. Deterministic given seed.
RawImage render_raw(const SceneSpec& scene, const IlluminantSpec& illum,
                    const CaptureParams& capture, uint64_t seed,
                    const RenderOptions& opts = {});

/// Analytic (noise-free, pre-quantization) expected channel means in DN above
/// black, accounting for which radiance samples each CFA plane sees.
struct ChannelMeans {
  double r, gr, gb, b;
  double green() const { return 0.5 * (gr + gb); }
  double luma() const { return 0.25 * (r + gr + gb + b); }
};
ChannelMeans expected_channel_means(const SceneSpec& scene, const IlluminantSpec& illum,
                                    const CaptureParams& capture);

// ---------------------------------------------------------------------------
// Label oracles
// ---------------------------------------------------------------------------

/// Mid-gray exposure target: 18% of the usable range above black.
constexpr double kDefaultTargetLuma = 0.18 * (1023.0 - 64.0);

struct IsoOracleResult {
  double gt_iso;
  int gt_iso_bin;
};

/// Renders noise-free at every bin ISO and returns the bin whose mean luma is
/// closest to target_luma. Ties break toward the lower ISO.
IsoOracleResult oracle_iso(const SceneSpec& scene, const IlluminantSpec& illum,
                           const std::vector<double>& bins, double target_luma,
                           const CaptureParams& capture);

struct WbOracleResult {
  double gt_temp;
  double gt_delta_r;
  double gt_delta_b;
};

/// Inverts the gain equation so that the labeled (delta_r, delta_b) reproduce
/// the illuminant-neutralizing gains (1/r_ratio, 1/b_ratio) for the probe.
WbOracleResult oracle_wb(const IlluminantSpec& illum, const RawImage& probe,
                         double r_ref, double b_ref);

// ---------------------------------------------------------------------------
// Dataset generation
// ---------------------------------------------------------------------------

struct DatasetConfig {
  int width = 64;
  int height = 64;
  std::vector<double> bins = {100, 200, 400, 800, 1600, 3200, 6400};
  double cct_min = kCctMin;
  double cct_max = kCctMax;
  double target_luma = kDefaultTargetLuma;
  double gain_jitter = 0.02;  // log-uniform brightness jitter around the target
  bool noise = true;
  double read_sigma = 2.0;
  double shutter_min_ms = 5.0;
  double shutter_max_ms = 20.0;
  double aperture_min = 1.8;
  double aperture_max = 2.8;
  double focal_mm = 4.0;
  std::string ref_mode = "green_mean";  // or "fixed"
  double r_ref = 200.0;                 // used when ref_mode == "fixed"
  double b_ref = 200.0;
  std::vector<SceneFamily> families = {SceneFamily::Flat, SceneFamily::Gradient,
                                       SceneFamily::Checker, SceneFamily::Patches};

  void validate() const;
  std::string to_text() const;                      // key = value form
  static DatasetConfig from_text(const std::string& text);
  static DatasetConfig load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;
};

/// Everything needed to re-render one sample, derived deterministically from
/// (config, per-sample seed).
struct SampleSpec {
  SceneSpec scene;
  IlluminantSpec illum;
  CaptureParams capture;  // probe capture (iso fixed at 1000)
  int target_bin;         // bin the scene brightness was constructed for
};
SampleSpec sample_spec_from_seed(const DatasetConfig& config, uint64_t sample_seed);

/// Reference values for the gain equation, per the configured mode.
std::pair<double, double> reference_values(const DatasetConfig& config, const RawImage& image);

struct ManifestRow {
  std::string path;  // relative to the manifest directory
  double gt_iso = 0;
  int gt_iso_bin = 0;
  double gt_temp = 0;
  double gt_delta_r = 0;
  double gt_delta_b = 0;
  double cct = 0;
  uint64_t seed = 0;
};

struct Dataset {
  std::filesystem::path root;
  DatasetConfig config;
  std::vector<ManifestRow> rows;
};

/// Writes `count` labeled probe captures plus manifest.csv and
/// dataset_config.txt into out_dir. Labels come from the two oracles.
/// Returns the manifest path.
std::filesystem::path generate_dataset(const DatasetConfig& config, uint64_t master_seed,
                                       int count, const std::filesystem::path& out_dir);

Dataset load_dataset(const std::filesystem::path& manifest_path);

/// Re-runs both oracles on every row; returns the number of mismatching rows.
int verify_dataset(const Dataset& ds);

}  // namespace autocam
