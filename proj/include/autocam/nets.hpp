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
#include <string>
#include <utility>
#include <vector>

#include "autocam/engine.hpp"
#include "autocam/raw.hpp"
#include "autocam/rng.hpp"

namespace autocam {

// ---------------------------------------------------------------------------
// Prediction decoding
// ---------------------------------------------------------------------------

/// Soft distribution over discretized ISO bins.
struct IsoDistribution {
  std::vector<double> bins;   // strictly ascending, n >= 2
  std::vector<double> probs;  // nonnegative, sums to 1 within 1e-9
  void validate() const;
};

/// Expectation decode: sum_i p_i * b_i. Always lands in [bins.front(), bins.back()].
double expected_iso(const IsoDistribution& dist);

int top_bin(const IsoDistribution& dist);

struct ColorPrediction {
  double temp_kelvin = 6500.0;
  double delta_r = 0.0;
  double delta_b = 0.0;
};

// ---------------------------------------------------------------------------
// Parameter-aware modulation
// ---------------------------------------------------------------------------

struct ParamRange {
  double lo, hi;
};

inline constexpr ParamRange kShutterRange{0.0, 33.0};
inline constexpr ParamRange kApertureRange{1.4, 16.0};
inline constexpr ParamRange kFocalRange{2.0, 50.0};
inline constexpr ParamRange kIsoRange{100.0, 6400.0};

/// Residual fusion of a capture parameter: with a* = clamp01((a-lo)/(hi-lo)),
/// returns a* + a. Keeps the physical value while bounding the added term.
double modulate_param(double a, ParamRange range);

/// Fused modulation values in the order shutter, aperture, focal, iso.
struct ModulationVector {
  std::array<double, 4> fused{};
  std::array<bool, 4> dropped{};

  static ModulationVector from_capture(const CaptureParams& capture);
};

/// Independently zeroes each entry with probability p_drop (training-time
/// regularization; inference uses p_drop = 0, which is the identity).
ModulationVector channel_drop(const ModulationVector& mods, double p_drop, Rng& rng);

// ---------------------------------------------------------------------------
// Networks
// ---------------------------------------------------------------------------

struct NetConfig {
  int input_size = 32;  // per-plane square input resolution
  int n_bins = 7;
  int mod_dim = 16;  // modulation embedding width
};

using NamedParams = std::vector<std::pair<std::string, engine::Tensor>>;

namespace detail {

struct Conv {
  engine::Tensor w, b;
  int stride = 1;
  int pad = 1;
};

struct ResBlock {
  Conv conv1, conv2, proj;
};

struct Linear {
  engine::Tensor w, b;
};

}  // namespace detail

/// ISO prediction head. Input: the four stacked CFA planes (B, 4, S, S) plus
/// the fused modulation vector (B, 4); output: softmax over n_bins.
/// Topology: stem conv 4->32, four stride-2 residual blocks at widths
/// 32/64/64/128, global average pool, modulation embedding 4->mod_dim
/// concatenated, linear head.
class ExposureNet {
 public:
  ExposureNet(const NetConfig& config, uint64_t seed);

  const NetConfig& config() const { return config_; }
  NamedParams& params() { return params_; }
  const NamedParams& params() const { return params_; }
  int64_t param_count() const;
  engine::Tensor modulation_weight() const { return embed_.w; }

  engine::Tensor forward(engine::Graph& g, const engine::Tensor& planes,
                         const engine::Tensor& mods) const;

 private:
  NetConfig config_;
  detail::Conv stem_;
  std::vector<detail::ResBlock> blocks_;
  detail::Linear embed_, head_;
  engine::Tensor mod_scale_;  // fixed diagonal range normalization, not trained
  NamedParams params_;
};

struct ColorHeads {
  engine::Tensor temp_kelvin;  // (B, 1), already mapped into [2500, 8500]
  engine::Tensor delta_r;      // (B, 1), unconstrained DN offset
  engine::Tensor delta_b;      // (B, 1)
};

/// Color parameter head. Each CFA plane runs through its own stem (1->16) and
/// two stride-2 residual blocks (16->32->32); the pooled branch features and
/// the modulation embedding are concatenated and passed through two hidden
/// layers into three regression heads. The temperature head is a scaled
/// sigmoid onto [2500, 8500] K.
class ColorNet {
 public:
  ColorNet(const NetConfig& config, uint64_t seed);

  const NetConfig& config() const { return config_; }
  NamedParams& params() { return params_; }
  const NamedParams& params() const { return params_; }
  int64_t param_count() const;
  engine::Tensor modulation_weight() const { return embed_.w; }

  ColorHeads forward(engine::Graph& g, const engine::Tensor& planes,
                     const engine::Tensor& mods) const;

 private:
  struct Branch {
    detail::Conv stem;
    detail::ResBlock rb1, rb2;
  };
  NetConfig config_;
  std::array<Branch, 4> branches_;
  detail::Linear embed_, fc1_, fc2_, head_temp_, head_dr_, head_db_;
  engine::Tensor mod_scale_;
  NamedParams params_;
};

int64_t param_count(const NamedParams& params);

// ---------------------------------------------------------------------------
// Input assembly and single-image inference
// ---------------------------------------------------------------------------

/// Decomposes, normalizes to [0, 1] and area-resizes the four CFA planes to
/// input_size x input_size. Plane order: r, gr, gb, b.
std::vector<double> raw_to_input(const RawImage& raw, int input_size);

IsoDistribution exposure_predict(const ExposureNet& net, const RawImage& probe,
                                 const std::vector<double>& bins);

ColorPrediction color_predict(const ColorNet& net, const RawImage& capture);

// ---------------------------------------------------------------------------
// Gain conversion
// ---------------------------------------------------------------------------

constexpr double kGainClampLo = 0.25;
constexpr double kGainClampHi = 8.0;

struct Gains {
  double r = 1.0;
  double b = 1.0;
  int clamp_events = 0;
};

/// R_gain = (R_ref + delta_r) / R_measured and likewise for blue, clamped to
/// [0.25, 8] with clamp events counted.
Gains compute_gains(const ColorPrediction& pred, double r_measured, double b_measured,
                    double r_ref, double b_ref);

}  // namespace autocam
