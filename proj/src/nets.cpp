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

#include "autocam/nets.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "autocam/synth.hpp"

namespace autocam {

using engine::Graph;
using engine::Tensor;

// ---------------------------------------------------------------------------
// Decoding
// ---------------------------------------------------------------------------

void IsoDistribution::validate() const {
  if (bins.size() < 2 || bins.size() != probs.size()) {
    throw std::invalid_argument("IsoDistribution: need n >= 2 matching bins/probs");
  }
  for (size_t i = 1; i < bins.size(); ++i) {
    if (bins[i] <= bins[i - 1]) {
      throw std::invalid_argument("IsoDistribution: bins must be strictly ascending");
    }
  }
  double sum = 0.0;
  for (double p : probs) {
    if (p < 0.0) throw std::invalid_argument("IsoDistribution: negative probability");
    sum += p;
  }
  if (std::abs(sum - 1.0) > 1e-9) {
    throw std::invalid_argument("IsoDistribution: probabilities sum to " + std::to_string(sum));
  }
}

double expected_iso(const IsoDistribution& dist) {
  dist.validate();
  double y = 0.0;
  for (size_t i = 0; i < dist.bins.size(); ++i) y += dist.probs[i] * dist.bins[i];
  return y;
}

int top_bin(const IsoDistribution& dist) {
  dist.validate();
  return static_cast<int>(std::max_element(dist.probs.begin(), dist.probs.end()) -
                          dist.probs.begin());
}

// ---------------------------------------------------------------------------
// Modulation
// ---------------------------------------------------------------------------

double modulate_param(double a, ParamRange range) {
  if (!(range.hi > range.lo)) {
    throw std::invalid_argument("modulate_param: range hi must exceed lo");
  }
  const double normalized = std::clamp((a - range.lo) / (range.hi - range.lo), 0.0, 1.0);
  return normalized + a;
}

ModulationVector ModulationVector::from_capture(const CaptureParams& capture) {
  ModulationVector m;
  m.fused = {modulate_param(capture.shutter_ms, kShutterRange),
             modulate_param(capture.aperture_f, kApertureRange),
             modulate_param(capture.focal_mm, kFocalRange),
             modulate_param(capture.iso, kIsoRange)};
  return m;
}

ModulationVector channel_drop(const ModulationVector& mods, double p_drop, Rng& rng) {
  if (!(p_drop >= 0.0 && p_drop <= 1.0)) {
    throw std::invalid_argument("channel_drop: p_drop must be in [0, 1]");
  }
  if (p_drop == 0.0) return mods;
  ModulationVector out = mods;
  for (size_t i = 0; i < out.fused.size(); ++i) {
    if (rng.uniform() < p_drop) {
      out.fused[i] = 0.0;
      out.dropped[i] = true;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Layer construction helpers
// ---------------------------------------------------------------------------

namespace {

detail::Conv make_conv(NamedParams& reg, const std::string& name, int cout, int cin, int k,
                       int stride, int pad, Rng& rng) {
  detail::Conv c;
  c.w = Tensor::zeros({cout, cin, k, k}, true);
  engine::kaiming_uniform(c.w, cin * k * k, rng);
  c.b = Tensor::zeros({cout}, true);
  c.stride = stride;
  c.pad = pad;
  reg.emplace_back(name + ".w", c.w);
  reg.emplace_back(name + ".b", c.b);
  return c;
}

detail::ResBlock make_resblock(NamedParams& reg, const std::string& name, int cin, int cout,
                               int stride, Rng& rng) {
  detail::ResBlock b;
  b.conv1 = make_conv(reg, name + ".conv1", cout, cin, 3, stride, 1, rng);
  b.conv2 = make_conv(reg, name + ".conv2", cout, cout, 3, 1, 1, rng);
  b.proj = make_conv(reg, name + ".proj", cout, cin, 1, stride, 0, rng);
  return b;
}

detail::Linear make_linear(NamedParams& reg, const std::string& name, int out, int in, Rng& rng) {
  detail::Linear l;
  l.w = Tensor::zeros({out, in}, true);
  engine::kaiming_uniform(l.w, in, rng);
  l.b = Tensor::zeros({out}, true);
  reg.emplace_back(name + ".w", l.w);
  reg.emplace_back(name + ".b", l.b);
  return l;
}

Tensor apply_conv(Graph& g, const detail::Conv& c, const Tensor& x) {
  return engine::conv2d(g, x, c.w, c.b, c.stride, c.pad);
}

Tensor apply_resblock(Graph& g, const detail::ResBlock& b, const Tensor& x) {
  Tensor y = engine::relu(g, apply_conv(g, b.conv1, x));
  y = apply_conv(g, b.conv2, y);
  Tensor shortcut = apply_conv(g, b.proj, x);
  return engine::relu(g, engine::residual_add(g, y, shortcut));
}

void check_planes_input(const Tensor& planes, int input_size) {
  if (!planes.defined() || planes.rank() != 4 || planes.dim(1) != 4 ||
      planes.dim(2) != input_size || planes.dim(3) != input_size) {
    throw std::invalid_argument("network input must be (B, 4, " + std::to_string(input_size) +
                                ", " + std::to_string(input_size) + ")");
  }
}

void check_mods_input(const Tensor& mods, int batch) {
  if (!mods.defined() || mods.rank() != 2 || mods.dim(0) != batch || mods.dim(1) != 4) {
    throw std::invalid_argument("modulation input must be (B, 4)");
  }
}

// The fused values keep their physical units, which span four orders of
// magnitude across the parameter set. The embedding sees them divided by
// each range's upper bound so initial activations stay O(1).
Tensor make_mod_scale() {
  Tensor t = Tensor::zeros({4, 4});
  const double scales[4] = {1.0 / kShutterRange.hi, 1.0 / kApertureRange.hi,
                            1.0 / kFocalRange.hi, 1.0 / kIsoRange.hi};
  for (int i = 0; i < 4; ++i) t.data()[i * 4 + i] = scales[i];
  return t;
}

}  // namespace

// ---------------------------------------------------------------------------
// ExposureNet
// ---------------------------------------------------------------------------

ExposureNet::ExposureNet(const NetConfig& config, uint64_t seed) : config_(config) {
  if (config.n_bins < 2) throw std::invalid_argument("ExposureNet: need at least 2 bins");
  if (config.input_size < 16 || config.input_size % 16 != 0) {
    throw std::invalid_argument("ExposureNet: input_size must be a positive multiple of 16");
  }
  Rng rng(seed);
  stem_ = make_conv(params_, "stem", 32, 4, 3, 1, 1, rng);
  const int widths[4] = {32, 64, 64, 128};
  int cin = 32;
  for (int i = 0; i < 4; ++i) {
    blocks_.push_back(make_resblock(params_, "rb" + std::to_string(i + 1), cin, widths[i], 2, rng));
    cin = widths[i];
  }
  embed_ = make_linear(params_, "mod_embed", config.mod_dim, 4, rng);
  head_ = make_linear(params_, "head", config.n_bins, 128 + config.mod_dim, rng);
  mod_scale_ = make_mod_scale();
}

int64_t ExposureNet::param_count() const { return autocam::param_count(params_); }

Tensor ExposureNet::forward(Graph& g, const Tensor& planes, const Tensor& mods) const {
  check_planes_input(planes, config_.input_size);
  check_mods_input(mods, planes.dim(0));
  Tensor x = engine::relu(g, apply_conv(g, stem_, planes));
  for (const detail::ResBlock& b : blocks_) x = apply_resblock(g, b, x);
  Tensor feat = engine::global_avg_pool(g, x);
  Tensor scaled = engine::linear(g, mods, mod_scale_, Tensor());
  Tensor emb = engine::linear(g, scaled, embed_.w, embed_.b);
  Tensor cat = engine::concat(g, {feat, emb}, 1);
  Tensor logits = engine::linear(g, cat, head_.w, head_.b);
  return engine::softmax(g, logits, 1);
}

// ---------------------------------------------------------------------------
// ColorNet
// ---------------------------------------------------------------------------

ColorNet::ColorNet(const NetConfig& config, uint64_t seed) : config_(config) {
  if (config.input_size < 8 || config.input_size % 8 != 0) {
    throw std::invalid_argument("ColorNet: input_size must be a positive multiple of 8");
  }
  Rng rng(seed);
  static const char* kBranchNames[4] = {"branch_r", "branch_gr", "branch_gb", "branch_b"};
  for (int i = 0; i < 4; ++i) {
    Branch& br = branches_[static_cast<size_t>(i)];
    const std::string base = kBranchNames[i];
    br.stem = make_conv(params_, base + ".stem", 16, 1, 3, 1, 1, rng);
    br.rb1 = make_resblock(params_, base + ".rb1", 16, 32, 2, rng);
    br.rb2 = make_resblock(params_, base + ".rb2", 32, 32, 2, rng);
  }
  embed_ = make_linear(params_, "mod_embed", config.mod_dim, 4, rng);
  fc1_ = make_linear(params_, "fc1", 128, 4 * 32 + config.mod_dim, rng);
  fc2_ = make_linear(params_, "fc2", 64, 128, rng);
  head_temp_ = make_linear(params_, "head_temp", 1, 64, rng);
  head_dr_ = make_linear(params_, "head_dr", 1, 64, rng);
  head_db_ = make_linear(params_, "head_db", 1, 64, rng);
  mod_scale_ = make_mod_scale();
}

int64_t ColorNet::param_count() const { return autocam::param_count(params_); }

ColorHeads ColorNet::forward(Graph& g, const Tensor& planes, const Tensor& mods) const {
  check_planes_input(planes, config_.input_size);
  check_mods_input(mods, planes.dim(0));
  std::vector<Tensor> feats;
  feats.reserve(5);
  for (int c = 0; c < 4; ++c) {
    const Branch& br = branches_[static_cast<size_t>(c)];
    Tensor x = engine::select_channel(g, planes, c);
    x = engine::relu(g, apply_conv(g, br.stem, x));
    x = apply_resblock(g, br.rb1, x);
    x = apply_resblock(g, br.rb2, x);
    feats.push_back(engine::global_avg_pool(g, x));
  }
  Tensor scaled = engine::linear(g, mods, mod_scale_, Tensor());
  feats.push_back(engine::linear(g, scaled, embed_.w, embed_.b));
  Tensor cat = engine::concat(g, feats, 1);
  Tensor h = engine::relu(g, engine::linear(g, cat, fc1_.w, fc1_.b));
  h = engine::relu(g, engine::linear(g, h, fc2_.w, fc2_.b));
  ColorHeads out;
  Tensor temp_raw = engine::linear(g, h, head_temp_.w, head_temp_.b);
  out.temp_kelvin = engine::affine(g, engine::sigmoid(g, temp_raw), kCctMax - kCctMin, kCctMin);
  out.delta_r = engine::linear(g, h, head_dr_.w, head_dr_.b);
  out.delta_b = engine::linear(g, h, head_db_.w, head_db_.b);
  return out;
}

int64_t param_count(const NamedParams& params) {
  int64_t n = 0;
  for (const auto& [name, t] : params) n += t.numel();
  return n;
}

// ---------------------------------------------------------------------------
// Input assembly and inference
// ---------------------------------------------------------------------------

std::vector<double> raw_to_input(const RawImage& raw, int input_size) {
  const CfaPlanes planes = decompose_cfa(raw);
  std::vector<double> out;
  out.reserve(static_cast<size_t>(4) * input_size * input_size);
  for (const Plane* p : {&planes.r, &planes.gr, &planes.gb, &planes.b}) {
    std::vector<double> unit = plane_to_unit(*p, raw.black_level, raw.bit_depth);
    std::vector<double> resized = area_resize(unit, p->width, p->height, input_size, input_size);
    out.insert(out.end(), resized.begin(), resized.end());
  }
  return out;
}

IsoDistribution exposure_predict(const ExposureNet& net, const RawImage& probe,
                                 const std::vector<double>& bins) {
  if (static_cast<int>(bins.size()) != net.config().n_bins) {
    throw std::invalid_argument("exposure_predict: bin count does not match network head");
  }
  const int s = net.config().input_size;
  Tensor planes = Tensor::from_values({1, 4, s, s}, raw_to_input(probe, s));
  const ModulationVector mods = ModulationVector::from_capture(probe.capture);
  Tensor mt = Tensor::from_values({1, 4}, {mods.fused[0], mods.fused[1], mods.fused[2],
                                           mods.fused[3]});
  Graph g(false);
  Tensor probs = net.forward(g, planes, mt);
  IsoDistribution dist;
  dist.bins = bins;
  dist.probs = probs.values();
  return dist;
}

ColorPrediction color_predict(const ColorNet& net, const RawImage& capture) {
  const int s = net.config().input_size;
  Tensor planes = Tensor::from_values({1, 4, s, s}, raw_to_input(capture, s));
  const ModulationVector mods = ModulationVector::from_capture(capture.capture);
  Tensor mt = Tensor::from_values({1, 4}, {mods.fused[0], mods.fused[1], mods.fused[2],
                                           mods.fused[3]});
  Graph g(false);
  ColorHeads heads = net.forward(g, planes, mt);
  return ColorPrediction{heads.temp_kelvin.value(), heads.delta_r.value(),
                         heads.delta_b.value()};
}

Gains compute_gains(const ColorPrediction& pred, double r_measured, double b_measured,
                    double r_ref, double b_ref) {
  if (!(r_measured > 0.0) || !(b_measured > 0.0)) {
    throw std::invalid_argument("compute_gains: measured channel means must be positive");
  }
  Gains g;
  double r = (r_ref + pred.delta_r) / r_measured;
  double b = (b_ref + pred.delta_b) / b_measured;
  if (r < kGainClampLo || r > kGainClampHi) {
    r = std::clamp(r, kGainClampLo, kGainClampHi);
    ++g.clamp_events;
  }
  if (b < kGainClampLo || b > kGainClampHi) {
    b = std::clamp(b, kGainClampLo, kGainClampHi);
    ++g.clamp_events;
  }
  g.r = r;
  g.b = b;
  return g;
}

}  // namespace autocam
