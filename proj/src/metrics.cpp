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

#include "autocam/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "autocam/errors.hpp"
#include "autocam/synth.hpp"

namespace autocam {

namespace {

// sRGB -> XYZ (D65). The white point is taken as the matrix row sums so that
// (1,1,1) maps to exactly (100, 0, 0).
constexpr double kM[3][3] = {{0.4124564, 0.3575761, 0.1804375},
                             {0.2126729, 0.7151522, 0.0721750},
                             {0.0193339, 0.1191920, 0.9503041}};
constexpr double kWhite[3] = {kM[0][0] + kM[0][1] + kM[0][2], kM[1][0] + kM[1][1] + kM[1][2],
                              kM[2][0] + kM[2][1] + kM[2][2]};

double srgb_decode(double c) {
  return c <= 0.04045 ? c / 12.92 : std::pow((c + 0.055) / 1.055, 2.4);
}

double srgb_encode(double c) {
  return c <= 0.0031308 ? c * 12.92 : 1.055 * std::pow(c, 1.0 / 2.4) - 0.055;
}

double lab_f(double t) {
  constexpr double d = 6.0 / 29.0;
  return t > d * d * d ? std::cbrt(t) : t / (3.0 * d * d) + 4.0 / 29.0;
}

double lab_f_inv(double t) {
  constexpr double d = 6.0 / 29.0;
  return t > d ? t * t * t : 3.0 * d * d * (t - 4.0 / 29.0);
}

double clamp_unit(double v, bool& clamped) {
  if (v < 0.0 || v > 1.0) clamped = true;
  return std::clamp(v, 0.0, 1.0);
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

LabColor srgb_to_lab(double r, double g, double b) {
  bool clamped = false;
  r = clamp_unit(r, clamped);
  g = clamp_unit(g, clamped);
  b = clamp_unit(b, clamped);
  if (clamped) {
    static bool warned = false;
    if (!warned) {
      warned = true;
      std::fprintf(stderr, "autocam: srgb_to_lab input outside [0,1], clamped (warned once)\n");
    }
  }
  const double lin[3] = {srgb_decode(r), srgb_decode(g), srgb_decode(b)};
  double xyz[3];
  for (int i = 0; i < 3; ++i) {
    xyz[i] = kM[i][0] * lin[0] + kM[i][1] * lin[1] + kM[i][2] * lin[2];
  }
  const double fx = lab_f(xyz[0] / kWhite[0]);
  const double fy = lab_f(xyz[1] / kWhite[1]);
  const double fz = lab_f(xyz[2] / kWhite[2]);
  return LabColor{116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz)};
}

std::array<double, 3> lab_to_srgb(const LabColor& lab) {
  const double fy = (lab.L + 16.0) / 116.0;
  const double fx = fy + lab.a / 500.0;
  const double fz = fy - lab.b / 200.0;
  const double xyz[3] = {lab_f_inv(fx) * kWhite[0], lab_f_inv(fy) * kWhite[1],
                         lab_f_inv(fz) * kWhite[2]};
  // Inverse of kM (sRGB D65).
  constexpr double kInv[3][3] = {{3.2404542, -1.5371385, -0.4985314},
                                 {-0.9692660, 1.8760108, 0.0415560},
                                 {0.0556434, -0.2040259, 1.0572252}};
  std::array<double, 3> out{};
  for (int i = 0; i < 3; ++i) {
    const double lin = kInv[i][0] * xyz[0] + kInv[i][1] * xyz[1] + kInv[i][2] * xyz[2];
    out[static_cast<size_t>(i)] = srgb_encode(std::clamp(lin, 0.0, 1.0));
  }
  return out;
}

double delta_e76(const LabColor& x, const LabColor& y) {
  const double dl = x.L - y.L, da = x.a - y.a, db = x.b - y.b;
  return std::sqrt(dl * dl + da * da + db * db);
}

double scene_delta_e(const RawImage& raw, const Gains& applied, const Gains& reference) {
  const CfaPlanes planes = decompose_cfa(raw);
  const double r = channel_mean(planes.r, raw.black_level);
  const double b = channel_mean(planes.b, raw.black_level);
  const double g = 0.5 * (channel_mean(planes.gr, raw.black_level) +
                          channel_mean(planes.gb, raw.black_level));
  if (g <= 0.0) throw std::invalid_argument("scene_delta_e: zero green mean");
  const LabColor la = srgb_to_lab(r * applied.r / g, 1.0, b * applied.b / g);
  const LabColor lr = srgb_to_lab(r * reference.r / g, 1.0, b * reference.b / g);
  return delta_e76(la, lr);
}

double luminance_deviation(const std::vector<double>& mean_lumas, double target_luma) {
  if (mean_lumas.empty()) throw std::invalid_argument("luminance_deviation: empty set");
  double acc = 0.0;
  for (double l : mean_lumas) acc += std::abs(l - target_luma);
  return acc / mean_lumas.size() * kLumaScale8Bit;
}

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

namespace {

engine::Tensor batch_planes(const std::vector<const std::vector<double>*>& inputs, int s) {
  const int n = static_cast<int>(inputs.size());
  engine::Tensor t = engine::Tensor::zeros({n, 4, s, s});
  const size_t per = static_cast<size_t>(4) * s * s;
  for (int b = 0; b < n; ++b) {
    std::copy(inputs[static_cast<size_t>(b)]->begin(), inputs[static_cast<size_t>(b)]->end(),
              t.data() + static_cast<size_t>(b) * per);
  }
  return t;
}

engine::Tensor batch_mods(const std::vector<ModulationVector>& mods) {
  const int n = static_cast<int>(mods.size());
  engine::Tensor t = engine::Tensor::zeros({n, 4});
  for (int b = 0; b < n; ++b) {
    for (int j = 0; j < 4; ++j) t.data()[b * 4 + j] = mods[static_cast<size_t>(b)].fused[j];
  }
  return t;
}

}  // namespace

EvalReport evaluate(const ModelBundle* bundle, const SampleCache& cache, EvalMode mode) {
  if (cache.size() == 0) throw std::invalid_argument("evaluate: empty dataset");
  const DatasetConfig& dcfg = cache.dataset().config;
  const std::vector<double>& bins = dcfg.bins;
  if (mode == EvalMode::Model) {
    if (!bundle || !bundle->exposure) throw StateError("evaluate: no model loaded");
    if (bundle->bins != bins) {
      throw StateError("evaluate: checkpoint bin set does not match dataset");
    }
    if (!bundle->color) throw StateError("evaluate: checkpoint has no color net (stage 1 only)");
    if (bundle->net_config.input_size != cache.input_size()) {
      throw StateError("evaluate: checkpoint input size does not match sample cache");
    }
  }

  EvalReport report;
  report.model_kind = mode == EvalMode::Model ? "checkpoint"
                      : mode == EvalMode::Baseline ? "baseline" : "oracle";
  const int s = cache.input_size();
  const int n = static_cast<int>(bins.size());
  const double ln2 = std::log(2.0);

  constexpr int kEvalBatch = 16;
  for (int start = 0; start < cache.size(); start += kEvalBatch) {
    const int bsz = std::min(kEvalBatch, cache.size() - start);

    // Stage A: ISO prediction from the probes.
    std::vector<std::vector<double>> probs(static_cast<size_t>(bsz));
    if (mode == EvalMode::Model) {
      std::vector<const std::vector<double>*> inputs;
      std::vector<ModulationVector> mods;
      for (int b = 0; b < bsz; ++b) {
        inputs.push_back(&cache.item(start + b).probe_input);
        mods.push_back(cache.item(start + b).probe_mods);
      }
      engine::Graph g(false);
      engine::Tensor p = bundle->exposure->forward(g, batch_planes(inputs, s), batch_mods(mods));
      for (int b = 0; b < bsz; ++b) {
        probs[static_cast<size_t>(b)].assign(p.data() + static_cast<size_t>(b) * n,
                                             p.data() + static_cast<size_t>(b + 1) * n);
      }
    }

    // Stage B: re-capture and color per sample.
    std::vector<RawImage> captures(static_cast<size_t>(bsz));
    std::vector<SampleEval> evals(static_cast<size_t>(bsz));
    for (int b = 0; b < bsz; ++b) {
      const int i = start + b;
      const SampleCache::Item& item = cache.item(i);
      SampleEval& e = evals[static_cast<size_t>(b)];
      e.index = i;
      e.gt_bin = item.row.gt_iso_bin;
      e.gt_iso = item.row.gt_iso;
      e.temp_gt = item.row.gt_temp;
      e.delta_r_gt = item.row.gt_delta_r;
      e.delta_b_gt = item.row.gt_delta_b;
      if (mode == EvalMode::Model) {
        IsoDistribution dist{bins, probs[static_cast<size_t>(b)]};
        e.pred_iso = expected_iso(dist);
        e.top_bin = top_bin(dist);
      } else if (mode == EvalMode::Baseline) {
        e.pred_iso = 800.0;
        e.top_bin = static_cast<int>(std::min_element(
                        bins.begin(), bins.end(),
                        [](double a, double b2) { return std::abs(a - 800.0) < std::abs(b2 - 800.0); }) -
                    bins.begin());
      } else {
        e.pred_iso = item.row.gt_iso;
        e.top_bin = item.row.gt_iso_bin;
      }
      e.iso_err_log2 = std::abs(std::log(e.pred_iso / e.gt_iso) / ln2);
      const uint64_t cap_seed = derive_seed(item.row.seed, "eval-cap2");
      captures[static_cast<size_t>(b)] = cache.render_capture(i, e.pred_iso, cap_seed);
      e.luma2 = mean_luma(captures[static_cast<size_t>(b)]);
      e.dev8 = std::abs(e.luma2 - dcfg.target_luma) * kLumaScale8Bit;
    }

    // Color predictions for the model mode are batched too.
    std::vector<ColorPrediction> preds(static_cast<size_t>(bsz));
    if (mode == EvalMode::Model) {
      std::vector<std::vector<double>> cap_inputs(static_cast<size_t>(bsz));
      std::vector<const std::vector<double>*> inputs;
      std::vector<ModulationVector> mods;
      for (int b = 0; b < bsz; ++b) {
        cap_inputs[static_cast<size_t>(b)] = raw_to_input(captures[static_cast<size_t>(b)], s);
        inputs.push_back(&cap_inputs[static_cast<size_t>(b)]);
        mods.push_back(ModulationVector::from_capture(captures[static_cast<size_t>(b)].capture));
      }
      engine::Graph g(false);
      ColorHeads heads = bundle->color->forward(g, batch_planes(inputs, s), batch_mods(mods));
      for (int b = 0; b < bsz; ++b) {
        preds[static_cast<size_t>(b)] =
            ColorPrediction{heads.temp_kelvin.data()[b], heads.delta_r.data()[b],
                            heads.delta_b.data()[b]};
      }
    }

    for (int b = 0; b < bsz; ++b) {
      const int i = start + b;
      const SampleCache::Item& item = cache.item(i);
      SampleEval& e = evals[static_cast<size_t>(b)];
      const RawImage& cap = captures[static_cast<size_t>(b)];
      const CfaPlanes planes = decompose_cfa(cap);
      const double r_meas = channel_mean(planes.r, cap.black_level);
      const double b_meas = channel_mean(planes.b, cap.black_level);
      const auto [r_ref, b_ref] = reference_values(dcfg, cap);

      const ColorPrediction gt_pred{item.row.gt_temp, item.row.gt_delta_r, item.row.gt_delta_b};
      const Gains gt_gains = compute_gains(gt_pred, r_meas, b_meas, r_ref, b_ref);

      Gains gains;
      if (mode == EvalMode::Model) {
        e.temp_pred = preds[static_cast<size_t>(b)].temp_kelvin;
        e.delta_r_pred = preds[static_cast<size_t>(b)].delta_r;
        e.delta_b_pred = preds[static_cast<size_t>(b)].delta_b;
        gains = compute_gains(preds[static_cast<size_t>(b)], r_meas, b_meas, r_ref, b_ref);
      } else if (mode == EvalMode::Baseline) {
        e.temp_pred = 6500.0;
        gains = Gains{1.0, 1.0, 0};  // fixed unit gains
      } else {
        e.temp_pred = item.row.gt_temp;
        e.delta_r_pred = item.row.gt_delta_r;
        e.delta_b_pred = item.row.gt_delta_b;
        gains = gt_gains;
      }
      e.gain_r = gains.r;
      e.gain_b = gains.b;
      e.gt_gain_r = gt_gains.r;
      e.gt_gain_b = gt_gains.b;
      e.clamp_events = gains.clamp_events;
      e.delta_e = scene_delta_e(cap, gains, gt_gains);
      report.samples.push_back(e);
    }
  }

  report.agg = recompute_aggregates(report.samples);
  return report;
}

EvalAggregates recompute_aggregates(const std::vector<SampleEval>& samples) {
  EvalAggregates a;
  a.count = static_cast<int>(samples.size());
  if (samples.empty()) return a;
  double dev_sum = 0.0;
  for (const SampleEval& e : samples) {
    a.iso_mae_log2 += e.iso_err_log2;
    a.iso_mae_units += std::abs(e.pred_iso - e.gt_iso);
    a.top1_acc += e.top_bin == e.gt_bin ? 1.0 : 0.0;
    dev_sum += e.dev8;
    a.mean_delta_e += e.delta_e;
    a.temp_mae += std::abs(e.temp_pred - e.temp_gt);
    a.clamp_events += e.clamp_events;
  }
  const double n = static_cast<double>(samples.size());
  a.iso_mae_log2 /= n;
  a.iso_mae_units /= n;
  a.top1_acc /= n;
  a.luminance_dev8 = dev_sum / n;
  a.mean_delta_e /= n;
  a.temp_mae /= n;
  return a;
}

// ---------------------------------------------------------------------------
// Report I/O
// ---------------------------------------------------------------------------

void write_report(const EvalReport& report, const std::filesystem::path& path) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw IoError("cannot write report: " + path.string());
  f << "# autocam eval report v1\n";
  f << "# defs delta_e=cie76 luminance_scale=255/959 iso_decode=expectation\n";
  f << "model=" << report.model_kind << "\n";
  f << "count=" << report.samples.size() << "\n";
  for (const SampleEval& e : report.samples) {
    f << "sample index=" << e.index << " gt_bin=" << e.gt_bin << " gt_iso=" << fmt(e.gt_iso)
      << " pred_iso=" << fmt(e.pred_iso) << " top_bin=" << e.top_bin
      << " iso_err_log2=" << fmt(e.iso_err_log2) << " luma2=" << fmt(e.luma2)
      << " dev8=" << fmt(e.dev8) << " delta_e=" << fmt(e.delta_e)
      << " temp_pred=" << fmt(e.temp_pred) << " temp_gt=" << fmt(e.temp_gt)
      << " dr_pred=" << fmt(e.delta_r_pred) << " dr_gt=" << fmt(e.delta_r_gt)
      << " db_pred=" << fmt(e.delta_b_pred) << " db_gt=" << fmt(e.delta_b_gt)
      << " gain_r=" << fmt(e.gain_r) << " gain_b=" << fmt(e.gain_b)
      << " gt_gain_r=" << fmt(e.gt_gain_r) << " gt_gain_b=" << fmt(e.gt_gain_b)
      << " clamps=" << e.clamp_events << "\n";
  }
  const EvalAggregates& a = report.agg;
  f << "aggregate count=" << a.count << " iso_mae_log2=" << fmt(a.iso_mae_log2)
    << " iso_mae_units=" << fmt(a.iso_mae_units) << " top1=" << fmt(a.top1_acc)
    << " lum_dev8=" << fmt(a.luminance_dev8) << " mean_delta_e=" << fmt(a.mean_delta_e)
    << " temp_mae=" << fmt(a.temp_mae) << " clamp_events=" << a.clamp_events << "\n";
  if (!f) throw IoError("short write on report: " + path.string());
}

namespace {

std::map<std::string, std::string> parse_kv(const std::string& line, size_t from) {
  std::map<std::string, std::string> kv;
  std::istringstream is(line.substr(from));
  std::string tok;
  while (is >> tok) {
    const size_t eq = tok.find('=');
    if (eq != std::string::npos) kv[tok.substr(0, eq)] = tok.substr(eq + 1);
  }
  return kv;
}

}  // namespace

EvalReport read_report(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open report: " + path.string());
  EvalReport report;
  std::string line;
  while (std::getline(f, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (line.rfind("model=", 0) == 0) {
      report.model_kind = line.substr(6);
    } else if (line.rfind("sample ", 0) == 0) {
      auto kv = parse_kv(line, 7);
      SampleEval e;
      e.index = std::stoi(kv.at("index"));
      e.gt_bin = std::stoi(kv.at("gt_bin"));
      e.gt_iso = std::stod(kv.at("gt_iso"));
      e.pred_iso = std::stod(kv.at("pred_iso"));
      e.top_bin = std::stoi(kv.at("top_bin"));
      e.iso_err_log2 = std::stod(kv.at("iso_err_log2"));
      e.luma2 = std::stod(kv.at("luma2"));
      e.dev8 = std::stod(kv.at("dev8"));
      e.delta_e = std::stod(kv.at("delta_e"));
      e.temp_pred = std::stod(kv.at("temp_pred"));
      e.temp_gt = std::stod(kv.at("temp_gt"));
      e.delta_r_pred = std::stod(kv.at("dr_pred"));
      e.delta_r_gt = std::stod(kv.at("dr_gt"));
      e.delta_b_pred = std::stod(kv.at("db_pred"));
      e.delta_b_gt = std::stod(kv.at("db_gt"));
      e.gain_r = std::stod(kv.at("gain_r"));
      e.gain_b = std::stod(kv.at("gain_b"));
      e.gt_gain_r = std::stod(kv.at("gt_gain_r"));
      e.gt_gain_b = std::stod(kv.at("gt_gain_b"));
      e.clamp_events = std::stoi(kv.at("clamps"));
      report.samples.push_back(e);
    } else if (line.rfind("aggregate ", 0) == 0) {
      auto kv = parse_kv(line, 10);
      report.agg.count = std::stoi(kv.at("count"));
      report.agg.iso_mae_log2 = std::stod(kv.at("iso_mae_log2"));
      report.agg.iso_mae_units = std::stod(kv.at("iso_mae_units"));
      report.agg.top1_acc = std::stod(kv.at("top1"));
      report.agg.luminance_dev8 = std::stod(kv.at("lum_dev8"));
      report.agg.mean_delta_e = std::stod(kv.at("mean_delta_e"));
      report.agg.temp_mae = std::stod(kv.at("temp_mae"));
      report.agg.clamp_events = std::stoi(kv.at("clamp_events"));
    }
  }
  return report;
}

void write_plot_data(const EvalReport& report, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create plot data directory: " + dir.string());
  {
    std::ofstream f(dir / "iso_pred_vs_gt.txt", std::ios::trunc);
    f << "# x: ground-truth ISO, y: predicted ISO\n";
    for (const SampleEval& e : report.samples) f << fmt(e.gt_iso) << " " << fmt(e.pred_iso) << "\n";
  }
  {
    std::ofstream f(dir / "luminance_deviation.txt", std::ios::trunc);
    f << "# x: sample index, y: |mean luma - target| (8-bit scale)\n";
    for (const SampleEval& e : report.samples) f << e.index << " " << fmt(e.dev8) << "\n";
  }
  {
    std::ofstream f(dir / "delta_e.txt", std::ios::trunc);
    f << "# x: sample index, y: CIE76 delta E vs ground-truth gains\n";
    for (const SampleEval& e : report.samples) f << e.index << " " << fmt(e.delta_e) << "\n";
  }
}

}  // namespace autocam
