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

#include "autocam/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "autocam/errors.hpp"
#include "autocam/rng.hpp"

namespace autocam {

namespace {

// Second radiation constant, m*K. Only relative spectral shape matters here.
constexpr double kC2 = 1.4388e-2;

double planck_relative(double lambda_m, double kelvin) {
  const double x = kC2 / (lambda_m * kelvin);
  return 1.0 / (std::pow(lambda_m * 1e9, 5.0) * (std::exp(x) - 1.0));
}

struct SensorResponse {
  double r, g, b;
};

// Rectangle-rule integration over 380-780 nm at 1 nm steps.
SensorResponse integrate_blackbody(double kelvin) {
  constexpr double kPeaks[3] = {600.0, 540.0, 460.0};
  constexpr double kSigma = 40.0;
  SensorResponse acc{0.0, 0.0, 0.0};
  for (int nm = 380; nm <= 780; ++nm) {
    const double radiance = planck_relative(nm * 1e-9, kelvin);
    const double dr = (nm - kPeaks[0]) / kSigma;
    const double dg = (nm - kPeaks[1]) / kSigma;
    const double db = (nm - kPeaks[2]) / kSigma;
    acc.r += radiance * std::exp(-0.5 * dr * dr);
    acc.g += radiance * std::exp(-0.5 * dg * dg);
    acc.b += radiance * std::exp(-0.5 * db * db);
  }
  return acc;
}

std::pair<double, double> raw_ratios(double kelvin) {
  const SensorResponse s = integrate_blackbody(kelvin);
  return {s.r / s.g, s.b / s.g};
}

const CfaOffsets& render_offsets() {
  static const CfaOffsets o = cfa_offsets(CfaPattern::RGGB);
  return o;
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) out.push_back(trim(item));
  if (!s.empty() && s.back() == sep) out.push_back("");
  return out;
}

}  // namespace

void IlluminantSpec::validate() const {
  if (!(cct_kelvin >= kCctMin && cct_kelvin <= kCctMax)) {
    throw std::invalid_argument("cct " + std::to_string(cct_kelvin) + " outside [" +
                                std::to_string(kCctMin) + ", " + std::to_string(kCctMax) + "]");
  }
}

std::pair<double, double> kelvin_to_channel_ratios(double cct_kelvin) {
  if (!(cct_kelvin >= kCctMin && cct_kelvin <= kCctMax)) {
    throw std::invalid_argument("cct " + std::to_string(cct_kelvin) + " outside [" +
                                std::to_string(kCctMin) + ", " + std::to_string(kCctMax) + "]");
  }
  static const std::pair<double, double> norm = raw_ratios(6500.0);
  const auto [r, b] = raw_ratios(cct_kelvin);
  return {r / norm.first, b / norm.second};
}

const char* to_string(SceneFamily f) {
  switch (f) {
    case SceneFamily::Flat: return "flat";
    case SceneFamily::Gradient: return "gradient";
    case SceneFamily::Checker: return "checker";
    case SceneFamily::Patches: return "patches";
  }
  return "?";
}

SceneFamily scene_family_from_string(const std::string& s) {
  if (s == "flat") return SceneFamily::Flat;
  if (s == "gradient") return SceneFamily::Gradient;
  if (s == "checker") return SceneFamily::Checker;
  if (s == "patches") return SceneFamily::Patches;
  throw std::invalid_argument("unknown scene family: " + s);
}

std::vector<double> radiance_field(const SceneSpec& scene) {
  const int w = scene.width, h = scene.height;
  if (w < 4 || h < 4 || w % 2 || h % 2) {
    throw std::invalid_argument("scene dimensions must be even and at least 4x4");
  }
  std::vector<double> field(static_cast<size_t>(w) * h);
  Rng rng(scene.seed);
  switch (scene.family) {
    case SceneFamily::Flat: {
      const double v = scene.flat_level >= 0.0 ? scene.flat_level : rng.uniform(0.25, 0.95);
      if (v > 1.0) throw std::invalid_argument("flat_level must be within [0, 1]");
      std::fill(field.begin(), field.end(), v);
      break;
    }
    case SceneFamily::Gradient: {
      const double a = rng.uniform(0.2, 0.5);
      const double b = rng.uniform(0.6, 1.0);
      const bool horizontal = rng.bounded(2) == 0;
      for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
          const double t = horizontal ? static_cast<double>(x) / (w - 1)
                                      : static_cast<double>(y) / (h - 1);
          field[static_cast<size_t>(y) * w + x] = a + (b - a) * t;
        }
      }
      break;
    }
    case SceneFamily::Checker: {
      const double lo = rng.uniform(0.3, 0.6);
      const double hi = rng.uniform(0.7, 1.0);
      const int tile = 4 << rng.bounded(3);  // 4, 8 or 16
      for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
          const bool odd = ((x / tile) + (y / tile)) & 1;
          field[static_cast<size_t>(y) * w + x] = odd ? hi : lo;
        }
      }
      break;
    }
    case SceneFamily::Patches: {
      constexpr int kGrid = 4;
      std::array<double, kGrid * kGrid> vals;
      for (double& v : vals) v = rng.uniform(0.25, 1.0);
      for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
          const int gy = std::min(kGrid - 1, y * kGrid / h);
          const int gx = std::min(kGrid - 1, x * kGrid / w);
          field[static_cast<size_t>(y) * w + x] = vals[gy * kGrid + gx];
        }
      }
      break;
    }
  }
  return field;
}

RawImage render_raw(const SceneSpec& scene, const IlluminantSpec& illum,
                    const CaptureParams& capture, uint64_t seed, const RenderOptions& opts) {
  illum.validate();
  capture.validate();
  if (!(scene.scene_gain > 0.0) || !std::isfinite(scene.scene_gain)) {
    throw std::invalid_argument("scene_gain must be positive and finite");
  }
  const std::vector<double> field = radiance_field(scene);
  const auto [r_ratio, b_ratio] = kelvin_to_channel_ratios(illum.cct_kelvin);

  // Channel ratio for each position in the 2x2 tile.
  double tile[2][2];
  const CfaOffsets& o = render_offsets();
  tile[o.r_row][o.r_col] = r_ratio;
  tile[o.gr_row][o.gr_col] = 1.0;
  tile[o.gb_row][o.gb_col] = 1.0;
  tile[o.b_row][o.b_col] = b_ratio;

  RawImage raw;
  raw.width = scene.width;
  raw.height = scene.height;
  raw.cfa = CfaPattern::RGGB;
  raw.capture = capture;
  raw.samples.resize(static_cast<size_t>(scene.width) * scene.height);

  const double gain = capture.iso / 1000.0;
  const double exposure = scene.scene_gain * (capture.shutter_ms / 10.0);
  const double black = raw.black_level;
  Rng rng(seed);
  size_t i = 0;
  for (int y = 0; y < scene.height; ++y) {
    for (int x = 0; x < scene.width; ++x, ++i) {
      const double electrons = exposure * field[i] * tile[y & 1][x & 1];
      double signal;
      if (opts.noise) {
        signal = static_cast<double>(rng.poisson(electrons)) * gain +
                 rng.normal() * opts.read_sigma;
      } else {
        signal = electrons * gain;
      }
      const long long dn = std::llround(signal + black);
      raw.samples[i] = static_cast<uint16_t>(std::clamp<long long>(dn, 0, 1023));
    }
  }
  return raw;
}

ChannelMeans expected_channel_means(const SceneSpec& scene, const IlluminantSpec& illum,
                                    const CaptureParams& capture) {
  const std::vector<double> field = radiance_field(scene);
  const auto [r_ratio, b_ratio] = kelvin_to_channel_ratios(illum.cct_kelvin);
  const CfaOffsets& o = render_offsets();
  const int pw = scene.width / 2, ph = scene.height / 2;
  auto plane_mean = [&](int ro, int co) {
    double sum = 0.0;
    for (int y = 0; y < ph; ++y) {
      for (int x = 0; x < pw; ++x) {
        sum += field[static_cast<size_t>(2 * y + ro) * scene.width + (2 * x + co)];
      }
    }
    return sum / (static_cast<double>(pw) * ph);
  };
  const double k = scene.scene_gain * (capture.shutter_ms / 10.0) * (capture.iso / 1000.0);
  return ChannelMeans{k * plane_mean(o.r_row, o.r_col) * r_ratio,
                      k * plane_mean(o.gr_row, o.gr_col),
                      k * plane_mean(o.gb_row, o.gb_col),
                      k * plane_mean(o.b_row, o.b_col) * b_ratio};
}

IsoOracleResult oracle_iso(const SceneSpec& scene, const IlluminantSpec& illum,
                           const std::vector<double>& bins, double target_luma,
                           const CaptureParams& capture) {
  if (bins.empty()) throw std::invalid_argument("oracle_iso: empty bin set");
  if (!std::is_sorted(bins.begin(), bins.end(), std::less_equal<double>())) {
    throw std::invalid_argument("oracle_iso: bins must be strictly ascending");
  }
  RenderOptions noise_free{false, 0.0};
  int best = 0;
  double best_err = 0.0;
  for (size_t k = 0; k < bins.size(); ++k) {
    CaptureParams c = capture;
    c.iso = bins[k];
    const RawImage img = render_raw(scene, illum, c, 0, noise_free);
    const double err = std::abs(mean_luma(img) - target_luma);
    if (k == 0 || err < best_err) {
      best = static_cast<int>(k);
      best_err = err;
    }
  }
  return {bins[best], best};
}

WbOracleResult oracle_wb(const IlluminantSpec& illum, const RawImage& probe, double r_ref,
                         double b_ref) {
  illum.validate();
  const CfaPlanes planes = decompose_cfa(probe);
  const double r_measured = channel_mean(planes.r, probe.black_level);
  const double b_measured = channel_mean(planes.b, probe.black_level);
  if (r_measured <= 0.0 || b_measured <= 0.0) {
    throw std::invalid_argument("oracle_wb: degenerate scene, measured channel mean <= 0");
  }
  const auto [r_ratio, b_ratio] = kelvin_to_channel_ratios(illum.cct_kelvin);
  const double g_r = 1.0 / r_ratio;
  const double g_b = 1.0 / b_ratio;
  return {illum.cct_kelvin, g_r * r_measured - r_ref, g_b * b_measured - b_ref};
}

// ---------------------------------------------------------------------------
// Dataset config
// ---------------------------------------------------------------------------

void DatasetConfig::validate() const {
  if (width < 4 || height < 4 || width % 2 || height % 2) {
    throw std::invalid_argument("dataset dimensions must be even and at least 4x4");
  }
  if (bins.size() < 2) throw std::invalid_argument("need at least 2 ISO bins");
  for (size_t i = 0; i < bins.size(); ++i) {
    if (bins[i] <= 0) throw std::invalid_argument("ISO bins must be positive");
    if (i > 0 && bins[i] <= bins[i - 1]) {
      throw std::invalid_argument("ISO bins must be strictly ascending");
    }
  }
  if (!(cct_min >= kCctMin && cct_max <= kCctMax && cct_min < cct_max)) {
    throw std::invalid_argument("bad cct range");
  }
  if (!(target_luma > 0.0 && target_luma < 959.0)) {
    throw std::invalid_argument("target_luma must be in (0, 959)");
  }
  if (!(shutter_min_ms > 0 && shutter_max_ms >= shutter_min_ms)) {
    throw std::invalid_argument("bad shutter range");
  }
  if (!(aperture_min > 0 && aperture_max >= aperture_min)) {
    throw std::invalid_argument("bad aperture range");
  }
  if (families.empty()) throw std::invalid_argument("scene family mix is empty");
  if (ref_mode != "green_mean" && ref_mode != "fixed") {
    throw std::invalid_argument("ref_mode must be green_mean or fixed");
  }
}

std::string DatasetConfig::to_text() const {
  std::ostringstream os;
  os << "# autocam dataset config v1\n";
  os << "width = " << width << "\n";
  os << "height = " << height << "\n";
  os << "bins = ";
  for (size_t i = 0; i < bins.size(); ++i) os << (i ? "," : "") << format_double(bins[i]);
  os << "\n";
  os << "cct_min = " << format_double(cct_min) << "\n";
  os << "cct_max = " << format_double(cct_max) << "\n";
  os << "target_luma = " << format_double(target_luma) << "\n";
  os << "gain_jitter = " << format_double(gain_jitter) << "\n";
  os << "noise = " << (noise ? 1 : 0) << "\n";
  os << "read_sigma = " << format_double(read_sigma) << "\n";
  os << "shutter_min_ms = " << format_double(shutter_min_ms) << "\n";
  os << "shutter_max_ms = " << format_double(shutter_max_ms) << "\n";
  os << "aperture_min = " << format_double(aperture_min) << "\n";
  os << "aperture_max = " << format_double(aperture_max) << "\n";
  os << "focal_mm = " << format_double(focal_mm) << "\n";
  os << "ref_mode = " << ref_mode << "\n";
  os << "r_ref = " << format_double(r_ref) << "\n";
  os << "b_ref = " << format_double(b_ref) << "\n";
  os << "families = ";
  for (size_t i = 0; i < families.size(); ++i) os << (i ? "," : "") << to_string(families[i]);
  os << "\n";
  return os.str();
}

DatasetConfig DatasetConfig::from_text(const std::string& text) {
  DatasetConfig cfg;
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const size_t eq = t.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("config line " + std::to_string(lineno) + ": expected key = value");
    }
    const std::string key = trim(t.substr(0, eq));
    const std::string val = trim(t.substr(eq + 1));
    try {
      if (key == "width") cfg.width = std::stoi(val);
      else if (key == "height") cfg.height = std::stoi(val);
      else if (key == "bins") {
        cfg.bins.clear();
        for (const std::string& s : split(val, ',')) cfg.bins.push_back(std::stod(s));
      } else if (key == "cct_min") cfg.cct_min = std::stod(val);
      else if (key == "cct_max") cfg.cct_max = std::stod(val);
      else if (key == "target_luma") cfg.target_luma = std::stod(val);
      else if (key == "gain_jitter") cfg.gain_jitter = std::stod(val);
      else if (key == "noise") cfg.noise = std::stoi(val) != 0;
      else if (key == "read_sigma") cfg.read_sigma = std::stod(val);
      else if (key == "shutter_min_ms") cfg.shutter_min_ms = std::stod(val);
      else if (key == "shutter_max_ms") cfg.shutter_max_ms = std::stod(val);
      else if (key == "aperture_min") cfg.aperture_min = std::stod(val);
      else if (key == "aperture_max") cfg.aperture_max = std::stod(val);
      else if (key == "focal_mm") cfg.focal_mm = std::stod(val);
      else if (key == "ref_mode") cfg.ref_mode = val;
      else if (key == "r_ref") cfg.r_ref = std::stod(val);
      else if (key == "b_ref") cfg.b_ref = std::stod(val);
      else if (key == "families") {
        cfg.families.clear();
        for (const std::string& s : split(val, ',')) cfg.families.push_back(scene_family_from_string(s));
      } else {
        throw std::invalid_argument("unknown config key: " + key);
      }
    } catch (const std::invalid_argument&) {
      throw;
    } catch (const std::exception&) {
      throw std::invalid_argument("config line " + std::to_string(lineno) + ": bad value for " + key);
    }
  }
  cfg.validate();
  return cfg;
}

DatasetConfig DatasetConfig::load(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open config: " + path.string());
  std::string text((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return from_text(text);
}

void DatasetConfig::save(const std::filesystem::path& path) const {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw IoError("cannot write config: " + path.string());
  f << to_text();
}

// ---------------------------------------------------------------------------
// Sample construction
// ---------------------------------------------------------------------------

SampleSpec sample_spec_from_seed(const DatasetConfig& config, uint64_t sample_seed) {
  Rng rng(sample_seed);
  SampleSpec s;
  s.scene.width = config.width;
  s.scene.height = config.height;
  s.scene.family = config.families[rng.bounded(config.families.size())];
  s.scene.seed = rng.bits();
  s.illum.cct_kelvin = rng.uniform(config.cct_min, config.cct_max);
  s.capture.iso = 1000.0;  // probe convention
  s.capture.shutter_ms = rng.uniform(config.shutter_min_ms, config.shutter_max_ms);
  s.capture.aperture_f = rng.uniform(config.aperture_min, config.aperture_max);
  s.capture.focal_mm = config.focal_mm;
  s.target_bin = static_cast<int>(rng.bounded(config.bins.size()));
  const double jitter_stops = rng.uniform(-config.gain_jitter, config.gain_jitter);

  // Solve the linear model for the brightness that puts the ideal continuous
  // ISO at the chosen bin (times a small jitter).
  s.scene.scene_gain = 1.0;
  CaptureParams at_bin = s.capture;
  at_bin.iso = config.bins[s.target_bin];
  const double unit_luma = expected_channel_means(s.scene, s.illum, at_bin).luma();
  s.scene.scene_gain = config.target_luma * std::exp2(jitter_stops) / unit_luma;
  return s;
}

std::pair<double, double> reference_values(const DatasetConfig& config, const RawImage& image) {
  if (config.ref_mode == "fixed") return {config.r_ref, config.b_ref};
  const CfaPlanes planes = decompose_cfa(image);
  const double g = 0.5 * (channel_mean(planes.gr, image.black_level) +
                          channel_mean(planes.gb, image.black_level));
  return {g, g};
}

// ---------------------------------------------------------------------------
// Dataset generation and loading
// ---------------------------------------------------------------------------

std::filesystem::path generate_dataset(const DatasetConfig& config, uint64_t master_seed,
                                       int count, const std::filesystem::path& out_dir) {
  config.validate();
  if (count < 0) throw std::invalid_argument("negative sample count");
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec || !std::filesystem::is_directory(out_dir)) {
    throw IoError("cannot create output directory: " + out_dir.string());
  }
  config.save(out_dir / "dataset_config.txt");

  const std::filesystem::path manifest_path = out_dir / "manifest.csv";
  std::ofstream mf(manifest_path, std::ios::trunc);
  if (!mf) throw IoError("cannot write manifest: " + manifest_path.string());
  mf << "path,gt_iso,gt_iso_bin,gt_temp,gt_delta_r,gt_delta_b,cct,seed\n";

  RenderOptions opts{config.noise, config.read_sigma};
  for (int i = 0; i < count; ++i) {
    const uint64_t seed_i = derive_seed(master_seed, static_cast<uint64_t>(i));
    const SampleSpec spec = sample_spec_from_seed(config, seed_i);
    const RawImage probe =
        render_raw(spec.scene, spec.illum, spec.capture, derive_seed(seed_i, "probe"), opts);
    const IsoOracleResult iso = oracle_iso(spec.scene, spec.illum, config.bins,
                                           config.target_luma, spec.capture);
    // White-balance labels come from a well-exposed noise-free reference
    // frame at the labeled ISO. The ISO-1000 probe can saturate for bright
    // scenes, which destroys its channel ratios.
    CaptureParams ref_capture = spec.capture;
    ref_capture.iso = iso.gt_iso;
    const RawImage reference =
        render_raw(spec.scene, spec.illum, ref_capture, 0, RenderOptions{false, 0.0});
    const auto [r_ref, b_ref] = reference_values(config, reference);
    const WbOracleResult wb = oracle_wb(spec.illum, reference, r_ref, b_ref);

    char name[32];
    std::snprintf(name, sizeof(name), "sample_%06d.craw", i);
    write_raw(probe, out_dir / name);
    mf << name << ',' << format_double(iso.gt_iso) << ',' << iso.gt_iso_bin << ','
       << format_double(wb.gt_temp) << ',' << format_double(wb.gt_delta_r) << ','
       << format_double(wb.gt_delta_b) << ',' << format_double(spec.illum.cct_kelvin) << ','
       << seed_i << "\n";
  }
  mf.flush();
  if (!mf) throw IoError("short write on manifest: " + manifest_path.string());
  return manifest_path;
}

Dataset load_dataset(const std::filesystem::path& manifest_path) {
  Dataset ds;
  ds.root = manifest_path.parent_path();
  ds.config = DatasetConfig::load(ds.root / "dataset_config.txt");

  std::ifstream f(manifest_path);
  if (!f) throw IoError("cannot open manifest: " + manifest_path.string());
  std::string line;
  if (!std::getline(f, line)) throw IoError("empty manifest: " + manifest_path.string());
  if (trim(line) != "path,gt_iso,gt_iso_bin,gt_temp,gt_delta_r,gt_delta_b,cct,seed") {
    throw IoError("unexpected manifest header: " + line);
  }
  int lineno = 1;
  while (std::getline(f, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const std::vector<std::string> cols = split(line, ',');
    if (cols.size() != 8) {
      throw IoError("manifest line " + std::to_string(lineno) + ": expected 8 fields, got " +
                    std::to_string(cols.size()));
    }
    ManifestRow row;
    row.path = cols[0];
    row.gt_iso = std::stod(cols[1]);
    row.gt_iso_bin = std::stoi(cols[2]);
    row.gt_temp = std::stod(cols[3]);
    row.gt_delta_r = std::stod(cols[4]);
    row.gt_delta_b = std::stod(cols[5]);
    row.cct = std::stod(cols[6]);
    row.seed = std::stoull(cols[7]);
    ds.rows.push_back(std::move(row));
  }
  return ds;
}

int verify_dataset(const Dataset& ds) {
  int mismatches = 0;
  for (const ManifestRow& row : ds.rows) {
    const SampleSpec spec = sample_spec_from_seed(ds.config, row.seed);
    bool ok = std::abs(spec.illum.cct_kelvin - row.cct) < 1e-9;
    const IsoOracleResult iso = oracle_iso(spec.scene, spec.illum, ds.config.bins,
                                           ds.config.target_luma, spec.capture);
    ok = ok && iso.gt_iso_bin == row.gt_iso_bin && iso.gt_iso == row.gt_iso;
    CaptureParams ref_capture = spec.capture;
    ref_capture.iso = iso.gt_iso;
    const RawImage reference =
        render_raw(spec.scene, spec.illum, ref_capture, 0, RenderOptions{false, 0.0});
    const auto [r_ref, b_ref] = reference_values(ds.config, reference);
    const WbOracleResult wb = oracle_wb(spec.illum, reference, r_ref, b_ref);
    ok = ok && std::abs(wb.gt_temp - row.gt_temp) < 1e-9 &&
         std::abs(wb.gt_delta_r - row.gt_delta_r) < 1e-9 &&
         std::abs(wb.gt_delta_b - row.gt_delta_b) < 1e-9;
    // The stored probe must parse and round-trip cleanly.
    const RawImage probe = read_raw(ds.root / row.path);
    ok = ok && std::abs(probe.capture.iso - 1000.0) < 1e-6;
    if (!ok) ++mismatches;
  }
  return mismatches;
}

}  // namespace autocam
