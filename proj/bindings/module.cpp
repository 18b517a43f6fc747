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

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "autocam/errors.hpp"
#include "autocam/losses.hpp"
#include "autocam/metrics.hpp"
#include "autocam/quantize.hpp"
#include "autocam/raw.hpp"
#include "autocam/synth.hpp"
#include "autocam/train.hpp"

namespace py = pybind11;
using namespace autocam;

namespace {

py::array_t<uint16_t> samples_array(const RawImage& raw) {
  py::array_t<uint16_t> out({raw.height, raw.width});
  std::copy(raw.samples.begin(), raw.samples.end(), out.mutable_data());
  return out;
}

RawImage raw_from_array(py::array_t<uint16_t, py::array::c_style | py::array::forcecast> a,
                        const CaptureParams& capture, uint16_t black_level,
                        const std::string& cfa) {
  if (a.ndim() != 2) throw std::invalid_argument("samples must be a 2-D array");
  RawImage raw;
  raw.height = static_cast<int>(a.shape(0));
  raw.width = static_cast<int>(a.shape(1));
  raw.black_level = black_level;
  raw.cfa = cfa_pattern_from_string(cfa);
  raw.capture = capture;
  raw.samples.assign(a.data(), a.data() + a.size());
  raw.validate();
  return raw;
}

py::dict planes_dict(const CfaPlanes& planes) {
  auto to_array = [](const Plane& p) {
    py::array_t<uint16_t> out({p.height, p.width});
    std::copy(p.v.begin(), p.v.end(), out.mutable_data());
    return out;
  };
  py::dict d;
  d["r"] = to_array(planes.r);
  d["gr"] = to_array(planes.gr);
  d["gb"] = to_array(planes.gb);
  d["b"] = to_array(planes.b);
  return d;
}

py::dict aggregates_dict(const EvalAggregates& a) {
  py::dict d;
  d["count"] = a.count;
  d["iso_mae_log2"] = a.iso_mae_log2;
  d["iso_mae_units"] = a.iso_mae_units;
  d["top1_acc"] = a.top1_acc;
  d["luminance_dev8"] = a.luminance_dev8;
  d["mean_delta_e"] = a.mean_delta_e;
  d["temp_mae"] = a.temp_mae;
  d["clamp_events"] = a.clamp_events;
  return d;
}

}  // namespace

PYBIND11_MODULE(_autocam, m) {
  m.doc() = "Adaptive ISO / white-balance parameter pipeline (C++ core)";

  py::register_exception<StateError>(m, "StateError");
  py::register_exception<ParseError>(m, "RawParseError");
  py::register_exception<IoError>(m, "AutocamIoError");

  py::class_<CaptureParams>(m, "CaptureParams")
      .def(py::init([](double iso, double shutter_ms, double aperture_f, double focal_mm) {
             return CaptureParams{iso, shutter_ms, aperture_f, focal_mm};
           }),
           py::arg("iso") = 1000.0, py::arg("shutter_ms") = 10.0, py::arg("aperture_f") = 2.0,
           py::arg("focal_mm") = 4.0)
      .def_readwrite("iso", &CaptureParams::iso)
      .def_readwrite("shutter_ms", &CaptureParams::shutter_ms)
      .def_readwrite("aperture_f", &CaptureParams::aperture_f)
      .def_readwrite("focal_mm", &CaptureParams::focal_mm);

  py::class_<RawImage>(m, "RawImage")
      .def(py::init(&raw_from_array), py::arg("samples"),
           py::arg("capture") = CaptureParams{}, py::arg("black_level") = 64,
           py::arg("cfa") = "RGGB")
      .def_property_readonly("width", [](const RawImage& r) { return r.width; })
      .def_property_readonly("height", [](const RawImage& r) { return r.height; })
      .def_property_readonly("black_level", [](const RawImage& r) { return r.black_level; })
      .def_property_readonly("cfa", [](const RawImage& r) { return std::string(to_string(r.cfa)); })
      .def_property_readonly("capture", [](const RawImage& r) { return r.capture; })
      .def_property_readonly("samples", &samples_array)
      .def("mean_luma", &mean_luma);

  m.def("read_raw", &read_raw, py::arg("path"));
  m.def("write_raw", &write_raw, py::arg("raw"), py::arg("path"));
  m.def("decompose_cfa", [](const RawImage& raw) { return planes_dict(decompose_cfa(raw)); },
        py::arg("raw"));
  m.def(
      "recompose_cfa",
      [](py::dict planes, const std::string& pattern) {
        auto to_plane = [&](const char* key) {
          auto a = planes[key].cast<py::array_t<uint16_t, py::array::c_style |
                                                          py::array::forcecast>>();
          Plane p;
          p.height = static_cast<int>(a.shape(0));
          p.width = static_cast<int>(a.shape(1));
          p.v.assign(a.data(), a.data() + a.size());
          return p;
        };
        CfaPlanes cp{to_plane("r"), to_plane("gr"), to_plane("gb"), to_plane("b")};
        const std::vector<uint16_t> mosaic = recompose_cfa(cp, cfa_pattern_from_string(pattern));
        const int h = cp.r.height * 2, w = cp.r.width * 2;
        py::array_t<uint16_t> out({h, w});
        std::copy(mosaic.begin(), mosaic.end(), out.mutable_data());
        return out;
      },
      py::arg("planes"), py::arg("pattern") = "RGGB");
  m.def("mean_luma", &mean_luma, py::arg("raw"));

  m.def("kelvin_to_channel_ratios", &kelvin_to_channel_ratios, py::arg("cct_kelvin"));

  py::class_<SceneSpec>(m, "SceneSpec")
      .def(py::init([](int width, int height, const std::string& family, double scene_gain,
                       uint64_t seed, double flat_level) {
             SceneSpec s;
             s.width = width;
             s.height = height;
             s.family = scene_family_from_string(family);
             s.scene_gain = scene_gain;
             s.seed = seed;
             s.flat_level = flat_level;
             return s;
           }),
           py::arg("width") = 64, py::arg("height") = 64, py::arg("family") = "flat",
           py::arg("scene_gain") = 100.0, py::arg("seed") = 0, py::arg("flat_level") = -1.0);

  m.def(
      "render_raw",
      [](const SceneSpec& scene, double cct_kelvin, const CaptureParams& capture, uint64_t seed,
         bool noise, double read_sigma) {
        return render_raw(scene, IlluminantSpec{cct_kelvin}, capture, seed,
                          RenderOptions{noise, read_sigma});
      },
      py::arg("scene"), py::arg("cct_kelvin"), py::arg("capture") = CaptureParams{},
      py::arg("seed") = 0, py::arg("noise") = true, py::arg("read_sigma") = 2.0);

  m.def(
      "oracle_iso",
      [](const SceneSpec& scene, double cct_kelvin, const std::vector<double>& bins,
         double target_luma, const CaptureParams& capture) {
        const IsoOracleResult r =
            oracle_iso(scene, IlluminantSpec{cct_kelvin}, bins, target_luma, capture);
        return py::make_tuple(r.gt_iso, r.gt_iso_bin);
      },
      py::arg("scene"), py::arg("cct_kelvin"), py::arg("bins"),
      py::arg("target_luma") = kDefaultTargetLuma, py::arg("capture") = CaptureParams{});

  m.def(
      "oracle_wb",
      [](double cct_kelvin, const RawImage& probe, double r_ref, double b_ref) {
        const WbOracleResult r = oracle_wb(IlluminantSpec{cct_kelvin}, probe, r_ref, b_ref);
        return py::make_tuple(r.gt_temp, r.gt_delta_r, r.gt_delta_b);
      },
      py::arg("cct_kelvin"), py::arg("probe"), py::arg("r_ref"), py::arg("b_ref"));

  m.def(
      "generate_dataset",
      [](const std::string& out_dir, int count, uint64_t seed, const std::string& config_path) {
        DatasetConfig cfg;
        if (!config_path.empty()) cfg = DatasetConfig::load(config_path);
        return generate_dataset(cfg, seed, count, out_dir).string();
      },
      py::arg("out_dir"), py::arg("count"), py::arg("seed") = 1, py::arg("config_path") = "");

  m.def(
      "train",
      [](const std::string& manifest, const std::string& out_ckpt, int epochs_total,
         int stage1_epochs, int batch_size, uint64_t seed, int input_size, double lr,
         double p_drop, double consistency, double stop_top1, const std::string& stage) {
        TrainConfig cfg;
        cfg.epochs_total = epochs_total;
        cfg.stage1_epochs = stage1_epochs;
        cfg.batch_size = batch_size;
        cfg.seed = seed;
        cfg.input_size = input_size;
        cfg.lr0 = lr;
        cfg.p_drop = p_drop;
        cfg.iso_consistency_weight = consistency;
        cfg.stop_top1 = stop_top1;
        SampleCache cache(manifest, cfg.input_size);
        py::dict out;
        if (stage == "1") {
          const StageResult r = train_stage1(cache, cfg, out_ckpt);
          out["stage1_epochs_run"] = r.epochs_run;
          out["final_top1"] = r.final_top1;
        } else {
          const std::string s1 = out_ckpt + ".stage1";
          const StageResult r1 = train_stage1(cache, cfg, s1);
          const StageResult r2 = train_stage2(cache, cfg, s1, out_ckpt);
          out["stage1_epochs_run"] = r1.epochs_run;
          out["stage2_epochs_run"] = r2.epochs_run;
          out["final_top1"] = r1.final_top1;
        }
        out["checkpoint"] = out_ckpt;
        return out;
      },
      py::arg("manifest"), py::arg("out_ckpt"), py::arg("epochs_total") = 100,
      py::arg("stage1_epochs") = 40, py::arg("batch_size") = 8, py::arg("seed") = 1,
      py::arg("input_size") = 32, py::arg("lr") = 1e-4, py::arg("p_drop") = 0.2,
      py::arg("consistency") = 8.0, py::arg("stop_top1") = 0.0, py::arg("stage") = "all");

  m.def(
      "evaluate",
      [](const std::string& manifest, const std::string& ckpt, const std::string& mode,
         const std::string& report_out) {
        const EvalMode em = mode == "baseline" ? EvalMode::Baseline
                            : mode == "oracle" ? EvalMode::Oracle
                                               : EvalMode::Model;
        ModelBundle bundle;
        int input_size = 32;
        if (em == EvalMode::Model) {
          bundle = load_model(ckpt);
          input_size = bundle.net_config.input_size;
        }
        SampleCache cache(manifest, input_size);
        const EvalReport rep = evaluate(em == EvalMode::Model ? &bundle : nullptr, cache, em);
        if (!report_out.empty()) write_report(rep, report_out);
        return aggregates_dict(rep.agg);
      },
      py::arg("manifest"), py::arg("ckpt") = "", py::arg("mode") = "model",
      py::arg("report_out") = "");

  m.def(
      "predict",
      [](const std::string& ckpt, const std::string& probe_path, const std::string& capture2) {
        const ModelBundle bundle = load_model(ckpt);
        const RawImage probe = read_raw(probe_path);
        const IsoDistribution dist = exposure_predict(*bundle.exposure, probe, bundle.bins);
        py::dict out;
        out["expected_iso"] = expected_iso(dist);
        out["top_bin"] = top_bin(dist);
        out["probs"] = dist.probs;
        out["bins"] = dist.bins;
        if (!capture2.empty()) {
          if (!bundle.color) throw StateError("checkpoint has no color net (stage 1 only)");
          const RawImage cap = read_raw(capture2);
          const ColorPrediction pred = color_predict(*bundle.color, cap);
          const CfaPlanes planes = decompose_cfa(cap);
          const double g_ref = 0.5 * (channel_mean(planes.gr, cap.black_level) +
                                      channel_mean(planes.gb, cap.black_level));
          const Gains gains = compute_gains(pred, channel_mean(planes.r, cap.black_level),
                                            channel_mean(planes.b, cap.black_level), g_ref,
                                            g_ref);
          out["temp_kelvin"] = pred.temp_kelvin;
          out["delta_r"] = pred.delta_r;
          out["delta_b"] = pred.delta_b;
          out["gain_r"] = gains.r;
          out["gain_b"] = gains.b;
        }
        return out;
      },
      py::arg("ckpt"), py::arg("probe"), py::arg("capture2") = "");

  m.def("quantize_checkpoint", &quantize_checkpoint, py::arg("input"), py::arg("output"));
  m.def(
      "param_count",
      [](const std::string& ckpt) { return load_model(ckpt).param_count(); },
      py::arg("ckpt"));

  m.def("expected_iso", [](const std::vector<double>& bins, const std::vector<double>& probs) {
    return expected_iso(IsoDistribution{bins, probs});
  });
  m.def(
      "iso_bin_weights",
      [](double gt_iso, const std::vector<double>& bins, double delta) {
        return iso_bin_weights(gt_iso, bins, delta).w;
      },
      py::arg("gt_iso"), py::arg("bins"), py::arg("delta") = 1.0);
  m.def("srgb_to_lab", [](double r, double g, double b) {
    const LabColor lab = srgb_to_lab(r, g, b);
    return py::make_tuple(lab.L, lab.a, lab.b);
  });
  m.def("delta_e76", [](py::tuple x, py::tuple y) {
    return delta_e76(LabColor{x[0].cast<double>(), x[1].cast<double>(), x[2].cast<double>()},
                     LabColor{y[0].cast<double>(), y[1].cast<double>(), y[2].cast<double>()});
  });

  m.attr("DEFAULT_BINS") = std::vector<double>{100, 200, 400, 800, 1600, 3200, 6400};
  m.attr("DEFAULT_TARGET_LUMA") = kDefaultTargetLuma;
}
