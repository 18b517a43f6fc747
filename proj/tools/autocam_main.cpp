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

#include <CLI11.hpp>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "autocam/errors.hpp"
#include "autocam/metrics.hpp"
#include "autocam/quantize.hpp"
#include "autocam/raw.hpp"
#include "autocam/synth.hpp"
#include "autocam/train.hpp"

namespace fs = std::filesystem;
using namespace autocam;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitIo = 3;
constexpr int kExitState = 4;

constexpr int64_t kParamBudget = 2'300'000;

struct GenDataArgs {
  std::string out, config;
  int count = 0;
  uint64_t seed = 1;
  bool verify = false;
};

struct TrainArgs {
  std::string data, out, stage = "all", stage1_ckpt, resume, log;
  TrainConfig config;
};

struct PredictArgs {
  std::string model, raw, raw2;
  bool porcelain = false;
};

struct EvalArgs {
  std::string model, data, out, plot_dir, drift_against;
  bool baseline = false;
  bool oracle = false;
};

struct QuantizeArgs {
  std::string in, out;
};

struct InspectArgs {
  std::string model, raw;
};

int run_gen_data(const GenDataArgs& args) {
  DatasetConfig cfg;
  if (!args.config.empty()) cfg = DatasetConfig::load(args.config);
  const fs::path manifest = generate_dataset(cfg, args.seed, args.count, args.out);
  const Dataset ds = load_dataset(manifest);
  std::vector<int> per_bin(cfg.bins.size(), 0);
  for (const ManifestRow& row : ds.rows) per_bin[static_cast<size_t>(row.gt_iso_bin)]++;
  std::cout << "manifest=" << manifest.string() << "\n";
  std::cout << "samples=" << ds.rows.size() << "\n";
  for (size_t i = 0; i < cfg.bins.size(); ++i) {
    std::cout << "bin_" << cfg.bins[i] << "=" << per_bin[i] << "\n";
  }
  if (args.verify) {
    const int bad = verify_dataset(ds);
    std::cout << "verify_mismatches=" << bad << "\n";
    if (bad != 0) return kExitState;
  }
  return kExitOk;
}

int run_train(const TrainArgs& args) {
  if (!fs::exists(args.data)) {
    throw std::invalid_argument("manifest not found: " + args.data);
  }
  SampleCache cache(args.data, args.config.input_size);
  std::ofstream log_file;
  std::ostream* log = &std::cout;
  if (!args.log.empty()) {
    log_file.open(args.log, std::ios::trunc);
    if (!log_file) throw IoError("cannot open log file: " + args.log);
    log = &log_file;
  }

  if (args.stage == "1") {
    const StageResult res = train_stage1(cache, args.config, args.out, args.resume, log);
    std::cout << "stage1_epochs_run=" << res.epochs_run << " final_top1=" << res.final_top1
              << " checkpoint=" << args.out << "\n";
  } else if (args.stage == "2") {
    if (args.stage1_ckpt.empty()) {
      throw StateError("--stage 2 requires --stage1-ckpt");
    }
    const StageResult res = train_stage2(cache, args.config, args.stage1_ckpt, args.out, log);
    std::cout << "stage2_epochs_run=" << res.epochs_run << " checkpoint=" << args.out << "\n";
  } else if (args.stage == "all") {
    const fs::path s1 = args.out + ".stage1";
    const StageResult r1 = train_stage1(cache, args.config, s1, args.resume, log);
    const StageResult r2 = train_stage2(cache, args.config, s1, args.out, log);
    std::cout << "stage1_epochs_run=" << r1.epochs_run << " stage2_epochs_run=" << r2.epochs_run
              << " checkpoint=" << args.out << "\n";
  } else {
    throw std::invalid_argument("--stage must be 1, 2 or all");
  }
  return kExitOk;
}

int run_predict(const PredictArgs& args) {
  const ModelBundle bundle = load_model(args.model);
  const RawImage probe = read_raw(args.raw);
  const bool iso_warning = std::abs(probe.capture.iso - 1000.0) > 1e-6;
  if (iso_warning) {
    std::fprintf(stderr, "warning: probe captured at ISO %g, expected 1000\n",
                 probe.capture.iso);
  }
  const IsoDistribution dist = exposure_predict(*bundle.exposure, probe, bundle.bins);
  const double iso = expected_iso(dist);
  const int top = top_bin(dist);

  if (args.porcelain) {
    std::printf("expected_iso=%.17g\n", iso);
    std::printf("top_bin=%d\n", top);
    std::printf("top_bin_iso=%.17g\n", dist.bins[static_cast<size_t>(top)]);
    for (size_t i = 0; i < dist.probs.size(); ++i) std::printf("p_%zu=%.17g\n", i, dist.probs[i]);
    std::printf("probe_iso_warning=%d\n", iso_warning ? 1 : 0);
  } else {
    std::printf("expected ISO: %.1f\n", iso);
    std::printf("top bin: %d (ISO %g)\n", top, dist.bins[static_cast<size_t>(top)]);
    std::printf("distribution:");
    for (size_t i = 0; i < dist.probs.size(); ++i) {
      std::printf(" %g:%.4f", dist.bins[i], dist.probs[i]);
    }
    std::printf("\n");
  }

  if (!args.raw2.empty()) {
    if (!bundle.color) {
      throw StateError("checkpoint has no color net (stage 1 only), cannot use --raw2");
    }
    const RawImage capture = read_raw(args.raw2);
    const ColorPrediction pred = color_predict(*bundle.color, capture);
    const CfaPlanes planes = decompose_cfa(capture);
    const double r_meas = channel_mean(planes.r, capture.black_level);
    const double b_meas = channel_mean(planes.b, capture.black_level);
    const double g_ref = 0.5 * (channel_mean(planes.gr, capture.black_level) +
                                channel_mean(planes.gb, capture.black_level));
    const Gains gains = compute_gains(pred, r_meas, b_meas, g_ref, g_ref);
    if (args.porcelain) {
      std::printf("temp=%.17g\n", pred.temp_kelvin);
      std::printf("delta_r=%.17g\n", pred.delta_r);
      std::printf("delta_b=%.17g\n", pred.delta_b);
      std::printf("gain_r=%.17g\n", gains.r);
      std::printf("gain_b=%.17g\n", gains.b);
      std::printf("clamp_events=%d\n", gains.clamp_events);
    } else {
      std::printf("temp: %.0f K\n", pred.temp_kelvin);
      std::printf("delta_r: %.2f DN, delta_b: %.2f DN\n", pred.delta_r, pred.delta_b);
      std::printf("gains: r %.4f, b %.4f%s\n", gains.r, gains.b,
                  gains.clamp_events ? " (clamped)" : "");
    }
  }
  return kExitOk;
}

int run_eval(const EvalArgs& args) {
  if (args.baseline && args.oracle) {
    throw std::invalid_argument("--baseline and --oracle are mutually exclusive");
  }
  const EvalMode mode = args.baseline ? EvalMode::Baseline
                        : args.oracle ? EvalMode::Oracle
                                      : EvalMode::Model;
  ModelBundle bundle;
  int input_size = 32;
  if (mode == EvalMode::Model) {
    if (args.model.empty()) throw std::invalid_argument("--model required without --baseline/--oracle");
    bundle = load_model(args.model);
    input_size = bundle.net_config.input_size;
  }
  if (!fs::exists(args.data)) throw std::invalid_argument("manifest not found: " + args.data);
  SampleCache cache(args.data, input_size);
  const EvalReport report = evaluate(mode == EvalMode::Model ? &bundle : nullptr, cache, mode);

  const EvalAggregates& a = report.agg;
  std::printf("model=%s count=%d\n", report.model_kind.c_str(), a.count);
  std::printf("iso_mae_log2=%.6g iso_mae_units=%.6g top1=%.6g\n", a.iso_mae_log2,
              a.iso_mae_units, a.top1_acc);
  std::printf("lum_dev8=%.6g mean_delta_e=%.6g temp_mae=%.6g clamp_events=%d\n",
              a.luminance_dev8, a.mean_delta_e, a.temp_mae, a.clamp_events);

  if (!args.out.empty()) write_report(report, args.out);
  if (!args.plot_dir.empty()) write_plot_data(report, args.plot_dir);
  if (!args.drift_against.empty()) {
    const EvalReport other = read_report(args.drift_against);
    if (other.samples.size() != report.samples.size()) {
      throw StateError("drift reference has a different sample count");
    }
    int within = 0;
    for (size_t i = 0; i < report.samples.size(); ++i) {
      const double shift =
          std::abs(std::log2(report.samples[i].pred_iso / other.samples[i].pred_iso));
      if (shift <= 1.0) ++within;
    }
    std::printf("drift_samples=%zu drift_iso_within_1bin=%.6g drift_delta_e_change=%.6g\n",
                report.samples.size(),
                static_cast<double>(within) / report.samples.size(),
                report.agg.mean_delta_e - other.agg.mean_delta_e);
  }
  return kExitOk;
}

int run_quantize(const QuantizeArgs& args) {
  const int n = quantize_checkpoint(args.in, args.out);
  std::printf("quantized_tensors=%d out=%s\n", n, args.out.c_str());
  return kExitOk;
}

int run_inspect(const InspectArgs& args) {
  if (args.model.empty() == args.raw.empty()) {
    throw std::invalid_argument("inspect needs exactly one of --model or --raw");
  }
  if (!args.raw.empty()) {
    const RawImage raw = read_raw(args.raw);
    std::printf("width=%d height=%d bit_depth=%d cfa=%s black_level=%u\n", raw.width,
                raw.height, raw.bit_depth, to_string(raw.cfa), raw.black_level);
    std::printf("iso=%g shutter_ms=%g aperture_f=%g focal_mm=%g\n", raw.capture.iso,
                raw.capture.shutter_ms, raw.capture.aperture_f, raw.capture.focal_mm);
    uint16_t lo = 1023, hi = 0;
    for (uint16_t s : raw.samples) {
      lo = std::min(lo, s);
      hi = std::max(hi, s);
    }
    std::printf("min=%u max=%u mean_luma=%.3f\n", lo, hi, mean_luma(raw));
    return kExitOk;
  }

  const Checkpoint ck = load_checkpoint(args.model);
  std::printf("epoch=%u version_quantized=%d\n", ck.epoch, ck.quantized() ? 1 : 0);
  int64_t trainable = 0;
  for (const CheckpointEntry& e : ck.model) {
    std::string shape = "(";
    for (size_t i = 0; i < e.shape.size(); ++i) {
      shape += (i ? "," : "") + std::to_string(e.shape[i]);
    }
    shape += ")";
    std::printf("tensor name=%s shape=%s dtype=%s numel=%lld\n", e.name.c_str(), shape.c_str(),
                e.dtype == TensorDType::F64 ? "f64" : "i8",
                static_cast<long long>(e.numel()));
    if (e.name.rfind("meta.", 0) != 0) trainable += e.numel();
  }
  std::printf("trainable_params=%lld\n", static_cast<long long>(trainable));
  const bool ok = trainable < kParamBudget;
  std::printf("param_budget=%lld param_budget_ok=%d\n", static_cast<long long>(kParamBudget),
              ok ? 1 : 0);
  return ok ? kExitOk : kExitState;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"autocam: adaptive ISO / white-balance parameter pipeline"};
  app.require_subcommand(1);

  GenDataArgs gen;
  CLI::App* gen_cmd = app.add_subcommand("gen-data", "Generate a labeled synthetic dataset");
  gen_cmd->add_option("--out", gen.out, "Output directory")->required();
  gen_cmd->add_option("--count", gen.count, "Number of samples")->required();
  gen_cmd->add_option("--seed", gen.seed, "Master seed");
  gen_cmd->add_option("--config", gen.config, "Dataset config file (key = value)");
  gen_cmd->add_flag("--verify", gen.verify, "Re-run both label oracles on every row");

  TrainArgs train;
  CLI::App* train_cmd = app.add_subcommand("train", "Train the exposure/color networks");
  train_cmd->add_option("--data", train.data, "Dataset manifest")->required();
  train_cmd->add_option("--out", train.out, "Output checkpoint")->required();
  train_cmd->add_option("--stage", train.stage, "1, 2 or all (default all)");
  train_cmd->add_option("--stage1-ckpt", train.stage1_ckpt, "Stage-1 checkpoint for --stage 2");
  train_cmd->add_option("--resume", train.resume, "Resume stage 1 from this checkpoint");
  train_cmd->add_option("--epochs", train.config.epochs_total, "Total epochs (default 100)");
  train_cmd->add_option("--stage1-epochs", train.config.stage1_epochs,
                        "Epochs for stage 1 (default 40)");
  train_cmd->add_option("--batch", train.config.batch_size, "Batch size (default 8)");
  train_cmd->add_option("--lr", train.config.lr0, "Initial learning rate (default 1e-4)");
  train_cmd->add_option("--lr-floor", train.config.lr_floor, "Cosine floor (default 1e-6)");
  train_cmd->add_option("--input-size", train.config.input_size,
                        "Per-plane network input resolution (default 32)");
  train_cmd->add_option("--seed", train.config.seed, "Training seed");
  train_cmd->add_option("--p-drop", train.config.p_drop, "Modulation channel drop rate");
  train_cmd->add_option("--consistency", train.config.iso_consistency_weight,
                        "Expectation-consistency weight (default 8)");
  train_cmd->add_option("--stop-top1", train.config.stop_top1,
                        "Stop stage 1 early at this clean train accuracy");
  train_cmd->add_option("--weight-decay", train.config.weight_decay, "Weight decay");
  bool plain_adam = false;
  train_cmd->add_flag("--plain-adam", plain_adam, "Couple weight decay into the gradient");
  train_cmd->add_flag("--dynamic-lambda", train.config.dynamic_lambda,
                      "Rebalance loss weights per epoch");
  train_cmd->add_option("--lambda1", train.config.lambdas.l1, "Exposure loss weight");
  train_cmd->add_option("--lambda2", train.config.lambdas.l2, "Color loss weight");
  train_cmd->add_option("--lambda3", train.config.lambdas.l3, "Modulation loss weight");
  train_cmd->add_option("--log", train.log, "Write the epoch log to this file");

  PredictArgs predict;
  CLI::App* predict_cmd = app.add_subcommand("predict", "Predict parameters for a probe frame");
  predict_cmd->add_option("--model", predict.model, "Checkpoint")->required();
  predict_cmd->add_option("--raw", predict.raw, "Probe .craw (ISO 1000)")->required();
  predict_cmd->add_option("--raw2", predict.raw2, "Second capture for color prediction");
  predict_cmd->add_flag("--porcelain", predict.porcelain, "Machine-readable key=value output");

  EvalArgs eval;
  CLI::App* eval_cmd = app.add_subcommand("eval", "Run the evaluation protocol on a manifest");
  eval_cmd->add_option("--model", eval.model, "Checkpoint");
  eval_cmd->add_option("--data", eval.data, "Dataset manifest")->required();
  eval_cmd->add_option("--out", eval.out, "Write the full report here");
  eval_cmd->add_flag("--baseline", eval.baseline, "Constant baseline: ISO 800, unit gains");
  eval_cmd->add_flag("--oracle", eval.oracle, "Feed labels back (upper bound)");
  eval_cmd->add_option("--emit-plot-data", eval.plot_dir, "Write (x, y) series files here");
  eval_cmd->add_option("--drift-against", eval.drift_against,
                       "Compare predictions against a previous report");

  QuantizeArgs quant;
  CLI::App* quant_cmd = app.add_subcommand("quantize", "INT8-quantize checkpoint weights");
  quant_cmd->add_option("--in", quant.in, "Input checkpoint")->required();
  quant_cmd->add_option("--out", quant.out, "Output checkpoint")->required();

  InspectArgs inspect;
  CLI::App* inspect_cmd = app.add_subcommand("inspect", "Describe a checkpoint or .craw file");
  inspect_cmd->add_option("--model", inspect.model, "Checkpoint to describe");
  inspect_cmd->add_option("--raw", inspect.raw, "Raw frame to describe");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (plain_adam) train.config.adamw = false;
    if (gen_cmd->parsed()) return run_gen_data(gen);
    if (train_cmd->parsed()) return run_train(train);
    if (predict_cmd->parsed()) return run_predict(predict);
    if (eval_cmd->parsed()) return run_eval(eval);
    if (quant_cmd->parsed()) return run_quantize(quant);
    if (inspect_cmd->parsed()) return run_inspect(inspect);
  } catch (const StateError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitState;
  } catch (const ParseError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitIo;
  } catch (const IoError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitIo;
  } catch (const std::filesystem::filesystem_error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitIo;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitConfig;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitIo;
  }
  return kExitOk;
}
