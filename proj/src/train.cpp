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

#include "autocam/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "autocam/errors.hpp"

namespace autocam {

using engine::Graph;
using engine::Tensor;

// ---------------------------------------------------------------------------
// Config
// ---------------------------------------------------------------------------

void TrainConfig::validate() const {
  if (epochs_total <= 0 || batch_size <= 0) {
    throw std::invalid_argument("epochs and batch size must be positive");
  }
  if (stage1_epochs < 0 || stage1_epochs > epochs_total) {
    throw std::invalid_argument("stage1_epochs must be within [0, epochs_total]");
  }
  if (!(lr0 > 0.0) || !(lr_floor > 0.0) || lr_floor > lr0) {
    throw std::invalid_argument("bad learning rate range");
  }
  if (!(p_drop >= 0.0 && p_drop <= 1.0)) throw std::invalid_argument("p_drop must be in [0,1]");
  if (lambdas.l1 < 0 || lambdas.l2 < 0 || lambdas.l3 < 0) {
    throw std::invalid_argument("loss weights must be nonnegative");
  }
  if (iso_consistency_weight < 0) {
    throw std::invalid_argument("iso_consistency_weight must be nonnegative");
  }
  if (del_delta <= 0) throw std::invalid_argument("del_delta must be positive");
}

std::string TrainConfig::canonical_string() const {
  char buf[512];
  std::snprintf(buf, sizeof(buf),
                "epochs=%d stage1=%d batch=%d lr0=%.17g floor=%.17g pdrop=%.17g "
                "l1=%.17g l2=%.17g l3=%.17g dyn=%d adamw=%d wd=%.17g cons=%.17g "
                "input=%d mod=%d seed=%llu stop=%.17g dist=%d delta=%.17g",
                epochs_total, stage1_epochs, batch_size, lr0, lr_floor, p_drop, lambdas.l1,
                lambdas.l2, lambdas.l3, dynamic_lambda ? 1 : 0, adamw ? 1 : 0, weight_decay,
                iso_consistency_weight, input_size, mod_dim,
                static_cast<unsigned long long>(seed), stop_top1,
                bin_distance == BinDistance::Log2 ? 0 : 1, del_delta);
  return buf;
}

// ---------------------------------------------------------------------------
// SampleCache
// ---------------------------------------------------------------------------

SampleCache::SampleCache(const std::filesystem::path& manifest_path, int input_size)
    : dataset_(load_dataset(manifest_path)), input_size_(input_size) {
  items_.reserve(dataset_.rows.size());
  for (const ManifestRow& row : dataset_.rows) {
    Item item;
    item.row = row;
    item.spec = sample_spec_from_seed(dataset_.config, row.seed);
    const RawImage probe = read_raw(dataset_.root / row.path);
    item.probe_input = raw_to_input(probe, input_size_);
    item.probe_mods = ModulationVector::from_capture(probe.capture);
    items_.push_back(std::move(item));
  }
}

RawImage SampleCache::render_capture(int i, double iso, uint64_t seed) const {
  const Item& it = items_[static_cast<size_t>(i)];
  CaptureParams capture = it.spec.capture;
  capture.iso = iso;
  RenderOptions opts{dataset_.config.noise, dataset_.config.read_sigma};
  return render_raw(it.spec.scene, it.spec.illum, capture, seed, opts);
}

// ---------------------------------------------------------------------------
// Batch assembly
// ---------------------------------------------------------------------------

namespace {

Tensor assemble_planes(const std::vector<const std::vector<double>*>& inputs, int s) {
  const int batch = static_cast<int>(inputs.size());
  Tensor t = Tensor::zeros({batch, 4, s, s});
  const size_t per = static_cast<size_t>(4) * s * s;
  for (int b = 0; b < batch; ++b) {
    std::copy(inputs[static_cast<size_t>(b)]->begin(), inputs[static_cast<size_t>(b)]->end(),
              t.data() + static_cast<size_t>(b) * per);
  }
  return t;
}

Tensor assemble_mods(const std::vector<ModulationVector>& mods) {
  const int batch = static_cast<int>(mods.size());
  Tensor t = Tensor::zeros({batch, 4});
  for (int b = 0; b < batch; ++b) {
    for (int j = 0; j < 4; ++j) t.data()[b * 4 + j] = mods[static_cast<size_t>(b)].fused[j];
  }
  return t;
}

std::string epoch_line(int epoch, int stage, double loss, double top1, double mae, double lr,
                       const char* extra = "") {
  char buf[256];
  std::snprintf(buf, sizeof(buf), "epoch=%d stage=%d loss=%.9g top1=%.6g iso_mae_log2=%.6g lr=%.6g%s",
                epoch, stage, loss, top1, mae, lr, extra);
  return buf;
}

void emit(std::ostream* log, StageResult& res, const std::string& line) {
  res.log_lines.push_back(line);
  if (log) *log << line << "\n";
}

CheckpointEntry f64_entry(std::string name, std::vector<int> shape, std::vector<double> v) {
  CheckpointEntry e;
  e.name = std::move(name);
  e.shape = std::move(shape);
  e.f64 = std::move(v);
  return e;
}

void add_net_entries(std::vector<CheckpointEntry>& out, const std::string& prefix,
                     const NamedParams& params) {
  for (const auto& [name, t] : params) {
    out.push_back(f64_entry(prefix + name, t.shape(), t.values()));
  }
}

Checkpoint build_checkpoint(const TrainConfig& config, const std::vector<double>& bins, int stage,
                            uint32_t epoch, const ExposureNet& exposure, const ColorNet* color,
                            const Adam& opt, const std::vector<std::string>& opt_names) {
  Checkpoint ck;
  ck.config_hash = hash_config(config.canonical_string());
  ck.epoch = epoch;
  ck.model.push_back(f64_entry("meta.bins", {static_cast<int>(bins.size())}, bins));
  ck.model.push_back(f64_entry("meta.input_size", {1}, {static_cast<double>(config.input_size)}));
  ck.model.push_back(f64_entry("meta.mod_dim", {1}, {static_cast<double>(config.mod_dim)}));
  ck.model.push_back(f64_entry("meta.stage", {1}, {static_cast<double>(stage)}));
  add_net_entries(ck.model, "exposure.", exposure.params());
  if (color) add_net_entries(ck.model, "color.", color->params());

  ck.optimizer.push_back(
      f64_entry("adam.step", {1}, {static_cast<double>(opt.step_count())}));
  for (size_t i = 0; i < opt_names.size(); ++i) {
    const std::vector<double>& m = opt.first_moment(i);
    const std::vector<double>& v = opt.second_moment(i);
    ck.optimizer.push_back(f64_entry("adam.m." + opt_names[i],
                                     {static_cast<int>(m.size())}, m));
    ck.optimizer.push_back(f64_entry("adam.v." + opt_names[i],
                                     {static_cast<int>(v.size())}, v));
  }
  return ck;
}

void restore_net_params(const Checkpoint& ck, const std::string& prefix, NamedParams& params) {
  for (auto& [name, t] : params) {
    const CheckpointEntry* e = ck.find(prefix + name);
    if (!e) throw StateError("checkpoint is missing tensor " + prefix + name);
    std::vector<double> v = e->as_f64();
    if (static_cast<int64_t>(v.size()) != t.numel()) {
      throw StateError("checkpoint tensor " + prefix + name + " has wrong size");
    }
    t.values() = std::move(v);
  }
}

void restore_optimizer(const Checkpoint& ck, Adam& opt, const std::vector<std::string>& names) {
  const CheckpointEntry* step = nullptr;
  for (const CheckpointEntry& e : ck.optimizer) {
    if (e.name == "adam.step") step = &e;
  }
  if (!step) throw StateError("checkpoint has no optimizer state to resume from");
  opt.set_step_count(static_cast<int64_t>(step->f64.at(0)));
  for (size_t i = 0; i < names.size(); ++i) {
    const CheckpointEntry *me = nullptr, *ve = nullptr;
    for (const CheckpointEntry& e : ck.optimizer) {
      if (e.name == "adam.m." + names[i]) me = &e;
      if (e.name == "adam.v." + names[i]) ve = &e;
    }
    if (!me || !ve) throw StateError("checkpoint optimizer state missing for " + names[i]);
    opt.restore_state(i, me->as_f64(), ve->as_f64());
  }
}

struct BatchView {
  std::vector<int> idx;
};

std::vector<BatchView> make_batches(std::vector<int> order, int batch_size) {
  std::vector<BatchView> out;
  for (size_t pos = 0; pos < order.size(); pos += static_cast<size_t>(batch_size)) {
    BatchView b;
    const size_t end = std::min(order.size(), pos + static_cast<size_t>(batch_size));
    b.idx.assign(order.begin() + static_cast<long>(pos), order.begin() + static_cast<long>(end));
    out.push_back(std::move(b));
  }
  return out;
}

// Clean (no-drop, no-grad) top-1 accuracy over the whole cache.
double clean_top1(const SampleCache& cache, const ExposureNet& net, int batch_size) {
  const int s = net.config().input_size;
  int correct = 0;
  std::vector<int> order(static_cast<size_t>(cache.size()));
  std::iota(order.begin(), order.end(), 0);
  for (const BatchView& batch : make_batches(order, batch_size)) {
    std::vector<const std::vector<double>*> inputs;
    std::vector<ModulationVector> mods;
    for (int i : batch.idx) {
      inputs.push_back(&cache.item(i).probe_input);
      mods.push_back(cache.item(i).probe_mods);
    }
    Graph g(false);
    Tensor probs = net.forward(g, assemble_planes(inputs, s), assemble_mods(mods));
    const int n = probs.dim(1);
    for (size_t b = 0; b < batch.idx.size(); ++b) {
      const double* row = probs.data() + b * static_cast<size_t>(n);
      const int arg = static_cast<int>(std::max_element(row, row + n) - row);
      if (arg == cache.item(batch.idx[b]).row.gt_iso_bin) ++correct;
    }
  }
  return static_cast<double>(correct) / cache.size();
}

}  // namespace

// ---------------------------------------------------------------------------
// Stage 1
// ---------------------------------------------------------------------------

StageResult train_stage1(const SampleCache& cache, const TrainConfig& config,
                         const std::filesystem::path& out_ckpt,
                         const std::filesystem::path& resume_ckpt, std::ostream* log) {
  config.validate();
  if (cache.size() == 0) throw std::invalid_argument("train_stage1: empty dataset");
  if (cache.input_size() != config.input_size) {
    throw StateError("sample cache resolution does not match training config");
  }
  const std::vector<double>& bins = cache.dataset().config.bins;
  const NetConfig ncfg{config.input_size, static_cast<int>(bins.size()), config.mod_dim};
  ExposureNet net(ncfg, derive_seed(config.seed, "exposure-init"));

  std::vector<Tensor> opt_tensors;
  std::vector<std::string> opt_names;
  for (auto& [name, t] : net.params()) {
    opt_names.push_back("exposure." + name);
    opt_tensors.push_back(t);
  }
  AdamConfig acfg;
  acfg.lr = config.lr0;
  acfg.weight_decay = config.weight_decay;
  acfg.decoupled = config.adamw;
  Adam opt(opt_tensors, acfg);

  int start_epoch = 0;
  if (!resume_ckpt.empty()) {
    const Checkpoint ck = load_checkpoint(resume_ckpt);
    restore_net_params(ck, "exposure.", net.params());
    restore_optimizer(ck, opt, opt_names);
    start_epoch = static_cast<int>(ck.epoch);
  }

  // Per-sample constants.
  const int s = config.input_size;
  const int n = static_cast<int>(bins.size());
  std::vector<IsoBinWeights> weights;
  weights.reserve(static_cast<size_t>(cache.size()));
  for (int i = 0; i < cache.size(); ++i) {
    weights.push_back(iso_bin_weights(cache.item(i).row.gt_iso, bins, config.del_delta,
                                      config.bin_distance));
  }

  const uint64_t shuffle_base = derive_seed(config.seed, "stage1-shuffle");
  const uint64_t drop_base = derive_seed(config.seed, "stage1-drop");
  const double ln2 = std::log(2.0);

  StageResult res;
  int epochs_done = start_epoch;
  for (int epoch = start_epoch; epoch < config.stage1_epochs; ++epoch) {
    const double lr = lr_at(epoch, config.epochs_total, config.lr0, config.lr_floor);
    std::vector<int> order(static_cast<size_t>(cache.size()));
    std::iota(order.begin(), order.end(), 0);
    Rng shuffle_rng(derive_seed(shuffle_base, static_cast<uint64_t>(epoch)));
    shuffle_rng.shuffle(order);

    double loss_sum = 0.0, mae_sum = 0.0;
    int correct = 0, seen = 0, batch_index = 0;
    for (const BatchView& batch : make_batches(order, config.batch_size)) {
      Rng drop_rng(derive_seed(derive_seed(drop_base, static_cast<uint64_t>(epoch)),
                               static_cast<uint64_t>(batch_index++)));
      const int bsz = static_cast<int>(batch.idx.size());
      std::vector<const std::vector<double>*> inputs;
      std::vector<ModulationVector> mods;
      Tensor w = Tensor::zeros({bsz, n});
      std::vector<double> gts;
      for (int b = 0; b < bsz; ++b) {
        const SampleCache::Item& item = cache.item(batch.idx[static_cast<size_t>(b)]);
        inputs.push_back(&item.probe_input);
        mods.push_back(channel_drop(item.probe_mods, config.p_drop, drop_rng));
        const IsoBinWeights& iw = weights[static_cast<size_t>(batch.idx[static_cast<size_t>(b)])];
        std::copy(iw.w.begin(), iw.w.end(), w.data() + static_cast<size_t>(b) * n);
        gts.push_back(item.row.gt_iso);
      }
      Graph g;
      Tensor probs = net.forward(g, assemble_planes(inputs, s), assemble_mods(mods));
      std::vector<Tensor> terms = {engine::weighted_nll(g, probs, w)};
      std::vector<double> coeffs = {1.0};
      if (config.iso_consistency_weight > 0.0) {
        terms.push_back(engine::expectation_consistency(g, probs, bins, gts));
        coeffs.push_back(config.iso_consistency_weight);
      }
      Tensor loss = engine::scale_add(g, terms, coeffs);
      opt.zero_grad();
      g.backward(loss);
      opt.step(lr);

      loss_sum += loss.value() * bsz;
      for (int b = 0; b < bsz; ++b) {
        const double* row = probs.data() + static_cast<size_t>(b) * n;
        double y = 0.0;
        for (int j = 0; j < n; ++j) y += row[j] * bins[static_cast<size_t>(j)];
        mae_sum += std::abs(std::log(y / gts[static_cast<size_t>(b)]) / ln2);
        const int arg = static_cast<int>(std::max_element(row, row + n) - row);
        if (arg == cache.item(batch.idx[static_cast<size_t>(b)]).row.gt_iso_bin) ++correct;
      }
      seen += bsz;
    }

    const double epoch_loss = loss_sum / seen;
    const double top1 = static_cast<double>(correct) / seen;
    if (epoch == start_epoch) res.first_epoch_loss = epoch_loss;
    res.final_epoch_loss = epoch_loss;
    res.final_top1 = top1;
    emit(log, res, epoch_line(epoch, 1, epoch_loss, top1, mae_sum / seen, lr));
    epochs_done = epoch + 1;

    if (config.stop_top1 > 0.0) {
      const double clean = clean_top1(cache, net, config.batch_size);
      res.final_top1 = clean;
      if (clean >= config.stop_top1) break;
    }
  }

  res.epochs_run = epochs_done - start_epoch;
  Checkpoint ck = build_checkpoint(config, bins, 1, static_cast<uint32_t>(epochs_done), net,
                                   nullptr, opt, opt_names);
  save_checkpoint(ck, out_ckpt);
  res.checkpoint = out_ckpt;
  return res;
}

// ---------------------------------------------------------------------------
// Stage 2
// ---------------------------------------------------------------------------

StageResult train_stage2(const SampleCache& cache, const TrainConfig& config,
                         const std::filesystem::path& stage1_ckpt,
                         const std::filesystem::path& out_ckpt, std::ostream* log) {
  config.validate();
  if (cache.size() == 0) throw std::invalid_argument("train_stage2: empty dataset");
  if (!std::filesystem::exists(stage1_ckpt)) {
    throw StateError("missing stage-1 checkpoint: " + stage1_ckpt.string());
  }
  const std::vector<double>& bins = cache.dataset().config.bins;
  ModelBundle base = load_model(stage1_ckpt);
  if (base.bins != bins) throw StateError("stage-1 checkpoint bins do not match dataset");
  if (base.net_config.input_size != config.input_size) {
    throw StateError("stage-1 checkpoint input size does not match training config");
  }
  ExposureNet& enet = *base.exposure;
  const NetConfig ncfg{config.input_size, static_cast<int>(bins.size()), config.mod_dim};
  ColorNet cnet(ncfg, derive_seed(config.seed, "color-init"));

  std::vector<Tensor> opt_tensors;
  std::vector<std::string> opt_names;
  for (auto& [name, t] : enet.params()) {
    opt_names.push_back("exposure." + name);
    opt_tensors.push_back(t);
  }
  for (auto& [name, t] : cnet.params()) {
    opt_names.push_back("color." + name);
    opt_tensors.push_back(t);
  }
  AdamConfig acfg;
  acfg.lr = config.lr0;
  acfg.weight_decay = config.weight_decay;
  acfg.decoupled = config.adamw;
  Adam opt(opt_tensors, acfg);

  const int s = config.input_size;
  const int n = static_cast<int>(bins.size());
  std::vector<IsoBinWeights> weights;
  for (int i = 0; i < cache.size(); ++i) {
    weights.push_back(iso_bin_weights(cache.item(i).row.gt_iso, bins, config.del_delta,
                                      config.bin_distance));
  }

  const uint64_t shuffle_base = derive_seed(config.seed, "stage2-shuffle");
  const uint64_t drop_base = derive_seed(config.seed, "stage2-drop");
  LossWeights lw = config.lambdas;
  LossBalancer balancer;
  const double ln2 = std::log(2.0);

  StageResult res;
  for (int epoch = config.stage1_epochs; epoch < config.epochs_total; ++epoch) {
    const double lr = lr_at(epoch, config.epochs_total, config.lr0, config.lr_floor);
    std::vector<int> order(static_cast<size_t>(cache.size()));
    std::iota(order.begin(), order.end(), 0);
    Rng shuffle_rng(derive_seed(shuffle_base, static_cast<uint64_t>(epoch)));
    shuffle_rng.shuffle(order);

    double loss_sum = 0.0, exp_sum = 0.0, color_sum = 0.0, mod_sum = 0.0, mae_sum = 0.0;
    int correct = 0, seen = 0, batch_index = 0;
    for (const BatchView& batch : make_batches(order, config.batch_size)) {
      Rng drop_rng(derive_seed(derive_seed(drop_base, static_cast<uint64_t>(epoch)),
                               static_cast<uint64_t>(batch_index++)));
      const int bsz = static_cast<int>(batch.idx.size());
      std::vector<const std::vector<double>*> probe_inputs;
      std::vector<ModulationVector> probe_mods, cap_mods;
      std::vector<std::vector<double>> cap_inputs;
      Tensor w = Tensor::zeros({bsz, n});
      std::vector<double> gt_iso, gt_temp, gt_dr, gt_db;
      for (int b = 0; b < bsz; ++b) {
        const int i = batch.idx[static_cast<size_t>(b)];
        const SampleCache::Item& item = cache.item(i);
        probe_inputs.push_back(&item.probe_input);
        probe_mods.push_back(channel_drop(item.probe_mods, config.p_drop, drop_rng));
        const IsoBinWeights& iw = weights[static_cast<size_t>(i)];
        std::copy(iw.w.begin(), iw.w.end(), w.data() + static_cast<size_t>(b) * n);
        gt_iso.push_back(item.row.gt_iso);
        gt_temp.push_back(item.row.gt_temp);
        gt_dr.push_back(item.row.gt_delta_r);
        gt_db.push_back(item.row.gt_delta_b);
        // Second capture at the labeled ISO; fresh noise each epoch.
        const uint64_t cap_seed =
            derive_seed(derive_seed(item.row.seed, "cap2"), static_cast<uint64_t>(epoch));
        const RawImage cap = cache.render_capture(i, item.row.gt_iso, cap_seed);
        cap_inputs.push_back(raw_to_input(cap, s));
        cap_mods.push_back(
            channel_drop(ModulationVector::from_capture(cap.capture), config.p_drop, drop_rng));
      }

      Graph g;
      Tensor probs = enet.forward(g, assemble_planes(probe_inputs, s), assemble_mods(probe_mods));
      std::vector<Tensor> exp_terms = {engine::weighted_nll(g, probs, w)};
      std::vector<double> exp_coeffs = {1.0};
      if (config.iso_consistency_weight > 0.0) {
        exp_terms.push_back(engine::expectation_consistency(g, probs, bins, gt_iso));
        exp_coeffs.push_back(config.iso_consistency_weight);
      }
      Tensor l_exp = engine::scale_add(g, exp_terms, exp_coeffs);

      std::vector<const std::vector<double>*> cap_ptrs;
      for (const auto& v : cap_inputs) cap_ptrs.push_back(&v);
      ColorHeads heads = cnet.forward(g, assemble_planes(cap_ptrs, s), assemble_mods(cap_mods));
      Tensor l_color = engine::scale_add(
          g,
          {engine::smooth_l1(g, heads.temp_kelvin, gt_temp, kTempLossScale),
           engine::smooth_l1(g, heads.delta_r, gt_dr, kDeltaLossScale),
           engine::smooth_l1(g, heads.delta_b, gt_db, kDeltaLossScale)},
          {1.0, 1.0, 1.0});

      Tensor l_mod = engine::scale_add(
          g,
          {engine::sum_squares(g, enet.modulation_weight()),
           engine::sum_squares(g, cnet.modulation_weight())},
          {kModRegWeight, kModRegWeight});

      Tensor loss = engine::scale_add(g, {l_exp, l_color, l_mod}, {lw.l1, lw.l2, lw.l3});
      opt.zero_grad();
      g.backward(loss);
      opt.step(lr);

      loss_sum += loss.value() * bsz;
      exp_sum += l_exp.value() * bsz;
      color_sum += l_color.value() * bsz;
      mod_sum += l_mod.value() * bsz;
      for (int b = 0; b < bsz; ++b) {
        const double* row = probs.data() + static_cast<size_t>(b) * n;
        double y = 0.0;
        for (int j = 0; j < n; ++j) y += row[j] * bins[static_cast<size_t>(j)];
        mae_sum += std::abs(std::log(y / gt_iso[static_cast<size_t>(b)]) / ln2);
        const int arg = static_cast<int>(std::max_element(row, row + n) - row);
        if (arg == cache.item(batch.idx[static_cast<size_t>(b)]).row.gt_iso_bin) ++correct;
      }
      seen += bsz;
    }

    const double epoch_loss = loss_sum / seen;
    if (epoch == config.stage1_epochs) res.first_epoch_loss = epoch_loss;
    res.final_epoch_loss = epoch_loss;
    res.final_top1 = static_cast<double>(correct) / seen;
    char extra[160];
    std::snprintf(extra, sizeof(extra),
                  " l_exp=%.9g l_color=%.9g l_mod=%.9g lambda1=%.6g lambda2=%.6g lambda3=%.6g",
                  exp_sum / seen, color_sum / seen, mod_sum / seen, lw.l1, lw.l2, lw.l3);
    emit(log, res,
         epoch_line(epoch, 2, epoch_loss, res.final_top1, mae_sum / seen, lr, extra));
    res.epochs_run++;

    if (config.dynamic_lambda) {
      lw = balancer.update({exp_sum / seen, color_sum / seen, mod_sum / seen});
    }
  }

  Checkpoint ck = build_checkpoint(config, bins, 2, static_cast<uint32_t>(config.epochs_total),
                                   enet, &cnet, opt, opt_names);
  save_checkpoint(ck, out_ckpt);
  res.checkpoint = out_ckpt;
  return res;
}

// ---------------------------------------------------------------------------
// Model loading
// ---------------------------------------------------------------------------

int64_t ModelBundle::param_count() const {
  int64_t count = 0;
  if (exposure) count += exposure->param_count();
  if (color) count += color->param_count();
  return count;
}

ModelBundle load_model(const std::filesystem::path& ckpt_path) {
  const Checkpoint ck = load_checkpoint(ckpt_path);
  ModelBundle out;
  const CheckpointEntry* bins = ck.find("meta.bins");
  const CheckpointEntry* input_size = ck.find("meta.input_size");
  const CheckpointEntry* mod_dim = ck.find("meta.mod_dim");
  const CheckpointEntry* stage = ck.find("meta.stage");
  if (!bins || !input_size || !mod_dim || !stage) {
    throw StateError("checkpoint lacks model metadata: " + ckpt_path.string());
  }
  out.bins = bins->as_f64();
  out.net_config.input_size = static_cast<int>(input_size->f64.at(0));
  out.net_config.mod_dim = static_cast<int>(mod_dim->f64.at(0));
  out.net_config.n_bins = static_cast<int>(out.bins.size());
  out.stage = static_cast<int>(stage->f64.at(0));
  out.quantized = ck.quantized();
  out.epoch = ck.epoch;

  out.exposure = std::make_unique<ExposureNet>(out.net_config, 0);
  restore_net_params(ck, "exposure.", out.exposure->params());

  bool has_color = false;
  for (const CheckpointEntry& e : ck.model) {
    if (e.name.rfind("color.", 0) == 0) has_color = true;
  }
  if (has_color) {
    out.color = std::make_unique<ColorNet>(out.net_config, 0);
    restore_net_params(ck, "color.", out.color->params());
  }
  return out;
}

}  // namespace autocam
