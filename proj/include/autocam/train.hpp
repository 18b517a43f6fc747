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

#include <filesystem>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "autocam/checkpoint.hpp"
#include "autocam/losses.hpp"
#include "autocam/nets.hpp"
#include "autocam/optim.hpp"
#include "autocam/synth.hpp"

namespace autocam {

struct TrainConfig {
  int epochs_total = 100;
  int stage1_epochs = 40;  // remaining epochs are stage 2
  int batch_size = 8;
  double lr0 = 1e-4;
  double lr_floor = 1e-6;
  double p_drop = 0.2;
  LossWeights lambdas{};           // Eq. 5 weights, default (1, 1, 1)
  bool dynamic_lambda = false;     // inverse-magnitude reweighting, off by default
  bool adamw = true;               // decoupled weight decay
  double weight_decay = 1e-4;
  double iso_consistency_weight = 8.0;  // ties the expectation decode to the label
  int input_size = 32;
  int mod_dim = 16;
  uint64_t seed = 1;
  double stop_top1 = 0.0;  // > 0: stop stage 1 once clean train top-1 reaches this
  BinDistance bin_distance = BinDistance::Log2;
  double del_delta = 1.0;  // stops for Log2 distance, ISO units for Linear

  void validate() const;
  /// Stable textual form of the training-relevant fields, hashed into
  /// checkpoints (output paths excluded on purpose).
  std::string canonical_string() const;
};

/// Manifest plus everything precomputed per sample: the normalized probe
/// input at the configured resolution, the probe modulation vector and the
/// reconstructed render spec for second captures.
class SampleCache {
 public:
  SampleCache(const std::filesystem::path& manifest_path, int input_size);

  struct Item {
    ManifestRow row;
    SampleSpec spec;
    std::vector<double> probe_input;  // 4 * S * S
    ModulationVector probe_mods;
  };

  int size() const { return static_cast<int>(items_.size()); }
  const Dataset& dataset() const { return dataset_; }
  int input_size() const { return input_size_; }
  const Item& item(int i) const { return items_[static_cast<size_t>(i)]; }

  /// Renders the second capture of sample i at the given ISO (other capture
  /// parameters from the sample spec, noise settings from the dataset config).
  RawImage render_capture(int i, double iso, uint64_t seed) const;

 private:
  Dataset dataset_;
  int input_size_;
  std::vector<Item> items_;
};

struct StageResult {
  int epochs_run = 0;
  double first_epoch_loss = 0.0;
  double final_epoch_loss = 0.0;
  double final_top1 = 0.0;
  std::filesystem::path checkpoint;
  std::vector<std::string> log_lines;
};

/// Stage 1: exposure net on the soft-weighted bin loss (plus the expectation
/// consistency term). Resumes from resume_ckpt when given; writes a stage-1
/// checkpoint (exposure weights + optimizer state).
StageResult train_stage1(const SampleCache& cache, const TrainConfig& config,
                         const std::filesystem::path& out_ckpt,
                         const std::filesystem::path& resume_ckpt = {},
                         std::ostream* log = nullptr);

/// Stage 2: joint training of both nets with channel drop active. Requires a
/// stage-1 checkpoint for the exposure weights.
StageResult train_stage2(const SampleCache& cache, const TrainConfig& config,
                         const std::filesystem::path& stage1_ckpt,
                         const std::filesystem::path& out_ckpt, std::ostream* log = nullptr);

// ---------------------------------------------------------------------------
// Model (de)serialization
// ---------------------------------------------------------------------------

struct ModelBundle {
  NetConfig net_config;
  std::vector<double> bins;
  std::unique_ptr<ExposureNet> exposure;
  std::unique_ptr<ColorNet> color;  // null for stage-1 checkpoints
  int stage = 1;
  bool quantized = false;
  uint32_t epoch = 0;

  int64_t param_count() const;
};

/// Rebuilds networks from a checkpoint (int8 entries are dequantized).
ModelBundle load_model(const std::filesystem::path& ckpt_path);

}  // namespace autocam
