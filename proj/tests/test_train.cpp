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

#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "autocam/errors.hpp"
#include "autocam/train.hpp"

using namespace autocam;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const char* leaf) {
  fs::path p = fs::temp_directory_path() / leaf;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string file_bytes(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  REQUIRE(f.good());
  return std::string((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
}

// One small dataset shared by the training tests.
const fs::path& tiny_dataset() {
  static const fs::path manifest = [] {
    DatasetConfig cfg;
    cfg.width = 64;
    cfg.height = 64;
    const fs::path dir = temp_dir("autocam_train_ds");
    return generate_dataset(cfg, 20260101, 8, dir);
  }();
  return manifest;
}

TrainConfig tiny_config() {
  TrainConfig cfg;
  cfg.epochs_total = 4;
  cfg.stage1_epochs = 2;
  cfg.batch_size = 4;
  cfg.input_size = 32;
  cfg.seed = 7;
  return cfg;
}

}  // namespace

TEST_CASE("stage 1: runs, logs the expected fields and writes a loadable checkpoint") {
  SampleCache cache(tiny_dataset(), 32);
  const TrainConfig cfg = tiny_config();
  const fs::path out = temp_dir("autocam_train_s1") / "s1.ckpt";
  const StageResult res = train_stage1(cache, cfg, out);
  CHECK(res.epochs_run == 2);
  REQUIRE(res.log_lines.size() == 2);
  CHECK(res.log_lines[0].find("epoch=0 stage=1 loss=") != std::string::npos);
  CHECK(res.log_lines[0].find("top1=") != std::string::npos);
  CHECK(res.log_lines[0].find("iso_mae_log2=") != std::string::npos);
  CHECK(res.log_lines[0].find("lr=") != std::string::npos);
  CHECK(std::isfinite(res.final_epoch_loss));

  const ModelBundle bundle = load_model(out);
  CHECK(bundle.stage == 1);
  CHECK(bundle.epoch == 2);
  CHECK(bundle.exposure != nullptr);
  CHECK(bundle.color == nullptr);
  CHECK(bundle.bins == cache.dataset().config.bins);
}

TEST_CASE("training progress: final epoch loss beats the first epoch") {
  SampleCache cache(tiny_dataset(), 32);
  TrainConfig cfg = tiny_config();
  cfg.epochs_total = 12;
  cfg.stage1_epochs = 6;
  const fs::path d = temp_dir("autocam_train_progress");
  const StageResult s1 = train_stage1(cache, cfg, d / "s1.ckpt");
  CHECK(s1.final_epoch_loss < s1.first_epoch_loss);
  const StageResult s2 = train_stage2(cache, cfg, d / "s1.ckpt", d / "s2.ckpt");
  CHECK(s2.final_epoch_loss < s2.first_epoch_loss);
}

TEST_CASE("stage 1: empty dataset is rejected") {
  DatasetConfig cfg;
  const fs::path dir = temp_dir("autocam_train_empty");
  const fs::path manifest = generate_dataset(cfg, 5, 0, dir);
  SampleCache cache(manifest, 32);
  CHECK_THROWS_AS(train_stage1(cache, tiny_config(), dir / "out.ckpt"), std::invalid_argument);
}

TEST_CASE("stage 1: fixed seed reproduces the loss curve and checkpoint bytes") {
  SampleCache cache(tiny_dataset(), 32);
  const TrainConfig cfg = tiny_config();
  const fs::path d = temp_dir("autocam_train_det");
  const StageResult a = train_stage1(cache, cfg, d / "a.ckpt");
  const StageResult b = train_stage1(cache, cfg, d / "b.ckpt");
  CHECK(a.log_lines == b.log_lines);
  CHECK(file_bytes(d / "a.ckpt") == file_bytes(d / "b.ckpt"));
}

TEST_CASE("stage 1: resume from an intermediate checkpoint is bit-exact") {
  SampleCache cache(tiny_dataset(), 32);
  const fs::path d = temp_dir("autocam_train_resume");

  TrainConfig full = tiny_config();
  full.stage1_epochs = 4;
  full.epochs_total = 4;
  train_stage1(cache, full, d / "full.ckpt");

  TrainConfig half = full;
  half.stage1_epochs = 2;
  train_stage1(cache, half, d / "half.ckpt");
  // Note: the interrupted run must use the same total schedule.
  train_stage1(cache, full, d / "resumed.ckpt", d / "half.ckpt");

  CHECK(file_bytes(d / "full.ckpt") == file_bytes(d / "resumed.ckpt"));
}

TEST_CASE("stage 2: missing stage-1 checkpoint is a state error") {
  SampleCache cache(tiny_dataset(), 32);
  const fs::path d = temp_dir("autocam_train_s2_missing");
  CHECK_THROWS_AS(train_stage2(cache, tiny_config(), d / "nope.ckpt", d / "out.ckpt"),
                  StateError);
}

TEST_CASE("stage 2: joint training writes both nets and logs components") {
  SampleCache cache(tiny_dataset(), 32);
  const TrainConfig cfg = tiny_config();
  const fs::path d = temp_dir("autocam_train_s2");
  train_stage1(cache, cfg, d / "s1.ckpt");
  const StageResult res = train_stage2(cache, cfg, d / "s1.ckpt", d / "s2.ckpt");
  CHECK(res.epochs_run == 2);
  CHECK(res.log_lines[0].find("stage=2") != std::string::npos);
  CHECK(res.log_lines[0].find("l_exp=") != std::string::npos);
  CHECK(res.log_lines[0].find("l_color=") != std::string::npos);
  CHECK(res.log_lines[0].find("l_mod=") != std::string::npos);

  const ModelBundle bundle = load_model(d / "s2.ckpt");
  CHECK(bundle.stage == 2);
  CHECK(bundle.color != nullptr);
  CHECK(bundle.param_count() < 2'300'000);
}

TEST_CASE("stage 2: zero color weight with zero decay leaves the color net at init") {
  SampleCache cache(tiny_dataset(), 32);
  TrainConfig cfg = tiny_config();
  cfg.lambdas = LossWeights{1.0, 0.0, 0.0};
  cfg.weight_decay = 0.0;
  const fs::path d = temp_dir("autocam_train_s2_frozen");
  train_stage1(cache, cfg, d / "s1.ckpt");
  train_stage2(cache, cfg, d / "s1.ckpt", d / "s2.ckpt");

  const ModelBundle bundle = load_model(d / "s2.ckpt");
  const ColorNet fresh(bundle.net_config, derive_seed(cfg.seed, "color-init"));
  REQUIRE(bundle.color != nullptr);
  for (size_t i = 0; i < fresh.params().size(); ++i) {
    CHECK(bundle.color->params()[i].second.values() == fresh.params()[i].second.values());
  }
}

TEST_CASE("checkpoint: save/load round trip restores bit-identical tensors") {
  Checkpoint ck;
  ck.config_hash = hash_config("test");
  ck.epoch = 3;
  CheckpointEntry e;
  e.name = "exposure.stem.w";
  e.shape = {2, 3};
  e.f64 = {0.1, -0.2, 0.3, 1e-300, 1e300, 0.0};
  ck.model.push_back(e);
  const fs::path d = temp_dir("autocam_ckpt");
  save_checkpoint(ck, d / "x.ckpt");
  const Checkpoint back = load_checkpoint(d / "x.ckpt");
  CHECK(back.epoch == 3);
  CHECK(back.config_hash == ck.config_hash);
  REQUIRE(back.model.size() == 1);
  CHECK(back.model[0].name == e.name);
  CHECK(back.model[0].shape == e.shape);
  CHECK(back.model[0].f64 == e.f64);
}

TEST_CASE("checkpoint: corrupted magic is a parse error") {
  const fs::path d = temp_dir("autocam_ckpt_bad");
  std::ofstream(d / "bad.ckpt", std::ios::binary) << "NOPE";
  CHECK_THROWS_AS(load_checkpoint(d / "bad.ckpt"), ParseError);
}

TEST_CASE("config hash: stable for equal configs, different otherwise") {
  TrainConfig a = tiny_config();
  TrainConfig b = tiny_config();
  CHECK(hash_config(a.canonical_string()) == hash_config(b.canonical_string()));
  b.seed = 8;
  CHECK(hash_config(a.canonical_string()) != hash_config(b.canonical_string()));
}
