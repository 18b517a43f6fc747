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
#include <string_view>
#include <vector>

namespace autocam {

enum class TensorDType : uint8_t { F64 = 0, I8 = 1 };

struct CheckpointEntry {
  std::string name;
  std::vector<int> shape;
  TensorDType dtype = TensorDType::F64;
  std::vector<double> f64;  // valid when dtype == F64
  std::vector<int8_t> i8;   // valid when dtype == I8
  double scale = 1.0;       // dequantization scale for I8 entries

  int64_t numel() const;
  /// Values as doubles; I8 entries are dequantized (value * scale).
  std::vector<double> as_f64() const;
};

// Binary container: magic "ACKP" | version u16 | config hash (32 bytes) |
// epoch u32 | model tensor table | optimizer tensor table. Version 1 stores
// f64 payloads only; version 2 adds a per-entry dtype tag (+ scale for int8)
// and is emitted only when an int8 entry is present.
struct Checkpoint {
  std::array<uint8_t, 32> config_hash{};
  uint32_t epoch = 0;
  std::vector<CheckpointEntry> model;
  std::vector<CheckpointEntry> optimizer;

  const CheckpointEntry* find(std::string_view name) const;
  bool quantized() const;
};

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// 32-byte non-cryptographic digest of a canonical config string.
std::array<uint8_t, 32> hash_config(std::string_view canonical);

}  // namespace autocam
