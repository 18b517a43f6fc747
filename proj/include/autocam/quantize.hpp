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

#include <cstdint>
#include <filesystem>
#include <vector>

#include "autocam/engine.hpp"

namespace autocam {

/// Symmetric per-tensor INT8 quantization: scale = max|t| / 127,
/// values rounded to nearest even. Zero maps to zero exactly; an all-zero
/// tensor gets scale 1.
struct QuantizedTensor {
  std::vector<int8_t> q;
  double scale = 1.0;
  std::vector<int> shape;
};

QuantizedTensor quantize_values(const std::vector<double>& values, std::vector<int> shape);
QuantizedTensor quantize_tensor(const engine::Tensor& t);
std::vector<double> dequantize(const QuantizedTensor& qt);

/// In-place quantize-dequantize (fake quantization) of a tensor's values.
void fake_quantize(engine::Tensor& t);

/// Rewrites a float checkpoint with weight tensors (names ending in ".w")
/// stored as int8 + scale; biases and metadata stay f64, the optimizer table
/// is dropped. Returns the number of quantized tensors.
int quantize_checkpoint(const std::filesystem::path& in, const std::filesystem::path& out);

}  // namespace autocam
