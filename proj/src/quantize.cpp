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

#include "autocam/quantize.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "autocam/checkpoint.hpp"

namespace autocam {

QuantizedTensor quantize_values(const std::vector<double>& values, std::vector<int> shape) {
  QuantizedTensor qt;
  qt.shape = std::move(shape);
  double max_abs = 0.0;
  for (double v : values) {
    if (!std::isfinite(v)) throw std::invalid_argument("quantize: non-finite value");
    max_abs = std::max(max_abs, std::abs(v));
  }
  qt.scale = max_abs > 0.0 ? max_abs / 127.0 : 1.0;
  qt.q.resize(values.size());
  for (size_t i = 0; i < values.size(); ++i) {
    // nearbyint under the default FP environment rounds half to even.
    const double r = std::nearbyint(values[i] / qt.scale);
    qt.q[i] = static_cast<int8_t>(std::clamp(r, -127.0, 127.0));
  }
  return qt;
}

QuantizedTensor quantize_tensor(const engine::Tensor& t) {
  return quantize_values(t.values(), t.shape());
}

std::vector<double> dequantize(const QuantizedTensor& qt) {
  std::vector<double> out(qt.q.size());
  for (size_t i = 0; i < qt.q.size(); ++i) out[i] = static_cast<double>(qt.q[i]) * qt.scale;
  return out;
}

void fake_quantize(engine::Tensor& t) {
  t.values() = dequantize(quantize_tensor(t));
}

int quantize_checkpoint(const std::filesystem::path& in, const std::filesystem::path& out) {
  Checkpoint ck = load_checkpoint(in);
  int quantized = 0;
  for (CheckpointEntry& e : ck.model) {
    const bool is_weight = e.name.size() > 2 && e.name.rfind(".w") == e.name.size() - 2;
    if (!is_weight || e.dtype != TensorDType::F64) continue;
    QuantizedTensor qt = quantize_values(e.f64, e.shape);
    e.dtype = TensorDType::I8;
    e.i8 = std::move(qt.q);
    e.scale = qt.scale;
    e.f64.clear();
    ++quantized;
  }
  ck.optimizer.clear();  // inference artifact
  save_checkpoint(ck, out);
  return quantized;
}

}  // namespace autocam
