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

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace autocam {

/// SplitMix64 finalizer, used to derive independent seeds from a master seed.
inline uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Deterministic child seed from (parent seed, index).
inline uint64_t derive_seed(uint64_t parent, uint64_t index) {
  return splitmix64(parent ^ splitmix64(index + 0x632be59bd9b4e019ULL));
}

/// Child seed from (parent seed, textual tag), for naming independent streams.
inline uint64_t derive_seed(uint64_t parent, std::string_view tag) {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : tag) h = (h ^ static_cast<uint8_t>(c)) * 0x100000001b3ULL;
  return splitmix64(parent ^ h);
}

// Deterministic random stream. All variate transforms are implemented here
// rather than via std::*_distribution so sequences do not depend on the
// standard library implementation.
class Rng {
 public:
  explicit Rng(uint64_t seed) : eng_(seed) {}

  uint64_t bits() { return eng_(); }

  /// Uniform double in [0, 1).
  double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n). n must be > 0.
  uint64_t bounded(uint64_t n) {
    // Lemire's multiply-shift with rejection of the biased band.
    uint64_t x = eng_();
    __uint128_t m = static_cast<__uint128_t>(x) * n;
    auto lo = static_cast<uint64_t>(m);
    if (lo < n) {
      uint64_t t = (0 - n) % n;
      while (lo < t) {
        x = eng_();
        m = static_cast<__uint128_t>(x) * n;
        lo = static_cast<uint64_t>(m);
      }
    }
    return static_cast<uint64_t>(m >> 64);
  }

  /// Standard normal via Box-Muller, one spare cached.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = static_cast<double>((eng_() >> 11) + 1) * 0x1.0p-53;  // (0, 1]
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 2.0 * 3.14159265358979323846 * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

  /// Poisson sample. Exact inversion below lambda = 30; for larger rates a
  /// rounded normal approximation is used (declared synthetic-sensor model).
  int64_t poisson(double lambda) {
    if (lambda <= 0.0) return 0;
    if (lambda < 30.0) {
      double l = std::exp(-lambda);
      double p = 1.0;
      int64_t k = 0;
      do {
        ++k;
        p *= uniform();
      } while (p > l);
      return k - 1;
    }
    double x = lambda + std::sqrt(lambda) * normal();
    return x < 0.0 ? 0 : static_cast<int64_t>(std::llround(x));
  }

  /// In-place Fisher-Yates shuffle (stable across standard libraries).
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      size_t j = static_cast<size_t>(bounded(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::mt19937_64 eng_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace autocam
