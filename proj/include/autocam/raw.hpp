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
#include <stdexcept>
#include <string>
#include <vector>

namespace autocam {

// Parse failure in a binary container; offset is the byte position of the
// first invalid datum.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& msg, uint64_t offset)
      : std::runtime_error(msg + " (byte offset " + std::to_string(offset) + ")"),
        offset_(offset) {}
  uint64_t offset() const { return offset_; }

 private:
  uint64_t offset_;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class CfaPattern : uint8_t { RGGB = 0, BGGR = 1, GRBG = 2, GBRG = 3 };

const char* to_string(CfaPattern p);
CfaPattern cfa_pattern_from_string(const std::string& s);

/// Physical capture settings attached to a frame.
struct CaptureParams {
  double iso = 1000.0;
  double shutter_ms = 10.0;
  double aperture_f = 2.0;
  double focal_mm = 4.0;

  void validate() const;  // throws std::invalid_argument on nonpositive/nonfinite
};

/// One quarter-resolution CFA channel plane.
struct Plane {
  int width = 0;
  int height = 0;
  std::vector<uint16_t> v;

  uint16_t at(int y, int x) const { return v[static_cast<size_t>(y) * width + x]; }
  size_t size() const { return v.size(); }
};

/// 10-bit Bayer mosaic with capture metadata. Samples are row-major in
/// 16-bit containers; only values up to 2^bit_depth - 1 are legal.
struct RawImage {
  int width = 0;
  int height = 0;
  int bit_depth = 10;
  uint16_t black_level = 64;
  CfaPattern cfa = CfaPattern::RGGB;
  std::vector<uint16_t> samples;
  CaptureParams capture;

  uint16_t max_value() const { return static_cast<uint16_t>((1u << bit_depth) - 1); }
  uint16_t at(int y, int x) const { return samples[static_cast<size_t>(y) * width + x]; }
  uint16_t& at(int y, int x) { return samples[static_cast<size_t>(y) * width + x]; }
  void validate() const;  // throws std::invalid_argument
};

/// The four CFA channel planes of a mosaic.
struct CfaPlanes {
  Plane r, gr, gb, b;
};

/// Row/column offsets of each channel inside the 2x2 CFA tile.
struct CfaOffsets {
  int r_row, r_col, gr_row, gr_col, gb_row, gb_col, b_row, b_col;
};
CfaOffsets cfa_offsets(CfaPattern p);

/// Split a mosaic into its four channel planes (each width/2 x height/2).
CfaPlanes decompose_cfa(const RawImage& raw);

/// Inverse of decompose_cfa; returns the row-major mosaic samples.
std::vector<uint16_t> recompose_cfa(const CfaPlanes& planes, CfaPattern pattern);

/// Mean of max(0, sample - black_level) over a plane, in DN.
double channel_mean(const Plane& plane, uint16_t black_level);

/// Unweighted mean of the four channel means, black-subtracted, in DN.
double mean_luma(const RawImage& raw);

// .craw container I/O (format documented in README).
void write_raw(const RawImage& raw, const std::filesystem::path& path);
RawImage read_raw(const std::filesystem::path& path);

/// Plane samples mapped to [0, 1]: max(0, dn - black) / (max_value - black).
std::vector<double> plane_to_unit(const Plane& plane, uint16_t black_level, int bit_depth);

/// Area-averaging resample of a row-major field from (sw x sh) to (dw x dh).
/// Exact box integration with fractional pixel coverage; preserves the mean.
std::vector<double> area_resize(const std::vector<double>& src, int sw, int sh,
                                int dw, int dh);

}  // namespace autocam
