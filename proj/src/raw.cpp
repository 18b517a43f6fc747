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

#include "autocam/raw.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

namespace autocam {

namespace {

constexpr char kMagic[4] = {'C', 'R', 'A', 'W'};
constexpr uint16_t kFormatVersion = 1;

void put_u16(std::string& out, uint16_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
}

void put_f32(std::string& out, float v) {
  static_assert(sizeof(float) == 4);
  uint32_t bits;
  std::memcpy(&bits, &v, 4);
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
}

class Reader {
 public:
  Reader(const uint8_t* data, size_t size) : data_(data), size_(size) {}

  uint64_t pos() const { return pos_; }
  size_t size() const { return size_; }

  void need(size_t n, const char* what) const {
    if (pos_ + n > size_) {
      throw ParseError(std::string("truncated file: expected ") + std::to_string(pos_ + n) +
                           " bytes for " + what + ", file has " + std::to_string(size_),
                       pos_);
    }
  }

  uint8_t u8(const char* what) {
    need(1, what);
    return data_[pos_++];
  }
  uint16_t u16(const char* what) {
    need(2, what);
    uint16_t v = static_cast<uint16_t>(data_[pos_] | (data_[pos_ + 1] << 8));
    pos_ += 2;
    return v;
  }
  float f32(const char* what) {
    need(4, what);
    uint32_t bits = 0;
    for (int i = 0; i < 4; ++i) bits |= static_cast<uint32_t>(data_[pos_ + i]) << (8 * i);
    pos_ += 4;
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
  }

 private:
  const uint8_t* data_;
  size_t size_;
  uint64_t pos_ = 0;
};

}  // namespace

const char* to_string(CfaPattern p) {
  switch (p) {
    case CfaPattern::RGGB: return "RGGB";
    case CfaPattern::BGGR: return "BGGR";
    case CfaPattern::GRBG: return "GRBG";
    case CfaPattern::GBRG: return "GBRG";
  }
  return "?";
}

CfaPattern cfa_pattern_from_string(const std::string& s) {
  if (s == "RGGB") return CfaPattern::RGGB;
  if (s == "BGGR") return CfaPattern::BGGR;
  if (s == "GRBG") return CfaPattern::GRBG;
  if (s == "GBRG") return CfaPattern::GBRG;
  throw std::invalid_argument("unknown CFA pattern: " + s);
}

void CaptureParams::validate() const {
  auto check = [](double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v)) {
      throw std::invalid_argument(std::string("capture parameter ") + name +
                                  " must be positive and finite");
    }
  };
  check(iso, "iso");
  check(shutter_ms, "shutter_ms");
  check(aperture_f, "aperture_f");
  check(focal_mm, "focal_mm");
}

void RawImage::validate() const {
  if (width < 4 || height < 4 || width % 2 != 0 || height % 2 != 0) {
    throw std::invalid_argument("raw dimensions must be even and at least 4x4, got " +
                                std::to_string(width) + "x" + std::to_string(height));
  }
  if (bit_depth < 1 || bit_depth > 16) {
    throw std::invalid_argument("bit_depth out of range: " + std::to_string(bit_depth));
  }
  if (samples.size() != static_cast<size_t>(width) * height) {
    throw std::invalid_argument("sample count " + std::to_string(samples.size()) +
                                " does not match " + std::to_string(width) + "x" +
                                std::to_string(height));
  }
  const uint16_t mv = max_value();
  for (size_t i = 0; i < samples.size(); ++i) {
    if (samples[i] > mv) {
      throw std::invalid_argument("sample " + std::to_string(i) + " = " +
                                  std::to_string(samples[i]) + " exceeds max value " +
                                  std::to_string(mv));
    }
  }
  capture.validate();
}

CfaOffsets cfa_offsets(CfaPattern p) {
  switch (p) {
    case CfaPattern::RGGB: return {0, 0, 0, 1, 1, 0, 1, 1};
    case CfaPattern::BGGR: return {1, 1, 1, 0, 0, 1, 0, 0};
    case CfaPattern::GRBG: return {0, 1, 0, 0, 1, 1, 1, 0};
    case CfaPattern::GBRG: return {1, 0, 1, 1, 0, 0, 0, 1};
  }
  throw std::invalid_argument("bad CFA pattern value");
}

CfaPlanes decompose_cfa(const RawImage& raw) {
  if (raw.width < 2 || raw.height < 2 || raw.width % 2 != 0 || raw.height % 2 != 0) {
    throw std::invalid_argument("decompose_cfa requires even dimensions, got " +
                                std::to_string(raw.width) + "x" + std::to_string(raw.height));
  }
  const int pw = raw.width / 2;
  const int ph = raw.height / 2;
  CfaPlanes out;
  for (Plane* p : {&out.r, &out.gr, &out.gb, &out.b}) {
    p->width = pw;
    p->height = ph;
    p->v.resize(static_cast<size_t>(pw) * ph);
  }
  const CfaOffsets o = cfa_offsets(raw.cfa);
  auto extract = [&](Plane& p, int ro, int co) {
    for (int y = 0; y < ph; ++y) {
      const uint16_t* src = raw.samples.data() + static_cast<size_t>(2 * y + ro) * raw.width + co;
      uint16_t* dst = p.v.data() + static_cast<size_t>(y) * pw;
      for (int x = 0; x < pw; ++x) dst[x] = src[2 * x];
    }
  };
  extract(out.r, o.r_row, o.r_col);
  extract(out.gr, o.gr_row, o.gr_col);
  extract(out.gb, o.gb_row, o.gb_col);
  extract(out.b, o.b_row, o.b_col);
  return out;
}

std::vector<uint16_t> recompose_cfa(const CfaPlanes& planes, CfaPattern pattern) {
  const Plane& ref = planes.r;
  for (const Plane* p : {&planes.gr, &planes.gb, &planes.b}) {
    if (p->width != ref.width || p->height != ref.height) {
      throw std::invalid_argument("plane shape mismatch: " + std::to_string(p->width) + "x" +
                                  std::to_string(p->height) + " vs " + std::to_string(ref.width) +
                                  "x" + std::to_string(ref.height));
    }
  }
  const int w = ref.width * 2;
  const int h = ref.height * 2;
  std::vector<uint16_t> out(static_cast<size_t>(w) * h);
  const CfaOffsets o = cfa_offsets(pattern);
  auto inject = [&](const Plane& p, int ro, int co) {
    for (int y = 0; y < p.height; ++y) {
      uint16_t* dst = out.data() + static_cast<size_t>(2 * y + ro) * w + co;
      const uint16_t* src = p.v.data() + static_cast<size_t>(y) * p.width;
      for (int x = 0; x < p.width; ++x) dst[2 * x] = src[x];
    }
  };
  inject(planes.r, o.r_row, o.r_col);
  inject(planes.gr, o.gr_row, o.gr_col);
  inject(planes.gb, o.gb_row, o.gb_col);
  inject(planes.b, o.b_row, o.b_col);
  return out;
}

double channel_mean(const Plane& plane, uint16_t black_level) {
  if (plane.v.empty()) throw std::invalid_argument("channel_mean of empty plane");
  double sum = 0.0;
  for (uint16_t s : plane.v) {
    sum += s > black_level ? static_cast<double>(s - black_level) : 0.0;
  }
  return sum / static_cast<double>(plane.v.size());
}

double mean_luma(const RawImage& raw) {
  const CfaPlanes p = decompose_cfa(raw);
  return (channel_mean(p.r, raw.black_level) + channel_mean(p.gr, raw.black_level) +
          channel_mean(p.gb, raw.black_level) + channel_mean(p.b, raw.black_level)) /
         4.0;
}

void write_raw(const RawImage& raw, const std::filesystem::path& path) {
  raw.validate();
  std::string buf;
  buf.reserve(30 + raw.samples.size() * 2);
  buf.append(kMagic, 4);
  put_u16(buf, kFormatVersion);
  put_u16(buf, static_cast<uint16_t>(raw.width));
  put_u16(buf, static_cast<uint16_t>(raw.height));
  buf.push_back(static_cast<char>(raw.bit_depth));
  buf.push_back(static_cast<char>(raw.cfa));
  put_u16(buf, raw.black_level);
  put_f32(buf, static_cast<float>(raw.capture.iso));
  put_f32(buf, static_cast<float>(raw.capture.shutter_ms));
  put_f32(buf, static_cast<float>(raw.capture.aperture_f));
  put_f32(buf, static_cast<float>(raw.capture.focal_mm));
  for (uint16_t s : raw.samples) put_u16(buf, s);

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open for writing: " + path.string());
  f.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!f) throw IoError("short write: " + path.string());
}

RawImage read_raw(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open for reading: " + path.string());
  std::string data((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  Reader rd(reinterpret_cast<const uint8_t*>(data.data()), data.size());

  rd.need(4, "magic");
  if (std::memcmp(data.data(), kMagic, 4) != 0) throw ParseError("bad magic", 0);
  RawImage raw;
  { // header
    rd.u8("magic");
    rd.u8("magic");
    rd.u8("magic");
    rd.u8("magic");
    const uint64_t vpos = rd.pos();
    const uint16_t version = rd.u16("version");
    if (version != kFormatVersion) {
      throw ParseError("unsupported version " + std::to_string(version), vpos);
    }
    raw.width = rd.u16("width");
    raw.height = rd.u16("height");
    raw.bit_depth = rd.u8("bit_depth");
    const uint64_t cpos = rd.pos();
    const uint8_t cfa = rd.u8("cfa_pattern");
    if (cfa > 3) throw ParseError("bad cfa_pattern " + std::to_string(cfa), cpos);
    raw.cfa = static_cast<CfaPattern>(cfa);
    raw.black_level = rd.u16("black_level");
    raw.capture.iso = rd.f32("iso");
    raw.capture.shutter_ms = rd.f32("shutter_ms");
    raw.capture.aperture_f = rd.f32("aperture_f");
    raw.capture.focal_mm = rd.f32("focal_mm");
  }

  const size_t n = static_cast<size_t>(raw.width) * raw.height;
  rd.need(n * 2, "sample payload");
  raw.samples.resize(n);
  const uint16_t mv = raw.max_value();
  for (size_t i = 0; i < n; ++i) {
    const uint64_t spos = rd.pos();
    const uint16_t s = rd.u16("sample");
    if (s > mv) {
      throw ParseError("sample " + std::to_string(i) + " = " + std::to_string(s) +
                           " exceeds max value " + std::to_string(mv),
                       spos);
    }
    raw.samples[i] = s;
  }
  if (rd.pos() != rd.size()) {
    throw ParseError("trailing bytes after payload: file has " + std::to_string(rd.size()) +
                         ", expected " + std::to_string(rd.pos()),
                     rd.pos());
  }
  raw.validate();
  return raw;
}

std::vector<double> plane_to_unit(const Plane& plane, uint16_t black_level, int bit_depth) {
  const double range = static_cast<double>((1 << bit_depth) - 1 - black_level);
  std::vector<double> out(plane.v.size());
  for (size_t i = 0; i < plane.v.size(); ++i) {
    const double dn = plane.v[i] > black_level ? plane.v[i] - black_level : 0.0;
    out[i] = dn / range;
  }
  return out;
}

std::vector<double> area_resize(const std::vector<double>& src, int sw, int sh, int dw, int dh) {
  if (sw <= 0 || sh <= 0 || dw <= 0 || dh <= 0 ||
      src.size() != static_cast<size_t>(sw) * sh) {
    throw std::invalid_argument("area_resize: bad dimensions");
  }
  if (sw == dw && sh == dh) return src;

  std::vector<double> out(static_cast<size_t>(dw) * dh, 0.0);
  const double sx = static_cast<double>(sw) / dw;
  const double sy = static_cast<double>(sh) / dh;
  for (int dy = 0; dy < dh; ++dy) {
    const double y0 = dy * sy, y1 = (dy + 1) * sy;
    const int iy0 = static_cast<int>(y0);
    const int iy1 = std::min(sh - 1, static_cast<int>(std::ceil(y1)) - 1);
    for (int dx = 0; dx < dw; ++dx) {
      const double x0 = dx * sx, x1 = (dx + 1) * sx;
      const int ix0 = static_cast<int>(x0);
      const int ix1 = std::min(sw - 1, static_cast<int>(std::ceil(x1)) - 1);
      double acc = 0.0;
      for (int y = iy0; y <= iy1; ++y) {
        const double wy = std::min<double>(y + 1, y1) - std::max<double>(y, y0);
        for (int x = ix0; x <= ix1; ++x) {
          const double wx = std::min<double>(x + 1, x1) - std::max<double>(x, x0);
          acc += wy * wx * src[static_cast<size_t>(y) * sw + x];
        }
      }
      out[static_cast<size_t>(dy) * dw + dx] = acc / (sx * sy);
    }
  }
  return out;
}

}  // namespace autocam
