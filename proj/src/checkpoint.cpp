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

#include "autocam/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "autocam/raw.hpp"
#include "autocam/rng.hpp"

namespace autocam {

namespace {

constexpr char kMagic[4] = {'A', 'C', 'K', 'P'};

void put_u16(std::string& out, uint16_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
}

void put_u32(std::string& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f64(std::string& out, double v) {
  uint64_t bits;
  std::memcpy(&bits, &v, 8);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
}

class Reader {
 public:
  Reader(const uint8_t* data, size_t size) : data_(data), size_(size) {}
  uint64_t pos() const { return pos_; }

  void need(size_t n, const char* what) const {
    if (pos_ + n > size_) {
      throw ParseError(std::string("truncated checkpoint: expected ") +
                           std::to_string(pos_ + n) + " bytes for " + what + ", file has " +
                           std::to_string(size_),
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
  uint32_t u32(const char* what) {
    need(4, what);
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(data_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }
  double f64(const char* what) {
    need(8, what);
    uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= static_cast<uint64_t>(data_[pos_ + i]) << (8 * i);
    pos_ += 8;
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
  }
  std::string bytes(size_t n, const char* what) {
    need(n, what);
    std::string s(reinterpret_cast<const char*>(data_ + pos_), n);
    pos_ += n;
    return s;
  }

 private:
  const uint8_t* data_;
  size_t size_;
  uint64_t pos_ = 0;
};

void write_entry(std::string& buf, const CheckpointEntry& e, uint16_t version) {
  put_u32(buf, static_cast<uint32_t>(e.name.size()));
  buf.append(e.name);
  put_u32(buf, static_cast<uint32_t>(e.shape.size()));
  for (int d : e.shape) put_u32(buf, static_cast<uint32_t>(d));
  if (version >= 2) {
    buf.push_back(static_cast<char>(e.dtype));
    if (e.dtype == TensorDType::I8) put_f64(buf, e.scale);
  }
  if (e.dtype == TensorDType::F64) {
    for (double v : e.f64) put_f64(buf, v);
  } else {
    for (int8_t v : e.i8) buf.push_back(static_cast<char>(v));
  }
}

CheckpointEntry read_entry(Reader& rd, uint16_t version) {
  CheckpointEntry e;
  const uint32_t name_len = rd.u32("name length");
  e.name = rd.bytes(name_len, "tensor name");
  const uint32_t rank = rd.u32("rank");
  if (rank == 0 || rank > 4) {
    throw ParseError("bad tensor rank " + std::to_string(rank) + " for " + e.name,
                     rd.pos() - 4);
  }
  int64_t numel = 1;
  for (uint32_t i = 0; i < rank; ++i) {
    const uint32_t d = rd.u32("dim");
    if (d == 0) throw ParseError("zero dim for " + e.name, rd.pos() - 4);
    e.shape.push_back(static_cast<int>(d));
    numel *= d;
  }
  if (version >= 2) {
    const uint8_t dt = rd.u8("dtype");
    if (dt > 1) throw ParseError("bad dtype tag " + std::to_string(dt), rd.pos() - 1);
    e.dtype = static_cast<TensorDType>(dt);
    if (e.dtype == TensorDType::I8) e.scale = rd.f64("scale");
  }
  if (e.dtype == TensorDType::F64) {
    e.f64.reserve(static_cast<size_t>(numel));
    for (int64_t i = 0; i < numel; ++i) e.f64.push_back(rd.f64("payload"));
  } else {
    const std::string raw = rd.bytes(static_cast<size_t>(numel), "payload");
    e.i8.assign(raw.begin(), raw.end());
  }
  return e;
}

}  // namespace

int64_t CheckpointEntry::numel() const {
  int64_t n = 1;
  for (int d : shape) n *= d;
  return n;
}

std::vector<double> CheckpointEntry::as_f64() const {
  if (dtype == TensorDType::F64) return f64;
  std::vector<double> out(i8.size());
  for (size_t i = 0; i < i8.size(); ++i) out[i] = static_cast<double>(i8[i]) * scale;
  return out;
}

const CheckpointEntry* Checkpoint::find(std::string_view name) const {
  for (const CheckpointEntry& e : model) {
    if (e.name == name) return &e;
  }
  return nullptr;
}

bool Checkpoint::quantized() const {
  for (const CheckpointEntry& e : model) {
    if (e.dtype == TensorDType::I8) return true;
  }
  return false;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  uint16_t version = 1;
  for (const auto* table : {&ckpt.model, &ckpt.optimizer}) {
    for (const CheckpointEntry& e : *table) {
      if (e.dtype != TensorDType::F64) version = 2;
    }
  }
  std::string buf;
  buf.append(kMagic, 4);
  put_u16(buf, version);
  buf.append(reinterpret_cast<const char*>(ckpt.config_hash.data()), 32);
  put_u32(buf, ckpt.epoch);
  put_u32(buf, static_cast<uint32_t>(ckpt.model.size()));
  for (const CheckpointEntry& e : ckpt.model) write_entry(buf, e, version);
  put_u32(buf, static_cast<uint32_t>(ckpt.optimizer.size()));
  for (const CheckpointEntry& e : ckpt.optimizer) write_entry(buf, e, version);

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open checkpoint for writing: " + path.string());
  f.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!f) throw IoError("short write: " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open checkpoint: " + path.string());
  std::string data((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  Reader rd(reinterpret_cast<const uint8_t*>(data.data()), data.size());

  rd.need(4, "magic");
  if (std::memcmp(data.data(), kMagic, 4) != 0) throw ParseError("bad magic", 0);
  rd.bytes(4, "magic");
  const uint16_t version = rd.u16("version");
  if (version < 1 || version > 2) {
    throw ParseError("unsupported checkpoint version " + std::to_string(version), rd.pos() - 2);
  }
  Checkpoint ckpt;
  const std::string hash = rd.bytes(32, "config hash");
  std::memcpy(ckpt.config_hash.data(), hash.data(), 32);
  ckpt.epoch = rd.u32("epoch");
  const uint32_t n_model = rd.u32("model tensor count");
  for (uint32_t i = 0; i < n_model; ++i) ckpt.model.push_back(read_entry(rd, version));
  const uint32_t n_opt = rd.u32("optimizer tensor count");
  for (uint32_t i = 0; i < n_opt; ++i) ckpt.optimizer.push_back(read_entry(rd, version));
  return ckpt;
}

std::array<uint8_t, 32> hash_config(std::string_view canonical) {
  std::array<uint8_t, 32> out{};
  for (int lane = 0; lane < 4; ++lane) {
    uint64_t h = 0xcbf29ce484222325ULL ^ splitmix64(static_cast<uint64_t>(lane) + 1);
    for (char c : canonical) {
      h = (h ^ static_cast<uint8_t>(c)) * 0x100000001b3ULL;
    }
    h = splitmix64(h);
    for (int i = 0; i < 8; ++i) {
      out[static_cast<size_t>(lane * 8 + i)] = static_cast<uint8_t>((h >> (8 * i)) & 0xff);
    }
  }
  return out;
}

}  // namespace autocam
