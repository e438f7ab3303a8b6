/*
 * Copyright 2026 The semrl Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "core/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>
#include <vector>

namespace semrl {
namespace {

class Writer {
 public:
  void u32(uint32_t v) { put_le(v, 4); }
  void u64(uint64_t v) { put_le(v, 8); }
  void f64(double v) { u64(std::bit_cast<uint64_t>(v)); }
  void str(const std::string& s) {
    u32(static_cast<uint32_t>(s.size()));
    bytes_.insert(bytes_.end(), s.begin(), s.end());
  }
  void raw(const char* p, size_t n) { bytes_.insert(bytes_.end(), p, p + n); }
  void matrix(const Matrix& m) {
    u32(static_cast<uint32_t>(m.rows()));
    u32(static_cast<uint32_t>(m.cols()));
    for (Eigen::Index i = 0; i < m.size(); ++i) f64(m.data()[i]);
  }
  const std::vector<char>& bytes() const { return bytes_; }

 private:
  void put_le(uint64_t v, int n) {
    for (int i = 0; i < n; ++i) bytes_.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
  }
  std::vector<char> bytes_;
};

class Reader {
 public:
  explicit Reader(std::string data) : data_(std::move(data)) {}
  uint32_t u32() { return static_cast<uint32_t>(get_le(4)); }
  uint64_t u64() { return get_le(8); }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string str() {
    const uint32_t n = u32();
    need(n);
    std::string s = data_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  void raw(char* out, size_t n) {
    need(n);
    std::memcpy(out, data_.data() + pos_, n);
    pos_ += n;
  }
  Matrix matrix() {
    const uint32_t rows = u32(), cols = u32();
    need(static_cast<size_t>(rows) * cols * 8);
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = f64();
    return m;
  }
  bool at_end() const { return pos_ == data_.size(); }

 private:
  void need(size_t n) const {
    if (pos_ + n > data_.size()) fail(ErrorCode::Load, "checkpoint truncated");
  }
  uint64_t get_le(int n) {
    need(static_cast<size_t>(n));
    uint64_t v = 0;
    for (int i = 0; i < n; ++i)
      v |= static_cast<uint64_t>(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i);
    pos_ += static_cast<size_t>(n);
    return v;
  }
  std::string data_;
  size_t pos_ = 0;
};

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  Writer w;
  w.raw(kCheckpointMagic, sizeof(kCheckpointMagic));
  w.u32(kCheckpointVersion);
  w.u64(ckpt.config_hash);
  w.u32(static_cast<uint32_t>(ckpt.header.size()));
  for (const auto& [k, v] : ckpt.header) {
    w.str(k);
    w.str(v);
  }
  w.u32(static_cast<uint32_t>(ckpt.params.count()));
  for (size_t i = 0; i < ckpt.params.count(); ++i) {
    w.str(ckpt.params.at(i).name());
    w.matrix(ckpt.params.at(i).value);
  }
  if (!ckpt.optimizer) {
    w.u32(0);
  } else {
    const auto& opt = *ckpt.optimizer;
    w.u32(static_cast<uint32_t>(opt.kind()));
    w.u64(opt.step_count());
    w.f64(opt.hyper().beta1);
    w.f64(opt.hyper().beta2);
    w.f64(opt.hyper().epsilon);
    const bool has_moments = opt.kind() == OptimizerKind::Adam && !opt.first_moments().empty();
    w.u32(has_moments ? 1 : 0);
    if (has_moments) {
      for (const auto& m : opt.first_moments()) w.matrix(m);
      for (const auto& v : opt.second_moments()) w.matrix(v);
    }
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::Io, "cannot write checkpoint " + path.string());
  out.write(w.bytes().data(), static_cast<std::streamsize>(w.bytes().size()));
  if (!out) fail(ErrorCode::Io, "short write to " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::Load, "cannot open checkpoint " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  Reader r(ss.str());
  char magic[8];
  r.raw(magic, sizeof(magic));
  if (std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0)
    fail(ErrorCode::Load, path.string() + " is not a semrl checkpoint");
  const uint32_t version = r.u32();
  if (version != kCheckpointVersion)
    fail(ErrorCode::Load, "unsupported checkpoint version " + std::to_string(version));
  Checkpoint ckpt;
  ckpt.config_hash = r.u64();
  const uint32_t n_header = r.u32();
  for (uint32_t i = 0; i < n_header; ++i) {
    std::string k = r.str();
    ckpt.header[k] = r.str();
  }
  const uint32_t n_params = r.u32();
  for (uint32_t i = 0; i < n_params; ++i) {
    std::string name = r.str();
    ckpt.params.add(std::move(name), r.matrix());
  }
  const uint32_t kind = r.u32();
  if (kind != 0) {
    if (kind != 1 && kind != 2) fail(ErrorCode::Load, "unknown optimizer kind in checkpoint");
    const uint64_t steps = r.u64();
    AdamHyper h;
    h.beta1 = r.f64();
    h.beta2 = r.f64();
    h.epsilon = r.f64();
    Optimizer opt(static_cast<OptimizerKind>(kind), h);
    opt.set_step_count(steps);
    if (r.u32() == 1) {
      for (uint32_t i = 0; i < n_params; ++i) opt.first_moments().push_back(r.matrix());
      for (uint32_t i = 0; i < n_params; ++i) opt.second_moments().push_back(r.matrix());
    }
    ckpt.optimizer = std::move(opt);
  }
  if (!r.at_end()) fail(ErrorCode::Load, "trailing bytes in checkpoint " + path.string());
  return ckpt;
}

}  // namespace semrl
