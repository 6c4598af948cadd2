// core/src/checkpoint.cc

// Copyright (c) 2026 The reprogsv Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "reprogsv/checkpoint.h"

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>

namespace reprogsv {

namespace {

constexpr char kMagic[8] = {'R', 'S', 'V', 'C', 'K', 'P', 'T', '1'};
constexpr uint32_t kVersion = 1;

void write_u32(std::ostream& os, uint32_t v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(v));
}
void write_i64(std::ostream& os, int64_t v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(v));
}
void write_str(std::ostream& os, const std::string& s) {
  write_u32(os, static_cast<uint32_t>(s.size()));
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

uint32_t read_u32(std::istream& is) {
  uint32_t v = 0;
  is.read(reinterpret_cast<char*>(&v), sizeof(v));
  if (!is) throw IoError("checkpoint: truncated file");
  return v;
}
int64_t read_i64(std::istream& is) {
  int64_t v = 0;
  is.read(reinterpret_cast<char*>(&v), sizeof(v));
  if (!is) throw IoError("checkpoint: truncated file");
  return v;
}
std::string read_str(std::istream& is) {
  uint32_t n = read_u32(is);
  std::string s(n, '\0');
  is.read(s.data(), static_cast<std::streamsize>(n));
  if (!is) throw IoError("checkpoint: truncated file");
  return s;
}

}  // namespace

const std::string& Checkpoint::require_meta(const std::string& key) const {
  auto it = meta.find(key);
  if (it == meta.end()) throw IoError("checkpoint: missing metadata key '" + key + "'");
  return it->second;
}

const Tensor& Checkpoint::require_tensor(const std::string& key) const {
  auto it = tensors.find(key);
  if (it == tensors.end()) throw IoError("checkpoint: missing tensor '" + key + "'");
  return it->second;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("checkpoint: cannot open '" + path.string() + "' for writing");
  os.write(kMagic, sizeof(kMagic));
  write_u32(os, kVersion);
  write_u32(os, static_cast<uint32_t>(ckpt.meta.size()));
  for (const auto& [k, v] : ckpt.meta) {
    write_str(os, k);
    write_str(os, v);
  }
  write_u32(os, static_cast<uint32_t>(ckpt.tensors.size()));
  for (const auto& [name, t] : ckpt.tensors) {
    write_str(os, name);
    write_u32(os, static_cast<uint32_t>(t.ndim()));
    for (int i = 0; i < t.ndim(); ++i) write_i64(os, t.dim(i));
    auto d = t.data();
    os.write(reinterpret_cast<const char*>(d.data()),
             static_cast<std::streamsize>(d.size() * sizeof(double)));
  }
  if (!os) throw IoError("checkpoint: write failed for '" + path.string() + "'");
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("checkpoint: cannot open '" + path.string() + "'");
  char magic[8];
  is.read(magic, sizeof(magic));
  if (!is || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw IoError("checkpoint: '" + path.string() + "' is not a reprogsv checkpoint");
  }
  uint32_t version = read_u32(is);
  if (version != kVersion) {
    throw IoError("checkpoint: unsupported version " + std::to_string(version) +
                  " in '" + path.string() + "', expected " + std::to_string(kVersion));
  }
  Checkpoint ckpt;
  uint32_t n_meta = read_u32(is);
  for (uint32_t i = 0; i < n_meta; ++i) {
    std::string k = read_str(is);
    ckpt.meta[k] = read_str(is);
  }
  uint32_t n_tensors = read_u32(is);
  for (uint32_t i = 0; i < n_tensors; ++i) {
    std::string name = read_str(is);
    uint32_t ndim = read_u32(is);
    std::vector<int64_t> shape(ndim);
    int64_t numel = 1;
    for (uint32_t d = 0; d < ndim; ++d) {
      shape[d] = read_i64(is);
      numel *= shape[d];
    }
    std::vector<double> data(static_cast<size_t>(numel));
    is.read(reinterpret_cast<char*>(data.data()),
            static_cast<std::streamsize>(data.size() * sizeof(double)));
    if (!is) throw IoError("checkpoint: truncated tensor payload in '" + path.string() + "'");
    ckpt.tensors.emplace(name, Tensor::from_data(std::move(data), std::move(shape)));
  }
  return ckpt;
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

double parse_double(const std::string& s) {
  try {
    size_t pos = 0;
    double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("expected a number, got '" + s + "'");
  }
}

}  // namespace reprogsv
