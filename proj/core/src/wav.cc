// core/src/wav.cc

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

#include "reprogsv/wav.h"

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "reprogsv/tensor.h"

namespace reprogsv {

namespace {

uint32_t rd_u32(const unsigned char* p) {
  return static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
         (static_cast<uint32_t>(p[2]) << 16) | (static_cast<uint32_t>(p[3]) << 24);
}
uint16_t rd_u16(const unsigned char* p) {
  return static_cast<uint16_t>(p[0] | (p[1] << 8));
}

}  // namespace

std::vector<double> load_wav_pcm16_mono(const std::filesystem::path& path,
                                        int expected_rate) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("wav: cannot open '" + path.string() + "'");
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(is)),
                                   std::istreambuf_iterator<char>());
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    throw IoError("wav: '" + path.string() + "' is not a RIFF/WAVE file");
  }

  bool have_fmt = false;
  size_t data_off = 0, data_len = 0;
  size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const unsigned char* hdr = bytes.data() + pos;
    uint32_t chunk_len = rd_u32(hdr + 4);
    size_t body = pos + 8;
    if (body + chunk_len > bytes.size()) {
      throw IoError("wav: truncated chunk in '" + path.string() + "'");
    }
    if (std::memcmp(hdr, "fmt ", 4) == 0) {
      if (chunk_len < 16) throw IoError("wav: malformed fmt chunk in '" + path.string() + "'");
      const unsigned char* f = bytes.data() + body;
      uint16_t format = rd_u16(f + 0);
      uint16_t channels = rd_u16(f + 2);
      uint32_t rate = rd_u32(f + 4);
      uint16_t bits = rd_u16(f + 14);
      if (format != 1) {
        throw IoError("wav: expected 16-bit PCM (format 1), found format " +
                      std::to_string(format) + " in '" + path.string() + "'");
      }
      if (channels != 1) {
        throw IoError("wav: expected mono, found " + std::to_string(channels) +
                      " channels in '" + path.string() + "'");
      }
      if (static_cast<int>(rate) != expected_rate) {
        throw IoError("wav: expected " + std::to_string(expected_rate) +
                      " Hz, found " + std::to_string(rate) + " Hz in '" +
                      path.string() + "'");
      }
      if (bits != 16) {
        throw IoError("wav: expected 16 bits per sample, found " + std::to_string(bits) +
                      " in '" + path.string() + "'");
      }
      have_fmt = true;
    } else if (std::memcmp(hdr, "data", 4) == 0) {
      data_off = body;
      data_len = chunk_len;
    }
    pos = body + chunk_len + (chunk_len & 1);  // chunks are word-aligned
  }
  if (!have_fmt) throw IoError("wav: missing fmt chunk in '" + path.string() + "'");
  if (data_off == 0) throw IoError("wav: missing data chunk in '" + path.string() + "'");

  size_t n = data_len / 2;
  std::vector<double> samples(n);
  for (size_t i = 0; i < n; ++i) {
    const unsigned char* p = bytes.data() + data_off + 2 * i;
    auto v = static_cast<int16_t>(p[0] | (p[1] << 8));
    samples[i] = static_cast<double>(v) / 32768.0;
  }
  return samples;
}

void save_wav_pcm16_mono(const std::filesystem::path& path,
                         std::span<const double> samples, int sample_rate) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("wav: cannot open '" + path.string() + "' for writing");

  uint32_t data_len = static_cast<uint32_t>(samples.size() * 2);
  uint32_t riff_len = 36 + data_len;
  auto w_u32 = [&](uint32_t v) { os.write(reinterpret_cast<const char*>(&v), 4); };
  auto w_u16 = [&](uint16_t v) { os.write(reinterpret_cast<const char*>(&v), 2); };

  os.write("RIFF", 4);
  w_u32(riff_len);
  os.write("WAVE", 4);
  os.write("fmt ", 4);
  w_u32(16);
  w_u16(1);  // PCM
  w_u16(1);  // mono
  w_u32(static_cast<uint32_t>(sample_rate));
  w_u32(static_cast<uint32_t>(sample_rate * 2));  // byte rate
  w_u16(2);                                        // block align
  w_u16(16);                                       // bits
  os.write("data", 4);
  w_u32(data_len);
  for (double s : samples) {
    double clamped = std::max(-1.0, std::min(1.0, s));
    auto q = static_cast<long>(std::lround(clamped * 32768.0));
    if (q > 32767) q = 32767;
    if (q < -32768) q = -32768;
    auto v = static_cast<int16_t>(q);
    os.write(reinterpret_cast<const char*>(&v), 2);
  }
  if (!os) throw IoError("wav: write failed for '" + path.string() + "'");
}

}  // namespace reprogsv
