// core/include/reprogsv/wav.h

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

#ifndef REPROGSV_WAV_H_
#define REPROGSV_WAV_H_

#include <filesystem>
#include <span>
#include <vector>

namespace reprogsv {

// Strict RIFF/WAVE reader: PCM 16-bit, mono, at exactly `expected_rate`.
// No resampling or channel mixdown; mismatches raise IoError naming the
// expected and found values. Samples are scaled to [-1, 1) by 1/32768.
std::vector<double> load_wav_pcm16_mono(const std::filesystem::path& path,
                                        int expected_rate);

// Writes PCM 16-bit mono; samples are clamped to [-1, 1] and quantized with
// round-to-nearest at scale 32768.
void save_wav_pcm16_mono(const std::filesystem::path& path,
                         std::span<const double> samples, int sample_rate);

}  // namespace reprogsv

#endif  // REPROGSV_WAV_H_
