// core/include/reprogsv/fbank.h

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

#ifndef REPROGSV_FBANK_H_
#define REPROGSV_FBANK_H_

#include <cstdint>

#include "reprogsv/tensor.h"

namespace reprogsv {

struct FbankConfig {
  int sample_rate_hz = 16000;
  int num_mels = 64;
  double frame_length_ms = 25.0;
  double frame_shift_ms = 10.0;
  int fft_size = 512;
  double fmin_hz = 20.0;
  double fmax_hz = 8000.0;
  double log_floor = 1e-10;

  int64_t frame_samples() const {
    return static_cast<int64_t>(frame_length_ms * sample_rate_hz / 1000.0 + 0.5);
  }
  int64_t shift_samples() const {
    return static_cast<int64_t>(frame_shift_ms * sample_rate_hz / 1000.0 + 0.5);
  }
  int64_t num_bins() const { return fft_size / 2 + 1; }

  void validate() const;
};

double hz_to_mel(double hz);
double mel_to_hz(double mel);

// Triangular filters with centers equally spaced on the mel scale,
// rows: filters, cols: FFT bins. The final filter's falling edge is extended
// by one bin width so a bin landing exactly on fmax keeps nonzero weight.
Tensor mel_matrix(const FbankConfig& cfg);

// Differentiable log-mel pipeline with the window and DFT bases precomputed.
// framing and projections are linear ops, the power spectrum is |DFT|^2, and
// the log is floored at cfg.log_floor, so gradients flow back to the waveform.
class FbankExtractor {
 public:
  explicit FbankExtractor(FbankConfig cfg);

  // waveform [T] -> [num_frames x num_mels],
  // num_frames = floor((T - frame)/shift) + 1.
  Tensor apply(const Tensor& waveform) const;

  const FbankConfig& config() const { return cfg_; }

 private:
  FbankConfig cfg_;
  Tensor cos_basis_;  // [frame x bins], Hann window folded in
  Tensor sin_basis_;
  Tensor mel_t_;      // [bins x num_mels]
};

// One-shot convenience wrapper around FbankExtractor.
Tensor fbank(const Tensor& waveform, const FbankConfig& cfg);

}  // namespace reprogsv

#endif  // REPROGSV_FBANK_H_
