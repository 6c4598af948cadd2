// core/src/fbank.cc

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

#include "reprogsv/fbank.h"

#include <cmath>
#include <vector>

namespace reprogsv {

namespace {
constexpr double kPi = 3.14159265358979323846;
}

void FbankConfig::validate() const {
  if (sample_rate_hz <= 0) throw ConfigError("fbank: sample_rate_hz must be positive");
  if (num_mels < 1) throw ConfigError("fbank: num_mels must be >= 1");
  if (frame_samples() <= 0 || shift_samples() <= 0) {
    throw ConfigError("fbank: frame and shift must be positive");
  }
  if (fft_size < frame_samples()) {
    throw ConfigError("fbank: fft_size " + std::to_string(fft_size) +
                      " smaller than frame of " + std::to_string(frame_samples()) +
                      " samples");
  }
  if (!(fmin_hz >= 0.0) || !(fmin_hz < fmax_hz) ||
      !(fmax_hz <= sample_rate_hz / 2.0)) {
    throw ConfigError("fbank: need 0 <= fmin < fmax <= sample_rate/2, got fmin=" +
                      std::to_string(fmin_hz) + " fmax=" + std::to_string(fmax_hz));
  }
  if (!(log_floor > 0.0)) throw ConfigError("fbank: log_floor must be positive");
}

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

Tensor mel_matrix(const FbankConfig& cfg) {
  cfg.validate();
  int64_t bins = cfg.num_bins();
  int m = cfg.num_mels;
  double bin_hz = static_cast<double>(cfg.sample_rate_hz) / cfg.fft_size;

  double mel_lo = hz_to_mel(cfg.fmin_hz);
  double mel_hi = hz_to_mel(cfg.fmax_hz);
  std::vector<double> edges(static_cast<size_t>(m) + 2);
  for (int i = 0; i < m + 2; ++i) {
    edges[static_cast<size_t>(i)] =
        mel_to_hz(mel_lo + (mel_hi - mel_lo) * i / static_cast<double>(m + 1));
  }

  std::vector<double> w(static_cast<size_t>(m) * static_cast<size_t>(bins), 0.0);
  for (int f = 0; f < m; ++f) {
    double left = edges[static_cast<size_t>(f)];
    double center = edges[static_cast<size_t>(f) + 1];
    double right = edges[static_cast<size_t>(f) + 2];
    // keep the bin sitting exactly on fmax inside the last filter
    if (f == m - 1) right += bin_hz;
    for (int64_t k = 0; k < bins; ++k) {
      double hz = k * bin_hz;
      double val = 0.0;
      if (hz > left && hz <= center) {
        val = (hz - left) / (center - left);
      } else if (hz > center && hz < right) {
        val = (right - hz) / (right - center);
      }
      if (val > 0.0) w[static_cast<size_t>(f) * bins + static_cast<size_t>(k)] = val;
    }
  }
  return Tensor::from_data(std::move(w), {m, bins});
}

FbankExtractor::FbankExtractor(FbankConfig cfg) : cfg_(cfg) {
  cfg_.validate();
  int64_t frame = cfg_.frame_samples();
  int64_t bins = cfg_.num_bins();

  // Periodic Hann; for a DC input with frame == fft_size this puts the whole
  // spectrum in bins 0 and 1 exactly.
  std::vector<double> window(static_cast<size_t>(frame));
  for (int64_t i = 0; i < frame; ++i) {
    window[static_cast<size_t>(i)] =
        0.5 - 0.5 * std::cos(2.0 * kPi * i / static_cast<double>(frame));
  }

  std::vector<double> cosb(static_cast<size_t>(frame * bins));
  std::vector<double> sinb(static_cast<size_t>(frame * bins));
  for (int64_t s = 0; s < frame; ++s) {
    for (int64_t k = 0; k < bins; ++k) {
      double ang = -2.0 * kPi * static_cast<double>(s) * static_cast<double>(k) /
                   static_cast<double>(cfg_.fft_size);
      cosb[static_cast<size_t>(s * bins + k)] = window[static_cast<size_t>(s)] * std::cos(ang);
      sinb[static_cast<size_t>(s * bins + k)] = window[static_cast<size_t>(s)] * std::sin(ang);
    }
  }
  cos_basis_ = Tensor::from_data(std::move(cosb), {frame, bins});
  sin_basis_ = Tensor::from_data(std::move(sinb), {frame, bins});

  Tensor mel = mel_matrix(cfg_);  // [m x bins]
  std::vector<double> melt(static_cast<size_t>(bins) * cfg_.num_mels);
  for (int64_t k = 0; k < bins; ++k)
    for (int f = 0; f < cfg_.num_mels; ++f)
      melt[static_cast<size_t>(k * cfg_.num_mels + f)] = mel.at(f, k);
  mel_t_ = Tensor::from_data(std::move(melt), {bins, cfg_.num_mels});
}

Tensor FbankExtractor::apply(const Tensor& waveform) const {
  if (waveform.ndim() != 1) {
    throw Error("fbank: expected a 1-D waveform, got " + shape_str(waveform.shape()));
  }
  if (waveform.numel() < cfg_.frame_samples()) {
    throw Error("fbank: waveform of " + std::to_string(waveform.numel()) +
                " samples is shorter than one frame of " +
                std::to_string(cfg_.frame_samples()) + " samples");
  }
  for (double v : waveform.data()) {
    if (!std::isfinite(v)) throw Error("fbank: waveform contains non-finite samples");
  }
  Tensor frames = frame_signal(waveform, cfg_.frame_samples(), cfg_.shift_samples());
  Tensor re = matmul(frames, cos_basis_);
  Tensor im = matmul(frames, sin_basis_);
  Tensor powspec = add(mul(re, re), mul(im, im));
  Tensor energies = matmul(powspec, mel_t_);
  // log(max(e, floor)) expressed as relu(e - floor) + floor
  Tensor floor_t = Tensor::scalar(cfg_.log_floor);
  Tensor clamped = add(relu(sub(energies, floor_t)), floor_t);
  return log(clamped);
}

Tensor fbank(const Tensor& waveform, const FbankConfig& cfg) {
  return FbankExtractor(cfg).apply(waveform);
}

}  // namespace reprogsv
