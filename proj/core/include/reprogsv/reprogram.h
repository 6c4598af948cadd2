// core/include/reprogsv/reprogram.h

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

#ifndef REPROGSV_REPROGRAM_H_
#define REPROGSV_REPROGRAM_H_

#include <filesystem>
#include <optional>
#include <vector>

#include "reprogsv/rng.h"
#include "reprogsv/tensor.h"

namespace reprogsv {

// The learnable padding vector W of total length l, split into k equal
// segments of n = l/k samples. l = 0 is the no-padding baseline.
struct PaddingParams {
  Tensor values;  // [total_len], requires_grad
  int64_t total_len = 0;
  int64_t num_segments = 1;
  double init_std = 1e-3;

  int64_t segment_len() const {
    return num_segments > 0 ? total_len / num_segments : 0;
  }

  // Gaussian init; small stddev keeps the initial padded audio near-silent.
  static PaddingParams init(int64_t total_len, int64_t num_segments, double init_std,
                            Rng& rng);
  void validate() const;
};

struct PaddedWaveform {
  Tensor samples;  // [source_len + n]
  int64_t source_len = 0;
  int64_t left_len = 0;              // n // 2
  int64_t right_len = 0;             // n - n // 2
  std::optional<int64_t> segment_index;
};

// [w_0 .. w_{n//2 - 1}, x, w_{n//2} .. w_{n-1}]; gradients reach w through
// the concatenation.
PaddedWaveform pad_raw(const Tensor& x, const Tensor& w);

// Padding with the n-sample window of W starting at `offset`; gradients
// reach only that slice.
PaddedWaveform pad_cropped(const Tensor& x, const PaddingParams& padding,
                           int64_t offset);

// Training-time step: offset drawn uniformly from [0, l - n].
PaddedWaveform crop_and_pad_train(const Tensor& x, const PaddingParams& padding,
                                  Rng& rng);

// Inference-time expansion: one copy of x per segment, copy i padded with
// segment i. The k segments partition W.
std::vector<PaddedWaveform> expand_and_pad_infer(const Tensor& x,
                                                 const PaddingParams& padding);

// S[i][j] = cosine(embs_x[i], embs_y[j]).
Tensor score_matrix(const std::vector<Tensor>& embs_x,
                    const std::vector<Tensor>& embs_y);

enum class ScoreMode { kMeanAll, kMeanOffdiag };
ScoreMode score_mode_from_string(const std::string& s);
std::string to_string(ScoreMode mode);

// kMeanAll averages all k^2 entries; kMeanOffdiag drops the diagonal and
// needs k >= 2.
double trial_score(const Tensor& s, ScoreMode mode);

void save_padding(const std::filesystem::path& path, const PaddingParams& padding);
PaddingParams load_padding(const std::filesystem::path& path);

}  // namespace reprogsv

#endif  // REPROGSV_REPROGRAM_H_
