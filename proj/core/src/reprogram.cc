// core/src/reprogram.cc

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

#include "reprogsv/reprogram.h"

#include "reprogsv/checkpoint.h"

namespace reprogsv {

PaddingParams PaddingParams::init(int64_t total_len, int64_t num_segments,
                                  double init_std, Rng& rng) {
  PaddingParams p;
  p.total_len = total_len;
  p.num_segments = num_segments;
  p.init_std = init_std;
  p.validate();
  p.values = Tensor::randn({total_len}, rng, init_std, /*requires_grad=*/true);
  p.values.set_name("padding.values");
  return p;
}

void PaddingParams::validate() const {
  if (total_len < 0) throw ConfigError("padding: total length must be >= 0");
  if (num_segments < 1) throw ConfigError("padding: segment count must be >= 1");
  if (total_len % num_segments != 0) {
    throw ConfigError("padding: total length " + std::to_string(total_len) +
                      " is not divisible by segment count " +
                      std::to_string(num_segments));
  }
  if (!(init_std > 0.0)) throw ConfigError("padding: init_std must be positive");
}

PaddedWaveform pad_raw(const Tensor& x, const Tensor& w) {
  if (x.ndim() != 1 || w.ndim() != 1) {
    throw Error("pad_raw: expected 1-D waveform and padding, got " +
                shape_str(x.shape()) + " and " + shape_str(w.shape()));
  }
  int64_t n = w.numel();
  int64_t left = n / 2;
  int64_t right = n - left;
  PaddedWaveform out;
  out.samples = concat({slice(w, 0, left), x, slice(w, left, right)});
  out.source_len = x.numel();
  out.left_len = left;
  out.right_len = right;
  return out;
}

PaddedWaveform pad_cropped(const Tensor& x, const PaddingParams& padding,
                           int64_t offset) {
  padding.validate();
  int64_t n = padding.segment_len();
  if (offset < 0 || offset + n > padding.total_len) {
    throw Error("pad_cropped: offset " + std::to_string(offset) +
                " out of range for l=" + std::to_string(padding.total_len) +
                ", n=" + std::to_string(n));
  }
  return pad_raw(x, slice(padding.values, offset, n));
}

PaddedWaveform crop_and_pad_train(const Tensor& x, const PaddingParams& padding,
                                  Rng& rng) {
  padding.validate();
  if (padding.total_len < 1) {
    throw Error("crop_and_pad_train: padding has no parameters (l = 0)");
  }
  int64_t n = padding.segment_len();
  int64_t offset = rng.uniform_int(0, padding.total_len - n);
  return pad_cropped(x, padding, offset);
}

std::vector<PaddedWaveform> expand_and_pad_infer(const Tensor& x,
                                                 const PaddingParams& padding) {
  padding.validate();
  int64_t n = padding.segment_len();
  std::vector<PaddedWaveform> copies;
  copies.reserve(static_cast<size_t>(padding.num_segments));
  for (int64_t i = 0; i < padding.num_segments; ++i) {
    PaddedWaveform c = pad_cropped(x, padding, i * n);
    c.segment_index = i;
    copies.push_back(std::move(c));
  }
  return copies;
}

Tensor score_matrix(const std::vector<Tensor>& embs_x,
                    const std::vector<Tensor>& embs_y) {
  if (embs_x.empty() || embs_x.size() != embs_y.size()) {
    throw Error("score_matrix: need equal nonzero copy counts, got " +
                std::to_string(embs_x.size()) + " and " + std::to_string(embs_y.size()));
  }
  int64_t k = static_cast<int64_t>(embs_x.size());
  std::vector<double> s(static_cast<size_t>(k * k));
  for (int64_t i = 0; i < k; ++i) {
    for (int64_t j = 0; j < k; ++j) {
      s[static_cast<size_t>(i * k + j)] =
          cosine_similarity(embs_x[static_cast<size_t>(i)], embs_y[static_cast<size_t>(j)])
              .value();
    }
  }
  return Tensor::from_data(std::move(s), {k, k});
}

ScoreMode score_mode_from_string(const std::string& s) {
  if (s == "mean_all") return ScoreMode::kMeanAll;
  if (s == "mean_offdiag") return ScoreMode::kMeanOffdiag;
  throw ConfigError("unknown score mode '" + s + "', expected mean_all or mean_offdiag");
}

std::string to_string(ScoreMode mode) {
  return mode == ScoreMode::kMeanAll ? "mean_all" : "mean_offdiag";
}

double trial_score(const Tensor& s, ScoreMode mode) {
  if (s.ndim() != 2 || s.dim(0) != s.dim(1) || s.dim(0) < 1) {
    throw Error("trial_score: expected a square score matrix, got " +
                shape_str(s.shape()));
  }
  int64_t k = s.dim(0);
  if (mode == ScoreMode::kMeanAll) {
    double sum = 0;
    for (double v : s.data()) sum += v;
    return sum / static_cast<double>(k * k);
  }
  if (k < 2) {
    throw Error("trial_score: mean_offdiag needs k >= 2, got k = " + std::to_string(k));
  }
  double sum = 0;
  for (int64_t i = 0; i < k; ++i)
    for (int64_t j = 0; j < k; ++j)
      if (i != j) sum += s.at(i, j);
  return sum / static_cast<double>(k * k - k);
}

void save_padding(const std::filesystem::path& path, const PaddingParams& padding) {
  Checkpoint ckpt;
  ckpt.meta["kind"] = "padding";
  ckpt.meta["padding.total_len"] = std::to_string(padding.total_len);
  ckpt.meta["padding.num_segments"] = std::to_string(padding.num_segments);
  ckpt.meta["padding.init_std"] = format_double(padding.init_std);
  ckpt.tensors.emplace("padding.values", padding.values);
  save_checkpoint(path, ckpt);
}

PaddingParams load_padding(const std::filesystem::path& path) {
  Checkpoint ckpt = load_checkpoint(path);
  if (ckpt.require_meta("kind") != "padding") {
    throw IoError("checkpoint: '" + path.string() + "' is not a padding checkpoint");
  }
  PaddingParams p;
  p.total_len = std::stoll(ckpt.require_meta("padding.total_len"));
  p.num_segments = std::stoll(ckpt.require_meta("padding.num_segments"));
  p.init_std = parse_double(ckpt.require_meta("padding.init_std"));
  p.values = ckpt.require_tensor("padding.values").detach();
  p.values.set_requires_grad(true);
  p.values.set_name("padding.values");
  p.validate();
  if (p.values.numel() != p.total_len) {
    throw IoError("checkpoint: padding values length " +
                  std::to_string(p.values.numel()) + " does not match l=" +
                  std::to_string(p.total_len));
  }
  return p;
}

}  // namespace reprogsv
