// core/include/reprogsv/model.h

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

#ifndef REPROGSV_MODEL_H_
#define REPROGSV_MODEL_H_

#include <filesystem>
#include <map>
#include <vector>

#include "reprogsv/fbank.h"
#include "reprogsv/rng.h"
#include "reprogsv/tensor.h"

namespace reprogsv {

struct BackboneConfig {
  int num_conv_blocks = 3;
  int channels = 32;
  int kernel_size = 5;
  int embedding_dim = 64;
  bool frozen = false;
  int input_dim = 64;  // feature dimension fed to the first block

  void validate() const;
  int64_t min_frames() const {
    return static_cast<int64_t>(num_conv_blocks) * (kernel_size - 1) + 1;
  }
};

// Conv blocks over time, statistics pooling (per-channel mean and standard
// deviation), then a linear map to the embedding. When frozen, parameters
// take no gradients but gradients still flow through to the input features.
class Backbone {
 public:
  Backbone(const BackboneConfig& cfg, Rng& rng);
  Backbone(const BackboneConfig& cfg, const std::map<std::string, Tensor>& params);

  Tensor forward(const Tensor& features) const;  // [F x input_dim] -> [embedding_dim]

  std::vector<Tensor> parameters() const;
  const BackboneConfig& config() const { return cfg_; }
  void set_frozen(bool frozen);
  bool frozen() const { return cfg_.frozen; }
  uint64_t param_hash() const;

 private:
  BackboneConfig cfg_;
  std::vector<Tensor> conv_w_;  // block 0: [C x input_dim x K], rest [C x C x K]
  std::vector<Tensor> conv_b_;  // [C]
  Tensor proj_w_;               // [pool_dim x embedding_dim]
  Tensor proj_b_;               // [embedding_dim]
};

struct EstimatorConfig {
  int channels = 32;
  int attention_blocks = 3;
  bool share_attention_weights = true;
  int kernel_size = 5;
  int input_dim = 64;
  int embedding_dim = 64;

  void validate() const;
};

// Single-head self-attention over time: softmax(Q K^T / sqrt(C)) V.
Tensor self_attention(const Tensor& x, const Tensor& wq, const Tensor& wk,
                      const Tensor& wv);

// Gradient-estimator network: input conv, then
// [shared-weight self-attention -> conv -> relu] per block, statistics
// pooling, linear projection. Emits embeddings of the same dimension as the
// backbone so the two are interchangeable downstream.
class Estimator {
 public:
  Estimator(const EstimatorConfig& cfg, Rng& rng);
  Estimator(const EstimatorConfig& cfg, const std::map<std::string, Tensor>& params);

  Tensor forward(const Tensor& features) const;

  std::vector<Tensor> parameters() const;
  const EstimatorConfig& config() const { return cfg_; }
  int64_t num_parameters() const;

  // Same architecture and values, parameters detached into constants; used
  // when a loss must push gradients through the net but not into it.
  Estimator detached_copy() const;

 private:
  Estimator() = default;
  EstimatorConfig cfg_;
  Tensor in_w_, in_b_;
  std::vector<Tensor> att_q_, att_k_, att_v_;  // one entry when shared
  std::vector<Tensor> blk_w_, blk_b_;
  Tensor proj_w_, proj_b_;
  const Tensor& att(int block, const std::vector<Tensor>& set) const;
};

// Single linear projection, no bias; columns are speaker prototypes.
struct ClassifierHead {
  Tensor projection;  // [embedding_dim x num_speakers]

  int64_t embedding_dim() const { return projection.dim(0); }
  int64_t num_speakers() const { return projection.dim(1); }
};

ClassifierHead make_classifier_head(int64_t embedding_dim, int64_t num_speakers,
                                    Rng& rng);

// Cosine logits: L2-normalized embedding against L2-normalized columns.
Tensor classify(const Tensor& embedding, const ClassifierHead& head);

// Additive angular margin softmax: the target cosine cos(theta) becomes
// cos(theta + margin), all logits are scaled, then cross-entropy.
Tensor aam_loss(const Tensor& cosine_logits, int64_t label, double margin,
                double scale);

// Frozen backbone plus the classifier trained alongside it.
struct SpeakerModel {
  Backbone backbone;
  ClassifierHead head;
  FbankConfig fbank;
};

void save_speaker_model(const std::filesystem::path& path, const SpeakerModel& model);
SpeakerModel load_speaker_model(const std::filesystem::path& path);

void save_estimator(const std::filesystem::path& path, const Estimator& est);
Estimator load_estimator(const std::filesystem::path& path);

// Forward-only access to a backbone. Parameters are probed so that any
// backward accumulation into them is counted; embeddings come back as
// constants, so no gradient path into or through the backbone can exist.
class BlackBoxEmbedder {
 public:
  explicit BlackBoxEmbedder(const Backbone& backbone);
  ~BlackBoxEmbedder();
  BlackBoxEmbedder(const BlackBoxEmbedder&) = delete;
  BlackBoxEmbedder& operator=(const BlackBoxEmbedder&) = delete;

  Tensor embed(const Tensor& features) const;

  int forward_calls() const { return forward_calls_; }
  int backward_touches() const { return backward_touches_; }

 private:
  const Backbone* backbone_;
  mutable int forward_calls_ = 0;
  mutable int backward_touches_ = 0;
};

}  // namespace reprogsv

#endif  // REPROGSV_MODEL_H_
