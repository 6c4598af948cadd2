// core/include/reprogsv/train.h

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

#ifndef REPROGSV_TRAIN_H_
#define REPROGSV_TRAIN_H_

#include <optional>
#include <vector>

#include "reprogsv/config.h"
#include "reprogsv/data.h"
#include "reprogsv/model.h"
#include "reprogsv/reprogram.h"

namespace reprogsv {

struct EpochLog {
  int epoch = 0;
  double mean_loss = 0.0;
  double lr = 0.0;
  double mean_distill_loss = -1.0;  // gradient-estimated mode only
};

struct PretrainResult {
  SpeakerModel model;  // backbone returned frozen, ready for adaptation
  std::vector<EpochLog> log;
};

// AAM-softmax training of backbone + classifier on random crops.
PretrainResult pretrain(const std::vector<Utterance>& corpus,
                        const ExperimentConfig& cfg);

struct AdaptResult {
  PaddingParams padding;
  ClassifierHead head;
  std::optional<Estimator> estimator;
  std::vector<EpochLog> log;
  int backbone_forward_calls = 0;     // black-box mode only
  int backbone_backward_touches = 0;  // black-box mode only; must be 0
};

// White-box adaptation: crop -> pad -> fbank -> frozen backbone ->
// classifier -> AAM loss; Adam updates the padding and the classifier only.
AdaptResult adapt_vanilla(const SpeakerModel& model,
                          const std::vector<Utterance>& corpus,
                          const ExperimentConfig& cfg);

// Black-box adaptation: the backbone is reachable only through a
// forward-only embedder. The estimator is distilled toward the backbone's embeddings, a
// surrogate classification loss pushes gradients through the estimator into
// the padding, and the classifier trains on the backbone's embeddings.
AdaptResult adapt_grad_est(const SpeakerModel& model,
                           const std::vector<Utterance>& corpus,
                           const ExperimentConfig& cfg);

// Deterministic crop helper shared by the training loops: random window for
// long utterances, cyclic tiling for short ones.
Tensor crop_or_tile(const Tensor& samples, int64_t target_len, Rng& rng);

}  // namespace reprogsv

#endif  // REPROGSV_TRAIN_H_
