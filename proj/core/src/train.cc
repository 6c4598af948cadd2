// core/src/train.cc

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

#include "reprogsv/train.h"

#include <algorithm>
#include <cmath>
#include <map>

#include "reprogsv/adam.h"

namespace reprogsv {

namespace {

std::map<std::string, int64_t> speaker_labels(const std::vector<Utterance>& corpus) {
  std::map<std::string, int64_t> labels;
  for (const auto& u : corpus) labels.emplace(u.speaker_id, 0);
  int64_t next = 0;
  for (auto& [spk, idx] : labels) idx = next++;
  if (labels.size() < 2) throw ConfigError("training: need at least 2 speakers");
  return labels;
}

void shuffle_indices(std::vector<size_t>& idx, Rng& rng) {
  for (size_t i = idx.size(); i > 1; --i) {
    size_t j = static_cast<size_t>(rng.uniform_int(0, static_cast<int64_t>(i) - 1));
    std::swap(idx[i - 1], idx[j]);
  }
}

void check_finite_loss(double loss, const char* stage, int epoch, size_t step) {
  if (!std::isfinite(loss)) {
    throw Error(std::string(stage) + ": training diverged, non-finite loss " +
                std::to_string(loss) + " at epoch " + std::to_string(epoch) +
                ", step " + std::to_string(step));
  }
}

}  // namespace

Tensor crop_or_tile(const Tensor& samples, int64_t target_len, Rng& rng) {
  int64_t t = samples.numel();
  auto src = samples.data();
  std::vector<double> out(static_cast<size_t>(target_len));
  if (t >= target_len) {
    int64_t offset = t == target_len ? 0 : rng.uniform_int(0, t - target_len);
    std::copy(src.begin() + offset, src.begin() + offset + target_len, out.begin());
  } else {
    for (int64_t i = 0; i < target_len; ++i) {
      out[static_cast<size_t>(i)] = src[static_cast<size_t>(i % t)];
    }
  }
  return Tensor::from_data(std::move(out), {target_len});
}

PretrainResult pretrain(const std::vector<Utterance>& corpus, const ExperimentConfig& cfg_in) {
  ExperimentConfig cfg = cfg_in;
  cfg.validate_and_finalize();
  if (corpus.empty()) throw ConfigError("pretrain: empty corpus");

  auto labels = speaker_labels(corpus);
  Rng rng(Rng::mix(cfg.seed, 0x11a1));

  BackboneConfig bc = cfg.backbone;
  bc.frozen = false;
  Backbone backbone(bc, rng);
  ClassifierHead head = make_classifier_head(bc.embedding_dim,
                                             static_cast<int64_t>(labels.size()), rng);
  FbankExtractor extractor(cfg.fbank);

  std::vector<Tensor> params = backbone.parameters();
  params.push_back(head.projection);

  AdamState adam;
  adam.weight_decay = cfg.weight_decay;

  int64_t crop = cfg.crop_samples();
  std::vector<size_t> order(corpus.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;

  std::vector<EpochLog> log;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    adam.learning_rate = cfg.lr_at_epoch(epoch);
    shuffle_indices(order, rng);
    double epoch_loss = 0.0;
    size_t num_batches = 0;
    for (size_t start = 0; start < order.size(); start += static_cast<size_t>(cfg.batch_size)) {
      size_t end = std::min(order.size(), start + static_cast<size_t>(cfg.batch_size));
      Tape tape;
      TapeScope scope(&tape);
      std::vector<Tensor> losses;
      for (size_t i = start; i < end; ++i) {
        const Utterance& u = corpus[order[i]];
        Tensor x = crop_or_tile(u.samples, crop, rng);
        Tensor feats = extractor.apply(x);
        Tensor emb = backbone.forward(feats);
        Tensor logits = classify(emb, head);
        losses.push_back(aam_loss(logits, labels.at(u.speaker_id), cfg.aam_margin,
                                  cfg.aam_scale));
      }
      Tensor loss = mean_all(concat(losses));
      check_finite_loss(loss.value(), "pretrain", epoch, num_batches);
      zero_grads(params);
      backward(loss);
      adam_step(params, adam);
      epoch_loss += loss.value();
      ++num_batches;
    }
    log.push_back({epoch, epoch_loss / static_cast<double>(num_batches),
                   adam.learning_rate, -1.0});
  }

  backbone.set_frozen(true);
  return PretrainResult{SpeakerModel{std::move(backbone), std::move(head), cfg.fbank}, log};
}

AdaptResult adapt_vanilla(const SpeakerModel& model, const std::vector<Utterance>& corpus,
                          const ExperimentConfig& cfg_in) {
  ExperimentConfig cfg = cfg_in;
  cfg.validate_and_finalize();
  if (!model.backbone.frozen()) {
    throw Error("adapt_vanilla: backbone must be frozen before adaptation");
  }
  uint64_t hash_before = model.backbone.param_hash();
  auto labels = speaker_labels(corpus);
  Rng rng(Rng::mix(cfg.seed, 0xada7));

  int64_t emb_dim = model.backbone.config().embedding_dim;
  PaddingParams padding;
  if (cfg.padding_l > 0) {
    padding = PaddingParams::init(cfg.padding_l, cfg.padding_k, cfg.padding_init_std, rng);
  } else {
    padding.total_len = 0;
    padding.num_segments = 1;
    padding.init_std = cfg.padding_init_std;
    padding.values = Tensor::zeros({0}, /*requires_grad=*/true);
    padding.values.set_name("padding.values");
  }
  ClassifierHead head = make_classifier_head(emb_dim, static_cast<int64_t>(labels.size()), rng);
  FbankExtractor extractor(cfg.fbank);

  std::vector<Tensor> params;
  if (cfg.padding_l > 0) params.push_back(padding.values);
  bool train_head = !cfg.small_data_mode;
  if (train_head) {
    params.push_back(head.projection);
  } else {
    head.projection.set_requires_grad(false);  // frozen random projection
  }
  if (params.empty()) {
    throw ConfigError("adapt_vanilla: nothing to train (l = 0 and the classifier frozen)");
  }

  AdamState adam;
  adam.weight_decay = cfg.weight_decay;

  int64_t crop = cfg.crop_samples();
  std::vector<size_t> order(corpus.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;

  std::vector<EpochLog> log;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    adam.learning_rate = cfg.lr_at_epoch(epoch);
    shuffle_indices(order, rng);
    double epoch_loss = 0.0;
    size_t num_batches = 0;
    for (size_t start = 0; start < order.size(); start += static_cast<size_t>(cfg.batch_size)) {
      size_t end = std::min(order.size(), start + static_cast<size_t>(cfg.batch_size));
      Tape tape;
      TapeScope scope(&tape);
      std::vector<Tensor> losses;
      for (size_t i = start; i < end; ++i) {
        const Utterance& u = corpus[order[i]];
        Tensor x = crop_or_tile(u.samples, crop, rng);
        Tensor input = cfg.padding_l > 0 ? crop_and_pad_train(x, padding, rng).samples : x;
        Tensor feats = extractor.apply(input);
        Tensor emb = model.backbone.forward(feats);
        Tensor logits = classify(emb, head);
        losses.push_back(aam_loss(logits, labels.at(u.speaker_id), cfg.aam_margin,
                                  cfg.aam_scale));
      }
      Tensor loss = mean_all(concat(losses));
      check_finite_loss(loss.value(), "adapt_vanilla", epoch, num_batches);
      zero_grads(params);
      backward(loss);
      adam_step(params, adam);
      epoch_loss += loss.value();
      ++num_batches;
    }
    log.push_back({epoch, epoch_loss / static_cast<double>(num_batches),
                   adam.learning_rate, -1.0});
  }

  if (model.backbone.param_hash() != hash_before) {
    throw Error("adapt_vanilla: backbone parameters changed during adaptation");
  }
  return AdaptResult{std::move(padding), std::move(head), std::nullopt, log, 0, 0};
}

AdaptResult adapt_grad_est(const SpeakerModel& model, const std::vector<Utterance>& corpus,
                           const ExperimentConfig& cfg_in) {
  ExperimentConfig cfg = cfg_in;
  cfg.validate_and_finalize();
  if (!model.backbone.frozen()) {
    throw Error("adapt_grad_est: backbone must be frozen before adaptation");
  }
  uint64_t hash_before = model.backbone.param_hash();
  auto labels = speaker_labels(corpus);
  Rng rng(Rng::mix(cfg.seed, 0x6e57));

  // All backbone access below goes through this forward-only interface.
  BlackBoxEmbedder box(model.backbone);

  int64_t emb_dim = model.backbone.config().embedding_dim;
  EstimatorConfig ec = cfg.estimator;
  ec.input_dim = cfg.fbank.num_mels;
  ec.embedding_dim = static_cast<int>(emb_dim);
  Estimator estimator(ec, rng);

  PaddingParams padding;
  if (cfg.padding_l > 0) {
    padding = PaddingParams::init(cfg.padding_l, cfg.padding_k, cfg.padding_init_std, rng);
  } else {
    padding.total_len = 0;
    padding.num_segments = 1;
    padding.init_std = cfg.padding_init_std;
    padding.values = Tensor::zeros({0}, /*requires_grad=*/true);
    padding.values.set_name("padding.values");
  }
  ClassifierHead head = make_classifier_head(emb_dim, static_cast<int64_t>(labels.size()), rng);
  FbankExtractor extractor(cfg.fbank);

  std::vector<Tensor> params = estimator.parameters();
  if (cfg.padding_l > 0) params.push_back(padding.values);
  bool train_head = !cfg.small_data_mode;
  if (train_head) {
    params.push_back(head.projection);
  } else {
    head.projection.set_requires_grad(false);
  }

  AdamState adam;
  adam.weight_decay = cfg.weight_decay;

  int64_t crop = cfg.crop_samples();
  std::vector<size_t> order(corpus.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;

  std::vector<EpochLog> log;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    adam.learning_rate = cfg.lr_at_epoch(epoch);
    shuffle_indices(order, rng);
    double epoch_loss = 0.0, epoch_distill = 0.0;
    size_t num_batches = 0, num_samples = 0;
    for (size_t start = 0; start < order.size(); start += static_cast<size_t>(cfg.batch_size)) {
      size_t end = std::min(order.size(), start + static_cast<size_t>(cfg.batch_size));
      Tape tape;
      TapeScope scope(&tape);
      // Per-batch constants: gradients of the surrogate loss must reach the
      // padding alone, so the estimator and classifier enter it as values.
      Estimator est_const = estimator.detached_copy();
      ClassifierHead head_const{head.projection.detach()};
      std::vector<Tensor> losses;
      for (size_t i = start; i < end; ++i) {
        const Utterance& u = corpus[order[i]];
        int64_t label = labels.at(u.speaker_id);
        Tensor x = crop_or_tile(u.samples, crop, rng);
        Tensor input = cfg.padding_l > 0 ? crop_and_pad_train(x, padding, rng).samples : x;
        Tensor feats = extractor.apply(input);
        Tensor feats_const = feats.detach();

        Tensor emb_f = box.embed(feats_const);  // constant by construction

        // distillation: trains the estimator only
        Tensor diff = sub(estimator.forward(feats_const), emb_f);
        Tensor distill = mean_all(mul(diff, diff));
        epoch_distill += distill.value();

        // classifier: trains on the backbone's embeddings only
        Tensor head_loss = aam_loss(classify(emb_f, head), label, cfg.aam_margin,
                                    cfg.aam_scale);

        Tensor sample_loss = add(distill, head_loss);
        if (cfg.padding_l > 0) {
          // surrogate path: gradients flow through the estimator into W
          Tensor surr = aam_loss(classify(est_const.forward(feats), head_const), label,
                                 cfg.aam_margin, cfg.aam_scale);
          sample_loss = add(sample_loss, surr);
        }
        losses.push_back(sample_loss);
        ++num_samples;
      }
      Tensor loss = mean_all(concat(losses));
      check_finite_loss(loss.value(), "adapt_grad_est", epoch, num_batches);
      zero_grads(params);
      backward(loss);
      adam_step(params, adam);
      epoch_loss += loss.value();
      ++num_batches;
    }
    log.push_back({epoch, epoch_loss / static_cast<double>(num_batches),
                   adam.learning_rate,
                   epoch_distill / static_cast<double>(num_samples)});
  }

  if (model.backbone.param_hash() != hash_before) {
    throw Error("adapt_grad_est: backbone parameters changed during adaptation");
  }
  if (box.backward_touches() != 0) {
    throw Error("adapt_grad_est: backward pass reached the black-box backbone");
  }
  return AdaptResult{std::move(padding), std::move(head), std::move(estimator), log,
                     box.forward_calls(), box.backward_touches()};
}

}  // namespace reprogsv
