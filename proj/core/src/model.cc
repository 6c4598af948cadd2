// core/src/model.cc

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

#include "reprogsv/model.h"

#include <cmath>

#include "reprogsv/checkpoint.h"

namespace reprogsv {

namespace {

constexpr double kHalfPi = 1.57079632679489661923;

Tensor named_randn(std::vector<int64_t> shape, Rng& rng, double stddev,
                   std::string name) {
  Tensor t = Tensor::randn(std::move(shape), rng, stddev, /*requires_grad=*/true);
  t.set_name(std::move(name));
  return t;
}

Tensor named_zeros(std::vector<int64_t> shape, std::string name) {
  Tensor t = Tensor::zeros(std::move(shape), /*requires_grad=*/true);
  t.set_name(std::move(name));
  return t;
}

Tensor take_param(const std::map<std::string, Tensor>& params, const std::string& name,
                  const std::vector<int64_t>& shape) {
  auto it = params.find(name);
  if (it == params.end()) throw IoError("model: missing parameter '" + name + "'");
  if (it->second.shape() != shape) {
    throw IoError("model: parameter '" + name + "' has shape " +
                  shape_str(it->second.shape()) + ", expected " + shape_str(shape));
  }
  Tensor t = it->second.detach();
  t.set_requires_grad(true);
  t.set_name(name);
  return t;
}

uint64_t fnv1a(uint64_t h, const void* data, size_t n) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

// ---- Backbone ----

void BackboneConfig::validate() const {
  if (embedding_dim < 2) throw ConfigError("backbone: embedding_dim must be >= 2");
  if (channels < 1) throw ConfigError("backbone: channels must be >= 1");
  if (kernel_size < 1) throw ConfigError("backbone: kernel_size must be >= 1");
  if (num_conv_blocks < 0) throw ConfigError("backbone: num_conv_blocks must be >= 0");
  if (input_dim < 1) throw ConfigError("backbone: input_dim must be >= 1");
}

Backbone::Backbone(const BackboneConfig& cfg, Rng& rng) : cfg_(cfg) {
  cfg_.validate();
  int64_t c = cfg_.channels, k = cfg_.kernel_size;
  for (int b = 0; b < cfg_.num_conv_blocks; ++b) {
    int64_t cin = b == 0 ? cfg_.input_dim : c;
    std::string base = "backbone.conv" + std::to_string(b);
    conv_w_.push_back(named_randn({c, cin, k}, rng,
                                  std::sqrt(2.0 / static_cast<double>(cin * k)),
                                  base + ".weight"));
    conv_b_.push_back(named_zeros({c}, base + ".bias"));
  }
  int64_t pool_dim = 2 * (cfg_.num_conv_blocks > 0 ? c : cfg_.input_dim);
  proj_w_ = named_randn({pool_dim, cfg_.embedding_dim}, rng,
                        std::sqrt(1.0 / static_cast<double>(pool_dim)),
                        "backbone.proj.weight");
  proj_b_ = named_zeros({cfg_.embedding_dim}, "backbone.proj.bias");
  set_frozen(cfg.frozen);
}

Backbone::Backbone(const BackboneConfig& cfg, const std::map<std::string, Tensor>& params)
    : cfg_(cfg) {
  cfg_.validate();
  int64_t c = cfg_.channels, k = cfg_.kernel_size;
  for (int b = 0; b < cfg_.num_conv_blocks; ++b) {
    int64_t cin = b == 0 ? cfg_.input_dim : c;
    std::string base = "backbone.conv" + std::to_string(b);
    conv_w_.push_back(take_param(params, base + ".weight", {c, cin, k}));
    conv_b_.push_back(take_param(params, base + ".bias", {c}));
  }
  int64_t pool_dim = 2 * (cfg_.num_conv_blocks > 0 ? c : cfg_.input_dim);
  proj_w_ = take_param(params, "backbone.proj.weight", {pool_dim, cfg_.embedding_dim});
  proj_b_ = take_param(params, "backbone.proj.bias", {cfg_.embedding_dim});
  set_frozen(cfg.frozen);
}

Tensor Backbone::forward(const Tensor& features) const {
  if (features.ndim() != 2 || features.dim(1) != cfg_.input_dim) {
    throw Error("backbone: expected features [frames x " + std::to_string(cfg_.input_dim) +
                "], got " + shape_str(features.shape()));
  }
  if (features.dim(0) < cfg_.min_frames()) {
    throw Error("backbone: input has " + std::to_string(features.dim(0)) +
                " frames, at least " + std::to_string(cfg_.min_frames()) + " required");
  }
  Tensor x = features;
  for (size_t b = 0; b < conv_w_.size(); ++b) {
    x = relu(add(conv1d(x, conv_w_[b]), conv_b_[b]));
  }
  Tensor pooled = concat({mean_axis0(x), sqrt(variance_axis0(x))});
  return add(matmul(pooled, proj_w_), proj_b_);
}

std::vector<Tensor> Backbone::parameters() const {
  std::vector<Tensor> out;
  for (size_t b = 0; b < conv_w_.size(); ++b) {
    out.push_back(conv_w_[b]);
    out.push_back(conv_b_[b]);
  }
  out.push_back(proj_w_);
  out.push_back(proj_b_);
  return out;
}

void Backbone::set_frozen(bool frozen) {
  cfg_.frozen = frozen;
  for (auto& p : parameters()) p.set_requires_grad(!frozen);
}

uint64_t Backbone::param_hash() const {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& p : parameters()) {
    h = fnv1a(h, p.name().data(), p.name().size());
    auto d = p.data();
    h = fnv1a(h, d.data(), d.size() * sizeof(double));
  }
  return h;
}

// ---- Estimator ----

void EstimatorConfig::validate() const {
  if (channels < 1) throw ConfigError("estimator: channels must be >= 1");
  if (attention_blocks < 0) throw ConfigError("estimator: attention_blocks must be >= 0");
  if (kernel_size < 1) throw ConfigError("estimator: kernel_size must be >= 1");
  if (input_dim < 1) throw ConfigError("estimator: input_dim must be >= 1");
  if (embedding_dim < 2) throw ConfigError("estimator: embedding_dim must be >= 2");
}

Tensor self_attention(const Tensor& x, const Tensor& wq, const Tensor& wk,
                      const Tensor& wv) {
  Tensor q = matmul(x, wq);
  Tensor k = matmul(x, wk);
  Tensor v = matmul(x, wv);
  double scale = 1.0 / std::sqrt(static_cast<double>(wq.dim(1)));
  Tensor scores = mul(matmul(q, k, false, true), Tensor::scalar(scale));
  return matmul(softmax_rows(scores), v);
}

Estimator::Estimator(const EstimatorConfig& cfg, Rng& rng) : cfg_(cfg) {
  cfg_.validate();
  int64_t c = cfg_.channels, k = cfg_.kernel_size;
  in_w_ = named_randn({c, cfg_.input_dim, k}, rng,
                      std::sqrt(2.0 / static_cast<double>(cfg_.input_dim * k)),
                      "estimator.in.weight");
  in_b_ = named_zeros({c}, "estimator.in.bias");
  int sets = cfg_.attention_blocks == 0 ? 0 : (cfg_.share_attention_weights ? 1 : cfg_.attention_blocks);
  double att_std = std::sqrt(1.0 / static_cast<double>(c));
  for (int s = 0; s < sets; ++s) {
    std::string base = "estimator.att" + std::to_string(s);
    att_q_.push_back(named_randn({c, c}, rng, att_std, base + ".q"));
    att_k_.push_back(named_randn({c, c}, rng, att_std, base + ".k"));
    att_v_.push_back(named_randn({c, c}, rng, att_std, base + ".v"));
  }
  for (int b = 0; b < cfg_.attention_blocks; ++b) {
    std::string base = "estimator.conv" + std::to_string(b);
    blk_w_.push_back(named_randn({c, c, k}, rng,
                                 std::sqrt(2.0 / static_cast<double>(c * k)),
                                 base + ".weight"));
    blk_b_.push_back(named_zeros({c}, base + ".bias"));
  }
  proj_w_ = named_randn({2 * c, cfg_.embedding_dim}, rng,
                        std::sqrt(1.0 / static_cast<double>(2 * c)),
                        "estimator.proj.weight");
  proj_b_ = named_zeros({cfg_.embedding_dim}, "estimator.proj.bias");
}

Estimator::Estimator(const EstimatorConfig& cfg, const std::map<std::string, Tensor>& params)
    : cfg_(cfg) {
  cfg_.validate();
  int64_t c = cfg_.channels, k = cfg_.kernel_size;
  in_w_ = take_param(params, "estimator.in.weight", {c, cfg_.input_dim, k});
  in_b_ = take_param(params, "estimator.in.bias", {c});
  int sets = cfg_.attention_blocks == 0 ? 0 : (cfg_.share_attention_weights ? 1 : cfg_.attention_blocks);
  for (int s = 0; s < sets; ++s) {
    std::string base = "estimator.att" + std::to_string(s);
    att_q_.push_back(take_param(params, base + ".q", {c, c}));
    att_k_.push_back(take_param(params, base + ".k", {c, c}));
    att_v_.push_back(take_param(params, base + ".v", {c, c}));
  }
  for (int b = 0; b < cfg_.attention_blocks; ++b) {
    std::string base = "estimator.conv" + std::to_string(b);
    blk_w_.push_back(take_param(params, base + ".weight", {c, c, k}));
    blk_b_.push_back(take_param(params, base + ".bias", {c}));
  }
  proj_w_ = take_param(params, "estimator.proj.weight", {2 * c, cfg_.embedding_dim});
  proj_b_ = take_param(params, "estimator.proj.bias", {cfg_.embedding_dim});
}

const Tensor& Estimator::att(int block, const std::vector<Tensor>& set) const {
  return set[cfg_.share_attention_weights ? 0 : static_cast<size_t>(block)];
}

Tensor Estimator::forward(const Tensor& features) const {
  if (features.ndim() != 2 || features.dim(1) != cfg_.input_dim) {
    throw Error("estimator: expected features [frames x " + std::to_string(cfg_.input_dim) +
                "], got " + shape_str(features.shape()));
  }
  int64_t needed = static_cast<int64_t>(cfg_.attention_blocks + 1) * (cfg_.kernel_size - 1) + 1;
  if (features.dim(0) < needed) {
    throw Error("estimator: input has " + std::to_string(features.dim(0)) +
                " frames, at least " + std::to_string(needed) + " required");
  }
  Tensor x = relu(add(conv1d(features, in_w_), in_b_));
  for (int b = 0; b < cfg_.attention_blocks; ++b) {
    x = self_attention(x, att(b, att_q_), att(b, att_k_), att(b, att_v_));
    x = relu(add(conv1d(x, blk_w_[static_cast<size_t>(b)]), blk_b_[static_cast<size_t>(b)]));
  }
  Tensor pooled = concat({mean_axis0(x), sqrt(variance_axis0(x))});
  return add(matmul(pooled, proj_w_), proj_b_);
}

std::vector<Tensor> Estimator::parameters() const {
  std::vector<Tensor> out{in_w_, in_b_};
  for (size_t s = 0; s < att_q_.size(); ++s) {
    out.push_back(att_q_[s]);
    out.push_back(att_k_[s]);
    out.push_back(att_v_[s]);
  }
  for (size_t b = 0; b < blk_w_.size(); ++b) {
    out.push_back(blk_w_[b]);
    out.push_back(blk_b_[b]);
  }
  out.push_back(proj_w_);
  out.push_back(proj_b_);
  return out;
}

int64_t Estimator::num_parameters() const {
  int64_t n = 0;
  for (const auto& p : parameters()) n += p.numel();
  return n;
}

Estimator Estimator::detached_copy() const {
  Estimator e;
  e.cfg_ = cfg_;
  e.in_w_ = in_w_.detach();
  e.in_b_ = in_b_.detach();
  for (size_t s = 0; s < att_q_.size(); ++s) {
    e.att_q_.push_back(att_q_[s].detach());
    e.att_k_.push_back(att_k_[s].detach());
    e.att_v_.push_back(att_v_[s].detach());
  }
  for (size_t b = 0; b < blk_w_.size(); ++b) {
    e.blk_w_.push_back(blk_w_[b].detach());
    e.blk_b_.push_back(blk_b_[b].detach());
  }
  e.proj_w_ = proj_w_.detach();
  e.proj_b_ = proj_b_.detach();
  return e;
}

// ---- classifier head and loss ----

ClassifierHead make_classifier_head(int64_t embedding_dim, int64_t num_speakers,
                                    Rng& rng) {
  if (num_speakers < 1) throw ConfigError("classifier head: need at least one speaker");
  Tensor proj = Tensor::randn({embedding_dim, num_speakers}, rng,
                              std::sqrt(1.0 / static_cast<double>(embedding_dim)),
                              /*requires_grad=*/true);
  proj.set_name("head.projection");
  return ClassifierHead{proj};
}

Tensor classify(const Tensor& embedding, const ClassifierHead& head) {
  if (embedding.ndim() != 1 || embedding.numel() != head.embedding_dim()) {
    throw Error("classify: embedding " + shape_str(embedding.shape()) +
                " does not match head " + shape_str(head.projection.shape()));
  }
  double e_dim = static_cast<double>(head.embedding_dim());
  Tensor sumsq = mul(mean_all(mul(embedding, embedding)), Tensor::scalar(e_dim));
  if (!(sumsq.value() > 0.0)) throw Error("classify: zero-norm embedding");
  Tensor ne = mul(embedding, power(sumsq, -0.5));

  Tensor col_sumsq = mul(mean_axis0(mul(head.projection, head.projection)),
                         Tensor::scalar(e_dim));
  for (int64_t j = 0; j < col_sumsq.numel(); ++j) {
    if (!(col_sumsq.at(j) > 0.0)) {
      throw Error("classify: zero-norm head column " + std::to_string(j));
    }
  }
  Tensor nh = mul(head.projection, power(col_sumsq, -0.5));
  return matmul(ne, nh);
}

Tensor aam_loss(const Tensor& cosine_logits, int64_t label, double margin, double scale) {
  if (cosine_logits.ndim() != 1 || cosine_logits.numel() == 0) {
    throw Error("aam_loss: expected non-empty 1-D logits, got " +
                shape_str(cosine_logits.shape()));
  }
  int64_t n = cosine_logits.numel();
  if (label < 0 || label >= n) {
    throw Error("aam_loss: label " + std::to_string(label) + " out of range for " +
                std::to_string(n) + " speakers");
  }
  if (!(margin >= 0.0) || !(margin < kHalfPi)) {
    throw Error("aam_loss: margin must be in [0, pi/2), got " + std::to_string(margin));
  }
  if (!(scale > 0.0)) throw Error("aam_loss: scale must be positive");
  for (double v : cosine_logits.data()) {
    if (std::abs(v) > 1.0 + 1e-8) {
      throw Error("aam_loss: logits must be cosines in [-1, 1], got " + std::to_string(v));
    }
  }
  Tensor c = slice(cosine_logits, label, 1);
  // cos(theta + m) = c*cos(m) - sqrt(1 - c^2)*sin(m); the relu clamps tiny
  // negative 1 - c^2 from rounding
  Tensor sin_t = sqrt(relu(sub(Tensor::scalar(1.0), mul(c, c))));
  Tensor margined = sub(mul(c, Tensor::scalar(std::cos(margin))),
                        mul(sin_t, Tensor::scalar(std::sin(margin))));
  Tensor assembled = concat({slice(cosine_logits, 0, label), margined,
                             slice(cosine_logits, label + 1, n - label - 1)});
  return softmax_cross_entropy(mul(assembled, Tensor::scalar(scale)), label);
}

// ---- persistence ----

namespace {

void put_int(std::map<std::string, std::string>& m, const std::string& k, int64_t v) {
  m[k] = std::to_string(v);
}
int64_t get_int(const Checkpoint& c, const std::string& k) {
  return std::stoll(c.require_meta(k));
}

std::map<std::string, std::string> fbank_meta(const FbankConfig& f) {
  std::map<std::string, std::string> m;
  m["fbank.sample_rate_hz"] = std::to_string(f.sample_rate_hz);
  m["fbank.num_mels"] = std::to_string(f.num_mels);
  m["fbank.frame_length_ms"] = format_double(f.frame_length_ms);
  m["fbank.frame_shift_ms"] = format_double(f.frame_shift_ms);
  m["fbank.fft_size"] = std::to_string(f.fft_size);
  m["fbank.fmin_hz"] = format_double(f.fmin_hz);
  m["fbank.fmax_hz"] = format_double(f.fmax_hz);
  m["fbank.log_floor"] = format_double(f.log_floor);
  return m;
}

FbankConfig fbank_from_meta(const Checkpoint& c) {
  FbankConfig f;
  f.sample_rate_hz = static_cast<int>(get_int(c, "fbank.sample_rate_hz"));
  f.num_mels = static_cast<int>(get_int(c, "fbank.num_mels"));
  f.frame_length_ms = parse_double(c.require_meta("fbank.frame_length_ms"));
  f.frame_shift_ms = parse_double(c.require_meta("fbank.frame_shift_ms"));
  f.fft_size = static_cast<int>(get_int(c, "fbank.fft_size"));
  f.fmin_hz = parse_double(c.require_meta("fbank.fmin_hz"));
  f.fmax_hz = parse_double(c.require_meta("fbank.fmax_hz"));
  f.log_floor = parse_double(c.require_meta("fbank.log_floor"));
  return f;
}

}  // namespace

void save_speaker_model(const std::filesystem::path& path, const SpeakerModel& model) {
  Checkpoint ckpt;
  ckpt.meta["kind"] = "speaker_model";
  const auto& b = model.backbone.config();
  put_int(ckpt.meta, "backbone.num_conv_blocks", b.num_conv_blocks);
  put_int(ckpt.meta, "backbone.channels", b.channels);
  put_int(ckpt.meta, "backbone.kernel_size", b.kernel_size);
  put_int(ckpt.meta, "backbone.embedding_dim", b.embedding_dim);
  put_int(ckpt.meta, "backbone.input_dim", b.input_dim);
  put_int(ckpt.meta, "backbone.frozen", b.frozen ? 1 : 0);
  for (auto& [k, v] : fbank_meta(model.fbank)) ckpt.meta[k] = v;
  for (const auto& p : model.backbone.parameters()) ckpt.tensors.emplace(p.name(), p);
  ckpt.tensors.emplace("head.projection", model.head.projection);
  save_checkpoint(path, ckpt);
}

SpeakerModel load_speaker_model(const std::filesystem::path& path) {
  Checkpoint ckpt = load_checkpoint(path);
  if (ckpt.require_meta("kind") != "speaker_model") {
    throw IoError("checkpoint: '" + path.string() + "' is not a speaker model (kind=" +
                  ckpt.require_meta("kind") + ")");
  }
  BackboneConfig b;
  b.num_conv_blocks = static_cast<int>(get_int(ckpt, "backbone.num_conv_blocks"));
  b.channels = static_cast<int>(get_int(ckpt, "backbone.channels"));
  b.kernel_size = static_cast<int>(get_int(ckpt, "backbone.kernel_size"));
  b.embedding_dim = static_cast<int>(get_int(ckpt, "backbone.embedding_dim"));
  b.input_dim = static_cast<int>(get_int(ckpt, "backbone.input_dim"));
  b.frozen = get_int(ckpt, "backbone.frozen") != 0;
  Backbone backbone(b, ckpt.tensors);
  Tensor proj = ckpt.require_tensor("head.projection").detach();
  proj.set_requires_grad(true);
  proj.set_name("head.projection");
  return SpeakerModel{std::move(backbone), ClassifierHead{std::move(proj)},
                      fbank_from_meta(ckpt)};
}

void save_estimator(const std::filesystem::path& path, const Estimator& est) {
  Checkpoint ckpt;
  ckpt.meta["kind"] = "estimator";
  const auto& e = est.config();
  put_int(ckpt.meta, "estimator.channels", e.channels);
  put_int(ckpt.meta, "estimator.attention_blocks", e.attention_blocks);
  put_int(ckpt.meta, "estimator.share_attention_weights", e.share_attention_weights ? 1 : 0);
  put_int(ckpt.meta, "estimator.kernel_size", e.kernel_size);
  put_int(ckpt.meta, "estimator.input_dim", e.input_dim);
  put_int(ckpt.meta, "estimator.embedding_dim", e.embedding_dim);
  for (const auto& p : est.parameters()) ckpt.tensors.emplace(p.name(), p);
  save_checkpoint(path, ckpt);
}

Estimator load_estimator(const std::filesystem::path& path) {
  Checkpoint ckpt = load_checkpoint(path);
  if (ckpt.require_meta("kind") != "estimator") {
    throw IoError("checkpoint: '" + path.string() + "' is not an estimator");
  }
  EstimatorConfig e;
  e.channels = static_cast<int>(get_int(ckpt, "estimator.channels"));
  e.attention_blocks = static_cast<int>(get_int(ckpt, "estimator.attention_blocks"));
  e.share_attention_weights = get_int(ckpt, "estimator.share_attention_weights") != 0;
  e.kernel_size = static_cast<int>(get_int(ckpt, "estimator.kernel_size"));
  e.input_dim = static_cast<int>(get_int(ckpt, "estimator.input_dim"));
  e.embedding_dim = static_cast<int>(get_int(ckpt, "estimator.embedding_dim"));
  return Estimator(e, ckpt.tensors);
}

// ---- black-box access ----

BlackBoxEmbedder::BlackBoxEmbedder(const Backbone& backbone) : backbone_(&backbone) {
  for (auto p : backbone_->parameters()) p.set_grad_probe(&backward_touches_);
}

BlackBoxEmbedder::~BlackBoxEmbedder() {
  for (auto p : backbone_->parameters()) p.set_grad_probe(nullptr);
}

Tensor BlackBoxEmbedder::embed(const Tensor& features) const {
  TapeScope no_tape(nullptr);  // no recording: output is a plain constant
  ++forward_calls_;
  return backbone_->forward(features.detach());
}

}  // namespace reprogsv
