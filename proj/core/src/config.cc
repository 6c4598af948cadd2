// core/src/config.cc

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

#include "reprogsv/config.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "reprogsv/checkpoint.h"

namespace reprogsv {

namespace {

std::string trim(const std::string& s) {
  size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

KvConfig KvConfig::from_file(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("config: cannot open '" + path.string() + "'");
  std::stringstream buf;
  buf << is.rdbuf();
  try {
    return from_string(buf.str());
  } catch (const ConfigError& e) {
    throw ConfigError(std::string(e.what()) + " (in '" + path.string() + "')");
  }
}

KvConfig KvConfig::from_string(const std::string& text) {
  KvConfig kv;
  std::istringstream is(text);
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    size_t eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config: malformed line " + std::to_string(line_no) +
                        " (expected 'key = value'): " + line);
    }
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty()) {
      throw ConfigError("config: empty key on line " + std::to_string(line_no));
    }
    kv.entries_[key] = value;
  }
  return kv;
}

bool KvConfig::has(const std::string& key) const { return entries_.count(key) > 0; }

std::string KvConfig::get_string(const std::string& key) const {
  auto it = entries_.find(key);
  if (it == entries_.end()) throw ConfigError("config: missing required key '" + key + "'");
  return it->second;
}

std::string KvConfig::get_string(const std::string& key, const std::string& fallback) const {
  auto it = entries_.find(key);
  return it == entries_.end() ? fallback : it->second;
}

int64_t KvConfig::get_int(const std::string& key) const {
  const std::string v = get_string(key);
  try {
    size_t pos = 0;
    int64_t r = std::stoll(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return r;
  } catch (const std::exception&) {
    throw ConfigError("config: key '" + key + "' expects an integer, got '" + v + "'");
  }
}

int64_t KvConfig::get_int(const std::string& key, int64_t fallback) const {
  return has(key) ? get_int(key) : fallback;
}

double KvConfig::get_double(const std::string& key) const {
  const std::string v = get_string(key);
  try {
    return parse_double(v);
  } catch (const ConfigError&) {
    throw ConfigError("config: key '" + key + "' expects a number, got '" + v + "'");
  }
}

double KvConfig::get_double(const std::string& key, double fallback) const {
  return has(key) ? get_double(key) : fallback;
}

bool KvConfig::get_bool(const std::string& key) const {
  const std::string v = get_string(key);
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError("config: key '" + key + "' expects a boolean, got '" + v + "'");
}

bool KvConfig::get_bool(const std::string& key, bool fallback) const {
  return has(key) ? get_bool(key) : fallback;
}

std::vector<int64_t> KvConfig::get_int_list(const std::string& key,
                                            const std::vector<int64_t>& fallback) const {
  if (!has(key)) return fallback;
  std::string v = get_string(key);
  for (auto& c : v) {
    if (c == ',') c = ' ';
  }
  std::istringstream is(v);
  std::vector<int64_t> out;
  std::string tok;
  while (is >> tok) {
    try {
      size_t pos = 0;
      out.push_back(std::stoll(tok, &pos));
      if (pos != tok.size()) throw std::invalid_argument(tok);
    } catch (const std::exception&) {
      throw ConfigError("config: key '" + key + "' expects integers, got '" + tok + "'");
    }
  }
  return out;
}

void KvConfig::set(const std::string& key, const std::string& value) {
  entries_[key] = value;
}
void KvConfig::set_int(const std::string& key, int64_t value) {
  entries_[key] = std::to_string(value);
}
void KvConfig::set_double(const std::string& key, double value) {
  entries_[key] = format_double(value);
}
void KvConfig::set_bool(const std::string& key, bool value) {
  entries_[key] = value ? "true" : "false";
}

void KvConfig::write(const std::filesystem::path& path) const {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("config: cannot write '" + path.string() + "'");
  for (const auto& [k, v] : entries_) os << k << " = " << v << '\n';
  if (!os) throw IoError("config: write failed for '" + path.string() + "'");
}

AdaptMode adapt_mode_from_string(const std::string& s) {
  if (s == "vanilla") return AdaptMode::kVanilla;
  if (s == "grad_est") return AdaptMode::kGradEst;
  throw ConfigError("unknown adaptation mode '" + s + "', expected vanilla or grad_est");
}

std::string to_string(AdaptMode mode) {
  return mode == AdaptMode::kVanilla ? "vanilla" : "grad_est";
}

void ExperimentConfig::validate_and_finalize() {
  if (small_data_mode) {
    epochs = 100;
    lr_drop_epochs = {60, 80};
  }
  if (padding_l < 0 || padding_k < 1 || padding_l % padding_k != 0) {
    throw ConfigError("config: padding.l must be >= 0 and divisible by padding.k");
  }
  if (batch_size < 1) throw ConfigError("config: batch_size must be >= 1");
  if (epochs < 1) throw ConfigError("config: epochs must be >= 1");
  if (!(crop_seconds > 0)) throw ConfigError("config: crop_seconds must be positive");
  if (!(lr > 0)) throw ConfigError("config: lr must be positive");
  if (!(lr_drop_factor > 0)) throw ConfigError("config: lr_drop_factor must be positive");
  for (size_t i = 0; i < lr_drop_epochs.size(); ++i) {
    if (lr_drop_epochs[i] < 1 || lr_drop_epochs[i] >= epochs) {
      throw ConfigError("config: lr_drop_epochs entries must lie in [1, epochs)");
    }
    if (i > 0 && lr_drop_epochs[i] <= lr_drop_epochs[i - 1]) {
      throw ConfigError("config: lr_drop_epochs must be strictly increasing");
    }
  }
  fbank.validate();
  backbone.input_dim = fbank.num_mels;
  backbone.validate();
  estimator.input_dim = fbank.num_mels;
  estimator.embedding_dim = backbone.embedding_dim;
  estimator.validate();
  if (crop_samples() < fbank.frame_samples()) {
    throw ConfigError("config: crop_seconds shorter than one analysis frame");
  }
}

int64_t ExperimentConfig::crop_samples() const {
  return static_cast<int64_t>(std::llround(crop_seconds * fbank.sample_rate_hz));
}

double ExperimentConfig::lr_at_epoch(int epoch) const {
  int drops = 0;
  for (int64_t d : lr_drop_epochs) {
    if (epoch > d) ++drops;
  }
  return lr / std::pow(lr_drop_factor, static_cast<double>(drops));
}

ExperimentConfig ExperimentConfig::from_kv(const KvConfig& kv) {
  ExperimentConfig c;
  c.padding_l = kv.get_int("padding.l", c.padding_l);
  c.padding_k = kv.get_int("padding.k", c.padding_k);
  c.padding_init_std = kv.get_double("padding.init_std", c.padding_init_std);
  c.crop_seconds = kv.get_double("crop_seconds", c.crop_seconds);
  c.batch_size = static_cast<int>(kv.get_int("batch_size", c.batch_size));
  c.epochs = static_cast<int>(kv.get_int("epochs", c.epochs));
  c.lr = kv.get_double("lr", c.lr);
  c.lr_drop_epochs = kv.get_int_list("lr_drop_epochs", c.lr_drop_epochs);
  c.lr_drop_factor = kv.get_double("lr_drop_factor", c.lr_drop_factor);
  c.weight_decay = kv.get_double("weight_decay", c.weight_decay);
  c.aam_margin = kv.get_double("aam.m", c.aam_margin);
  c.aam_scale = kv.get_double("aam.s", c.aam_scale);
  c.small_data_mode = kv.get_bool("small_data_mode", c.small_data_mode);
  c.seed = static_cast<uint64_t>(kv.get_int("seed", static_cast<int64_t>(c.seed)));
  c.score_mode = score_mode_from_string(kv.get_string("score_mode", to_string(c.score_mode)));

  c.fbank.sample_rate_hz = static_cast<int>(kv.get_int("fbank.sample_rate_hz", c.fbank.sample_rate_hz));
  c.fbank.num_mels = static_cast<int>(kv.get_int("fbank.num_mels", c.fbank.num_mels));
  c.fbank.frame_length_ms = kv.get_double("fbank.frame_length_ms", c.fbank.frame_length_ms);
  c.fbank.frame_shift_ms = kv.get_double("fbank.frame_shift_ms", c.fbank.frame_shift_ms);
  c.fbank.fft_size = static_cast<int>(kv.get_int("fbank.fft_size", c.fbank.fft_size));
  c.fbank.fmin_hz = kv.get_double("fbank.fmin_hz", c.fbank.fmin_hz);
  c.fbank.fmax_hz = kv.get_double("fbank.fmax_hz", c.fbank.fmax_hz);
  c.fbank.log_floor = kv.get_double("fbank.log_floor", c.fbank.log_floor);

  c.backbone.num_conv_blocks = static_cast<int>(kv.get_int("backbone.num_conv_blocks", c.backbone.num_conv_blocks));
  c.backbone.channels = static_cast<int>(kv.get_int("backbone.channels", c.backbone.channels));
  c.backbone.kernel_size = static_cast<int>(kv.get_int("backbone.kernel_size", c.backbone.kernel_size));
  c.backbone.embedding_dim = static_cast<int>(kv.get_int("backbone.embedding_dim", c.backbone.embedding_dim));

  c.estimator.channels = static_cast<int>(kv.get_int("estimator.channels", c.estimator.channels));
  c.estimator.attention_blocks = static_cast<int>(kv.get_int("estimator.attention_blocks", c.estimator.attention_blocks));
  c.estimator.share_attention_weights = kv.get_bool("estimator.share_attention_weights", c.estimator.share_attention_weights);
  c.estimator.kernel_size = static_cast<int>(kv.get_int("estimator.kernel_size", c.estimator.kernel_size));

  c.validate_and_finalize();
  return c;
}

void ExperimentConfig::to_kv(KvConfig& kv) const {
  kv.set_int("padding.l", padding_l);
  kv.set_int("padding.k", padding_k);
  kv.set_double("padding.init_std", padding_init_std);
  kv.set_double("crop_seconds", crop_seconds);
  kv.set_int("batch_size", batch_size);
  kv.set_int("epochs", epochs);
  kv.set_double("lr", lr);
  {
    std::string drops;
    for (size_t i = 0; i < lr_drop_epochs.size(); ++i) {
      if (i) drops += ",";
      drops += std::to_string(lr_drop_epochs[i]);
    }
    kv.set("lr_drop_epochs", drops);
  }
  kv.set_double("lr_drop_factor", lr_drop_factor);
  kv.set_double("weight_decay", weight_decay);
  kv.set_double("aam.m", aam_margin);
  kv.set_double("aam.s", aam_scale);
  kv.set_bool("small_data_mode", small_data_mode);
  kv.set_int("seed", static_cast<int64_t>(seed));
  kv.set("score_mode", to_string(score_mode));

  kv.set_int("fbank.sample_rate_hz", fbank.sample_rate_hz);
  kv.set_int("fbank.num_mels", fbank.num_mels);
  kv.set_double("fbank.frame_length_ms", fbank.frame_length_ms);
  kv.set_double("fbank.frame_shift_ms", fbank.frame_shift_ms);
  kv.set_int("fbank.fft_size", fbank.fft_size);
  kv.set_double("fbank.fmin_hz", fbank.fmin_hz);
  kv.set_double("fbank.fmax_hz", fbank.fmax_hz);
  kv.set_double("fbank.log_floor", fbank.log_floor);

  kv.set_int("backbone.num_conv_blocks", backbone.num_conv_blocks);
  kv.set_int("backbone.channels", backbone.channels);
  kv.set_int("backbone.kernel_size", backbone.kernel_size);
  kv.set_int("backbone.embedding_dim", backbone.embedding_dim);

  kv.set_int("estimator.channels", estimator.channels);
  kv.set_int("estimator.attention_blocks", estimator.attention_blocks);
  kv.set_bool("estimator.share_attention_weights", estimator.share_attention_weights);
  kv.set_int("estimator.kernel_size", estimator.kernel_size);
}

}  // namespace reprogsv
