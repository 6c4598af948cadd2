// core/include/reprogsv/config.h

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

#ifndef REPROGSV_CONFIG_H_
#define REPROGSV_CONFIG_H_

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "reprogsv/fbank.h"
#include "reprogsv/model.h"
#include "reprogsv/reprogram.h"

namespace reprogsv {

// Flat `key = value` text file; '#' starts a comment, blank lines are
// ignored. Missing required keys raise ConfigError naming the key.
class KvConfig {
 public:
  KvConfig() = default;
  static KvConfig from_file(const std::filesystem::path& path);
  static KvConfig from_string(const std::string& text);

  bool has(const std::string& key) const;
  std::string get_string(const std::string& key) const;
  std::string get_string(const std::string& key, const std::string& fallback) const;
  int64_t get_int(const std::string& key) const;
  int64_t get_int(const std::string& key, int64_t fallback) const;
  double get_double(const std::string& key) const;
  double get_double(const std::string& key, double fallback) const;
  bool get_bool(const std::string& key) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::vector<int64_t> get_int_list(const std::string& key,
                                    const std::vector<int64_t>& fallback) const;

  void set(const std::string& key, const std::string& value);
  void set_int(const std::string& key, int64_t value);
  void set_double(const std::string& key, double value);
  void set_bool(const std::string& key, bool value);

  const std::map<std::string, std::string>& entries() const { return entries_; }
  void write(const std::filesystem::path& path) const;

 private:
  std::map<std::string, std::string> entries_;
};

enum class AdaptMode { kVanilla, kGradEst };
AdaptMode adapt_mode_from_string(const std::string& s);
std::string to_string(AdaptMode mode);

// The full training/evaluation recipe. small_data_mode coerces the §-style
// long schedule: 100 epochs with drops at 60 and 80, and freezes the
// classifier projection at a random draw so only the padding (and the
// estimator) train.
struct ExperimentConfig {
  int64_t padding_l = 0;
  int64_t padding_k = 1;
  double padding_init_std = 1e-3;
  double crop_seconds = 2.0;
  int batch_size = 32;
  int epochs = 20;
  std::vector<int64_t> lr_drop_epochs{10, 15};
  double lr = 1e-3;
  double lr_drop_factor = 10.0;
  double weight_decay = 1e-4;
  double aam_margin = 0.2;
  double aam_scale = 30.0;
  bool small_data_mode = false;
  uint64_t seed = 1;
  ScoreMode score_mode = ScoreMode::kMeanAll;
  FbankConfig fbank;
  BackboneConfig backbone;
  EstimatorConfig estimator;

  void validate_and_finalize();
  int64_t crop_samples() const;
  double lr_at_epoch(int epoch) const;  // epoch is 1-based

  static ExperimentConfig from_kv(const KvConfig& kv);
  void to_kv(KvConfig& kv) const;
};

}  // namespace reprogsv

#endif  // REPROGSV_CONFIG_H_
