// core/include/reprogsv/eval.h

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

#ifndef REPROGSV_EVAL_H_
#define REPROGSV_EVAL_H_

#include <filesystem>
#include <string>
#include <vector>

#include "reprogsv/config.h"
#include "reprogsv/data.h"
#include "reprogsv/model.h"
#include "reprogsv/reprogram.h"
#include "reprogsv/train.h"

namespace reprogsv {

struct EvalReport {
  std::string adapt_mode = "none";  // vanilla | grad_est | none
  int64_t padding_n = 0;
  int64_t padding_l = 0;
  int64_t padding_k = 1;
  std::string score_mode = "mean_all";
  double eer_percent = 0.0;
  double threshold = 0.0;
  int64_t num_trials = 0;
  uint64_t seed = 0;
};

// Threshold sweep over the pooled scores. FRR(t) = frac(target < t),
// FAR(t) = frac(nontarget >= t); the crossing of FRR - FAR is located and
// linearly interpolated between adjacent candidate thresholds.
// Returns (eer in [0, 1], threshold).
std::pair<double, double> compute_eer(const std::vector<double>& target_scores,
                                      const std::vector<double>& nontarget_scores);

// Full-length utterances (no training crop): expansion into k padded copies,
// fbank, embedding, k x k score matrix, trial score, then pooled EER.
// A pure function of its inputs.
EvalReport evaluate(const Backbone& backbone, const FbankConfig& fbank_cfg,
                    const PaddingParams& padding,
                    const std::vector<Utterance>& utterances, const TrialSet& trials,
                    ScoreMode mode);

struct SweepCell {
  int64_t n = 0;
  int64_t l = 0;
  int64_t k = 1;
  bool failed = false;
  std::string error;
  EvalReport report;
  std::vector<EpochLog> train_log;
};

// Adapts and evaluates every (n, k) grid cell from one shared pretrained
// model; a failing cell is recorded and the rest continue.
std::vector<SweepCell> run_sweep(const SpeakerModel& model,
                                 const std::vector<Utterance>& adapt_corpus,
                                 const std::vector<Utterance>& eval_utterances,
                                 const TrialSet& trials, const ExperimentConfig& base,
                                 AdaptMode mode, const std::vector<int64_t>& n_values,
                                 const std::vector<int64_t>& k_values);

// CSV schema: mode,n,l,k,score_mode,eer_percent,threshold,num_trials,seed
void write_results_csv(const std::filesystem::path& path,
                       const std::vector<EvalReport>& reports);
std::vector<EvalReport> read_results_csv(const std::filesystem::path& path);

}  // namespace reprogsv

#endif  // REPROGSV_EVAL_H_
