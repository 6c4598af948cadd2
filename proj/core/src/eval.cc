// core/src/eval.cc

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

#include "reprogsv/eval.h"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>

#include "reprogsv/checkpoint.h"

namespace reprogsv {

std::pair<double, double> compute_eer(const std::vector<double>& target_scores,
                                      const std::vector<double>& nontarget_scores) {
  if (target_scores.empty() || nontarget_scores.empty()) {
    throw Error("compute_eer: both score lists must be non-empty");
  }
  std::vector<double> targets = target_scores;
  std::vector<double> nontargets = nontarget_scores;
  std::sort(targets.begin(), targets.end());
  std::sort(nontargets.begin(), nontargets.end());

  std::vector<double> thresholds;
  thresholds.reserve(targets.size() + nontargets.size() + 1);
  thresholds.insert(thresholds.end(), targets.begin(), targets.end());
  thresholds.insert(thresholds.end(), nontargets.begin(), nontargets.end());
  std::sort(thresholds.begin(), thresholds.end());
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());
  thresholds.push_back(thresholds.back() + 1.0);  // above-max sentinel: FRR 1, FAR 0

  double nt = static_cast<double>(targets.size());
  double nn = static_cast<double>(nontargets.size());
  double prev_frr = 0.0, prev_far = 1.0, prev_t = thresholds.front();
  size_t ti = 0, ni = 0;
  for (double t : thresholds) {
    while (ti < targets.size() && targets[ti] < t) ++ti;
    while (ni < nontargets.size() && nontargets[ni] < t) ++ni;
    double frr = static_cast<double>(ti) / nt;
    double far = static_cast<double>(nontargets.size() - ni) / nn;
    double diff = frr - far;
    if (diff >= 0.0) {
      if (diff == 0.0) return {frr, t};
      double prev_diff = prev_frr - prev_far;  // < 0 here
      double lambda = -prev_diff / (diff - prev_diff);
      double eer = prev_frr + lambda * (frr - prev_frr);
      double thr = prev_t + lambda * (t - prev_t);
      return {eer, thr};
    }
    prev_frr = frr;
    prev_far = far;
    prev_t = t;
  }
  throw Error("compute_eer: no crossing found");  // unreachable with the sentinel
}

EvalReport evaluate(const Backbone& backbone, const FbankConfig& fbank_cfg,
                    const PaddingParams& padding,
                    const std::vector<Utterance>& utterances, const TrialSet& trials,
                    ScoreMode mode) {
  if (trials.trials.empty()) throw Error("evaluate: empty trial list");
  padding.validate();
  TapeScope no_tape(nullptr);  // pure evaluation

  std::map<std::string, const Utterance*> by_id;
  for (const auto& u : utterances) by_id[u.utt_id] = &u;

  FbankExtractor extractor(fbank_cfg);
  std::map<std::string, std::vector<Tensor>> cache;
  auto embeddings_of = [&](const std::string& utt_id) -> const std::vector<Tensor>& {
    auto it = cache.find(utt_id);
    if (it != cache.end()) return it->second;
    auto uit = by_id.find(utt_id);
    if (uit == by_id.end()) {
      throw Error("evaluate: trial references unknown utterance '" + utt_id + "'");
    }
    std::vector<Tensor> embs;
    for (const auto& copy : expand_and_pad_infer(uit->second->samples, padding)) {
      embs.push_back(backbone.forward(extractor.apply(copy.samples)));
    }
    return cache.emplace(utt_id, std::move(embs)).first->second;
  };

  std::vector<double> target_scores, nontarget_scores;
  for (const auto& trial : trials.trials) {
    const auto& ex = embeddings_of(trial.enroll_utt_id);
    const auto& ey = embeddings_of(trial.test_utt_id);
    double score = trial_score(score_matrix(ex, ey), mode);
    (trial.target ? target_scores : nontarget_scores).push_back(score);
  }
  if (target_scores.empty() || nontarget_scores.empty()) {
    throw Error("evaluate: trials must include both target and nontarget pairs");
  }
  auto [eer, thr] = compute_eer(target_scores, nontarget_scores);

  EvalReport report;
  report.padding_n = padding.segment_len();
  report.padding_l = padding.total_len;
  report.padding_k = padding.num_segments;
  report.score_mode = to_string(mode);
  report.eer_percent = 100.0 * eer;
  report.threshold = thr;
  report.num_trials = static_cast<int64_t>(trials.trials.size());
  return report;
}

std::vector<SweepCell> run_sweep(const SpeakerModel& model,
                                 const std::vector<Utterance>& adapt_corpus,
                                 const std::vector<Utterance>& eval_utterances,
                                 const TrialSet& trials, const ExperimentConfig& base,
                                 AdaptMode mode, const std::vector<int64_t>& n_values,
                                 const std::vector<int64_t>& k_values) {
  if (n_values.empty() || k_values.empty()) {
    throw ConfigError("sweep: n_values and k_values must be non-empty");
  }
  std::vector<SweepCell> cells;
  for (int64_t n : n_values) {
    for (int64_t k : k_values) {
      SweepCell cell;
      cell.n = n;
      cell.k = k;
      cell.l = n * k;
      try {
        ExperimentConfig cfg = base;
        cfg.padding_l = cell.l;
        cfg.padding_k = k;
        cfg.validate_and_finalize();
        AdaptResult adapted = mode == AdaptMode::kVanilla
                                  ? adapt_vanilla(model, adapt_corpus, cfg)
                                  : adapt_grad_est(model, adapt_corpus, cfg);
        cell.train_log = adapted.log;
        cell.report = evaluate(model.backbone, model.fbank, adapted.padding,
                               eval_utterances, trials, cfg.score_mode);
        cell.report.adapt_mode = to_string(mode);
        cell.report.seed = cfg.seed;
      } catch (const std::exception& e) {
        cell.failed = true;
        cell.error = std::string("cell n=") + std::to_string(n) + " k=" +
                     std::to_string(k) + ": " + e.what();
      }
      cells.push_back(std::move(cell));
    }
  }
  return cells;
}

void write_results_csv(const std::filesystem::path& path,
                       const std::vector<EvalReport>& reports) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("results: cannot write '" + path.string() + "'");
  os << "mode,n,l,k,score_mode,eer_percent,threshold,num_trials,seed\n";
  for (const auto& r : reports) {
    os << r.adapt_mode << ',' << r.padding_n << ',' << r.padding_l << ',' << r.padding_k
       << ',' << r.score_mode << ',' << format_double(r.eer_percent) << ','
       << format_double(r.threshold) << ',' << r.num_trials << ',' << r.seed << '\n';
  }
  if (!os) throw IoError("results: write failed for '" + path.string() + "'");
}

std::vector<EvalReport> read_results_csv(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("results: cannot open '" + path.string() + "'");
  std::string header;
  if (!std::getline(is, header)) throw IoError("results: empty file '" + path.string() + "'");
  const std::string expected = "mode,n,l,k,score_mode,eer_percent,threshold,num_trials,seed";
  if (header != expected) {
    throw IoError("results: unexpected CSV header in '" + path.string() + "': got '" +
                  header + "', expected '" + expected + "'");
  }
  std::vector<EvalReport> out;
  std::string line;
  int line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string field;
    std::vector<std::string> fields;
    while (std::getline(ls, field, ',')) fields.push_back(field);
    if (fields.size() != 9) {
      throw IoError("results: malformed line " + std::to_string(line_no) + " in '" +
                    path.string() + "'");
    }
    EvalReport r;
    r.adapt_mode = fields[0];
    r.padding_n = std::stoll(fields[1]);
    r.padding_l = std::stoll(fields[2]);
    r.padding_k = std::stoll(fields[3]);
    r.score_mode = fields[4];
    r.eer_percent = parse_double(fields[5]);
    r.threshold = parse_double(fields[6]);
    r.num_trials = std::stoll(fields[7]);
    r.seed = static_cast<uint64_t>(std::stoull(fields[8]));
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace reprogsv
