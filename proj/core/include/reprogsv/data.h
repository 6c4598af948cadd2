// core/include/reprogsv/data.h

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

#ifndef REPROGSV_DATA_H_
#define REPROGSV_DATA_H_

#include <array>
#include <filesystem>
#include <string>
#include <vector>

#include "reprogsv/rng.h"
#include "reprogsv/tensor.h"

namespace reprogsv {

constexpr int kSampleRate = 16000;

struct Range {
  double lo = 0.0;
  double hi = 0.0;
};

// Voice identity: fundamental plus three formant resonances.
struct SyntheticSpeaker {
  std::string speaker_id;
  double f0_hz = 0.0;
  std::array<double, 3> formant_hz{};
  std::array<double, 3> formant_bw_hz{};
  uint64_t seed = 0;
};

enum class F0Family { kVibrato, kSweep };
F0Family f0_family_from_string(const std::string& s);
std::string to_string(F0Family f);

// Rendering regime for one domain. Two disjoint regimes per experiment play
// the roles of the training language and the adaptation language.
struct DomainSpec {
  std::string domain_id;
  F0Family f0_family = F0Family::kVibrato;
  Range f0_mod_rate_hz{4.0, 6.5};
  Range f0_mod_depth{0.02, 0.06};
  Range duration_s{1.4, 2.4};
  Range noise_snr_db{28.0, 35.0};
  double spectral_tilt_db_per_octave = -3.0;

  void validate() const;
};

struct Utterance {
  std::string utt_id;
  std::string speaker_id;
  std::string domain_id;
  Tensor samples;  // [T] at kSampleRate, within [-1, 1]
};

struct Trial {
  bool target = false;  // same speaker
  std::string enroll_utt_id;
  std::string test_utt_id;
};

struct TrialSet {
  std::vector<Trial> trials;
};

std::vector<SyntheticSpeaker> draw_speakers(int num_speakers, const std::string& domain_id,
                                            uint64_t seed);

// Impulse-train source at the speaker's f0 contour, shaped by the formant
// resonators and the domain regime (tilt, noise, duration). Deterministic
// in (arguments, seed).
Utterance synthesize_utterance(const SyntheticSpeaker& speaker, const DomainSpec& domain,
                               const std::string& utt_id, uint64_t seed);

std::vector<Utterance> generate_corpus(int num_speakers, int min_utts, int max_utts,
                                       const DomainSpec& domain, uint64_t seed);

// Target pairs share a speaker, nontargets do not; no utterance is ever
// paired with itself. Counts are validated against what the corpus can
// actually supply.
TrialSet make_trials(const std::vector<Utterance>& utts, int num_target,
                     int num_nontarget, uint64_t seed);

// Corpus directory layout: <dir>/manifest.txt plus <dir>/wav/<utt_id>.wav.
// Manifest lines: <utt_id> <speaker_id> <domain_id> <relative-wav-path>.
void save_corpus(const std::filesystem::path& dir, const std::vector<Utterance>& utts);
std::vector<Utterance> load_corpus(const std::filesystem::path& manifest_path);

// Trial list lines: <label 0|1> <enroll_utt_id> <test_utt_id>.
void write_trials(const std::filesystem::path& path, const TrialSet& trials);
TrialSet read_trials(const std::filesystem::path& path);

}  // namespace reprogsv

#endif  // REPROGSV_DATA_H_
