// core/src/data.cc

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

#include "reprogsv/data.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "reprogsv/wav.h"

namespace reprogsv {

namespace {
constexpr double kTwoPi = 6.28318530717958647692;
}

F0Family f0_family_from_string(const std::string& s) {
  if (s == "vibrato") return F0Family::kVibrato;
  if (s == "sweep") return F0Family::kSweep;
  throw ConfigError("unknown f0 family '" + s + "', expected vibrato or sweep");
}

std::string to_string(F0Family f) {
  return f == F0Family::kVibrato ? "vibrato" : "sweep";
}

void DomainSpec::validate() const {
  if (domain_id.empty()) throw ConfigError("domain: domain_id must not be empty");
  auto check_range = [&](const Range& r, const char* name, double lo_min) {
    if (!(r.lo >= lo_min) || !(r.hi >= r.lo)) {
      throw ConfigError(std::string("domain ") + domain_id + ": invalid " + name +
                        " range [" + std::to_string(r.lo) + ", " + std::to_string(r.hi) + "]");
    }
  };
  check_range(f0_mod_rate_hz, "f0_mod_rate_hz", 0.0);
  check_range(f0_mod_depth, "f0_mod_depth", 0.0);
  check_range(duration_s, "duration_s", 0.05);
  if (!(noise_snr_db.hi >= noise_snr_db.lo)) {
    throw ConfigError("domain " + domain_id + ": invalid noise_snr_db range");
  }
}

std::vector<SyntheticSpeaker> draw_speakers(int num_speakers, const std::string& domain_id,
                                            uint64_t seed) {
  if (num_speakers < 2) throw ConfigError("corpus: need at least 2 speakers");
  Rng rng(Rng::mix(seed, 0x5eede9));
  std::vector<SyntheticSpeaker> speakers;
  speakers.reserve(static_cast<size_t>(num_speakers));
  for (int i = 0; i < num_speakers; ++i) {
    SyntheticSpeaker s;
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%s_s%03d", domain_id.c_str(), i);
    s.speaker_id = buf;
    s.f0_hz = rng.uniform(90.0, 280.0);
    s.formant_hz[0] = rng.uniform(280.0, 860.0);
    s.formant_hz[1] = s.formant_hz[0] + rng.uniform(300.0, 1400.0);
    s.formant_hz[2] = s.formant_hz[1] + rng.uniform(350.0, 1100.0);
    s.formant_bw_hz[0] = rng.uniform(50.0, 120.0);
    s.formant_bw_hz[1] = rng.uniform(70.0, 160.0);
    s.formant_bw_hz[2] = rng.uniform(100.0, 200.0);
    s.seed = rng.next_u64();
    speakers.push_back(std::move(s));
  }
  return speakers;
}

namespace {

// Two-pole resonator, in place.
void resonate(std::vector<double>& x, double freq_hz, double bw_hz) {
  double r = std::exp(-3.14159265358979323846 * bw_hz / kSampleRate);
  double ct = std::cos(kTwoPi * freq_hz / kSampleRate);
  double y1 = 0.0, y2 = 0.0;
  for (auto& v : x) {
    double y = v + 2.0 * r * ct * y1 - r * r * y2;
    y2 = y1;
    y1 = y;
    v = y;
  }
}

// About -6 dB/oct above ~80 Hz per full pass; fractional passes are blended.
void apply_tilt(std::vector<double>& x, double tilt_db_per_octave) {
  if (tilt_db_per_octave == 0.0) return;
  double mag = std::abs(tilt_db_per_octave) / 6.0;
  int full = static_cast<int>(mag);
  double frac = mag - full;
  bool down = tilt_db_per_octave < 0.0;
  auto one_pass = [&](std::vector<double>& v, double weight) {
    if (down) {
      double y = 0.0;
      for (auto& s : v) {
        y = s + 0.97 * y;
        s = (1.0 - weight) * s + weight * 0.03 * y;  // unity-ish DC gain
      }
    } else {
      double prev = 0.0;
      for (auto& s : v) {
        double cur = s;
        s = (1.0 - weight) * s + weight * (cur - 0.97 * prev);
        prev = cur;
      }
    }
  };
  for (int i = 0; i < full; ++i) one_pass(x, 1.0);
  if (frac > 0.0) one_pass(x, frac);
}

}  // namespace

Utterance synthesize_utterance(const SyntheticSpeaker& speaker, const DomainSpec& domain,
                               const std::string& utt_id, uint64_t seed) {
  domain.validate();
  Rng rng(seed);
  double dur = rng.uniform(domain.duration_s.lo, domain.duration_s.hi);
  auto t_len = static_cast<int64_t>(std::llround(dur * kSampleRate));

  double rate = rng.uniform(domain.f0_mod_rate_hz.lo, domain.f0_mod_rate_hz.hi);
  double depth = rng.uniform(domain.f0_mod_depth.lo, domain.f0_mod_depth.hi);
  double phase0 = rng.uniform(0.0, 1.0);

  // impulse train following the contour
  std::vector<double> x(static_cast<size_t>(t_len), 0.0);
  double pitch_phase = rng.uniform(0.0, 1.0);
  for (int64_t t = 0; t < t_len; ++t) {
    double u = rate * static_cast<double>(t) / kSampleRate + phase0;
    double mod;
    if (domain.f0_family == F0Family::kVibrato) {
      mod = std::sin(kTwoPi * u);
    } else {
      double fracpart = u - std::floor(u);  // triangle glide
      mod = 4.0 * std::abs(fracpart - 0.5) - 1.0;
    }
    double f0 = speaker.f0_hz * (1.0 + depth * mod);
    pitch_phase += f0 / kSampleRate;
    if (pitch_phase >= 1.0) {
      pitch_phase -= 1.0;
      x[static_cast<size_t>(t)] = 1.0;
    }
  }

  for (int i = 0; i < 3; ++i) resonate(x, speaker.formant_hz[i], speaker.formant_bw_hz[i]);
  apply_tilt(x, domain.spectral_tilt_db_per_octave);

  double sig_pow = 0.0;
  for (double v : x) sig_pow += v * v;
  sig_pow /= static_cast<double>(x.size());
  double snr_db = rng.uniform(domain.noise_snr_db.lo, domain.noise_snr_db.hi);
  double noise_std = std::sqrt(sig_pow / std::pow(10.0, snr_db / 10.0));
  for (auto& v : x) v += rng.normal(0.0, noise_std);

  double peak = 0.0;
  for (double v : x) peak = std::max(peak, std::abs(v));
  if (peak > 0.0) {
    double g = 0.9 / peak;
    for (auto& v : x) v *= g;
  }

  Utterance u;
  u.utt_id = utt_id;
  u.speaker_id = speaker.speaker_id;
  u.domain_id = domain.domain_id;
  u.samples = Tensor::from_data(std::move(x), {t_len});
  return u;
}

std::vector<Utterance> generate_corpus(int num_speakers, int min_utts, int max_utts,
                                       const DomainSpec& domain, uint64_t seed) {
  domain.validate();
  if (num_speakers < 2) throw ConfigError("corpus: need at least 2 speakers");
  if (min_utts < 1 || max_utts < min_utts) {
    throw ConfigError("corpus: invalid utterance range [" + std::to_string(min_utts) +
                      ", " + std::to_string(max_utts) + "]");
  }
  auto speakers = draw_speakers(num_speakers, domain.domain_id, seed);
  Rng count_rng(Rng::mix(seed, 0xc0de));
  std::vector<Utterance> corpus;
  for (size_t si = 0; si < speakers.size(); ++si) {
    int64_t n_utts = count_rng.uniform_int(min_utts, max_utts);
    for (int64_t ui = 0; ui < n_utts; ++ui) {
      char buf[96];
      std::snprintf(buf, sizeof(buf), "%s_u%03d", speakers[si].speaker_id.c_str(),
                    static_cast<int>(ui));
      uint64_t utt_seed = Rng::mix(speakers[si].seed, static_cast<uint64_t>(ui));
      corpus.push_back(synthesize_utterance(speakers[si], domain, buf, utt_seed));
    }
  }
  return corpus;
}

TrialSet make_trials(const std::vector<Utterance>& utts, int num_target,
                     int num_nontarget, uint64_t seed) {
  if (num_target < 1 || num_nontarget < 1) {
    throw ConfigError("trials: need at least one target and one nontarget trial");
  }
  std::map<std::string, std::vector<size_t>> by_speaker;
  for (size_t i = 0; i < utts.size(); ++i) by_speaker[utts[i].speaker_id].push_back(i);

  std::vector<std::pair<size_t, size_t>> same_pairs;
  for (const auto& [spk, idx] : by_speaker) {
    for (size_t a = 0; a < idx.size(); ++a)
      for (size_t b = a + 1; b < idx.size(); ++b) same_pairs.emplace_back(idx[a], idx[b]);
  }
  if (static_cast<int>(same_pairs.size()) < num_target) {
    throw ConfigError("trials: requested " + std::to_string(num_target) +
                      " target trials but only " + std::to_string(same_pairs.size()) +
                      " same-speaker pairs exist");
  }
  int64_t cross_total = 0;
  {
    int64_t n = static_cast<int64_t>(utts.size());
    int64_t same = 0;
    for (const auto& [spk, idx] : by_speaker) {
      same += static_cast<int64_t>(idx.size()) * static_cast<int64_t>(idx.size());
    }
    cross_total = n * n - same;  // ordered cross-speaker pairs
  }
  if (cross_total < num_nontarget) {
    throw ConfigError("trials: requested " + std::to_string(num_nontarget) +
                      " nontarget trials but only " + std::to_string(cross_total) +
                      " cross-speaker pairs exist");
  }

  Rng rng(Rng::mix(seed, 0x7124a1));
  // seeded Fisher-Yates over the same-speaker pairs
  for (size_t i = same_pairs.size(); i > 1; --i) {
    size_t j = static_cast<size_t>(rng.uniform_int(0, static_cast<int64_t>(i) - 1));
    std::swap(same_pairs[i - 1], same_pairs[j]);
  }

  TrialSet out;
  for (int i = 0; i < num_target; ++i) {
    out.trials.push_back(Trial{true, utts[same_pairs[static_cast<size_t>(i)].first].utt_id,
                               utts[same_pairs[static_cast<size_t>(i)].second].utt_id});
  }

  std::set<std::pair<size_t, size_t>> seen;
  int64_t attempts = 0;
  int64_t max_attempts = 1000LL * num_nontarget + 1000;
  while (static_cast<int>(seen.size()) < num_nontarget) {
    if (++attempts > max_attempts) {
      throw ConfigError("trials: could not draw " + std::to_string(num_nontarget) +
                        " distinct nontarget pairs");
    }
    auto a = static_cast<size_t>(rng.uniform_int(0, static_cast<int64_t>(utts.size()) - 1));
    auto b = static_cast<size_t>(rng.uniform_int(0, static_cast<int64_t>(utts.size()) - 1));
    if (a == b || utts[a].speaker_id == utts[b].speaker_id) continue;
    if (!seen.emplace(a, b).second) continue;
    out.trials.push_back(Trial{false, utts[a].utt_id, utts[b].utt_id});
  }
  return out;
}

void save_corpus(const std::filesystem::path& dir, const std::vector<Utterance>& utts) {
  namespace fs = std::filesystem;
  fs::create_directories(dir / "wav");
  std::ofstream manifest(dir / "manifest.txt", std::ios::trunc);
  if (!manifest) throw IoError("corpus: cannot write manifest in '" + dir.string() + "'");
  for (const auto& u : utts) {
    std::string rel = "wav/" + u.utt_id + ".wav";
    save_wav_pcm16_mono(dir / rel, u.samples.data(), kSampleRate);
    manifest << u.utt_id << ' ' << u.speaker_id << ' ' << u.domain_id << ' ' << rel << '\n';
  }
  if (!manifest) throw IoError("corpus: manifest write failed in '" + dir.string() + "'");
}

std::vector<Utterance> load_corpus(const std::filesystem::path& manifest_path) {
  std::ifstream is(manifest_path);
  if (!is) throw IoError("corpus: cannot open manifest '" + manifest_path.string() + "'");
  std::filesystem::path base = manifest_path.parent_path();
  std::vector<Utterance> out;
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ls(line);
    Utterance u;
    std::string rel;
    if (!(ls >> u.utt_id >> u.speaker_id >> u.domain_id >> rel)) {
      throw IoError("corpus: malformed manifest line " + std::to_string(line_no) +
                    " in '" + manifest_path.string() + "'");
    }
    auto samples = load_wav_pcm16_mono(base / rel, kSampleRate);
    auto n = static_cast<int64_t>(samples.size());
    u.samples = Tensor::from_data(std::move(samples), {n});
    out.push_back(std::move(u));
  }
  return out;
}

void write_trials(const std::filesystem::path& path, const TrialSet& trials) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("trials: cannot write '" + path.string() + "'");
  for (const auto& t : trials.trials) {
    os << (t.target ? 1 : 0) << ' ' << t.enroll_utt_id << ' ' << t.test_utt_id << '\n';
  }
  if (!os) throw IoError("trials: write failed for '" + path.string() + "'");
}

TrialSet read_trials(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("trials: cannot open '" + path.string() + "'");
  TrialSet out;
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ls(line);
    int label = -1;
    Trial t;
    if (!(ls >> label >> t.enroll_utt_id >> t.test_utt_id) || (label != 0 && label != 1)) {
      throw IoError("trials: malformed line " + std::to_string(line_no) + " in '" +
                    path.string() + "'");
    }
    t.target = label == 1;
    out.trials.push_back(std::move(t));
  }
  return out;
}

}  // namespace reprogsv
