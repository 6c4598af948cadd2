// tests/test_data.cc

#include <cstdio>
#include <filesystem>
#include <map>
#include <set>

#include "doctest.h"
#include "reprogsv/data.h"
#include "reprogsv/fbank.h"
#include "reprogsv/wav.h"

using namespace reprogsv;
namespace fs = std::filesystem;

namespace {

DomainSpec test_domain(const std::string& id) {
  DomainSpec d;
  d.domain_id = id;
  d.duration_s = {0.6, 1.0};  // short clips keep the tests quick
  return d;
}

fs::path temp_dir(const std::string& name) {
  auto p = fs::temp_directory_path() / ("reprogsv_data_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

// minimal hand-rolled WAV with arbitrary header fields
void write_raw_wav(const fs::path& path, uint16_t format, uint16_t channels,
                   uint32_t rate, uint16_t bits, const std::vector<int16_t>& data) {
  std::FILE* f = std::fopen(path.c_str(), "wb");
  REQUIRE(f != nullptr);
  uint32_t data_len = static_cast<uint32_t>(data.size() * 2);
  uint32_t riff = 36 + data_len;
  auto w32 = [&](uint32_t v) { std::fwrite(&v, 4, 1, f); };
  auto w16 = [&](uint16_t v) { std::fwrite(&v, 2, 1, f); };
  std::fwrite("RIFF", 4, 1, f);
  w32(riff);
  std::fwrite("WAVE", 4, 1, f);
  std::fwrite("fmt ", 4, 1, f);
  w32(16);
  w16(format);
  w16(channels);
  w32(rate);
  w32(rate * channels * bits / 8);
  w16(static_cast<uint16_t>(channels * bits / 8));
  w16(bits);
  std::fwrite("data", 4, 1, f);
  w32(data_len);
  std::fwrite(data.data(), 2, data.size(), f);
  std::fclose(f);
}

}  // namespace

TEST_CASE("corpus generation is deterministic in the seed") {
  DomainSpec d = test_domain("src");
  auto a = generate_corpus(3, 2, 3, d, 99);
  auto b = generate_corpus(3, 2, 3, d, 99);
  REQUIRE(a.size() == b.size());
  for (size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].utt_id == b[i].utt_id);
    CHECK(a[i].speaker_id == b[i].speaker_id);
    REQUIRE(a[i].samples.numel() == b[i].samples.numel());
    for (int64_t j = 0; j < a[i].samples.numel(); ++j) {
      REQUIRE(a[i].samples.data()[j] == b[i].samples.data()[j]);
    }
  }
  auto c = generate_corpus(3, 2, 3, d, 100);
  bool any_diff = c[0].samples.numel() != a[0].samples.numel();
  if (!any_diff) {
    for (int64_t j = 0; j < c[0].samples.numel(); ++j) {
      if (c[0].samples.data()[j] != a[0].samples.data()[j]) {
        any_diff = true;
        break;
      }
    }
  }
  CHECK(any_diff);
}

TEST_CASE("utterance counts follow the per-speaker range") {
  DomainSpec d = test_domain("src");
  d.duration_s = {0.1, 0.15};
  auto corpus = generate_corpus(20, 20, 50, d, 4);
  CHECK(corpus.size() >= 400);
  CHECK(corpus.size() <= 1000);
  std::map<std::string, int> per_spk;
  for (const auto& u : corpus) per_spk[u.speaker_id]++;
  CHECK(per_spk.size() == 20);
  for (const auto& [spk, n] : per_spk) {
    CHECK(n >= 20);
    CHECK(n <= 50);
  }
}

TEST_CASE("speakers keep their formants; utterances differ") {
  auto speakers = draw_speakers(4, "src", 7);
  auto again = draw_speakers(4, "src", 7);
  for (size_t i = 0; i < speakers.size(); ++i) {
    CHECK(speakers[i].formant_hz == again[i].formant_hz);
    CHECK(speakers[i].f0_hz == again[i].f0_hz);
    CHECK(speakers[i].f0_hz >= 80.0);
    CHECK(speakers[i].f0_hz <= 300.0);
    CHECK(speakers[i].formant_hz[0] < speakers[i].formant_hz[1]);
    CHECK(speakers[i].formant_hz[1] < speakers[i].formant_hz[2]);
    CHECK(speakers[i].formant_hz[2] < kSampleRate / 2.0);
  }
  DomainSpec d = test_domain("src");
  Utterance u1 = synthesize_utterance(speakers[0], d, "a", 1);
  Utterance u2 = synthesize_utterance(speakers[0], d, "b", 2);
  bool differ = u1.samples.numel() != u2.samples.numel();
  if (!differ) {
    for (int64_t j = 0; j < u1.samples.numel(); ++j) {
      if (u1.samples.data()[j] != u2.samples.data()[j]) {
        differ = true;
        break;
      }
    }
  }
  CHECK(differ);
}

TEST_CASE("synthesized samples are normalized and long enough") {
  DomainSpec d = test_domain("src");
  auto corpus = generate_corpus(3, 2, 2, d, 11);
  for (const auto& u : corpus) {
    CHECK(u.samples.numel() >= 400);
    double peak = 0;
    for (double v : u.samples.data()) peak = std::max(peak, std::abs(v));
    CHECK(peak <= 1.0);
    CHECK(peak == doctest::Approx(0.9));
  }
}

TEST_CASE("wav: 16-bit value 16384 loads as 0.5") {
  auto dir = temp_dir("wavval");
  write_raw_wav(dir / "x.wav", 1, 1, 16000, 16, {16384, -16384, 0, 32767});
  auto s = load_wav_pcm16_mono(dir / "x.wav", 16000);
  REQUIRE(s.size() == 4);
  CHECK(s[0] == 0.5);
  CHECK(s[1] == -0.5);
  CHECK(s[2] == 0.0);
  CHECK(s[3] == doctest::Approx(32767.0 / 32768.0));
  fs::remove_all(dir);
}

TEST_CASE("wav: format violations are named errors") {
  auto dir = temp_dir("wavbad");
  write_raw_wav(dir / "stereo.wav", 1, 2, 16000, 16, {0, 0});
  CHECK_THROWS_WITH_AS(load_wav_pcm16_mono(dir / "stereo.wav", 16000),
                       doctest::Contains("mono"), IoError);
  write_raw_wav(dir / "rate.wav", 1, 1, 8000, 16, {0});
  CHECK_THROWS_WITH_AS(load_wav_pcm16_mono(dir / "rate.wav", 16000),
                       doctest::Contains("8000"), IoError);
  write_raw_wav(dir / "float.wav", 3, 1, 16000, 16, {0});
  CHECK_THROWS_WITH_AS(load_wav_pcm16_mono(dir / "float.wav", 16000),
                       doctest::Contains("format"), IoError);
  {
    std::FILE* f = std::fopen((dir / "junk.wav").c_str(), "wb");
    std::fputs("garbage", f);
    std::fclose(f);
  }
  CHECK_THROWS_AS(load_wav_pcm16_mono(dir / "junk.wav", 16000), IoError);
  fs::remove_all(dir);
}

TEST_CASE("wav: save/load round trip with quantization") {
  auto dir = temp_dir("wavrt");
  std::vector<double> samples{0.5, -0.25, 0.0, 0.9, -1.0, 1.0};
  save_wav_pcm16_mono(dir / "r.wav", samples, 16000);
  auto back = load_wav_pcm16_mono(dir / "r.wav", 16000);
  REQUIRE(back.size() == samples.size());
  for (size_t i = 0; i < samples.size(); ++i) {
    CHECK(back[i] == doctest::Approx(samples[i]).epsilon(1e-4));
  }
  // a second save of the loaded data is byte-stable
  save_wav_pcm16_mono(dir / "r2.wav", back, 16000);
  auto back2 = load_wav_pcm16_mono(dir / "r2.wav", 16000);
  for (size_t i = 0; i < back.size(); ++i) CHECK(back[i] == back2[i]);
  fs::remove_all(dir);
}

TEST_CASE("make_trials: counts, feasibility, determinism") {
  DomainSpec d = test_domain("src");
  d.duration_s = {0.1, 0.12};
  auto corpus = generate_corpus(2, 2, 2, d, 5);
  REQUIRE(corpus.size() == 4);

  TrialSet t = make_trials(corpus, 2, 2, 8);
  int targets = 0, nontargets = 0;
  std::map<std::string, std::string> spk_of;
  for (const auto& u : corpus) spk_of[u.utt_id] = u.speaker_id;
  for (const auto& tr : t.trials) {
    CHECK(tr.enroll_utt_id != tr.test_utt_id);
    if (tr.target) {
      ++targets;
      CHECK(spk_of[tr.enroll_utt_id] == spk_of[tr.test_utt_id]);
    } else {
      ++nontargets;
      CHECK(spk_of[tr.enroll_utt_id] != spk_of[tr.test_utt_id]);
    }
  }
  CHECK(targets == 2);
  CHECK(nontargets == 2);

  TrialSet t2 = make_trials(corpus, 2, 2, 8);
  REQUIRE(t2.trials.size() == t.trials.size());
  for (size_t i = 0; i < t.trials.size(); ++i) {
    CHECK(t.trials[i].enroll_utt_id == t2.trials[i].enroll_utt_id);
    CHECK(t.trials[i].test_utt_id == t2.trials[i].test_utt_id);
  }

  CHECK_THROWS_AS(make_trials(corpus, 0, 2, 8), ConfigError);
  CHECK_THROWS_AS(make_trials(corpus, 3, 2, 8), ConfigError);   // only 2 same pairs
  CHECK_THROWS_AS(make_trials(corpus, 2, 9, 8), ConfigError);   // only 8 cross pairs
}

TEST_CASE("trial list file round trip") {
  auto dir = temp_dir("trials");
  TrialSet t;
  t.trials.push_back({true, "a_u0", "a_u1"});
  t.trials.push_back({false, "a_u0", "b_u0"});
  write_trials(dir / "trials.txt", t);
  TrialSet back = read_trials(dir / "trials.txt");
  REQUIRE(back.trials.size() == 2);
  CHECK(back.trials[0].target);
  CHECK_FALSE(back.trials[1].target);
  CHECK(back.trials[1].test_utt_id == "b_u0");

  std::FILE* f = std::fopen((dir / "bad.txt").c_str(), "wb");
  std::fputs("2 x y\n", f);
  std::fclose(f);
  CHECK_THROWS_AS(read_trials(dir / "bad.txt"), IoError);
  fs::remove_all(dir);
}

TEST_CASE("corpus save/load round trip through WAV files") {
  DomainSpec d = test_domain("src");
  d.duration_s = {0.1, 0.15};
  auto corpus = generate_corpus(2, 2, 2, d, 31);
  auto dir = temp_dir("corpusrt");
  save_corpus(dir, corpus);
  auto back = load_corpus(dir / "manifest.txt");
  REQUIRE(back.size() == corpus.size());
  for (size_t i = 0; i < corpus.size(); ++i) {
    CHECK(back[i].utt_id == corpus[i].utt_id);
    CHECK(back[i].speaker_id == corpus[i].speaker_id);
    CHECK(back[i].domain_id == corpus[i].domain_id);
    REQUIRE(back[i].samples.numel() == corpus[i].samples.numel());
    for (int64_t j = 0; j < back[i].samples.numel(); ++j) {
      CHECK(back[i].samples.data()[j] ==
            doctest::Approx(corpus[i].samples.data()[j]).epsilon(1e-4));
    }
  }
  fs::remove_all(dir);
}

TEST_CASE("speaker identity is learnable: template classifier beats chance") {
  DomainSpec d = test_domain("src");
  d.duration_s = {0.5, 0.8};
  int num_speakers = 6;
  auto corpus = generate_corpus(num_speakers, 4, 4, d, 17);

  FbankConfig fc;
  fc.num_mels = 16;
  FbankExtractor fx(fc);

  // per-utterance summary: mean over frames of the log-mel rows
  auto summarize = [&](const Utterance& u) {
    Tensor feats = fx.apply(u.samples);
    return mean_axis0(feats);
  };

  std::map<std::string, std::vector<double>> templates;
  std::map<std::string, int> counts;
  std::vector<std::pair<std::string, std::vector<double>>> summaries;
  for (const auto& u : corpus) {
    Tensor s = summarize(u);
    std::vector<double> v(s.data().begin(), s.data().end());
    summaries.emplace_back(u.speaker_id, v);
    auto& t = templates[u.speaker_id];
    if (t.empty()) t.assign(v.size(), 0.0);
    for (size_t i = 0; i < v.size(); ++i) t[i] += v[i];
    counts[u.speaker_id]++;
  }
  for (auto& [spk, t] : templates) {
    for (auto& v : t) v /= counts[spk];
  }

  int correct = 0;
  for (const auto& [spk, v] : summaries) {
    double best = 1e300;
    std::string best_spk;
    for (const auto& [cand, t] : templates) {
      double dist = 0;
      for (size_t i = 0; i < v.size(); ++i) dist += (v[i] - t[i]) * (v[i] - t[i]);
      if (dist < best) {
        best = dist;
        best_spk = cand;
      }
    }
    if (best_spk == spk) ++correct;
  }
  double accuracy = static_cast<double>(correct) / static_cast<double>(summaries.size());
  INFO("template-classifier accuracy ", accuracy);
  CHECK(accuracy > 3.0 / num_speakers);
}
