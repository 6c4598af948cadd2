// tests/test_train_eval.cc

#include <cmath>

#include "doctest.h"
#include "reprogsv/eval.h"
#include "reprogsv/train.h"
#include "test_support.h"

using namespace reprogsv;

namespace {

DomainSpec source_domain() {
  DomainSpec d;
  d.domain_id = "src";
  d.f0_family = F0Family::kVibrato;
  d.f0_mod_rate_hz = {4.0, 6.5};
  d.f0_mod_depth = {0.02, 0.06};
  d.duration_s = {0.7, 1.0};
  d.noise_snr_db = {30.0, 35.0};
  d.spectral_tilt_db_per_octave = -2.0;
  return d;
}

DomainSpec target_domain() {
  DomainSpec d;
  d.domain_id = "tgt";
  d.f0_family = F0Family::kSweep;
  d.f0_mod_rate_hz = {0.3, 0.8};
  d.f0_mod_depth = {0.15, 0.30};
  d.duration_s = {0.7, 1.0};
  d.noise_snr_db = {12.0, 18.0};
  d.spectral_tilt_db_per_octave = -10.0;
  return d;
}

ExperimentConfig small_recipe() {
  ExperimentConfig cfg;
  cfg.crop_seconds = 0.5;
  cfg.batch_size = 16;
  cfg.epochs = 5;
  cfg.lr_drop_epochs = {3, 4};
  cfg.padding_l = 0;
  cfg.padding_k = 1;
  cfg.seed = 7;
  cfg.fbank.num_mels = 16;
  cfg.backbone.num_conv_blocks = 2;
  cfg.backbone.channels = 16;
  cfg.backbone.embedding_dim = 16;
  cfg.estimator.channels = 8;
  cfg.estimator.attention_blocks = 1;
  cfg.validate_and_finalize();
  return cfg;
}

struct Fixture {
  ExperimentConfig cfg = small_recipe();
  std::vector<Utterance> src_train, tgt_train, tgt_eval;
  TrialSet tgt_trials;
  SpeakerModel model;

  Fixture()
      : src_train(generate_corpus(8, 6, 6, source_domain(), 101)),
        tgt_train(generate_corpus(6, 5, 5, target_domain(), 202)),
        tgt_eval(generate_corpus(6, 5, 5, target_domain(), 303)),
        tgt_trials(make_trials(tgt_eval, 50, 150, 404)),
        model(pretrain(src_train, cfg).model) {}
};

const Fixture& fixture() {
  static Fixture f;
  return f;
}

PaddingParams no_padding() {
  PaddingParams p;
  p.total_len = 0;
  p.num_segments = 1;
  p.values = Tensor::zeros({0}, true);
  return p;
}

}  // namespace

TEST_CASE("compute_eer: pinned examples") {
  auto [eer0, thr0] = compute_eer({0.9, 0.8}, {0.1, 0.2});
  CHECK(eer0 == doctest::Approx(0.0));

  // one miss and one false alarm at the crossing
  auto [eer50, thr50] = compute_eer({0.8, 0.4}, {0.6, 0.2});
  CHECK(eer50 == doctest::Approx(0.5));

  auto [eer_same, thr_same] = compute_eer({0.3, 0.7}, {0.3, 0.7});
  CHECK(eer_same == doctest::Approx(0.5));

  CHECK_THROWS_AS(compute_eer({}, {0.1}), Error);
  CHECK_THROWS_AS(compute_eer({0.1}, {}), Error);
}

TEST_CASE("compute_eer agrees with the brute-force oracle") {
  Rng rng(2301);
  for (int inst = 0; inst < 200; ++inst) {
    auto nt = static_cast<size_t>(rng.uniform_int(2, 200));
    auto nn = static_cast<size_t>(rng.uniform_int(2, 200));
    double sep = rng.uniform(-0.5, 1.5);
    bool quantize = rng.uniform() < 0.3;  // force ties sometimes
    std::vector<double> targets(nt), nontargets(nn);
    for (auto& v : targets) v = rng.normal(sep, 1.0);
    for (auto& v : nontargets) v = rng.normal(0.0, 1.0);
    if (quantize) {
      for (auto& v : targets) v = std::round(v * 4.0) / 4.0;
      for (auto& v : nontargets) v = std::round(v * 4.0) / 4.0;
    }
    auto [eer, thr] = compute_eer(targets, nontargets);
    auto [oeer, othr] = reprogsv::testing::brute_force_eer(targets, nontargets);
    INFO("instance ", inst, " nt=", nt, " nn=", nn);
    CHECK(std::abs(eer - oeer) < 1e-9);
    CHECK(std::abs(thr - othr) < 1e-9);
    CHECK(eer >= 0.0);
    CHECK(eer <= 1.0);
  }
}

TEST_CASE("lr schedule: exact tenth drops at the configured epochs") {
  ExperimentConfig cfg;  // defaults: 20 epochs, drops at 10 and 15
  cfg.validate_and_finalize();
  for (int e = 1; e <= 10; ++e) CHECK(cfg.lr_at_epoch(e) == 1e-3);
  for (int e = 11; e <= 15; ++e) CHECK(cfg.lr_at_epoch(e) == doctest::Approx(1e-4).epsilon(1e-14));
  for (int e = 16; e <= 20; ++e) CHECK(cfg.lr_at_epoch(e) == doctest::Approx(1e-5).epsilon(1e-14));
}

TEST_CASE("config: drops must be increasing and inside the epoch range") {
  ExperimentConfig cfg = small_recipe();
  cfg.lr_drop_epochs = {4, 3};
  CHECK_THROWS_AS(cfg.validate_and_finalize(), ConfigError);
  cfg.lr_drop_epochs = {5};
  CHECK_THROWS_AS(cfg.validate_and_finalize(), ConfigError);
}

TEST_CASE("config: small_data_mode coerces the long schedule") {
  ExperimentConfig cfg = small_recipe();
  cfg.small_data_mode = true;
  cfg.validate_and_finalize();
  CHECK(cfg.epochs == 100);
  CHECK(cfg.lr_drop_epochs == std::vector<int64_t>{60, 80});
}

TEST_CASE("crop_or_tile: window, identity, tiling") {
  Rng rng(5);
  Tensor x = Tensor::from_data({1, 2, 3, 4, 5}, {5});
  Tensor same = crop_or_tile(x, 5, rng);
  CHECK(std::vector<double>(same.data().begin(), same.data().end()) ==
        std::vector<double>{1, 2, 3, 4, 5});
  Tensor tiled = crop_or_tile(x, 8, rng);
  CHECK(std::vector<double>(tiled.data().begin(), tiled.data().end()) ==
        std::vector<double>{1, 2, 3, 4, 5, 1, 2, 3});
  for (int i = 0; i < 10; ++i) {
    Tensor w = crop_or_tile(x, 3, rng);
    CHECK(w.numel() == 3);
    CHECK(w.at(0) >= 1);
    CHECK(w.at(2) <= 5);
  }
}

TEST_CASE("pretrain: loss decreases and the run is reproducible") {
  const auto& f = fixture();
  PretrainResult again = pretrain(f.src_train, f.cfg);
  REQUIRE(again.log.size() == 5);
  CHECK(again.log[4].mean_loss < again.log[0].mean_loss);
  CHECK(again.model.backbone.frozen());
  CHECK(again.model.backbone.param_hash() == f.model.backbone.param_hash());
  CHECK(again.log[0].lr == 1e-3);
}

TEST_CASE("pretrain: held-out source EER is clearly better than chance") {
  const auto& f = fixture();
  auto held_out = generate_corpus(6, 5, 5, source_domain(), 909);
  TrialSet trials = make_trials(held_out, 50, 150, 808);
  EvalReport rep = evaluate(f.model.backbone, f.model.fbank, no_padding(), held_out,
                            trials, ScoreMode::kMeanAll);
  INFO("held-out source EER ", rep.eer_percent);
  CHECK(rep.eer_percent < 45.0);
}

TEST_CASE("pretrain: divergent input aborts with an error") {
  auto cfg = small_recipe();
  std::vector<Utterance> bad;
  for (int s = 0; s < 2; ++s) {
    for (int u = 0; u < 2; ++u) {
      Utterance utt;
      utt.utt_id = "bad_s" + std::to_string(s) + "_u" + std::to_string(u);
      utt.speaker_id = "bad_s" + std::to_string(s);
      utt.domain_id = "bad";
      utt.samples = Tensor::full({8000}, 1e200);
      bad.push_back(std::move(utt));
    }
  }
  CHECK_THROWS_AS(pretrain(bad, cfg), Error);
}

TEST_CASE("adapt_vanilla: backbone frozen, padding moves") {
  const auto& f = fixture();
  ExperimentConfig cfg = f.cfg;
  cfg.epochs = 2;
  cfg.lr_drop_epochs = {1};
  cfg.padding_l = 800;
  cfg.padding_k = 1;
  uint64_t hash_before = f.model.backbone.param_hash();

  AdaptResult res = adapt_vanilla(f.model, f.tgt_train, cfg);
  CHECK(f.model.backbone.param_hash() == hash_before);
  CHECK(res.padding.total_len == 800);

  // freshly initialized padding with the same seed, for comparison
  Rng rng(Rng::mix(cfg.seed, 0xada7));
  PaddingParams init = PaddingParams::init(800, 1, cfg.padding_init_std, rng);
  double moved = 0;
  for (int64_t i = 0; i < 800; ++i) {
    double d = res.padding.values.data()[i] - init.values.data()[i];
    moved += d * d;
  }
  CHECK(moved > 0.0);
}

TEST_CASE("adapt_vanilla: unfrozen backbone is rejected") {
  const auto& f = fixture();
  SpeakerModel thawed{Backbone(f.model.backbone.config(), [] {
                        Rng r(1);
                        return r;
                      }()),
                      ClassifierHead{f.model.head.projection.detach()}, f.model.fbank};
  thawed.backbone.set_frozen(false);
  CHECK_THROWS_AS(adapt_vanilla(thawed, f.tgt_train, f.cfg), Error);
}

TEST_CASE("adapt_grad_est: black-box contract and distillation progress") {
  const auto& f = fixture();
  ExperimentConfig cfg = f.cfg;
  cfg.epochs = 4;
  cfg.lr_drop_epochs = {3};
  cfg.padding_l = 800;
  cfg.padding_k = 1;

  AdaptResult res = adapt_grad_est(f.model, f.tgt_train, cfg);
  CHECK(res.backbone_forward_calls > 0);
  CHECK(res.backbone_backward_touches == 0);
  for (const auto& p : f.model.backbone.parameters()) {
    INFO("backbone param ", p.name());
    CHECK_FALSE(p.has_grad());  // no gradient buffer was ever allocated
  }
  REQUIRE(res.estimator.has_value());
  REQUIRE(res.log.size() == 4);
  CHECK(res.log[3].mean_distill_loss < res.log[0].mean_distill_loss);
}

TEST_CASE("small_data_mode: classifier projection is frozen, padding still trains") {
  const auto& f = fixture();
  ExperimentConfig cfg = f.cfg;
  cfg.small_data_mode = true;  // forces 100 epochs with drops at 60/80
  cfg.padding_l = 400;
  cfg.padding_k = 1;
  cfg.crop_seconds = 0.2;
  cfg.batch_size = 8;

  auto tiny = generate_corpus(2, 2, 2, target_domain(), 551);
  AdaptResult res = adapt_vanilla(f.model, tiny, cfg);
  CHECK_FALSE(res.head.projection.requires_grad());
  REQUIRE(res.log.size() == 100);
  CHECK(res.log[59].lr == 1e-3);
  CHECK(res.log[60].lr == doctest::Approx(1e-4).epsilon(1e-14));
  CHECK(res.log[80].lr == doctest::Approx(1e-5).epsilon(1e-14));

  AdaptResult res2 = adapt_vanilla(f.model, tiny, cfg);
  for (int64_t i = 0; i < res.padding.values.numel(); ++i) {
    REQUIRE(res.padding.values.data()[i] == res2.padding.values.data()[i]);
  }
}

TEST_CASE("evaluate: l=0 reproduces the plain cosine baseline bit-exactly") {
  const auto& f = fixture();
  EvalReport rep = evaluate(f.model.backbone, f.model.fbank, no_padding(), f.tgt_eval,
                            f.tgt_trials, ScoreMode::kMeanAll);

  // independent route: direct embeddings and plain cosine scores
  FbankExtractor fx(f.model.fbank);
  std::map<std::string, Tensor> embs;
  for (const auto& u : f.tgt_eval) {
    embs.emplace(u.utt_id, f.model.backbone.forward(fx.apply(u.samples)));
  }
  std::vector<double> t_scores, n_scores;
  for (const auto& tr : f.tgt_trials.trials) {
    double s = cosine_similarity(embs.at(tr.enroll_utt_id), embs.at(tr.test_utt_id)).value();
    (tr.target ? t_scores : n_scores).push_back(s);
  }
  auto [eer, thr] = compute_eer(t_scores, n_scores);
  CHECK(rep.eer_percent == 100.0 * eer);  // exact
  CHECK(rep.threshold == thr);
  CHECK(rep.num_trials == static_cast<int64_t>(f.tgt_trials.trials.size()));
}

TEST_CASE("evaluate: k=1 expansion equals the raw padding pipeline bit-exactly") {
  const auto& f = fixture();
  Rng rng(99);
  PaddingParams padding = PaddingParams::init(640, 1, 0.05, rng);

  EvalReport rep = evaluate(f.model.backbone, f.model.fbank, padding, f.tgt_eval,
                            f.tgt_trials, ScoreMode::kMeanAll);

  FbankExtractor fx(f.model.fbank);
  std::map<std::string, Tensor> embs;
  for (const auto& u : f.tgt_eval) {
    embs.emplace(u.utt_id,
                 f.model.backbone.forward(fx.apply(pad_raw(u.samples, padding.values).samples)));
  }
  std::vector<double> t_scores, n_scores;
  for (const auto& tr : f.tgt_trials.trials) {
    double s = cosine_similarity(embs.at(tr.enroll_utt_id), embs.at(tr.test_utt_id)).value();
    (tr.target ? t_scores : n_scores).push_back(s);
  }
  auto [eer, thr] = compute_eer(t_scores, n_scores);
  CHECK(rep.eer_percent == 100.0 * eer);
  CHECK(rep.threshold == thr);
}

TEST_CASE("evaluate: repeated calls agree bit-exactly") {
  const auto& f = fixture();
  Rng rng(123);
  PaddingParams padding = PaddingParams::init(320, 2, 0.02, rng);
  EvalReport a = evaluate(f.model.backbone, f.model.fbank, padding, f.tgt_eval,
                          f.tgt_trials, ScoreMode::kMeanAll);
  EvalReport b = evaluate(f.model.backbone, f.model.fbank, padding, f.tgt_eval,
                          f.tgt_trials, ScoreMode::kMeanAll);
  CHECK(a.eer_percent == b.eer_percent);
  CHECK(a.threshold == b.threshold);
}

TEST_CASE("evaluate: unknown utterance in a trial is an error") {
  const auto& f = fixture();
  TrialSet broken = f.tgt_trials;
  broken.trials.push_back({true, "nope_u000", broken.trials[0].test_utt_id});
  CHECK_THROWS_WITH_AS(evaluate(f.model.backbone, f.model.fbank, no_padding(), f.tgt_eval,
                                broken, ScoreMode::kMeanAll),
                       doctest::Contains("nope_u000"), Error);
}

TEST_CASE("indistinguishable random scores give EER near 50%") {
  Rng rng(4242);
  std::vector<double> t_scores, n_scores;
  for (int i = 0; i < 1300; ++i) {
    auto cos_of_random_pair = [&]() {
      std::vector<double> a(16), b(16);
      for (auto& v : a) v = rng.normal();
      for (auto& v : b) v = rng.normal();
      double dot = 0, na = 0, nb = 0;
      for (int j = 0; j < 16; ++j) {
        dot += a[j] * b[j];
        na += a[j] * a[j];
        nb += b[j] * b[j];
      }
      return dot / std::sqrt(na * nb);
    };
    t_scores.push_back(cos_of_random_pair());
    n_scores.push_back(cos_of_random_pair());
  }
  auto [eer, thr] = compute_eer(t_scores, n_scores);
  CHECK(100.0 * eer > 45.0);
  CHECK(100.0 * eer < 55.0);
}

TEST_CASE("run_sweep: grid mechanics, baseline cell, failure isolation") {
  const auto& f = fixture();
  ExperimentConfig base = f.cfg;
  base.epochs = 1;
  base.lr_drop_epochs = {};

  auto cells = run_sweep(f.model, f.tgt_train, f.tgt_eval, f.tgt_trials, base,
                         AdaptMode::kVanilla, {0, 800}, {1});
  REQUIRE(cells.size() == 2);
  CHECK_FALSE(cells[0].failed);
  CHECK_FALSE(cells[1].failed);
  CHECK(cells[0].n == 0);
  CHECK(cells[0].l == 0);
  CHECK(cells[1].l == 800);
  CHECK(cells[0].report.adapt_mode == "vanilla");
  CHECK(cells[0].report.num_trials == static_cast<int64_t>(f.tgt_trials.trials.size()));

  // the n=0 cell trains only the classifier, which evaluation never uses,
  // so its EER equals the unadapted baseline exactly
  EvalReport baseline = evaluate(f.model.backbone, f.model.fbank, no_padding(),
                                 f.tgt_eval, f.tgt_trials, ScoreMode::kMeanAll);
  CHECK(cells[0].report.eer_percent == baseline.eer_percent);

  auto with_bad = run_sweep(f.model, f.tgt_train, f.tgt_eval, f.tgt_trials, base,
                            AdaptMode::kVanilla, {-160, 0}, {1});
  REQUIRE(with_bad.size() == 2);
  CHECK(with_bad[0].failed);
  CHECK(with_bad[0].error.find("n=-160") != std::string::npos);
  CHECK_FALSE(with_bad[1].failed);
}

TEST_CASE("results CSV: write/read round trip and schema validation") {
  auto dir = std::filesystem::temp_directory_path();
  auto path = dir / "reprogsv_results_test.csv";
  std::vector<EvalReport> reports(2);
  reports[0].adapt_mode = "vanilla";
  reports[0].padding_n = 800;
  reports[0].padding_l = 1600;
  reports[0].padding_k = 2;
  reports[0].eer_percent = 12.345678901234567;
  reports[0].threshold = -0.125;
  reports[0].num_trials = 200;
  reports[0].seed = 7;
  reports[1].adapt_mode = "grad_est";
  write_results_csv(path, reports);
  auto back = read_results_csv(path);
  REQUIRE(back.size() == 2);
  CHECK(back[0].eer_percent == reports[0].eer_percent);
  CHECK(back[0].threshold == reports[0].threshold);
  CHECK(back[0].padding_k == 2);
  CHECK(back[1].adapt_mode == "grad_est");

  std::ofstream bad(path, std::ios::trunc);
  bad << "wrong,header\n";
  bad.close();
  CHECK_THROWS_AS(read_results_csv(path), IoError);
  std::filesystem::remove(path);
}
