#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include "avianrisk/error.hpp"
#include "avianrisk/train.hpp"

using namespace avianrisk;
using model::ModelConfig;

namespace {

ModelConfig tiny_model_config() {
  ModelConfig cfg;
  cfg.d_model = 8;
  cfg.n_layers = 1;
  cfg.n_heads = 2;
  cfg.d_ff = 16;
  cfg.dropout_p = 0.1;
  cfg.T_max = 4;
  cfg.n_species = 1;
  cfg.cell_vocab = 2;
  cfg.d_cell = 4;
  cfg.seed = 3;
  return cfg;
}

// Windows whose label is carried loudly by ctx[0]; everything else is mild
// noise. Enough signal for a tiny model to reach perfect ranking.
std::vector<features::Window> separable_windows(int n, std::uint64_t seed) {
  std::vector<features::Window> out;
  rng::Rng r(seed);
  for (int i = 0; i < n; ++i) {
    features::Window w;
    w.individual_id = "b" + std::to_string(i);
    w.species = "teal";
    w.species_id = 0;
    const int T = 4;
    w.x_cont.assign(T, {});
    w.cells.assign(T, geo::CellId{0});
    w.pad_mask.assign(T, 0);
    w.obs_mask.assign(T, 1);
    w.label = i % 3 == 0 ? 1 : 0;
    for (int t = 0; t < T; ++t) {
      for (int c = 0; c < features::kStepDims; ++c)
        w.x_cont[t][c] = 0.1 * r.normal();
      w.x_cont[t][0] = w.label ? 2.0 : -2.0;
    }
    for (int c = 0; c < features::kCtxDims; ++c) w.ctx[c] = 0.1 * r.normal();
    w.ctx[0] = w.label ? 2.0 : -2.0;
    w.cohort = {0, "U" + std::to_string(i), "2021-W01"};
    w.normalized = true;
    out.push_back(std::move(w));
  }
  return out;
}

} // namespace

TEST_CASE("bce with logits: values, symmetry, weighting") {
  const double ln2 = std::log(2.0);
  const auto a = train::bce_with_logits(0.0, 1, 1.0);
  CHECK(a.loss == doctest::Approx(ln2));
  CHECK(a.dlogit == doctest::Approx(-0.5));
  const auto b = train::bce_with_logits(0.0, 0, 1.0);
  CHECK(b.loss == doctest::Approx(ln2));
  CHECK(b.dlogit == doctest::Approx(0.5));

  // The positive weight scales the positive term only.
  const auto c = train::bce_with_logits(0.7, 1, 3.0);
  const auto c1 = train::bce_with_logits(0.7, 1, 1.0);
  CHECK(c.loss == doctest::Approx(3.0 * c1.loss));
  CHECK(c.dlogit == doctest::Approx(3.0 * c1.dlogit));
  const auto d = train::bce_with_logits(0.7, 0, 3.0);
  const auto d1 = train::bce_with_logits(0.7, 0, 1.0);
  CHECK(d.loss == d1.loss);
  CHECK(d.dlogit == d1.dlogit);
}

TEST_CASE("bce is finite and sane at extreme logits") {
  const auto far_pos = train::bce_with_logits(50.0, 1, 1.0);
  CHECK(std::isfinite(far_pos.loss));
  CHECK(far_pos.loss >= 0.0);
  CHECK(far_pos.loss < 1e-20);
  const auto far_wrong = train::bce_with_logits(-50.0, 1, 1.0);
  CHECK(far_wrong.loss == doctest::Approx(50.0));
  const auto neg_far = train::bce_with_logits(500.0, 0, 1.0);
  CHECK(neg_far.loss == doctest::Approx(500.0));
  CHECK(std::isfinite(train::bce_with_logits(-500.0, 0, 1.0).loss));
}

TEST_CASE("bce gradient matches finite differences") {
  const double h = 1e-6;
  for (int yi : {0, 1}) {
    for (double pw : {1.0, 2.5}) {
      for (double z = -20.0; z <= 20.0; z += 0.25) {
        const auto g = train::bce_with_logits(z, yi, pw);
        const double lp = train::bce_with_logits(z + h, yi, pw).loss;
        const double lm = train::bce_with_logits(z - h, yi, pw).loss;
        const double numeric = (lp - lm) / (2.0 * h);
        CHECK(std::abs(numeric - g.dlogit) < 1e-7 * std::max(1.0, std::abs(numeric)));
      }
    }
  }
}

TEST_CASE("sigmoid") {
  CHECK(train::sigmoid(0.0) == 0.5);
  CHECK(train::sigmoid(800.0) == doctest::Approx(1.0));
  CHECK(train::sigmoid(-800.0) == doctest::Approx(0.0));
  CHECK(std::isfinite(train::sigmoid(-800.0)));
  CHECK(train::sigmoid(2.0) > train::sigmoid(1.0));
  CHECK(train::sigmoid(-3.0) == doctest::Approx(1.0 - train::sigmoid(3.0)));
}

TEST_CASE("pos weight") {
  CHECK(train::pos_weight({1, 0, 0, 0}) == doctest::Approx(3.0));
  CHECK(train::pos_weight({1, 1, 0, 0}) == doctest::Approx(1.0));
  CHECK_THROWS_AS(train::pos_weight({1, 1}), InputError);
  CHECK_THROWS_AS(train::pos_weight({0, 0}), InputError);
  CHECK_THROWS_AS(train::pos_weight({}), InputError);
}

TEST_CASE("weighted sampler hits the expected positive rate") {
  std::vector<int> labels(100, 0);
  for (int i = 0; i < 20; ++i) labels[i] = 1;
  // Expected positive share with weight 3: 60 / 140.
  const double expect = 60.0 / 140.0;
  std::size_t n_pos = 0, n_total = 0;
  for (std::uint64_t s = 0; s < 1000; ++s) {
    const auto idx = train::weighted_sampler(labels, 3.0, s);
    REQUIRE(idx.size() == labels.size());
    for (const auto i : idx) {
      REQUIRE(i < labels.size());
      n_pos += labels[i];
      ++n_total;
    }
  }
  CHECK(std::abs(double(n_pos) / double(n_total) - expect) < 0.01);

  // Deterministic in the seed.
  CHECK(train::weighted_sampler(labels, 3.0, 7) ==
        train::weighted_sampler(labels, 3.0, 7));
  CHECK(train::weighted_sampler(labels, 3.0, 7) !=
        train::weighted_sampler(labels, 3.0, 8));

  // Unit weight reduces to plain uniform resampling; every index reachable.
  const auto uni = train::weighted_sampler(labels, 1.0, 3);
  CHECK(uni.size() == labels.size());
}

TEST_CASE("gradient clipping scales by the global norm") {
  auto cfg = tiny_model_config();
  auto grads = model::make_parameters(cfg);
  grads.head_w.setConstant(3.0); // d_model entries
  grads.head_b.setConstant(4.0);
  const double expect_norm =
      std::sqrt(9.0 * cfg.d_model + 16.0); // sqrt(72 + 16)

  auto clipped = grads;
  const double norm = train::clip_gradients(clipped, 1.0);
  CHECK(norm == doctest::Approx(expect_norm));
  CHECK(clipped.head_w(0) == doctest::Approx(3.0 / expect_norm));
  CHECK(clipped.head_b(0) == doctest::Approx(4.0 / expect_norm));

  // Under the limit: untouched, same norm reported.
  auto small = model::make_parameters(cfg);
  small.head_b.setConstant(0.25);
  const double small_norm = train::clip_gradients(small, 1.0);
  CHECK(small_norm == doctest::Approx(0.25));
  CHECK(small.head_b(0) == 0.25);

  auto bad = model::make_parameters(cfg);
  bad.head_w(0) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(train::clip_gradients(bad, 1.0), RuntimeFailure);
}

TEST_CASE("adamw matches a scalar reference over many steps") {
  auto cfg = tiny_model_config();
  train::TrainConfig tc;
  tc.lr = 1e-2;
  tc.weight_decay = 0.03;
  tc.beta1 = 0.9;
  tc.beta2 = 0.999;
  tc.eps = 1e-8;

  auto params = model::make_parameters(cfg);
  auto state = train::make_adam_state(cfg);
  params.head_w(0) = 0.5;

  // Scalar re-derivation of the same update rule.
  double theta = 0.5, m = 0.0, v = 0.0;
  rng::Rng r(42);
  for (int t = 1; t <= 100; ++t) {
    const double g = r.uniform(-1.0, 1.0);
    auto grads = model::make_parameters(cfg);
    grads.head_w(0) = g;
    train::adamw_step(params, grads, state, tc, t);

    m = tc.beta1 * m + (1.0 - tc.beta1) * g;
    v = tc.beta2 * v + (1.0 - tc.beta2) * g * g;
    const double mh = m / (1.0 - std::pow(tc.beta1, t));
    const double vh = v / (1.0 - std::pow(tc.beta2, t));
    theta -= tc.lr * (mh / (std::sqrt(vh) + tc.eps) + tc.weight_decay * theta);
    CHECK(std::abs(params.head_w(0) - theta) < 1e-12);
  }
  // Parameters with zero gradient still shrink through decoupled decay.
  CHECK(params.head_b(0) == 0.0); // started at zero, stays at zero
}

TEST_CASE("adamw rejects mismatched gradient shapes") {
  auto cfg = tiny_model_config();
  auto params = model::make_parameters(cfg);
  auto state = train::make_adam_state(cfg);
  auto cfg_big = cfg;
  cfg_big.d_model = 16;
  cfg_big.n_heads = 4;
  auto grads = model::make_parameters(cfg_big);
  CHECK_THROWS_AS(train::adamw_step(params, grads, state, train::TrainConfig{}, 1),
                  InputError);
}

TEST_CASE("threshold selection maximizes F1 over candidate scores") {
  rng::Rng r(55);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> scores;
    std::vector<int> labels;
    const int n = 5 + static_cast<int>(r.below(80));
    bool has0 = false, has1 = false;
    for (int i = 0; i < n; ++i) {
      scores.push_back(r.below(11) / 10.0);
      labels.push_back(r.uniform() < 0.4 ? 1 : 0);
      (labels.back() ? has1 : has0) = true;
    }
    if (!has0 || !has1) continue;
    const auto pick = train::select_threshold(scores, labels);

    // Dense scan over every candidate, recomputing F1 from scratch.
    double best_f1 = -1.0, best_t = 0.0;
    std::vector<double> cand = scores;
    std::sort(cand.begin(), cand.end());
    cand.erase(std::unique(cand.begin(), cand.end()), cand.end());
    for (const double t : cand) {
      std::int64_t tp = 0, fp = 0, fn = 0;
      for (std::size_t i = 0; i < scores.size(); ++i) {
        const bool pred = scores[i] >= t;
        if (pred && labels[i]) ++tp;
        else if (pred) ++fp;
        else if (labels[i]) ++fn;
      }
      const double f1 =
          tp == 0 ? 0.0 : 2.0 * double(tp) / double(2 * tp + fp + fn);
      if (f1 > best_f1 + 1e-15) {
        best_f1 = f1;
        best_t = t;
      }
    }
    CHECK(pick.f1_at_threshold == doctest::Approx(best_f1));
    CHECK(pick.threshold == doctest::Approx(best_t)); // ties -> smallest
  }
  CHECK_THROWS_AS(train::select_threshold({0.1, 0.9}, {1, 1}), InputError);
  CHECK_THROWS_AS(train::select_threshold({0.1}, {1, 0}), InputError);
  CHECK_THROWS_AS(train::select_threshold({}, {}), InputError);
}

TEST_CASE("history csv leaves unavailable metrics empty") {
  namespace fs = std::filesystem;
  const auto path = (fs::temp_directory_path() / "avianrisk_history.csv").string();
  std::vector<model::EpochRecord> hist;
  hist.push_back({1, 0.7, 0.68, 0.55, 0.6, 0.5});
  hist.push_back({2, 0.6, 0.64, 0.58,
                  std::numeric_limits<double>::quiet_NaN(),
                  std::numeric_limits<double>::quiet_NaN()});
  train::write_history_csv(hist, path);
  std::ifstream in(path);
  std::string header, l1, l2;
  std::getline(in, header);
  std::getline(in, l1);
  std::getline(in, l2);
  CHECK(header == "epoch,train_loss,val_loss,val_acc,val_auc,val_ap");
  CHECK(l1.substr(0, 2) == "1,");
  CHECK(l2.find(",,") != std::string::npos); // NaN columns collapse to empty
  fs::remove(path);
}

TEST_CASE("fit learns a separable problem end to end") {
  namespace fs = std::filesystem;
  const auto ckpt_path = (fs::temp_directory_path() / "avianrisk_fit.ckpt").string();

  const auto train_w = separable_windows(48, 1);
  const auto val_w = separable_windows(24, 2);
  auto mcfg = tiny_model_config();
  train::TrainConfig tcfg;
  tcfg.epochs = 25;
  tcfg.batch_size = 16;
  tcfg.lr = 3e-3;
  tcfg.seed = 11;

  features::FeatureStats stats; // identity normalization
  for (auto& s : stats.cont_std) s = 1.0;
  for (auto& s : stats.ctx_std) s = 1.0;

  int callbacks = 0;
  const auto result =
      train::fit(train_w, val_w, mcfg, tcfg, stats, {"teal"}, ckpt_path,
                 [&](const model::EpochRecord&) { ++callbacks; });

  CHECK(callbacks == 25);
  REQUIRE(result.history.size() == 25);
  for (const auto& e : result.history) {
    CHECK(std::isfinite(e.train_loss));
    CHECK(std::isfinite(e.val_loss));
  }
  CHECK(result.history.back().train_loss < result.history.front().train_loss);
  CHECK(result.best.val_auc >= 0.95);
  CHECK(result.best.best_epoch >= 1);
  CHECK(result.best.threshold > 0.0);
  CHECK(result.best.threshold < 1.0);
  CHECK(result.best.species_vocab == std::vector<std::string>{"teal"});

  // The checkpoint on disk is the returned model, threshold included.
  const auto loaded = model::load_checkpoint(ckpt_path);
  CHECK(loaded.threshold == result.best.threshold);
  CHECK(loaded.best_epoch == result.best.best_epoch);

  // Scores from the stored model separate the validation set.
  const auto scores = train::score_windows(val_w, loaded);
  REQUIRE(scores.size() == val_w.size());
  double sum_pos = 0.0, sum_neg = 0.0;
  std::size_t n_pos = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    CHECK(scores[i] > 0.0);
    CHECK(scores[i] < 1.0);
    if (val_w[i].label) {
      sum_pos += scores[i];
      ++n_pos;
    } else {
      sum_neg += scores[i];
    }
  }
  CHECK(sum_pos / n_pos > sum_neg / (scores.size() - n_pos) + 0.1);

  // Refitting with the same seeds reproduces the loss curve exactly.
  const auto again =
      train::fit(train_w, val_w, mcfg, tcfg, stats, {"teal"}, ckpt_path);
  REQUIRE(again.history.size() == result.history.size());
  for (std::size_t i = 0; i < again.history.size(); ++i) {
    CHECK(again.history[i].train_loss == result.history[i].train_loss);
    CHECK(again.history[i].val_loss == result.history[i].val_loss);
  }
  fs::remove(ckpt_path);
}

TEST_CASE("fit validates its inputs") {
  const auto train_w = separable_windows(12, 1);
  auto val_bad = separable_windows(6, 2);
  for (auto& w : val_bad) w.label = 0; // single-class validation split
  const auto mcfg = tiny_model_config();
  train::TrainConfig tcfg;
  tcfg.epochs = 1;
  const auto path =
      (std::filesystem::temp_directory_path() / "avianrisk_reject.ckpt").string();
  features::FeatureStats stats;
  CHECK_THROWS_AS(
      train::fit(train_w, val_bad, mcfg, tcfg, stats, {"teal"}, path),
      InputError);
  CHECK_THROWS_AS(train::fit({}, val_bad, mcfg, tcfg, stats, {"teal"}, path),
                  InputError);
  train::TrainConfig bad_cfg;
  bad_cfg.lr = -1.0;
  CHECK_THROWS_AS(bad_cfg.validate(), InputError);
  bad_cfg = train::TrainConfig{};
  bad_cfg.batch_size = 0;
  CHECK_THROWS_AS(bad_cfg.validate(), InputError);
}
