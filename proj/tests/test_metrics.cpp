#include <doctest.h>

#include <cmath>

#include "fixthresh/error.hpp"
#include "fixthresh/metrics.hpp"
#include "oracles.hpp"

using namespace fixthresh;
using metrics::ScoreSet;

namespace {

ScoreSet worked_example() {
  return {{0.1, 0.4, 0.35, 0.8}, {0, 0, 1, 1}, {}};
}

}  // namespace

TEST_CASE("confusion_at basic cases") {
  ScoreSet s{{0.9, 0.1}, {1, 0}, {}};
  auto c = metrics::confusion_at(s, 0.5);
  CHECK(c.tp == 1);
  CHECK(c.fp == 0);
  CHECK(c.tn == 1);
  CHECK(c.fn == 0);

  // All-positive rule at tau = -inf.
  c = metrics::confusion_at(s, -std::numeric_limits<double>::infinity());
  CHECK(c.tp == 1);
  CHECK(c.fp == 1);
  CHECK(c.tn == 0);
  CHECK(c.fn == 0);

  // Hand-enumerated mixed case; score >= tau counts as AI.
  c = metrics::confusion_at(worked_example(), 0.4);
  CHECK(c.tp == 1);
  CHECK(c.fp == 1);
  CHECK(c.tn == 1);
  CHECK(c.fn == 1);
}

TEST_CASE("metric_bundle values and degenerate conventions") {
  auto m = metrics::metric_bundle({1, 0, 1, 0});
  CHECK(m.accuracy == 1.0);
  CHECK(m.precision == 1.0);
  CHECK(m.recall == 1.0);
  CHECK(m.f1 == 1.0);
  CHECK(m.tnr == 1.0);

  m = metrics::metric_bundle({0, 0, 2, 2});
  CHECK(m.accuracy == 0.5);
  CHECK(m.precision == 0.0);  // tp+fp = 0 with fn > 0
  CHECK(m.recall == 0.0);
  CHECK(m.f1 == 0.0);
  CHECK(m.tnr == 1.0);

  m = metrics::metric_bundle({1, 1, 1, 1});
  CHECK(m.accuracy == 0.5);
  CHECK(m.precision == 0.5);
  CHECK(m.recall == 0.5);
  CHECK(m.f1 == doctest::Approx(0.5));
  CHECK(m.tnr == 0.5);

  // Nothing predicted positive and nothing to find: vacuous perfection.
  m = metrics::metric_bundle({0, 0, 3, 0});
  CHECK(m.precision == 1.0);
  CHECK(m.recall == 1.0);
}

TEST_CASE("roc_curve worked example") {
  const auto curve = metrics::roc_curve(worked_example());
  REQUIRE(curve.points.size() == 5);
  CHECK(std::isinf(curve.points[0].threshold));
  const double want_fpr[] = {0.0, 0.0, 0.5, 0.5, 1.0};
  const double want_tpr[] = {0.0, 0.5, 0.5, 1.0, 1.0};
  const double want_tau[] = {0.0, 0.8, 0.4, 0.35, 0.1};
  for (int i = 0; i < 5; ++i) {
    CHECK(curve.points[i].fpr == doctest::Approx(want_fpr[i]));
    CHECK(curve.points[i].tpr == doctest::Approx(want_tpr[i]));
    if (i > 0) CHECK(curve.points[i].threshold == want_tau[i]);
  }
}

TEST_CASE("roc_curve endpoints and degenerate cases") {
  // Perfect separation passes through (0,1).
  ScoreSet sep{{0.9, 0.8, 0.2, 0.1}, {1, 1, 0, 0}, {}};
  const auto curve = metrics::roc_curve(sep);
  bool hit = false;
  for (const auto& p : curve.points)
    if (p.fpr == 0.0 && p.tpr == 1.0) hit = true;
  CHECK(hit);
  CHECK(curve.points.front().fpr == 0.0);
  CHECK(curve.points.front().tpr == 0.0);
  CHECK(curve.points.back().fpr == 1.0);
  CHECK(curve.points.back().tpr == 1.0);

  // All scores equal: {(0,0), (1,1)}.
  ScoreSet ties{{0.5, 0.5, 0.5}, {1, 0, 1}, {}};
  const auto flat = metrics::roc_curve(ties);
  REQUIRE(flat.points.size() == 2);
  CHECK(flat.points[1].fpr == 1.0);
  CHECK(flat.points[1].tpr == 1.0);

  ScoreSet single{{0.1, 0.2}, {1, 1}, {}};
  CHECK_THROWS_AS(metrics::roc_curve(single), Error);
}

TEST_CASE("auroc examples") {
  ScoreSet sep{{0.9, 0.8, 0.2, 0.1}, {1, 1, 0, 0}, {}};
  CHECK(metrics::auroc(sep) == doctest::Approx(1.0));

  ScoreSet ties{{0.3, 0.3, 0.3, 0.3}, {1, 0, 1, 0}, {}};
  CHECK(metrics::auroc(ties) == doctest::Approx(0.5));

  CHECK(metrics::auroc(worked_example()) == doctest::Approx(0.75));
}

TEST_CASE("auroc equals pair counting on random sets") {
  oracles::MiniRng rng(20240811);
  for (int trial = 0; trial < 300; ++trial) {
    const auto s = oracles::random_scoreset(rng);
    CHECK(metrics::auroc(s) == doctest::Approx(oracles::pair_count_auroc(s)).epsilon(0)
                                   .scale(1.0)
                                   .epsilon(1e-12));
  }
}

TEST_CASE("auroc symmetry and rank invariance") {
  oracles::MiniRng rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    const auto s = oracles::random_scoreset(rng);
    const double base = metrics::auroc(s);

    ScoreSet flipped = s;
    for (auto& v : flipped.scores) v = -v;
    for (auto& l : flipped.labels) l = 1 - l;
    CHECK(std::fabs(metrics::auroc(flipped) - base) < 1e-12);

    ScoreSet mono = s;
    for (auto& v : mono.scores) v = std::exp(3.0 * v) + 0.5 * v;
    CHECK(std::fabs(metrics::auroc(mono) - base) < 1e-12);
  }
}

TEST_CASE("threshold_low_fpr") {
  // Perfect separation: the smallest positive-class score wins.
  ScoreSet sep{{0.9, 0.8, 0.2, 0.1}, {1, 1, 0, 0}, {}};
  CHECK(metrics::threshold_low_fpr(sep) == 0.8);

  // Worked micro-example: two negatives force FPR = 0.
  CHECK(metrics::threshold_low_fpr(worked_example()) == 0.8);

  // 100 negatives: one stray negative at 0.9 keeps FPR = 1% admissible, but
  // the FPR tie-break prefers the cleaner threshold at the positive block.
  ScoreSet big;
  for (int i = 0; i < 99; ++i) {
    big.scores.push_back(0.5 * (i + 1) / 99.0);
    big.labels.push_back(0);
  }
  big.scores.push_back(0.9);
  big.labels.push_back(0);
  for (int i = 0; i < 20; ++i) {
    big.scores.push_back(0.95 + 0.002 * i);
    big.labels.push_back(1);
  }
  CHECK(metrics::threshold_low_fpr(big, 0.01) == 0.95);
  CHECK(metrics::threshold_low_fpr(big, 0.01) == oracles::sweep_low_fpr(big, 0.01));
}

TEST_CASE("threshold_youden") {
  ScoreSet sep{{0.9, 0.8, 0.2, 0.1}, {1, 1, 0, 0}, {}};
  CHECK(metrics::threshold_youden(sep) == 0.8);

  // J ties at 0.8 and 0.35; higher TPR wins.
  CHECK(metrics::threshold_youden(worked_example()) == 0.35);

  // All ties: J = 0 everywhere; the higher-TPR rule settles on the single
  // distinct score (predict everything positive).
  ScoreSet ties{{0.5, 0.5, 0.5, 0.5}, {1, 0, 1, 0}, {}};
  CHECK(metrics::threshold_youden(ties) == 0.5);
  CHECK(metrics::threshold_youden(ties) == oracles::sweep_youden(ties));
}

TEST_CASE("threshold_best_f1") {
  ScoreSet sep{{0.9, 0.8, 0.2, 0.1}, {1, 1, 0, 0}, {}};
  CHECK(metrics::threshold_best_f1(sep) == 0.8);

  const auto s = worked_example();
  const double tau = metrics::threshold_best_f1(s);
  CHECK(tau == 0.35);
  CHECK(metrics::metric_bundle(metrics::confusion_at(s, tau)).f1 ==
        doctest::Approx(0.8));

  // All-positive labels: predict-all-positive gives F1 = 1.
  ScoreSet allpos{{0.3, 0.6, 0.9}, {1, 1, 1}, {}};
  CHECK(metrics::threshold_best_f1(allpos) == 0.3);
}

TEST_CASE("selectors attain the exhaustive-sweep optimum") {
  oracles::MiniRng rng(99);
  for (int trial = 0; trial < 200; ++trial) {
    const auto s = oracles::random_scoreset(rng, 80);
    CHECK(metrics::threshold_low_fpr(s, 0.01) == oracles::sweep_low_fpr(s, 0.01));
    CHECK(metrics::threshold_low_fpr(s, 0.1) == oracles::sweep_low_fpr(s, 0.1));
    CHECK(metrics::threshold_youden(s) == oracles::sweep_youden(s));
    CHECK(metrics::threshold_best_f1(s) == oracles::sweep_best_f1(s));
    CHECK(metrics::best_accuracy(s) ==
          doctest::Approx(oracles::sweep_best_accuracy_value(s)));
  }
}

TEST_CASE("accuracy at any threshold never beats the sweep maximum") {
  oracles::MiniRng rng(123);
  for (int trial = 0; trial < 100; ++trial) {
    const auto s = oracles::random_scoreset(rng, 60);
    const double best = metrics::best_accuracy(s);
    for (int k = 0; k < 20; ++k) {
      const double tau = rng.uniform() * 1.2 - 0.1;
      const double acc =
          metrics::metric_bundle(metrics::confusion_at(s, tau)).accuracy;
      CHECK(acc <= best + 1e-15);
    }
  }
}

TEST_CASE("score set validation") {
  ScoreSet bad{{0.5, std::nan("")}, {1, 0}, {}};
  CHECK_THROWS_AS(metrics::confusion_at(bad, 0.5), Error);
  ScoreSet bad_label{{0.5, 0.6}, {1, 2}, {}};
  CHECK_THROWS_AS(metrics::confusion_at(bad_label, 0.5), Error);
  ScoreSet mismatch{{0.5}, {1, 0}, {}};
  CHECK_THROWS_AS(metrics::auroc(mismatch), Error);
}
