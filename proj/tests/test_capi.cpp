#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <string>

#include "fixthresh/fixthresh.h"

extern "C" int capi_header_smoke(void);

TEST_CASE("C translation unit links and runs") {
  CHECK(capi_header_smoke() == 0);
}

TEST_CASE("version string") {
  CHECK(std::string(ft_version()) == "0.1.0");
}

TEST_CASE("scoreset lifecycle and metrics through the C surface") {
  const double scores[] = {0.1, 0.4, 0.35, 0.8};
  const int labels[] = {0, 0, 1, 1};
  ft_scoreset* ss = nullptr;
  REQUIRE(ft_scoreset_create(scores, labels, 4, &ss) == FT_OK);

  double auroc = 0.0;
  CHECK(ft_auroc(ss, &auroc) == FT_OK);
  CHECK(auroc == doctest::Approx(0.75));

  double tau = 0.0;
  CHECK(ft_threshold_low_fpr(ss, 0.01, &tau) == FT_OK);
  CHECK(tau == 0.8);
  CHECK(ft_threshold_youden(ss, &tau) == FT_OK);
  CHECK(tau == 0.35);
  CHECK(ft_threshold_best_f1(ss, &tau) == FT_OK);
  CHECK(tau == 0.35);

  ft_confusion c;
  CHECK(ft_confusion_at(ss, 0.4, &c) == FT_OK);
  CHECK(c.tp == 1);
  CHECK(c.fp == 1);
  CHECK(c.tn == 1);
  CHECK(c.fn == 1);

  ft_metric_bundle m;
  CHECK(ft_metrics_at(ss, 0.35, &m) == FT_OK);
  CHECK(m.f1 == doctest::Approx(0.8));

  ft_scoreset_free(ss);
}

TEST_CASE("error codes and thread-local messages") {
  ft_scoreset* ss = nullptr;
  const double scores[] = {0.5, 0.6};
  const int bad_labels[] = {0, 7};
  CHECK(ft_scoreset_create(scores, bad_labels, 2, &ss) == FT_ERR_INVALID_ARGUMENT);
  CHECK(std::string(ft_last_error()).find("label") != std::string::npos);

  const int single[] = {1, 1};
  REQUIRE(ft_scoreset_create(scores, single, 2, &ss) == FT_OK);
  double auroc = 0.0;
  CHECK(ft_auroc(ss, &auroc) == FT_ERR_METRIC_DOMAIN);
  CHECK(std::string(ft_last_error()).find("both classes") != std::string::npos);
  ft_scoreset_free(ss);

  CHECK(ft_scoreset_create(nullptr, nullptr, 0, nullptr) == FT_ERR_INVALID_ARGUMENT);

  double q = 0.0;
  CHECK(ft_t_quantile(1.5, 2, &q) == FT_ERR_INVALID_ARGUMENT);
  CHECK(ft_run_eval("no_such_file.csv", "fixed", "out_dir_unused", nullptr) ==
        FT_ERR_IO);
}

TEST_CASE("stats through the C surface") {
  double q = 0.0;
  REQUIRE(ft_t_quantile(0.975, 2, &q) == FT_OK);
  CHECK(q == doctest::Approx(4.302653).epsilon(1e-6));

  const double vals[] = {1.0, 2.0, 3.0};
  ft_summary s;
  REQUIRE(ft_summarize(vals, 3, &s) == FT_OK);
  CHECK(s.mean == doctest::Approx(2.0));
  CHECK(s.stddev == doctest::Approx(1.0));
  CHECK(s.n == 3);

  double gap = 0.0;
  REQUIRE(ft_spectrum_gap(0.759, 0.907, &gap) == FT_OK);
  CHECK(gap == doctest::Approx(14.8));
}
