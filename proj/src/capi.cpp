#include "fixthresh/fixthresh.h"

#include <cstring>
#include <memory>
#include <string>
#include <vector>

#include "fixthresh/error.hpp"
#include "fixthresh/metrics.hpp"
#include "fixthresh/pipeline.hpp"
#include "fixthresh/protocol.hpp"
#include "fixthresh/stats.hpp"

namespace {

thread_local std::string g_last_error;

ft_status status_from(fixthresh::ErrorCode code) {
  return static_cast<ft_status>(static_cast<int>(code));
}

template <typename Fn>
ft_status guarded(Fn&& fn) {
  try {
    fn();
    g_last_error.clear();
    return FT_OK;
  } catch (const fixthresh::Error& e) {
    g_last_error = e.what();
    return status_from(e.code());
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return FT_ERR_INTERNAL;
  } catch (...) {
    g_last_error = "unknown error";
    return FT_ERR_INTERNAL;
  }
}

std::string opt(const char* s) { return s ? std::string(s) : std::string(); }

std::vector<std::string> split_grid(const char* grid) {
  std::vector<std::string> names;
  if (!grid || !*grid) return names;
  const std::string s(grid);
  std::size_t start = 0;
  while (start <= s.size()) {
    const std::size_t pos = s.find(',', start);
    if (pos == std::string::npos) {
      if (start < s.size()) names.push_back(s.substr(start));
      break;
    }
    if (pos > start) names.push_back(s.substr(start, pos - start));
    start = pos + 1;
  }
  return names;
}

}  // namespace

struct ft_scoreset {
  fixthresh::metrics::ScoreSet set;
};

extern "C" {

const char* ft_version(void) { return fixthresh::pipeline::kToolVersion; }

const char* ft_last_error(void) { return g_last_error.c_str(); }

ft_status ft_scoreset_create(const double* scores, const int* labels, size_t n,
                             ft_scoreset** out) {
  return guarded([&] {
    fixthresh::require(scores && labels && out && n > 0,
                       fixthresh::ErrorCode::invalid_argument,
                       "ft_scoreset_create: null argument or empty input");
    auto s = std::make_unique<ft_scoreset>();
    s->set.scores.assign(scores, scores + n);
    s->set.labels.assign(labels, labels + n);
    s->set.validate();
    *out = s.release();
  });
}

void ft_scoreset_free(ft_scoreset* s) { delete s; }

ft_status ft_confusion_at(const ft_scoreset* s, double tau, ft_confusion* out) {
  return guarded([&] {
    fixthresh::require(s && out, fixthresh::ErrorCode::invalid_argument,
                       "ft_confusion_at: null argument");
    const auto c = fixthresh::metrics::confusion_at(s->set, tau);
    *out = {c.tp, c.fp, c.tn, c.fn};
  });
}

ft_status ft_metrics_at(const ft_scoreset* s, double tau, ft_metric_bundle* out) {
  return guarded([&] {
    fixthresh::require(s && out, fixthresh::ErrorCode::invalid_argument,
                       "ft_metrics_at: null argument");
    const auto m = fixthresh::metrics::metric_bundle(
        fixthresh::metrics::confusion_at(s->set, tau));
    *out = {m.accuracy, m.precision, m.recall, m.f1, m.tnr};
  });
}

ft_status ft_auroc(const ft_scoreset* s, double* out) {
  return guarded([&] {
    fixthresh::require(s && out, fixthresh::ErrorCode::invalid_argument,
                       "ft_auroc: null argument");
    *out = fixthresh::metrics::auroc(s->set);
  });
}

ft_status ft_threshold_low_fpr(const ft_scoreset* s, double target_fpr,
                               double* out) {
  return guarded([&] {
    fixthresh::require(s && out, fixthresh::ErrorCode::invalid_argument,
                       "ft_threshold_low_fpr: null argument");
    *out = fixthresh::metrics::threshold_low_fpr(s->set, target_fpr);
  });
}

ft_status ft_threshold_youden(const ft_scoreset* s, double* out) {
  return guarded([&] {
    fixthresh::require(s && out, fixthresh::ErrorCode::invalid_argument,
                       "ft_threshold_youden: null argument");
    *out = fixthresh::metrics::threshold_youden(s->set);
  });
}

ft_status ft_threshold_best_f1(const ft_scoreset* s, double* out) {
  return guarded([&] {
    fixthresh::require(s && out, fixthresh::ErrorCode::invalid_argument,
                       "ft_threshold_best_f1: null argument");
    *out = fixthresh::metrics::threshold_best_f1(s->set);
  });
}

ft_status ft_t_quantile(double p, int df, double* out) {
  return guarded([&] {
    fixthresh::require(out != nullptr, fixthresh::ErrorCode::invalid_argument,
                       "ft_t_quantile: null output");
    *out = fixthresh::stats::t_quantile(p, df);
  });
}

ft_status ft_summarize(const double* values, size_t n, ft_summary* out) {
  return guarded([&] {
    fixthresh::require(values && out, fixthresh::ErrorCode::invalid_argument,
                       "ft_summarize: null argument");
    const auto row = fixthresh::stats::summarize(std::vector<double>(values, values + n));
    *out = {row.mean, row.stddev, row.ci_lo, row.ci_hi, row.n};
  });
}

ft_status ft_spectrum_gap(double auroc_photo, double auroc_art, double* out) {
  return guarded([&] {
    fixthresh::require(out != nullptr, fixthresh::ErrorCode::invalid_argument,
                       "ft_spectrum_gap: null output");
    *out = fixthresh::protocol::spectrum_gap(auroc_photo, auroc_art);
  });
}

ft_status ft_run_gen(const char* spec_json, const char* out_dir) {
  return guarded([&] {
    fixthresh::require(out_dir && *out_dir, fixthresh::ErrorCode::invalid_argument,
                       "ft_run_gen: out_dir required");
    fixthresh::pipeline::cmd_gen(opt(spec_json), out_dir);
  });
}

ft_status ft_run_degrade(const char* in_dir, const char* out_dir,
                         const char* grid) {
  return guarded([&] {
    fixthresh::require(in_dir && out_dir, fixthresh::ErrorCode::invalid_argument,
                       "ft_run_degrade: in_dir and out_dir required");
    fixthresh::pipeline::cmd_degrade(in_dir, out_dir, split_grid(grid));
  });
}

ft_status ft_run_train(const char* config_json, const char* data_dir,
                       const char* out_ckpt) {
  return guarded([&] {
    fixthresh::require(data_dir && out_ckpt, fixthresh::ErrorCode::invalid_argument,
                       "ft_run_train: data_dir and out_ckpt required");
    fixthresh::pipeline::cmd_train(opt(config_json), data_dir, out_ckpt);
  });
}

ft_status ft_run_score(const char* ckpt, const char* data_dir, const char* grid,
                       const char* out_csv) {
  return guarded([&] {
    fixthresh::require(ckpt && data_dir && out_csv,
                       fixthresh::ErrorCode::invalid_argument,
                       "ft_run_score: ckpt, data_dir and out_csv required");
    fixthresh::pipeline::cmd_score(ckpt, data_dir, split_grid(grid), out_csv);
  });
}

ft_status ft_run_eval(const char* scores_csv, const char* mode,
                      const char* out_dir, const char* val_scores_csv) {
  return guarded([&] {
    fixthresh::require(scores_csv && mode && out_dir,
                       fixthresh::ErrorCode::invalid_argument,
                       "ft_run_eval: scores_csv, mode and out_dir required");
    fixthresh::pipeline::cmd_eval(scores_csv, mode, out_dir, opt(val_scores_csv));
  });
}

ft_status ft_run_aggregate(const char* const* run_csvs, size_t n_runs,
                           const char* out_csv) {
  return guarded([&] {
    fixthresh::require(run_csvs && out_csv, fixthresh::ErrorCode::invalid_argument,
                       "ft_run_aggregate: run_csvs and out_csv required");
    std::vector<std::string> files;
    for (size_t i = 0; i < n_runs; ++i) {
      fixthresh::require(run_csvs[i] != nullptr,
                         fixthresh::ErrorCode::invalid_argument,
                         "ft_run_aggregate: null run path");
      files.emplace_back(run_csvs[i]);
    }
    fixthresh::pipeline::cmd_aggregate(files, out_csv);
  });
}

ft_status ft_run_plot(const char* report_dir) {
  return guarded([&] {
    fixthresh::require(report_dir != nullptr,
                       fixthresh::ErrorCode::invalid_argument,
                       "ft_run_plot: report_dir required");
    fixthresh::pipeline::cmd_plot(report_dir);
  });
}

ft_status ft_run_reproduce_spectrum(const char* config_json, const char* out_dir,
                                    const int* seeds, size_t n_seeds) {
  return guarded([&] {
    fixthresh::require(out_dir != nullptr, fixthresh::ErrorCode::invalid_argument,
                       "ft_run_reproduce_spectrum: out_dir required");
    std::vector<int> seed_list;
    if (seeds) seed_list.assign(seeds, seeds + n_seeds);
    fixthresh::pipeline::cmd_reproduce_spectrum(opt(config_json), out_dir, seed_list);
  });
}

}  // extern "C"
