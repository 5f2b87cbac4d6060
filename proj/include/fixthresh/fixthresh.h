/*
 * fixthresh C API.
 *
 * A stable C surface over the fixed-threshold robustness evaluation library.
 * Handles are opaque; every function returns an ft_status, with FT_OK on
 * success. On failure, ft_last_error() returns a thread-local message
 * describing what went wrong.
 */

#ifndef FIXTHRESH_H
#define FIXTHRESH_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define FT_API __declspec(dllexport)
#else
#define FT_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum ft_status {
  FT_OK = 0,
  FT_ERR_INVALID_ARGUMENT = 1,
  FT_ERR_IO = 2,
  FT_ERR_FORMAT = 3,
  FT_ERR_METRIC_DOMAIN = 4,
  FT_ERR_PROTOCOL = 5,
  FT_ERR_STATS = 6,
  FT_ERR_MODEL = 7,
  FT_ERR_TRANSFORM = 8,
  FT_ERR_GENERATION = 9,
  FT_ERR_PIPELINE = 10,
  FT_ERR_INTERNAL = 11
} ft_status;

FT_API const char* ft_version(void);

/* Thread-local message for the most recent failure on this thread. */
FT_API const char* ft_last_error(void);

/* ---- score sets and metrics ---------------------------------------------- */

typedef struct ft_scoreset ft_scoreset;

/* labels hold 0 (real) or 1 (AI); higher scores mean more likely AI. */
FT_API ft_status ft_scoreset_create(const double* scores, const int* labels,
                                    size_t n, ft_scoreset** out);
FT_API void ft_scoreset_free(ft_scoreset* s);

typedef struct ft_confusion {
  int64_t tp, fp, tn, fn;
} ft_confusion;

typedef struct ft_metric_bundle {
  double accuracy, precision, recall, f1, tnr;
} ft_metric_bundle;

/* Decision rule: predict AI iff score >= tau. */
FT_API ft_status ft_confusion_at(const ft_scoreset* s, double tau,
                                 ft_confusion* out);
FT_API ft_status ft_metrics_at(const ft_scoreset* s, double tau,
                               ft_metric_bundle* out);
FT_API ft_status ft_auroc(const ft_scoreset* s, double* out);

/* Operating-point selectors (thresholds chosen on the given scores). */
FT_API ft_status ft_threshold_low_fpr(const ft_scoreset* s, double target_fpr,
                                      double* out);
FT_API ft_status ft_threshold_youden(const ft_scoreset* s, double* out);
FT_API ft_status ft_threshold_best_f1(const ft_scoreset* s, double* out);

/* ---- multi-seed statistics ------------------------------------------------ */

typedef struct ft_summary {
  double mean, stddev, ci_lo, ci_hi;
  int n;
} ft_summary;

/* Inverse Student-t CDF. */
FT_API ft_status ft_t_quantile(double p, int df, double* out);

/* Sample mean/std and 95% t-distribution CI over n >= 2 values. */
FT_API ft_status ft_summarize(const double* values, size_t n, ft_summary* out);

/* (auroc_art - auroc_photo) * 100 percentage points. */
FT_API ft_status ft_spectrum_gap(double auroc_photo, double auroc_art,
                                 double* out);

/* ---- pipeline commands ----------------------------------------------------
 * File-level entry points backing the CLI. String arguments are paths unless
 * noted; pass NULL (or an empty string) where a default is documented.
 */

/* Synthetic dataset: spec_json may be NULL for defaults. */
FT_API ft_status ft_run_gen(const char* spec_json, const char* out_dir);

/* grid is NULL for the default degradation grid, else a comma-separated
 * condition list like "clean,jpeg_q60,blur_s3". */
FT_API ft_status ft_run_degrade(const char* in_dir, const char* out_dir,
                                const char* grid);

/* config_json may be NULL for defaults. */
FT_API ft_status ft_run_train(const char* config_json, const char* data_dir,
                              const char* out_ckpt);

FT_API ft_status ft_run_score(const char* ckpt, const char* data_dir,
                              const char* grid, const char* out_csv);

/* mode: "fixed", "retuned", or "both". val_scores_csv may be NULL, in which
 * case thresholds come from the clean condition of scores_csv. */
FT_API ft_status ft_run_eval(const char* scores_csv, const char* mode,
                             const char* out_dir, const char* val_scores_csv);

FT_API ft_status ft_run_aggregate(const char* const* run_csvs, size_t n_runs,
                                  const char* out_csv);

FT_API ft_status ft_run_plot(const char* report_dir);

/* config_json may be NULL for the default desk-scale configuration; seeds may
 * be NULL to use the configured seed list. */
FT_API ft_status ft_run_reproduce_spectrum(const char* config_json,
                                           const char* out_dir,
                                           const int* seeds, size_t n_seeds);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* FIXTHRESH_H */
