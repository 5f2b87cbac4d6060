#ifndef FIXTHRESH_METRICS_HPP
#define FIXTHRESH_METRICS_HPP

#include <cstdint>
#include <string>
#include <vector>

namespace fixthresh::metrics {

// Paired detector scores and ground-truth labels. Scores are oriented so that
// higher means "more likely AI-generated"; labels are 1 = AI, 0 = real.
struct ScoreSet {
  std::vector<double> scores;
  std::vector<int> labels;
  std::vector<std::string> ids;  // optional; empty or same length as scores

  std::size_t size() const { return scores.size(); }
  std::int64_t num_positive() const;
  std::int64_t num_negative() const;
  bool both_classes_present() const;

  // Throws on length mismatch, non-finite scores, or labels outside {0,1}.
  void validate() const;
};

struct ConfusionCounts {
  std::int64_t tp = 0;
  std::int64_t fp = 0;
  std::int64_t tn = 0;
  std::int64_t fn = 0;
  std::int64_t total() const { return tp + fp + tn + fn; }
};

struct MetricBundle {
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double tnr = 0.0;
};

struct RocPoint {
  double threshold;  // +inf for the all-negative sentinel point
  std::int64_t tp;
  std::int64_t fp;
  double tpr;
  double fpr;
};

struct RocCurve {
  std::vector<RocPoint> points;  // thresholds strictly decreasing
  std::int64_t n_pos = 0;
  std::int64_t n_neg = 0;
};

// Decision rule used project-wide: predict AI iff score >= tau.
ConfusionCounts confusion_at(const ScoreSet& s, double tau);

// Rates from counts. Degenerate denominators resolve as:
//   precision: 1.0 if tp+fp == 0 and fn == 0, else 0.0 if tp+fp == 0
//   recall:    1.0 if tp+fn == 0 (vacuous)
//   tnr:       1.0 if tn+fp == 0 (vacuous)
//   f1:        0.0 if precision+recall == 0
MetricBundle metric_bundle(const ConfusionCounts& c);

// One point per distinct score plus the +inf sentinel; exact integer counts.
// Requires both classes present.
RocCurve roc_curve(const ScoreSet& s);

// Mann-Whitney AUROC: P(score_pos > score_neg) + 0.5 P(score_pos == score_neg).
// Computed as an exact rational trapezoid over the ROC curve.
double auroc(const ScoreSet& s);

// Candidate thresholds are the distinct observed scores plus a finite
// sentinel above the maximum (max score + 1); any real threshold is
// equivalent to one of these under the >= decision rule.
double sentinel_threshold(const ScoreSet& s);

// Among thresholds with FPR <= target_fpr, the one maximizing TPR;
// ties broken by the smaller FPR.
double threshold_low_fpr(const ScoreSet& s, double target_fpr = 0.01);

// Threshold maximizing Youden's J = TPR - FPR; ties broken by higher TPR,
// then smaller threshold.
double threshold_youden(const ScoreSet& s);

// Threshold maximizing F1; ties broken by higher recall, then smaller
// threshold. Tolerates single-class inputs.
double threshold_best_f1(const ScoreSet& s);

// Threshold maximizing accuracy; ties broken by higher recall, then smaller
// threshold. Used by the retuning-inflation report.
double threshold_best_accuracy(const ScoreSet& s);
double best_accuracy(const ScoreSet& s);

}  // namespace fixthresh::metrics

#endif
