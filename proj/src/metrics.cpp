#include "fixthresh/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "fixthresh/error.hpp"

namespace fixthresh::metrics {

namespace {

// Cumulative counts at threshold tau (score >= tau), swept from high to low.
struct SweepPoint {
  double tau;
  std::int64_t tp;
  std::int64_t fp;
};

// Sentinel first, then one point per distinct score in decreasing order.
std::vector<SweepPoint> threshold_sweep(const ScoreSet& s) {
  std::vector<std::pair<double, int>> items(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) items[i] = {s.scores[i], s.labels[i]};
  std::sort(items.begin(), items.end(),
            [](const auto& a, const auto& b) { return a.first > b.first; });

  std::vector<SweepPoint> sweep;
  sweep.reserve(s.size() + 1);
  sweep.push_back({sentinel_threshold(s), 0, 0});
  std::int64_t tp = 0, fp = 0;
  std::size_t i = 0;
  while (i < items.size()) {
    const double v = items[i].first;
    while (i < items.size() && items[i].first == v) {
      if (items[i].second == 1) ++tp; else ++fp;
      ++i;
    }
    sweep.push_back({v, tp, fp});
  }
  return sweep;
}

void require_both_classes(const ScoreSet& s, const char* op) {
  s.validate();
  require(s.both_classes_present(), ErrorCode::metric_domain,
          std::string(op) + ": both classes must be present");
}

}  // namespace

std::int64_t ScoreSet::num_positive() const {
  std::int64_t n = 0;
  for (int l : labels) n += (l == 1);
  return n;
}

std::int64_t ScoreSet::num_negative() const {
  return static_cast<std::int64_t>(labels.size()) - num_positive();
}

bool ScoreSet::both_classes_present() const {
  const std::int64_t p = num_positive();
  return p > 0 && p < static_cast<std::int64_t>(labels.size());
}

void ScoreSet::validate() const {
  require(scores.size() == labels.size(), ErrorCode::invalid_argument,
          "ScoreSet: scores and labels differ in length");
  require(!scores.empty(), ErrorCode::invalid_argument, "ScoreSet: empty");
  require(ids.empty() || ids.size() == scores.size(), ErrorCode::invalid_argument,
          "ScoreSet: ids length mismatch");
  for (double v : scores)
    require(std::isfinite(v), ErrorCode::invalid_argument,
            "ScoreSet: non-finite score");
  for (int l : labels)
    require(l == 0 || l == 1, ErrorCode::invalid_argument,
            "ScoreSet: label outside {0,1}");
}

ConfusionCounts confusion_at(const ScoreSet& s, double tau) {
  s.validate();
  ConfusionCounts c;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const bool pred_ai = s.scores[i] >= tau;
    if (s.labels[i] == 1) {
      pred_ai ? ++c.tp : ++c.fn;
    } else {
      pred_ai ? ++c.fp : ++c.tn;
    }
  }
  return c;
}

MetricBundle metric_bundle(const ConfusionCounts& c) {
  const std::int64_t n = c.total();
  require(n >= 1, ErrorCode::invalid_argument, "metric_bundle: empty counts");
  MetricBundle m;
  m.accuracy = static_cast<double>(c.tp + c.tn) / static_cast<double>(n);
  if (c.tp + c.fp == 0) {
    m.precision = (c.fn == 0) ? 1.0 : 0.0;
  } else {
    m.precision = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp);
  }
  m.recall = (c.tp + c.fn == 0)
                 ? 1.0
                 : static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
  m.f1 = (m.precision + m.recall == 0.0)
             ? 0.0
             : 2.0 * m.precision * m.recall / (m.precision + m.recall);
  m.tnr = (c.tn + c.fp == 0)
              ? 1.0
              : static_cast<double>(c.tn) / static_cast<double>(c.tn + c.fp);
  return m;
}

RocCurve roc_curve(const ScoreSet& s) {
  require_both_classes(s, "roc_curve");
  const auto sweep = threshold_sweep(s);
  RocCurve curve;
  curve.n_pos = s.num_positive();
  curve.n_neg = s.num_negative();
  curve.points.reserve(sweep.size());
  for (std::size_t i = 0; i < sweep.size(); ++i) {
    RocPoint p;
    p.threshold = (i == 0) ? std::numeric_limits<double>::infinity() : sweep[i].tau;
    p.tp = sweep[i].tp;
    p.fp = sweep[i].fp;
    p.tpr = static_cast<double>(p.tp) / static_cast<double>(curve.n_pos);
    p.fpr = static_cast<double>(p.fp) / static_cast<double>(curve.n_neg);
    curve.points.push_back(p);
  }
  return curve;
}

double auroc(const ScoreSet& s) {
  const RocCurve curve = roc_curve(s);
  // Integer trapezoid: sum (dfp) * (tp_i + tp_{i+1}) over segments equals
  // 2 * (#correctly ordered pairs + 0.5 * #ties), so one division at the end
  // keeps the result exact up to a single rounding.
  std::int64_t twice_area = 0;
  for (std::size_t i = 0; i + 1 < curve.points.size(); ++i) {
    const auto& a = curve.points[i];
    const auto& b = curve.points[i + 1];
    twice_area += (b.fp - a.fp) * (a.tp + b.tp);
  }
  return static_cast<double>(twice_area) /
         (2.0 * static_cast<double>(curve.n_pos) * static_cast<double>(curve.n_neg));
}

double sentinel_threshold(const ScoreSet& s) {
  s.validate();
  return *std::max_element(s.scores.begin(), s.scores.end()) + 1.0;
}

double threshold_low_fpr(const ScoreSet& s, double target_fpr) {
  require_both_classes(s, "threshold_low_fpr");
  require(target_fpr >= 0.0 && target_fpr < 1.0, ErrorCode::invalid_argument,
          "threshold_low_fpr: target_fpr outside [0,1)");
  const auto sweep = threshold_sweep(s);
  const double n_pos = static_cast<double>(s.num_positive());
  const double n_neg = static_cast<double>(s.num_negative());
  double best_tau = sweep.front().tau;
  double best_tpr = -1.0, best_fpr = 2.0;
  for (const auto& p : sweep) {
    const double tpr = p.tp / n_pos;
    const double fpr = p.fp / n_neg;
    if (fpr > target_fpr) continue;
    if (tpr > best_tpr || (tpr == best_tpr && fpr < best_fpr)) {
      best_tpr = tpr;
      best_fpr = fpr;
      best_tau = p.tau;
    }
  }
  return best_tau;
}

double threshold_youden(const ScoreSet& s) {
  require_both_classes(s, "threshold_youden");
  const auto sweep = threshold_sweep(s);
  const double n_pos = static_cast<double>(s.num_positive());
  const double n_neg = static_cast<double>(s.num_negative());
  double best_tau = sweep.front().tau;
  double best_j = -2.0, best_tpr = -1.0;
  for (const auto& p : sweep) {
    const double tpr = p.tp / n_pos;
    const double j = tpr - p.fp / n_neg;
    if (j > best_j || (j == best_j && tpr > best_tpr) ||
        (j == best_j && tpr == best_tpr && p.tau < best_tau)) {
      best_j = j;
      best_tpr = tpr;
      best_tau = p.tau;
    }
  }
  return best_tau;
}

namespace {

// Shared sweep maximizer for F1 / accuracy; ties prefer higher recall, then
// smaller threshold.
template <typename Objective>
double sweep_maximize(const ScoreSet& s, Objective obj) {
  s.validate();
  const auto sweep = threshold_sweep(s);
  const std::int64_t n_pos = s.num_positive();
  const std::int64_t n_neg = s.num_negative();
  double best_tau = sweep.front().tau;
  double best_val = -1.0, best_recall = -1.0;
  for (const auto& p : sweep) {
    ConfusionCounts c{p.tp, p.fp, n_neg - p.fp, n_pos - p.tp};
    const MetricBundle m = metric_bundle(c);
    const double v = obj(m);
    if (v > best_val || (v == best_val && m.recall > best_recall) ||
        (v == best_val && m.recall == best_recall && p.tau < best_tau)) {
      best_val = v;
      best_recall = m.recall;
      best_tau = p.tau;
    }
  }
  return best_tau;
}

}  // namespace

double threshold_best_f1(const ScoreSet& s) {
  return sweep_maximize(s, [](const MetricBundle& m) { return m.f1; });
}

double threshold_best_accuracy(const ScoreSet& s) {
  return sweep_maximize(s, [](const MetricBundle& m) { return m.accuracy; });
}

double best_accuracy(const ScoreSet& s) {
  return metric_bundle(confusion_at(s, threshold_best_accuracy(s))).accuracy;
}

}  // namespace fixthresh::metrics
