#ifndef FIXTHRESH_PROTOCOL_HPP
#define FIXTHRESH_PROTOCOL_HPP

#include <array>
#include <string>
#include <vector>

#include "fixthresh/metrics.hpp"

namespace fixthresh::protocol {

enum class OpName : int { low_fpr = 0, roc_optimal = 1, best_f1 = 2 };
constexpr std::array<OpName, 3> kAllOps = {OpName::low_fpr, OpName::roc_optimal,
                                           OpName::best_f1};
const char* op_name_str(OpName op);
OpName op_name_from_str(const std::string& s);

// A named fixed decision threshold, selected on clean validation data.
struct OperatingPoint {
  OpName name = OpName::roc_optimal;
  double threshold = 0.0;
  std::string source;  // clean-validation run id
};

struct OperatingPoints {
  OperatingPoint low_fpr;
  OperatingPoint roc_optimal;
  OperatingPoint best_f1;
  const OperatingPoint& at(OpName op) const;
};

// Scores for one degradation condition; conditions keep grid order.
struct ConditionScores {
  std::string condition;
  metrics::ScoreSet scores;
};
using ConditionScoreMap = std::vector<ConditionScores>;

enum class EvalMode { fixed, retuned };

struct TableCell {
  double threshold = 0.0;
  metrics::ConfusionCounts counts;
  metrics::MetricBundle bundle;
};

struct ConditionRow {
  std::string condition;
  double auroc = 0.0;
  double best_accuracy = 0.0;  // sweep-max accuracy on this condition's scores
  std::array<TableCell, 3> cells;  // indexed by OpName
};

// Metrics per (condition, operating point) for one model.
struct RobustnessTable {
  std::string model_id;
  EvalMode mode = EvalMode::fixed;
  std::vector<ConditionRow> rows;

  const ConditionRow& row(const std::string& condition) const;
};

struct InflationRow {
  std::string condition;
  double fixed_accuracy = 0.0;    // at the fixed roc_optimal threshold
  double retuned_best_accuracy = 0.0;
  double delta = 0.0;             // retuned - fixed, >= 0 on identical scores
};

struct InflationReport {
  std::string model_id;
  std::vector<InflationRow> rows;
};

// Thresholds from clean validation only: low_fpr(0.01), Youden, best-F1.
OperatingPoints select_operating_points(const metrics::ScoreSet& clean_val,
                                        const std::string& source = "clean_val",
                                        double target_fpr = 0.01);

// Metrics per condition at the unchanged clean-validation thresholds.
// Requires a `clean` condition and consistent item ids across conditions.
RobustnessTable evaluate_fixed(const ConditionScoreMap& scores_by_condition,
                               const OperatingPoints& ops,
                               const std::string& model_id = "model");

// The criticized baseline: operating points re-selected per condition.
RobustnessTable evaluate_retuned(const ConditionScoreMap& scores_by_condition,
                                 const std::string& model_id = "model");

InflationReport inflation_report(const RobustnessTable& fixed,
                                 const RobustnessTable& retuned);

// (auroc_art - auroc_photo) * 100, in percentage points.
double spectrum_gap(double auroc_photo, double auroc_art);

}  // namespace fixthresh::protocol

#endif
