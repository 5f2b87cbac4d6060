#include "fixthresh/protocol.hpp"

#include <algorithm>

#include "fixthresh/error.hpp"

namespace fixthresh::protocol {

const char* op_name_str(OpName op) {
  switch (op) {
    case OpName::low_fpr: return "low_fpr";
    case OpName::roc_optimal: return "roc_optimal";
    case OpName::best_f1: return "best_f1";
  }
  return "unknown";
}

OpName op_name_from_str(const std::string& s) {
  if (s == "low_fpr") return OpName::low_fpr;
  if (s == "roc_optimal") return OpName::roc_optimal;
  if (s == "best_f1") return OpName::best_f1;
  raise(ErrorCode::invalid_argument, "unknown operating point name: " + s);
}

const OperatingPoint& OperatingPoints::at(OpName op) const {
  switch (op) {
    case OpName::low_fpr: return low_fpr;
    case OpName::roc_optimal: return roc_optimal;
    case OpName::best_f1: return best_f1;
  }
  raise(ErrorCode::invalid_argument, "unknown operating point");
}

const ConditionRow& RobustnessTable::row(const std::string& condition) const {
  for (const auto& r : rows)
    if (r.condition == condition) return r;
  raise(ErrorCode::protocol, "RobustnessTable: no row for condition " + condition);
}

OperatingPoints select_operating_points(const metrics::ScoreSet& clean_val,
                                        const std::string& source,
                                        double target_fpr) {
  clean_val.validate();
  require(clean_val.both_classes_present(), ErrorCode::protocol,
          "select_operating_points: clean validation must contain both classes");
  OperatingPoints ops;
  ops.low_fpr = {OpName::low_fpr, metrics::threshold_low_fpr(clean_val, target_fpr), source};
  ops.roc_optimal = {OpName::roc_optimal, metrics::threshold_youden(clean_val), source};
  ops.best_f1 = {OpName::best_f1, metrics::threshold_best_f1(clean_val), source};
  return ops;
}

namespace {

void check_conditions(const ConditionScoreMap& by_condition) {
  require(!by_condition.empty(), ErrorCode::protocol, "evaluate: no conditions");
  const ConditionScores* clean = nullptr;
  for (const auto& cs : by_condition) {
    cs.scores.validate();
    if (cs.condition == "clean") {
      require(clean == nullptr, ErrorCode::protocol, "evaluate: duplicate clean condition");
      clean = &cs;
    }
  }
  require(clean != nullptr, ErrorCode::protocol, "evaluate: missing clean condition");

  // Item ids, when present, must align across conditions so drops measure
  // the transformation and not sampling.
  std::vector<std::string> ref = clean->scores.ids;
  std::sort(ref.begin(), ref.end());
  for (const auto& cs : by_condition) {
    require(cs.scores.size() == clean->scores.size(), ErrorCode::protocol,
            "evaluate: condition " + cs.condition + " has mismatched item count");
    if (!cs.scores.ids.empty() || !ref.empty()) {
      std::vector<std::string> got = cs.scores.ids;
      std::sort(got.begin(), got.end());
      require(got == ref, ErrorCode::protocol,
              "evaluate: condition " + cs.condition + " has mismatched item ids");
    }
  }
}

ConditionRow make_row(const ConditionScores& cs, const OperatingPoints& ops) {
  ConditionRow row;
  row.condition = cs.condition;
  row.auroc = metrics::auroc(cs.scores);
  row.best_accuracy = metrics::best_accuracy(cs.scores);
  for (OpName op : kAllOps) {
    TableCell cell;
    cell.threshold = ops.at(op).threshold;
    cell.counts = metrics::confusion_at(cs.scores, cell.threshold);
    cell.bundle = metrics::metric_bundle(cell.counts);
    row.cells[static_cast<int>(op)] = cell;
  }
  return row;
}

}  // namespace

RobustnessTable evaluate_fixed(const ConditionScoreMap& scores_by_condition,
                               const OperatingPoints& ops,
                               const std::string& model_id) {
  check_conditions(scores_by_condition);
  RobustnessTable table;
  table.model_id = model_id;
  table.mode = EvalMode::fixed;
  table.rows.reserve(scores_by_condition.size());
  for (const auto& cs : scores_by_condition) table.rows.push_back(make_row(cs, ops));
  return table;
}

RobustnessTable evaluate_retuned(const ConditionScoreMap& scores_by_condition,
                                 const std::string& model_id) {
  check_conditions(scores_by_condition);
  RobustnessTable table;
  table.model_id = model_id;
  table.mode = EvalMode::retuned;
  table.rows.reserve(scores_by_condition.size());
  for (const auto& cs : scores_by_condition) {
    const OperatingPoints ops =
        select_operating_points(cs.scores, "retuned:" + cs.condition);
    table.rows.push_back(make_row(cs, ops));
  }
  return table;
}

InflationReport inflation_report(const RobustnessTable& fixed,
                                 const RobustnessTable& retuned) {
  require(fixed.mode == EvalMode::fixed && retuned.mode == EvalMode::retuned,
          ErrorCode::protocol, "inflation_report: mode mismatch");
  require(fixed.model_id == retuned.model_id, ErrorCode::protocol,
          "inflation_report: model mismatch");
  require(fixed.rows.size() == retuned.rows.size(), ErrorCode::protocol,
          "inflation_report: condition mismatch");
  InflationReport report;
  report.model_id = fixed.model_id;
  report.rows.reserve(fixed.rows.size());
  for (std::size_t i = 0; i < fixed.rows.size(); ++i) {
    const auto& f = fixed.rows[i];
    const auto& r = retuned.rows[i];
    require(f.condition == r.condition, ErrorCode::protocol,
            "inflation_report: condition order mismatch");
    InflationRow row;
    row.condition = f.condition;
    row.fixed_accuracy =
        f.cells[static_cast<int>(OpName::roc_optimal)].bundle.accuracy;
    row.retuned_best_accuracy = r.best_accuracy;
    row.delta = row.retuned_best_accuracy - row.fixed_accuracy;
    report.rows.push_back(row);
  }
  return report;
}

double spectrum_gap(double auroc_photo, double auroc_art) {
  require(auroc_photo >= 0.0 && auroc_photo <= 1.0 && auroc_art >= 0.0 &&
              auroc_art <= 1.0,
          ErrorCode::invalid_argument, "spectrum_gap: AUROC outside [0,1]");
  return (auroc_art - auroc_photo) * 100.0;
}

}  // namespace fixthresh::protocol
