#include "debias/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace debias {

double f1_score(const std::vector<int>& preds, const std::vector<int>& labels) {
  if (preds.size() != labels.size()) fail(ErrorCode::InvalidInput, "f1_score: length mismatch");
  Index tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (preds[i] != 0 && preds[i] != 1) fail(ErrorCode::InvalidInput, "f1_score: non-binary prediction");
    if (labels[i] != 0 && labels[i] != 1) fail(ErrorCode::InvalidInput, "f1_score: non-binary label");
    if (preds[i] == 1 && labels[i] == 1) ++tp;
    if (preds[i] == 1 && labels[i] == 0) ++fp;
    if (preds[i] == 0 && labels[i] == 1) ++fn;
  }
  const double denom = 2.0 * tp + fp + fn;
  if (denom == 0.0) return 0.0;  // no positives anywhere
  if (tp == 0) return 0.0;
  return 2.0 * tp / denom;
}

double accuracy(const std::vector<int>& preds, const std::vector<int>& labels) {
  if (preds.size() != labels.size()) fail(ErrorCode::InvalidInput, "accuracy: length mismatch");
  if (preds.empty()) return 0.0;
  Index correct = 0;
  for (std::size_t i = 0; i < preds.size(); ++i)
    if (preds[i] == labels[i]) ++correct;
  return static_cast<double>(correct) / preds.size();
}

ViolationReport tpr_violations(const std::vector<int>& preds, const std::vector<int>& labels,
                               const GroupSet& groups, int min_positives) {
  const std::size_t n = labels.size();
  if (preds.size() != n) fail(ErrorCode::InvalidInput, "tpr_violations: length mismatch");

  Index overall_pos = 0, overall_tp = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (labels[i] == 1) {
      ++overall_pos;
      if (preds[i] == 1) ++overall_tp;
    }
  }
  if (overall_pos == 0) fail(ErrorCode::InvalidInput, "tpr_violations: no positive labels");
  const double tpr = static_cast<double>(overall_tp) / overall_pos;

  ViolationReport report;
  report.overall_tpr = tpr;
  double sum = 0.0;
  for (std::size_t g = 0; g < groups.size(); ++g) {
    if (groups.masks[g].size() != n) fail(ErrorCode::InvalidInput, "tpr_violations: mask length mismatch");
    Index pos = 0, tp = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (groups.masks[g][i] && labels[i] == 1) {
        ++pos;
        if (preds[i] == 1) ++tp;
      }
    }
    GroupViolation gv;
    gv.label = groups.defs[g].label;
    gv.positives = pos;
    if (pos >= min_positives && pos > 0) {
      gv.included = true;
      gv.tpr = static_cast<double>(tp) / pos;
      gv.violation = std::abs(*gv.tpr - tpr);
      sum += *gv.violation;
      report.max = std::max(report.max, *gv.violation);
      ++report.included_count;
    }
    report.per_group.push_back(std::move(gv));
  }
  if (report.included_count == 0)
    fail(ErrorCode::InvalidInput, "tpr_violations: no group meets the min_positives bar");
  report.avg = sum / report.included_count;
  return report;
}

std::vector<EvalPoint> pareto_frontier(const std::vector<EvalPoint>& points) {
  if (points.empty()) fail(ErrorCode::InvalidInput, "pareto_frontier: no points");
  std::vector<EvalPoint> sorted = points;
  std::stable_sort(sorted.begin(), sorted.end(), [](const EvalPoint& a, const EvalPoint& b) {
    if (a.f1 != b.f1) return a.f1 > b.f1;
    return a.avg_violation < b.avg_violation;
  });
  std::vector<EvalPoint> frontier;
  double best_violation = std::numeric_limits<double>::infinity();
  double last_f1 = std::numeric_limits<double>::quiet_NaN();
  for (const EvalPoint& p : sorted) {
    if (p.avg_violation < best_violation) {
      frontier.push_back(p);
      best_violation = p.avg_violation;
      last_f1 = p.f1;
    } else if (p.avg_violation == best_violation && p.f1 == last_f1) {
      // exact duplicate of the last kept point: collapse
      continue;
    }
  }
  return frontier;
}

const EvalPoint& pick_under_tradeoff(const std::vector<EvalPoint>& dev_points,
                                     double tradeoff_fraction) {
  if (dev_points.empty()) fail(ErrorCode::InvalidInput, "select_under_tradeoff: no dev points");
  if (tradeoff_fraction <= 0.0 || tradeoff_fraction >= 1.0)
    fail(ErrorCode::InvalidInput, "select_under_tradeoff: tradeoff_fraction must be in (0,1)");
  double best_f1 = -1.0;
  for (const EvalPoint& p : dev_points) best_f1 = std::max(best_f1, p.f1);
  const double threshold = (1.0 - tradeoff_fraction) * best_f1;

  const EvalPoint* chosen = nullptr;
  for (const EvalPoint& p : dev_points) {
    if (p.f1 < threshold) continue;
    if (chosen == nullptr) {
      chosen = &p;
      continue;
    }
    if (p.avg_violation != chosen->avg_violation) {
      if (p.avg_violation < chosen->avg_violation) chosen = &p;
    } else if (p.f1 != chosen->f1) {
      if (p.f1 > chosen->f1) chosen = &p;
    } else if (p.max_violation != chosen->max_violation) {
      if (p.max_violation < chosen->max_violation) chosen = &p;
    } else if (p.provenance.iterate < chosen->provenance.iterate) {
      chosen = &p;
    }
  }
  if (chosen == nullptr)
    fail(ErrorCode::InvalidInput, "select_under_tradeoff: no point meets the threshold");
  return *chosen;
}

EvalPoint select_under_tradeoff(const std::vector<EvalPoint>& dev_points,
                                const std::function<EvalPoint(const EvalPoint&)>& test_evaluator,
                                double tradeoff_fraction) {
  const EvalPoint& chosen = pick_under_tradeoff(dev_points, tradeoff_fraction);
  return test_evaluator(chosen);
}

}  // namespace debias
