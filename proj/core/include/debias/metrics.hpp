#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "debias/groups.hpp"

namespace debias {

// Where an evaluation came from: enough to find the stored model/iterate.
struct Provenance {
  std::string method;       // "biased-baseline" | "inlp" | "constrained"
  std::string grouping;     // training-time grouping
  std::string hparams;      // canonical JSON text of the hyperparameters
  int iterate = -1;         // INLP iteration / constrained t, -1 if n/a
  std::string split;        // "dev" | "test"
};

struct EvalPoint {
  double f1 = 0.0;
  double avg_violation = 0.0;
  double max_violation = 0.0;
  Provenance provenance;
};

// F-score of class 1; 0 when precision + recall is 0.
double f1_score(const std::vector<int>& preds, const std::vector<int>& labels);

double accuracy(const std::vector<int>& preds, const std::vector<int>& labels);

struct GroupViolation {
  std::string label;
  Index positives = 0;
  bool included = false;
  std::optional<double> tpr;
  std::optional<double> violation;  // |tpr_g - tpr|
};

struct ViolationReport {
  double avg = 0.0;  // mean over included groups
  double max = 0.0;
  double overall_tpr = 0.0;
  int included_count = 0;
  std::vector<GroupViolation> per_group;
};

// Equality-of-opportunity gaps |tpr_g - tpr| over the given groups (GERRY is
// the evaluation convention regardless of the training grouping). Groups
// with fewer than min_positives positive-labeled rows are listed as skipped
// and excluded from both the average and the max.
ViolationReport tpr_violations(const std::vector<int>& preds, const std::vector<int>& labels,
                               const GroupSet& groups, int min_positives = 5);

// Points not dominated in the (maximize f1, minimize avg_violation) order,
// duplicates collapsed, sorted by f1 descending.
std::vector<EvalPoint> pareto_frontier(const std::vector<EvalPoint>& points);

// Fairest dev point whose f1 stays within tradeoff_fraction of the best dev
// f1; ties prefer higher f1, then lower max_violation, then lower iterate.
// Returns the test evaluation of the chosen point.
EvalPoint select_under_tradeoff(const std::vector<EvalPoint>& dev_points,
                                const std::function<EvalPoint(const EvalPoint&)>& test_evaluator,
                                double tradeoff_fraction);

// The dev point the tradeoff rule picks (the selection half of
// select_under_tradeoff, reusable for oracle checks).
const EvalPoint& pick_under_tradeoff(const std::vector<EvalPoint>& dev_points,
                                     double tradeoff_fraction);

}  // namespace debias
