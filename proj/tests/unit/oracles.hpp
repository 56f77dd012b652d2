#pragma once

// Independent brute-force oracles used to cross-check the library. These
// deliberately avoid the implementation paths they verify: eigensolves are
// hand-rolled Jacobi sweeps, ranks come from Gram-matrix eigenvalues, and
// metric/selection oracles are plain double loops.

#include <utility>
#include <vector>

#include "debias/groups.hpp"
#include "debias/linalg.hpp"
#include "debias/metrics.hpp"

namespace oracle {

// Cyclic Jacobi eigendecomposition of a symmetric matrix.
// Returns eigenvalues (descending) and matching eigenvector columns.
std::pair<debias::Vector, debias::Matrix> jacobi_eigh(debias::Matrix a);

// Power iteration for the top eigenvector of a symmetric PSD matrix.
debias::Vector power_iteration(const debias::Matrix& s, int iters = 20000);

// Rank of w from the Jacobi eigenvalues of w^T w (relative eigenvalue cutoff).
Eigen::Index rank_via_gram(const debias::Matrix& w, double rel_tol = 1e-12);

// O(n^2) dominance filter in the (max f1, min avg_violation) order.
std::vector<debias::EvalPoint> brute_force_pareto(const std::vector<debias::EvalPoint>& points);

// Exhaustive search mirror of the tradeoff selection rule.
const debias::EvalPoint& brute_force_select(const std::vector<debias::EvalPoint>& points,
                                            double tradeoff);

// Per-group TPR from scratch (no GroupSet masks): recomputes membership from
// the def's assignment against the protected table.
struct GroupTprOracle {
  Eigen::Index positives = 0;
  double tpr = 0.0;
};
GroupTprOracle group_tpr(const debias::GroupDef& def, const Eigen::MatrixXi& protected_values,
                         const std::vector<int>& preds, const std::vector<int>& labels);

}  // namespace oracle
