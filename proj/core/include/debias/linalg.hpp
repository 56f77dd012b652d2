#pragma once

#include <Eigen/Dense>

#include "debias/error.hpp"

namespace debias {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

// Singular values below kRankRelTol * sigma_max do not count toward rank.
inline constexpr double kRankRelTol = 1e-10;

// Orthogonal projector onto a subspace of R^d. Always symmetric and
// idempotent to ~1e-8; rank is the number of retained singular values.
struct Projector {
  Matrix matrix;  // d x d
  Index rank = 0;

  Index dim() const { return matrix.rows(); }
};

struct SvdResult {
  Matrix u;                // m x r, orthonormal columns
  Vector singular_values;  // length r, non-increasing, non-negative
  Matrix v;                // d x r, orthonormal columns
};

// Thin SVD with a deterministic sign convention: each right-singular
// vector has its largest-magnitude entry positive.
SvdResult svd(const Matrix& m);

Index matrix_rank(const Matrix& m);

// Rank of an orthogonal projector: its spectrum is {0, 1}, so count the
// singular values above 1/2. A relative cutoff would misread the zero
// projector (all-noise spectrum) as full rank.
Index projector_rank(const Matrix& p);

// Projector onto N(w), the intersection of the nullspaces of the rows of w.
// Stacking several classifiers' weight rows into w before calling gives the
// joint nullspace of all of them.
Projector nullspace_projector(const Matrix& w);

// Top right-singular vector of w (unit norm, sign-fixed).
Vector principal_direction(const Matrix& w);

// v * v^T for a unit vector v.
Projector rank_one_projector(const Vector& v);

// Projector onto the nullspace of a symmetric PSD sum of projectors,
// I - U U^T with U spanning the range of the sum above tolerance.
Projector nullspace_of_sum(const Matrix& projector_sum);

// Identity projector of dimension d (rank d).
Projector identity_projector(Index d);

}  // namespace debias
