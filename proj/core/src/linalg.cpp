#include "debias/linalg.hpp"

#include <Eigen/SVD>

namespace debias {

namespace {

void check_finite(const Matrix& m, const char* what) {
  if (m.rows() < 1 || m.cols() < 1) fail(ErrorCode::InvalidInput, std::string(what) + ": empty matrix");
  if (!m.allFinite()) fail(ErrorCode::InvalidInput, std::string(what) + ": non-finite entries");
}

// Flip column pairs (u_i, v_i) so the largest-magnitude entry of v_i is
// positive; keeps U diag(S) V^T unchanged and makes runs reproducible.
void fix_signs(Matrix& u, Matrix& v) {
  for (Index j = 0; j < v.cols(); ++j) {
    Index imax = 0;
    v.col(j).cwiseAbs().maxCoeff(&imax);
    if (v(imax, j) < 0.0) {
      v.col(j) *= -1.0;
      if (j < u.cols()) u.col(j) *= -1.0;
    }
  }
}

Index rank_from_singular_values(const Vector& s) {
  if (s.size() == 0) return 0;
  const double cutoff = kRankRelTol * s(0);
  Index r = 0;
  while (r < s.size() && s(r) > cutoff && s(r) > 0.0) ++r;
  return r;
}

}  // namespace

SvdResult svd(const Matrix& m) {
  check_finite(m, "svd");
  Eigen::JacobiSVD<Matrix> dec(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  SvdResult out{dec.matrixU(), dec.singularValues(), dec.matrixV()};
  fix_signs(out.u, out.v);
  return out;
}

Index matrix_rank(const Matrix& m) {
  Eigen::JacobiSVD<Matrix> dec(m);
  return rank_from_singular_values(dec.singularValues());
}

Index projector_rank(const Matrix& p) {
  Eigen::JacobiSVD<Matrix> dec(p);
  const Vector& s = dec.singularValues();
  Index r = 0;
  while (r < s.size() && s(r) > 0.5) ++r;
  return r;
}

Projector nullspace_projector(const Matrix& w) {
  check_finite(w, "nullspace_projector");
  const Index d = w.cols();
  SvdResult dec = svd(w);
  const Index r = rank_from_singular_values(dec.singular_values);
  // P = I - V_r V_r^T erases the rowspace of w.
  Matrix p = Matrix::Identity(d, d);
  if (r > 0) {
    const Matrix vr = dec.v.leftCols(r);
    p.noalias() -= vr * vr.transpose();
  }
  return Projector{std::move(p), d - r};
}

Vector principal_direction(const Matrix& w) {
  check_finite(w, "principal_direction");
  if (w.norm() == 0.0) fail(ErrorCode::DegenerateBias, "principal_direction: zero matrix has no bias direction");
  SvdResult dec = svd(w);
  return dec.v.col(0);
}

Projector rank_one_projector(const Vector& v) {
  if (v.size() < 1 || !v.allFinite()) fail(ErrorCode::InvalidInput, "rank_one_projector: invalid vector");
  if (std::abs(v.norm() - 1.0) > 1e-8) fail(ErrorCode::InvalidInput, "rank_one_projector: vector is not unit norm");
  return Projector{v * v.transpose(), 1};
}

Projector nullspace_of_sum(const Matrix& projector_sum) {
  check_finite(projector_sum, "nullspace_of_sum");
  if (projector_sum.rows() != projector_sum.cols())
    fail(ErrorCode::InvalidInput, "nullspace_of_sum: matrix is not square");
  const double asym = (projector_sum - projector_sum.transpose()).cwiseAbs().maxCoeff();
  if (asym > 1e-6) fail(ErrorCode::InvalidInput, "nullspace_of_sum: matrix is not symmetric");

  const Index d = projector_sum.rows();
  // Symmetrize before decomposing so ~1e-6 asymmetry cannot leak into U.
  const Matrix sym = 0.5 * (projector_sum + projector_sum.transpose());
  SvdResult dec = svd(sym);
  const Index r = rank_from_singular_values(dec.singular_values);
  Matrix p = Matrix::Identity(d, d);
  if (r > 0) {
    const Matrix ur = dec.u.leftCols(r);
    p.noalias() -= ur * ur.transpose();
  }
  return Projector{std::move(p), d - r};
}

Projector identity_projector(Index d) { return Projector{Matrix::Identity(d, d), d}; }

}  // namespace debias
