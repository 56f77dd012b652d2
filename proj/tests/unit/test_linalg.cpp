#include <doctest.h>

#include <random>

#include "debias/linalg.hpp"
#include "debias/rng.hpp"
#include "oracles.hpp"

using namespace debias;

namespace {

Matrix random_matrix(Index rows, Index cols, std::uint64_t seed) {
  auto rng = make_rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Matrix m(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) m(i, j) = gauss(rng);
  return m;
}

Vector random_unit(Index d, std::uint64_t seed) {
  Vector v = random_matrix(d, 1, seed).col(0);
  return v / v.norm();
}

void check_projector(const Projector& p) {
  CHECK((p.matrix * p.matrix - p.matrix).cwiseAbs().maxCoeff() <= 1e-8);
  CHECK((p.matrix - p.matrix.transpose()).cwiseAbs().maxCoeff() <= 1e-8);
}

}  // namespace

TEST_CASE("svd: identity matrix") {
  const SvdResult r = svd(Matrix::Identity(3, 3));
  REQUIRE(r.singular_values.size() == 3);
  for (int i = 0; i < 3; ++i) CHECK(r.singular_values(i) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("svd: diagonal matrix") {
  Matrix m = Matrix::Zero(2, 2);
  m(0, 0) = 2.0;
  m(1, 1) = 1.0;
  const SvdResult r = svd(m);
  CHECK(r.singular_values(0) == doctest::Approx(2.0));
  CHECK(r.singular_values(1) == doctest::Approx(1.0));
  // sign convention picks +e1
  CHECK(r.v(0, 0) == doctest::Approx(1.0));
  CHECK(std::abs(r.v(1, 0)) < 1e-12);
}

TEST_CASE("svd: random 5x8 reconstruction and Gram-eigensolve oracle") {
  const Matrix m = random_matrix(5, 8, 11);
  const SvdResult r = svd(m);

  const Matrix rec = r.u * r.singular_values.asDiagonal() * r.v.transpose();
  CHECK((rec - m).norm() <= 1e-8 * m.norm());
  CHECK((r.u.transpose() * r.u - Matrix::Identity(r.u.cols(), r.u.cols())).cwiseAbs().maxCoeff() <= 1e-8);
  CHECK((r.v.transpose() * r.v - Matrix::Identity(r.v.cols(), r.v.cols())).cwiseAbs().maxCoeff() <= 1e-8);
  for (Index i = 0; i + 1 < r.singular_values.size(); ++i)
    CHECK(r.singular_values(i) >= r.singular_values(i + 1));
  CHECK(r.singular_values(r.singular_values.size() - 1) >= 0.0);

  // independent oracle: eigenvalues of m^T m from hand-rolled Jacobi sweeps
  auto [eig, vecs] = oracle::jacobi_eigh(m.transpose() * m);
  for (Index i = 0; i < r.singular_values.size(); ++i) {
    const double expected = std::sqrt(std::max(0.0, eig(i)));
    CHECK(r.singular_values(i) == doctest::Approx(expected).epsilon(1e-9));
  }
}

TEST_CASE("svd: non-finite input raises invalid-input") {
  Matrix m = Matrix::Zero(2, 2);
  m(0, 1) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_WITH_AS(svd(m), doctest::Contains("non-finite"), Error);
}

TEST_CASE("nullspace_projector: full-rank square weights give the zero projector") {
  const Projector p = nullspace_projector(Matrix::Identity(2, 2));
  CHECK(p.rank == 0);
  CHECK(p.matrix.cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("nullspace_projector: single row") {
  Matrix w(1, 2);
  w << 1.0, 0.0;
  const Projector p = nullspace_projector(w);
  CHECK(p.rank == 1);
  CHECK(p.matrix(0, 0) == doctest::Approx(0.0));
  CHECK(p.matrix(1, 1) == doctest::Approx(1.0));
  CHECK(p.matrix(0, 1) == doctest::Approx(0.0));
}

TEST_CASE("nullspace_projector: random stack, rank accounting via Gram oracle") {
  const Matrix w = random_matrix(3, 8, 17);
  const Projector p = nullspace_projector(w);
  CHECK(oracle::rank_via_gram(w) == 3);
  CHECK(p.rank == 5);
  CHECK((w * p.matrix).cwiseAbs().maxCoeff() <= 1e-8);
  check_projector(p);
}

TEST_CASE("nullspace_projector: rank(P) + rank(w) = d on random stacks") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto rng = make_rng(seed, 5);
    const Index m = 1 + static_cast<Index>(rng() % 12);
    const Index d = 4 + static_cast<Index>(rng() % 28);
    Matrix w = random_matrix(m, d, seed + 100);
    if (seed % 3 == 0 && m >= 2) w.row(m - 1) = 3.0 * w.row(0);  // force a rank deficiency sometimes
    const Projector p = nullspace_projector(w);
    CHECK(p.rank + oracle::rank_via_gram(w) == d);
    CHECK((w * p.matrix).cwiseAbs().maxCoeff() <= 1e-8);
    check_projector(p);
  }
}

TEST_CASE("principal_direction: single row normalizes") {
  Matrix w(1, 2);
  w << 3.0, 4.0;
  const Vector v = principal_direction(w);
  CHECK(v(0) == doctest::Approx(0.6));
  CHECK(v(1) == doctest::Approx(0.8));
}

TEST_CASE("principal_direction: dominant direction of a diagonal stack") {
  Matrix w(2, 2);
  w << 2.0, 0.0, 0.0, 1.0;
  const Vector v = principal_direction(w);
  CHECK(v(0) == doctest::Approx(1.0));
  CHECK(std::abs(v(1)) < 1e-12);
}

TEST_CASE("principal_direction: matches power iteration on w^T w") {
  const Matrix w = random_matrix(10, 16, 23);
  const Vector v = principal_direction(w);
  const Vector ref = oracle::power_iteration(w.transpose() * w);
  const double cosine = std::abs(v.dot(ref));
  CHECK(std::acos(std::min(1.0, cosine)) <= 1e-6);
}

TEST_CASE("principal_direction: zero matrix raises degenerate-bias") {
  CHECK_THROWS_AS(principal_direction(Matrix::Zero(3, 4)), Error);
  try {
    principal_direction(Matrix::Zero(3, 4));
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::DegenerateBias);
  }
}

TEST_CASE("rank_one_projector: basis vector") {
  Vector v = Vector::Zero(2);
  v(0) = 1.0;
  const Projector p = rank_one_projector(v);
  CHECK(p.rank == 1);
  CHECK(p.matrix(0, 0) == doctest::Approx(1.0));
  CHECK(p.matrix(1, 1) == doctest::Approx(0.0));
}

TEST_CASE("rank_one_projector: diagonal direction gives the half matrix") {
  Vector v(2);
  v << 1.0, 1.0;
  v /= std::sqrt(2.0);
  const Projector p = rank_one_projector(v);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) CHECK(p.matrix(i, j) == doctest::Approx(0.5));
}

TEST_CASE("rank_one_projector: unit trace at d=32, rejects non-unit input") {
  const Vector v = random_unit(32, 3);
  const Projector p = rank_one_projector(v);
  CHECK(p.matrix.trace() == doctest::Approx(1.0).epsilon(1e-10));
  check_projector(p);
  CHECK_THROWS_AS(rank_one_projector(2.0 * v), Error);
}

TEST_CASE("nullspace_of_sum: zero matrix gives the identity") {
  const Projector p = nullspace_of_sum(Matrix::Zero(5, 5));
  CHECK(p.rank == 5);
  CHECK((p.matrix - Matrix::Identity(5, 5)).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("nullspace_of_sum: orthogonal rank-one directions") {
  const Index d = 6;
  Matrix sum = Matrix::Zero(d, d);
  // three orthonormal directions via Gram-Schmidt
  std::vector<Vector> basis;
  for (int i = 0; i < 3; ++i) {
    Vector v = random_unit(d, 40 + i);
    for (const Vector& b : basis) v -= b.dot(v) * b;
    v /= v.norm();
    basis.push_back(v);
    sum += v * v.transpose();
  }
  const Projector p = nullspace_of_sum(sum);
  CHECK(p.rank == d - 3);
  check_projector(p);
  for (const Vector& b : basis) CHECK((p.matrix * b).cwiseAbs().maxCoeff() <= 1e-8);
}

TEST_CASE("nullspace_of_sum: non-orthogonal directions still span rank 2") {
  const Index d = 4;
  const Vector a = random_unit(d, 50);
  Vector b = random_unit(d, 51);
  b = (0.7 * a + 0.3 * b).normalized();  // deliberately oblique
  const Matrix sum = a * a.transpose() + b * b.transpose();
  const Projector p = nullspace_of_sum(sum);
  CHECK(p.rank == 2);
  Matrix stacked(2, d);
  stacked.row(0) = a;
  stacked.row(1) = b;
  const Projector ref = nullspace_projector(stacked);
  CHECK((p.matrix - ref.matrix).cwiseAbs().maxCoeff() <= 1e-8);
}

TEST_CASE("nullspace_of_sum: asymmetry beyond tolerance is rejected") {
  Matrix m = Matrix::Zero(3, 3);
  m(0, 1) = 1e-3;
  CHECK_THROWS_AS(nullspace_of_sum(m), Error);
}

TEST_CASE("intersection property: stacked nullspace annihilates every classifier") {
  // Eq. 1 semantics: stacking classifiers and projecting kills each of them
  std::vector<Matrix> classifiers;
  Index rows = 0;
  const Index d = 12;
  for (int i = 0; i < 3; ++i) {
    classifiers.push_back(random_matrix(2, d, 60 + i));
    rows += 2;
  }
  Matrix stacked(rows, d);
  Index at = 0;
  for (const Matrix& w : classifiers) {
    stacked.middleRows(at, w.rows()) = w;
    at += w.rows();
  }
  const Projector p = nullspace_projector(stacked);
  auto rng = make_rng(99);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (int trial = 0; trial < 10; ++trial) {
    Vector x(d);
    for (Index j = 0; j < d; ++j) x(j) = gauss(rng);
    const Vector px = p.matrix * x;
    CHECK((stacked * px).cwiseAbs().maxCoeff() <= 1e-8);
    for (const Matrix& w : classifiers) CHECK((w * px).cwiseAbs().maxCoeff() <= 1e-8);
  }
}

TEST_CASE("nullspace_of_sum agrees with nullspace_projector on independent directions") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Index d = 8 + static_cast<Index>(seed % 5);
    const int m = 1 + static_cast<int>(seed % 4);
    Matrix stacked(m, d);
    Matrix sum = Matrix::Zero(d, d);
    std::vector<Vector> dirs;
    for (int i = 0; i < m; ++i) {
      Vector v = random_unit(d, 70 + 10 * seed + i);
      // orthonormalize so the rank-one sum matches the stacked rowspace cleanly
      for (const Vector& b : dirs) v -= b.dot(v) * b;
      v /= v.norm();
      dirs.push_back(v);
      stacked.row(i) = v;
      sum += v * v.transpose();
    }
    const Projector via_sum = nullspace_of_sum(sum);
    const Projector via_stack = nullspace_projector(stacked);
    CHECK(via_sum.rank == via_stack.rank);
    CHECK((via_sum.matrix - via_stack.matrix).cwiseAbs().maxCoeff() <= 1e-8);
  }
}
