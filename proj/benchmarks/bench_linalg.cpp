#include <benchmark/benchmark.h>

#include <random>

#include "debias/linalg.hpp"
#include "debias/rng.hpp"

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

}  // namespace

static void BM_NullspaceProjector(benchmark::State& state) {
  const Index m = state.range(0);
  const Index d = state.range(1);
  const Matrix w = random_matrix(m, d, 1);
  for (auto _ : state) {
    benchmark::DoNotOptimize(nullspace_projector(w));
  }
}
BENCHMARK(BM_NullspaceProjector)->Args({8, 64})->Args({20, 128})->Args({80, 256});

static void BM_PrincipalDirection(benchmark::State& state) {
  const Matrix w = random_matrix(state.range(0), state.range(1), 2);
  for (auto _ : state) {
    benchmark::DoNotOptimize(principal_direction(w));
  }
}
BENCHMARK(BM_PrincipalDirection)->Args({8, 64})->Args({80, 256});

static void BM_NullspaceOfSum(benchmark::State& state) {
  const Index d = state.range(0);
  Matrix sum = Matrix::Zero(d, d);
  for (int i = 0; i < 10; ++i) {
    Vector v = random_matrix(d, 1, 10 + i).col(0);
    v /= v.norm();
    sum += v * v.transpose();
  }
  for (auto _ : state) {
    benchmark::DoNotOptimize(nullspace_of_sum(sum));
  }
}
BENCHMARK(BM_NullspaceOfSum)->Arg(64)->Arg(256);

static void BM_ApplyProjection(benchmark::State& state) {
  const Index n = 5000, d = state.range(0);
  const Matrix features = random_matrix(n, d, 3);
  Matrix w = random_matrix(4, d, 4);
  const Projector p = nullspace_projector(w);
  for (auto _ : state) {
    Matrix projected = features * p.matrix;
    benchmark::DoNotOptimize(projected);
  }
}
BENCHMARK(BM_ApplyProjection)->Arg(64)->Arg(256);

BENCHMARK_MAIN();
