#include <benchmark/benchmark.h>

#include "debias/constrained.hpp"
#include "debias/inlp.hpp"

using namespace debias;

namespace {

Dataset biased_dataset(Index n, Index d, std::uint64_t seed) {
  SyntheticSpec spec;
  spec.n = n;
  spec.d = d;
  spec.schema.attributes = {{"z0", 2}, {"z1", 2}};
  spec.label_signal = 1.5;
  spec.attribute_signal = {1.5, 1.5};
  spec.label_bias = {0.4, 0.0};
  spec.seed = seed;
  return generate_synthetic(spec);
}

}  // namespace

static void BM_TrainProbe(benchmark::State& state) {
  const Dataset ds = biased_dataset(state.range(0), 64, 1);
  ProbeConfig cfg;
  cfg.epochs = 25;
  for (auto _ : state) {
    benchmark::DoNotOptimize(train_probe(ds.features, ds.labels, cfg, "bench"));
  }
}
BENCHMARK(BM_TrainProbe)->Arg(1000)->Arg(5000)->Unit(benchmark::kMillisecond);

static void BM_InlpIteration(benchmark::State& state) {
  const Dataset full = biased_dataset(3000, 64, 2);
  const auto parts = split(full, {0.7, 0.2, 0.1}, 2);
  const GroupSet groups = build_group_set(parts[0].schema, GroupKind::Gerry, parts[0]);
  InlpConfig cfg;
  cfg.group_kind = GroupKind::Gerry;
  cfg.variant = InlpVariant::Principal;
  cfg.max_iterations = 1;
  cfg.probe_config.epochs = 25;
  cfg.audit_every = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(inlp_run(parts[0], parts[1], groups, cfg));
  }
}
BENCHMARK(BM_InlpIteration)->Unit(benchmark::kMillisecond);

static void BM_ConstrainedIteration(benchmark::State& state) {
  const Dataset full = biased_dataset(3000, 64, 3);
  const auto parts = split(full, {0.7, 0.2, 0.1}, 3);
  const ConstraintSpec spec{build_group_set(parts[0].schema, GroupKind::Gerry, parts[0]), 0.05,
                            GammaMode::Uniform};
  TrainOptions opt;
  opt.iterations = 1;
  for (auto _ : state) {
    benchmark::DoNotOptimize(constrained_train(parts[0], parts[1], spec, opt));
  }
}
BENCHMARK(BM_ConstrainedIteration)->Unit(benchmark::kMillisecond);

static void BM_TprViolations(benchmark::State& state) {
  const Dataset ds = biased_dataset(state.range(0), 8, 4);
  const GroupSet gerry = build_group_set(ds.schema, GroupKind::Gerry, ds);
  std::vector<int> preds(ds.labels);
  for (std::size_t i = 0; i < preds.size(); i += 7) preds[i] ^= 1;
  for (auto _ : state) {
    benchmark::DoNotOptimize(debias::tpr_violations(preds, ds.labels, gerry, 5));
  }
}
BENCHMARK(BM_TprViolations)->Arg(5000)->Arg(20000);

BENCHMARK_MAIN();
