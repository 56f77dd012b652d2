#include <doctest.h>

#include <random>

#include "debias/metrics.hpp"
#include "debias/rng.hpp"
#include "oracles.hpp"

using namespace debias;

namespace {

EvalPoint point(double f1, double avg, double max = 0.0, int iterate = -1) {
  EvalPoint p;
  p.f1 = f1;
  p.avg_violation = avg;
  p.max_violation = max;
  p.provenance.iterate = iterate;
  return p;
}

Dataset random_group_dataset(Index n, int k, std::uint64_t seed) {
  SyntheticSpec spec;
  spec.n = n;
  spec.d = 2;
  for (int i = 0; i < k; ++i) spec.schema.attributes.push_back({"a" + std::to_string(i), 2});
  spec.seed = seed;
  spec.label_bias.assign(k, 0.0);
  spec.label_bias[0] = 0.3;
  return generate_synthetic(spec);
}

std::vector<int> random_preds(Index n, std::uint64_t seed) {
  auto rng = make_rng(seed);
  std::vector<int> preds(n);
  for (auto& p : preds) p = static_cast<int>(rng() % 2);
  return preds;
}

}  // namespace

TEST_CASE("f1_score: perfect, degenerate, and arithmetic cases") {
  CHECK(f1_score({1, 0, 1}, {1, 0, 1}) == doctest::Approx(1.0));
  CHECK(f1_score({0, 0, 0}, {1, 0, 1}) == doctest::Approx(0.0));
  CHECK(f1_score({1, 1, 0, 0}, {1, 0, 1, 0}) == doctest::Approx(0.5));
  CHECK(f1_score({0, 0}, {0, 0}) == doctest::Approx(0.0));  // precision+recall = 0
}

TEST_CASE("tpr_violations: perfect predictions have zero violations") {
  const Dataset ds = random_group_dataset(400, 2, 5);
  const GroupSet gerry = build_group_set(ds.schema, GroupKind::Gerry, ds);
  const ViolationReport r = tpr_violations(ds.labels, ds.labels, gerry, 1);
  CHECK(r.avg == doctest::Approx(0.0));
  CHECK(r.max == doctest::Approx(0.0));
  CHECK(r.overall_tpr == doctest::Approx(1.0));
}

TEST_CASE("tpr_violations: two groups at 0.8 and 0.6 with overall 0.7") {
  // one binary attribute; 10 positives per side; group TPRs 0.8 / 0.6
  Dataset ds;
  ds.schema = AttributeSchema{{{"g", 2}}};
  const Index n = 20;
  ds.features = Matrix::Zero(n, 1);
  ds.labels.assign(n, 1);
  ds.protected_values.resize(n, 1);
  std::vector<int> preds(n);
  for (Index i = 0; i < n; ++i) {
    const int g = i < 10 ? 0 : 1;
    ds.protected_values(i, 0) = g;
    const Index rank_in_group = i % 10;
    preds[i] = g == 0 ? (rank_in_group < 8 ? 1 : 0) : (rank_in_group < 6 ? 1 : 0);
  }
  const GroupSet groups = build_group_set(ds.schema, GroupKind::Indep, ds);
  const ViolationReport r = tpr_violations(preds, ds.labels, groups, 1);
  CHECK(r.overall_tpr == doctest::Approx(0.7));
  CHECK(r.avg == doctest::Approx(0.1));
  CHECK(r.max == doctest::Approx(0.1));
}

TEST_CASE("tpr_violations: groups under the positives bar are skipped") {
  const Dataset ds = random_group_dataset(60, 2, 7);
  const GroupSet gerry = build_group_set(ds.schema, GroupKind::Gerry, ds);
  const std::vector<int> preds = random_preds(ds.size(), 8);
  const ViolationReport strict = tpr_violations(preds, ds.labels, gerry, 10);
  int skipped = 0;
  for (const GroupViolation& g : strict.per_group) {
    if (!g.included) {
      ++skipped;
      CHECK(!g.violation.has_value());
      CHECK(g.positives < 10);
    }
  }
  CHECK(strict.included_count + skipped == static_cast<int>(gerry.size()));
  // every group passes a min_positives of 1 only if it has a positive at all
  const ViolationReport loose = tpr_violations(preds, ds.labels, gerry, 1);
  CHECK(loose.included_count >= strict.included_count);
}

TEST_CASE("tpr_violations: matches the per-group confusion oracle on 80 GERRY groups") {
  const Dataset ds = random_group_dataset(900, 4, 9);
  const GroupSet gerry = build_group_set(ds.schema, GroupKind::Gerry, ds);
  REQUIRE(gerry.size() == 80);
  const std::vector<int> preds = random_preds(ds.size(), 10);
  const ViolationReport r = tpr_violations(preds, ds.labels, gerry, 5);

  Index overall_pos = 0, overall_tp = 0;
  for (Index i = 0; i < ds.size(); ++i) {
    if (ds.labels[i] == 1) {
      ++overall_pos;
      if (preds[i] == 1) ++overall_tp;
    }
  }
  const double tpr = static_cast<double>(overall_tp) / overall_pos;

  double sum = 0.0, max = 0.0;
  int included = 0;
  for (std::size_t g = 0; g < gerry.size(); ++g) {
    const auto oracle_tpr = oracle::group_tpr(gerry.defs[g], ds.protected_values, preds, ds.labels);
    CHECK(r.per_group[g].positives == oracle_tpr.positives);
    if (oracle_tpr.positives >= 5) {
      const double v = std::abs(oracle_tpr.tpr - tpr);
      CHECK(r.per_group[g].included);
      CHECK(*r.per_group[g].violation == doctest::Approx(v).epsilon(1e-12));
      sum += v;
      max = std::max(max, v);
      ++included;
    } else {
      CHECK(!r.per_group[g].included);
    }
  }
  CHECK(r.included_count == included);
  CHECK(r.avg == doctest::Approx(sum / included).epsilon(1e-12));
  CHECK(r.max == doctest::Approx(max).epsilon(1e-12));
  CHECK(r.avg <= r.max);
}

TEST_CASE("tpr_violations: erroring out when nothing clears the bar") {
  const Dataset ds = random_group_dataset(30, 1, 11);
  const GroupSet groups = build_group_set(ds.schema, GroupKind::Indep, ds);
  const std::vector<int> preds = random_preds(ds.size(), 12);
  CHECK_THROWS_AS(tpr_violations(preds, ds.labels, groups, 1000), Error);
}

TEST_CASE("pareto_frontier: dominance example from the selection rule") {
  const std::vector<EvalPoint> pts = {point(0.8, 0.10), point(0.7, 0.05), point(0.75, 0.15)};
  const std::vector<EvalPoint> frontier = pareto_frontier(pts);
  REQUIRE(frontier.size() == 2);
  CHECK(frontier[0].f1 == doctest::Approx(0.8));
  CHECK(frontier[0].avg_violation == doctest::Approx(0.10));
  CHECK(frontier[1].f1 == doctest::Approx(0.7));
  CHECK(frontier[1].avg_violation == doctest::Approx(0.05));
}

TEST_CASE("pareto_frontier: single point is its own frontier") {
  const std::vector<EvalPoint> frontier = pareto_frontier({point(0.5, 0.2)});
  REQUIRE(frontier.size() == 1);
  CHECK(frontier[0].f1 == doctest::Approx(0.5));
}

TEST_CASE("pareto_frontier: matches the brute-force filter on random instances") {
  auto rng = make_rng(13);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int trial = 0; trial < 5; ++trial) {
    std::vector<EvalPoint> pts;
    for (int i = 0; i < 200; ++i) {
      // quantize to force ties and duplicates
      const double f1 = std::round(unit(rng) * 20.0) / 20.0;
      const double v = std::round(unit(rng) * 20.0) / 20.0;
      pts.push_back(point(f1, v, v, i));
    }
    const auto got = pareto_frontier(pts);
    const auto expected = oracle::brute_force_pareto(pts);
    REQUIRE(got.size() == expected.size());
    for (std::size_t i = 0; i < got.size(); ++i) {
      CHECK(got[i].f1 == expected[i].f1);
      CHECK(got[i].avg_violation == expected[i].avg_violation);
    }
    // soundness + completeness
    for (const EvalPoint& p : got)
      for (const EvalPoint& q : pts)
        CHECK(!(q.f1 >= p.f1 && q.avg_violation <= p.avg_violation &&
                (q.f1 > p.f1 || q.avg_violation < p.avg_violation)));
    for (const EvalPoint& q : pts) {
      bool on_frontier = false, dominated = false;
      for (const EvalPoint& p : got) {
        if (p.f1 == q.f1 && p.avg_violation == q.avg_violation) on_frontier = true;
        if (p.f1 >= q.f1 && p.avg_violation <= q.avg_violation &&
            (p.f1 > q.f1 || p.avg_violation < q.avg_violation))
          dominated = true;
      }
      CHECK((on_frontier || dominated));
    }
  }
}

TEST_CASE("select_under_tradeoff: worked example at 5% and 10%") {
  const std::vector<EvalPoint> dev = {point(0.80, 0.10, 0.3, 1), point(0.77, 0.04, 0.2, 2),
                                      point(0.74, 0.02, 0.1, 3)};
  auto identity = [](const EvalPoint& p) { return p; };
  const EvalPoint at5 = select_under_tradeoff(dev, identity, 0.05);
  CHECK(at5.f1 == doctest::Approx(0.77));
  CHECK(at5.avg_violation == doctest::Approx(0.04));
  const EvalPoint at10 = select_under_tradeoff(dev, identity, 0.10);
  CHECK(at10.f1 == doctest::Approx(0.74));
  CHECK(at10.avg_violation == doctest::Approx(0.02));
}

TEST_CASE("select_under_tradeoff: matches exhaustive search and is monotone") {
  auto rng = make_rng(15);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto identity = [](const EvalPoint& p) { return p; };
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<EvalPoint> dev;
    const int n = 2 + static_cast<int>(rng() % 40);
    for (int i = 0; i < n; ++i)
      dev.push_back(point(std::round(unit(rng) * 50.0) / 50.0, std::round(unit(rng) * 50.0) / 50.0,
                          unit(rng), i));
    double prev_violation = std::numeric_limits<double>::infinity();
    for (double tr : {0.02, 0.05, 0.10, 0.20, 0.40}) {
      const EvalPoint got = select_under_tradeoff(dev, identity, tr);
      const EvalPoint& expected = oracle::brute_force_select(dev, tr);
      CHECK(got.f1 == expected.f1);
      CHECK(got.avg_violation == expected.avg_violation);
      CHECK(got.provenance.iterate == expected.provenance.iterate);
      CHECK(got.avg_violation <= prev_violation);  // loosening never hurts fairness
      prev_violation = got.avg_violation;
    }
  }
}

TEST_CASE("select_under_tradeoff: the tie chain prefers f1, then max violation, then iterate") {
  const std::vector<EvalPoint> dev = {point(0.80, 0.05, 0.30, 4), point(0.82, 0.05, 0.30, 3),
                                      point(0.82, 0.05, 0.20, 2), point(0.82, 0.05, 0.20, 1)};
  auto identity = [](const EvalPoint& p) { return p; };
  const EvalPoint got = select_under_tradeoff(dev, identity, 0.10);
  CHECK(got.f1 == doctest::Approx(0.82));
  CHECK(got.max_violation == doctest::Approx(0.20));
  CHECK(got.provenance.iterate == 1);
}

TEST_CASE("select_under_tradeoff: rejects empty input and bad fractions") {
  auto identity = [](const EvalPoint& p) { return p; };
  CHECK_THROWS_AS(select_under_tradeoff({}, identity, 0.05), Error);
  CHECK_THROWS_AS(select_under_tradeoff({point(0.5, 0.1)}, identity, 0.0), Error);
  CHECK_THROWS_AS(select_under_tradeoff({point(0.5, 0.1)}, identity, 1.0), Error);
}
