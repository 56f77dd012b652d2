#include "debias/inlp.hpp"

#include <atomic>
#include <filesystem>
#include <fstream>
#include <future>
#include <optional>

#include <json.hpp>

#include "debias/io.hpp"
#include "debias/metrics.hpp"
#include "debias/rng.hpp"

namespace debias {

using json = nlohmann::json;
namespace fs = std::filesystem;

const char* to_string(InlpVariant v) {
  return v == InlpVariant::Naive ? "naive" : "principal";
}

InlpVariant inlp_variant_from_string(const std::string& s) {
  if (s == "naive") return InlpVariant::Naive;
  if (s == "principal") return InlpVariant::Principal;
  fail(ErrorCode::Config, "unknown INLP variant '" + s + "'");
}

const char* to_string(InlpStopReason r) {
  switch (r) {
    case InlpStopReason::MaxIterations: return "max_iterations";
    case InlpStopReason::EarlyStopLeakage: return "early_stop_leakage";
    case InlpStopReason::BiasSubspaceExhausted: return "bias_subspace_exhausted";
  }
  return "max_iterations";
}

namespace {

// One probe target: what the classifier predicts this iteration.
struct ProbeTarget {
  std::string name;
  std::vector<int> train_targets;
  std::vector<int> dev_targets;
};

std::vector<ProbeTarget> make_probe_targets(const Dataset& train, const Dataset& dev,
                                            const GroupSet& train_groups, GroupKind kind) {
  std::vector<ProbeTarget> targets;
  if (kind == GroupKind::Indep) {
    // one classifier per attribute (one-vs-rest rows for cardinality > 2)
    for (int a = 0; a < train.schema.num_attributes(); ++a) {
      ProbeTarget t;
      t.name = train.schema.attributes[a].name;
      t.train_targets.resize(train.size());
      t.dev_targets.resize(dev.size());
      for (Index i = 0; i < train.size(); ++i) t.train_targets[i] = train.protected_values(i, a);
      for (Index i = 0; i < dev.size(); ++i) t.dev_targets[i] = dev.protected_values(i, a);
      targets.push_back(std::move(t));
    }
  } else {
    // one-vs-rest membership classifier per group
    const GroupSet dev_groups = build_group_set(train_groups.defs, dev);
    for (std::size_t g = 0; g < train_groups.size(); ++g) {
      ProbeTarget t;
      t.name = train_groups.defs[g].label;
      t.train_targets.assign(train_groups.masks[g].begin(), train_groups.masks[g].end());
      t.dev_targets.assign(dev_groups.masks[g].begin(), dev_groups.masks[g].end());
      targets.push_back(std::move(t));
    }
  }
  return targets;
}

struct TrainedProbes {
  std::vector<std::optional<LinearProbe>> probes;  // nullopt = skipped (single-class)
  std::vector<std::string> skipped;
  Matrix stacked;  // all weight rows; 0 x d if nothing trained
};

TrainedProbes train_iteration_probes(const Matrix& features, const std::vector<ProbeTarget>& targets,
                                     const ProbeConfig& base, int iteration, int retry, int jobs) {
  TrainedProbes out;
  out.probes.resize(targets.size());

  auto train_one = [&](std::size_t g) {
    ProbeConfig cfg = base;
    cfg.seed = mix_seed(base.seed, (static_cast<std::uint64_t>(iteration) << 24) ^
                                       (static_cast<std::uint64_t>(g) << 4) ^
                                       static_cast<std::uint64_t>(retry));
    try {
      out.probes[g] = train_probe(features, targets[g].train_targets, cfg, targets[g].name);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::DegenerateTarget) throw;
      out.probes[g] = std::nullopt;
    }
  };

  if (jobs <= 1 || targets.size() <= 1) {
    for (std::size_t g = 0; g < targets.size(); ++g) train_one(g);
  } else {
    std::vector<std::future<void>> futures;
    std::atomic<std::size_t> next{0};
    const int workers = std::min<int>(jobs, static_cast<int>(targets.size()));
    for (int wkr = 0; wkr < workers; ++wkr) {
      futures.push_back(std::async(std::launch::async, [&]() {
        for (std::size_t g = next.fetch_add(1); g < targets.size(); g = next.fetch_add(1)) train_one(g);
      }));
    }
    for (auto& f : futures) f.get();
  }

  Index rows = 0;
  const Index d = features.cols();
  for (const auto& p : out.probes)
    if (p) rows += p->weights.rows();
  out.stacked.resize(rows, d);
  Index at = 0;
  for (std::size_t g = 0; g < targets.size(); ++g) {
    if (!out.probes[g]) {
      out.skipped.push_back(targets[g].name);
      continue;
    }
    out.stacked.middleRows(at, out.probes[g]->weights.rows()) = out.probes[g]->weights;
    at += out.probes[g]->weights.rows();
  }
  return out;
}

// Gram-Schmidt against the accumulated directions (run twice for stability);
// returns nullopt when the residual is below tol.
std::optional<Vector> orthogonalize(Vector v, const std::vector<Vector>& basis, double tol) {
  for (int pass = 0; pass < 2; ++pass)
    for (const Vector& b : basis) v -= b.dot(v) * b;
  const double norm = v.norm();
  if (norm < tol) return std::nullopt;
  v /= norm;
  Index imax = 0;
  v.cwiseAbs().maxCoeff(&imax);
  if (v(imax) < 0.0) v = -v;
  return v;
}

}  // namespace

ProjectionState inlp_run(const Dataset& train, const Dataset& dev, const GroupSet& train_groups,
                         const InlpConfig& config, const InlpObserver& observer) {
  const Index d = train.dim();
  if (dev.dim() != d) fail(ErrorCode::InvalidInput, "inlp_run: train/dev dimension mismatch");
  if (config.max_iterations < 1 || config.max_iterations > d)
    fail(ErrorCode::Config, "inlp_run: max_iterations must lie in [1, d]");
  if (config.directions_per_iteration < 1)
    fail(ErrorCode::Config, "inlp_run: directions_per_iteration must be >= 1");
  if (config.group_kind != GroupKind::Indep &&
      static_cast<Index>(train_groups.masks.size() ? train_groups.masks[0].size() : 0) != train.size())
    fail(ErrorCode::InvalidInput, "inlp_run: group set does not match the training split");

  const std::vector<ProbeTarget> targets = make_probe_targets(train, dev, train_groups, config.group_kind);
  if (targets.empty()) fail(ErrorCode::InvalidInput, "inlp_run: no probe targets");

  ProjectionState state;
  state.projector = identity_projector(d);
  state.direction_sum = Matrix::Zero(d, d);

  Matrix x_train = train.features;
  Matrix x_dev = dev.features;

  for (int iter = 1; iter <= config.max_iterations; ++iter) {
    TrainedProbes trained = train_iteration_probes(x_train, targets, config.probe_config, iter, 0, config.jobs);

    AuditRecord record;
    record.iteration = iter;
    record.skipped_probes = trained.skipped;
    record.stacked_rank = trained.stacked.rows() > 0 ? matrix_rank(trained.stacked) : 0;
    if (config.record_stacked_weights) record.stacked_weights = trained.stacked;
    bool all_at_chance = true;
    for (std::size_t g = 0; g < targets.size(); ++g) {
      if (!trained.probes[g]) continue;
      const double acc = probe_accuracy(*trained.probes[g], x_dev, targets[g].dev_targets);
      const double maj = majority_rate(targets[g].dev_targets);
      record.probe_dev_accuracy[targets[g].name] = acc;
      record.probe_majority_rate[targets[g].name] = maj;
      if (acc > maj + config.early_stop_margin) all_at_chance = false;
    }

    auto audit_dev_f1 = [&](const Matrix& xt, const Matrix& xd) -> std::optional<double> {
      if (config.audit_every < 1 || iter % config.audit_every != 0) return std::nullopt;
      const LinearProbe main = train_probe(xt, train.labels, audit_probe_config(config.probe_config, iter),
                                           "main-task");
      return f1_score(predict(main, xd), dev.labels);
    };

    const bool exhausted = trained.stacked.rows() == 0 || trained.stacked.norm() == 0.0;
    if (all_at_chance || exhausted) {
      // nothing left to remove: record the audit at the current rank and stop
      record.rank = state.projector.rank;
      record.dev_f1 = audit_dev_f1(x_train, x_dev);
      state.audit_log.push_back(std::move(record));
      state.iteration = iter;
      state.stop_reason = exhausted ? InlpStopReason::BiasSubspaceExhausted : InlpStopReason::EarlyStopLeakage;
      return state;
    }

    if (config.variant == InlpVariant::Naive) {
      // Eq. 1 per iteration: project onto the joint nullspace of the stack
      const Projector p_new = nullspace_projector(trained.stacked);
      Matrix composed = p_new.matrix * state.projector.matrix;
      composed = 0.5 * (composed + composed.transpose());  // kill float drift
      state.projector.matrix = std::move(composed);
      state.projector.rank = projector_rank(state.projector.matrix);
    } else {
      // Eq. 2: remove the principal direction(s) of the bias subspace and
      // project onto the nullspace of the accumulated rank-one sum
      SvdResult dec = svd(trained.stacked);
      const int reps = std::min<int>(config.directions_per_iteration, static_cast<int>(dec.v.cols()));
      bool stopped = false;
      for (int rep = 0; rep < reps; ++rep) {
        std::optional<Vector> v = orthogonalize(dec.v.col(rep), state.directions, 1e-8);
        if (!v) {
          // principal direction already inside the removed span: retrain once
          // with a fresh seed, then declare the bias subspace exhausted
          TrainedProbes retry = train_iteration_probes(x_train, targets, config.probe_config, iter, 1, config.jobs);
          if (retry.stacked.rows() > 0 && retry.stacked.norm() > 0.0) {
            SvdResult dec2 = svd(retry.stacked);
            v = orthogonalize(dec2.v.col(0), state.directions, 1e-8);
          }
          if (!v) {
            state.stop_reason = InlpStopReason::BiasSubspaceExhausted;
            stopped = true;
            break;
          }
        }
        state.directions.push_back(*v);
        state.direction_sum.noalias() += *v * v->transpose();
      }
      if (stopped && state.directions.size() == 0) {
        record.rank = state.projector.rank;
        record.dev_f1 = audit_dev_f1(x_train, x_dev);
        state.audit_log.push_back(std::move(record));
        state.iteration = iter;
        return state;
      }
      Projector p = nullspace_of_sum(state.direction_sum);
      state.projector = std::move(p);
      if (stopped) {
        record.rank = state.projector.rank;
        x_train = train.features * state.projector.matrix;
        x_dev = dev.features * state.projector.matrix;
        record.dev_f1 = audit_dev_f1(x_train, x_dev);
        state.audit_log.push_back(std::move(record));
        state.iteration = iter;
        return state;
      }
    }

    // project from the original features each time; P is the full accumulator
    x_train = train.features * state.projector.matrix;
    x_dev = dev.features * state.projector.matrix;

    record.rank = state.projector.rank;
    record.dev_f1 = audit_dev_f1(x_train, x_dev);
    state.audit_log.push_back(std::move(record));
    state.iteration = iter;
    if (observer) observer(state, x_train, x_dev);
  }

  state.stop_reason = InlpStopReason::MaxIterations;
  return state;
}

Matrix apply_projection(const ProjectionState& state, const Matrix& features) {
  if (features.cols() != state.projector.matrix.rows())
    fail(ErrorCode::InvalidInput, "apply_projection: dimension mismatch");
  return features * state.projector.matrix;
}

ProbeConfig audit_probe_config(const ProbeConfig& base, int iteration) {
  ProbeConfig cfg = base;
  cfg.seed = mix_seed(base.seed, 0xF100 + static_cast<std::uint64_t>(iteration));
  return cfg;
}

void save_projection_state(const ProjectionState& state, const std::string& dir) {
  fs::create_directories(dir);
  save_matrix_csv(state.projector.matrix, dir + "/projector.csv");
  Matrix dirs(static_cast<Index>(state.directions.size()), state.projector.dim());
  for (std::size_t i = 0; i < state.directions.size(); ++i) dirs.row(static_cast<Index>(i)) = state.directions[i];
  save_matrix_csv(dirs, dir + "/directions.csv");

  std::ofstream audit(dir + "/audit.jsonl");
  if (!audit) fail(ErrorCode::Io, "cannot write " + dir + "/audit.jsonl");
  for (const AuditRecord& r : state.audit_log) {
    json obj = {{"iter", r.iteration}, {"rank", r.rank}, {"probe_acc", r.probe_dev_accuracy}};
    obj["dev_f1"] = r.dev_f1 ? json(*r.dev_f1) : json(nullptr);
    audit << obj.dump() << '\n';
  }

  json meta = {{"dim", state.projector.dim()},
               {"rank", state.projector.rank},
               {"iterations", state.iteration},
               {"stop_reason", to_string(state.stop_reason)}};
  json majority = json::object();
  json skipped = json::object();
  for (const AuditRecord& r : state.audit_log) {
    majority[std::to_string(r.iteration)] = r.probe_majority_rate;
    skipped[std::to_string(r.iteration)] = r.skipped_probes;
  }
  meta["probe_majority_rate"] = majority;
  meta["skipped_probes"] = skipped;
  std::ofstream mf(dir + "/state.json");
  if (!mf) fail(ErrorCode::Io, "cannot write " + dir + "/state.json");
  mf << meta.dump(2) << '\n';
}

ProjectionState load_projection_state(const std::string& dir) {
  ProjectionState state;
  Matrix p = load_matrix_csv(dir + "/projector.csv");
  if (p.rows() == 0 || p.rows() != p.cols()) fail(ErrorCode::Parse, "bad projector matrix in " + dir);
  state.projector.matrix = std::move(p);
  state.projector.rank = projector_rank(state.projector.matrix);
  const Matrix dirs = load_matrix_csv(dir + "/directions.csv");
  state.direction_sum = Matrix::Zero(state.projector.dim(), state.projector.dim());
  for (Index i = 0; i < dirs.rows(); ++i) {
    state.directions.push_back(dirs.row(i).transpose());
    state.direction_sum.noalias() += dirs.row(i).transpose() * dirs.row(i);
  }

  std::ifstream audit(dir + "/audit.jsonl");
  if (audit) {
    std::string line;
    while (std::getline(audit, line)) {
      if (line.empty()) continue;
      const json obj = json::parse(line, nullptr, false);
      if (obj.is_discarded()) fail(ErrorCode::Parse, "malformed audit record in " + dir);
      AuditRecord r;
      r.iteration = obj.value("iter", 0);
      r.rank = obj.value("rank", Index{0});
      if (obj.contains("probe_acc"))
        r.probe_dev_accuracy = obj["probe_acc"].get<std::map<std::string, double>>();
      if (obj.contains("dev_f1") && !obj["dev_f1"].is_null()) r.dev_f1 = obj["dev_f1"].get<double>();
      state.audit_log.push_back(std::move(r));
    }
  }
  std::ifstream mf(dir + "/state.json");
  if (mf) {
    const json meta = json::parse(mf, nullptr, false);
    if (!meta.is_discarded()) {
      state.iteration = meta.value("iterations", static_cast<int>(state.audit_log.size()));
      if (meta.contains("stop_reason")) {
        const std::string s = meta["stop_reason"].get<std::string>();
        if (s == "early_stop_leakage") state.stop_reason = InlpStopReason::EarlyStopLeakage;
        else if (s == "bias_subspace_exhausted") state.stop_reason = InlpStopReason::BiasSubspaceExhausted;
      }
    }
  }
  return state;
}

}  // namespace debias
