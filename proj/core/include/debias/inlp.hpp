#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "debias/groups.hpp"
#include "debias/probes.hpp"

namespace debias {

// Iterative nullspace projection over multiple protected attributes.
//
// Each iteration trains one probe per group on the current projected
// features and stacks every probe weight row into W_i. The naive variant
// composes the projector onto N(W_i) (rank drops by rank(W_i) per
// iteration); the principal variant removes only the top right-singular
// direction of W_i and projects onto the nullspace of the accumulated
// direction sum (rank drops by 1 per iteration).

enum class InlpVariant { Naive, Principal };

const char* to_string(InlpVariant v);
InlpVariant inlp_variant_from_string(const std::string& s);

struct InlpConfig {
  GroupKind group_kind = GroupKind::Gerry;
  InlpVariant variant = InlpVariant::Principal;
  int max_iterations = 1;
  ProbeConfig probe_config;
  int audit_every = 1;             // dev-F1 audit cadence; rank/leakage recorded every iteration
  int directions_per_iteration = 1;  // principal variant only
  double early_stop_margin = 0.01;   // stop once all probes <= majority + margin on dev; < -1 disables
  int jobs = 1;                      // parallel probe training (deterministic per-probe seeds)
  bool record_stacked_weights = false;  // keep each W_i in the audit (tests/debugging)
};

struct AuditRecord {
  int iteration = 0;
  Index rank = 0;
  Index stacked_rank = 0;  // rank of this iteration's probe stack W_i
  std::map<std::string, double> probe_dev_accuracy;
  std::map<std::string, double> probe_majority_rate;
  std::optional<double> dev_f1;
  std::vector<std::string> skipped_probes;  // single-class groups this iteration
  std::optional<Matrix> stacked_weights;
};

enum class InlpStopReason { MaxIterations, EarlyStopLeakage, BiasSubspaceExhausted };

const char* to_string(InlpStopReason r);

struct ProjectionState {
  Projector projector;        // accumulated P
  Matrix direction_sum;       // sum of v v^T (principal variant)
  std::vector<Vector> directions;  // removed unit directions, pairwise orthogonal
  int iteration = 0;
  std::vector<AuditRecord> audit_log;
  InlpStopReason stop_reason = InlpStopReason::MaxIterations;
};

// Called after each completed iteration with the updated state and the
// features projected by the current P.
using InlpObserver =
    std::function<void(const ProjectionState&, const Matrix& projected_train, const Matrix& projected_dev)>;

ProjectionState inlp_run(const Dataset& train, const Dataset& dev, const GroupSet& train_groups,
                         const InlpConfig& config, const InlpObserver& observer = nullptr);

// Row-wise application of the accumulated projector. Idempotent.
Matrix apply_projection(const ProjectionState& state, const Matrix& features);

// Probe config used for the iteration's main-task audit classifier; callers
// re-deriving per-iteration task models get bit-identical results.
ProbeConfig audit_probe_config(const ProbeConfig& base, int iteration);

void save_projection_state(const ProjectionState& state, const std::string& dir);
ProjectionState load_projection_state(const std::string& dir);

}  // namespace debias
