#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "debias/groups.hpp"
#include "debias/metrics.hpp"

namespace debias {

// Bias-constrained training: minimize task loss subject to per-group
// weighted TPR-deviation constraints, optimized as a two-player game. The
// primal player takes adaptive-moment gradient steps on a hinge-surrogate
// Lagrangian; the dual player does projected gradient ascent on the
// multipliers using exact indicator rates.

enum class ModelKind { Linear, OneHidden };

const char* to_string(ModelKind k);
ModelKind model_kind_from_string(const std::string& s);

struct TaskModel {
  ModelKind kind = ModelKind::Linear;
  Index input_dim = 0;
  Index hidden_dim = 0;     // 0 for linear
  Matrix hidden_weights;    // h x d
  Vector hidden_bias;       // h
  Vector output_weights;    // d (linear) or h (one hidden layer)
  double output_bias = 0.0;

  Vector scores(const Matrix& features) const;  // logits
  std::vector<int> predict(const Matrix& features) const;
  bool finite() const;
};

TaskModel init_task_model(ModelKind kind, Index input_dim, Index hidden_dim, std::uint64_t seed);

void save_task_model(const TaskModel& model, const std::string& dir);
TaskModel load_task_model(const std::string& dir);

enum class GammaMode { Uniform, InversePositiveRate };

const char* to_string(GammaMode m);
GammaMode gamma_mode_from_string(const std::string& s);

struct ConstraintSpec {
  GroupSet group_set;  // built on the training split
  double nu = 0.1;     // slack
  GammaMode gamma_mode = GammaMode::Uniform;
};

// The |tpr_g - tpr| <= nu/gamma_g constraint split into a (+,-) pair of
// one-sided constraints, each with its own multiplier, over the groups that
// survived the positives check. gamma uses train-split counts.
struct ConstraintContext {
  std::vector<int> active_groups;  // indices into group_set.defs
  std::vector<std::string> labels;
  std::vector<double> gamma;
  std::vector<std::vector<std::uint8_t>> masks;  // per active group, train rows
  double nu = 0.0;

  std::size_t size() const { return active_groups.size(); }
  std::size_t lambda_size() const { return 2 * active_groups.size(); }
};

ConstraintContext make_constraint_context(const ConstraintSpec& spec, const Dataset& train,
                                          std::vector<std::string>* warnings);

struct ModelGrad {
  Matrix hidden_weights;
  Vector hidden_bias;
  Vector output_weights;
  double output_bias = 0.0;
};

// Proxy Lagrangian over a batch of row indices: mean BCE plus
// sum_g lambda_g * psi~_g, the hinge-surrogate constraint values.
double lagrangian_value(const TaskModel& model, const Vector& lambda, const Matrix& features,
                        const std::vector<int>& labels, const ConstraintContext& ctx,
                        const std::vector<Index>& batch);
ModelGrad lagrangian_gradient(const TaskModel& model, const Vector& lambda, const Matrix& features,
                              const std::vector<int>& labels, const ConstraintContext& ctx,
                              const std::vector<Index>& batch);

// Exact indicator-based psi_g = gamma_g * |tpr_g - tpr| - nu per group of
// spec.group_set, evaluated on `data`; groups with no positive labels there
// are absent. gamma comes from the train-split counts in the spec.
std::vector<std::optional<double>> true_violations(const TaskModel& model, const Dataset& data,
                                                   const ConstraintSpec& spec);

struct TrainOptions {
  ModelKind model_kind = ModelKind::Linear;
  Index hidden_dim = 64;
  int iterations = 100;  // T
  double primal_lr = 1e-3;
  double dual_lr = 0.05;
  int batch_size = 64;
  std::uint64_t seed = 0;
  int snapshot_stride = 0;  // parameter-copy cadence; 0 -> max(1, T/50)
  int min_positives = 5;    // dev metric inclusion bar
};

struct IterateSnapshot {
  int t = 0;
  double dev_f1 = 0.0;
  double dev_avg_violation = 0.0;
  double dev_max_violation = 0.0;
  double lambda_l1 = 0.0;
  double lambda_max = 0.0;
};

struct ConstrainedTrainState {
  TaskModel model;  // final theta
  Vector lambda;
  ConstraintContext context;
  std::vector<IterateSnapshot> iterate_log;
  std::vector<std::pair<int, TaskModel>> retained_iterates;  // stride copies + final
  std::vector<std::string> warnings;
  int iterations_run = 0;
};

using TrainObserver = std::function<void(int t, const TaskModel& model, const Vector& lambda)>;

// T outer iterations: one shuffled pass of primal minibatch steps with fixed
// lambda, then one dual ascent step from full-train indicator rates, then a
// dev snapshot. Deterministic given the seed.
ConstrainedTrainState constrained_train(const Dataset& train, const Dataset& dev,
                                        const ConstraintSpec& spec, const TrainOptions& options,
                                        const TrainObserver& observer = nullptr);

// Same loop with no constraint terms (the biased baseline).
ConstrainedTrainState train_unconstrained(const Dataset& train, const Dataset& dev,
                                          const TrainOptions& options,
                                          const TrainObserver& observer = nullptr);

void save_train_state(const ConstrainedTrainState& state, const std::string& dir);

}  // namespace debias
