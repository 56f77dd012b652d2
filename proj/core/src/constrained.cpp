#include "debias/constrained.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>

#include <json.hpp>

#include "debias/io.hpp"
#include "debias/rng.hpp"

namespace debias {

using json = nlohmann::json;
namespace fs = std::filesystem;

const char* to_string(ModelKind k) { return k == ModelKind::Linear ? "linear" : "one-hidden-layer"; }

ModelKind model_kind_from_string(const std::string& s) {
  if (s == "linear") return ModelKind::Linear;
  if (s == "one-hidden-layer" || s == "mlp") return ModelKind::OneHidden;
  fail(ErrorCode::Config, "unknown model kind '" + s + "'");
}

const char* to_string(GammaMode m) { return m == GammaMode::Uniform ? "uniform" : "inverse_positive_rate"; }

GammaMode gamma_mode_from_string(const std::string& s) {
  if (s == "uniform") return GammaMode::Uniform;
  if (s == "inverse_positive_rate") return GammaMode::InversePositiveRate;
  fail(ErrorCode::Config, "unknown gamma mode '" + s + "'");
}

Vector TaskModel::scores(const Matrix& features) const {
  if (features.cols() != input_dim) fail(ErrorCode::InvalidInput, "task model: feature dimension mismatch");
  if (kind == ModelKind::Linear) {
    return (features * output_weights).array() + output_bias;
  }
  Matrix h = (features * hidden_weights.transpose()).rowwise() + hidden_bias.transpose();
  h = h.cwiseMax(0.0);  // ReLU
  return (h * output_weights).array() + output_bias;
}

std::vector<int> TaskModel::predict(const Matrix& features) const {
  const Vector s = scores(features);
  std::vector<int> preds(s.size());
  for (Index i = 0; i < s.size(); ++i) preds[i] = s(i) > 0.0 ? 1 : 0;
  return preds;
}

bool TaskModel::finite() const {
  if (!std::isfinite(output_bias)) return false;
  if (!output_weights.allFinite()) return false;
  if (kind == ModelKind::OneHidden)
    return hidden_weights.allFinite() && hidden_bias.allFinite();
  return true;
}

TaskModel init_task_model(ModelKind kind, Index input_dim, Index hidden_dim, std::uint64_t seed) {
  TaskModel m;
  m.kind = kind;
  m.input_dim = input_dim;
  if (kind == ModelKind::Linear) {
    m.hidden_dim = 0;
    m.output_weights = Vector::Zero(input_dim);
  } else {
    if (hidden_dim < 1) fail(ErrorCode::Config, "task model: hidden_dim must be >= 1");
    m.hidden_dim = hidden_dim;
    auto rng = make_rng(seed, 31);
    std::normal_distribution<double> gauss(0.0, 1.0);
    m.hidden_weights.resize(hidden_dim, input_dim);
    const double scale1 = std::sqrt(2.0 / input_dim);
    for (Index i = 0; i < hidden_dim; ++i)
      for (Index j = 0; j < input_dim; ++j) m.hidden_weights(i, j) = scale1 * gauss(rng);
    m.hidden_bias = Vector::Zero(hidden_dim);
    m.output_weights.resize(hidden_dim);
    const double scale2 = std::sqrt(2.0 / hidden_dim);
    for (Index i = 0; i < hidden_dim; ++i) m.output_weights(i) = scale2 * gauss(rng);
  }
  return m;
}

void save_task_model(const TaskModel& model, const std::string& dir) {
  fs::create_directories(dir);
  json meta = {{"kind", to_string(model.kind)},
               {"input_dim", model.input_dim},
               {"hidden_dim", model.hidden_dim},
               {"output_bias", model.output_bias}};
  std::ofstream mf(dir + "/model.json");
  if (!mf) fail(ErrorCode::Io, "cannot write " + dir + "/model.json");
  mf << meta.dump(2) << '\n';
  save_matrix_csv(model.output_weights.transpose(), dir + "/output_weights.csv");
  if (model.kind == ModelKind::OneHidden) {
    save_matrix_csv(model.hidden_weights, dir + "/hidden_weights.csv");
    save_matrix_csv(model.hidden_bias.transpose(), dir + "/hidden_bias.csv");
  }
}

TaskModel load_task_model(const std::string& dir) {
  std::ifstream mf(dir + "/model.json");
  if (!mf) fail(ErrorCode::Io, "cannot open " + dir + "/model.json");
  const json meta = json::parse(mf, nullptr, false);
  if (meta.is_discarded()) fail(ErrorCode::Parse, "malformed model.json in " + dir);
  TaskModel model;
  model.kind = model_kind_from_string(meta.at("kind").get<std::string>());
  model.input_dim = meta.at("input_dim").get<Index>();
  model.hidden_dim = meta.at("hidden_dim").get<Index>();
  model.output_bias = meta.at("output_bias").get<double>();
  model.output_weights = load_matrix_csv(dir + "/output_weights.csv").row(0).transpose();
  if (model.kind == ModelKind::OneHidden) {
    model.hidden_weights = load_matrix_csv(dir + "/hidden_weights.csv");
    model.hidden_bias = load_matrix_csv(dir + "/hidden_bias.csv").row(0).transpose();
  }
  return model;
}

// ---------------------------------------------------------------------------
// constraints
// ---------------------------------------------------------------------------

ConstraintContext make_constraint_context(const ConstraintSpec& spec, const Dataset& train,
                                          std::vector<std::string>* warnings) {
  if (spec.nu < 0.0) fail(ErrorCode::Config, "constraint spec: nu must be >= 0");
  ConstraintContext ctx;
  ctx.nu = spec.nu;
  const GroupSet& gs = spec.group_set;
  for (std::size_t g = 0; g < gs.size(); ++g) {
    if (gs.masks[g].size() != static_cast<std::size_t>(train.size()))
      fail(ErrorCode::InvalidInput, "constraint spec: group masks do not match the training split");
    if (gs.positive_counts[g] < 1) {
      if (warnings)
        warnings->push_back("dropping constraint for group '" + gs.defs[g].label +
                            "': no positive training examples");
      continue;
    }
    ctx.active_groups.push_back(static_cast<int>(g));
    ctx.labels.push_back(gs.defs[g].label);
    ctx.gamma.push_back(spec.gamma_mode == GammaMode::Uniform
                            ? 1.0
                            : static_cast<double>(gs.member_counts[g]) / gs.positive_counts[g]);
    ctx.masks.push_back(gs.masks[g]);
  }
  if (!gs.defs.empty() && ctx.active_groups.empty())
    fail(ErrorCode::UnconstrainedFallback, "every constrained group is degenerate (no positives)");
  return ctx;
}

namespace {

inline double sigmoid(double s) {
  if (s >= 0.0) return 1.0 / (1.0 + std::exp(-s));
  const double e = std::exp(s);
  return e / (1.0 + e);
}

inline double bce(double s, double y) {
  return std::max(s, 0.0) - s * y + std::log1p(std::exp(-std::abs(s)));
}

// hinge upper/lower bounds on the positive-classification indicator 1[s > 0]
inline double hinge_up(double s) { return std::max(0.0, 1.0 + s); }
inline double hinge_up_grad(double s) { return s > -1.0 ? 1.0 : 0.0; }
inline double hinge_low(double s) { return 1.0 - std::max(0.0, 1.0 - s); }
inline double hinge_low_grad(double s) { return s < 1.0 ? 1.0 : 0.0; }

// Per-batch hinge-relaxed TPR pieces: the (+) constraint upper-bounds the
// group rate and lower-bounds the overall rate; the (-) constraint is the
// mirror image.
struct BatchRates {
  std::vector<Index> overall_pos;            // batch positions with y = 1
  std::vector<std::vector<Index>> group_pos; // per active group
  double up_all = 0.0, low_all = 0.0;
  std::vector<double> up_g, low_g;
};

BatchRates batch_rates(const Vector& s, const std::vector<int>& labels, const ConstraintContext& ctx,
                       const std::vector<Index>& batch) {
  BatchRates r;
  r.group_pos.resize(ctx.size());
  r.up_g.assign(ctx.size(), 0.0);
  r.low_g.assign(ctx.size(), 0.0);
  for (Index b = 0; b < static_cast<Index>(batch.size()); ++b) {
    const Index row = batch[b];
    if (labels[row] != 1) continue;
    r.overall_pos.push_back(b);
    r.up_all += hinge_up(s(b));
    r.low_all += hinge_low(s(b));
    for (std::size_t g = 0; g < ctx.size(); ++g) {
      if (ctx.masks[g][row]) {
        r.group_pos[g].push_back(b);
        r.up_g[g] += hinge_up(s(b));
        r.low_g[g] += hinge_low(s(b));
      }
    }
  }
  if (!r.overall_pos.empty()) {
    r.up_all /= r.overall_pos.size();
    r.low_all /= r.overall_pos.size();
  }
  for (std::size_t g = 0; g < ctx.size(); ++g) {
    if (!r.group_pos[g].empty()) {
      r.up_g[g] /= r.group_pos[g].size();
      r.low_g[g] /= r.group_pos[g].size();
    }
  }
  return r;
}

Matrix gather_rows(const Matrix& features, const std::vector<Index>& batch) {
  Matrix x(batch.size(), features.cols());
  for (Index i = 0; i < static_cast<Index>(batch.size()); ++i) x.row(i) = features.row(batch[i]);
  return x;
}

}  // namespace

double lagrangian_value(const TaskModel& model, const Vector& lambda, const Matrix& features,
                        const std::vector<int>& labels, const ConstraintContext& ctx,
                        const std::vector<Index>& batch) {
  if (batch.empty()) fail(ErrorCode::InvalidInput, "lagrangian_value: empty batch");
  if (static_cast<std::size_t>(lambda.size()) != ctx.lambda_size())
    fail(ErrorCode::InvalidInput, "lagrangian_value: lambda size mismatch");
  const Matrix x = gather_rows(features, batch);
  const Vector s = model.scores(x);
  double loss = 0.0;
  for (Index b = 0; b < s.size(); ++b) loss += bce(s(b), labels[batch[b]]);
  loss /= s.size();

  const BatchRates r = batch_rates(s, labels, ctx, batch);
  if (r.overall_pos.empty()) return loss;  // no positive rows: constraint terms vanish
  for (std::size_t g = 0; g < ctx.size(); ++g) {
    if (r.group_pos[g].empty()) continue;
    const double psi_plus = ctx.gamma[g] * (r.up_g[g] - r.low_all) - ctx.nu;
    const double psi_minus = ctx.gamma[g] * (r.up_all - r.low_g[g]) - ctx.nu;
    loss += lambda(2 * g) * psi_plus + lambda(2 * g + 1) * psi_minus;
  }
  return loss;
}

ModelGrad lagrangian_gradient(const TaskModel& model, const Vector& lambda, const Matrix& features,
                              const std::vector<int>& labels, const ConstraintContext& ctx,
                              const std::vector<Index>& batch) {
  if (batch.empty()) fail(ErrorCode::InvalidInput, "lagrangian_gradient: empty batch");
  if (static_cast<std::size_t>(lambda.size()) != ctx.lambda_size())
    fail(ErrorCode::InvalidInput, "lagrangian_gradient: lambda size mismatch");
  const Matrix x = gather_rows(features, batch);
  const Index bs = x.rows();

  // forward
  Matrix hidden, active;
  Vector s;
  if (model.kind == ModelKind::Linear) {
    s = (x * model.output_weights).array() + model.output_bias;
  } else {
    hidden = (x * model.hidden_weights.transpose()).rowwise() + model.hidden_bias.transpose();
    active = (hidden.array() > 0.0).cast<double>();
    hidden = hidden.cwiseMax(0.0);
    s = (hidden * model.output_weights).array() + model.output_bias;
  }

  // d(loss)/d(score)
  Vector ds(bs);
  for (Index b = 0; b < bs; ++b) ds(b) = (sigmoid(s(b)) - labels[batch[b]]) / bs;

  const BatchRates r = batch_rates(s, labels, ctx, batch);
  if (!r.overall_pos.empty()) {
    const double n_all = static_cast<double>(r.overall_pos.size());
    for (std::size_t g = 0; g < ctx.size(); ++g) {
      if (r.group_pos[g].empty()) continue;
      const double n_g = static_cast<double>(r.group_pos[g].size());
      const double lam_p = lambda(2 * g), lam_m = lambda(2 * g + 1);
      if (lam_p == 0.0 && lam_m == 0.0) continue;
      for (Index b : r.group_pos[g]) {
        ds(b) += lam_p * ctx.gamma[g] * hinge_up_grad(s(b)) / n_g;
        ds(b) -= lam_m * ctx.gamma[g] * hinge_low_grad(s(b)) / n_g;
      }
      for (Index b : r.overall_pos) {
        ds(b) -= lam_p * ctx.gamma[g] * hinge_low_grad(s(b)) / n_all;
        ds(b) += lam_m * ctx.gamma[g] * hinge_up_grad(s(b)) / n_all;
      }
    }
  }

  // backward
  ModelGrad grad;
  grad.output_bias = ds.sum();
  if (model.kind == ModelKind::Linear) {
    grad.output_weights = x.transpose() * ds;
  } else {
    grad.output_weights = hidden.transpose() * ds;
    Matrix dh = (ds * model.output_weights.transpose()).cwiseProduct(active);
    grad.hidden_weights = dh.transpose() * x;
    grad.hidden_bias = dh.colwise().sum().transpose();
  }
  return grad;
}

std::vector<std::optional<double>> true_violations(const TaskModel& model, const Dataset& data,
                                                   const ConstraintSpec& spec) {
  const std::vector<int> preds = model.predict(data.features);
  const GroupSet eval_groups = build_group_set(spec.group_set.defs, data);

  Index overall_pos = 0, overall_tp = 0;
  for (Index i = 0; i < data.size(); ++i) {
    if (data.labels[i] == 1) {
      ++overall_pos;
      if (preds[i] == 1) ++overall_tp;
    }
  }
  std::vector<std::optional<double>> out(eval_groups.size());
  if (overall_pos == 0) return out;
  const double tpr = static_cast<double>(overall_tp) / overall_pos;

  for (std::size_t g = 0; g < eval_groups.size(); ++g) {
    Index pos = 0, tp = 0;
    for (Index i = 0; i < data.size(); ++i) {
      if (eval_groups.masks[g][i] && data.labels[i] == 1) {
        ++pos;
        if (preds[i] == 1) ++tp;
      }
    }
    if (pos == 0) continue;  // absent, not zero
    // gamma from the train-split counts carried by the spec
    double gamma = 1.0;
    if (spec.gamma_mode == GammaMode::InversePositiveRate) {
      if (spec.group_set.positive_counts[g] < 1) continue;
      gamma = static_cast<double>(spec.group_set.member_counts[g]) / spec.group_set.positive_counts[g];
    }
    const double tpr_g = static_cast<double>(tp) / pos;
    out[g] = gamma * std::abs(tpr_g - tpr) - spec.nu;
  }
  return out;
}

// ---------------------------------------------------------------------------
// training loop
// ---------------------------------------------------------------------------

namespace {

struct AdamState {
  Matrix m_hw, v_hw;
  Vector m_hb, v_hb, m_ow, v_ow;
  double m_ob = 0.0, v_ob = 0.0;
  long step = 0;

  explicit AdamState(const TaskModel& model) {
    if (model.kind == ModelKind::OneHidden) {
      m_hw = Matrix::Zero(model.hidden_weights.rows(), model.hidden_weights.cols());
      v_hw = m_hw;
      m_hb = Vector::Zero(model.hidden_bias.size());
      v_hb = m_hb;
    }
    m_ow = Vector::Zero(model.output_weights.size());
    v_ow = m_ow;
  }
};

constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kAdamEps = 1e-8;

void adam_step(double& param, double grad, double& m, double& v, double lr, double bc1, double bc2) {
  m = kBeta1 * m + (1.0 - kBeta1) * grad;
  v = kBeta2 * v + (1.0 - kBeta2) * grad * grad;
  param -= lr * (m / bc1) / (std::sqrt(v / bc2) + kAdamEps);
}

void apply_adam(TaskModel& model, const ModelGrad& grad, AdamState& adam, double lr) {
  ++adam.step;
  const double bc1 = 1.0 - std::pow(kBeta1, static_cast<double>(adam.step));
  const double bc2 = 1.0 - std::pow(kBeta2, static_cast<double>(adam.step));
  for (Index i = 0; i < model.output_weights.size(); ++i)
    adam_step(model.output_weights(i), grad.output_weights(i), adam.m_ow(i), adam.v_ow(i), lr, bc1, bc2);
  adam_step(model.output_bias, grad.output_bias, adam.m_ob, adam.v_ob, lr, bc1, bc2);
  if (model.kind == ModelKind::OneHidden) {
    for (Index i = 0; i < model.hidden_weights.rows(); ++i)
      for (Index j = 0; j < model.hidden_weights.cols(); ++j)
        adam_step(model.hidden_weights(i, j), grad.hidden_weights(i, j), adam.m_hw(i, j), adam.v_hw(i, j),
                  lr, bc1, bc2);
    for (Index i = 0; i < model.hidden_bias.size(); ++i)
      adam_step(model.hidden_bias(i), grad.hidden_bias(i), adam.m_hb(i), adam.v_hb(i), lr, bc1, bc2);
  }
}

ConstrainedTrainState run_training(const Dataset& train, const Dataset& dev,
                                   const ConstraintSpec& spec, const TrainOptions& options,
                                   const TrainObserver& observer) {
  if (options.iterations < 1 || options.iterations > 500)
    fail(ErrorCode::Config, "constrained_train: T must lie in [1, 500]");
  if (options.batch_size < 1 || options.primal_lr <= 0.0 || options.dual_lr < 0.0)
    fail(ErrorCode::Config, "constrained_train: invalid optimizer options");

  ConstrainedTrainState state;
  state.context = make_constraint_context(spec, train, &state.warnings);
  state.model = init_task_model(options.model_kind, train.dim(),
                                options.model_kind == ModelKind::OneHidden ? options.hidden_dim : 0,
                                options.seed);
  state.lambda = Vector::Zero(static_cast<Index>(state.context.lambda_size()));

  AdamState adam(state.model);
  const Index n = train.size();
  std::vector<Index> order(n);
  std::iota(order.begin(), order.end(), 0);
  auto rng = make_rng(options.seed, 21);

  const GroupSet dev_gerry = build_group_set(dev.schema, GroupKind::Gerry, dev);
  const int stride = options.snapshot_stride > 0 ? options.snapshot_stride
                                                 : std::max(1, options.iterations / 50);

  for (int t = 1; t <= options.iterations; ++t) {
    // primal player: one shuffled pass of minibatch steps with lambda fixed
    std::shuffle(order.begin(), order.end(), rng);
    for (Index start = 0; start < n; start += options.batch_size) {
      const Index bs = std::min<Index>(options.batch_size, n - start);
      std::vector<Index> batch(order.begin() + start, order.begin() + start + bs);
      const ModelGrad grad =
          lagrangian_gradient(state.model, state.lambda, train.features, train.labels, state.context, batch);
      apply_adam(state.model, grad, adam, options.primal_lr);
    }
    if (!state.model.finite())
      fail(ErrorCode::Divergence, "constrained_train: non-finite parameters at iteration " + std::to_string(t));

    // dual player: projected ascent on exact full-train indicator rates
    if (options.dual_lr > 0.0 && state.context.size() > 0) {
      const std::vector<int> preds = state.model.predict(train.features);
      Index all_pos = 0, all_tp = 0;
      for (Index i = 0; i < n; ++i) {
        if (train.labels[i] == 1) {
          ++all_pos;
          if (preds[i] == 1) ++all_tp;
        }
      }
      const double tpr = all_pos > 0 ? static_cast<double>(all_tp) / all_pos : 0.0;
      for (std::size_t g = 0; g < state.context.size(); ++g) {
        Index pos = 0, tp = 0;
        for (Index i = 0; i < n; ++i) {
          if (state.context.masks[g][i] && train.labels[i] == 1) {
            ++pos;
            if (preds[i] == 1) ++tp;
          }
        }
        const double tpr_g = pos > 0 ? static_cast<double>(tp) / pos : tpr;
        const double psi_plus = state.context.gamma[g] * (tpr_g - tpr) - state.context.nu;
        const double psi_minus = state.context.gamma[g] * (tpr - tpr_g) - state.context.nu;
        state.lambda(2 * g) = std::max(0.0, state.lambda(2 * g) + options.dual_lr * psi_plus);
        state.lambda(2 * g + 1) = std::max(0.0, state.lambda(2 * g + 1) + options.dual_lr * psi_minus);
      }
    }

    // dev snapshot with exact metrics
    IterateSnapshot snap;
    snap.t = t;
    const std::vector<int> dev_preds = state.model.predict(dev.features);
    snap.dev_f1 = f1_score(dev_preds, dev.labels);
    const ViolationReport report = tpr_violations(dev_preds, dev.labels, dev_gerry, options.min_positives);
    snap.dev_avg_violation = report.avg;
    snap.dev_max_violation = report.max;
    snap.lambda_l1 = state.lambda.size() > 0 ? state.lambda.lpNorm<1>() : 0.0;
    snap.lambda_max = state.lambda.size() > 0 ? state.lambda.lpNorm<Eigen::Infinity>() : 0.0;
    state.iterate_log.push_back(snap);

    if (t % stride == 0 || t == options.iterations)
      state.retained_iterates.emplace_back(t, state.model);
    if (observer) observer(t, state.model, state.lambda);
  }

  state.iterations_run = options.iterations;
  return state;
}

}  // namespace

ConstrainedTrainState constrained_train(const Dataset& train, const Dataset& dev,
                                        const ConstraintSpec& spec, const TrainOptions& options,
                                        const TrainObserver& observer) {
  if (spec.group_set.defs.empty())
    fail(ErrorCode::Config, "constrained_train: empty group set (use train_unconstrained)");
  return run_training(train, dev, spec, options, observer);
}

ConstrainedTrainState train_unconstrained(const Dataset& train, const Dataset& dev,
                                          const TrainOptions& options, const TrainObserver& observer) {
  ConstraintSpec empty;
  empty.nu = 0.0;
  TrainOptions opts = options;
  opts.dual_lr = 0.0;
  return run_training(train, dev, empty, opts, observer);
}

void save_train_state(const ConstrainedTrainState& state, const std::string& dir) {
  fs::create_directories(dir);
  save_task_model(state.model, dir + "/model");
  std::ofstream log(dir + "/iterate_log.jsonl");
  if (!log) fail(ErrorCode::Io, "cannot write " + dir + "/iterate_log.jsonl");
  for (const IterateSnapshot& s : state.iterate_log) {
    const json obj = {{"t", s.t},
                      {"dev_f1", s.dev_f1},
                      {"dev_avg_violation", s.dev_avg_violation},
                      {"dev_max_violation", s.dev_max_violation}};
    log << obj.dump() << '\n';
  }
  for (const auto& [t, model] : state.retained_iterates)
    save_task_model(model, dir + "/iterate_" + std::to_string(t));
  if (state.lambda.size() > 0) save_matrix_csv(state.lambda.transpose(), dir + "/lambda.csv");
  if (!state.warnings.empty()) {
    std::ofstream wf(dir + "/warnings.txt");
    for (const std::string& w : state.warnings) wf << w << '\n';
  }
}

}  // namespace debias
