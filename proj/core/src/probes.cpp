#include "debias/probes.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <set>

#include <json.hpp>

#include "debias/rng.hpp"

namespace debias {

namespace {

inline double sigmoid(double s) {
  if (s >= 0.0) return 1.0 / (1.0 + std::exp(-s));
  const double e = std::exp(s);
  return e / (1.0 + e);
}

// numerically stable binary cross-entropy of logit s against y in {0,1}
inline double bce(double s, double y) {
  return std::max(s, 0.0) - s * y + std::log1p(std::exp(-std::abs(s)));
}

Matrix one_hot_columns(const std::vector<int>& targets, int rows) {
  Matrix y(targets.size(), rows);
  if (rows == 1) {
    for (std::size_t i = 0; i < targets.size(); ++i) y(i, 0) = targets[i];
  } else {
    y.setZero();
    for (std::size_t i = 0; i < targets.size(); ++i) y(i, targets[i]) = 1.0;
  }
  return y;
}

}  // namespace

double logistic_loss(const Matrix& weights, const Vector& intercepts, const Matrix& features,
                     const std::vector<int>& targets, int num_classes, double l2) {
  const Index n = features.rows();
  const Index rows = weights.rows();
  const Matrix y = one_hot_columns(targets, static_cast<int>(rows));
  const Matrix scores = (features * weights.transpose()).rowwise() + intercepts.transpose();
  double total = 0.0;
  for (Index j = 0; j < rows; ++j) {
    double loss = 0.0;
    for (Index i = 0; i < n; ++i) loss += bce(scores(i, j), y(i, j));
    total += loss / n + 0.5 * l2 * weights.row(j).squaredNorm();
  }
  (void)num_classes;
  return total;
}

void logistic_gradient(const Matrix& weights, const Vector& intercepts, const Matrix& features,
                       const std::vector<int>& targets, double l2, Matrix* grad_weights,
                       Vector* grad_intercepts) {
  const Index n = features.rows();
  const Index rows = weights.rows();
  const Matrix y = one_hot_columns(targets, static_cast<int>(rows));
  Matrix residual = (features * weights.transpose()).rowwise() + intercepts.transpose();
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < rows; ++j) residual(i, j) = sigmoid(residual(i, j)) - y(i, j);
  *grad_weights = residual.transpose() * features / n + l2 * weights;
  *grad_intercepts = residual.colwise().sum().transpose() / n;
}

LinearProbe train_probe(const Matrix& features, const std::vector<int>& targets,
                        const ProbeConfig& config, const std::string& target_name) {
  const Index n = features.rows();
  const Index d = features.cols();
  if (n < 1 || static_cast<Index>(targets.size()) != n)
    fail(ErrorCode::InvalidInput, "train_probe: features/targets size mismatch");
  if (!features.allFinite()) fail(ErrorCode::InvalidInput, "train_probe: non-finite features");
  if (config.learning_rate <= 0.0 || config.epochs < 1 || config.batch_size < 1 || config.l2 < 0.0)
    fail(ErrorCode::Config, "train_probe: invalid probe config");

  std::set<int> distinct(targets.begin(), targets.end());
  if (distinct.size() < 2)
    fail(ErrorCode::DegenerateTarget, "train_probe: single-class targets for '" + target_name + "'");
  const int num_classes = *distinct.rbegin() + 1;
  if (*distinct.begin() < 0) fail(ErrorCode::InvalidInput, "train_probe: negative target value");
  const Index rows = (num_classes == 2) ? 1 : num_classes;

  Matrix w = Matrix::Zero(rows, d);
  Vector b = Vector::Zero(rows);
  const Matrix y = one_hot_columns(targets, static_cast<int>(rows));

  // per-class step sizes: one-vs-rest columns are independent fits
  std::vector<double> lr(rows, config.learning_rate);
  Vector prev_loss(rows);
  auto class_losses = [&](const Matrix& wm, const Vector& bv) {
    const Matrix scores = (features * wm.transpose()).rowwise() + bv.transpose();
    Vector out(rows);
    for (Index j = 0; j < rows; ++j) {
      double loss = 0.0;
      for (Index i = 0; i < n; ++i) loss += bce(scores(i, j), y(i, j));
      out(j) = loss / n + 0.5 * config.l2 * wm.row(j).squaredNorm();
    }
    return out;
  };
  prev_loss = class_losses(w, b);

  std::vector<Index> order(n);
  std::iota(order.begin(), order.end(), 0);
  auto rng = make_rng(config.seed, 7);

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    const Matrix w_backup = w;
    const Vector b_backup = b;

    for (Index start = 0; start < n; start += config.batch_size) {
      const Index bs = std::min<Index>(config.batch_size, n - start);
      Matrix xb(bs, d);
      std::vector<int> tb(bs);
      for (Index i = 0; i < bs; ++i) {
        xb.row(i) = features.row(order[start + i]);
        tb[i] = targets[order[start + i]];
      }
      Matrix grad_w;
      Vector grad_b;
      logistic_gradient(w, b, xb, tb, config.l2, &grad_w, &grad_b);
      for (Index j = 0; j < rows; ++j) {
        w.row(j) -= lr[j] * grad_w.row(j);
        b(j) -= lr[j] * grad_b(j);
      }
    }

    // keep the epoch-level loss non-increasing: roll back any class whose
    // full-data loss rose, and halve its step size
    const Vector loss = class_losses(w, b);
    for (Index j = 0; j < rows; ++j) {
      if (loss(j) > prev_loss(j) + 1e-9) {
        w.row(j) = w_backup.row(j);
        b(j) = b_backup(j);
        lr[j] *= 0.5;
      } else {
        prev_loss(j) = loss(j);
      }
    }
  }

  LinearProbe probe;
  probe.weights = std::move(w);
  probe.intercepts = std::move(b);
  probe.target = target_name;
  probe.num_classes = num_classes;
  return probe;
}

std::vector<int> predict(const LinearProbe& probe, const Matrix& features) {
  if (features.cols() != probe.weights.cols())
    fail(ErrorCode::InvalidInput, "predict: feature dimension mismatch");
  const Index n = features.rows();
  const Matrix scores = (features * probe.weights.transpose()).rowwise() + probe.intercepts.transpose();
  std::vector<int> preds(n);
  if (probe.weights.rows() == 1) {
    for (Index i = 0; i < n; ++i) preds[i] = scores(i, 0) > 0.0 ? 1 : 0;
  } else {
    for (Index i = 0; i < n; ++i) {
      Index best = 0;
      for (Index j = 1; j < scores.cols(); ++j)
        if (scores(i, j) > scores(i, best)) best = j;  // strict: ties keep lower index
      preds[i] = static_cast<int>(best);
    }
  }
  return preds;
}

double probe_accuracy(const LinearProbe& probe, const Matrix& features,
                      const std::vector<int>& targets) {
  if (static_cast<Index>(targets.size()) != features.rows())
    fail(ErrorCode::InvalidInput, "probe_accuracy: size mismatch");
  const std::vector<int> preds = predict(probe, features);
  Index correct = 0;
  for (std::size_t i = 0; i < targets.size(); ++i)
    if (preds[i] == targets[i]) ++correct;
  return static_cast<double>(correct) / targets.size();
}

double majority_rate(const std::vector<int>& targets) {
  if (targets.empty()) return 0.0;
  std::map<int, Index> counts;
  for (int t : targets) ++counts[t];
  Index best = 0;
  for (const auto& [value, count] : counts) best = std::max(best, count);
  return static_cast<double>(best) / targets.size();
}

void save_probe(const LinearProbe& probe, const std::string& path) {
  nlohmann::json weights = nlohmann::json::array();
  for (Index i = 0; i < probe.weights.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Index j = 0; j < probe.weights.cols(); ++j) row.push_back(probe.weights(i, j));
    weights.push_back(std::move(row));
  }
  nlohmann::json intercepts = nlohmann::json::array();
  for (Index i = 0; i < probe.intercepts.size(); ++i) intercepts.push_back(probe.intercepts(i));
  const nlohmann::json obj = {{"target", probe.target},
                              {"weights", weights},
                              {"intercepts", intercepts},
                              {"num_classes", probe.num_classes}};
  std::ofstream f(path);
  if (!f) fail(ErrorCode::Io, "cannot write probe file: " + path);
  f << obj.dump(2) << '\n';
}

LinearProbe load_probe(const std::string& path) {
  std::ifstream f(path);
  if (!f) fail(ErrorCode::Io, "cannot open probe file: " + path);
  const nlohmann::json obj = nlohmann::json::parse(f, nullptr, false);
  if (obj.is_discarded() || !obj.contains("weights") || !obj.contains("intercepts"))
    fail(ErrorCode::Parse, "malformed probe file: " + path);
  LinearProbe probe;
  probe.target = obj.value("target", std::string{});
  const auto& weights = obj["weights"];
  const Index rows = static_cast<Index>(weights.size());
  if (rows == 0) fail(ErrorCode::Parse, "probe file has no weight rows: " + path);
  const Index d = static_cast<Index>(weights[0].size());
  probe.weights.resize(rows, d);
  for (Index i = 0; i < rows; ++i) {
    if (static_cast<Index>(weights[i].size()) != d) fail(ErrorCode::Parse, "ragged probe weights: " + path);
    for (Index j = 0; j < d; ++j) probe.weights(i, j) = weights[i][j].get<double>();
  }
  probe.intercepts.resize(rows);
  for (Index i = 0; i < rows; ++i) probe.intercepts(i) = obj["intercepts"][i].get<double>();
  probe.num_classes = obj.value("num_classes", rows == 1 ? 2 : static_cast<int>(rows));
  return probe;
}

}  // namespace debias
