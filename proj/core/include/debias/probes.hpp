#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "debias/linalg.hpp"

namespace debias {

struct ProbeConfig {
  double learning_rate = 0.1;
  int epochs = 100;
  double l2 = 1e-4;
  int batch_size = 64;
  std::uint64_t seed = 0;
};

// Logistic-regression classifier. Binary targets use a single weight row;
// multi-valued targets are one-vs-rest with one row per class.
struct LinearProbe {
  Matrix weights;     // rows x d (1 row for binary, C rows for C >= 3 classes)
  Vector intercepts;  // same length as rows
  std::string target;
  int num_classes = 2;
};

// Mini-batch gradient descent on the L2-regularized logistic loss.
// Deterministic given the seed; the epoch-level training loss is
// non-increasing (an epoch whose full-data loss went up is rolled back and
// the step size halved).
LinearProbe train_probe(const Matrix& features, const std::vector<int>& targets,
                        const ProbeConfig& config, const std::string& target_name = "");

// argmax over class scores; sigmoid threshold 0.5 for binary. Ties break
// toward the lower class index.
std::vector<int> predict(const LinearProbe& probe, const Matrix& features);

double probe_accuracy(const LinearProbe& probe, const Matrix& features,
                      const std::vector<int>& targets);

// Fraction of the most frequent target value (the chance-level audit bar).
double majority_rate(const std::vector<int>& targets);

// Mean per-class regularized logistic loss; exposed so tests can check the
// analytic gradient and the monotonicity guarantee.
double logistic_loss(const Matrix& weights, const Vector& intercepts, const Matrix& features,
                     const std::vector<int>& targets, int num_classes, double l2);

// Analytic gradient of logistic_loss; the same routine drives the trainer's
// minibatch steps.
void logistic_gradient(const Matrix& weights, const Vector& intercepts, const Matrix& features,
                       const std::vector<int>& targets, double l2, Matrix* grad_weights,
                       Vector* grad_intercepts);

// JSON form: {"target": ..., "weights": [[...]], "intercepts": [...]}
void save_probe(const LinearProbe& probe, const std::string& path);
LinearProbe load_probe(const std::string& path);

}  // namespace debias
