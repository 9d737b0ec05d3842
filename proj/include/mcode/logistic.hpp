#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "mcode/dataset.hpp"
#include "mcode/random.hpp"

namespace mcode {

/// Probability clip applied to every model output.
inline constexpr double kDefaultClip = 1e-6;

/// L2-regularized logistic regression: P(y=1|x) = sigmoid(weights . x + intercept).
struct LogisticModel {
  Vector weights;
  double intercept = 0.0;
  double lambda = 0.0;

  std::size_t input_dim() const { return static_cast<std::size_t>(weights.size()); }
};

struct LogisticOptions {
  double gradient_tolerance = 1e-6;  ///< max-norm of the objective gradient
  int max_iterations = 500;
  bool record_trace = false;
};

struct SolverReport {
  int iterations = 0;
  bool converged = false;
  bool degenerate = false;  ///< single-class target, constant model emitted
  double gradient_max_norm = 0.0;
  double objective = 0.0;
  std::vector<double> objective_trace;  ///< filled when LogisticOptions::record_trace
};

/// Optional accelerators for repeated fits on the same design.
struct TrainContext {
  const Matrix* gram = nullptr;                 ///< X X^T, used when inputs outnumber rows
  const LogisticModel* warm_start = nullptr;
};

/// Minimizes (1/n) sum log-loss + (lambda/2) ||weights||^2 with an unpenalized
/// intercept, by damped Newton iterations with Armijo backtracking.
/// A single-class target yields the constant model with rate (pos+1)/(n+2).
LogisticModel train_logistic(const Matrix& X, std::span<const std::uint8_t> y, double lambda,
                             const LogisticOptions& options = {}, SolverReport* report = nullptr,
                             const TrainContext& context = {});

/// Objective value at (weights, intercept).
double logistic_objective(const Matrix& X, std::span<const std::uint8_t> y, double lambda, const Vector& weights,
                          double intercept);

/// Gradient of logistic_objective; the last entry is the intercept component.
Vector logistic_gradient(const Matrix& X, std::span<const std::uint8_t> y, double lambda, const Vector& weights,
                         double intercept);

double sigmoid(double z);

/// sigmoid(weights . x + intercept), clipped to [clip, 1 - clip].
double predict_proba(const LogisticModel& model, std::span<const double> x, double clip = kDefaultClip);

struct LambdaSelection {
  double lambda = 1.0;
  std::vector<double> grid;
  std::vector<double> scores;  ///< mean validation log-likelihood per grid value; empty on fallback
};

/// Grid search by k-fold cross validation on mean held-out log-likelihood.
/// Ties go to the larger lambda. With fewer than 10 rows, returns lambda = 1.
LambdaSelection select_lambda(const Matrix& X, std::span<const std::uint8_t> y, std::span<const double> grid,
                              std::size_t folds, Seed seed, const LogisticOptions& options = {},
                              const Matrix* gram = nullptr);

}  // namespace mcode
