#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "mcode/dataset.hpp"
#include "mcode/random.hpp"

namespace mcode {

struct OcsvmOptions {
  double nu = 0.01;
  double gamma = 0.0;  ///< RBF bandwidth; <= 0 selects the median heuristic
  double tolerance = 1e-3;
  std::size_t max_iterations = 0;  ///< 0 selects 100 * n
  std::size_t full_kernel_limit = 4000;
  bool record_trace = false;
  Seed seed{0};  ///< used only to subsample points for the median heuristic
};

/// f(z) = sum_j alphas_j * exp(-gamma * |sv_j - z|^2) - offset.
struct OcsvmModel {
  Matrix support_points;
  Vector alphas;
  double offset = 0.0;
  double gamma = 1.0;
  double nu = 0.01;
  std::size_t train_size = 0;
};

struct OcsvmDiagnostics {
  std::size_t iterations = 0;
  double max_violation = 0.0;
  double dual_objective = 0.0;  ///< 0.5 * alpha' Q alpha
  std::size_t support_count = 0;
  std::size_t free_count = 0;
  Vector alphas;     ///< full alpha vector over the training points
  Vector gradient;   ///< Q alpha over the training points
  std::vector<double> objective_trace;
};

double rbf_kernel(std::span<const double> a, std::span<const double> b, double gamma);

/// gamma = 1 / (2 med^2), med the median pairwise distance on at most
/// `sample` points; zero medians fall back to the median of nonzero distances, then 1.
double median_heuristic_gamma(const Matrix& points, Seed seed, std::size_t sample = 1000);

/// Solves min 0.5 a'Qa subject to 0 <= a_i <= 1/(nu n), sum a = 1 by
/// maximal-violating-pair updates. Throws ConvergenceError at the iteration cap.
OcsvmModel train_ocsvm(const Matrix& points, const OcsvmOptions& options = {}, OcsvmDiagnostics* diagnostics = nullptr);

double ocsvm_decision(const OcsvmModel& model, std::span<const double> point);
Vector ocsvm_decisions(const OcsvmModel& model, const Matrix& points, std::size_t threads = 1);

}  // namespace mcode
