#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "mcode/dataset.hpp"
#include "mcode/random.hpp"

namespace mcode {

/// Minimum covariance determinant estimate.
struct RobustEstimate {
  Vector location;
  Matrix scatter;                    ///< consistency-scaled support covariance plus ridge * I
  std::vector<std::size_t> support;  ///< sorted indices of the h-subset
  double determinant = 0.0;          ///< determinant of the raw support covariance (divisor h)
  double log_determinant = 0.0;      ///< log of the ridged raw support covariance determinant
  double consistency = 1.0;
  double ridge = 0.0;
  std::vector<double> trace;        ///< accepted log-determinants of the winning candidate, in order
};

struct McdOptions {
  std::size_t h = 0;  ///< 0 selects floor((n + d + 1) / 2)
  std::size_t n_starts = 500;
  std::size_t initial_csteps = 2;
  std::size_t refine_count = 10;
  std::size_t max_csteps = 200;
  double tolerance = 1e-12;  ///< stop refining once the log-determinant moves less than this
  std::size_t threads = 1;
};

std::size_t default_mcd_support(std::size_t n, std::size_t d);

/// FAST-MCD: random (d+1)-subsets grown to h points and concentrated.
RobustEstimate fast_mcd(const Matrix& points, Seed seed, const McdOptions& options = {});

/// Mean and covariance of the selected rows (divisor = row count).
void subset_moments(const Matrix& points, std::span<const std::size_t> rows, Vector& mean, Matrix& cov);

/// (point - location)' scatter^-1 (point - location).
double robust_distance_sq(const RobustEstimate& est, std::span<const double> point);
/// robust_distance_sq for every row, sharing one factorization.
Vector robust_distances_sq(const RobustEstimate& est, const Matrix& points);
/// Same with an explicit center in place of est.location.
Vector robust_distances_sq(const RobustEstimate& est, const Matrix& points, const Vector& center);

}  // namespace mcode
