#pragma once

#include <cstddef>

#include "mcode/dataset.hpp"

namespace mcode {

/// Local reachability densities are clamped to this value; a point whose
/// k-distance is zero (at least k exact duplicates) receives it outright.
inline constexpr double kLrdCap = 1e12;

/// Euclidean distance as a plain sequential sum of squared differences.
double euclidean_distance(const double* a, const double* b, std::size_t dim);

/// Local outlier factor of every row. Neighborhoods contain every point within
/// the k-distance, so ties can make them larger than k. Exact brute force.
Vector lof_scores(const Matrix& points, std::size_t k, std::size_t threads = 1);

}  // namespace mcode
