#include "mcode/mcd.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <Eigen/Cholesky>

#include "mcode/errors.hpp"
#include "mcode/special_functions.hpp"
#include "parallel.hpp"

namespace mcode {

std::size_t default_mcd_support(std::size_t n, std::size_t d) { return (n + d + 1) / 2; }

void subset_moments(const Matrix& points, std::span<const std::size_t> rows, Vector& mean, Matrix& cov) {
  const Eigen::Index d = points.cols();
  Matrix sub(static_cast<Eigen::Index>(rows.size()), d);
  for (std::size_t r = 0; r < rows.size(); ++r) sub.row(static_cast<Eigen::Index>(r)) = points.row(static_cast<Eigen::Index>(rows[r]));
  mean = sub.colwise().mean().transpose();
  sub.rowwise() -= mean.transpose();
  cov.noalias() = sub.transpose() * sub;
  cov /= static_cast<double>(rows.size());
}

namespace {

using ColMatrix = Eigen::MatrixXd;

struct Candidate {
  double log_det = std::numeric_limits<double>::infinity();
  std::vector<std::size_t> support;
  Vector mean;
  Matrix cov;
  std::vector<double> trace;
};

double ridged_log_det(const Matrix& cov, double ridge, Eigen::LLT<ColMatrix>* out) {
  ColMatrix a = cov;
  a.diagonal().array() += ridge;
  Eigen::LLT<ColMatrix> llt(a);
  if (llt.info() != Eigen::Success) throw NumericError("MCD covariance is not positive definite after ridge");
  const double ld = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
  if (out) *out = std::move(llt);
  return ld;
}

Vector mahalanobis_sq(const Matrix& points, const Vector& center, const Eigen::LLT<ColMatrix>& llt) {
  ColMatrix centered = (points.rowwise() - center.transpose()).transpose();
  llt.matrixL().solveInPlace(centered);
  return centered.colwise().squaredNorm().transpose();
}

std::vector<std::size_t> smallest_h(const Vector& dist, std::size_t h) {
  std::vector<std::size_t> idx(static_cast<std::size_t>(dist.size()));
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  auto less = [&](std::size_t a, std::size_t b) {
    const double da = dist(static_cast<Eigen::Index>(a));
    const double db = dist(static_cast<Eigen::Index>(b));
    return da < db || (da == db && a < b);
  };
  std::nth_element(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(h - 1), idx.end(), less);
  idx.resize(h);
  std::sort(idx.begin(), idx.end());
  return idx;
}

// One concentration step from cand; returns false (leaving cand unchanged) when
// the determinant would not decrease.
bool concentrate(const Matrix& points, std::size_t h, double ridge, Candidate& cand) {
  Eigen::LLT<ColMatrix> llt;
  ridged_log_det(cand.cov, ridge, &llt);
  const Vector dist = mahalanobis_sq(points, cand.mean, llt);
  Candidate next;
  next.support = smallest_h(dist, h);
  if (next.support == cand.support) return false;
  subset_moments(points, next.support, next.mean, next.cov);
  next.log_det = ridged_log_det(next.cov, ridge, nullptr);
  if (!(next.log_det < cand.log_det)) return false;
  next.trace = std::move(cand.trace);
  next.trace.push_back(next.log_det);
  cand = std::move(next);
  return true;
}

bool rank_deficient(const Matrix& cov, double ridge) {
  Eigen::LDLT<ColMatrix> ldlt(cov);
  if (ldlt.info() != Eigen::Success) return true;
  return ldlt.vectorD().minCoeff() <= ridge;
}

double raw_determinant(const Matrix& cov) {
  Eigen::LDLT<ColMatrix> ldlt(cov);
  const Vector diag = ldlt.vectorD();
  if (diag.minCoeff() <= 0.0) return 0.0;
  return std::exp(diag.array().log().sum());
}

}  // namespace

namespace {

RobustEstimate fast_mcd_ordered(const Matrix& points, Seed seed, const McdOptions& options) {
  const std::size_t n = static_cast<std::size_t>(points.rows());
  const std::size_t d = static_cast<std::size_t>(points.cols());
  if (d == 0) throw ArgumentError("MCD needs at least one dimension");
  if (n <= d) throw ArgumentError("MCD needs more points (" + std::to_string(n) + ") than dimensions (" + std::to_string(d) + ")");
  if (!points.allFinite()) throw ArgumentError("MCD input contains non-finite values");
  const std::size_t h_min = default_mcd_support(n, d);
  const std::size_t h = options.h == 0 ? h_min : options.h;
  if (h < h_min || h > n)
    throw ArgumentError("MCD support size must lie in [" + std::to_string(h_min) + ", " + std::to_string(n) + "]");

  std::vector<std::size_t> all(n);
  std::iota(all.begin(), all.end(), std::size_t{0});
  Vector full_mean;
  Matrix full_cov;
  subset_moments(points, all, full_mean, full_cov);
  const double trace = full_cov.trace();
  const double dd = static_cast<double>(d);
  // Spread at rounding level counts as constant data.
  const double noise_floor = 1e-12 * (1.0 + full_mean.squaredNorm() / dd);
  const double ridge = trace / dd > noise_floor ? 1e-8 * trace / dd : 1e-8;

  Candidate best;
  if (h == n) {
    best.support = all;
    best.mean = full_mean;
    best.cov = full_cov;
    best.log_det = ridged_log_det(full_cov, ridge, nullptr);
    best.trace.push_back(best.log_det);
  } else {
    const std::size_t starts = std::max<std::size_t>(1, options.n_starts);
    std::vector<Candidate> cands(starts);
    detail::parallel_for(starts, options.threads, [&](std::size_t s) {
      Rng rng = make_rng(derive_seed(seed, {s}));
      std::vector<std::size_t> order(all);
      std::shuffle(order.begin(), order.end(), rng);
      std::size_t used = d + 1;
      std::vector<std::size_t> subset(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(used));
      Candidate c;
      subset_moments(points, subset, c.mean, c.cov);
      while (used < n && rank_deficient(c.cov, ridge)) {
        subset.push_back(order[used++]);
        subset_moments(points, subset, c.mean, c.cov);
      }
      c.log_det = ridged_log_det(c.cov, ridge, nullptr);
      // Expand to h points, then a fixed number of concentration steps.
      Eigen::LLT<ColMatrix> llt;
      ridged_log_det(c.cov, ridge, &llt);
      c.support = smallest_h(mahalanobis_sq(points, c.mean, llt), h);
      subset_moments(points, c.support, c.mean, c.cov);
      c.log_det = ridged_log_det(c.cov, ridge, nullptr);
      c.trace.push_back(c.log_det);
      for (std::size_t step = 0; step < options.initial_csteps; ++step)
        if (!concentrate(points, h, ridge, c)) break;
      cands[s] = std::move(c);
    });

    std::vector<std::size_t> order(starts);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return cands[a].log_det < cands[b].log_det; });
    std::vector<Candidate> top;
    for (std::size_t idx : order) {
      if (top.size() >= std::max<std::size_t>(1, options.refine_count)) break;
      const bool seen = std::any_of(top.begin(), top.end(), [&](const Candidate& t) { return t.support == cands[idx].support; });
      if (!seen) top.push_back(std::move(cands[idx]));
    }
    detail::parallel_for(top.size(), options.threads, [&](std::size_t t) {
      Candidate& c = top[t];
      for (std::size_t step = 0; step < options.max_csteps; ++step) {
        const double before = c.log_det;
        if (!concentrate(points, h, ridge, c)) break;
        if (before - c.log_det < options.tolerance) break;
      }
    });
    std::size_t winner = 0;
    for (std::size_t t = 1; t < top.size(); ++t)
      if (top[t].log_det < top[winner].log_det) winner = t;
    best = std::move(top[winner]);
  }

  RobustEstimate est;
  est.location = best.mean;
  est.support = best.support;
  est.log_determinant = best.log_det;
  est.determinant = raw_determinant(best.cov);
  est.ridge = ridge;
  if (h == n) {
    est.consistency = 1.0;
  } else {
    const double q = static_cast<double>(h) / static_cast<double>(n);
    const double dd = static_cast<double>(d);
    est.consistency = q / chi_squared_cdf(chi_squared_quantile(q, dd), dd + 2.0);
  }
  est.scatter = est.consistency * best.cov;
  est.scatter.diagonal().array() += ridge;
  est.scatter = 0.5 * (est.scatter + est.scatter.transpose()).eval();
  est.trace = std::move(best.trace);
  return est;
}

}  // namespace

RobustEstimate fast_mcd(const Matrix& points, Seed seed, const McdOptions& options) {
  // Sampling runs on lexicographically sorted rows so the estimate depends on the point set only.
  const auto n = static_cast<std::size_t>(points.rows());
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    for (Eigen::Index c = 0; c < points.cols(); ++c) {
      const double x = points(static_cast<Eigen::Index>(a), c);
      const double y = points(static_cast<Eigen::Index>(b), c);
      if (x != y) return x < y;
    }
    return false;
  });
  if (std::is_sorted(order.begin(), order.end())) return fast_mcd_ordered(points, seed, options);
  Matrix sorted(points.rows(), points.cols());
  for (std::size_t i = 0; i < n; ++i) sorted.row(static_cast<Eigen::Index>(i)) = points.row(static_cast<Eigen::Index>(order[i]));
  RobustEstimate est = fast_mcd_ordered(sorted, seed, options);
  for (auto& s : est.support) s = order[s];
  std::sort(est.support.begin(), est.support.end());
  return est;
}

namespace {

Eigen::LLT<ColMatrix> factor_scatter(const RobustEstimate& est) {
  Eigen::LLT<ColMatrix> llt(ColMatrix(est.scatter));
  if (llt.info() != Eigen::Success) throw NumericError("robust scatter is not positive definite");
  return llt;
}

}  // namespace

double robust_distance_sq(const RobustEstimate& est, std::span<const double> point) {
  if (static_cast<Eigen::Index>(point.size()) != est.location.size())
    throw ArgumentError("point dimension does not match the estimate");
  Matrix row(1, est.location.size());
  for (std::size_t i = 0; i < point.size(); ++i) row(0, static_cast<Eigen::Index>(i)) = point[i];
  return robust_distances_sq(est, row)(0);
}

Vector robust_distances_sq(const RobustEstimate& est, const Matrix& points) {
  return robust_distances_sq(est, points, est.location);
}

Vector robust_distances_sq(const RobustEstimate& est, const Matrix& points, const Vector& center) {
  if (points.cols() != est.location.size() || center.size() != est.location.size())
    throw ArgumentError("point dimension does not match the estimate");
  return mahalanobis_sq(points, center, factor_scatter(est));
}

}  // namespace mcode
