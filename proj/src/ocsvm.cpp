#include "mcode/ocsvm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "mcode/errors.hpp"
#include "mcode/lof.hpp"
#include "parallel.hpp"

namespace mcode {

namespace {

constexpr double kTau = 1e-12;

double squared_distance(const double* a, const double* b, std::size_t dim) {
  double s = 0.0;
  for (std::size_t i = 0; i < dim; ++i) {
    const double diff = a[i] - b[i];
    s += diff * diff;
  }
  return s;
}

double median_of(std::vector<double>& v) {
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  const double upper = v[mid];
  if (v.size() % 2 == 1) return upper;
  const double lower = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lower + upper);
}

// Kernel columns, either precomputed or evaluated on demand.
class KernelSource {
 public:
  KernelSource(const Matrix& points, double gamma, bool full) : points_(points), gamma_(gamma), full_(full) {
    const Eigen::Index n = points.rows();
    if (full_) {
      q_.resize(n, n);
      for (Eigen::Index i = 0; i < n; ++i) {
        q_(i, i) = 1.0;
        for (Eigen::Index j = 0; j < i; ++j) {
          const double v = std::exp(-gamma_ * squared_distance(points.row(i).data(), points.row(j).data(),
                                                              static_cast<std::size_t>(points.cols())));
          q_(i, j) = v;
          q_(j, i) = v;
        }
      }
    }
  }

  void column(Eigen::Index i, Vector& out) const {
    if (full_) {
      out = q_.col(i);
      return;
    }
    const Eigen::Index n = points_.rows();
    out.resize(n);
    for (Eigen::Index j = 0; j < n; ++j)
      out(j) = j == i ? 1.0
                      : std::exp(-gamma_ * squared_distance(points_.row(i).data(), points_.row(j).data(),
                                                            static_cast<std::size_t>(points_.cols())));
  }

 private:
  const Matrix& points_;
  double gamma_;
  bool full_;
  Eigen::MatrixXd q_;
};

}  // namespace

double rbf_kernel(std::span<const double> a, std::span<const double> b, double gamma) {
  if (a.size() != b.size()) throw ArgumentError("kernel arguments differ in dimension");
  return std::exp(-gamma * squared_distance(a.data(), b.data(), a.size()));
}

double median_heuristic_gamma(const Matrix& points, Seed seed, std::size_t sample) {
  const std::size_t n = static_cast<std::size_t>(points.rows());
  if (n < 2) return 1.0;
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  if (n > sample) {
    std::vector<std::size_t> chosen;
    Rng rng = make_rng(seed);
    std::sample(idx.begin(), idx.end(), std::back_inserter(chosen), sample, rng);
    idx = std::move(chosen);
  }
  const std::size_t dim = static_cast<std::size_t>(points.cols());
  std::vector<double> dist;
  dist.reserve(idx.size() * (idx.size() - 1) / 2);
  for (std::size_t a = 0; a < idx.size(); ++a)
    for (std::size_t b = a + 1; b < idx.size(); ++b)
      dist.push_back(euclidean_distance(points.row(static_cast<Eigen::Index>(idx[a])).data(),
                                        points.row(static_cast<Eigen::Index>(idx[b])).data(), dim));
  double med = median_of(dist);
  if (med <= 0.0) {
    std::vector<double> nonzero;
    std::copy_if(dist.begin(), dist.end(), std::back_inserter(nonzero), [](double v) { return v > 0.0; });
    if (nonzero.empty()) return 1.0;
    med = median_of(nonzero);
  }
  return 1.0 / (2.0 * med * med);
}

OcsvmModel train_ocsvm(const Matrix& points, const OcsvmOptions& options, OcsvmDiagnostics* diagnostics) {
  const std::size_t n = static_cast<std::size_t>(points.rows());
  if (n < 2) throw ArgumentError("one-class SVM needs at least 2 training points");
  if (!(options.nu > 0.0 && options.nu <= 1.0)) throw ArgumentError("nu must lie in (0, 1]");
  if (!points.allFinite()) throw ArgumentError("one-class SVM input contains non-finite values");
  const double gamma = options.gamma > 0.0 ? options.gamma : median_heuristic_gamma(points, options.seed);
  const double upper = 1.0 / (options.nu * static_cast<double>(n));
  const KernelSource kernel(points, gamma, n <= options.full_kernel_limit);

  // Fill the first points to the bound, then the remainder.
  Vector alpha = Vector::Zero(static_cast<Eigen::Index>(n));
  double left = 1.0;
  for (std::size_t i = 0; i < n && left > 0.0; ++i) {
    const double a = std::min(upper, left);
    alpha(static_cast<Eigen::Index>(i)) = a;
    left -= a;
  }
  Vector grad = Vector::Zero(static_cast<Eigen::Index>(n));
  Vector col;
  for (Eigen::Index i = 0; i < alpha.size(); ++i) {
    if (alpha(i) == 0.0) continue;
    kernel.column(i, col);
    grad.noalias() += alpha(i) * col;
  }

  auto at_upper = [&](Eigen::Index i) { return alpha(i) >= upper; };
  auto at_lower = [&](Eigen::Index i) { return alpha(i) <= 0.0; };
  const std::size_t cap = options.max_iterations > 0 ? options.max_iterations : 100 * n;
  std::vector<double> trace;
  if (options.record_trace) trace.push_back(0.5 * alpha.dot(grad));

  std::size_t iter = 0;
  double violation = 0.0;
  Vector qi;
  Vector qj;
  for (;;) {
    Eigen::Index i = -1;
    Eigen::Index j = -1;
    double gmin = std::numeric_limits<double>::infinity();
    double gmax = -std::numeric_limits<double>::infinity();
    for (Eigen::Index t = 0; t < alpha.size(); ++t) {
      if (!at_upper(t) && grad(t) < gmin) {
        gmin = grad(t);
        i = t;
      }
      if (!at_lower(t) && grad(t) > gmax) {
        gmax = grad(t);
        j = t;
      }
    }
    violation = (i < 0 || j < 0) ? 0.0 : gmax - gmin;
    if (violation <= options.tolerance) break;
    if (iter >= cap)
      throw ConvergenceError("one-class SVM hit the iteration cap of " + std::to_string(cap) + " updates", violation);
    kernel.column(i, qi);
    kernel.column(j, qj);
    const double curvature = std::max(qi(i) + qj(j) - 2.0 * qi(j), kTau);
    double delta = (grad(j) - grad(i)) / curvature;
    delta = std::min({delta, upper - alpha(i), alpha(j)});
    alpha(i) += delta;
    alpha(j) -= delta;
    if (upper - alpha(i) < 1e-15 * upper) alpha(i) = upper;
    if (alpha(j) < 1e-15 * upper) alpha(j) = 0.0;
    grad.noalias() += delta * (qi - qj);
    ++iter;
    if (options.record_trace) trace.push_back(0.5 * alpha.dot(grad));
  }

  double free_sum = 0.0;
  std::size_t free_count = 0;
  double lb = -std::numeric_limits<double>::infinity();
  double ub = std::numeric_limits<double>::infinity();
  for (Eigen::Index t = 0; t < alpha.size(); ++t) {
    if (at_upper(t))
      lb = std::max(lb, grad(t));
    else if (at_lower(t))
      ub = std::min(ub, grad(t));
    else {
      free_sum += grad(t);
      ++free_count;
    }
  }
  double offset;
  if (free_count > 0)
    offset = free_sum / static_cast<double>(free_count);
  else if (std::isfinite(lb) && std::isfinite(ub))
    offset = 0.5 * (lb + ub);
  else
    offset = std::isfinite(lb) ? lb : ub;

  OcsvmModel model;
  model.gamma = gamma;
  model.nu = options.nu;
  model.offset = offset;
  model.train_size = n;
  std::vector<Eigen::Index> sv;
  for (Eigen::Index t = 0; t < alpha.size(); ++t)
    if (alpha(t) > 0.0) sv.push_back(t);
  model.support_points.resize(static_cast<Eigen::Index>(sv.size()), points.cols());
  model.alphas.resize(static_cast<Eigen::Index>(sv.size()));
  for (std::size_t s = 0; s < sv.size(); ++s) {
    model.support_points.row(static_cast<Eigen::Index>(s)) = points.row(sv[s]);
    model.alphas(static_cast<Eigen::Index>(s)) = alpha(sv[s]);
  }

  if (diagnostics) {
    diagnostics->iterations = iter;
    diagnostics->max_violation = violation;
    diagnostics->dual_objective = 0.5 * alpha.dot(grad);
    diagnostics->support_count = sv.size();
    diagnostics->free_count = free_count;
    diagnostics->alphas = alpha;
    diagnostics->gradient = grad;
    diagnostics->objective_trace = std::move(trace);
  }
  return model;
}

double ocsvm_decision(const OcsvmModel& model, std::span<const double> point) {
  if (static_cast<Eigen::Index>(point.size()) != model.support_points.cols())
    throw ArgumentError("point dimension does not match the one-class SVM");
  double s = 0.0;
  for (Eigen::Index j = 0; j < model.support_points.rows(); ++j)
    s += model.alphas(j) *
         std::exp(-model.gamma * squared_distance(model.support_points.row(j).data(), point.data(), point.size()));
  return s - model.offset;
}

Vector ocsvm_decisions(const OcsvmModel& model, const Matrix& points, std::size_t threads) {
  if (points.cols() != model.support_points.cols())
    throw ArgumentError("point dimension does not match the one-class SVM");
  Vector out(points.rows());
  detail::parallel_for(static_cast<std::size_t>(points.rows()), threads, [&](std::size_t r) {
    const auto row = static_cast<Eigen::Index>(r);
    out(row) = ocsvm_decision(model, {points.row(row).data(), static_cast<std::size_t>(points.cols())});
  });
  return out;
}

}  // namespace mcode
