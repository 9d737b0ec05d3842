#include "mcode/logistic.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include <Eigen/Cholesky>

#include "mcode/errors.hpp"

namespace mcode {

namespace {

double softplus(double z) { return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

Vector to_vector(std::span<const std::uint8_t> y) {
  Vector v(static_cast<Eigen::Index>(y.size()));
  for (std::size_t i = 0; i < y.size(); ++i) v(static_cast<Eigen::Index>(i)) = y[i];
  return v;
}

// Data term (1/n) sum softplus(z) - y z.
double data_loss(const Vector& z, const Vector& yv) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < z.size(); ++i) s += softplus(z(i)) - yv(i) * z(i);
  return s / static_cast<double>(z.size());
}

void check_inputs(const Matrix& X, std::span<const std::uint8_t> y) {
  if (X.rows() < 1) throw ArgumentError("logistic regression needs at least one row");
  if (static_cast<std::size_t>(X.rows()) != y.size()) throw ArgumentError("design and target lengths differ");
  if (!X.allFinite()) throw ArgumentError("design matrix contains non-finite values");
  for (auto v : y)
    if (v > 1) throw ArgumentError("targets must be 0 or 1");
}

LogisticModel constant_model(std::size_t dim, std::size_t positives, std::size_t n, double lambda) {
  const double rate = (static_cast<double>(positives) + 1.0) / (static_cast<double>(n) + 2.0);
  LogisticModel model;
  model.weights = Vector::Zero(static_cast<Eigen::Index>(dim));
  model.intercept = std::log(rate / (1.0 - rate));
  model.lambda = lambda;
  return model;
}

// Newton direction for H [dw; db] = [gw; gb].
struct NewtonStep {
  Vector dw;
  double db = 0.0;
};

NewtonStep primal_step(const Matrix& X, const Vector& curv, double lambda, const Vector& gw, double gb) {
  const Eigen::Index p = X.cols();
  const double inv_n = 1.0 / static_cast<double>(X.rows());
  Eigen::MatrixXd H(p + 1, p + 1);
  const Matrix weighted = curv.asDiagonal() * X;
  H.topLeftCorner(p, p).noalias() = inv_n * (X.transpose() * weighted);
  H.topLeftCorner(p, p).diagonal().array() += lambda;
  const Vector col = inv_n * weighted.colwise().sum().transpose();
  H.topRightCorner(p, 1) = col;
  H.bottomLeftCorner(1, p) = col.transpose();
  H(p, p) = inv_n * curv.sum();
  Vector rhs(p + 1);
  rhs.head(p) = gw;
  rhs(p) = gb;
  Eigen::LDLT<Eigen::MatrixXd> ldlt(H);
  Vector sol = ldlt.solve(rhs);
  if (ldlt.info() != Eigen::Success || !sol.allFinite()) {
    H.diagonal().array() += 1e-10 * std::max(1.0, H.diagonal().maxCoeff());
    sol = H.ldlt().solve(rhs);
  }
  return {sol.head(p), sol(p)};
}

// Woodbury form for inputs outnumbering rows: the weight block
// A = lambda I + (1/n) X^T D X is inverted through an n x n system.
NewtonStep dual_step(const Matrix& X, const Eigen::MatrixXd& gram, const Vector& curv, double lambda, const Vector& gw,
                     double gb) {
  const double inv_n = 1.0 / static_cast<double>(X.rows());
  const Vector s = (curv * inv_n).cwiseSqrt();
  Eigen::MatrixXd M = s.asDiagonal() * gram * s.asDiagonal();
  M.diagonal().array() += lambda;
  const Eigen::LLT<Eigen::MatrixXd> llt(M);
  if (llt.info() != Eigen::Success) throw NumericError("Newton system is not positive definite");

  auto apply_inverse = [&](const Vector& v) -> Vector {
    Vector t = s.cwiseProduct(X * v);
    t = llt.solve(t);
    return (v - X.transpose() * s.cwiseProduct(t)) / lambda;
  };

  const Vector u = X.transpose() * (curv * inv_n);
  const Vector a_g = apply_inverse(gw);
  const Vector a_u = apply_inverse(u);
  const double schur = inv_n * curv.sum() - u.dot(a_u);
  NewtonStep step;
  step.db = schur > 1e-300 ? (gb - u.dot(a_g)) / schur : 0.0;
  step.dw = a_g - a_u * step.db;
  return step;
}

}  // namespace

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double logistic_objective(const Matrix& X, std::span<const std::uint8_t> y, double lambda, const Vector& weights,
                          double intercept) {
  const Vector z = (X * weights).array() + intercept;
  return data_loss(z, to_vector(y)) + 0.5 * lambda * weights.squaredNorm();
}

Vector logistic_gradient(const Matrix& X, std::span<const std::uint8_t> y, double lambda, const Vector& weights,
                         double intercept) {
  const Vector z = (X * weights).array() + intercept;
  const Vector yv = to_vector(y);
  Vector r(z.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) r(i) = sigmoid(z(i)) - yv(i);
  const double inv_n = 1.0 / static_cast<double>(X.rows());
  Vector g(X.cols() + 1);
  g.head(X.cols()) = inv_n * (X.transpose() * r) + lambda * weights;
  g(X.cols()) = inv_n * r.sum();
  return g;
}

LogisticModel train_logistic(const Matrix& X, std::span<const std::uint8_t> y, double lambda,
                             const LogisticOptions& options, SolverReport* report, const TrainContext& context) {
  check_inputs(X, y);
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw ArgumentError("lambda must be a finite nonnegative number");
  const auto n = static_cast<std::size_t>(X.rows());
  const auto p = static_cast<std::size_t>(X.cols());
  SolverReport local;
  SolverReport& rep = report ? *report : local;
  rep = SolverReport{};

  const auto positives = static_cast<std::size_t>(std::count(y.begin(), y.end(), std::uint8_t{1}));
  if (positives == 0 || positives == n) {
    rep.degenerate = true;
    rep.converged = true;
    return constant_model(p, positives, n, lambda);
  }

  const Vector yv = to_vector(y);
  Vector w = Vector::Zero(static_cast<Eigen::Index>(p));
  double b = 0.0;
  if (context.warm_start && context.warm_start->input_dim() == p && context.warm_start->weights.allFinite()) {
    w = context.warm_start->weights;
    b = context.warm_start->intercept;
  } else {
    const double rate = static_cast<double>(positives) / static_cast<double>(n);
    b = std::log(rate / (1.0 - rate));
  }

  const bool use_dual = p > n && lambda > 0.0;
  Eigen::MatrixXd gram_local;
  const Eigen::MatrixXd* gram = nullptr;
  if (use_dual) {
    if (context.gram && context.gram->rows() == X.rows() && context.gram->cols() == X.rows()) {
      gram_local = *context.gram;
    } else {
      gram_local = X * X.transpose();
    }
    gram = &gram_local;
  }

  const double inv_n = 1.0 / static_cast<double>(n);
  Vector z = (X * w).array() + b;
  double f = data_loss(z, yv) + 0.5 * lambda * w.squaredNorm();
  if (!std::isfinite(f)) throw NumericError("non-finite initial logistic objective");
  if (options.record_trace) rep.objective_trace.push_back(f);

  Vector prob(static_cast<Eigen::Index>(n));
  Vector curv(static_cast<Eigen::Index>(n));
  for (int it = 0;; ++it) {
    for (Eigen::Index i = 0; i < z.size(); ++i) {
      prob(i) = sigmoid(z(i));
      curv(i) = prob(i) * (1.0 - prob(i));
    }
    const Vector resid = prob - yv;
    const Vector gw = inv_n * (X.transpose() * resid) + lambda * w;
    const double gb = inv_n * resid.sum();
    const double gmax = std::max(gw.size() ? gw.cwiseAbs().maxCoeff() : 0.0, std::abs(gb));
    rep.iterations = it;
    rep.gradient_max_norm = gmax;
    rep.objective = f;
    if (!std::isfinite(gmax)) {
      std::ostringstream msg;
      msg << "non-finite gradient at iteration " << it << " (objective " << f << ", lambda " << lambda << ")";
      throw NumericError(msg.str());
    }
    if (gmax <= options.gradient_tolerance) {
      rep.converged = true;
      break;
    }
    if (it >= options.max_iterations) break;

    const NewtonStep step = use_dual ? dual_step(X, *gram, curv, lambda, gw, gb) : primal_step(X, curv, lambda, gw, gb);
    if (!step.dw.allFinite() || !std::isfinite(step.db)) {
      std::ostringstream msg;
      msg << "non-finite Newton direction at iteration " << it << " (objective " << f << ", lambda " << lambda << ")";
      throw NumericError(msg.str());
    }
    double slope = gw.dot(step.dw) + gb * step.db;
    Vector dir_w = step.dw;
    double dir_b = step.db;
    if (!(slope > 0.0)) {
      // Not a descent direction (numerically singular Hessian): fall back to the gradient.
      dir_w = gw;
      dir_b = gb;
      slope = gw.squaredNorm() + gb * gb;
    }
    const Vector dz = (X * dir_w).array() + dir_b;
    double t = 1.0;
    bool accepted = false;
    Vector z_try(z.size());
    double f_try = f;
    for (int k = 0; k < 60; ++k) {
      z_try = z - t * dz;
      const Vector w_try = w - t * dir_w;
      f_try = data_loss(z_try, yv) + 0.5 * lambda * w_try.squaredNorm();
      if (std::isfinite(f_try) && f_try <= f - 1e-4 * t * slope) {
        accepted = true;
        break;
      }
      t *= 0.5;
    }
    if (!accepted) break;  // objective cannot decrease further at double precision
    w -= t * dir_w;
    b -= t * dir_b;
    z = z_try;
    f = f_try;
    if (options.record_trace) rep.objective_trace.push_back(f);
  }

  LogisticModel model;
  model.weights = std::move(w);
  model.intercept = b;
  model.lambda = lambda;
  return model;
}

double predict_proba(const LogisticModel& model, std::span<const double> x, double clip) {
  if (x.size() != model.input_dim())
    throw ArgumentError("input has " + std::to_string(x.size()) + " entries, model expects " +
                        std::to_string(model.input_dim()));
  const Eigen::Map<const Vector> xv(x.data(), static_cast<Eigen::Index>(x.size()));
  const double p = sigmoid(model.weights.dot(xv) + model.intercept);
  return std::clamp(p, clip, 1.0 - clip);
}

LambdaSelection select_lambda(const Matrix& X, std::span<const std::uint8_t> y, std::span<const double> grid,
                              std::size_t folds, Seed seed, const LogisticOptions& options, const Matrix* gram) {
  if (grid.empty()) throw ArgumentError("lambda grid is empty");
  LambdaSelection sel;
  sel.grid.assign(grid.begin(), grid.end());
  if (grid.size() == 1) {
    sel.lambda = grid.front();
    return sel;
  }
  const auto n = static_cast<std::size_t>(X.rows());
  if (n < 10 || folds < 2 || folds > n) {
    sel.lambda = 1.0;
    return sel;
  }
  check_inputs(X, y);

  // Visit the grid from the largest lambda down so each fit warm-starts from
  // a more strongly regularized solution.
  std::vector<std::size_t> order(grid.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return grid[a] > grid[b]; });

  sel.scores.assign(grid.size(), 0.0);
  const FoldPlan plan = make_fold_plan(n, folds, 1, seed);
  for (std::size_t f = 0; f < folds; ++f) {
    const auto train_idx = plan.train_indices(0, f);
    const auto test_idx = plan.test_indices(0, f);
    Matrix Xtr(static_cast<Eigen::Index>(train_idx.size()), X.cols());
    std::vector<std::uint8_t> ytr(train_idx.size());
    for (std::size_t r = 0; r < train_idx.size(); ++r) {
      Xtr.row(static_cast<Eigen::Index>(r)) = X.row(static_cast<Eigen::Index>(train_idx[r]));
      ytr[r] = y[train_idx[r]];
    }
    Matrix Ktr;
    TrainContext ctx;
    if (gram && X.cols() > static_cast<Eigen::Index>(train_idx.size())) {
      Ktr.resize(static_cast<Eigen::Index>(train_idx.size()), static_cast<Eigen::Index>(train_idx.size()));
      for (std::size_t a = 0; a < train_idx.size(); ++a)
        for (std::size_t c = 0; c < train_idx.size(); ++c)
          Ktr(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(c)) =
              (*gram)(static_cast<Eigen::Index>(train_idx[a]), static_cast<Eigen::Index>(train_idx[c]));
      ctx.gram = &Ktr;
    }
    LogisticModel previous;
    bool have_previous = false;
    for (std::size_t gi : order) {
      if (have_previous) ctx.warm_start = &previous;
      LogisticModel model = train_logistic(Xtr, ytr, grid[gi], options, nullptr, ctx);
      double ll = 0.0;
      for (std::size_t idx : test_idx) {
        const auto row = X.row(static_cast<Eigen::Index>(idx));
        const double prob = predict_proba(model, std::span<const double>(row.data(), static_cast<std::size_t>(row.size())));
        ll += y[idx] ? std::log(prob) : std::log(1.0 - prob);
      }
      sel.scores[gi] += ll / static_cast<double>(test_idx.size()) / static_cast<double>(folds);
      previous = std::move(model);
      have_previous = true;
    }
  }
  // Ties go to the larger lambda: scan from largest, replace only on strict improvement.
  std::size_t best = order.front();
  for (std::size_t gi : order)
    if (sel.scores[gi] > sel.scores[best]) best = gi;
  sel.lambda = grid[best];
  return sel;
}

}  // namespace mcode
