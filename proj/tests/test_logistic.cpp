#include <doctest.h>

#include <cmath>
#include <random>

#include "mcode/errors.hpp"
#include "mcode/logistic.hpp"
#include "oracles.hpp"

using namespace mcode;

namespace {

struct Problem {
  Matrix x;
  std::vector<std::uint8_t> y;
};

Problem make_problem(std::size_t n, std::size_t p, std::uint64_t seed, double noise = 1.0) {
  Rng rng = make_rng(Seed{seed});
  std::normal_distribution<double> g(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Problem pr;
  pr.x.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(p));
  Vector w(static_cast<Eigen::Index>(p));
  for (Eigen::Index j = 0; j < w.size(); ++j) w(j) = g(rng);
  for (Eigen::Index i = 0; i < pr.x.rows(); ++i)
    for (Eigen::Index j = 0; j < pr.x.cols(); ++j) pr.x(i, j) = g(rng);
  for (Eigen::Index i = 0; i < pr.x.rows(); ++i) {
    const double z = pr.x.row(i).dot(w) / noise + 0.3;
    pr.y.push_back(u(rng) < 1.0 / (1.0 + std::exp(-z)) ? 1 : 0);
  }
  return pr;
}

double objective_at(const Problem& pr, double lambda, const Eigen::VectorXd& theta) {
  const Eigen::Index p = theta.size() - 1;
  return logistic_objective(pr.x, pr.y, lambda, theta.head(p), theta(p));
}

}  // namespace

TEST_CASE("predict_proba closed forms") {
  LogisticModel m;
  m.weights = Vector::Zero(2);
  const std::vector<double> x{0.3, -0.7};
  CHECK(predict_proba(m, x) == 0.5);
  m.intercept = std::log(3.0);
  CHECK(predict_proba(m, x) == doctest::Approx(0.75).epsilon(1e-15));
  m.weights << 0.4, 1.1;
  m.intercept = -0.2;
  LogisticModel neg = m;
  neg.weights = -m.weights;
  neg.intercept = -m.intercept;
  CHECK(predict_proba(m, x) == doctest::Approx(1.0 - predict_proba(neg, x)).epsilon(1e-15));
  CHECK_THROWS_AS(predict_proba(m, std::vector<double>{1.0}), ArgumentError);
  m.intercept = 100.0;
  CHECK(predict_proba(m, x) == 1.0 - kDefaultClip);
}

TEST_CASE("analytic gradient matches central differences") {
  const Problem pr = make_problem(60, 5, 11);
  Rng rng = make_rng(Seed{12});
  std::normal_distribution<double> g(0.0, 1.0);
  for (int trial = 0; trial < 10; ++trial) {
    Eigen::VectorXd theta(6);
    for (Eigen::Index i = 0; i < 6; ++i) theta(i) = g(rng);
    const double lambda = 0.1 * (trial + 1);
    const Vector analytic = logistic_gradient(pr.x, pr.y, lambda, theta.head(5), theta(5));
    const Eigen::VectorXd fd =
        oracle::central_difference([&](const Eigen::VectorXd& t) { return objective_at(pr, lambda, t); }, theta);
    const double scale = std::max(1.0, analytic.lpNorm<Eigen::Infinity>());
    CHECK((analytic - fd).lpNorm<Eigen::Infinity>() / scale <= 1e-5);
  }
}

TEST_CASE("solver reaches the gradient tolerance with a monotone objective") {
  for (auto [n, p] : {std::pair{80, 4}, std::pair{30, 90}}) {
    const Problem pr = make_problem(static_cast<std::size_t>(n), static_cast<std::size_t>(p), 21);
    LogisticOptions opts;
    opts.record_trace = true;
    SolverReport rep;
    const LogisticModel m = train_logistic(pr.x, pr.y, 0.1, opts, &rep);
    CHECK(rep.converged);
    CHECK(rep.gradient_max_norm <= 1e-6);
    for (std::size_t i = 1; i < rep.objective_trace.size(); ++i)
      CHECK(rep.objective_trace[i] <= rep.objective_trace[i - 1]);
    Eigen::VectorXd theta(p + 1);
    theta << m.weights, m.intercept;
    const Eigen::VectorXd fd =
        oracle::central_difference([&](const Eigen::VectorXd& t) { return objective_at(pr, 0.1, t); }, theta);
    CHECK(fd.lpNorm<Eigen::Infinity>() <= 1e-5);
  }
}

TEST_CASE("Gram-accelerated path matches the primal path") {
  const Problem pr = make_problem(25, 60, 31);
  const LogisticModel plain = train_logistic(pr.x, pr.y, 0.5);
  const Matrix gram = pr.x * pr.x.transpose();
  TrainContext ctx;
  ctx.gram = &gram;
  const LogisticModel fast = train_logistic(pr.x, pr.y, 0.5, {}, nullptr, ctx);
  CHECK((plain.weights - fast.weights).lpNorm<Eigen::Infinity>() <= 1e-5);
  CHECK(plain.intercept == doctest::Approx(fast.intercept).epsilon(1e-5));
}

TEST_CASE("degenerate and heavily penalized targets") {
  const Problem pr = make_problem(40, 3, 41);
  std::vector<std::uint8_t> ones(40, 1);
  SolverReport rep;
  const LogisticModel m = train_logistic(pr.x, ones, 1.0, {}, &rep);
  CHECK(rep.degenerate);
  CHECK(m.weights.isZero());
  CHECK(predict_proba(m, std::vector<double>{1, 2, 3}) == doctest::Approx(41.0 / 42.0).epsilon(1e-14));

  const LogisticModel heavy = train_logistic(pr.x, pr.y, 1e6);
  CHECK(heavy.weights.norm() <= 1e-3);
  const double base = static_cast<double>(std::count(pr.y.begin(), pr.y.end(), 1)) / 40.0;
  CHECK(std::fabs(predict_proba(heavy, std::vector<double>{0.5, -1.0, 2.0}) - base) <= 1e-3);
}

TEST_CASE("non-finite inputs are rejected") {
  Problem pr = make_problem(10, 2, 51);
  pr.x(3, 1) = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(train_logistic(pr.x, pr.y, 1.0), Error);
}

TEST_CASE("lambda selection") {
  const Problem pr = make_problem(120, 6, 61, 0.7);
  const std::vector<double> one{0.25};
  CHECK(select_lambda(pr.x, pr.y, one, 5, Seed{1}).lambda == 0.25);

  const std::vector<double> grid{1e-3, 1e-2, 1e-1, 1.0, 10.0, 100.0};
  const LambdaSelection sel = select_lambda(pr.x, pr.y, grid, 5, Seed{2});
  REQUIRE(sel.scores.size() == grid.size());
  for (double s : sel.scores) CHECK(s <= sel.scores[static_cast<std::size_t>(std::find(grid.begin(), grid.end(), sel.lambda) - grid.begin())]);

  // Equal scores: every lambda sees constant features, so the larger one wins.
  Matrix flat = Matrix::Zero(40, 2);
  std::vector<std::uint8_t> y(40);
  for (std::size_t i = 0; i < 40; ++i) y[i] = i % 3 == 0;
  const std::vector<double> pair{0.5, 2.0};
  const LambdaSelection tie = select_lambda(flat, y, pair, 5, Seed{3});
  CHECK(tie.scores[0] == doctest::Approx(tie.scores[1]).epsilon(1e-12));
  CHECK(tie.lambda == 2.0);

  const Problem tiny = make_problem(8, 2, 71);
  CHECK(select_lambda(tiny.x, tiny.y, grid, 5, Seed{4}).lambda == 1.0);
}
