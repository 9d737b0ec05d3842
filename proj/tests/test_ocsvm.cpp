#include <doctest.h>

#include <random>

#include "mcode/errors.hpp"
#include "mcode/ocsvm.hpp"
#include "oracles.hpp"

using namespace mcode;

namespace {

Matrix gaussian(std::size_t n, std::size_t d, std::uint64_t seed) {
  Rng rng = make_rng(Seed{seed});
  std::normal_distribution<double> g(0.0, 1.0);
  Matrix x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  for (Eigen::Index i = 0; i < x.rows(); ++i)
    for (Eigen::Index j = 0; j < x.cols(); ++j) x(i, j) = g(rng);
  return x;
}

double dual(const Eigen::MatrixXd& q, const Eigen::VectorXd& a) { return 0.5 * a.dot(q * a); }

}  // namespace

TEST_CASE("dual objective matches the projected-gradient reference") {
  for (std::uint64_t seed = 1; seed <= 6; ++seed) {
    for (std::size_t n : {6u, 10u}) {
      const Matrix x = gaussian(n, 2, seed * 10 + n);
      OcsvmOptions opts;
      opts.nu = 0.3;
      opts.gamma = 0.5;
      OcsvmDiagnostics diag;
      const OcsvmModel model = train_ocsvm(x, opts, &diag);
      const Eigen::MatrixXd q = oracle::rbf_gram(x, 0.5);
      const Eigen::VectorXd ref = oracle::ocsvm_reference(q, 1.0 / (0.3 * static_cast<double>(n)));
      const double want = dual(q, ref);
      CHECK(std::fabs(diag.dual_objective - want) <= 1e-4 * want);
      CHECK(std::fabs(dual(q, diag.alphas) - diag.dual_objective) <= 1e-12);
      // Decision values agree with the reference solution's.
      for (Eigen::Index i = 0; i < x.rows(); ++i) {
        const std::vector<double> p(x.row(i).data(), x.row(i).data() + 2);
        const double ref_dec = (q.row(i) * ref)(0) - model.offset;
        CHECK(std::fabs(ocsvm_decision(model, p) - ref_dec) <= 1e-3);
      }
    }
  }
}

TEST_CASE("KKT conditions at convergence") {
  const Matrix x = gaussian(300, 3, 21);
  OcsvmOptions opts;
  opts.nu = 0.1;
  opts.record_trace = true;
  OcsvmDiagnostics diag;
  const OcsvmModel model = train_ocsvm(x, opts, &diag);
  const double upper = 1.0 / (0.1 * 300.0);
  CHECK(diag.alphas.sum() == doctest::Approx(1.0).epsilon(1e-8));
  CHECK(diag.alphas.minCoeff() >= 0.0);
  CHECK(diag.alphas.maxCoeff() <= upper);
  CHECK(diag.max_violation <= 1e-3);
  for (Eigen::Index i = 0; i < diag.alphas.size(); ++i) {
    const double dec = diag.gradient(i) - model.offset;
    if (diag.alphas(i) > 0.0 && diag.alphas(i) < upper) CHECK(std::fabs(dec) <= 1e-3);
    if (diag.alphas(i) == 0.0) CHECK(dec >= -1e-3);
    if (diag.alphas(i) == upper) CHECK(dec <= 1e-3);
  }
  for (std::size_t i = 1; i < diag.objective_trace.size(); ++i)
    CHECK(diag.objective_trace[i] <= diag.objective_trace[i - 1] + 1e-15);
}

TEST_CASE("nu property on random training sets") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const std::size_t n = 200;
    const Matrix x = gaussian(n, 2, 100 + seed);
    for (double nu : {0.05, 0.2}) {
      OcsvmOptions opts;
      opts.nu = nu;
      OcsvmDiagnostics diag;
      const OcsvmModel model = train_ocsvm(x, opts, &diag);
      const Vector dec = ocsvm_decisions(model, x);
      const double outside = static_cast<double>((dec.array() < 0.0).count()) / n;
      const double svs = static_cast<double>(diag.support_count) / n;
      CHECK(outside <= nu + 2.0 / n);
      CHECK(svs >= nu - 2.0 / n);
    }
  }
}

TEST_CASE("decision closed forms") {
  OcsvmModel m;
  m.support_points = Matrix(1, 2);
  m.support_points << 0.3, -0.4;
  m.alphas = Vector::Ones(1);
  m.offset = 0.25;
  m.gamma = 2.0;
  CHECK(ocsvm_decision(m, std::vector<double>{0.3, -0.4}) == doctest::Approx(0.75));
  m.gamma = 1e6;
  CHECK(ocsvm_decision(m, std::vector<double>{5.0, 5.0}) == -0.25);
  CHECK_THROWS_AS(ocsvm_decision(m, std::vector<double>{1.0}), ArgumentError);
}

TEST_CASE("median heuristic and errors") {
  Matrix x(3, 1);
  x << 0.0, 1.0, 3.0;
  CHECK(median_heuristic_gamma(x, Seed{1}) == doctest::Approx(0.5 / 4.0));
  Matrix same = Matrix::Zero(5, 2);
  CHECK(median_heuristic_gamma(same, Seed{1}) == 1.0);
  Matrix mostly = Matrix::Zero(5, 1);
  mostly(4, 0) = 2.0;
  CHECK(median_heuristic_gamma(mostly, Seed{1}) == doctest::Approx(1.0 / 8.0));

  CHECK_THROWS_AS(train_ocsvm(gaussian(1, 2, 1)), ArgumentError);
  OcsvmOptions bad;
  bad.nu = 0.0;
  CHECK_THROWS_AS(train_ocsvm(gaussian(10, 2, 1), bad), ArgumentError);
  OcsvmOptions capped;
  capped.nu = 0.05;
  capped.max_iterations = 1;
  capped.tolerance = 1e-12;
  try {
    train_ocsvm(gaussian(100, 2, 3), capped);
    FAIL("expected a convergence error");
  } catch (const ConvergenceError& e) {
    CHECK(e.final_violation() > 1e-12);
  }
}

TEST_CASE("on-demand kernel columns match the full kernel") {
  const Matrix x = gaussian(120, 3, 44);
  OcsvmOptions a;
  a.nu = 0.1;
  OcsvmOptions b = a;
  b.full_kernel_limit = 10;
  OcsvmDiagnostics da;
  OcsvmDiagnostics db;
  train_ocsvm(x, a, &da);
  train_ocsvm(x, b, &db);
  CHECK(da.iterations == db.iterations);
  CHECK((da.alphas - db.alphas).cwiseAbs().maxCoeff() <= 1e-12);
}
