#include <doctest.h>

#include <cmath>
#include <random>

#include "mcode/errors.hpp"
#include "mcode/eval.hpp"
#include "mcode/injector.hpp"
#include "mcode/lof.hpp"
#include "mcode/ocsvm.hpp"
#include "mcode/scoring.hpp"
#include "oracles.hpp"

using namespace mcode;

namespace {

RhoMatrix rho_of(const Matrix& values) {
  RhoMatrix r;
  r.values = values;
  return r;
}

Matrix cloud(std::size_t n, std::size_t d, double center, double spread, std::uint64_t seed) {
  Rng rng = make_rng(Seed{seed});
  std::normal_distribution<double> g(0.0, spread);
  Matrix x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  for (Eigen::Index i = 0; i < x.rows(); ++i)
    for (Eigen::Index j = 0; j < x.cols(); ++j) x(i, j) = std::clamp(center + g(rng), 1e-6, 1.0 - 1e-6);
  return x;
}

}  // namespace

TEST_CASE("method names") {
  CHECK(all_methods().size() == 8);
  for (Method m : all_methods()) CHECK(parse_method(method_key(m)) == m);
  CHECK(display_name(Method::lr) == "MCODE-Linf");
  CHECK(display_name(Method::lr, 2.0) == "MCODE-L2");
  CHECK(display_name(Method::base_rd) == "RD");
  CHECK_THROWS_AS(parse_method("nope"), ArgumentError);
}

TEST_CASE("ComP closed forms") {
  Matrix v(3, 2);
  v << 0.5, 0.5, 1.0 - 1e-6, 1.0 - 1e-6, 0.9, 0.2;
  const ScoreVector s = score_comp(rho_of(v));
  CHECK(s.values(0) == doctest::Approx(0.75).epsilon(1e-15));
  CHECK(s.values(1) == doctest::Approx(1.0 - std::pow(1.0 - 1e-6, 2)).epsilon(1e-9));
  CHECK(s.values(2) == doctest::Approx(1.0 - 0.18).epsilon(1e-15));
  Matrix single(1, 1);
  single << 1.0 - 1e-6;
  CHECK(score_comp(rho_of(single)).values(0) == doctest::Approx(1e-6).epsilon(1e-9));
}

TEST_CASE("ComP orders instances by decreasing pseudo-likelihood") {
  const Matrix v = cloud(40, 4, 0.8, 0.15, 3);
  const ScoreVector s = score_comp(rho_of(v));
  for (Eigen::Index a = 0; a < 40; ++a)
    for (Eigen::Index b = 0; b < 40; ++b) {
      const double pa = v.row(a).prod();
      const double pb = v.row(b).prod();
      if (pa < pb * (1 - 1e-12)) CHECK(s.values(a) > s.values(b));
    }
}

TEST_CASE("Lr norms") {
  Matrix v(1, 2);
  v << 0.2, 0.9;
  CHECK(score_lr(rho_of(v), INFINITY).values(0) == doctest::Approx(0.8));
  CHECK(score_lr(rho_of(v), 1.0).values(0) == doctest::Approx(0.9));
  CHECK(score_lr(rho_of(v), 2.0).values(0) == doctest::Approx(std::sqrt(0.65)));
  Matrix high = Matrix::Constant(1, 4, 1.0 - 1e-6);
  CHECK(score_lr(rho_of(high), 2.0).values(0) == doctest::Approx(1e-6 * 2.0).epsilon(1e-6));
  CHECK(score_lr(rho_of(high), INFINITY).values(0) == doctest::Approx(1e-6).epsilon(1e-6));
  CHECK_THROWS_AS(score_lr(rho_of(v), 3.0), ArgumentError);

  // Raising one coordinate of 1 - rho never lowers the infinity score.
  const Matrix c = cloud(30, 3, 0.7, 0.2, 5);
  const Vector base = score_lr(rho_of(c), INFINITY).values;
  Matrix lower = c;
  lower.col(1).array() *= 0.5;
  const Vector moved = score_lr(rho_of(lower), INFINITY).values;
  CHECK((moved.array() >= base.array()).all());
}

TEST_CASE("single label: ComP and Linf agree on ordering") {
  const Matrix v = cloud(50, 1, 0.7, 0.25, 6);
  const Vector a = percentile_rank(score_comp(rho_of(v))).ranks;
  const Vector b = percentile_rank(score_lr(rho_of(v), INFINITY)).ranks;
  CHECK((a - b).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("RD scores") {
  Matrix same = Matrix::Constant(50, 3, 0.9);
  CHECK(score_rd(rho_of(same)).values.maxCoeff() <= 1e-6);

  Matrix v = cloud(120, 3, 0.95, 0.01, 7);
  v.row(42) << 0.05, 0.95, 0.5;
  const ScoreVector s = score_rd(rho_of(v));
  Eigen::Index arg;
  s.values.maxCoeff(&arg);
  CHECK(arg == 42);
  CHECK(s.note.empty());

  // Reference: squared distance under the returned estimate computed by an explicit inverse.
  const RobustEstimate est = fast_mcd(v, Seed{0});
  const Eigen::MatrixXd inv = Eigen::MatrixXd(est.scatter).inverse();
  for (Eigen::Index r = 0; r < 120; r += 17) {
    const Eigen::VectorXd diff = v.row(r).transpose() - est.location;
    CHECK(s.values(r) == doctest::Approx(diff.dot(inv * diff)).epsilon(1e-8));
  }

  ScoreParams plain;
  plain.mcd_location = false;
  const ScoreVector m = score_rd(rho_of(v), plain);
  const Eigen::VectorXd diff = v.row(5).transpose() - v.colwise().mean().transpose();
  CHECK(m.values(5) == doctest::Approx(diff.dot(inv * diff)).epsilon(1e-8));

  // Permuting instances permutes the scores.
  Matrix rev = v.colwise().reverse();
  const ScoreVector r = score_rd(rho_of(rev));
  CHECK(r.values.reverse() == s.values);

  // Too few rows: per-dimension fallback.
  Matrix few = cloud(3, 5, 0.8, 0.1, 8);
  const ScoreVector f = score_rd(rho_of(few));
  CHECK(!f.note.empty());
  CHECK(f.values == diagonal_robust_distances(few));
}

TEST_CASE("LOF scores delegate to the detector") {
  const Matrix v = cloud(50, 3, 0.8, 0.1, 9);
  const auto want = oracle::lof(v, 30);
  const Vector got = score_lof(rho_of(v), 30).values;
  for (Eigen::Index i = 0; i < 50; ++i) CHECK(got(i) == want[static_cast<std::size_t>(i)]);
  CHECK((score_lof(rho_of(Matrix::Constant(40, 2, 0.9)), 30).values.array() == 1.0).all());
  CHECK_THROWS_AS(score_lof(rho_of(v), 50), ArgumentError);

  Matrix tight = cloud(60, 4, 1.0 - 1e-6, 1e-4, 10);
  tight.row(13).setConstant(1e-6);
  Eigen::Index arg;
  score_lof(rho_of(tight), 30).values.maxCoeff(&arg);
  CHECK(arg == 13);
}

TEST_CASE("OCSVM scores are negated decisions") {
  const Matrix train = cloud(200, 2, 0.8, 0.05, 11);
  Matrix test = cloud(20, 2, 0.5, 0.3, 12);
  test.row(0) = train.colwise().mean();
  test.row(1) << 0.0, 0.0;
  ScoreParams p;
  p.nu = 0.1;
  const ScoreVector s = score_ocsvm(rho_of(train), rho_of(test), p);
  OcsvmOptions opt;
  opt.nu = 0.1;
  opt.seed = p.seed;
  const OcsvmModel model = train_ocsvm(train, opt);
  for (Eigen::Index i = 0; i < 20; ++i) {
    const std::vector<double> pt(test.row(i).data(), test.row(i).data() + 2);
    CHECK(s.values(i) + ocsvm_decision(model, pt) == 0.0);
  }
  Eigen::Index arg;
  s.values.maxCoeff(&arg);
  CHECK(arg == 1);
  CHECK(s.values(1) == doctest::Approx(model.offset).epsilon(1e-6));
  CHECK(percentile_rank(s).ranks(0) <= 0.25);
}

TEST_CASE("joint-space baselines") {
  SyntheticSpec spec;
  spec.n = 200;
  spec.m = 3;
  spec.d = 2;
  const Dataset train = make_synthetic(spec, Seed{1});
  const Dataset test = make_synthetic(spec, Seed{2});
  ScoreParams p;
  p.standardize_joint = false;
  const ScoreVector lof = baseline_joint_scores(train, test, Method::base_lof, p);
  CHECK(lof.values == lof_scores(joint_space(test, nullptr), 30));
  const ScoreVector rd = baseline_joint_scores(train, test, Method::base_rd, p);
  CHECK(rd.values.allFinite());
  const ScoreVector svm = baseline_joint_scores(train, test, Method::base_ocsvm, p);
  CHECK(svm.values.size() == 200);
  CHECK_THROWS_AS(baseline_joint_scores(train, test, Method::lof, p), ArgumentError);

  const Standardizer st = Standardizer::fit(train.features());
  const Matrix joint = joint_space(test, &st);
  CHECK(joint.cols() == 5);
  CHECK(joint.rightCols(2) == test.labels().cast<double>());

  ScoreParams high;
  high.mcd_max_dim = 3;
  const ScoreVector diag = baseline_joint_scores(train, test, Method::base_rd, high);
  CHECK(!diag.note.empty());
}

TEST_CASE("baseline RD is near chance when labels are independent noise") {
  double total = 0.0;
  const int trials = 30;
  for (int t = 0; t < trials; ++t) {
    Rng rng = make_rng(Seed{static_cast<std::uint64_t>(500 + t)});
    std::normal_distribution<double> g(0.0, 1.0);
    std::bernoulli_distribution coin(0.3);
    auto make = [&](std::size_t n) {
      Matrix x(static_cast<Eigen::Index>(n), 4);
      LabelMatrix y(static_cast<Eigen::Index>(n), 5);
      for (Eigen::Index i = 0; i < x.rows(); ++i) {
        for (Eigen::Index j = 0; j < 4; ++j) x(i, j) = g(rng);
        for (Eigen::Index j = 0; j < 5; ++j) y(i, j) = coin(rng) ? 1 : 0;
      }
      return Dataset(x, y);
    };
    const Dataset train = make(200);
    const Dataset test = make(400);
    auto [noisy, rep] = inject_variable_noise(test, 0.02, Seed{static_cast<std::uint64_t>(t)});
    ScoreParams p;
    p.mcd.n_starts = 50;
    const ScoreVector s = baseline_joint_scores(train, noisy, Method::base_rd, p);
    total += roc_auc(std::span<const double>(s.values.data(), 400), rep.outlier_mask);
  }
  CHECK(std::fabs(total / trials - 0.5) <= 0.1);
}

TEST_CASE("percentile ranks") {
  Vector v(3);
  v << 3, 1, 2;
  const Vector r = percentile_rank(v).ranks;
  CHECK(r(0) == doctest::Approx(2.5 / 3));
  CHECK(r(1) == doctest::Approx(0.5 / 3));
  CHECK(r(2) == doctest::Approx(1.5 / 3));
  CHECK((percentile_rank(Vector::Constant(7, 4.2)).ranks.array() == 0.5).all());
  CHECK_THROWS_AS(percentile_rank(Vector()), ArgumentError);

  Rng rng = make_rng(Seed{3});
  std::normal_distribution<double> g(0.0, 1.0);
  Vector raw(200);
  std::vector<std::uint8_t> truth(200);
  for (Eigen::Index i = 0; i < 200; ++i) {
    raw(i) = std::round(g(rng) * 4.0) / 4.0;
    truth[static_cast<std::size_t>(i)] = (i % 9 == 0);
  }
  const Vector ranks = percentile_rank(raw).ranks;
  const Vector transformed = percentile_rank(Vector(raw.array().exp() * 3.0 + 1.0)).ranks;
  CHECK(ranks == transformed);
  for (Eigen::Index a = 0; a < 200; ++a)
    for (Eigen::Index b = 0; b < 200; ++b)
      if (raw(a) > raw(b)) CHECK(ranks(a) > ranks(b));
  const double auc_raw = roc_auc(std::span<const double>(raw.data(), 200), truth);
  const double auc_rank = roc_auc(std::span<const double>(ranks.data(), 200), truth);
  CHECK(auc_raw == auc_rank);
}

TEST_CASE("score table CSV") {
  ScoreVector s;
  s.values = (Vector(2) << 0.5, 1.5).finished();
  const std::vector<std::uint8_t> truth{0, 1};
  const std::string csv = score_table_csv(s, percentile_rank(s), truth);
  CHECK(csv == "instance,score,rank,outlier\r\n0,0.5,0.25,0\r\n1,1.5,0.75,1\r\n");
}
