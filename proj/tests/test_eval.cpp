#include <doctest.h>

#include <random>

#include "mcode/errors.hpp"
#include "mcode/eval.hpp"
#include "oracles.hpp"

using namespace mcode;

namespace {

void random_case(std::uint64_t seed, std::size_t n, std::vector<double>& s, std::vector<std::uint8_t>& y, int levels = 0) {
  Rng rng = make_rng(Seed{seed});
  std::normal_distribution<double> g(0.0, 1.0);
  std::bernoulli_distribution coin(0.3);
  s.resize(n);
  y.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    y[i] = coin(rng);
    s[i] = g(rng) + (y[i] ? 0.8 : 0.0);
    if (levels > 0) s[i] = std::round(s[i] * levels) / levels;
  }
  y[0] = 1;
  y[1] = 0;
}

}  // namespace

TEST_CASE("ROC AUC equals the all-pairs count") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    std::vector<double> s;
    std::vector<std::uint8_t> y;
    random_case(seed, 200, s, y, seed % 2 ? 2 : 0);
    CHECK(std::fabs(roc_auc(s, y) - oracle::auc_pairs(s, y)) <= 1e-12);
    std::vector<double> neg(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) neg[i] = -s[i];
    CHECK(roc_auc(s, y) + roc_auc(neg, y) == 1.0);
    std::vector<double> mono(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) mono[i] = std::exp(s[i]) * 5.0 - 2.0;
    CHECK(roc_auc(mono, y) == roc_auc(s, y));
  }
}

TEST_CASE("ROC AUC edge cases") {
  const std::vector<std::uint8_t> y{0, 0, 1, 1};
  CHECK(roc_auc(std::vector<double>{0.1, 0.2, 0.8, 0.9}, y) == 1.0);
  CHECK(roc_auc(std::vector<double>{1, 1, 1, 1}, y) == 0.5);
  CHECK_THROWS_AS(roc_auc(std::vector<double>{1, 2}, std::vector<std::uint8_t>{1, 1}), UndefinedMetricError);
  CHECK_THROWS_AS(roc_auc(std::vector<double>{1, 2}, std::vector<std::uint8_t>{1}), ArgumentError);
}

TEST_CASE("PR AUC equals threshold enumeration") {
  for (std::uint64_t seed = 1; seed <= 8; ++seed) {
    std::vector<double> s;
    std::vector<std::uint8_t> y;
    random_case(seed, 15 + seed * 5, s, y, seed % 2 ? 1 : 0);
    CHECK(std::fabs(pr_auc(s, y) - oracle::pr_enumerate(s, y)) <= 1e-12);
    const double prevalence = static_cast<double>(std::count(y.begin(), y.end(), 1)) / static_cast<double>(y.size());
    CHECK(pr_auc(s, y) >= prevalence);
  }
  const std::vector<std::uint8_t> y{0, 1, 0, 1, 0};
  CHECK(pr_auc(std::vector<double>{0, 5, 1, 4, 2}, y) == 1.0);
  CHECK(pr_auc(std::vector<double>{3, 3, 3, 3, 3}, y) == doctest::Approx(0.4).epsilon(1e-15));
  CHECK_THROWS_AS(pr_auc(std::vector<double>{1, 2}, std::vector<std::uint8_t>{0, 0}), UndefinedMetricError);
}

TEST_CASE("paired t-test on the sleep data") {
  // Extra hours of sleep under two drugs, ten patients.
  const std::vector<double> a{0.7, -1.6, -0.2, -1.2, -0.1, 3.4, 3.7, 0.8, 0.0, 2.0};
  const std::vector<double> b{1.9, 0.8, 1.1, 0.1, -0.1, 4.4, 5.5, 1.6, 4.6, 3.4};
  // Hand calculation: mean difference -1.58, sd of differences 1.229995...
  double mean = 0.0;
  for (std::size_t i = 0; i < 10; ++i) mean += (a[i] - b[i]) / 10.0;
  double ss = 0.0;
  for (std::size_t i = 0; i < 10; ++i) ss += (a[i] - b[i] - mean) * (a[i] - b[i] - mean);
  const double t_hand = mean / (std::sqrt(ss / 9.0) / std::sqrt(10.0));
  const TTestResult r = paired_ttest(a, b);
  CHECK(std::fabs(r.t - t_hand) <= 1e-6);
  CHECK(std::fabs(r.t - -4.062128) <= 1e-6);
  CHECK(r.df == 9.0);
  CHECK(r.p_value == doctest::Approx(0.002833).epsilon(1e-3));
  CHECK(r.significant);
  const TTestResult swapped = paired_ttest(b, a);
  CHECK(swapped.t == -r.t);

  const TTestResult same = paired_ttest(a, a);
  CHECK(same.t == 0.0);
  CHECK(!same.significant);
  CHECK_THROWS_AS(paired_ttest(std::vector<double>{1}, std::vector<double>{2}), ArgumentError);
}

TEST_CASE("Friedman ranks and Holm comparisons") {
  // Method i scores 1 - 0.1 i on every dataset: a strict dominance order.
  Matrix dom(8, 6);
  for (Eigen::Index i = 0; i < 8; ++i)
    for (Eigen::Index j = 0; j < 6; ++j) dom(i, j) = 0.99 - 0.1 * static_cast<double>(i) + 0.001 * static_cast<double>(j);
  const FriedmanReport r = friedman_holm(dom);
  CHECK(r.mean_ranks(0) == 1.0);
  CHECK(r.mean_ranks(7) == 8.0);
  CHECK(r.rank_sd(7) == 0.0);
  CHECK(r.best == 0);
  CHECK(r.rejected);
  CHECK(r.comparisons.size() == 7);
  bool worst_flagged = false;
  for (const auto& c : r.comparisons)
    if (c.method == 7) worst_flagged = c.significant;
  CHECK(worst_flagged);

  const FriedmanReport flat = friedman_holm(Matrix::Constant(4, 5, 0.5));
  CHECK((flat.mean_ranks.array() == 2.5).all());
  CHECK(flat.chi_square == 0.0);
  CHECK(!flat.rejected);
  for (const auto& c : flat.comparisons) CHECK(!c.significant);
  CHECK_THROWS_AS(friedman_holm(Matrix::Constant(1, 5, 0.5)), ArgumentError);
}

TEST_CASE("Friedman statistic matches the textbook formula") {
  Matrix m(3, 4);
  m << 0.9, 0.8, 0.7, 0.95,
       0.85, 0.82, 0.75, 0.9,
       0.6, 0.7, 0.72, 0.5;
  const FriedmanReport r = friedman_holm(m);
  // Ranks per dataset: (1,2,3), (2,1,3), (3,1,2), (1,2,3).
  CHECK(r.mean_ranks(0) == doctest::Approx(7.0 / 4));
  CHECK(r.mean_ranks(1) == doctest::Approx(6.0 / 4));
  CHECK(r.mean_ranks(2) == doctest::Approx(11.0 / 4));
  const double chi = 12.0 * 4 / (3 * 4) * ((49.0 + 36.0 + 121.0) / 16.0 - 3 * 16.0 / 4);
  CHECK(r.chi_square == doctest::Approx(chi).epsilon(1e-12));
}

TEST_CASE("method summaries flag the best group") {
  const std::vector<std::string> names{"a", "b", "c"};
  const std::vector<std::vector<double>> v{{0.90, 0.92, 0.91, 0.93, 0.89},
                                           {0.91, 0.90, 0.92, 0.92, 0.90},
                                           {0.50, 0.52, 0.49, 0.51, std::nan("")}};
  const EvalReport r = summarize_methods("auc", "toy", names, v);
  CHECK(r.methods[0].best);
  CHECK(r.methods[1].best);
  CHECK(!r.methods[2].best);
  CHECK(r.methods[2].valid == 4);
  const std::string csv = eval_long_csv(r);
  CHECK(csv.find("toy,auc,c,4,NA") != std::string::npos);
  const std::string json = eval_summary_json(r);
  CHECK(json.find("\"method\": \"a\"") != std::string::npos);
}
