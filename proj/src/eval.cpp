#include "mcode/eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "mcode/errors.hpp"
#include "mcode/special_functions.hpp"
#include "text_util.hpp"

namespace mcode {

namespace {

void check_inputs(std::span<const double> scores, std::span<const std::uint8_t> truth) {
  if (scores.size() != truth.size()) throw ArgumentError("scores and truth differ in length");
  for (double s : scores)
    if (!std::isfinite(s)) throw ArgumentError("scores must be finite");
  for (auto t : truth)
    if (t > 1) throw ArgumentError("truth values must be 0 or 1");
}

std::vector<std::size_t> order_by(std::span<const double> scores, bool descending) {
  std::vector<std::size_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return descending ? scores[a] > scores[b] : scores[a] < scores[b];
  });
  return idx;
}

}  // namespace

double roc_auc(std::span<const double> scores, std::span<const std::uint8_t> truth) {
  check_inputs(scores, truth);
  const std::size_t pos = static_cast<std::size_t>(std::count(truth.begin(), truth.end(), std::uint8_t{1}));
  const std::size_t neg = truth.size() - pos;
  if (pos == 0 || neg == 0) throw UndefinedMetricError("ROC AUC needs both outliers and inliers");
  const auto idx = order_by(scores, false);
  // Twice the rank sum of positives, kept integral.
  double twice_rank_sum = 0.0;
  std::size_t i = 0;
  while (i < idx.size()) {
    std::size_t j = i;
    while (j + 1 < idx.size() && scores[idx[j + 1]] == scores[idx[i]]) ++j;
    const double twice_avg = static_cast<double>(i + 1 + j + 1);
    for (std::size_t t = i; t <= j; ++t)
      if (truth[idx[t]]) twice_rank_sum += twice_avg;
    i = j + 1;
  }
  const double p = static_cast<double>(pos);
  const double twice_u = twice_rank_sum - p * (p + 1.0);
  return twice_u / (2.0 * p * static_cast<double>(neg));
}

double pr_auc(std::span<const double> scores, std::span<const std::uint8_t> truth) {
  check_inputs(scores, truth);
  const std::size_t pos = static_cast<std::size_t>(std::count(truth.begin(), truth.end(), std::uint8_t{1}));
  if (pos == 0) throw UndefinedMetricError("PR AUC needs at least one outlier");
  const auto idx = order_by(scores, true);
  double area = 0.0;
  std::size_t tp = 0;
  std::size_t seen = 0;
  std::size_t i = 0;
  while (i < idx.size()) {
    std::size_t j = i;
    while (j + 1 < idx.size() && scores[idx[j + 1]] == scores[idx[i]]) ++j;
    std::size_t new_tp = 0;
    for (std::size_t t = i; t <= j; ++t) new_tp += truth[idx[t]];
    tp += new_tp;
    seen += j - i + 1;
    if (new_tp > 0)
      area += (static_cast<double>(new_tp) / static_cast<double>(pos)) * (static_cast<double>(tp) / static_cast<double>(seen));
    i = j + 1;
  }
  return area;
}

TTestResult paired_ttest(std::span<const double> a, std::span<const double> b, double alpha) {
  if (a.size() != b.size()) throw ArgumentError("paired t-test needs equal lengths");
  if (a.size() < 2) throw ArgumentError("paired t-test needs at least 2 pairs");
  const std::size_t n = a.size();
  std::vector<double> diff(n);
  for (std::size_t i = 0; i < n; ++i) diff[i] = a[i] - b[i];
  const double mean = std::accumulate(diff.begin(), diff.end(), 0.0) / static_cast<double>(n);
  double ss = 0.0;
  for (double v : diff) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / static_cast<double>(n - 1));
  TTestResult res;
  res.df = static_cast<double>(n - 1);
  if (sd == 0.0) {
    if (mean == 0.0) return res;
    res.t = mean > 0 ? std::numeric_limits<double>::infinity() : -std::numeric_limits<double>::infinity();
    res.p_value = 0.0;
    res.significant = true;
    return res;
  }
  res.t = mean / (sd / std::sqrt(static_cast<double>(n)));
  res.p_value = student_t_two_sided_p(res.t, res.df);
  res.significant = res.p_value < alpha;
  return res;
}

FriedmanReport friedman_holm(const Matrix& scores, double alpha) {
  const auto k = static_cast<std::size_t>(scores.rows());
  const auto nd = static_cast<std::size_t>(scores.cols());
  if (k < 2 || nd < 2) throw ArgumentError("Friedman test needs at least 2 methods and 2 datasets");
  if (!scores.allFinite()) throw ArgumentError("Friedman test needs finite scores");
  FriedmanReport rep;
  rep.alpha = alpha;
  rep.ranks.resize(scores.rows(), scores.cols());
  for (std::size_t c = 0; c < nd; ++c) {
    std::vector<double> col(k);
    for (std::size_t r = 0; r < k; ++r) col[r] = scores(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
    const auto idx = order_by(col, true);
    std::size_t i = 0;
    while (i < k) {
      std::size_t j = i;
      while (j + 1 < k && col[idx[j + 1]] == col[idx[i]]) ++j;
      const double avg = 0.5 * static_cast<double>(i + 1 + j + 1);
      for (std::size_t t = i; t <= j; ++t) rep.ranks(static_cast<Eigen::Index>(idx[t]), static_cast<Eigen::Index>(c)) = avg;
      i = j + 1;
    }
  }
  const double kk = static_cast<double>(k);
  const double n = static_cast<double>(nd);
  rep.mean_ranks = rep.ranks.rowwise().mean();
  rep.rank_sd.resize(scores.rows());
  for (Eigen::Index r = 0; r < rep.ranks.rows(); ++r)
    rep.rank_sd(r) = std::sqrt((rep.ranks.row(r).array() - rep.mean_ranks(r)).square().sum() / (n - 1.0));
  rep.chi_square = 12.0 * n / (kk * (kk + 1.0)) * (rep.mean_ranks.squaredNorm() - kk * (kk + 1.0) * (kk + 1.0) / 4.0);
  rep.chi_square = std::max(0.0, rep.chi_square);
  rep.df = kk - 1.0;
  rep.p_value = chi_squared_sf(rep.chi_square, rep.df);
  rep.rejected = rep.p_value < alpha;
  Eigen::Index best = 0;
  rep.mean_ranks.minCoeff(&best);
  rep.best = static_cast<std::size_t>(best);

  const double se = std::sqrt(kk * (kk + 1.0) / (6.0 * n));
  for (std::size_t m = 0; m < k; ++m) {
    if (m == rep.best) continue;
    HolmComparison c;
    c.method = m;
    c.z = (rep.mean_ranks(static_cast<Eigen::Index>(m)) - rep.mean_ranks(best)) / se;
    c.p_value = std::min(1.0, 2.0 * normal_sf(std::fabs(c.z)));
    rep.comparisons.push_back(c);
  }
  std::stable_sort(rep.comparisons.begin(), rep.comparisons.end(),
                   [](const HolmComparison& a, const HolmComparison& b) { return a.p_value < b.p_value; });
  bool still = rep.rejected;
  const std::size_t total = rep.comparisons.size();
  for (std::size_t i = 0; i < total; ++i) {
    auto& c = rep.comparisons[i];
    c.threshold = alpha / static_cast<double>(total - i);
    still = still && c.p_value < c.threshold;
    c.significant = still;
  }
  return rep;
}

EvalReport summarize_methods(std::string metric, std::string dataset, const std::vector<std::string>& names,
                             const std::vector<std::vector<double>>& fold_values, double alpha) {
  if (names.size() != fold_values.size()) throw ArgumentError("method names and fold values differ in count");
  EvalReport rep;
  rep.metric = std::move(metric);
  rep.dataset = std::move(dataset);
  rep.alpha = alpha;
  double best_mean = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < names.size(); ++i) {
    MethodSummary s;
    s.name = names[i];
    s.folds = fold_values[i];
    std::vector<double> valid;
    for (double v : s.folds)
      if (std::isfinite(v)) valid.push_back(v);
    s.valid = valid.size();
    if (valid.empty()) {
      s.mean = s.sd = std::numeric_limits<double>::quiet_NaN();
    } else {
      s.mean = std::accumulate(valid.begin(), valid.end(), 0.0) / static_cast<double>(valid.size());
      double ss = 0.0;
      for (double v : valid) ss += (v - s.mean) * (v - s.mean);
      s.sd = valid.size() > 1 ? std::sqrt(ss / static_cast<double>(valid.size() - 1)) : 0.0;
      if (s.mean > best_mean) {
        best_mean = s.mean;
        rep.best_index = i;
      }
    }
    rep.methods.push_back(std::move(s));
  }
  if (!std::isfinite(best_mean)) return rep;
  const auto& best = rep.methods[rep.best_index];
  for (std::size_t i = 0; i < rep.methods.size(); ++i) {
    auto& s = rep.methods[i];
    if (i == rep.best_index) {
      s.best = true;
      continue;
    }
    if (s.valid == 0) continue;
    std::vector<double> a;
    std::vector<double> b;
    for (std::size_t f = 0; f < std::min(s.folds.size(), best.folds.size()); ++f)
      if (std::isfinite(s.folds[f]) && std::isfinite(best.folds[f])) {
        a.push_back(best.folds[f]);
        b.push_back(s.folds[f]);
      }
    if (a.size() < 2) continue;
    const TTestResult t = paired_ttest(a, b, alpha);
    s.t_vs_best = t.t;
    s.best = !t.significant;
  }
  return rep;
}

namespace {

std::string value_or_na(double v) { return std::isfinite(v) ? detail::format_double(v) : "NA"; }

nlohmann::ordered_json number_or_null(double v) {
  return std::isfinite(v) ? nlohmann::ordered_json(v) : nlohmann::ordered_json(nullptr);
}

}  // namespace

std::string eval_long_csv(const EvalReport& report) {
  std::ostringstream out;
  detail::write_csv_record(out, {"dataset", "metric", "method", "fold", "value"});
  for (const auto& m : report.methods)
    for (std::size_t f = 0; f < m.folds.size(); ++f)
      detail::write_csv_record(out, {report.dataset, report.metric, m.name, std::to_string(f), value_or_na(m.folds[f])});
  return out.str();
}

std::string eval_summary_json(const EvalReport& report) {
  nlohmann::ordered_json j;
  j["dataset"] = report.dataset;
  j["metric"] = report.metric;
  j["alpha"] = report.alpha;
  j["best_rule"] = "highest mean; others flagged when a paired t-test against it is not significant";
  auto methods = nlohmann::ordered_json::array();
  for (const auto& m : report.methods)
    methods.push_back({{"method", m.name},
                       {"mean", number_or_null(m.mean)},
                       {"sd", number_or_null(m.sd)},
                       {"valid_folds", m.valid},
                       {"folds", m.folds.size()},
                       {"best", m.best},
                       {"t_vs_best", number_or_null(m.t_vs_best)}});
  j["methods"] = std::move(methods);
  return j.dump(2) + "\n";
}

}  // namespace mcode
