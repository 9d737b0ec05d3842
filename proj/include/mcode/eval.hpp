#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mcode/dataset.hpp"

namespace mcode {

/// Mann-Whitney estimate of P(score_pos > score_neg) + 0.5 P(tie).
double roc_auc(std::span<const double> scores, std::span<const std::uint8_t> truth);

/// Step-interpolated area under the precision-recall curve; tied scores form one threshold.
double pr_auc(std::span<const double> scores, std::span<const std::uint8_t> truth);

struct TTestResult {
  double t = 0.0;
  double df = 0.0;
  double p_value = 1.0;
  bool significant = false;
};

/// Two-sided paired t-test on a - b.
TTestResult paired_ttest(std::span<const double> a, std::span<const double> b, double alpha = 0.05);

struct HolmComparison {
  std::size_t method = 0;
  double z = 0.0;
  double p_value = 1.0;
  double threshold = 0.0;  ///< Holm step-down level this comparison was tested at
  bool significant = false;
};

struct FriedmanReport {
  Matrix ranks;  ///< methods x datasets, 1 = highest score, ties averaged
  Vector mean_ranks;
  Vector rank_sd;  ///< sample standard deviation across datasets
  double chi_square = 0.0;
  double df = 0.0;
  double p_value = 1.0;
  bool rejected = false;
  std::size_t best = 0;
  std::vector<HolmComparison> comparisons;  ///< every other method against the best
  double alpha = 0.05;
};

/// scores: methods x datasets. Holm comparisons are flagged only when the Friedman test rejects.
FriedmanReport friedman_holm(const Matrix& scores, double alpha = 0.05);

/// Per-method fold values of one metric; NaN marks a failed fold.
struct MethodSummary {
  std::string name;
  std::vector<double> folds;
  double mean = 0.0;
  double sd = 0.0;
  std::size_t valid = 0;
  bool best = false;  ///< highest mean, or not significantly below it by paired t-test
  double t_vs_best = 0.0;
};

struct EvalReport {
  std::string metric;  ///< "auc" or "auc_pr"
  std::string dataset;
  std::vector<MethodSummary> methods;
  std::size_t best_index = 0;
  double alpha = 0.05;
};

EvalReport summarize_methods(std::string metric, std::string dataset, const std::vector<std::string>& names,
                             const std::vector<std::vector<double>>& fold_values, double alpha = 0.05);

/// Long format: dataset,metric,method,fold,value (NA for missing).
std::string eval_long_csv(const EvalReport& report);
/// Table-style summary with mean, sd and best flags.
std::string eval_summary_json(const EvalReport& report);

}  // namespace mcode
