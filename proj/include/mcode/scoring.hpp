#pragma once

#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "mcode/dataset.hpp"
#include "mcode/dbr.hpp"
#include "mcode/mcd.hpp"
#include "mcode/random.hpp"

namespace mcode {

/// The five rho-space metrics followed by the three joint-space baselines.
enum class Method { comp, rd, lr, lof, ocsvm, base_rd, base_lof, base_ocsvm };

const std::vector<Method>& all_methods();
/// Stable machine key ("comp", "base_lof", ...).
std::string method_key(Method m);
/// Human-readable label ("MCODE-ComP", "MCODE-Linf", "RD", ...); r selects the Lr label.
std::string display_name(Method m, double r = std::numeric_limits<double>::infinity());
Method parse_method(const std::string& text);
bool is_baseline(Method m);

struct ScoreParams {
  double r = std::numeric_limits<double>::infinity();
  std::size_t k = 30;
  double nu = 0.01;
  double gamma = 0.0;  ///< <= 0 selects the median heuristic
  bool mcd_location = true;  ///< false centers robust distances on the plain mean
  bool standardize_joint = true;  ///< baselines: standardize features with training statistics
  std::size_t mcd_max_dim = 200;  ///< above this dimension RD uses the diagonal robust distance
  McdOptions mcd;
  std::size_t threads = 1;
  Seed seed{0};
};

/// One score per instance; higher always means more outlying.
struct ScoreVector {
  Method method = Method::comp;
  Vector values;
  std::string note;  ///< set when a fallback path was taken
};

struct RankedScores {
  Vector ranks;  ///< (average tie rank - 0.5) / n, in (0, 1)
};

ScoreVector score_comp(const RhoMatrix& rhos);
ScoreVector score_comp(const DbrModel& model, const Dataset& ds);
ScoreVector score_rd(const RhoMatrix& rhos, const ScoreParams& params = {});
ScoreVector score_lr(const RhoMatrix& rhos, double r);
ScoreVector score_lof(const RhoMatrix& rhos, std::size_t k = 30, std::size_t threads = 1);
ScoreVector score_ocsvm(const RhoMatrix& train_rhos, const RhoMatrix& test_rhos, const ScoreParams& params = {});

/// Squared robust distances of the rows of `points` under an MCD fit on the same
/// rows, or under a per-dimension median/MAD scale when the fit is not possible.
Vector robust_distance_scores(const Matrix& points, const ScoreParams& params, std::string* note = nullptr);

/// Per-dimension robust distance: sum of ((x - median) / scale)^2 with scale the
/// normal-consistent MAD, else the standard deviation, else 1.
Vector diagonal_robust_distances(const Matrix& points);

/// Rows [x ; y] with x standardized by `standardizer` when non-null.
Matrix joint_space(const Dataset& ds, const Standardizer* standardizer);

/// method must be base_rd, base_lof or base_ocsvm.
ScoreVector baseline_joint_scores(const Dataset& train, const Dataset& test, Method method, const ScoreParams& params = {});

RankedScores percentile_rank(const Vector& values);
RankedScores percentile_rank(const ScoreVector& sv);

/// CSV with columns instance,score,rank[,outlier].
std::string score_table_csv(const ScoreVector& sv, const RankedScores& ranks, std::span<const std::uint8_t> truth = {});

}  // namespace mcode
