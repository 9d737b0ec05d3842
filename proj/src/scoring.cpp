#include "mcode/scoring.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <sstream>

#include "mcode/errors.hpp"
#include "mcode/lof.hpp"
#include "mcode/ocsvm.hpp"
#include "text_util.hpp"

namespace mcode {

const std::vector<Method>& all_methods() {
  static const std::vector<Method> methods{Method::comp,    Method::rd,      Method::lr,       Method::lof,
                                           Method::ocsvm,   Method::base_rd, Method::base_lof, Method::base_ocsvm};
  return methods;
}

std::string method_key(Method m) {
  switch (m) {
    case Method::comp: return "comp";
    case Method::rd: return "rd";
    case Method::lr: return "lr";
    case Method::lof: return "lof";
    case Method::ocsvm: return "ocsvm";
    case Method::base_rd: return "base_rd";
    case Method::base_lof: return "base_lof";
    case Method::base_ocsvm: return "base_ocsvm";
  }
  return "unknown";
}

std::string display_name(Method m, double r) {
  switch (m) {
    case Method::comp: return "MCODE-ComP";
    case Method::rd: return "MCODE-RD";
    case Method::lr:
      if (std::isinf(r)) return "MCODE-Linf";
      return "MCODE-L" + detail::format_double(r);
    case Method::lof: return "MCODE-LOF";
    case Method::ocsvm: return "MCODE-OCSVM";
    case Method::base_rd: return "RD";
    case Method::base_lof: return "LOF";
    case Method::base_ocsvm: return "OCSVM";
  }
  return "unknown";
}

Method parse_method(const std::string& text) {
  for (Method m : all_methods())
    if (text == method_key(m)) return m;
  throw ArgumentError("unknown method '" + text + "'");
}

bool is_baseline(Method m) { return m == Method::base_rd || m == Method::base_lof || m == Method::base_ocsvm; }

namespace {

void require_finite(const ScoreVector& sv) {
  if (!sv.values.allFinite()) throw NumericError(display_name(sv.method) + " produced non-finite scores");
}

double median(std::vector<double> v) {
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  const double upper = v[mid];
  if (v.size() % 2 == 1) return upper;
  return 0.5 * (upper + *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid)));
}

}  // namespace

ScoreVector score_comp(const RhoMatrix& rhos) {
  ScoreVector sv;
  sv.method = Method::comp;
  sv.values.resize(rhos.values.rows());
  for (Eigen::Index r = 0; r < rhos.values.rows(); ++r)
    sv.values(r) = -std::expm1(rhos.values.row(r).array().log().sum());
  require_finite(sv);
  return sv;
}

ScoreVector score_comp(const DbrModel& model, const Dataset& ds) { return score_comp(compute_rho(model, ds)); }

Vector diagonal_robust_distances(const Matrix& points) {
  const Eigen::Index n = points.rows();
  const Eigen::Index d = points.cols();
  Vector out = Vector::Zero(n);
  std::vector<double> col(static_cast<std::size_t>(n));
  for (Eigen::Index c = 0; c < d; ++c) {
    for (Eigen::Index r = 0; r < n; ++r) col[static_cast<std::size_t>(r)] = points(r, c);
    const double med = median(col);
    std::vector<double> dev(col.size());
    for (std::size_t i = 0; i < col.size(); ++i) dev[i] = std::fabs(col[i] - med);
    double scale = 1.4826 * median(dev);
    if (!(scale > 0.0)) {
      const double mean = std::accumulate(col.begin(), col.end(), 0.0) / static_cast<double>(n);
      double ss = 0.0;
      for (double v : col) ss += (v - mean) * (v - mean);
      scale = std::sqrt(ss / static_cast<double>(n));
    }
    if (!(scale > 0.0)) scale = 1.0;
    for (Eigen::Index r = 0; r < n; ++r) {
      const double z = (points(r, c) - med) / scale;
      out(r) += z * z;
    }
  }
  return out;
}

Vector robust_distance_scores(const Matrix& points, const ScoreParams& params, std::string* note) {
  const auto n = static_cast<std::size_t>(points.rows());
  const auto d = static_cast<std::size_t>(points.cols());
  if (n <= d || d > params.mcd_max_dim) {
    if (note)
      *note = n <= d ? "diagonal robust distance: too few rows for MCD"
                     : "diagonal robust distance: dimension exceeds mcd_max_dim";
    return diagonal_robust_distances(points);
  }
  McdOptions mcd = params.mcd;
  mcd.threads = params.threads;
  const RobustEstimate est = fast_mcd(points, params.seed, mcd);
  if (params.mcd_location) return robust_distances_sq(est, points);
  const Vector mean = points.colwise().mean().transpose();
  return robust_distances_sq(est, points, mean);
}

ScoreVector score_rd(const RhoMatrix& rhos, const ScoreParams& params) {
  ScoreVector sv;
  sv.method = Method::rd;
  sv.values = robust_distance_scores(rhos.values, params, &sv.note);
  require_finite(sv);
  return sv;
}

ScoreVector score_lr(const RhoMatrix& rhos, double r) {
  if (!(r == 1.0 || r == 2.0 || std::isinf(r))) throw ArgumentError("Lr score supports r = 1, 2 or inf");
  ScoreVector sv;
  sv.method = Method::lr;
  const Matrix gap = (1.0 - rhos.values.array()).matrix();
  sv.values.resize(gap.rows());
  for (Eigen::Index i = 0; i < gap.rows(); ++i) {
    if (std::isinf(r))
      sv.values(i) = gap.row(i).maxCoeff();
    else if (r == 1.0)
      sv.values(i) = gap.row(i).sum();
    else
      sv.values(i) = gap.row(i).norm();
  }
  require_finite(sv);
  return sv;
}

ScoreVector score_lof(const RhoMatrix& rhos, std::size_t k, std::size_t threads) {
  if (rhos.rows() <= k)
    throw ArgumentError("LOF with k = " + std::to_string(k) + " needs more than k rows, got " +
                        std::to_string(rhos.rows()) + "; choose a smaller k");
  ScoreVector sv;
  sv.method = Method::lof;
  sv.values = lof_scores(rhos.values, k, threads);
  require_finite(sv);
  return sv;
}

namespace {

Vector ocsvm_scores(const Matrix& train, const Matrix& test, const ScoreParams& params) {
  OcsvmOptions opt;
  opt.nu = params.nu;
  opt.gamma = params.gamma;
  opt.seed = params.seed;
  const OcsvmModel model = train_ocsvm(train, opt);
  return -ocsvm_decisions(model, test, params.threads);
}

}  // namespace

ScoreVector score_ocsvm(const RhoMatrix& train_rhos, const RhoMatrix& test_rhos, const ScoreParams& params) {
  if (train_rhos.dims() != test_rhos.dims()) throw ArgumentError("train and test rho dimensions differ");
  ScoreVector sv;
  sv.method = Method::ocsvm;
  sv.values = ocsvm_scores(train_rhos.values, test_rhos.values, params);
  require_finite(sv);
  return sv;
}

Matrix joint_space(const Dataset& ds, const Standardizer* standardizer) {
  const auto m = static_cast<Eigen::Index>(ds.m());
  const auto d = static_cast<Eigen::Index>(ds.d());
  Matrix out(static_cast<Eigen::Index>(ds.n()), m + d);
  out.leftCols(m) = standardizer ? standardizer->apply(ds.features()) : ds.features();
  out.rightCols(d) = ds.labels().cast<double>();
  return out;
}

ScoreVector baseline_joint_scores(const Dataset& train, const Dataset& test, Method method, const ScoreParams& params) {
  if (train.m() != test.m() || train.d() != test.d()) throw ArgumentError("train and test dimensions differ");
  std::optional<Standardizer> standardizer;
  if (params.standardize_joint) standardizer = Standardizer::fit(train.features());
  const Standardizer* sp = standardizer ? &*standardizer : nullptr;
  const Matrix test_joint = joint_space(test, sp);
  ScoreVector sv;
  sv.method = method;
  switch (method) {
    case Method::base_rd:
      sv.values = robust_distance_scores(test_joint, params, &sv.note);
      break;
    case Method::base_lof:
      if (test.n() <= params.k)
        throw ArgumentError("LOF with k = " + std::to_string(params.k) + " needs more than k rows; choose a smaller k");
      sv.values = lof_scores(test_joint, params.k, params.threads);
      break;
    case Method::base_ocsvm:
      sv.values = ocsvm_scores(joint_space(train, sp), test_joint, params);
      break;
    default:
      throw ArgumentError("baseline_joint_scores expects a baseline method, got " + method_key(method));
  }
  require_finite(sv);
  return sv;
}

RankedScores percentile_rank(const Vector& values) {
  const auto n = static_cast<std::size_t>(values.size());
  if (n == 0) throw ArgumentError("cannot rank an empty score vector");
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return values(static_cast<Eigen::Index>(a)) < values(static_cast<Eigen::Index>(b));
  });
  RankedScores out;
  out.ranks.resize(static_cast<Eigen::Index>(n));
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && values(static_cast<Eigen::Index>(idx[j + 1])) == values(static_cast<Eigen::Index>(idx[i]))) ++j;
    const double avg = 0.5 * static_cast<double>(i + 1 + j + 1);
    for (std::size_t t = i; t <= j; ++t) out.ranks(static_cast<Eigen::Index>(idx[t])) = (avg - 0.5) / static_cast<double>(n);
    i = j + 1;
  }
  return out;
}

RankedScores percentile_rank(const ScoreVector& sv) { return percentile_rank(sv.values); }

std::string score_table_csv(const ScoreVector& sv, const RankedScores& ranks, std::span<const std::uint8_t> truth) {
  const auto n = static_cast<std::size_t>(sv.values.size());
  if (static_cast<std::size_t>(ranks.ranks.size()) != n || (!truth.empty() && truth.size() != n))
    throw ArgumentError("score table columns differ in length");
  std::ostringstream out;
  std::vector<std::string> header{"instance", "score", "rank"};
  if (!truth.empty()) header.emplace_back("outlier");
  detail::write_csv_record(out, header);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<std::string> row{std::to_string(i), detail::format_double(sv.values(static_cast<Eigen::Index>(i))),
                                 detail::format_double(ranks.ranks(static_cast<Eigen::Index>(i)))};
    if (!truth.empty()) row.push_back(truth[i] ? "1" : "0");
    detail::write_csv_record(out, row);
  }
  return out.str();
}

}  // namespace mcode
