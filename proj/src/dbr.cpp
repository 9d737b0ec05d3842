#include "mcode/dbr.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <json.hpp>

#include "mcode/errors.hpp"
#include "parallel.hpp"
#include "text_util.hpp"

namespace mcode {

std::string to_string(Structure s) { return s == Structure::dbr ? "DBR" : "BR"; }

Structure parse_structure(const std::string& text) {
  std::string t = text;
  std::transform(t.begin(), t.end(), t.begin(), [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
  if (t == "DBR") return Structure::dbr;
  if (t == "BR") return Structure::br;
  throw ArgumentError("unknown structure '" + text + "' (expected DBR or BR)");
}

Standardizer Standardizer::fit(const Matrix& features) {
  Standardizer s;
  const double n = static_cast<double>(features.rows());
  s.mean = features.colwise().mean().transpose();
  s.scale.resize(features.cols());
  for (Eigen::Index c = 0; c < features.cols(); ++c) {
    const double var = (features.col(c).array() - s.mean(c)).square().sum() / n;
    const double sd = std::sqrt(var);
    s.scale(c) = sd > 0.0 ? sd : 1.0;
  }
  return s;
}

Matrix Standardizer::apply(const Matrix& features) const {
  if (features.cols() != mean.size()) throw ArgumentError("feature dimension does not match the standardizer");
  Matrix out(features.rows(), features.cols());
  for (Eigen::Index r = 0; r < features.rows(); ++r)
    out.row(r) = (features.row(r) - mean.transpose()).cwiseQuotient(scale.transpose());
  return out;
}

std::size_t DbrModel::parameter_count() const {
  std::size_t total = 0;
  for (const auto& c : cpds) total += c.input_dim() + 1;
  return total;
}

namespace {

Matrix labels_as_real(const LabelMatrix& labels) { return labels.cast<double>(); }

// [x_std, y without column i] for DBR; x_std for BR.
Matrix cpd_design(const Matrix& xstd, const Matrix& yreal, std::size_t i, Structure structure) {
  if (structure == Structure::br) return xstd;
  const Eigen::Index m = xstd.cols();
  const Eigen::Index d = yreal.cols();
  const auto col = static_cast<Eigen::Index>(i);
  Matrix X(xstd.rows(), m + d - 1);
  X.leftCols(m) = xstd;
  if (col > 0) X.middleCols(m, col) = yreal.leftCols(col);
  if (col + 1 < d) X.rightCols(d - col - 1) = yreal.rightCols(d - col - 1);
  return X;
}

}  // namespace

DbrModel train_dbr(const Dataset& train, Structure structure, const LambdaPolicy& lambda_policy, Seed seed,
                   const DbrOptions& options) {
  if (lambda_policy.grid.empty()) throw ArgumentError("lambda policy has an empty grid");
  DbrModel model;
  model.structure = structure;
  model.feature_dim = train.m();
  model.label_count = train.d();
  model.clip = options.clip;
  model.label_order.resize(train.d());
  std::iota(model.label_order.begin(), model.label_order.end(), std::size_t{0});
  model.standardizer = Standardizer::fit(train.features());
  model.feature_names = train.feature_names();
  model.label_names = train.label_names();
  model.cpds.resize(train.d());

  const Matrix xstd = model.standardizer.apply(train.features());
  const Matrix yreal = labels_as_real(train.labels());
  const std::size_t d = train.d();
  const std::size_t inputs = structure == Structure::dbr ? train.m() + d - 1 : train.m();

  // Shared Gram of the feature block; each CPD adds its sibling-label block.
  Matrix feature_gram;
  Matrix label_gram;
  const bool wide = inputs > train.n() / 2;
  if (wide) {
    feature_gram = xstd * xstd.transpose();
    if (structure == Structure::dbr) label_gram = yreal * yreal.transpose();
  }

  const Seed cv_seed = derive_seed(seed, {0x6c616d62ULL});
  detail::parallel_for(d, options.threads, [&](std::size_t slot) {
    const std::size_t i = model.label_order[slot];
    const Matrix X = cpd_design(xstd, yreal, i, structure);
    std::vector<std::uint8_t> y(train.n());
    for (std::size_t r = 0; r < train.n(); ++r) y[r] = train.labels()(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(i));

    Matrix gram;
    if (wide) {
      gram = feature_gram;
      if (structure == Structure::dbr) {
        gram += label_gram;
        const Vector yi = yreal.col(static_cast<Eigen::Index>(i));
        gram.noalias() -= yi * yi.transpose();
      }
    }
    const Matrix* gram_ptr = wide ? &gram : nullptr;
    const LambdaSelection sel = select_lambda(X, y, lambda_policy.grid, lambda_policy.folds, cv_seed, options.solver, gram_ptr);
    TrainContext ctx;
    ctx.gram = gram_ptr;
    model.cpds[i] = train_logistic(X, y, sel.lambda, options.solver, nullptr, ctx);
  });
  return model;
}

namespace {

void check_compatible(const DbrModel& model, std::size_t m, std::size_t d) {
  if (m != model.feature_dim)
    throw ArgumentError("dataset has " + std::to_string(m) + " features, model expects " + std::to_string(model.feature_dim));
  if (d != model.label_count)
    throw ArgumentError("dataset has " + std::to_string(d) + " labels, model expects " + std::to_string(model.label_count));
}

double observed_probability(double p1, std::uint8_t y, double clip) {
  return std::clamp(y ? p1 : 1.0 - p1, clip, 1.0 - clip);
}

}  // namespace

RhoMatrix compute_rho(const DbrModel& model, const Dataset& ds) {
  check_compatible(model, ds.m(), ds.d());
  const Eigen::Index d = static_cast<Eigen::Index>(model.label_count);
  const Eigen::Index m = static_cast<Eigen::Index>(model.feature_dim);
  // Split every CPD into a feature block and a label block (d x d, zero diagonal).
  Matrix wf(m, d);
  Matrix wy = Matrix::Zero(d, d);
  Vector bias(d);
  for (Eigen::Index i = 0; i < d; ++i) {
    const LogisticModel& cpd = model.cpds[static_cast<std::size_t>(i)];
    wf.col(i) = cpd.weights.head(m);
    bias(i) = cpd.intercept;
    if (model.structure == Structure::dbr) {
      Eigen::Index slot = m;
      for (Eigen::Index j = 0; j < d; ++j) {
        if (j == i) continue;
        wy(j, i) = cpd.weights(slot++);
      }
    }
  }
  const Matrix xstd = model.standardizer.apply(ds.features());
  Matrix logits = xstd * wf;
  if (model.structure == Structure::dbr) logits.noalias() += labels_as_real(ds.labels()) * wy;
  logits.rowwise() += bias.transpose();

  RhoMatrix rho;
  rho.clip = model.clip;
  rho.values.resize(logits.rows(), d);
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    for (Eigen::Index i = 0; i < d; ++i) {
      const double p1 = std::clamp(sigmoid(logits(r, i)), model.clip, 1.0 - model.clip);
      rho.values(r, i) = observed_probability(p1, ds.labels()(r, i), model.clip);
    }
  }
  return rho;
}

Vector compute_rho(const DbrModel& model, std::span<const double> x, std::span<const std::uint8_t> y) {
  check_compatible(model, x.size(), y.size());
  Matrix f(1, static_cast<Eigen::Index>(x.size()));
  for (std::size_t c = 0; c < x.size(); ++c) f(0, static_cast<Eigen::Index>(c)) = x[c];
  LabelMatrix l(1, static_cast<Eigen::Index>(y.size()));
  for (std::size_t j = 0; j < y.size(); ++j) {
    if (y[j] > 1) throw ArgumentError("labels must be 0 or 1");
    l(0, static_cast<Eigen::Index>(j)) = y[j];
  }
  return compute_rho(model, Dataset(std::move(f), std::move(l))).values.row(0).transpose();
}

double pseudo_likelihood(std::span<const double> rho) {
  double p = 1.0;
  for (double r : rho) p *= r;
  return p;
}

double pseudo_likelihood(const DbrModel& model, std::span<const double> x, std::span<const std::uint8_t> y) {
  const Vector rho = compute_rho(model, x, y);
  return pseudo_likelihood(std::span<const double>(rho.data(), static_cast<std::size_t>(rho.size())));
}

// ---------------------------------------------------------------------------
// Persistence

namespace {

constexpr const char* kFormat = "mcode-dbr-model";
constexpr int kVersion = 1;

std::vector<double> to_std(const Vector& v) { return {v.data(), v.data() + v.size()}; }

Vector from_std(const std::vector<double>& v) {
  Vector out(static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) out(static_cast<Eigen::Index>(i)) = v[i];
  return out;
}

}  // namespace

std::string dbr_to_json(const DbrModel& model) {
  nlohmann::ordered_json j;
  j["format"] = kFormat;
  j["version"] = kVersion;
  j["structure"] = to_string(model.structure);
  j["feature_dim"] = model.feature_dim;
  j["label_count"] = model.label_count;
  j["clip"] = model.clip;
  j["label_order"] = model.label_order;
  j["feature_names"] = model.feature_names;
  j["label_names"] = model.label_names;
  j["standardizer"] = {{"mean", to_std(model.standardizer.mean)}, {"scale", to_std(model.standardizer.scale)}};
  auto cpds = nlohmann::ordered_json::array();
  for (const auto& c : model.cpds)
    cpds.push_back({{"lambda", c.lambda}, {"intercept", c.intercept}, {"weights", to_std(c.weights)}});
  j["cpds"] = std::move(cpds);
  return j.dump(1);
}

DbrModel dbr_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(0, std::string("model file is not valid JSON: ") + e.what());
  }
  try {
    if (j.at("format").get<std::string>() != kFormat) throw ValidationError("not a DBR model file");
    if (j.at("version").get<int>() != kVersion)
      throw ValidationError("unsupported model version " + std::to_string(j.at("version").get<int>()));
    DbrModel model;
    model.structure = parse_structure(j.at("structure").get<std::string>());
    model.feature_dim = j.at("feature_dim").get<std::size_t>();
    model.label_count = j.at("label_count").get<std::size_t>();
    model.clip = j.at("clip").get<double>();
    model.label_order = j.at("label_order").get<std::vector<std::size_t>>();
    model.feature_names = j.at("feature_names").get<std::vector<std::string>>();
    model.label_names = j.at("label_names").get<std::vector<std::string>>();
    model.standardizer.mean = from_std(j.at("standardizer").at("mean").get<std::vector<double>>());
    model.standardizer.scale = from_std(j.at("standardizer").at("scale").get<std::vector<double>>());
    const std::size_t expected_dim =
        model.structure == Structure::dbr ? model.feature_dim + model.label_count - 1 : model.feature_dim;
    for (const auto& c : j.at("cpds")) {
      LogisticModel cpd;
      cpd.lambda = c.at("lambda").get<double>();
      cpd.intercept = c.at("intercept").get<double>();
      cpd.weights = from_std(c.at("weights").get<std::vector<double>>());
      if (cpd.input_dim() != expected_dim) throw ValidationError("CPD weight length does not match the structure");
      if (!cpd.weights.allFinite() || !std::isfinite(cpd.intercept)) throw ValidationError("CPD has non-finite weights");
      model.cpds.push_back(std::move(cpd));
    }
    if (model.cpds.size() != model.label_count) throw ValidationError("CPD count does not match label count");
    if (static_cast<std::size_t>(model.standardizer.mean.size()) != model.feature_dim ||
        static_cast<std::size_t>(model.standardizer.scale.size()) != model.feature_dim)
      throw ValidationError("standardizer length does not match feature dimension");
    return model;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed model file: ") + e.what());
  }
}

void save_dbr(const DbrModel& model, const std::filesystem::path& path) { detail::write_file(path, dbr_to_json(model)); }

DbrModel load_dbr(const std::filesystem::path& path) { return dbr_from_json(detail::read_file(path)); }

}  // namespace mcode
