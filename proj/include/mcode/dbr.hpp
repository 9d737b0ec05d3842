#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "mcode/dataset.hpp"
#include "mcode/logistic.hpp"
#include "mcode/random.hpp"

namespace mcode {

/// DBR: each label conditioned on the features and every other label.
/// BR: each label conditioned on the features only.
enum class Structure { dbr, br };

std::string to_string(Structure s);
Structure parse_structure(const std::string& text);

/// Per-feature affine map fitted on training data; labels are never scaled.
struct Standardizer {
  Vector mean;
  Vector scale;

  static Standardizer fit(const Matrix& features);
  Matrix apply(const Matrix& features) const;
};

/// Either a fixed lambda (one-element grid) or a cross-validated grid.
struct LambdaPolicy {
  std::vector<double> grid{1e-3, 1e-2, 1e-1, 1.0, 10.0, 100.0};
  std::size_t folds = 5;

  static LambdaPolicy fixed(double lambda) { return {{lambda}, 0}; }
  static LambdaPolicy cross_validated() { return {}; }
};

struct DbrOptions {
  LogisticOptions solver;
  double clip = kDefaultClip;
  std::size_t threads = 1;
};

/// d logistic CPDs. Under DBR the i-th CPD reads [standardized x ; y without y_i]
/// with sibling labels in label-index order; under BR it reads standardized x.
struct DbrModel {
  Structure structure = Structure::dbr;
  std::vector<std::size_t> label_order;  ///< order in which the CPDs were fitted
  std::size_t feature_dim = 0;
  std::size_t label_count = 0;
  double clip = kDefaultClip;
  Standardizer standardizer;
  std::vector<LogisticModel> cpds;
  std::vector<std::string> feature_names;
  std::vector<std::string> label_names;

  std::size_t parameter_count() const;
};

DbrModel train_dbr(const Dataset& train, Structure structure, const LambdaPolicy& lambda_policy, Seed seed,
                   const DbrOptions& options = {});

/// Per-instance probability of each OBSERVED label given the features and the
/// other observed labels. Every entry lies in [clip, 1 - clip].
struct RhoMatrix {
  Matrix values;
  double clip = kDefaultClip;

  std::size_t rows() const { return static_cast<std::size_t>(values.rows()); }
  std::size_t dims() const { return static_cast<std::size_t>(values.cols()); }
};

RhoMatrix compute_rho(const DbrModel& model, const Dataset& ds);

/// rho for a single instance (x raw, unstandardized).
Vector compute_rho(const DbrModel& model, std::span<const double> x, std::span<const std::uint8_t> y);

/// Product of the rho entries; a plausibility score, not a normalized probability.
double pseudo_likelihood(const DbrModel& model, std::span<const double> x, std::span<const std::uint8_t> y);
double pseudo_likelihood(std::span<const double> rho);

std::string dbr_to_json(const DbrModel& model);
DbrModel dbr_from_json(const std::string& text);
void save_dbr(const DbrModel& model, const std::filesystem::path& path);
DbrModel load_dbr(const std::filesystem::path& path);

}  // namespace mcode
