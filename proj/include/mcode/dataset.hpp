#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "mcode/random.hpp"

namespace mcode {

/// Row-major real matrix; rows are instances.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;
/// Row-major bit matrix; every cell is 0 or 1.
using LabelMatrix = Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Multi-label dataset: n instances, each with m real features (context) and
/// d binary labels (responses). Immutable after construction.
class Dataset {
 public:
  /// Validates every invariant; throws ValidationError on violation.
  Dataset(Matrix features, LabelMatrix labels, std::vector<std::string> feature_names,
          std::vector<std::string> label_names, std::string name = {});

  /// Convenience constructor with generated names (f0.., y0..).
  Dataset(Matrix features, LabelMatrix labels, std::string name = {});

  std::size_t n() const { return static_cast<std::size_t>(features_.rows()); }
  std::size_t m() const { return static_cast<std::size_t>(features_.cols()); }
  std::size_t d() const { return static_cast<std::size_t>(labels_.cols()); }

  const Matrix& features() const { return features_; }
  const LabelMatrix& labels() const { return labels_; }
  const std::vector<std::string>& feature_names() const { return feature_names_; }
  const std::vector<std::string>& label_names() const { return label_names_; }
  const std::string& name() const { return name_; }

  /// Rows in the given order; indices may repeat.
  Dataset select_rows(std::span<const std::size_t> rows) const;

  /// Same features and names with a replacement label matrix.
  Dataset with_labels(LabelMatrix labels) const;

 private:
  Matrix features_;
  LabelMatrix labels_;
  std::vector<std::string> feature_names_;
  std::vector<std::string> label_names_;
  std::string name_;
};

struct LoadOptions {
  /// Drop attributes that cannot be read as numbers (string, date, or
  /// nominal with more than two non-numeric values) instead of failing.
  /// Useful for identifier columns.
  bool skip_nonnumeric = false;
};

Dataset load_arff(const std::filesystem::path& path, std::size_t label_count, const LoadOptions& options = {});
Dataset load_csv(const std::filesystem::path& path, std::size_t label_count);
/// Dispatches on the extension (.arff or .csv).
Dataset load_dataset(const std::filesystem::path& path, std::size_t label_count, const LoadOptions& options = {});

/// Dense ARFF; label attributes are declared nominal {0,1} and placed last.
void save_arff(const Dataset& ds, const std::filesystem::path& path);
/// Header row, features then labels.
void save_csv(const Dataset& ds, const std::filesystem::path& path);

/// Parses ARFF text directly (used by load_arff and by tests).
Dataset parse_arff(const std::string& text, std::size_t label_count, const LoadOptions& options = {},
                   std::string name = {});

struct DatasetSummary {
  std::size_t n = 0;
  std::size_t m = 0;
  std::size_t d = 0;
  double label_cardinality = 0.0;
  double label_density = 0.0;
  std::size_t distinct_label_sets = 0;
};

DatasetSummary summarize(const Dataset& ds);
/// Key-value text block, one "key: value" per line.
std::string format_summary(const Dataset& ds, const DatasetSummary& summary);

/// Samples `size` rows uniformly with replacement.
Dataset bootstrap_sample(const Dataset& ds, std::size_t size, Seed seed);

/// Repeated k-fold assignment. assignment[r][i] is the fold of instance i in repeat r.
struct FoldPlan {
  std::size_t n = 0;
  std::size_t k = 0;
  std::size_t repeats = 0;
  Seed seed;
  std::vector<std::vector<std::size_t>> assignment;

  std::vector<std::size_t> test_indices(std::size_t repeat, std::size_t fold) const;
  std::vector<std::size_t> train_indices(std::size_t repeat, std::size_t fold) const;
};

FoldPlan make_fold_plan(std::size_t n, std::size_t k, std::size_t repeats, Seed seed);

/// Random disjoint split into halves of sizes ceil(n/2) and floor(n/2).
std::pair<Dataset, Dataset> split_half(const Dataset& ds, Seed seed);

/// Synthetic multi-label data with context-dependent and label-dependent
/// structure: labels follow logistic models of the features, and each label
/// after the first also depends on its predecessor.
struct SyntheticSpec {
  std::size_t n = 500;
  std::size_t m = 10;
  std::size_t d = 5;
  double signal = 3.0;
  double coupling = 2.0;
};

Dataset make_synthetic(const SyntheticSpec& spec, Seed seed);

}  // namespace mcode
