#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "mcode/dataset.hpp"
#include "mcode/dbr.hpp"
#include "mcode/eval.hpp"
#include "mcode/injector.hpp"
#include "mcode/scoring.hpp"

namespace mcode {

enum class Protocol { exp1, exp2 };

std::string to_string(Protocol p);
Protocol parse_protocol(const std::string& text);

struct DatasetEntry {
  std::filesystem::path path;
  std::size_t labels = 0;
};

/// Every knob of an experiment run. Serialized as flat "key = value" lines.
struct RunConfig {
  std::vector<DatasetEntry> datasets;
  Protocol protocol = Protocol::exp1;
  double rate = 0.005;
  VariableNoiseUnit noise_unit = VariableNoiseUnit::cells;
  double instance_rate = 0.005;
  std::vector<std::size_t> p_values{1, 2, 3, 5};
  std::size_t bootstrap_size = 5000;  ///< 0 disables bootstrapping
  std::size_t folds = 10;
  std::size_t repeats = 3;
  std::uint64_t seed = 1;
  Structure structure = Structure::dbr;
  std::vector<double> lambda_grid{1e-3, 1e-2, 1e-1, 1.0, 10.0, 100.0};
  std::size_t lambda_folds = 5;
  double r = std::numeric_limits<double>::infinity();
  std::size_t k = 30;
  double nu = 0.01;
  double gamma = 0.0;  ///< 0 = median heuristic
  std::size_t mcd_starts = 500;
  std::size_t mcd_max_dim = 200;
  bool mcd_location = true;
  bool standardize_joint = true;
  std::vector<Method> methods = all_methods();
  bool skip_nonnumeric = false;
  std::size_t threads = 1;
  std::filesystem::path output = "mcode-run";
  bool resume = true;

  /// Parses "key = value" lines; '#' starts a comment. Unknown keys are errors.
  static RunConfig from_key_values(const std::string& text);
  static RunConfig load(const std::filesystem::path& path);
  /// Sets one key from its text form; throws ArgumentError on bad keys or values.
  void set(const std::string& key, const std::string& value);
  std::string to_text() const;
  /// Checks ranges; with check_paths, also that datasets are listed and exist.
  void validate(bool check_paths = true) const;
};

/// One evaluated (fold, p, method) cell; NaN metrics mark failures.
struct FoldRecord {
  std::string dataset;
  std::size_t repeat = 0;
  std::size_t fold = 0;
  std::size_t p = 0;  ///< 0 under the variable-level protocol
  Method method = Method::comp;
  double auc = std::numeric_limits<double>::quiet_NaN();
  double auc_pr = std::numeric_limits<double>::quiet_NaN();
  std::size_t outliers = 0;
  std::string note;
};

struct ExperimentResult {
  std::vector<FoldRecord> records;
  std::vector<EvalReport> reports;  ///< one per (dataset, p)
  std::optional<FriedmanReport> friedman;  ///< across datasets, when there are at least two
  bool all_undefined = false;  ///< no metric could be computed anywhere
};

/// Runs the configured protocol, writing every artifact under cfg.output.
ExperimentResult run_experiment(const RunConfig& cfg, std::ostream* log = nullptr);
/// Same on already loaded datasets (cfg.datasets is used only for labels in the config snapshot).
ExperimentResult run_experiment(const RunConfig& cfg, const std::vector<Dataset>& datasets, std::ostream* log = nullptr);

ExperimentResult run_experiment1(const RunConfig& cfg, std::ostream* log = nullptr);
ExperimentResult run_experiment2(const RunConfig& cfg, std::ostream* log = nullptr);

/// Fold records as long-format CSV.
std::string fold_records_csv(const std::vector<FoldRecord>& records);

}  // namespace mcode
