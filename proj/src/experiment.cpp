#include "mcode/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <mutex>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "mcode/errors.hpp"
#include "parallel.hpp"
#include "text_util.hpp"

namespace mcode {

std::string to_string(Protocol p) { return p == Protocol::exp1 ? "exp1" : "exp2"; }

Protocol parse_protocol(const std::string& text) {
  if (text == "exp1") return Protocol::exp1;
  if (text == "exp2") return Protocol::exp2;
  throw ArgumentError("unknown protocol '" + text + "' (expected exp1 or exp2)");
}

// ---------------------------------------------------------------------------
// RunConfig text form

namespace {

std::vector<std::string> split_list(const std::string& value) {
  std::vector<std::string> out;
  for (auto& item : detail::split_quoted(value, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

double to_double(const std::string& key, const std::string& value) {
  if (value == "inf" || value == "infinity") return std::numeric_limits<double>::infinity();
  const auto v = detail::parse_double(value);
  if (!v) throw ArgumentError("'" + key + "' expects a number, got '" + value + "'");
  return *v;
}

std::uint64_t to_uint(const std::string& key, const std::string& value) {
  std::uint64_t out = 0;
  const auto* end = value.data() + value.size();
  const auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc{} || ptr != end) throw ArgumentError("'" + key + "' expects a non-negative integer, got '" + value + "'");
  return out;
}

bool to_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "no") return false;
  throw ArgumentError("'" + key + "' expects true or false, got '" + value + "'");
}

std::string join(const std::vector<std::string>& items) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) out += (i ? ", " : "") + items[i];
  return out;
}

std::string number_text(double v) { return std::isinf(v) ? "inf" : detail::format_double(v); }

}  // namespace

void RunConfig::set(const std::string& key, const std::string& value) {
  if (key == "datasets" || key == "dataset") {
    datasets.clear();
    for (const auto& item : split_list(value)) {
      const auto colon = item.rfind(':');
      if (colon == std::string::npos || colon == 0)
        throw ArgumentError("dataset entries take the form path:label_count, got '" + item + "'");
      datasets.push_back({item.substr(0, colon), static_cast<std::size_t>(to_uint(key, item.substr(colon + 1)))});
    }
  } else if (key == "protocol") {
    protocol = parse_protocol(value);
  } else if (key == "rate") {
    rate = to_double(key, value);
  } else if (key == "noise_unit") {
    if (value == "cells")
      noise_unit = VariableNoiseUnit::cells;
    else if (value == "instances")
      noise_unit = VariableNoiseUnit::instances;
    else
      throw ArgumentError("noise_unit expects cells or instances, got '" + value + "'");
  } else if (key == "instance_rate") {
    instance_rate = to_double(key, value);
  } else if (key == "p_values") {
    p_values.clear();
    for (const auto& item : split_list(value)) p_values.push_back(static_cast<std::size_t>(to_uint(key, item)));
  } else if (key == "bootstrap_size") {
    bootstrap_size = static_cast<std::size_t>(to_uint(key, value));
  } else if (key == "folds") {
    folds = static_cast<std::size_t>(to_uint(key, value));
  } else if (key == "repeats") {
    repeats = static_cast<std::size_t>(to_uint(key, value));
  } else if (key == "seed") {
    seed = to_uint(key, value);
  } else if (key == "structure") {
    structure = parse_structure(value);
  } else if (key == "lambda_grid") {
    lambda_grid.clear();
    for (const auto& item : split_list(value)) lambda_grid.push_back(to_double(key, item));
  } else if (key == "lambda_folds") {
    lambda_folds = static_cast<std::size_t>(to_uint(key, value));
  } else if (key == "r") {
    r = to_double(key, value);
  } else if (key == "k") {
    k = static_cast<std::size_t>(to_uint(key, value));
  } else if (key == "nu") {
    nu = to_double(key, value);
  } else if (key == "gamma") {
    gamma = value == "auto" ? 0.0 : to_double(key, value);
  } else if (key == "mcd_starts") {
    mcd_starts = static_cast<std::size_t>(to_uint(key, value));
  } else if (key == "mcd_max_dim") {
    mcd_max_dim = static_cast<std::size_t>(to_uint(key, value));
  } else if (key == "mcd_location") {
    mcd_location = to_bool(key, value);
  } else if (key == "standardize_joint") {
    standardize_joint = to_bool(key, value);
  } else if (key == "methods") {
    methods.clear();
    if (value == "all") {
      methods = all_methods();
    } else {
      for (const auto& item : split_list(value)) methods.push_back(parse_method(item));
    }
  } else if (key == "skip_nonnumeric") {
    skip_nonnumeric = to_bool(key, value);
  } else if (key == "threads") {
    threads = static_cast<std::size_t>(to_uint(key, value));
  } else if (key == "output") {
    output = value;
  } else if (key == "resume") {
    resume = to_bool(key, value);
  } else {
    throw ArgumentError("unknown config key '" + key + "'");
  }
}

RunConfig RunConfig::from_key_values(const std::string& text) {
  RunConfig cfg;
  std::istringstream in(text);
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const auto body = detail::trim(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string_view::npos) throw ParseError(number, "expected 'key = value'");
    const std::string key(detail::trim(body.substr(0, eq)));
    const std::string value(detail::trim(body.substr(eq + 1)));
    try {
      cfg.set(key, value);
    } catch (const ArgumentError& e) {
      throw ParseError(number, e.what());
    }
  }
  return cfg;
}

RunConfig RunConfig::load(const std::filesystem::path& path) { return from_key_values(detail::read_file(path)); }

std::string RunConfig::to_text() const {
  std::vector<std::string> ds;
  for (const auto& d : datasets) ds.push_back(d.path.string() + ":" + std::to_string(d.labels));
  std::vector<std::string> ps;
  for (auto p : p_values) ps.push_back(std::to_string(p));
  std::vector<std::string> grid;
  for (double g : lambda_grid) grid.push_back(number_text(g));
  std::vector<std::string> ms;
  for (Method m : methods) ms.push_back(method_key(m));
  std::ostringstream out;
  out << "datasets = " << join(ds) << "\n";
  out << "protocol = " << to_string(protocol) << "\n";
  out << "rate = " << number_text(rate) << "\n";
  out << "noise_unit = " << (noise_unit == VariableNoiseUnit::cells ? "cells" : "instances") << "\n";
  out << "instance_rate = " << number_text(instance_rate) << "\n";
  out << "p_values = " << join(ps) << "\n";
  out << "bootstrap_size = " << bootstrap_size << "\n";
  out << "folds = " << folds << "\n";
  out << "repeats = " << repeats << "\n";
  out << "seed = " << seed << "\n";
  out << "structure = " << to_string(structure) << "\n";
  out << "lambda_grid = " << join(grid) << "\n";
  out << "lambda_folds = " << lambda_folds << "\n";
  out << "r = " << number_text(r) << "\n";
  out << "k = " << k << "\n";
  out << "nu = " << number_text(nu) << "\n";
  out << "gamma = " << (gamma > 0.0 ? number_text(gamma) : "auto") << "\n";
  out << "mcd_starts = " << mcd_starts << "\n";
  out << "mcd_max_dim = " << mcd_max_dim << "\n";
  out << "mcd_location = " << (mcd_location ? "true" : "false") << "\n";
  out << "standardize_joint = " << (standardize_joint ? "true" : "false") << "\n";
  out << "methods = " << join(ms) << "\n";
  out << "skip_nonnumeric = " << (skip_nonnumeric ? "true" : "false") << "\n";
  out << "threads = " << threads << "\n";
  out << "output = " << output.string() << "\n";
  out << "resume = " << (resume ? "true" : "false") << "\n";
  return out.str();
}

void RunConfig::validate(bool check_paths) const {
  if (check_paths && datasets.empty()) throw ArgumentError("no datasets configured");
  for (const auto& d : datasets) {
    if (d.labels == 0) throw ArgumentError("dataset " + d.path.string() + " needs a label count >= 1");
    if (check_paths && !std::filesystem::exists(d.path)) throw IoError("dataset not found: " + d.path.string());
  }
  if (!(rate >= 0.0 && rate <= 1.0)) throw ArgumentError("rate must lie in [0, 1]");
  if (!(instance_rate >= 0.0 && instance_rate <= 1.0)) throw ArgumentError("instance_rate must lie in [0, 1]");
  if (protocol == Protocol::exp2) {
    if (p_values.empty()) throw ArgumentError("exp2 needs a non-empty p_values list");
    for (auto p : p_values)
      if (p == 0) throw ArgumentError("p_values entries must be >= 1");
  }
  if (folds < 2) throw ArgumentError("folds must be >= 2");
  if (repeats < 1) throw ArgumentError("repeats must be >= 1");
  if (lambda_grid.empty()) throw ArgumentError("lambda_grid must not be empty");
  for (double l : lambda_grid)
    if (!(l >= 0.0) || !std::isfinite(l)) throw ArgumentError("lambda_grid values must be finite and >= 0");
  if (lambda_grid.size() > 1 && lambda_folds < 2) throw ArgumentError("lambda_folds must be >= 2");
  if (!(r == 1.0 || r == 2.0 || std::isinf(r))) throw ArgumentError("r must be 1, 2 or inf");
  if (k == 0) throw ArgumentError("k must be >= 1");
  if (!(nu > 0.0 && nu <= 1.0)) throw ArgumentError("nu must lie in (0, 1]");
  if (!(gamma >= 0.0) || !std::isfinite(gamma)) throw ArgumentError("gamma must be auto or a positive number");
  if (mcd_starts == 0) throw ArgumentError("mcd_starts must be >= 1");
  if (methods.empty()) throw ArgumentError("methods must not be empty");
}

// ---------------------------------------------------------------------------
// Fold pipeline

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct Job {
  std::size_t dataset = 0;
  std::size_t repeat = 0;
  std::size_t fold = 0;
};

class Logger {
 public:
  explicit Logger(std::ostream* out) : out_(out) {}
  void operator()(const std::string& line) {
    if (!out_) return;
    std::lock_guard lock(mu_);
    *out_ << line << '\n' << std::flush;
  }

 private:
  std::ostream* out_;
  std::mutex mu_;
};

std::string safe_name(const std::string& name, std::size_t index) {
  std::string out;
  for (char c : name) out += (std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_') ? c : '_';
  return out.empty() ? "dataset" + std::to_string(index) : out;
}

std::string fold_dir_name(std::size_t repeat, std::size_t fold) {
  return "r" + std::to_string(repeat) + "_f" + std::to_string(fold);
}

std::string metric_text(double v) { return std::isfinite(v) ? detail::format_double(v) : "NA"; }

double metric_value(const std::string& s) {
  if (s == "NA") return kNaN;
  const auto v = detail::parse_double(s);
  if (!v) throw ParseError(0, "bad metric value '" + s + "' in a fold metrics file");
  return *v;
}

std::string metrics_csv(const std::vector<FoldRecord>& recs) {
  std::ostringstream out;
  detail::write_csv_record(out, {"p", "method", "auc", "auc_pr", "outliers", "note"});
  for (const auto& r : recs)
    detail::write_csv_record(out, {std::to_string(r.p), method_key(r.method), metric_text(r.auc), metric_text(r.auc_pr),
                                   std::to_string(r.outliers), r.note});
  return out.str();
}

std::vector<FoldRecord> read_metrics(const std::filesystem::path& path, const std::string& dataset, const Job& job) {
  const auto rows = detail::parse_csv(detail::read_file(path));
  std::vector<FoldRecord> out;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& row = rows[i];
    if (row.size() != 6) throw ParseError(i + 1, "fold metrics row has " + std::to_string(row.size()) + " fields");
    FoldRecord r;
    r.dataset = dataset;
    r.repeat = job.repeat;
    r.fold = job.fold;
    r.p = static_cast<std::size_t>(to_uint("p", row[0]));
    r.method = parse_method(row[1]);
    r.auc = metric_value(row[2]);
    r.auc_pr = metric_value(row[3]);
    r.outliers = static_cast<std::size_t>(to_uint("outliers", row[4]));
    r.note = row[5];
    out.push_back(std::move(r));
  }
  return out;
}

ScoreParams score_params(const RunConfig& cfg, Seed seed) {
  ScoreParams p;
  p.r = cfg.r;
  p.k = cfg.k;
  p.nu = cfg.nu;
  p.gamma = cfg.gamma;
  p.mcd_location = cfg.mcd_location;
  p.standardize_joint = cfg.standardize_joint;
  p.mcd_max_dim = cfg.mcd_max_dim;
  p.mcd.n_starts = cfg.mcd_starts;
  p.threads = 1;
  p.seed = seed;
  return p;
}

void evaluate_into(FoldRecord& rec, const Vector& ranks, const std::vector<std::uint8_t>& truth) {
  const std::span<const double> s(ranks.data(), static_cast<std::size_t>(ranks.size()));
  try {
    rec.auc = roc_auc(s, truth);
  } catch (const UndefinedMetricError& e) {
    rec.note = std::string("undefined: ") + e.what();
  }
  try {
    rec.auc_pr = pr_auc(s, truth);
  } catch (const UndefinedMetricError& e) {
    if (rec.note.empty()) rec.note = std::string("undefined: ") + e.what();
  }
}

std::vector<FoldRecord> run_fold(const RunConfig& cfg, const Dataset& ds, const std::string& name, const FoldPlan& plan,
                                 const Job& job, const std::filesystem::path& dir, Logger& log) {
  const Seed fold_seed = derive_seed(Seed{cfg.seed}, {job.dataset, job.repeat, job.fold});
  const auto train_idx = plan.train_indices(job.repeat, job.fold);
  const auto test_idx = plan.test_indices(job.repeat, job.fold);
  const Dataset train = ds.select_rows(train_idx);
  const Dataset test = ds.select_rows(test_idx);

  std::vector<std::size_t> ps;
  if (cfg.protocol == Protocol::exp1)
    ps.push_back(0);
  else
    ps = cfg.p_values;

  auto fail_all = [&](const std::string& why) {
    std::vector<FoldRecord> recs;
    for (auto p : ps)
      for (Method m : cfg.methods) {
        FoldRecord r;
        r.dataset = name;
        r.repeat = job.repeat;
        r.fold = job.fold;
        r.p = p;
        r.method = m;
        r.note = why;
        recs.push_back(std::move(r));
      }
    return recs;
  };

  const bool needs_rho = std::any_of(cfg.methods.begin(), cfg.methods.end(), [](Method m) { return !is_baseline(m); });
  std::optional<DbrModel> model;
  std::optional<RhoMatrix> held_out_rho;
  try {
    if (needs_rho) {
      auto [dbr_half, svm_half] = split_half(train, derive_seed(fold_seed, {1}));
      LambdaPolicy policy{cfg.lambda_grid, cfg.lambda_folds};
      DbrOptions opts;
      opts.threads = 1;
      model = train_dbr(dbr_half, cfg.structure, policy, derive_seed(fold_seed, {2}), opts);
      held_out_rho = compute_rho(*model, svm_half);
    }
  } catch (const Error& e) {
    log("[" + name + " " + fold_dir_name(job.repeat, job.fold) + "] model training failed: " + e.what());
    return fail_all(std::string("fold failed: ") + e.what());
  }

  const Dataset test_pool = (cfg.bootstrap_size > 0 && test.n() < cfg.bootstrap_size)
                                ? bootstrap_sample(test, cfg.bootstrap_size, derive_seed(fold_seed, {3}))
                                : test;

  std::vector<FoldRecord> recs;
  for (std::size_t p : ps) {
    const Seed p_seed = derive_seed(fold_seed, {4, p});
    auto [noisy, report] = cfg.protocol == Protocol::exp1
                               ? inject_variable_noise(test_pool, cfg.rate, p_seed, cfg.noise_unit)
                               : inject_instance_noise(test_pool, cfg.instance_rate, p, p_seed);
    const std::filesystem::path pdir = cfg.protocol == Protocol::exp1 ? dir : dir / ("p" + std::to_string(p));
    write_injection_audit(report, pdir / "injection.csv");
    const auto& truth = report.outlier_mask;
    const std::size_t outliers = report.outlier_count();

    std::optional<RhoMatrix> test_rho;
    std::string rho_error;
    if (needs_rho) {
      try {
        test_rho = compute_rho(*model, noisy);
      } catch (const Error& e) {
        rho_error = e.what();
      }
    }
    const ScoreParams params = score_params(cfg, derive_seed(fold_seed, {5, p}));
    for (Method m : cfg.methods) {
      FoldRecord rec;
      rec.dataset = name;
      rec.repeat = job.repeat;
      rec.fold = job.fold;
      rec.p = p;
      rec.method = m;
      rec.outliers = outliers;
      try {
        if (!is_baseline(m) && !test_rho) throw NumericError("rho transform failed: " + rho_error);
        ScoreVector sv;
        switch (m) {
          case Method::comp: sv = score_comp(*test_rho); break;
          case Method::rd: sv = score_rd(*test_rho, params); break;
          case Method::lr: sv = score_lr(*test_rho, cfg.r); break;
          case Method::lof: sv = score_lof(*test_rho, cfg.k, 1); break;
          case Method::ocsvm: sv = score_ocsvm(*held_out_rho, *test_rho, params); break;
          default: sv = baseline_joint_scores(train, noisy, m, params); break;
        }
        const RankedScores ranks = percentile_rank(sv);
        detail::write_file(pdir / ("scores_" + method_key(m) + ".csv"), score_table_csv(sv, ranks, truth));
        evaluate_into(rec, ranks.ranks, truth);
        if (!sv.note.empty()) rec.note = rec.note.empty() ? sv.note : rec.note + "; " + sv.note;
      } catch (const Error& e) {
        rec.note = std::string("failed: ") + e.what();
        log("[" + name + " " + fold_dir_name(job.repeat, job.fold) + "] " + display_name(m, cfg.r) + " failed: " + e.what());
      }
      recs.push_back(std::move(rec));
    }
  }
  return recs;
}

std::string config_fingerprint(const RunConfig& cfg) {
  std::istringstream in(cfg.to_text());
  std::string line;
  std::string out;
  while (std::getline(in, line))
    if (line.rfind("threads", 0) != 0 && line.rfind("resume", 0) != 0 && line.rfind("output", 0) != 0) out += line + "\n";
  return out;
}

// Aggregation ----------------------------------------------------------------

nlohmann::ordered_json number_or_null(double v) {
  return std::isfinite(v) ? nlohmann::ordered_json(v) : nlohmann::ordered_json(nullptr);
}

}  // namespace

std::string fold_records_csv(const std::vector<FoldRecord>& records) {
  std::ostringstream out;
  detail::write_csv_record(out, {"dataset", "p", "repeat", "fold", "method", "auc", "auc_pr", "outliers", "note"});
  for (const auto& r : records)
    detail::write_csv_record(out, {r.dataset, std::to_string(r.p), std::to_string(r.repeat), std::to_string(r.fold),
                                   method_key(r.method), metric_text(r.auc), metric_text(r.auc_pr),
                                   std::to_string(r.outliers), r.note});
  return out.str();
}

ExperimentResult run_experiment(const RunConfig& cfg, const std::vector<Dataset>& datasets, std::ostream* log_stream) {
  cfg.validate(false);
  if (datasets.empty()) throw ArgumentError("no datasets to run");
  Logger log(log_stream);
  std::vector<std::string> names;
  for (std::size_t i = 0; i < datasets.size(); ++i) {
    std::string base = safe_name(datasets[i].name(), i);
    if (std::find(names.begin(), names.end(), base) != names.end()) base += "_" + std::to_string(i);
    names.push_back(base);
    if (cfg.protocol == Protocol::exp2)
      for (auto p : cfg.p_values)
        if (p > datasets[i].d())
          throw ArgumentError("p = " + std::to_string(p) + " exceeds the label count of " + names.back());
    if (datasets[i].n() < cfg.folds)
      throw ArgumentError(names.back() + " has fewer instances than folds");
  }

  const std::filesystem::path& out = cfg.output;
  std::filesystem::create_directories(out);
  const auto config_path = out / "config.resolved.txt";
  if (std::filesystem::exists(config_path)) {
    const RunConfig previous = RunConfig::load(config_path);
    if (cfg.resume && config_fingerprint(previous) != config_fingerprint(cfg))
      throw ArgumentError("output directory " + out.string() + " holds a run with a different configuration");
  }
  detail::write_file(config_path, cfg.to_text());

  std::vector<FoldPlan> plans;
  std::vector<Job> jobs;
  for (std::size_t i = 0; i < datasets.size(); ++i) {
    plans.push_back(make_fold_plan(datasets[i].n(), cfg.folds, cfg.repeats, derive_seed(Seed{cfg.seed}, {0xf01dULL, i})));
    for (std::size_t r = 0; r < cfg.repeats; ++r)
      for (std::size_t f = 0; f < cfg.folds; ++f) jobs.push_back({i, r, f});
  }

  std::vector<std::vector<FoldRecord>> results(jobs.size());
  detail::parallel_for(jobs.size(), std::max<std::size_t>(1, cfg.threads), [&](std::size_t j) {
    const Job& job = jobs[j];
    const auto& name = names[job.dataset];
    const auto dir = out / name / fold_dir_name(job.repeat, job.fold);
    const auto metrics_path = dir / "metrics.csv";
    if (cfg.resume && std::filesystem::exists(metrics_path)) {
      results[j] = read_metrics(metrics_path, name, job);
      log("[" + name + " " + fold_dir_name(job.repeat, job.fold) + "] resumed");
      return;
    }
    const auto start = std::chrono::steady_clock::now();
    results[j] = run_fold(cfg, datasets[job.dataset], name, plans[job.dataset], job, dir, log);
    detail::write_file(metrics_path, metrics_csv(results[j]));
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::ostringstream msg;
    msg << "[" << name << " " << fold_dir_name(job.repeat, job.fold) << "] done in " << detail::format_fixed(secs, 1) << " s";
    log(msg.str());
  });

  ExperimentResult result;
  for (auto& r : results) result.records.insert(result.records.end(), r.begin(), r.end());

  const bool exp1 = cfg.protocol == Protocol::exp1;
  const std::string metric = exp1 ? "auc" : "auc_pr";
  std::vector<std::size_t> ps = exp1 ? std::vector<std::size_t>{0} : cfg.p_values;
  std::vector<std::string> display;
  for (Method m : cfg.methods) display.push_back(display_name(m, cfg.r));

  for (std::size_t i = 0; i < datasets.size(); ++i) {
    for (auto p : ps) {
      std::vector<std::vector<double>> values(cfg.methods.size());
      for (const auto& rec : result.records) {
        if (rec.dataset != names[i] || rec.p != p) continue;
        const auto pos = static_cast<std::size_t>(std::find(cfg.methods.begin(), cfg.methods.end(), rec.method) - cfg.methods.begin());
        values[pos].push_back(exp1 ? rec.auc : rec.auc_pr);
      }
      result.reports.push_back(summarize_methods(metric, names[i], display, values));
    }
  }
  result.all_undefined = std::all_of(result.records.begin(), result.records.end(), [&](const FoldRecord& r) {
    return !std::isfinite(exp1 ? r.auc : r.auc_pr) && r.note.rfind("undefined", 0) == 0;
  });

  // Friedman ranks across datasets over methods with a mean on every dataset.
  std::vector<std::size_t> ranked_methods;
  if (exp1 && datasets.size() >= 2 && cfg.methods.size() >= 2) {
    for (std::size_t m = 0; m < cfg.methods.size(); ++m) {
      bool ok = true;
      for (const auto& rep : result.reports) ok = ok && std::isfinite(rep.methods[m].mean);
      if (ok) ranked_methods.push_back(m);
    }
    if (ranked_methods.size() >= 2) {
      Matrix means(static_cast<Eigen::Index>(ranked_methods.size()), static_cast<Eigen::Index>(datasets.size()));
      for (std::size_t a = 0; a < ranked_methods.size(); ++a)
        for (std::size_t b = 0; b < datasets.size(); ++b)
          means(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) = result.reports[b].methods[ranked_methods[a]].mean;
      result.friedman = friedman_holm(means);
    }
  }

  detail::write_file(out / "folds.csv", fold_records_csv(result.records));

  nlohmann::ordered_json summary;
  summary["protocol"] = to_string(cfg.protocol);
  summary["metric"] = metric;
  summary["folds_per_method"] = cfg.folds * cfg.repeats;
  summary["all_undefined"] = result.all_undefined;
  auto tables = nlohmann::ordered_json::array();
  std::ostringstream fig;
  if (exp1)
    detail::write_csv_record(fig, {"dataset", "method", "mean_auc", "sd_auc", "best"});
  else
    detail::write_csv_record(fig, {"dataset", "p", "method", "mean_auc_pr", "sd_auc_pr", "best"});
  std::size_t idx = 0;
  for (std::size_t i = 0; i < datasets.size(); ++i) {
    for (auto p : ps) {
      const auto& rep = result.reports[idx++];
      nlohmann::ordered_json t;
      t["dataset"] = names[i];
      if (!exp1) t["p"] = p;
      auto ms = nlohmann::ordered_json::array();
      for (const auto& m : rep.methods) {
        ms.push_back({{"method", m.name}, {"mean", number_or_null(m.mean)}, {"sd", number_or_null(m.sd)},
                      {"valid_folds", m.valid}, {"best", m.best}});
        if (exp1)
          detail::write_csv_record(fig, {names[i], m.name, metric_text(m.mean), metric_text(m.sd), m.best ? "1" : "0"});
        else
          detail::write_csv_record(fig, {names[i], std::to_string(p), m.name, metric_text(m.mean), metric_text(m.sd),
                                         m.best ? "1" : "0"});
      }
      t["methods"] = std::move(ms);
      tables.push_back(std::move(t));
    }
  }
  summary["tables"] = std::move(tables);
  if (result.friedman) {
    const auto& fr = *result.friedman;
    nlohmann::ordered_json f;
    f["procedure"] = "Friedman test, then Holm step-down comparisons of each method against the best-ranked one";
    f["chi_square"] = fr.chi_square;
    f["df"] = fr.df;
    f["p_value"] = fr.p_value;
    f["rejected"] = fr.rejected;
    f["best"] = display[ranked_methods[fr.best]];
    auto ranks = nlohmann::ordered_json::array();
    for (std::size_t a = 0; a < ranked_methods.size(); ++a) {
      bool worse = false;
      for (const auto& c : fr.comparisons)
        if (c.method == a) worse = c.significant;
      ranks.push_back({{"method", display[ranked_methods[a]]},
                       {"mean_rank", fr.mean_ranks(static_cast<Eigen::Index>(a))},
                       {"sd_rank", fr.rank_sd(static_cast<Eigen::Index>(a))},
                       {"significantly_worse_than_best", worse}});
    }
    f["ranks"] = std::move(ranks);
    summary["friedman"] = std::move(f);
  }
  detail::write_file(out / "summary.json", summary.dump(2) + "\n");
  detail::write_file(out / (exp1 ? "figure2.csv" : "figure3.csv"), fig.str());
  return result;
}

ExperimentResult run_experiment(const RunConfig& cfg, std::ostream* log) {
  cfg.validate(true);
  std::vector<Dataset> datasets;
  LoadOptions opts;
  opts.skip_nonnumeric = cfg.skip_nonnumeric;
  for (const auto& entry : cfg.datasets) {
    datasets.push_back(load_dataset(entry.path, entry.labels, opts));
    if (log) *log << "loaded " << entry.path.string() << ": n=" << datasets.back().n() << " m=" << datasets.back().m()
                  << " d=" << datasets.back().d() << "\n";
  }
  return run_experiment(cfg, datasets, log);
}

ExperimentResult run_experiment1(const RunConfig& cfg, std::ostream* log) {
  if (cfg.protocol != Protocol::exp1) throw ArgumentError("run_experiment1 needs protocol = exp1");
  return run_experiment(cfg, log);
}

ExperimentResult run_experiment2(const RunConfig& cfg, std::ostream* log) {
  if (cfg.protocol != Protocol::exp2) throw ArgumentError("run_experiment2 needs protocol = exp2");
  return run_experiment(cfg, log);
}

}  // namespace mcode
