#include <cmath>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mcode/dataset.hpp"
#include "mcode/dbr.hpp"
#include "mcode/errors.hpp"
#include "mcode/eval.hpp"
#include "mcode/experiment.hpp"
#include "mcode/injector.hpp"
#include "mcode/scoring.hpp"
#include "text_util.hpp"

namespace fs = std::filesystem;
using namespace mcode;

namespace {

struct DataArgs {
  std::string path;
  std::size_t labels = 0;
  bool skip_nonnumeric = false;

  void add(CLI::App* app, const std::string& flag = "--data", const std::string& help = "dataset file (.arff or .csv)") {
    app->add_option(flag, path, help)->required();
    app->add_option("--labels,-d", labels, "number of label attributes (the last columns)")->required();
    app->add_flag("--skip-nonnumeric", skip_nonnumeric, "drop string/identifier attributes instead of failing");
  }

  Dataset load() const {
    LoadOptions opts;
    opts.skip_nonnumeric = skip_nonnumeric;
    return load_dataset(path, labels, opts);
  }
};

void write_output(const std::string& path, const std::string& content) {
  if (path.empty() || path == "-")
    std::cout << content;
  else
    detail::write_file(path, content);
}

std::vector<std::uint8_t> read_truth(const std::string& audit_path, std::size_t n) {
  std::vector<std::uint8_t> mask(n, 0);
  const auto rows = detail::parse_csv(detail::read_file(audit_path));
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (rows[i].empty() || (rows[i].size() == 1 && rows[i][0].empty())) continue;
    const auto v = detail::parse_double(rows[i][0]);
    if (!v || *v < 0 || static_cast<std::size_t>(*v) >= n) throw ParseError(i + 1, "bad instance index in audit file");
    mask[static_cast<std::size_t>(*v)] = 1;
  }
  return mask;
}

double parse_r(const std::string& text) {
  if (text == "inf") return std::numeric_limits<double>::infinity();
  const auto v = detail::parse_double(text);
  if (!v) throw ArgumentError("r must be 1, 2 or inf");
  return *v;
}

int run_info(const DataArgs& data) {
  const Dataset ds = data.load();
  std::cout << format_summary(ds, summarize(ds));
  return 0;
}

int run_generate(const SyntheticSpec& spec, std::uint64_t seed, const std::string& out) {
  const Dataset ds = make_synthetic(spec, Seed{seed});
  const fs::path p(out);
  if (p.extension() == ".csv")
    save_csv(ds, p);
  else
    save_arff(ds, p);
  std::cerr << "wrote " << out << " (n=" << ds.n() << " m=" << ds.m() << " d=" << ds.d() << ")\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Conditional outlier detection for multi-label data"};
  app.require_subcommand(1);

  // info
  DataArgs info_data;
  auto* info = app.add_subcommand("info", "print dataset statistics");
  info_data.add(info);

  // generate
  SyntheticSpec spec;
  std::uint64_t gen_seed = 1;
  std::string gen_out;
  auto* gen = app.add_subcommand("generate", "write a synthetic multi-label dataset");
  gen->add_option("--n", spec.n, "instances");
  gen->add_option("--m", spec.m, "features");
  gen->add_option("--d", spec.d, "labels");
  gen->add_option("--signal", spec.signal, "feature effect strength");
  gen->add_option("--coupling", spec.coupling, "label-to-label effect strength");
  gen->add_option("--seed", gen_seed, "random seed");
  gen->add_option("--out,-o", gen_out, "output file (.arff or .csv)")->required();

  // train
  DataArgs train_data;
  std::string structure = "DBR";
  std::optional<double> fixed_lambda;
  std::vector<double> grid{1e-3, 1e-2, 1e-1, 1.0, 10.0, 100.0};
  std::size_t cv_folds = 5;
  std::uint64_t train_seed = 1;
  std::size_t train_threads = 1;
  std::string model_out;
  auto* train = app.add_subcommand("train", "train a DBR or BR model");
  train_data.add(train);
  train->add_option("--structure", structure, "DBR or BR");
  train->add_option("--lambda", fixed_lambda, "fixed L2 strength (skips cross validation)");
  train->add_option("--lambda-grid", grid, "candidate L2 strengths")->delimiter(',');
  train->add_option("--cv-folds", cv_folds, "inner cross-validation folds");
  train->add_option("--seed", train_seed, "random seed");
  train->add_option("--threads", train_threads, "worker threads");
  train->add_option("--out,-o", model_out, "model file (JSON)")->required();

  // inject
  DataArgs inject_data;
  std::string protocol = "variable";
  std::string unit = "cells";
  double inject_rate = 0.005;
  std::size_t inject_p = 1;
  std::uint64_t inject_seed = 1;
  std::string inject_out;
  std::string audit_out;
  auto* inject = app.add_subcommand("inject", "flip labels to create conditional outliers");
  inject_data.add(inject);
  inject->add_option("--protocol", protocol, "variable or instance")->check(CLI::IsMember({"variable", "instance"}));
  inject->add_option("--unit", unit, "variable protocol unit: cells or instances")->check(CLI::IsMember({"cells", "instances"}));
  inject->add_option("--rate", inject_rate, "fraction of cells (variable) or instances (instance)");
  inject->add_option("--p", inject_p, "labels flipped per outlier (instance protocol)");
  inject->add_option("--seed", inject_seed, "random seed");
  inject->add_option("--out,-o", inject_out, "perturbed dataset (.arff or .csv)")->required();
  inject->add_option("--audit", audit_out, "injection audit CSV")->required();

  // score
  DataArgs score_data;
  std::string score_model;
  std::string score_method = "lof";
  std::string score_train;
  std::string score_audit;
  std::string score_r = "inf";
  std::size_t score_k = 30;
  double score_nu = 0.01;
  double score_gamma = 0.0;
  std::uint64_t score_seed = 1;
  std::size_t score_threads = 1;
  bool raw_joint = false;
  std::string score_out;
  auto* score = app.add_subcommand("score", "score instances with one detector");
  score_data.add(score);
  score->add_option("--model", score_model, "trained model (needed by rho-space methods)");
  score->add_option("--method", score_method, "comp, rd, lr, lof, ocsvm, base_rd, base_lof or base_ocsvm");
  score->add_option("--train", score_train,
                    "training data: held-out rows for ocsvm, the training fold for baselines");
  score->add_option("--audit", score_audit, "injection audit CSV; adds an outlier column");
  score->add_option("--r", score_r, "norm order for lr: 1, 2 or inf");
  score->add_option("--k", score_k, "LOF neighbors");
  score->add_option("--nu", score_nu, "one-class SVM nu");
  score->add_option("--gamma", score_gamma, "RBF bandwidth (0 = median heuristic)");
  score->add_option("--seed", score_seed, "random seed");
  score->add_option("--threads", score_threads, "worker threads");
  score->add_flag("--raw-joint", raw_joint, "baselines: do not standardize features");
  score->add_option("--out,-o", score_out, "score CSV (default stdout)");

  // evaluate
  std::string eval_scores;
  std::string eval_matrix;
  double eval_alpha = 0.05;
  auto* evaluate = app.add_subcommand("evaluate", "compute AUC / AUC-PR, or Friedman ranks of a method matrix");
  auto* scores_opt = evaluate->add_option("--scores", eval_scores, "score CSV with an outlier column");
  auto* matrix_opt = evaluate->add_option("--matrix", eval_matrix, "CSV: method,dataset1,dataset2,... of mean scores");
  scores_opt->excludes(matrix_opt);
  evaluate->add_option("--alpha", eval_alpha, "significance level");

  // experiments
  std::string exp_config;
  std::vector<std::string> exp_data;
  std::vector<std::string> exp_set;
  std::string exp_out;
  std::optional<std::uint64_t> exp_seed;
  std::optional<std::size_t> exp_threads;
  bool exp_quiet = false;
  auto add_exp = [&](const std::string& name, const std::string& help) {
    auto* sub = app.add_subcommand(name, help);
    sub->add_option("--config,-c", exp_config, "key = value configuration file");
    sub->add_option("--data", exp_data, "dataset as path:label_count (repeatable)");
    sub->add_option("--set", exp_set, "override one config key, key=value (repeatable)");
    sub->add_option("--out,-o", exp_out, "output directory");
    sub->add_option("--seed", exp_seed, "random seed");
    sub->add_option("--threads", exp_threads, "concurrent folds");
    sub->add_flag("--quiet,-q", exp_quiet, "no progress output");
    return sub;
  };
  auto* exp1 = add_exp("exp1", "variable-level injection, AUC over repeated k-fold CV");
  auto* exp2 = add_exp("exp2", "instance-level injection over a p sweep, AUC-PR");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : static_cast<int>(ErrorCategory::argument);
  }

  try {
    if (*info) return run_info(info_data);
    if (*gen) return run_generate(spec, gen_seed, gen_out);

    if (*train) {
      const Dataset ds = train_data.load();
      const LambdaPolicy policy = fixed_lambda ? LambdaPolicy::fixed(*fixed_lambda) : LambdaPolicy{grid, cv_folds};
      DbrOptions opts;
      opts.threads = train_threads;
      const DbrModel model = train_dbr(ds, parse_structure(structure), policy, Seed{train_seed}, opts);
      save_dbr(model, model_out);
      std::cerr << "trained " << to_string(model.structure) << " with " << model.parameter_count() << " parameters\n";
      return 0;
    }

    if (*inject) {
      const Dataset ds = inject_data.load();
      auto [noisy, report] =
          protocol == "variable"
              ? inject_variable_noise(ds, inject_rate, Seed{inject_seed},
                                      unit == "cells" ? VariableNoiseUnit::cells : VariableNoiseUnit::instances)
              : inject_instance_noise(ds, inject_rate, inject_p, Seed{inject_seed});
      const fs::path out(inject_out);
      if (out.extension() == ".csv")
        save_csv(noisy, out);
      else
        save_arff(noisy, out);
      write_injection_audit(report, audit_out);
      std::cerr << "flipped " << report.flipped_cells.size() << " cells in " << report.outlier_count() << " instances\n";
      return 0;
    }

    if (*score) {
      const Method method = parse_method(score_method);
      const Dataset test = score_data.load();
      ScoreParams params;
      params.r = parse_r(score_r);
      params.k = score_k;
      params.nu = score_nu;
      params.gamma = score_gamma;
      params.seed = Seed{score_seed};
      params.threads = score_threads;
      params.standardize_joint = !raw_joint;
      ScoreVector sv;
      LoadOptions lo;
      lo.skip_nonnumeric = score_data.skip_nonnumeric;
      if (is_baseline(method)) {
        if (score_train.empty() && method == Method::base_ocsvm) throw ArgumentError("base_ocsvm needs --train");
        const Dataset tr = score_train.empty() ? test : load_dataset(score_train, score_data.labels, lo);
        sv = baseline_joint_scores(tr, test, method, params);
      } else {
        if (score_model.empty()) throw ArgumentError(method_key(method) + " needs --model");
        const DbrModel model = load_dbr(score_model);
        const RhoMatrix rho = compute_rho(model, test);
        switch (method) {
          case Method::comp: sv = score_comp(rho); break;
          case Method::rd: sv = score_rd(rho, params); break;
          case Method::lr: sv = score_lr(rho, params.r); break;
          case Method::lof: sv = score_lof(rho, params.k, params.threads); break;
          default: {
            if (score_train.empty()) throw ArgumentError("ocsvm needs --train with held-out training rows");
            const RhoMatrix train_rho = compute_rho(model, load_dataset(score_train, score_data.labels, lo));
            sv = score_ocsvm(train_rho, rho, params);
          }
        }
      }
      if (!sv.note.empty()) std::cerr << "note: " << sv.note << "\n";
      std::vector<std::uint8_t> truth;
      if (!score_audit.empty()) truth = read_truth(score_audit, test.n());
      write_output(score_out, score_table_csv(sv, percentile_rank(sv), truth));
      return 0;
    }

    if (*evaluate) {
      if (!eval_scores.empty()) {
        const auto rows = detail::parse_csv(detail::read_file(eval_scores));
        if (rows.empty()) throw ParseError(1, "empty score file");
        const auto& header = rows[0];
        const auto col = [&](const std::string& name) {
          for (std::size_t i = 0; i < header.size(); ++i)
            if (header[i] == name) return i;
          throw ValidationError("score file lacks a '" + name + "' column");
        };
        const std::size_t sc = col("score");
        const std::size_t oc = col("outlier");
        std::vector<double> s;
        std::vector<std::uint8_t> t;
        for (std::size_t i = 1; i < rows.size(); ++i) {
          if (rows[i].size() != header.size()) continue;
          const auto v = detail::parse_double(rows[i][sc]);
          if (!v) throw ParseError(i + 1, "bad score value");
          s.push_back(*v);
          t.push_back(rows[i][oc] == "1" ? 1 : 0);
        }
        std::cout << "auc: " << detail::format_double(roc_auc(s, t)) << "\n";
        std::cout << "auc_pr: " << detail::format_double(pr_auc(s, t)) << "\n";
        return 0;
      }
      if (!eval_matrix.empty()) {
        const auto rows = detail::parse_csv(detail::read_file(eval_matrix));
        std::vector<std::string> names;
        std::vector<std::vector<double>> vals;
        for (std::size_t i = 1; i < rows.size(); ++i) {
          if (rows[i].size() < 2) continue;
          names.push_back(rows[i][0]);
          std::vector<double> row;
          for (std::size_t c = 1; c < rows[i].size(); ++c) {
            const auto v = detail::parse_double(rows[i][c]);
            if (!v) throw ParseError(i + 1, "bad matrix value");
            row.push_back(*v);
          }
          if (!vals.empty() && row.size() != vals.front().size()) throw ParseError(i + 1, "ragged matrix row");
          vals.push_back(std::move(row));
        }
        if (vals.empty()) throw ValidationError("matrix has no method rows");
        Matrix m(static_cast<Eigen::Index>(vals.size()), static_cast<Eigen::Index>(vals.front().size()));
        for (std::size_t r = 0; r < vals.size(); ++r)
          for (std::size_t c = 0; c < vals[r].size(); ++c) m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = vals[r][c];
        const FriedmanReport fr = friedman_holm(m, eval_alpha);
        std::cout << "friedman_chi_square: " << detail::format_double(fr.chi_square) << "\n";
        std::cout << "friedman_p_value: " << detail::format_double(fr.p_value) << "\n";
        std::cout << "best: " << names[fr.best] << "\n";
        std::ostringstream csv;
        detail::write_csv_record(csv, {"method", "mean_rank", "sd_rank", "holm_p", "significantly_worse"});
        for (std::size_t r = 0; r < names.size(); ++r) {
          std::string p = "";
          std::string sig = "0";
          for (const auto& c : fr.comparisons)
            if (c.method == r) {
              p = detail::format_double(c.p_value);
              sig = c.significant ? "1" : "0";
            }
          detail::write_csv_record(csv, {names[r], detail::format_fixed(fr.mean_ranks(static_cast<Eigen::Index>(r)), 2),
                                         detail::format_fixed(fr.rank_sd(static_cast<Eigen::Index>(r)), 2), p, sig});
        }
        std::cout << csv.str();
        return 0;
      }
      throw ArgumentError("evaluate needs --scores or --matrix");
    }

    if (*exp1 || *exp2) {
      RunConfig cfg = exp_config.empty() ? RunConfig{} : RunConfig::load(exp_config);
      cfg.protocol = *exp1 ? Protocol::exp1 : Protocol::exp2;
      if (!exp_data.empty()) {
        std::string joined;
        for (const auto& d : exp_data) joined += (joined.empty() ? "" : ",") + d;
        cfg.set("datasets", joined);
      }
      for (const auto& kv : exp_set) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw ArgumentError("--set expects key=value, got '" + kv + "'");
        cfg.set(std::string(detail::trim(kv.substr(0, eq))), std::string(detail::trim(kv.substr(eq + 1))));
      }
      if (!exp_out.empty()) cfg.output = exp_out;
      if (exp_seed) cfg.seed = *exp_seed;
      if (exp_threads) cfg.threads = *exp_threads;
      const ExperimentResult res = run_experiment(cfg, exp_quiet ? nullptr : &std::cerr);
      for (const auto& rep : res.reports) {
        std::cerr << rep.dataset << " (" << rep.metric << ")\n";
        for (const auto& m : rep.methods)
          std::cerr << "  " << m.name << ": " << (std::isfinite(m.mean) ? detail::format_fixed(m.mean, 3) : "NA") << " ("
                    << (std::isfinite(m.sd) ? detail::format_fixed(m.sd, 3) : "NA") << ")" << (m.best ? " *" : "") << "\n";
      }
      std::cout << cfg.output.string() << "\n";
      if (res.all_undefined) {
        std::cerr << "error: no metric is defined for any fold (no injected outliers)\n";
        return static_cast<int>(ErrorCategory::undefined_metric);
      }
      return 0;
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return static_cast<int>(e.category());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
