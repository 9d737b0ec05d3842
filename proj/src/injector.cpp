#include "mcode/injector.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "mcode/errors.hpp"
#include "text_util.hpp"

namespace mcode {

namespace {

void check_fraction(double rate, const char* what) {
  if (!(rate >= 0.0 && rate <= 1.0)) throw ArgumentError(std::string(what) + " must lie in [0, 1]");
}

std::vector<std::size_t> sample_without_replacement(std::size_t population, std::size_t count, Rng& rng) {
  std::vector<std::size_t> all(population);
  std::iota(all.begin(), all.end(), std::size_t{0});
  std::vector<std::size_t> out;
  out.reserve(count);
  std::sample(all.begin(), all.end(), std::back_inserter(out), count, rng);
  return out;
}

std::pair<Dataset, InjectionReport> flip_cells(const Dataset& ds, std::vector<std::pair<std::size_t, std::size_t>> cells,
                                               InjectionReport report) {
  std::sort(cells.begin(), cells.end());
  LabelMatrix labels = ds.labels();
  report.outlier_mask.assign(ds.n(), 0);
  for (const auto& [i, j] : cells) {
    auto& cell = labels(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
    const std::uint8_t old = cell;
    cell = static_cast<std::uint8_t>(1 - old);
    report.flipped_cells.push_back({i, j, old, cell});
    report.outlier_mask[i] = 1;
  }
  return {ds.with_labels(std::move(labels)), std::move(report)};
}

}  // namespace

std::size_t InjectionReport::outlier_count() const {
  return static_cast<std::size_t>(std::count(outlier_mask.begin(), outlier_mask.end(), std::uint8_t{1}));
}

std::pair<Dataset, InjectionReport> inject_variable_noise(const Dataset& ds, double rate, Seed seed,
                                                          VariableNoiseUnit unit) {
  check_fraction(rate, "rate");
  InjectionReport report;
  report.protocol = InjectionProtocol::variable_level;
  report.rate = rate;
  report.seed = seed;
  Rng rng = make_rng(seed);
  std::vector<std::pair<std::size_t, std::size_t>> cells;
  if (unit == VariableNoiseUnit::cells) {
    const std::size_t total = ds.n() * ds.d();
    const auto count = static_cast<std::size_t>(std::llround(rate * static_cast<double>(total)));
    for (std::size_t c : sample_without_replacement(total, count, rng)) cells.emplace_back(c / ds.d(), c % ds.d());
  } else {
    const auto count = static_cast<std::size_t>(std::llround(rate * static_cast<double>(ds.n())));
    std::uniform_int_distribution<std::size_t> pick_label(0, ds.d() - 1);
    for (std::size_t i : sample_without_replacement(ds.n(), count, rng)) cells.emplace_back(i, pick_label(rng));
  }
  return flip_cells(ds, std::move(cells), std::move(report));
}

std::pair<Dataset, InjectionReport> inject_instance_noise(const Dataset& ds, double instance_rate, std::size_t p,
                                                          Seed seed) {
  check_fraction(instance_rate, "instance rate");
  if (p < 1 || p > ds.d())
    throw ArgumentError("outlying dimension count p=" + std::to_string(p) + " must lie in [1, " +
                        std::to_string(ds.d()) + "]");
  InjectionReport report;
  report.protocol = InjectionProtocol::instance_level;
  report.rate = instance_rate;
  report.p = p;
  report.seed = seed;
  Rng rng = make_rng(seed);
  const auto count = static_cast<std::size_t>(std::llround(instance_rate * static_cast<double>(ds.n())));
  std::vector<std::pair<std::size_t, std::size_t>> cells;
  for (std::size_t i : sample_without_replacement(ds.n(), count, rng)) {
    for (std::size_t j : sample_without_replacement(ds.d(), p, rng)) cells.emplace_back(i, j);
  }
  return flip_cells(ds, std::move(cells), std::move(report));
}

Dataset apply_flips(const Dataset& ds, const InjectionReport& report) {
  LabelMatrix labels = ds.labels();
  for (const auto& c : report.flipped_cells) {
    if (c.instance >= ds.n() || c.label >= ds.d()) throw ArgumentError("injection report does not match dataset shape");
    auto& cell = labels(static_cast<Eigen::Index>(c.instance), static_cast<Eigen::Index>(c.label));
    cell = static_cast<std::uint8_t>(1 - cell);
  }
  return ds.with_labels(std::move(labels));
}

std::string injection_audit_csv(const InjectionReport& report) {
  std::ostringstream out;
  detail::write_csv_record(out, {"instance", "label", "old", "new"});
  for (const auto& c : report.flipped_cells) {
    detail::write_csv_record(out, {std::to_string(c.instance), std::to_string(c.label), std::to_string(c.old_value),
                                   std::to_string(c.new_value)});
  }
  return out.str();
}

void write_injection_audit(const InjectionReport& report, const std::filesystem::path& path) {
  detail::write_file(path, injection_audit_csv(report));
}

}  // namespace mcode
