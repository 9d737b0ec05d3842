#include "mcode/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include "mcode/errors.hpp"
#include "text_util.hpp"

namespace mcode {

namespace {

std::vector<std::string> default_names(const std::string& prefix, std::size_t count) {
  std::vector<std::string> names;
  names.reserve(count);
  for (std::size_t i = 0; i < count; ++i) names.push_back(prefix + std::to_string(i));
  return names;
}

}  // namespace

Dataset::Dataset(Matrix features, LabelMatrix labels, std::vector<std::string> feature_names,
                 std::vector<std::string> label_names, std::string name)
    : features_(std::move(features)),
      labels_(std::move(labels)),
      feature_names_(std::move(feature_names)),
      label_names_(std::move(label_names)),
      name_(std::move(name)) {
  if (features_.rows() != labels_.rows())
    throw ValidationError("feature and label row counts differ (" + std::to_string(features_.rows()) + " vs " +
                          std::to_string(labels_.rows()) + ")");
  if (features_.rows() < 1) throw ValidationError("dataset must have at least one instance");
  if (features_.cols() < 1) throw ValidationError("dataset must have at least one feature");
  if (labels_.cols() < 1) throw ValidationError("dataset must have at least one label");
  if (feature_names_.size() != m()) throw ValidationError("feature_names length differs from feature count");
  if (label_names_.size() != d()) throw ValidationError("label_names length differs from label count");
  for (Eigen::Index i = 0; i < labels_.size(); ++i) {
    if (labels_.data()[i] > 1) throw ValidationError("label cell is not 0 or 1");
  }
  if (!features_.allFinite()) throw ValidationError("features contain non-finite values");
}

Dataset::Dataset(Matrix features, LabelMatrix labels, std::string name)
    : Dataset(features, labels, default_names("f", static_cast<std::size_t>(features.cols())),
              default_names("y", static_cast<std::size_t>(labels.cols())), std::move(name)) {}

Dataset Dataset::select_rows(std::span<const std::size_t> rows) const {
  Matrix f(static_cast<Eigen::Index>(rows.size()), features_.cols());
  LabelMatrix l(static_cast<Eigen::Index>(rows.size()), labels_.cols());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r] >= n()) throw ArgumentError("row index out of range");
    const auto src = static_cast<Eigen::Index>(rows[r]);
    f.row(static_cast<Eigen::Index>(r)) = features_.row(src);
    l.row(static_cast<Eigen::Index>(r)) = labels_.row(src);
  }
  return Dataset(std::move(f), std::move(l), feature_names_, label_names_, name_);
}

Dataset Dataset::with_labels(LabelMatrix labels) const {
  return Dataset(features_, std::move(labels), feature_names_, label_names_, name_);
}

// ---------------------------------------------------------------------------
// ARFF

namespace {

enum class AttrKind { numeric, nominal_numeric, nominal_binary, skipped };

struct Attribute {
  std::string name;
  AttrKind kind = AttrKind::numeric;
  std::vector<std::string> values;  // nominal declarations
  double omitted_value = 0.0;       // value of an omitted sparse entry
};

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

bool starts_with_ci(std::string_view s, std::string_view prefix) {
  return s.size() >= prefix.size() && lower(s.substr(0, prefix.size())) == prefix;
}

// Splits off a possibly quoted leading token.
std::pair<std::string, std::string_view> take_token(std::string_view s, std::size_t line) {
  s = detail::trim(s);
  if (s.empty()) throw ParseError(line, "expected attribute name");
  if (s.front() == '\'' || s.front() == '"') {
    const char q = s.front();
    std::string out;
    std::size_t i = 1;
    for (; i < s.size(); ++i) {
      if (s[i] == '\\' && i + 1 < s.size()) {
        out.push_back(s[++i]);
      } else if (s[i] == q) {
        break;
      } else {
        out.push_back(s[i]);
      }
    }
    if (i >= s.size()) throw ParseError(line, "unterminated quoted name");
    return {out, s.substr(i + 1)};
  }
  std::size_t end = 0;
  while (end < s.size() && !std::isspace(static_cast<unsigned char>(s[end])) && s[end] != '{') ++end;
  return {std::string(s.substr(0, end)), s.substr(end)};
}

Attribute parse_attribute(std::string_view rest, std::size_t line, bool skip_nonnumeric) {
  Attribute attr;
  auto [name, type] = take_token(rest, line);
  attr.name = std::move(name);
  type = detail::trim(type);
  if (type.empty()) throw ParseError(line, "attribute '" + attr.name + "' has no type");
  if (type.front() == '{') {
    const auto close = type.find('}');
    if (close == std::string_view::npos) throw ParseError(line, "unterminated nominal declaration");
    for (auto& v : detail::split_quoted(type.substr(1, close - 1), ',')) attr.values.push_back(v);
    if (attr.values.empty()) throw ParseError(line, "empty nominal declaration");
    bool all_numeric = true;
    for (const auto& v : attr.values) all_numeric = all_numeric && detail::parse_double(v).has_value();
    if (all_numeric) {
      attr.kind = AttrKind::nominal_numeric;
      attr.omitted_value = *detail::parse_double(attr.values.front());
    } else if (attr.values.size() == 2) {
      attr.kind = AttrKind::nominal_binary;
      attr.omitted_value = 0.0;
    } else if (skip_nonnumeric) {
      attr.kind = AttrKind::skipped;
    } else {
      throw ParseError(line, "attribute '" + attr.name + "' is nominal with non-numeric values");
    }
    return attr;
  }
  const std::string t = lower(std::get<0>(take_token(type, line)));
  if (t == "numeric" || t == "real" || t == "integer") {
    attr.kind = AttrKind::numeric;
  } else if (t == "string" || t == "date") {
    if (!skip_nonnumeric) throw ParseError(line, "attribute '" + attr.name + "' has unsupported type " + t);
    attr.kind = AttrKind::skipped;
  } else {
    throw ParseError(line, "attribute '" + attr.name + "' has unknown type '" + t + "'");
  }
  return attr;
}

double convert_value(const Attribute& attr, std::string_view raw, std::size_t line) {
  const std::string_view v = detail::trim(raw);
  if (v == "?") throw ParseError(line, "missing value in attribute '" + attr.name + "' is not supported");
  switch (attr.kind) {
    case AttrKind::numeric:
    case AttrKind::nominal_numeric: {
      const auto parsed = detail::parse_double(detail::unquote(v));
      if (!parsed) throw ParseError(line, "cannot parse '" + std::string(v) + "' for attribute '" + attr.name + "'");
      return *parsed;
    }
    case AttrKind::nominal_binary: {
      const std::string val = detail::unquote(v);
      if (val == attr.values[0]) return 0.0;
      if (val == attr.values[1]) return 1.0;
      throw ParseError(line, "value '" + val + "' not declared for attribute '" + attr.name + "'");
    }
    case AttrKind::skipped:
      return 0.0;
  }
  return 0.0;
}

}  // namespace

Dataset parse_arff(const std::string& text, std::size_t label_count, const LoadOptions& options, std::string name) {
  std::istringstream in(text);
  std::string raw;
  std::size_t line_no = 0;
  std::vector<Attribute> attrs;
  std::string relation;
  bool in_data = false;
  std::vector<std::vector<double>> rows;
  std::vector<std::size_t> row_lines;

  std::vector<std::size_t> feature_cols;  // attribute index per kept feature
  std::size_t first_label = 0;

  auto begin_data = [&](std::size_t line) {
    if (attrs.empty()) throw ParseError(line, "data section without any attribute declarations");
    if (label_count == 0) throw ArgumentError("label count must be at least 1");
    if (label_count > attrs.size())
      throw ArgumentError("label count " + std::to_string(label_count) + " exceeds attribute count " +
                          std::to_string(attrs.size()));
    first_label = attrs.size() - label_count;
    for (std::size_t a = first_label; a < attrs.size(); ++a) {
      if (attrs[a].kind == AttrKind::skipped || attrs[a].kind == AttrKind::nominal_binary)
        throw ValidationError("label attribute '" + attrs[a].name + "' is not declared with 0/1 values");
    }
    for (std::size_t a = 0; a < first_label; ++a)
      if (attrs[a].kind != AttrKind::skipped) feature_cols.push_back(a);
  };

  while (std::getline(in, raw)) {
    ++line_no;
    std::string_view line = detail::trim(raw);
    if (line.empty() || line.front() == '%') continue;
    if (!in_data) {
      if (starts_with_ci(line, "@relation")) {
        relation = std::get<0>(take_token(line.substr(9), line_no));
      } else if (starts_with_ci(line, "@attribute")) {
        attrs.push_back(parse_attribute(line.substr(10), line_no, options.skip_nonnumeric));
      } else if (starts_with_ci(line, "@data")) {
        begin_data(line_no);
        in_data = true;
      } else {
        throw ParseError(line_no, "unexpected header line '" + std::string(line) + "'");
      }
      continue;
    }
    std::vector<double> row(attrs.size());
    for (std::size_t a = 0; a < attrs.size(); ++a) row[a] = attrs[a].omitted_value;
    if (line.front() == '{') {
      const auto close = line.find('}');
      if (close == std::string_view::npos) throw ParseError(line_no, "unterminated sparse row");
      for (const auto& entry : detail::split_quoted(line.substr(1, close - 1), ',', /*keep_quotes=*/true)) {
        const std::string_view e = detail::trim(entry);
        if (e.empty()) continue;
        const auto sp = e.find_first_of(" \t");
        if (sp == std::string_view::npos) throw ParseError(line_no, "sparse entry without value");
        std::size_t idx = 0;
        const auto idx_text = e.substr(0, sp);
        const auto res = std::from_chars(idx_text.data(), idx_text.data() + idx_text.size(), idx);
        if (res.ec != std::errc{} || idx >= attrs.size()) throw ParseError(line_no, "bad sparse index");
        row[idx] = convert_value(attrs[idx], e.substr(sp + 1), line_no);
      }
    } else {
      const auto fields = detail::split_quoted(line, ',', /*keep_quotes=*/true);
      if (fields.size() != attrs.size())
        throw ParseError(line_no, "expected " + std::to_string(attrs.size()) + " values, found " +
                                      std::to_string(fields.size()));
      for (std::size_t a = 0; a < attrs.size(); ++a) row[a] = convert_value(attrs[a], fields[a], line_no);
    }
    rows.push_back(std::move(row));
    row_lines.push_back(line_no);
  }
  if (!in_data) throw ParseError(line_no, "missing @data section");
  if (rows.empty()) throw ValidationError("ARFF file has no data rows");

  const auto n = static_cast<Eigen::Index>(rows.size());
  Matrix features(n, static_cast<Eigen::Index>(feature_cols.size()));
  LabelMatrix labels(n, static_cast<Eigen::Index>(label_count));
  for (Eigen::Index r = 0; r < n; ++r) {
    const auto& row = rows[static_cast<std::size_t>(r)];
    for (std::size_t c = 0; c < feature_cols.size(); ++c) features(r, static_cast<Eigen::Index>(c)) = row[feature_cols[c]];
    for (std::size_t j = 0; j < label_count; ++j) {
      const double v = row[first_label + j];
      if (v != 0.0 && v != 1.0)
        throw ValidationError("line " + std::to_string(row_lines[static_cast<std::size_t>(r)]) + ": label '" +
                              attrs[first_label + j].name + "' has non-binary value " + detail::format_double(v));
      labels(r, static_cast<Eigen::Index>(j)) = static_cast<std::uint8_t>(v);
    }
  }
  std::vector<std::string> fnames;
  for (auto c : feature_cols) fnames.push_back(attrs[c].name);
  std::vector<std::string> lnames;
  for (std::size_t a = first_label; a < attrs.size(); ++a) lnames.push_back(attrs[a].name);
  if (name.empty()) name = relation;
  return Dataset(std::move(features), std::move(labels), std::move(fnames), std::move(lnames), std::move(name));
}

Dataset load_arff(const std::filesystem::path& path, std::size_t label_count, const LoadOptions& options) {
  return parse_arff(detail::read_file(path), label_count, options, path.stem().string());
}

Dataset load_csv(const std::filesystem::path& path, std::size_t label_count) {
  const auto records = detail::parse_csv(detail::read_file(path));
  if (records.empty()) throw ParseError(1, "CSV file has no header row");
  const auto& header = records.front();
  if (label_count == 0) throw ArgumentError("label count must be at least 1");
  if (label_count > header.size())
    throw ArgumentError("label count " + std::to_string(label_count) + " exceeds column count " +
                        std::to_string(header.size()));
  const std::size_t m = header.size() - label_count;
  std::vector<std::size_t> data_rows;
  for (std::size_t r = 1; r < records.size(); ++r) {
    if (records[r].size() == 1 && detail::trim(records[r][0]).empty()) continue;
    data_rows.push_back(r);
  }
  if (data_rows.empty()) throw ValidationError("CSV file has no data rows");
  Matrix features(static_cast<Eigen::Index>(data_rows.size()), static_cast<Eigen::Index>(m));
  LabelMatrix labels(static_cast<Eigen::Index>(data_rows.size()), static_cast<Eigen::Index>(label_count));
  for (std::size_t i = 0; i < data_rows.size(); ++i) {
    const auto& rec = records[data_rows[i]];
    const std::size_t line = data_rows[i] + 1;
    if (rec.size() != header.size())
      throw ParseError(line, "expected " + std::to_string(header.size()) + " fields, found " + std::to_string(rec.size()));
    for (std::size_t c = 0; c < header.size(); ++c) {
      const auto v = detail::parse_double(rec[c]);
      if (!v) throw ParseError(line, "cannot parse '" + rec[c] + "' in column '" + header[c] + "'");
      if (c < m) {
        features(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = *v;
      } else {
        if (*v != 0.0 && *v != 1.0)
          throw ValidationError("line " + std::to_string(line) + ": label '" + header[c] + "' has non-binary value " + rec[c]);
        labels(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c - m)) = static_cast<std::uint8_t>(*v);
      }
    }
  }
  std::vector<std::string> fnames(header.begin(), header.begin() + static_cast<std::ptrdiff_t>(m));
  std::vector<std::string> lnames(header.begin() + static_cast<std::ptrdiff_t>(m), header.end());
  return Dataset(std::move(features), std::move(labels), std::move(fnames), std::move(lnames), path.stem().string());
}

Dataset load_dataset(const std::filesystem::path& path, std::size_t label_count, const LoadOptions& options) {
  const std::string ext = lower(path.extension().string());
  if (ext == ".csv") return load_csv(path, label_count);
  if (ext == ".arff") return load_arff(path, label_count, options);
  throw ArgumentError("unsupported dataset extension '" + ext + "' (expected .arff or .csv)");
}

namespace {

std::string arff_quote(const std::string& s) {
  const bool plain = !s.empty() && std::none_of(s.begin(), s.end(), [](char c) {
    return std::isspace(static_cast<unsigned char>(c)) || c == ',' || c == '\'' || c == '"' || c == '{' || c == '}' ||
           c == '%' || c == '\\';
  });
  if (plain) return s;
  std::string out = "'";
  for (char c : s) {
    if (c == '\'' || c == '\\') out.push_back('\\');
    out.push_back(c);
  }
  out.push_back('\'');
  return out;
}

}  // namespace

void save_arff(const Dataset& ds, const std::filesystem::path& path) {
  std::ostringstream out;
  out << "@relation " << arff_quote(ds.name().empty() ? "dataset" : ds.name()) << "\n\n";
  for (const auto& f : ds.feature_names()) out << "@attribute " << arff_quote(f) << " numeric\n";
  for (const auto& l : ds.label_names()) out << "@attribute " << arff_quote(l) << " {0,1}\n";
  out << "\n@data\n";
  const auto& F = ds.features();
  const auto& L = ds.labels();
  for (Eigen::Index r = 0; r < F.rows(); ++r) {
    for (Eigen::Index c = 0; c < F.cols(); ++c) out << detail::format_double(F(r, c)) << ',';
    for (Eigen::Index j = 0; j < L.cols(); ++j) out << static_cast<int>(L(r, j)) << (j + 1 < L.cols() ? "," : "\n");
  }
  detail::write_file(path, out.str());
}

void save_csv(const Dataset& ds, const std::filesystem::path& path) {
  std::ostringstream out;
  std::vector<std::string> header = ds.feature_names();
  header.insert(header.end(), ds.label_names().begin(), ds.label_names().end());
  detail::write_csv_record(out, header);
  const auto& F = ds.features();
  const auto& L = ds.labels();
  for (Eigen::Index r = 0; r < F.rows(); ++r) {
    for (Eigen::Index c = 0; c < F.cols(); ++c) out << detail::format_double(F(r, c)) << ',';
    for (Eigen::Index j = 0; j < L.cols(); ++j) out << static_cast<int>(L(r, j)) << (j + 1 < L.cols() ? "," : "\r\n");
  }
  detail::write_file(path, out.str());
}

DatasetSummary summarize(const Dataset& ds) {
  DatasetSummary s;
  s.n = ds.n();
  s.m = ds.m();
  s.d = ds.d();
  std::set<std::vector<std::uint8_t>> distinct;
  std::size_t ones = 0;
  const auto& L = ds.labels();
  for (Eigen::Index r = 0; r < L.rows(); ++r) {
    std::vector<std::uint8_t> row(L.row(r).data(), L.row(r).data() + L.cols());
    for (auto b : row) ones += b;
    distinct.insert(std::move(row));
  }
  s.label_cardinality = static_cast<double>(ones) / static_cast<double>(s.n);
  s.label_density = s.label_cardinality / static_cast<double>(s.d);
  s.distinct_label_sets = distinct.size();
  return s;
}

std::string format_summary(const Dataset& ds, const DatasetSummary& s) {
  std::ostringstream out;
  out << "name: " << ds.name() << '\n'
      << "N: " << s.n << '\n'
      << "m: " << s.m << '\n'
      << "d: " << s.d << '\n'
      << "label_cardinality: " << detail::format_fixed(s.label_cardinality, 4) << '\n'
      << "label_density: " << detail::format_fixed(s.label_density, 4) << '\n'
      << "distinct_label_sets: " << s.distinct_label_sets << '\n';
  return out.str();
}

Dataset bootstrap_sample(const Dataset& ds, std::size_t size, Seed seed) {
  if (size == 0) throw ArgumentError("bootstrap size must be at least 1");
  Rng rng = make_rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, ds.n() - 1);
  std::vector<std::size_t> rows(size);
  for (auto& r : rows) r = pick(rng);
  return ds.select_rows(rows);
}

FoldPlan make_fold_plan(std::size_t n, std::size_t k, std::size_t repeats, Seed seed) {
  if (k < 2) throw ArgumentError("fold count must be at least 2");
  if (k > n) throw ArgumentError("fold count " + std::to_string(k) + " exceeds instance count " + std::to_string(n));
  if (repeats < 1) throw ArgumentError("repeat count must be at least 1");
  FoldPlan plan{n, k, repeats, seed, {}};
  for (std::size_t r = 0; r < repeats; ++r) {
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    Rng rng = make_rng(derive_seed(seed, {r}));
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<std::size_t> assign(n);
    for (std::size_t pos = 0; pos < n; ++pos) assign[perm[pos]] = pos % k;
    plan.assignment.push_back(std::move(assign));
  }
  return plan;
}

std::vector<std::size_t> FoldPlan::test_indices(std::size_t repeat, std::size_t fold) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < n; ++i)
    if (assignment.at(repeat)[i] == fold) out.push_back(i);
  return out;
}

std::vector<std::size_t> FoldPlan::train_indices(std::size_t repeat, std::size_t fold) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < n; ++i)
    if (assignment.at(repeat)[i] != fold) out.push_back(i);
  return out;
}

std::pair<Dataset, Dataset> split_half(const Dataset& ds, Seed seed) {
  if (ds.n() < 2) throw ArgumentError("split_half needs at least 2 instances");
  std::vector<std::size_t> perm(ds.n());
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  Rng rng = make_rng(seed);
  std::shuffle(perm.begin(), perm.end(), rng);
  const std::size_t first = (ds.n() + 1) / 2;
  std::vector<std::size_t> a(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(first));
  std::vector<std::size_t> b(perm.begin() + static_cast<std::ptrdiff_t>(first), perm.end());
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  return {ds.select_rows(a), ds.select_rows(b)};
}

Dataset make_synthetic(const SyntheticSpec& spec, Seed seed) {
  if (spec.n < 1 || spec.m < 1 || spec.d < 1) throw ArgumentError("synthetic dataset needs n, m, d >= 1");
  Rng rng = make_rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  const auto n = static_cast<Eigen::Index>(spec.n);
  const auto m = static_cast<Eigen::Index>(spec.m);
  const auto d = static_cast<Eigen::Index>(spec.d);
  Matrix directions(d, m);
  for (Eigen::Index j = 0; j < d; ++j) {
    for (Eigen::Index c = 0; c < m; ++c) directions(j, c) = gauss(rng);
    directions.row(j) /= directions.row(j).norm();
  }
  Vector bias(d);
  for (Eigen::Index j = 0; j < d; ++j) bias(j) = -1.0 + 0.5 * gauss(rng);

  Matrix features(n, m);
  LabelMatrix labels(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index c = 0; c < m; ++c) features(i, c) = gauss(rng);
    for (Eigen::Index j = 0; j < d; ++j) {
      double logit = bias(j) + spec.signal * directions.row(j).dot(features.row(i));
      if (j > 0) logit += spec.coupling * (labels(i, j - 1) ? 1.0 : -1.0);
      const double p = 1.0 / (1.0 + std::exp(-logit));
      labels(i, j) = unif(rng) < p ? 1 : 0;
    }
  }
  return Dataset(std::move(features), std::move(labels), "synthetic");
}

}  // namespace mcode
