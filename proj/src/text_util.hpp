#pragma once

// Small text helpers shared by the loaders and report writers.

#include <charconv>
#include <cmath>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

namespace mcode::detail {

inline std::string_view trim(std::string_view s) {
  const auto ws = " \t\r\n";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

/// Removes one level of matching single or double quotes.
std::string unquote(std::string_view s);

/// Splits on `sep` outside of single/double quotes. Fields are trimmed;
/// quotes are stripped unless keep_quotes is set.
std::vector<std::string> split_quoted(std::string_view s, char sep, bool keep_quotes = false);

std::optional<double> parse_double(std::string_view s);

/// Shortest decimal representation that round-trips exactly.
std::string format_double(double v);
std::string format_fixed(double v, int digits);

std::string read_file(const std::filesystem::path& path);
/// Writes through a temporary file and renames, so readers never observe a partial file.
void write_file(const std::filesystem::path& path, const std::string& content);

/// RFC-4180 records. Handles quoted fields with embedded separators, quotes and newlines.
std::vector<std::vector<std::string>> parse_csv(const std::string& text);
void write_csv_record(std::ostream& out, const std::vector<std::string>& fields);
std::string csv_escape(const std::string& field);

}  // namespace mcode::detail
