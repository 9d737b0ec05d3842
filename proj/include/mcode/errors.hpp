#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace mcode {

/// Error categories. The CLI maps each one to a distinct exit code.
enum class ErrorCategory {
  parse = 2,
  validation = 3,
  argument = 4,
  numeric = 5,
  convergence = 6,
  undefined_metric = 7,
  io = 8,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& what)
      : std::runtime_error(what), category_(category) {}

  ErrorCategory category() const noexcept { return category_; }

 private:
  ErrorCategory category_;
};

class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error(ErrorCategory::parse, "line " + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class ValidationError : public Error {
 public:
  explicit ValidationError(const std::string& what) : Error(ErrorCategory::validation, what) {}
};

class ArgumentError : public Error {
 public:
  explicit ArgumentError(const std::string& what) : Error(ErrorCategory::argument, what) {}
};

class NumericError : public Error {
 public:
  explicit NumericError(const std::string& what) : Error(ErrorCategory::numeric, what) {}
};

class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, double final_violation)
      : Error(ErrorCategory::convergence,
              what + " (final violation " + std::to_string(final_violation) + ")"),
        final_violation_(final_violation) {}

  double final_violation() const noexcept { return final_violation_; }

 private:
  double final_violation_;
};

class UndefinedMetricError : public Error {
 public:
  explicit UndefinedMetricError(const std::string& what) : Error(ErrorCategory::undefined_metric, what) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error(ErrorCategory::io, what) {}
};

}  // namespace mcode
