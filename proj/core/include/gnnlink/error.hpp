#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace gnnlink {

/// Malformed or inconsistent input data (bad CSV, unknown ids, schema mismatch).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A value failed to parse. Carries the 1-based line and the offending column name.
class ParseError : public DataError {
 public:
  ParseError(const std::string& message, std::size_t line, std::string column)
      : DataError(message), line_(line), column_(std::move(column)) {}

  std::size_t line() const noexcept { return line_; }
  const std::string& column() const noexcept { return column_; }

 private:
  std::size_t line_;
  std::string column_;
};

/// Invalid configuration or arguments.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Non-finite values during optimization.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace gnnlink
