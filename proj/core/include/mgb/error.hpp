#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace mgb {

/// Base for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad user configuration (CLI flags, device inventory, mix specs). Maps to
/// exit code 2 in the CLI.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A caller broke an API precondition (stale plan, double release, ...).
/// Maps to exit code 3 in the CLI.
class ContractViolation : public Error {
 public:
  using Error::Error;
};

/// Static analysis failure while building tasks.
class AnalysisError : public Error {
 public:
  using Error::Error;
};

/// Lazy-runtime misuse (recording on a bound address, unknown launch args).
class RuntimeError : public Error {
 public:
  using Error::Error;
};

enum class ParseErrorKind {
  Syntax,
  UnknownSymbol,
  UnresolvedLabel,
  UnresolvedFunction,
  ThreadLimit,
  Recursion,
  Structure,
};

const char* to_string(ParseErrorKind kind);

/// Trace-language diagnostic. `line` and `column` are 1-based; 0 means the
/// error is not tied to a position.
class ParseError : public Error {
 public:
  ParseError(ParseErrorKind kind, std::size_t line, std::size_t column,
             const std::string& message);

  ParseErrorKind kind() const { return kind_; }
  std::size_t line() const { return line_; }
  std::size_t column() const { return column_; }

 private:
  ParseErrorKind kind_;
  std::size_t line_;
  std::size_t column_;
};

}  // namespace mgb
