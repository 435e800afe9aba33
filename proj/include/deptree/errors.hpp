#pragma once

#include <stdexcept>
#include <string>

namespace deptree {

/// Base class for all errors raised by the library.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Malformed input text (syntax level, position-reported where possible).
class ParseError : public Error {
 public:
  using Error::Error;
};

/// Structurally invalid model: dangling references, cycles, bad probabilities,
/// events in multiple dependency groups, inconsistent grids.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Failure during quantification: zero-probability conditioning, missing
/// tables, path-count overflow, unsupported frequency sources.
class AnalysisError : public Error {
 public:
  using Error::Error;
};

}  // namespace deptree
