#pragma once

#include <stdexcept>
#include <string>

namespace fzsl {

/// Base class for all engine errors.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor shapes do not conform (matmul inner extents, empty grids, ...).
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Input values outside the documented domain (e.g. truth values outside [0,1]).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Invalid operation parameter (p < 1, k > M, eps outside range, ...).
class ParameterError : public Error {
 public:
  using Error::Error;
};

/// Bad data: corrupt files, labels out of range, duplicate hierarchy entries.
class DataError : public Error {
 public:
  using Error::Error;
};

/// Inconsistent configuration (macro axioms without a hierarchy, empty KB, ...).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// API misuse (backward on a non-scalar, scalar access on a vector, ...).
class UsageError : public Error {
 public:
  using Error::Error;
};

/// Syntax error with source position.
class ParseError : public Error {
 public:
  ParseError(const std::string& msg, int line, int col)
      : Error(std::to_string(line) + ":" + std::to_string(col) + ": " + msg),
        line_(line),
        col_(col) {}
  int line() const { return line_; }
  int col() const { return col_; }

 private:
  int line_;
  int col_;
};

}  // namespace fzsl
