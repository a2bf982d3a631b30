#pragma once

#include <stdexcept>
#include <string>

namespace pmdpgp {

// Base class for all library errors.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// A valuation does not assign a variable that occurs in an expression.
class MissingVariableError : public Error {
 public:
  explicit MissingVariableError(const std::string& var)
      : Error("no value assigned to variable '" + var + "'"), variable(var) {}
  std::string variable;
};

// Substituting a non-monomial into a non-unit exponent.
class SubstitutionError : public Error {
 public:
  using Error::Error;
};

// Model or encoding violates the one-signomial-successor-per-row shape.
class ShapeRestrictionError : public Error {
 public:
  using Error::Error;
};

class ModelError : public Error {
 public:
  using Error::Error;
};

// A solution cannot be rescaled to well-defined distributions.
class NormalizationError : public Error {
 public:
  using Error::Error;
};

// Expected cost is undefined because the goal is reached with probability < 1.
class CostDivergenceError : public Error {
 public:
  using Error::Error;
};

class LinearSolveError : public Error {
 public:
  using Error::Error;
};

class EncodeError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& what, int line = -1)
      : Error(line >= 0 ? "line " + std::to_string(line) + ": " + what : what),
        line_number(line) {}
  int line_number;
};

}  // namespace pmdpgp
