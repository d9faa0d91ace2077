#pragma once

#include <stdexcept>
#include <string>

namespace lgc {

// Base class for all library errors. Subclasses map onto CLI exit codes:
// config/usage -> 2, numeric failure -> 3, io/format -> 4.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Incompatible matrix/tensor dimensions.
struct ShapeError : Error {
  using Error::Error;
};

// Argument outside its mathematical domain (sigma <= 0, rate >= 1, ...).
struct DomainError : Error {
  using Error::Error;
};

// API contract violation (e.g. backward on a non-scalar node).
struct ContractError : Error {
  using Error::Error;
};

// Invalid run configuration (split too small, empty seeds, bad flag combo).
struct ConfigError : Error {
  using Error::Error;
};

// Non-finite value where finiteness is promised.
struct NumericError : Error {
  using Error::Error;
};

// Input data missing a required column/field.
struct SchemaError : Error {
  using Error::Error;
};

// Malformed file content (bad CSV cell, truncated checkpoint).
struct ParseError : Error {
  using Error::Error;
};

// Unsupported container version.
struct FormatError : Error {
  using Error::Error;
};

// Filesystem failure.
struct IoError : Error {
  using Error::Error;
};

// Bisection bracket does not straddle the detection threshold.
struct BracketError : Error {
  using Error::Error;
};

// Rank-deficient regression design.
struct SingularError : Error {
  using Error::Error;
};

// Zero-variance sample where variance is required.
struct DegenerateError : Error {
  using Error::Error;
};

}  // namespace lgc
