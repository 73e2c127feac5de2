#pragma once

#include <stdexcept>
#include <string>

namespace colorser {

/// Bad input data: malformed rows, out-of-range values, inconsistent sizes.
/// Maps to CLI exit code 1.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Mathematically undefined request (empty angle list, zero variance, ...).
/// Treated as a validation failure at the CLI boundary.
class DomainError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

/// Filesystem or network failure. Maps to CLI exit code 2.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A solver or search that produced no usable result. Maps to CLI exit code 3.
class ConvergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace colorser

namespace colorser {

/// Resultant length too small for a meaningful circular mean.
class UndefinedMeanError : public DomainError {
 public:
  using DomainError::DomainError;
};

/// (sin, cos) vector too close to the origin to define a hue.
class UndefinedAngleError : public DomainError {
 public:
  using DomainError::DomainError;
};

}  // namespace colorser
