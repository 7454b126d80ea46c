#pragma once

#include <stdexcept>
#include <string>

namespace ntk {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Argument outside the mathematical domain of an operation (e.g. |u| > 1).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Non-finite input values.
class InputError : public Error {
 public:
  using Error::Error;
};

/// Quadrature non-convergence, non-finite intermediates, eigen-solver failure.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// A Gram or kernel-plane quantity that should be >= 0 came out negative.
class PsdViolation : public Error {
 public:
  using Error::Error;
};

/// Invalid architecture or run configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Requested something the object cannot provide (missing derivative, depth).
class CapabilityError : public Error {
 public:
  using Error::Error;
};

/// Malformed file contents.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// File shorter than its header promises.
class LengthError : public FormatError {
 public:
  using FormatError::FormatError;
};

/// Too few usable data points for a fit.
class InsufficientData : public Error {
 public:
  using Error::Error;
};

}  // namespace ntk
