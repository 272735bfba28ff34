#pragma once

#include <stdexcept>
#include <string>

namespace smpca {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Shapes or grids of two operands do not agree.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// A caller-supplied argument is outside its valid range.
class ArgumentError : public Error {
 public:
  using Error::Error;
};

/// Not enough observations to carry out an estimation step.
class InsufficientDataError : public Error {
 public:
  using Error::Error;
};

/// A numerical routine failed (non-finite values, no convergence).
class NumericError : public Error {
 public:
  using Error::Error;
};

/// A structural property (Hermitian symmetry, conjugate symmetry) was violated.
class InvariantError : public Error {
 public:
  using Error::Error;
};

/// Configuration could not be parsed or failed validation.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A model or truth artifact is missing, truncated or has an incompatible version.
class ModelError : public Error {
 public:
  using Error::Error;
};

/// Synthetic data generation failed (e.g. no positive definite precision found).
class GenerationError : public Error {
 public:
  using Error::Error;
};

}  // namespace smpca
