#pragma once

#include <stdexcept>
#include <string>

namespace niso {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand shapes do not agree.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// An iterative kernel failed to converge or produced non-finite values.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// The API was used out of contract (non-scalar loss, replayed tape, ...).
class UsageError : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration value (k > n, negative loss weight, bad cutoff, ...).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Argument outside the mathematical domain of an operation.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Unreadable or malformed external input (images, checkpoints).
class InputError : public Error {
 public:
  using Error::Error;
};

}  // namespace niso
