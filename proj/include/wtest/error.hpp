#pragma once

#include <stdexcept>
#include <string>

namespace wtest {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad user input: malformed files, out-of-range arguments, inconsistent
/// configurations. The CLI maps these to exit code 2.
class InputError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public InputError {
 public:
  using InputError::InputError;
};

class ShapeError : public InputError {
 public:
  using InputError::InputError;
};

/// Non-finite values during optimization. The CLI maps these to exit code 3.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Problem too large for an exact solver.
class CapacityError : public Error {
 public:
  using Error::Error;
};

}  // namespace wtest
