#pragma once

#include <stdexcept>
#include <string>

namespace bilevel {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid or malformed configuration (maps to CLI exit code 2).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Numerical failure: breakdown, non-finite values, divergence (exit code 3).
class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace bilevel
