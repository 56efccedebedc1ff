#pragma once

#include <stdexcept>
#include <string>

namespace setproj {

/// Base of every error the library raises.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid or inconsistent configuration (unsupported kind/dims, bad set definition).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Vector or matrix dimensions do not agree.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// A scalar parameter is outside its admissible range.
class ParameterError : public Error {
 public:
  using Error::Error;
};

/// Operation requested on an operator that cannot support it (e.g. Gram of a matrix-free transform).
class UnsupportedOperatorError : public Error {
 public:
  using Error::Error;
};

/// Numerical failure surfaced from a decomposition or iterative method.
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace setproj
