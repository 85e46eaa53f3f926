#pragma once

#include <stdexcept>
#include <string>

namespace ldrld {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when operand shapes are incompatible.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Raised when a forward operation produces NaN or Inf from finite inputs.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Precondition violations on arguments (depth out of range, bad label, ...).
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

class DataError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace ldrld
