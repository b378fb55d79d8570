#pragma once

#include <stdexcept>
#include <string>

namespace retts {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor extents do not agree.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// A documented precondition of an operation was violated.
class ContractError : public Error {
 public:
  using Error::Error;
};

/// User-supplied data is malformed (bad ids, negative durations, ...).
class InputError : public Error {
 public:
  using Error::Error;
};

/// Non-finite values reached a place that requires finite ones.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// A file on disk does not follow its binary/text format.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// A checkpoint does not match the configuration it is loaded into.
class CompatibilityError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace retts
