#pragma once

#include <stdexcept>
#include <string>

namespace mal {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class BoundsError : public Error {
 public:
  using Error::Error;
};

class DegenerateBoxError : public Error {
 public:
  using Error::Error;
};

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Unreadable file or failed write.
class IoError : public Error {
 public:
  using Error::Error;
};

/// Truncated or corrupt file content, including dimension overflow.
class FormatError : public Error {
 public:
  using Error::Error;
};

class NoNegativeBagsError : public Error {
 public:
  using Error::Error;
};

/// Dice quotient with a zero denominator.
class UndefinedDiceError : public Error {
 public:
  using Error::Error;
};

class NormalizationError : public Error {
 public:
  using Error::Error;
};

class NonFiniteError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace mal
