#pragma once

#include <stdexcept>
#include <string>

namespace dmvc {

/// Root of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Shapes or settings that cannot work together (e.g. a matmul with mismatched extents).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A caller broke an operation's precondition.
class UsageError : public Error {
 public:
  using Error::Error;
};

/// A NaN or infinity showed up in a computation.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// An input file is missing or malformed.
class LoadError : public Error {
 public:
  using Error::Error;
};

}  // namespace dmvc
