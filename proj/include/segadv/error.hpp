#pragma once

#include <stdexcept>
#include <string>

namespace segadv {

// Every error thrown by the toolkit derives from Error. The three groups map
// one-to-one onto the CLI exit codes (1 usage, 2 data, 3 numerical).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid arguments, shape mismatches, violated preconditions.
class UsageError : public Error {
 public:
  using Error::Error;
};

class ShapeError : public UsageError {
 public:
  using UsageError::UsageError;
};

// Missing/corrupt files, unsupported formats, orphaned dataset entries.
class DataError : public Error {
 public:
  using Error::Error;
};

// Undefined metric results, dead networks, non-finite values.
class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace segadv
