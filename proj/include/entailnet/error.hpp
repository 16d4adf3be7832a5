#pragma once

#include <stdexcept>
#include <string>

namespace entailnet {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad arguments or an impossible request (CLI exit code 1).
class UsageError : public Error {
 public:
  using Error::Error;
};

/// Input data violates a file-format or dataset contract (CLI exit code 2).
class DataError : public Error {
 public:
  using Error::Error;
};

/// An internal consistency check failed (CLI exit code 3).
class InvariantError : public Error {
 public:
  using Error::Error;
};

}  // namespace entailnet
