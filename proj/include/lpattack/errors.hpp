#pragma once

#include <stdexcept>
#include <string>

namespace lpattack {

// Base for every error the library throws. The CLI maps the concrete type to
// an exit code: usage 1, data 2, runtime 3.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual int exit_code() const noexcept { return 3; }
};

// Caller broke a precondition (bad node id, budget 0, wrong direction ...).
class UsageError : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 1; }
};

// Input data is missing, malformed or lacks a label the computation needs.
class DataError : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 2; }
};

// Numerical or orchestration failure (non-finite loss, too few targets ...).
class RuntimeFailure : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 3; }
};

}  // namespace lpattack
