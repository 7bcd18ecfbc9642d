#pragma once

#include <stdexcept>
#include <string>

namespace drs {

/// Invalid parameter values or option combinations. CLI exit code 1.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent input data. CLI exit code 2.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A training run aborted (non-finite loss, degenerate task setup,
/// every grid candidate failed). CLI exit code 3.
class TrainError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace drs
