#pragma once

#include <stdexcept>
#include <string>

namespace l2g {

/// Input failed a shape or value precondition (malformed vectors, bad matrices).
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Hyperparameters or model dimensions are inconsistent.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Caller violated an API contract (e.g. train mode without groundtruth).
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Dataset, checkpoint or CSV content could not be read or written.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A computation produced a non-finite value. `step` is the iteration or
/// layer index at which it was detected, or -1 when not applicable.
class NumericError : public std::runtime_error {
 public:
  NumericError(const std::string& what, int step = -1)
      : std::runtime_error(step >= 0 ? what + " (at step " + std::to_string(step) + ")" : what),
        step_(step) {}
  int step() const noexcept { return step_; }

 private:
  int step_;
};

}  // namespace l2g
