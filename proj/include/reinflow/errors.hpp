#pragma once

#include <stdexcept>
#include <string>

namespace reinflow {

// Invalid dimensions, flags or hyperparameters.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Non-finite values or impossible densities. `index` names the layer,
// denoising step or env that produced the value (-1 when not applicable).
class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& what, long index = -1)
      : std::runtime_error(index >= 0 ? what + " (index " + std::to_string(index) + ")" : what),
        index_(index) {}
  long index() const noexcept { return index_; }

 private:
  long index_;
};

// Caller broke a documented precondition (e.g. action outside [-1, 1]).
class ContractError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Missing, truncated or incompatible checkpoint files.
class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace reinflow
