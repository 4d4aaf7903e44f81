#pragma once

#include <stdexcept>
#include <cstdint>
#include <string>

namespace sgdperf {

/// Root of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Caller supplied something malformed or out of domain. CLI exit code 1.
class InputError : public Error {
 public:
  using Error::Error;
};

/// The model cannot produce a meaningful answer for valid-looking inputs
/// (negative update count, unreachable target, bad step size). CLI exit code 2.
class ModelError : public Error {
 public:
  using Error::Error;
};

class ConfigurationError : public InputError {
 public:
  using InputError::InputError;
};

class RankDeficiencyError : public InputError {
 public:
  using InputError::InputError;
};

class BudgetInfeasibleError : public InputError {
 public:
  using InputError::InputError;
};

class StepSizeError : public ModelError {
 public:
  using ModelError::ModelError;
};

class UnreachableTargetError : public ModelError {
 public:
  using ModelError::ModelError;
};

class DivergenceError : public ModelError {
 public:
  DivergenceError(const std::string& what, std::uint64_t update)
      : ModelError(what), update_(update) {}
  std::uint64_t update() const noexcept { return update_; }

 private:
  std::uint64_t update_;
};

}  // namespace sgdperf
