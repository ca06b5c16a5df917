#pragma once

#include <stdexcept>
#include <string>

namespace kbos {

// Bad arguments, malformed configs, domain violations.
class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Non-finite values, negative Riccati solutions, underflow that could not
// be recovered from.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// The model does not satisfy the structural conditions the estimators need
// (identifiability at t = 0, monotone limit map, ...).
class AssumptionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Fisher information at or below the positivity floor.
class SingularInformationError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

}  // namespace kbos
