#pragma once

#include <stdexcept>
#include <string>

namespace vlab {

// Every numeric failure carries the label of the module that raised it so the
// experiment runner can report it and map it to an exit code.
class Error : public std::runtime_error {
 public:
  Error(std::string module, const std::string& what)
      : std::runtime_error(module + ": " + what), module_(std::move(module)) {}
  const std::string& module() const noexcept { return module_; }

 private:
  std::string module_;
};

/// Invalid parameters or evaluation outside a function's domain.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// A time or space point that should lie on a grid does not.
class AlignmentError : public Error {
 public:
  using Error::Error;
};

/// Too few samples / levels / frequencies for a regression.
class InsufficientDataError : public Error {
 public:
  using Error::Error;
};

/// Numerical failure: quadrature non-convergence, overflow, no contraction.
class NumericalError : public Error {
 public:
  using Error::Error;
};

class QuadratureError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class OverflowError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class ContractionError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

}  // namespace vlab
