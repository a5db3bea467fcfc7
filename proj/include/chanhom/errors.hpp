#pragma once

#include <stdexcept>
#include <string>

namespace chanhom {

/// Invalid input: bad geometry, misaligned refinement, schema violations.
/// The CLI maps these to exit status 1.
class ValidationError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class GeometryError : public ValidationError {
public:
  using ValidationError::ValidationError;
};

class AlignmentError : public ValidationError {
public:
  using ValidationError::ValidationError;
};

class ConfigError : public ValidationError {
public:
  using ValidationError::ValidationError;
};

class DomainError : public ValidationError {
public:
  using ValidationError::ValidationError;
};

/// Failure during a computation. The CLI maps these to exit status 2.
class NumericalError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class AssemblyError : public NumericalError {
public:
  using NumericalError::NumericalError;
};

class StabilityError : public NumericalError {
public:
  using NumericalError::NumericalError;
};

class SolveError : public NumericalError {
public:
  SolveError(const std::string& what, double residual, int iterations)
      : NumericalError(what), residual_(residual), iterations_(iterations) {}

  double residual() const noexcept { return residual_; }
  int iterations() const noexcept { return iterations_; }

private:
  double residual_;
  int iterations_;
};

}  // namespace chanhom
