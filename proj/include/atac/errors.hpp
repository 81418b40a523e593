#pragma once

#include <stdexcept>
#include <string>

namespace atac {

/// Invalid inputs: bad dimensions, violated type invariants, bad flags.
class ArgumentError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Base for failures raised while a well-formed computation runs.
class ComputationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A box-class critic solve whose data leaves some coordinates free.
class UnidentifiedCritic : public ComputationError {
 public:
  using ComputationError::ComputationError;
};

/// Projection requested on a class without a parameter vector.
class NotParametric : public ArgumentError {
 public:
  using ArgumentError::ArgumentError;
};

class EmptyAdmissibleSet : public ArgumentError {
 public:
  using ArgumentError::ArgumentError;
};

/// Every member of a class has zero Bellman residual under both measures.
class DegenerateClass : public ComputationError {
 public:
  using ComputationError::ComputationError;
};

class UndefinedScore : public ComputationError {
 public:
  using ComputationError::ComputationError;
};

/// A gradient or update became non-finite. Carries the step where it happened.
class NumericalDivergence : public ComputationError {
 public:
  NumericalDivergence(const std::string& what, long step)
      : ComputationError(what + " (step " + std::to_string(step) + ")"), step_(step) {}
  long step() const noexcept { return step_; }

 private:
  long step_;
};

}  // namespace atac
