#pragma once

#include <stdexcept>
#include <string>

namespace scfo {

/// Input that violates a documented precondition (bad problem data, an
/// infeasible initial point, malformed configuration). Maps to exit code 1.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A guarantee that should hold by construction was observed to fail.
/// Maps to exit code 2.
class InternalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when a visited point is infeasible or the cost increased. The
/// iteration only guarantees feasibility and descent when the Lipschitz
/// constants bound the true derivatives, so this classifies as bad constants.
class LipschitzViolation : public InternalError {
 public:
  explicit LipschitzViolation(const std::string& what)
      : InternalError("Lipschitz constants invalid: " + what) {}
};

/// Solver failure: cycling guard or iteration cap tripped.
class SolverError : public InternalError {
 public:
  using InternalError::InternalError;
};

}  // namespace scfo
