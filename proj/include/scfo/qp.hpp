#pragma once

#include <optional>

#include "scfo/model.hpp"

namespace scfo {

/// Polyhedron { u in box : normals.row(i) * (u - anchor) <= offsets[i] }.
class HalfspaceSet {
 public:
  /// Rows with zero norm are rejected (ValidationError).
  HalfspaceSet(Matrix normals, Vector offsets, Vector anchor, Box box);

  const Matrix& normals() const { return normals_; }
  const Vector& offsets() const { return offsets_; }
  const Vector& anchor() const { return anchor_; }
  const Box& box() const { return box_; }
  Eigen::Index rows() const { return normals_.rows(); }
  Eigen::Index dim() const { return anchor_.size(); }

  /// max_i (a_i^T (u - anchor) - b_i), or -inf when there are no rows.
  double max_violation(const Vector& u) const;

 private:
  Matrix normals_;
  Vector offsets_;
  Vector anchor_;
  Box box_;
};

struct FeasibilityWitness {
  bool feasible = false;
  /// A point of the set when feasible (inside the box exactly).
  Vector point;
  /// Phase-1 optimum: total violation of the row-normalized system.
  double infeasibility = 0.0;
  int pivots = 0;
};

inline constexpr double kLpFeasibilityTol = 1e-9;

/// Phase-1 simplex (Bland's rule) minimizing total constraint violation.
/// Throws SolverError if the pivot guard trips.
FeasibilityWitness lp_feasible(const HalfspaceSet& hs);

struct ProjectionResult {
  Vector point;
  /// Multipliers in the caller's row scaling.
  Vector row_multipliers;
  Vector lower_multipliers;
  Vector upper_multipliers;
  int iterations = 0;
};

/// Euclidean projection of `target` onto the set, by a primal active-set
/// method started from a phase-1 witness. Throws ValidationError when the set
/// is empty and SolverError when the iteration cap is hit.
ProjectionResult qp_project_detailed(const Vector& target, const HalfspaceSet& hs,
                                     const std::optional<FeasibilityWitness>& witness = std::nullopt);

inline Vector qp_project(const Vector& target, const HalfspaceSet& hs) {
  return qp_project_detailed(target, hs).point;
}

struct KktResiduals {
  double stationarity = 0.0;
  double primal = 0.0;
  double dual = 0.0;
  double complementarity = 0.0;

  double max() const;
};

/// Residuals of the projection optimality system at `result`.
KktResiduals kkt_residuals(const Vector& target, const HalfspaceSet& hs, const ProjectionResult& result);

}  // namespace scfo
