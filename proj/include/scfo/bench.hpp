#pragma once

#include <optional>
#include <string>
#include <vector>

#include "scfo/engine.hpp"
#include "scfo/model.hpp"

namespace scfo {

/// phi = (u1-0.5)^2 + (u2-0.4)^2 with two experimental constraints.
class ConstrainedQuadraticPlant : public AnalyticPlant {
 public:
  Measurement evaluate(const Vector& u) const override;
  Matrix hessian_phi(const Vector& u) const override;
  Matrix hessian_g_p(std::size_t j, const Vector& u) const override;
  std::size_t n_u() const override { return 2; }
  std::size_t n_gp() const override { return 2; }
  std::string name() const override { return "constrained_quadratic"; }
};

/// Rosenbrock cost, no experimental constraints.
class RosenbrockPlant : public AnalyticPlant {
 public:
  Measurement evaluate(const Vector& u) const override;
  Matrix hessian_phi(const Vector& u) const override;
  Matrix hessian_g_p(std::size_t j, const Vector& u) const override;
  std::size_t n_u() const override { return 2; }
  std::size_t n_gp() const override { return 0; }
  std::string name() const override { return "rosenbrock"; }
};

/// g = -u1^2 - (u2-0.15)^2 + 0.01
NumericalConstraint circle_exclusion();

std::vector<std::string> builtin_names();

/// Fully populated problem. Throws ValidationError on an unknown name.
ProblemSpec builtin(const std::string& name);

/// Feasible grid argmin at `resolution`, then polished: with one
/// near-active constraint in two dimensions, bisection along the constraint
/// boundary on the reduced derivative; otherwise Newton on the cost inside
/// the box.
Vector derived_optimum(const ProblemSpec& spec, double resolution = 1e-3);

struct Summary {
  std::size_t experiments = 0;
  std::size_t stepped = 0;
  bool terminated = false;
  double initial_cost = 0.0;
  double final_cost = 0.0;
  Vector final_point;
  double max_g_p = 0.0;  // -inf when there are none
  double max_g = 0.0;
  std::vector<double> cost;
  std::vector<double> distance;  // to the reference, empty without one
};

Summary summarize(const Trajectory& traj, const std::optional<Vector>& reference = std::nullopt);

}  // namespace scfo
