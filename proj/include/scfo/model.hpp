#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace scfo {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// The experimental space: componentwise box lower < upper.
class Box {
 public:
  Box(Vector lower, Vector upper);

  const Vector& lower() const { return lower_; }
  const Vector& upper() const { return upper_; }
  std::size_t size() const { return static_cast<std::size_t>(lower_.size()); }

  /// Per-axis range u^U - u^L, strictly positive.
  Vector range() const { return upper_ - lower_; }
  Vector center() const { return 0.5 * (lower_ + upper_); }

  bool contains(const Vector& u, double tol = 0.0) const;
  Vector clamp(const Vector& u) const;

 private:
  Vector lower_;
  Vector upper_;
};

/// Strict Lipschitz constants and strictness coefficients.
///
/// Each M matrix is symmetrized on construction. The growth bounds sum over
/// both index orders, so an asymmetric input would be counted twice.
class LipschitzData {
 public:
  static constexpr double kDefaultGamma = 0.95;

  /// kappa_p: n_gp x n_u, kappa: n_g x n_u, m_phi: n_u x n_u,
  /// m_g: n_g matrices, m_gp: n_gp matrices, gamma: n_gp entries in (0,1),
  /// gamma_phi in [0,1). Throws ValidationError on any violation.
  LipschitzData(Matrix kappa_p, Matrix kappa, Matrix m_phi,
                std::vector<Matrix> m_g, std::vector<Matrix> m_gp,
                Vector gamma, double gamma_phi);

  const Matrix& kappa_p() const { return kappa_p_; }
  const Matrix& kappa() const { return kappa_; }
  const Matrix& m_phi() const { return m_phi_; }
  const std::vector<Matrix>& m_g() const { return m_g_; }
  const std::vector<Matrix>& m_gp() const { return m_gp_; }
  const Vector& gamma() const { return gamma_; }
  double gamma_phi() const { return gamma_phi_; }

  std::size_t n_u() const { return static_cast<std::size_t>(m_phi_.rows()); }
  std::size_t n_gp() const { return static_cast<std::size_t>(kappa_p_.rows()); }
  std::size_t n_g() const { return static_cast<std::size_t>(kappa_.rows()); }

  /// Copy with every kappa and M entry multiplied by `factor`.
  LipschitzData scaled(double factor) const;

 private:
  Matrix kappa_p_;
  Matrix kappa_;
  Matrix m_phi_;
  std::vector<Matrix> m_g_;
  std::vector<Matrix> m_gp_;
  Vector gamma_;
  double gamma_phi_;
};

/// One experiment's outcome: cost, experimental constraints and their
/// gradients (rows of grad_g_p are the constraint gradients).
struct Measurement {
  double phi = 0.0;
  Vector g_p;
  Vector grad_phi;
  Matrix grad_g_p;

  bool finite() const;
};

/// The experiment boundary. Queries must be repeatable: identical inputs give
/// identical measurements.
class PlantOracle {
 public:
  virtual ~PlantOracle() = default;
  virtual Measurement measure(const Vector& u) = 0;
  virtual std::size_t n_u() const = 0;
  virtual std::size_t n_gp() const = 0;
  virtual std::string name() const = 0;
};

/// A plant with closed-form second derivatives, used by the Lipschitz
/// validator and the grid-based oracles.
class AnalyticPlant : public PlantOracle {
 public:
  virtual Matrix hessian_phi(const Vector& u) const = 0;
  virtual Matrix hessian_g_p(std::size_t j, const Vector& u) const = 0;
  virtual Measurement evaluate(const Vector& u) const = 0;
  Measurement measure(const Vector& u) override { return evaluate(u); }
};

/// A constraint g_j(u) <= 0 evaluable without experiments.
struct NumericalConstraint {
  std::string name;
  std::function<double(const Vector&)> value;
  std::function<Vector(const Vector&)> gradient;
  /// Optional; only needed for Lipschitz validation.
  std::function<Matrix(const Vector&)> hessian;
};

/// Rule producing the optimization target u*_{k+1}.
class TargetRule {
 public:
  enum class Kind { box_center, fixed, sequence };

  static TargetRule box_center() { return TargetRule(Kind::box_center, {}); }
  static TargetRule fixed(Vector point) { return TargetRule(Kind::fixed, {std::move(point)}); }
  /// Iteration k uses entry min(k, size-1).
  static TargetRule sequence(std::vector<Vector> points);

  Kind kind() const { return kind_; }
  const std::vector<Vector>& points() const { return points_; }

  /// Target for the step producing experiment k+1 (k = index of current point).
  Vector next(std::size_t k, const Box& box) const;

 private:
  TargetRule(Kind kind, std::vector<Vector> points) : kind_(kind), points_(std::move(points)) {}
  Kind kind_;
  std::vector<Vector> points_;
};

/// Upper limits of the projection parameters. Every current parameter is
/// ceiling / 2^level.
struct ParameterCeilings {
  Vector eps_p;
  Vector delta_gp;
  Vector eps;
  Vector delta_g;
  double delta_phi = 1.0;
};

/// Everything static about one experimental optimization problem.
struct ProblemSpec {
  std::string name;
  Box box;
  std::shared_ptr<PlantOracle> oracle;
  std::vector<NumericalConstraint> numerical_constraints;
  LipschitzData lipschitz;
  Vector u0;
  TargetRule target = TargetRule::box_center();
  std::optional<ParameterCeilings> ceilings;
  /// Global minimum cost when known, used by the iteration-count bound.
  std::optional<double> phi_lower;

  std::size_t n_u() const { return box.size(); }
  std::size_t n_gp() const { return lipschitz.n_gp(); }
  std::size_t n_g() const { return numerical_constraints.size(); }

  /// Checks dimensions across all members. Throws ValidationError.
  void check_consistency() const;
};

struct ValidationCheck {
  std::string label;
  double value = 0.0;
  bool pass = false;
};

struct ValidationReport {
  bool ok = true;
  std::vector<ValidationCheck> checks;
  std::vector<std::string> violations;

  void add(std::string label, double value, bool pass);
  std::string summary() const;
};

/// Strict feasibility of g_p, feasibility of g, and box membership at u0.
ValidationReport validate_initial_point(const ProblemSpec& spec, const Measurement& m0);

struct NumericalValues {
  Vector values;
  Matrix gradients;  // n_g x n_u
};

/// g_j(u) and their gradients. Throws ValidationError on non-finite output.
NumericalValues evaluate_numerical(const ProblemSpec& spec, const Vector& u);

}  // namespace scfo
