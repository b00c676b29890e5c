#pragma once

#include <optional>
#include <string>
#include <vector>

#include "scfo/model.hpp"

namespace scfo {

enum class FjNormalization {
  /// Multipliers on the unit sphere, all free over the nonnegative orthant.
  unit_sphere,
  /// Cost multiplier fixed to 1, multipliers of inactive constraints pinned to 0.
  fixed_cost_multiplier,
};

std::string to_string(FjNormalization mode);
FjNormalization parse_fj_normalization(const std::string& text);

/// The Fritz John residual system at one point. Multiplier order is
/// (mu_phi, mu_p[0..n_gp), mu[0..n_g), zeta_L[0..n_u), zeta_U[0..n_u)).
/// Column c of `gradients` is the Lagrangian-gradient contribution of
/// multiplier c and `slacks[c]` the quantity whose product with the
/// multiplier must vanish (0 for the cost multiplier).
struct FjSystem {
  Matrix gradients;  // n_u x N
  Vector slacks;     // N
  std::size_t n_gp = 0;
  std::size_t n_g = 0;

  std::size_t multipliers() const { return static_cast<std::size_t>(slacks.size()); }
  std::size_t n_u() const { return static_cast<std::size_t>(gradients.rows()); }

  /// Psi = G^T G + diag(slacks^2); the FJ residual equals mu^T Psi mu.
  Matrix form() const;
};

FjSystem build_fj_system(const Vector& u, const Box& box, const Vector& grad_phi, const Vector& g_p,
                         const Matrix& grad_g_p, const Vector& g, const Matrix& grad_g);

/// Thresholds deciding which multipliers stay free in fixed_cost_multiplier
/// mode: g_p,j >= -eps_p,j, g_j >= -eps_j, |u_i - bound_i| <= bound_tol.
struct ActivityThresholds {
  Vector eps_p;
  Vector eps;
  double bound_tol = 1e-12;

  static ActivityThresholds exact(std::size_t n_gp, std::size_t n_g, double tol = 1e-9);
};

struct ActiveSets {
  std::vector<std::size_t> g_p;
  std::vector<std::size_t> g;
  std::vector<std::size_t> lower;
  std::vector<std::size_t> upper;
};

struct FjCertificate {
  Vector point;
  double error = 0.0;
  Vector multipliers;  // mu_all, ordered as in FjSystem
  FjNormalization normalization = FjNormalization::fixed_cost_multiplier;
  ActiveSets active_sets;
  /// Parameter level of the run that produced the point, when known.
  std::optional<int> level;
};

struct SphereMinimum {
  double value = 0.0;
  Vector argmin;
};

/// min mu^T Psi mu over mu >= 0, ||mu||_2 = 1, by enumerating supports and
/// keeping those whose minimum eigenvector (cyclic Jacobi) is nonnegative.
SphereMinimum min_nonnegative_rayleigh(const Matrix& psi);

/// Symmetric eigen-decomposition by cyclic Jacobi rotations. Eigenvalues
/// ascend; eigenvectors are the matching columns.
void jacobi_eigen(const Matrix& a, Vector& eigenvalues, Matrix& eigenvectors);

/// min ||A x - b||^2 over x >= 0 (Lawson-Hanson active set).
Vector nonnegative_least_squares(const Matrix& A, const Vector& b);

/// FJ error of an assembled system. `free_mask` is consulted only in
/// fixed_cost_multiplier mode (entry 0, the cost multiplier, is ignored).
FjCertificate fj_error(const FjSystem& system, FjNormalization mode, const std::vector<bool>& free_mask);

/// FJ error at u from a measurement taken there.
FjCertificate fj_error(const Vector& u, const ProblemSpec& spec, const Measurement& m, FjNormalization mode,
                       const std::optional<ActivityThresholds>& thresholds = std::nullopt);

}  // namespace scfo
