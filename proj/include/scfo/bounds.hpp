#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "scfo/model.hpp"
#include "scfo/params.hpp"

namespace scfo {

/// Worst-case growth over the whole box: linear terms use the box ranges in
/// place of |du|, quadratic terms the products of ranges (no 1/2 factor).
struct GrowthBounds {
  Vector L_p;     // per experimental constraint
  Vector L;       // per numerical constraint
  double Q_phi = 0.0;
  Vector Q_g;     // per numerical constraint
  Vector Q_gp;    // per experimental constraint
};

/// sum_i kappa_i |to_i - from_i|
double linear_growth(const Vector& kappa_row, const Vector& from, const Vector& to);

/// (1/2) sum_{i1,i2} M_{i1 i2} |d_{i1} d_{i2}| with d = to - from.
double quadratic_growth(const Matrix& M, const Vector& from, const Vector& to);

GrowthBounds worst_case_growth(const LipschitzData& lip, const Box& box);

/// Guaranteed floor on -g_p,j(u_k) for every k under fixed parameters:
/// min[(1-gamma_j) eps_p,j, 2(1-gamma_j) delta_gp,j^2 / Q_p,j, -g_p,j(u0)].
double constraint_floor(const LipschitzData& lip, const ProjectionParams& params,
                        const GrowthBounds& gb, const Vector& g_p_at_u0, std::size_t j);

/// Lower bound on the accepted filter gain: the minimum of the cost block
/// 2 delta_phi / Q_phi, the numerical-constraint block and the
/// experimental-constraint block. Throws ValidationError unless g_p(u0) < 0.
double filter_gain_floor(const ProjectionParams& params, const GrowthBounds& gb,
                         const LipschitzData& lip, const Vector& g_p_at_u0);

/// Upper bound on the number of experiments with a feasible projection.
/// Throws ValidationError when the per-step decrease bound is not negative.
double max_feasible_iterations(double k_floor, const LipschitzData& lip, const GrowthBounds& gb,
                               double delta_phi, double phi_u0, double phi_lower);

struct LipschitzCheck {
  std::string constant;    // e.g. "kappa_p[0][1]"
  double worst_ratio = 0;  // max |derivative| / constant over the samples
  bool pass = true;        // worst_ratio < 1
};

struct LipschitzReport {
  bool ok = true;
  std::size_t samples = 0;
  std::vector<LipschitzCheck> checks;
};

/// Samples the box uniformly and compares analytic first and second
/// derivatives against every constant. Requires an AnalyticPlant oracle and
/// numerical constraints with Hessians.
LipschitzReport validate_lipschitz(const ProblemSpec& spec, std::size_t samples, std::uint64_t seed);

}  // namespace scfo
