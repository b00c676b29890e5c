#pragma once

#include <cmath>

#include "scfo/model.hpp"

namespace scfo {

/// Projection parameters at one halving level. All entries share a single
/// level counter: value = ceiling / 2^level.
struct ProjectionParams {
  Vector eps_p;
  Vector eps;
  Vector delta_gp;
  Vector delta_g;
  double delta_phi = 0.0;
  int level = 0;

  static ProjectionParams at_level(const ParameterCeilings& ceilings, int level);
};

inline ProjectionParams ProjectionParams::at_level(const ParameterCeilings& c, int level) {
  const double scale = std::ldexp(1.0, -level);
  return ProjectionParams{c.eps_p * scale, c.eps * scale, c.delta_gp * scale,
                          c.delta_g * scale, c.delta_phi * scale, level};
}

}  // namespace scfo
