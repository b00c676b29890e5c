#include "scfo/certify.hpp"

#include <cmath>

#include "scfo/errors.hpp"

namespace scfo {

ActivityThresholds thresholds_at_level(const ParameterCeilings& ceilings, int level) {
  const double scale = std::ldexp(1.0, -level);
  return ActivityThresholds{ceilings.eps_p * scale, ceilings.eps * scale, 1e-12};
}

FjCertificate certify_record(const IterateRecord& rec, const ProblemSpec& spec, const ParameterCeilings& ceilings,
                             FjNormalization mode) {
  FjCertificate cert = fj_error(rec.u, spec, rec.measurement, mode, thresholds_at_level(ceilings, rec.params_level));
  cert.level = rec.params_level;
  return cert;
}

FjCertificate certify_terminal(const Trajectory& traj, const ProblemSpec& spec, FjNormalization mode) {
  if (!traj.terminal || traj.records.empty()) {
    throw ValidationError("trajectory has no terminal point");
  }
  return certify_record(traj.last(), spec, traj.ceilings, mode);
}

}  // namespace scfo
