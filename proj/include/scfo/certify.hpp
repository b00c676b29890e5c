#pragma once

#include "scfo/engine.hpp"
#include "scfo/fj.hpp"

namespace scfo {

/// Activity thresholds equal to the eps parameters at `level`.
ActivityThresholds thresholds_at_level(const ParameterCeilings& ceilings, int level);

/// FJ certificate at one stored record, using the eps-active sets of the
/// record's parameter level.
FjCertificate certify_record(const IterateRecord& rec, const ProblemSpec& spec, const ParameterCeilings& ceilings,
                             FjNormalization mode);

/// Certificate at u_inf. Throws ValidationError when the run did not terminate.
FjCertificate certify_terminal(const Trajectory& traj, const ProblemSpec& spec, FjNormalization mode);

}  // namespace scfo
