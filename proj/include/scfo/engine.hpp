#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "scfo/bounds.hpp"
#include "scfo/model.hpp"
#include "scfo/params.hpp"
#include "scfo/qp.hpp"

namespace scfo {

enum class StepStatus {
  /// The experiment at u0.
  initial,
  stepped,
  /// Fixed-level runs only: the projection at that level has no solution.
  projection_infeasible,
  terminated,
};

std::string to_string(StepStatus status);
StepStatus parse_step_status(const std::string& text);

struct IterateRecord {
  std::size_t k = 0;
  Vector u;
  Measurement measurement;
  Vector g_values;
  Matrix g_gradients;  // n_g x n_u
  /// u* used for the step that produced this record (absent for u0).
  std::optional<Vector> target;
  std::optional<Vector> projected_target;
  std::optional<double> K;
  int params_level = 0;
  StepStatus status = StepStatus::initial;
  /// Filter-gain floor for the parameters of the step that produced this record.
  std::optional<double> gain_floor;
};

struct Trajectory {
  std::vector<IterateRecord> records;
  std::optional<Vector> terminal;
  ParameterCeilings ceilings;
  int max_halvings = 10;

  const IterateRecord& last() const { return records.back(); }
  std::size_t stepped() const;
};

struct RunConfig {
  /// Number of experiments allowed after u0.
  std::size_t budget = 200;
  int max_halvings = 10;
  /// When false every step uses `fixed_level` and an infeasible projection ends the run.
  bool adapt = true;
  int fixed_level = 0;
  std::optional<ParameterCeilings> ceilings;
  std::optional<TargetRule> target;
  std::optional<std::string> csv_path;
  std::optional<std::string> json_path;
};

struct ActiveIndices {
  std::vector<std::size_t> g_p;
  std::vector<std::size_t> g;
};

/// { j : g_p,j >= -eps_p,j } and { j : g_j >= -eps_j }.
ActiveIndices epsilon_active(const Vector& g_p, const Vector& g, const ProjectionParams& params);

struct Projection {
  HalfspaceSet halfspaces;
  ActiveIndices active;
};

/// Rows: each eps-active experimental constraint, each eps-active numerical
/// constraint, then the cost row. Throws InternalError on a zero gradient.
Projection assemble_projection(const IterateRecord& state, const ProjectionParams& params, const Box& box);

struct GainSearch {
  double K = 0.0;
  double cap_constraints = 0.0;  // closed form from g_p and kappa_p
  double cap_cost = 0.0;         // closed form from M_phi, +inf when the quadratic term is 0
  double candidate = 0.0;
  double surrogate = 0.0;        // guaranteed numerical-constraint floor
  bool bisected = false;
};

/// Largest K in [0,1] meeting the three filter conditions.
GainSearch filter_gain_search(const IterateRecord& state, const Vector& u_bar, const ProblemSpec& spec,
                              const ActiveIndices& active);

Vector apply_filter(const Vector& u_k, const Vector& u_bar, double K);

struct AdaptOutcome {
  bool terminate = false;
  ProjectionParams params;
  std::optional<Projection> projection;
  FeasibilityWitness witness;
  int levels_tested = 0;
};

/// Starts from the ceilings and halves every parameter until the projection
/// LP is feasible. Levels 0..max_halvings are tested; if all are infeasible
/// the outcome is `terminate`.
AdaptOutcome adapt_parameters(const IterateRecord& state, const ParameterCeilings& ceilings, int max_halvings,
                              const Box& box);

/// Ceilings from grid minima (step `resolution` per axis) of an analytic plant.
ParameterCeilings grid_ceilings(const ProblemSpec& spec, double resolution = 0.01);

/// A run stopped by an error. Carries everything recorded before the failure.
class RunAborted : public std::runtime_error {
 public:
  RunAborted(Trajectory partial, const std::string& what, int exit_code)
      : std::runtime_error(what), partial_(std::move(partial)), exit_code_(exit_code) {}
  const Trajectory& partial() const { return partial_; }
  int exit_code() const { return exit_code_; }

 private:
  Trajectory partial_;
  int exit_code_;
};

class Engine {
 public:
  Engine(ProblemSpec spec, RunConfig config);

  const ProblemSpec& spec() const { return spec_; }
  const RunConfig& config() const { return config_; }
  const ParameterCeilings& ceilings() const { return ceilings_; }
  const GrowthBounds& growth() const { return growth_; }

  /// Measures u0 and refuses (ValidationError) unless it is strictly feasible.
  IterateRecord initial();

  /// One project-and-filter iteration. A terminated state is returned unchanged.
  IterateRecord step(const IterateRecord& state);

  /// Runs until termination or the budget is spent. Step failures are
  /// rethrown as RunAborted holding the partial trajectory.
  Trajectory run();

  /// Called after every appended record.
  std::function<void(const IterateRecord&)> on_record;

 private:
  void check_feasible(const IterateRecord& rec) const;
  IterateRecord make_record(std::size_t k, const Vector& u, Measurement m) const;

  ProblemSpec spec_;
  RunConfig config_;
  ParameterCeilings ceilings_;
  GrowthBounds growth_;
  Vector g_p_u0_;
};

inline Trajectory run(const ProblemSpec& spec, const RunConfig& config) {
  return Engine(spec, config).run();
}

}  // namespace scfo
