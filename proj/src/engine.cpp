#include "scfo/engine.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "scfo/errors.hpp"

namespace scfo {

std::string to_string(StepStatus status) {
  switch (status) {
    case StepStatus::initial:
      return "initial";
    case StepStatus::stepped:
      return "stepped";
    case StepStatus::projection_infeasible:
      return "projection_infeasible";
    case StepStatus::terminated:
      return "terminated";
  }
  return "unknown";
}

StepStatus parse_step_status(const std::string& text) {
  for (auto s : {StepStatus::initial, StepStatus::stepped, StepStatus::projection_infeasible,
                 StepStatus::terminated}) {
    if (to_string(s) == text) return s;
  }
  throw ValidationError("unknown record status '" + text + "'");
}

std::size_t Trajectory::stepped() const {
  return static_cast<std::size_t>(std::count_if(records.begin(), records.end(), [](const IterateRecord& r) {
    return r.status == StepStatus::stepped;
  }));
}

ActiveIndices epsilon_active(const Vector& g_p, const Vector& g, const ProjectionParams& params) {
  ActiveIndices a;
  for (Eigen::Index j = 0; j < g_p.size(); ++j) {
    if (g_p[j] >= -params.eps_p[j]) a.g_p.push_back(static_cast<std::size_t>(j));
  }
  for (Eigen::Index j = 0; j < g.size(); ++j) {
    if (g[j] >= -params.eps[j]) a.g.push_back(static_cast<std::size_t>(j));
  }
  return a;
}

Projection assemble_projection(const IterateRecord& state, const ProjectionParams& params, const Box& box) {
  ActiveIndices active = epsilon_active(state.measurement.g_p, state.g_values, params);
  const auto n = state.u.size();
  const auto rows = static_cast<Eigen::Index>(active.g_p.size() + active.g.size() + 1);
  Matrix normals(rows, n);
  Vector offsets(rows);
  Eigen::Index r = 0;
  for (std::size_t j : active.g_p) {
    const auto ij = static_cast<Eigen::Index>(j);
    normals.row(r) = state.measurement.grad_g_p.row(ij);
    offsets[r++] = -params.delta_gp[ij];
  }
  for (std::size_t j : active.g) {
    const auto ij = static_cast<Eigen::Index>(j);
    normals.row(r) = state.g_gradients.row(ij);
    offsets[r++] = -params.delta_g[ij];
  }
  normals.row(r) = state.measurement.grad_phi.transpose();
  offsets[r] = -params.delta_phi;

  for (Eigen::Index i = 0; i < rows; ++i) {
    if (normals.row(i).norm() == 0.0) {
      throw InternalError("projection row " + std::to_string(i) + " has a zero gradient at experiment " +
                          std::to_string(state.k));
    }
  }
  return Projection{HalfspaceSet(std::move(normals), std::move(offsets), state.u, box), std::move(active)};
}

namespace {

bool numerical_feasible(const ProblemSpec& spec, const Vector& u) {
  for (const auto& c : spec.numerical_constraints) {
    if (!(c.value(u) <= 0.0)) return false;
  }
  return true;
}

}  // namespace

GainSearch filter_gain_search(const IterateRecord& state, const Vector& u_bar, const ProblemSpec& spec,
                              const ActiveIndices& active) {
  const Vector& u = state.u;
  const Vector delta = u_bar - u;
  if (delta.cwiseAbs().maxCoeff() == 0.0) {
    throw InternalError("projected target coincides with the current point");
  }
  const auto& lip = spec.lipschitz;
  const double inf = std::numeric_limits<double>::infinity();
  GainSearch out;

  out.cap_constraints = inf;
  for (Eigen::Index j = 0; j < state.measurement.g_p.size(); ++j) {
    const double growth = linear_growth(lip.kappa_p().row(j).transpose(), u, u_bar);
    out.cap_constraints = std::min(out.cap_constraints, -state.measurement.g_p[j] / growth);
  }

  const double q = quadratic_growth(lip.m_phi(), u, u_bar);
  const double slope = state.measurement.grad_phi.dot(delta);
  out.cap_cost = q > 0.0 ? -slope / q : inf;

  out.candidate = std::max(0.0, std::min({1.0, out.cap_constraints, out.cap_cost}));
  out.K = out.candidate;
  if (spec.n_g() == 0) return out;

  if (numerical_feasible(spec, u + out.candidate * delta)) return out;

  std::vector<bool> is_active(spec.n_g(), false);
  for (std::size_t j : active.g) is_active[j] = true;
  out.surrogate = inf;
  for (std::size_t j = 0; j < spec.n_g(); ++j) {
    const auto ij = static_cast<Eigen::Index>(j);
    double bound = -state.g_values[ij] / linear_growth(lip.kappa().row(ij).transpose(), u, u_bar);
    if (is_active[j]) {
      const double qj = quadratic_growth(lip.m_g()[j], u, u_bar);
      const double sj = state.g_gradients.row(ij).dot(delta);
      bound = std::max(bound, qj > 0.0 ? -sj / qj : inf);
    }
    out.surrogate = std::min(out.surrogate, bound);
  }
  out.surrogate = std::max(0.0, std::min(out.surrogate, out.candidate));
  if (!numerical_feasible(spec, u + out.surrogate * delta)) {
    throw LipschitzViolation("numerical constraint violated at the guaranteed filter gain " +
                             std::to_string(out.surrogate));
  }

  double lo = out.surrogate;
  double hi = out.candidate;
  for (int it = 0; it < 50; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (numerical_feasible(spec, u + mid * delta)) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  out.K = lo;
  out.bisected = true;
  return out;
}

Vector apply_filter(const Vector& u_k, const Vector& u_bar, double K) { return u_k + K * (u_bar - u_k); }

AdaptOutcome adapt_parameters(const IterateRecord& state, const ParameterCeilings& ceilings, int max_halvings,
                              const Box& box) {
  AdaptOutcome out;
  for (int level = 0;; ++level) {
    out.params = ProjectionParams::at_level(ceilings, level);
    Projection proj = assemble_projection(state, out.params, box);
    out.witness = lp_feasible(proj.halfspaces);
    out.levels_tested = level + 1;
    if (out.witness.feasible) {
      out.projection = std::move(proj);
      return out;
    }
    if (level >= max_halvings) {
      out.terminate = true;
      return out;
    }
  }
}

ParameterCeilings grid_ceilings(const ProblemSpec& spec, double resolution) {
  const auto* plant = dynamic_cast<const AnalyticPlant*>(spec.oracle.get());
  if (plant == nullptr) {
    throw ValidationError("projection-parameter ceilings must be given for non-analytic plants");
  }
  const auto n = static_cast<Eigen::Index>(spec.n_u());
  std::vector<Eigen::Index> counts(static_cast<std::size_t>(n));
  double total = 1.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    counts[static_cast<std::size_t>(i)] =
        static_cast<Eigen::Index>(std::floor(spec.box.range()[i] / resolution + 1e-9)) + 1;
    total *= static_cast<double>(counts[static_cast<std::size_t>(i)]);
  }
  if (total > 5e6) throw ValidationError("ceiling grid too large; give the ceilings explicitly");

  const double inf = std::numeric_limits<double>::infinity();
  Vector min_gp = Vector::Constant(static_cast<Eigen::Index>(spec.n_gp()), inf);
  Vector min_g = Vector::Constant(static_cast<Eigen::Index>(spec.n_g()), inf);
  double min_phi = inf;

  std::vector<Eigen::Index> idx(static_cast<std::size_t>(n), 0);
  Vector u(n);
  while (true) {
    for (Eigen::Index i = 0; i < n; ++i) {
      u[i] = std::min(spec.box.upper()[i], spec.box.lower()[i] + resolution * static_cast<double>(idx[static_cast<std::size_t>(i)]));
    }
    const Measurement m = plant->evaluate(u);
    min_phi = std::min(min_phi, m.phi);
    min_gp = min_gp.cwiseMin(m.g_p);
    for (std::size_t j = 0; j < spec.n_g(); ++j) {
      min_g[static_cast<Eigen::Index>(j)] = std::min(min_g[static_cast<Eigen::Index>(j)],
                                                     spec.numerical_constraints[j].value(u));
    }
    Eigen::Index axis = 0;
    while (axis < n && ++idx[static_cast<std::size_t>(axis)] == counts[static_cast<std::size_t>(axis)]) {
      idx[static_cast<std::size_t>(axis)] = 0;
      ++axis;
    }
    if (axis == n) break;
  }

  const double phi0 = plant->evaluate(spec.u0).phi;
  ParameterCeilings c;
  c.eps_p = -min_gp;
  c.delta_gp = c.eps_p;
  c.eps = -min_g;
  c.delta_g = c.eps;
  c.delta_phi = phi0 - min_phi;
  if ((c.eps_p.size() > 0 && c.eps_p.minCoeff() <= 0.0) || (c.eps.size() > 0 && c.eps.minCoeff() <= 0.0)) {
    throw ValidationError("a constraint is nonnegative over the whole grid; no ceiling can be derived");
  }
  if (!(c.delta_phi > 0.0)) c.delta_phi = resolution;
  return c;
}

Engine::Engine(ProblemSpec spec, RunConfig config)
    : spec_(std::move(spec)), config_(std::move(config)), growth_(worst_case_growth(spec_.lipschitz, spec_.box)) {
  spec_.check_consistency();
  if (config_.target) spec_.target = *config_.target;
  if (config_.max_halvings < 0 || config_.fixed_level < 0) {
    throw ValidationError("max_halvings and fixed_level must be nonnegative");
  }
  if (config_.ceilings) {
    ceilings_ = *config_.ceilings;
  } else if (spec_.ceilings) {
    ceilings_ = *spec_.ceilings;
  } else {
    ceilings_ = grid_ceilings(spec_);
  }
  spec_.ceilings = ceilings_;
  spec_.check_consistency();
  auto positive = [](const Vector& v) { return v.size() == 0 || v.minCoeff() > 0.0; };
  if (!positive(ceilings_.eps_p) || !positive(ceilings_.delta_gp) || !positive(ceilings_.eps) ||
      !positive(ceilings_.delta_g) || !(ceilings_.delta_phi > 0.0)) {
    throw ValidationError("projection-parameter ceilings must be strictly positive");
  }
}

IterateRecord Engine::make_record(std::size_t k, const Vector& u, Measurement m) const {
  if (!m.finite() || m.g_p.size() != static_cast<Eigen::Index>(spec_.n_gp()) ||
      m.grad_phi.size() != u.size() || m.grad_g_p.rows() != m.g_p.size() ||
      (m.g_p.size() > 0 && m.grad_g_p.cols() != u.size())) {
    throw ValidationError("measurement at experiment " + std::to_string(k) + " is malformed");
  }
  if (m.grad_g_p.rows() == 0) m.grad_g_p.resize(0, u.size());
  IterateRecord rec;
  rec.k = k;
  rec.u = u;
  rec.measurement = std::move(m);
  const NumericalValues num = evaluate_numerical(spec_, u);
  rec.g_values = num.values;
  rec.g_gradients = num.gradients;
  return rec;
}

void Engine::check_feasible(const IterateRecord& rec) const {
  const std::string at = " at experiment " + std::to_string(rec.k);
  for (Eigen::Index j = 0; j < rec.measurement.g_p.size(); ++j) {
    if (!(rec.measurement.g_p[j] < 0.0)) {
      throw LipschitzViolation("g_p[" + std::to_string(j) + "] = " + std::to_string(rec.measurement.g_p[j]) + at);
    }
  }
  for (Eigen::Index j = 0; j < rec.g_values.size(); ++j) {
    if (!(rec.g_values[j] <= 0.0)) {
      throw LipschitzViolation("g[" + std::to_string(j) + "] = " + std::to_string(rec.g_values[j]) + at);
    }
  }
  if (!spec_.box.contains(rec.u)) throw LipschitzViolation("point left the box" + at);
}

IterateRecord Engine::initial() {
  IterateRecord rec = make_record(0, spec_.u0, spec_.oracle->measure(spec_.u0));
  const ValidationReport report = validate_initial_point(spec_, rec.measurement);
  if (!report.ok) throw ValidationError("initial point rejected: " + report.summary());
  g_p_u0_ = rec.measurement.g_p;
  return rec;
}

IterateRecord Engine::step(const IterateRecord& state) {
  if (state.status == StepStatus::terminated || state.status == StepStatus::projection_infeasible) {
    return state;
  }
  if (g_p_u0_.size() != static_cast<Eigen::Index>(spec_.n_gp())) {
    g_p_u0_ = spec_.oracle->measure(spec_.u0).g_p;
  }

  ProjectionParams params;
  std::optional<Projection> proj;
  FeasibilityWitness witness;
  if (config_.adapt) {
    AdaptOutcome a = adapt_parameters(state, ceilings_, config_.max_halvings, spec_.box);
    params = a.params;
    witness = a.witness;
    if (a.terminate) {
      IterateRecord rec = state;
      rec.k = state.k + 1;
      rec.status = StepStatus::terminated;
      rec.params_level = params.level;
      rec.target.reset();
      rec.projected_target.reset();
      rec.K.reset();
      rec.gain_floor.reset();
      return rec;
    }
    proj = std::move(a.projection);
  } else {
    params = ProjectionParams::at_level(ceilings_, config_.fixed_level);
    proj = assemble_projection(state, params, spec_.box);
    witness = lp_feasible(proj->halfspaces);
    if (!witness.feasible) {
      IterateRecord rec = state;
      rec.k = state.k + 1;
      rec.status = StepStatus::projection_infeasible;
      rec.params_level = params.level;
      rec.target.reset();
      rec.projected_target.reset();
      rec.K.reset();
      rec.gain_floor.reset();
      return rec;
    }
  }

  const Vector target = spec_.target.next(state.k, spec_.box);
  const ProjectionResult pr = qp_project_detailed(target, proj->halfspaces, witness);
  const GainSearch gs = filter_gain_search(state, pr.point, spec_, proj->active);
  if (!(gs.K > 0.0)) {
    throw InternalError("filter gain search returned K = 0 at experiment " + std::to_string(state.k));
  }
  const Vector u_next = spec_.box.clamp(apply_filter(state.u, pr.point, gs.K));

  IterateRecord rec = make_record(state.k + 1, u_next, spec_.oracle->measure(u_next));
  rec.target = target;
  rec.projected_target = pr.point;
  rec.K = gs.K;
  rec.params_level = params.level;
  rec.status = StepStatus::stepped;
  rec.gain_floor = filter_gain_floor(params, growth_, spec_.lipschitz, g_p_u0_);

  check_feasible(rec);
  if (!(rec.measurement.phi < state.measurement.phi + 1e-14)) {
    throw LipschitzViolation("cost increased from " + std::to_string(state.measurement.phi) + " to " +
                             std::to_string(rec.measurement.phi) + " at experiment " + std::to_string(rec.k));
  }
  return rec;
}

Trajectory Engine::run() {
  Trajectory traj;
  traj.ceilings = ceilings_;
  traj.max_halvings = config_.max_halvings;
  traj.records.push_back(initial());
  if (on_record) on_record(traj.records.back());

  std::size_t experiments = 0;
  try {
    while (experiments < config_.budget) {
      IterateRecord next = step(traj.last());
      const bool done = next.status != StepStatus::stepped;
      traj.records.push_back(std::move(next));
      if (on_record) on_record(traj.records.back());
      if (done) {
        traj.terminal = traj.last().u;
        break;
      }
      ++experiments;
    }
  } catch (const ValidationError& e) {
    throw RunAborted(std::move(traj), e.what(), 1);
  } catch (const std::exception& e) {
    throw RunAborted(std::move(traj), e.what(), 2);
  }
  return traj;
}

}  // namespace scfo
