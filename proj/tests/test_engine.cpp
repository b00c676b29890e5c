#include "doctest.h"

#include <random>

#include "oracles.hpp"
#include "scfo/bench.hpp"
#include "scfo/bounds.hpp"
#include "scfo/engine.hpp"
#include "scfo/errors.hpp"

using namespace scfo;

namespace {

Vector v2(double a, double b) {
  Vector v(2);
  v << a, b;
  return v;
}

IterateRecord state_at(const ProblemSpec& spec, const Vector& u, std::size_t k = 0) {
  IterateRecord r;
  r.k = k;
  r.u = u;
  r.measurement = spec.oracle->measure(u);
  const NumericalValues nv = evaluate_numerical(spec, u);
  r.g_values = nv.values;
  r.g_gradients = nv.gradients;
  return r;
}

bool strictly_feasible(const ProblemSpec& spec, const Vector& u) {
  const Measurement m = spec.oracle->measure(u);
  if (m.g_p.size() > 0 && m.g_p.maxCoeff() >= 0) return false;
  for (const auto& c : spec.numerical_constraints) {
    if (c.value(u) > 0) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("status names round trip") {
  for (auto s : {StepStatus::initial, StepStatus::stepped, StepStatus::projection_infeasible, StepStatus::terminated}) {
    CHECK(parse_step_status(to_string(s)) == s);
  }
  CHECK_THROWS_AS(parse_step_status("done"), ValidationError);
}

TEST_CASE("epsilon-active sets use inclusive thresholds") {
  ProjectionParams p;
  p.eps_p = v2(1.0, 0.5);
  p.eps = Vector::Constant(1, 0.25);
  const ActiveIndices a = epsilon_active(v2(-1.0, -0.6), Vector::Constant(1, -0.25), p);
  CHECK(a.g_p == std::vector<std::size_t>{0});
  CHECK(a.g == std::vector<std::size_t>{0});
}

TEST_CASE("projection rows follow the active sets") {
  const ProblemSpec spec = builtin("constrained_quadratic");
  const IterateRecord s = state_at(spec, spec.u0);
  const ProjectionParams p = ProjectionParams::at_level(*spec.ceilings, 1);
  const Projection proj = assemble_projection(s, p, spec.box);
  const auto rows = proj.active.g_p.size() + proj.active.g.size() + 1;
  REQUIRE(proj.halfspaces.rows() == static_cast<Eigen::Index>(rows));
  const Eigen::Index last = proj.halfspaces.rows() - 1;
  CHECK(proj.halfspaces.normals().row(last).transpose().isApprox(s.measurement.grad_phi));
  CHECK(proj.halfspaces.offsets()[last] == -0.5);
  CHECK(proj.halfspaces.anchor().isApprox(spec.u0));
}

TEST_CASE("filter gain meets the surrogate conditions and the floor") {
  const ProblemSpec spec = builtin("constrained_quadratic");
  const GrowthBounds gb = worst_case_growth(spec.lipschitz, spec.box);
  const Vector gp0 = spec.oracle->measure(spec.u0).g_p;
  const Vector target = spec.box.center();
  std::mt19937_64 rng(41);
  int checked = 0;
  for (int t = 0; t < 3000 && checked < 300; ++t) {
    const Vector u = oracle::uniform_in(rng, spec.box.lower(), spec.box.upper());
    if (!strictly_feasible(spec, u)) continue;
    const IterateRecord s = state_at(spec, u);
    const AdaptOutcome a = adapt_parameters(s, *spec.ceilings, 10, spec.box);
    if (a.terminate) continue;
    // The floor presumes the constraint margins it guarantees along a run.
    bool margins = true;
    for (std::size_t j = 0; j < spec.n_gp(); ++j) {
      margins = margins && -s.measurement.g_p[static_cast<Eigen::Index>(j)] >=
                               constraint_floor(spec.lipschitz, a.params, gb, gp0, j);
    }
    if (!margins) continue;
    const Vector ubar = qp_project(target, a.projection->halfspaces);
    if ((ubar - u).cwiseAbs().maxCoeff() == 0.0) continue;
    const GainSearch gs = filter_gain_search(s, ubar, spec, a.projection->active);
    ++checked;
    CHECK(gs.K > 0.0);
    CHECK(gs.K <= 1.0);
    const Vector next = apply_filter(u, ubar, gs.K);
    CHECK(spec.box.contains(next, 1e-12));
    for (Eigen::Index j = 0; j < s.measurement.g_p.size(); ++j) {
      const double lin = linear_growth(spec.lipschitz.kappa_p().row(j).transpose(), u, ubar);
      CHECK(s.measurement.g_p[j] + gs.K * lin <= 1e-12);
    }
    const double slope = s.measurement.grad_phi.dot(ubar - u);
    CHECK(gs.K * slope + gs.K * gs.K * quadratic_growth(spec.lipschitz.m_phi(), u, ubar) <= 1e-12);
    CHECK(strictly_feasible(spec, next));
    CHECK(spec.oracle->measure(next).phi < s.measurement.phi);
    CHECK(gs.K >= filter_gain_floor(a.params, gb, spec.lipschitz, gp0) * (1 - 1e-12));
  }
  CHECK(checked >= 100);
}

TEST_CASE("adaptation halves until the projection is feasible") {
  const ProblemSpec spec = builtin("rosenbrock");
  const IterateRecord s = state_at(spec, v2(0.99, 0.98));
  const AdaptOutcome a = adapt_parameters(s, *spec.ceilings, 20, spec.box);
  REQUIRE_FALSE(a.terminate);
  CHECK(a.levels_tested == a.params.level + 1);
  REQUIRE(a.params.level > 0);
  const ProjectionParams below = ProjectionParams::at_level(*spec.ceilings, a.params.level - 1);
  CHECK_FALSE(lp_feasible(assemble_projection(s, below, spec.box).halfspaces).feasible);
  const AdaptOutcome stop = adapt_parameters(s, *spec.ceilings, a.params.level - 1, spec.box);
  CHECK(stop.terminate);
  CHECK(stop.levels_tested == a.params.level);
}

TEST_CASE("a terminated state is returned unchanged") {
  const ProblemSpec spec = builtin("rosenbrock");
  RunConfig cfg;
  cfg.max_halvings = 0;
  Engine engine(spec, cfg);
  IterateRecord s = engine.initial();
  IterateRecord r = s;
  for (int i = 0; i < 5000 && r.status != StepStatus::terminated; ++i) r = engine.step(r);
  REQUIRE(r.status == StepStatus::terminated);
  const IterateRecord again = engine.step(r);
  CHECK(again.k == r.k);
  CHECK(again.u == r.u);
  CHECK(again.status == StepStatus::terminated);
}

TEST_CASE("budget counts experiments after u0") {
  const ProblemSpec spec = builtin("constrained_quadratic");
  RunConfig cfg;
  cfg.budget = 3;
  std::size_t seen = 0;
  Engine engine(spec, cfg);
  engine.on_record = [&](const IterateRecord&) { ++seen; };
  const Trajectory t = engine.run();
  CHECK(t.records.size() == 4);
  CHECK(seen == 4);
  CHECK_FALSE(t.terminal.has_value());
  for (std::size_t i = 0; i < t.records.size(); ++i) CHECK(t.records[i].k == i);
  CHECK(t.records[0].status == StepStatus::initial);
  CHECK(t.stepped() == 3);
}

TEST_CASE("fixed-level runs stop at the first infeasible projection") {
  const ProblemSpec spec = builtin("constrained_quadratic");
  RunConfig cfg;
  cfg.adapt = false;
  cfg.fixed_level = 2;
  cfg.budget = 100000;
  const Trajectory t = run(spec, cfg);
  REQUIRE(t.terminal.has_value());
  CHECK(t.last().status == StepStatus::projection_infeasible);
  CHECK(t.last().k == t.records.size() - 1);
  for (const auto& r : t.records) CHECK(r.params_level == (r.status == StepStatus::initial ? 0 : 2));
}

TEST_CASE("an infeasible initial point aborts with exit code 1") {
  ProblemSpec spec = builtin("constrained_quadratic");
  spec.u0 = v2(0.0, 0.15);
  try {
    run(spec, RunConfig{});
    FAIL("expected RunAborted");
  } catch (const RunAborted&) {
    FAIL("initial rejection must not be wrapped");
  } catch (const ValidationError&) {
  }
}

TEST_CASE("constants far below the true derivatives are caught") {
  ProblemSpec spec = builtin("rosenbrock");
  spec.lipschitz = spec.lipschitz.scaled(0.2);
  try {
    run(spec, RunConfig{});
    FAIL("expected RunAborted");
  } catch (const RunAborted& e) {
    CHECK(e.exit_code() == 2);
    CHECK(e.partial().records.size() >= 1);
    CHECK(std::string(e.what()).find("Lipschitz") != std::string::npos);
  }
  ProblemSpec q = builtin("constrained_quadratic");
  q.lipschitz = q.lipschitz.scaled(0.2);
  CHECK_THROWS_AS(run(q, RunConfig{}), RunAborted);
}

TEST_CASE("ceilings from grid minima") {
  ProblemSpec spec = builtin("rosenbrock");
  const ParameterCeilings c = grid_ceilings(spec);
  CHECK(c.delta_phi == doctest::Approx(1.0));
  ProblemSpec q = builtin("constrained_quadratic");
  const ParameterCeilings cq = grid_ceilings(q);
  CHECK(cq.eps_p.minCoeff() > 0.0);
  CHECK(cq.delta_gp.isApprox(cq.eps_p));
  CHECK(cq.eps[0] > 0.0);
  q.ceilings.reset();
  Engine e(q, RunConfig{});
  CHECK(e.ceilings().eps_p.isApprox(cq.eps_p));
}

TEST_CASE("invalid run configuration") {
  RunConfig cfg;
  cfg.max_halvings = -1;
  CHECK_THROWS_AS(Engine(builtin("rosenbrock"), cfg), ValidationError);
  RunConfig bad;
  bad.ceilings = ParameterCeilings{Vector(0), Vector(0), Vector(0), Vector(0), 0.0};
  CHECK_THROWS_AS(Engine(builtin("rosenbrock"), bad), ValidationError);
}

TEST_CASE("run invariants on both builtins") {
  for (const auto& name : builtin_names()) {
    const ProblemSpec spec = builtin(name);
    RunConfig cfg;
    cfg.budget = 2000;
    const Trajectory t = run(spec, cfg);
    for (std::size_t i = 1; i < t.records.size(); ++i) {
      const IterateRecord& r = t.records[i];
      const IterateRecord& prev = t.records[i - 1];
      CHECK(spec.box.contains(r.u));
      if (r.measurement.g_p.size() > 0) CHECK(r.measurement.g_p.maxCoeff() < 0);
      if (r.g_values.size() > 0) CHECK(r.g_values.maxCoeff() <= 0);
      if (r.status != StepStatus::stepped) continue;
      REQUIRE(r.K.has_value());
      CHECK(*r.K > 0.0);
      CHECK(*r.K <= 1.0);
      CHECK((apply_filter(prev.u, *r.projected_target, *r.K) - r.u).cwiseAbs().maxCoeff() <= 1e-15);
      CHECK(r.measurement.phi < prev.measurement.phi);
      // The projected target satisfies the halfspaces assembled at prev.
      const ProjectionParams p = ProjectionParams::at_level(t.ceilings, r.params_level);
      const Projection proj = assemble_projection(prev, p, spec.box);
      CHECK(proj.halfspaces.max_violation(*r.projected_target) <= 1e-8);
      CHECK(spec.box.contains(*r.projected_target));
    }
  }
}

TEST_CASE("closed-form constraint cap matches direct evaluation") {
  const ProblemSpec spec = builtin("constrained_quadratic");
  const auto& lip = spec.lipschitz;
  std::mt19937_64 rng(53);
  int checked = 0;
  for (int t = 0; t < 2000 && checked < 200; ++t) {
    const Vector u = oracle::uniform_in(rng, spec.box.lower(), spec.box.upper());
    const Vector ubar = oracle::uniform_in(rng, spec.box.lower(), spec.box.upper());
    if (!strictly_feasible(spec, u)) continue;
    const IterateRecord s = state_at(spec, u);
    const GainSearch gs = filter_gain_search(s, ubar, spec, ActiveIndices{});
    // Largest K with g_p,j(u) + K * lin_j <= 0 for every j, found by bisection.
    auto ok = [&](double k) {
      for (Eigen::Index j = 0; j < 2; ++j) {
        if (s.measurement.g_p[j] + k * linear_growth(lip.kappa_p().row(j).transpose(), u, ubar) > 0) return false;
      }
      return true;
    };
    double lo = 0, hi = 1e6;
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (lo + hi);
      (ok(mid) ? lo : hi) = mid;
    }
    CHECK(gs.cap_constraints == doctest::Approx(lo).epsilon(1e-10));
    ++checked;
  }
  CHECK(checked >= 100);
}

TEST_CASE("fixed-level runs keep the constraint floor and the iteration bound") {
  const ProblemSpec spec = builtin("constrained_quadratic");
  const GrowthBounds gb = worst_case_growth(spec.lipschitz, spec.box);
  for (int level : {0, 1, 3}) {
    RunConfig cfg;
    cfg.adapt = false;
    cfg.fixed_level = level;
    cfg.budget = 100000;
    const Trajectory t = run(spec, cfg);
    const ProjectionParams p = ProjectionParams::at_level(*spec.ceilings, level);
    const Vector gp0 = t.records.front().measurement.g_p;
    for (const auto& r : t.records) {
      for (std::size_t j = 0; j < 2; ++j) {
        CHECK(-r.measurement.g_p[static_cast<Eigen::Index>(j)] >= constraint_floor(spec.lipschitz, p, gb, gp0, j));
      }
    }
    const double bound = max_feasible_iterations(filter_gain_floor(p, gb, spec.lipschitz, gp0), spec.lipschitz, gb,
                                                 p.delta_phi, t.records.front().measurement.phi, *spec.phi_lower);
    CHECK(static_cast<double>(t.stepped()) <= bound);
  }
}
