#include "scfo/bench.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

#include "scfo/errors.hpp"

namespace scfo {

Measurement ConstrainedQuadraticPlant::evaluate(const Vector& u) const {
  const double a = u[0];
  const double b = u[1];
  Measurement m;
  m.phi = (a - 0.5) * (a - 0.5) + (b - 0.4) * (b - 0.4);
  m.grad_phi = Vector(2);
  m.grad_phi << 2.0 * (a - 0.5), 2.0 * (b - 0.4);
  m.g_p = Vector(2);
  m.g_p << -6.0 * a * a - 3.5 * a + b - 0.6, 2.0 * a * a + 0.5 * a + b - 0.75;
  m.grad_g_p = Matrix(2, 2);
  m.grad_g_p << -12.0 * a - 3.5, 1.0, 4.0 * a + 0.5, 1.0;
  return m;
}

Matrix ConstrainedQuadraticPlant::hessian_phi(const Vector&) const { return 2.0 * Matrix::Identity(2, 2); }

Matrix ConstrainedQuadraticPlant::hessian_g_p(std::size_t j, const Vector&) const {
  Matrix h = Matrix::Zero(2, 2);
  h(0, 0) = j == 0 ? -12.0 : 4.0;
  return h;
}

Measurement RosenbrockPlant::evaluate(const Vector& u) const {
  const double a = u[0];
  const double b = u[1];
  const double r = b - a * a;
  Measurement m;
  m.phi = (1.0 - a) * (1.0 - a) + 100.0 * r * r;
  m.grad_phi = Vector(2);
  m.grad_phi << -2.0 * (1.0 - a) - 400.0 * a * r, 200.0 * r;
  m.g_p = Vector(0);
  m.grad_g_p = Matrix(0, 2);
  return m;
}

Matrix RosenbrockPlant::hessian_phi(const Vector& u) const {
  const double a = u[0];
  const double b = u[1];
  Matrix h(2, 2);
  h << 2.0 - 400.0 * b + 1200.0 * a * a, -400.0 * a, -400.0 * a, 200.0;
  return h;
}

Matrix RosenbrockPlant::hessian_g_p(std::size_t, const Vector&) const {
  throw ValidationError("rosenbrock has no experimental constraints");
}

NumericalConstraint circle_exclusion() {
  NumericalConstraint c;
  c.name = "circle_exclusion";
  c.value = [](const Vector& u) { return -u[0] * u[0] - (u[1] - 0.15) * (u[1] - 0.15) + 0.01; };
  c.gradient = [](const Vector& u) {
    Vector g(2);
    g << -2.0 * u[0], -2.0 * (u[1] - 0.15);
    return g;
  };
  c.hessian = [](const Vector&) { return Matrix(-2.0 * Matrix::Identity(2, 2)); };
  return c;
}

std::vector<std::string> builtin_names() { return {"constrained_quadratic", "rosenbrock"}; }

namespace {

Matrix mat2(double a, double b, double c, double d) {
  Matrix m(2, 2);
  m << a, b, c, d;
  return m;
}

Vector vec(std::initializer_list<double> xs) {
  Vector v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v[i++] = x;
  return v;
}

ProblemSpec constrained_quadratic() {
  Matrix kappa_p = mat2(10, 2, 3, 2);
  Matrix kappa(1, 2);
  kappa << 1.1, 1.4;
  LipschitzData lip(kappa_p, kappa, mat2(3, 1, 1, 3), {mat2(3, 1, 1, 3)},
                    {mat2(13, 1, 1, 1), mat2(5, 1, 1, 1)},
                    Vector::Constant(2, LipschitzData::kDefaultGamma), LipschitzData::kDefaultGamma);
  ParameterCeilings c{vec({4, 2}), vec({4, 2}), vec({1}), vec({1}), 1.0};
  return ProblemSpec{"constrained_quadratic",
                     Box(vec({-0.5, 0.0}), vec({0.5, 0.8})),
                     std::make_shared<ConstrainedQuadraticPlant>(),
                     {circle_exclusion()},
                     std::move(lip),
                     vec({-0.45, 0.05}),
                     TargetRule::box_center(),
                     c,
                     0.0};
}

ProblemSpec rosenbrock() {
  LipschitzData lip(Matrix(0, 2), Matrix(0, 2), mat2(1500, 500, 500, 300), {}, {}, Vector(0),
                    LipschitzData::kDefaultGamma);
  ParameterCeilings c{Vector(0), Vector(0), Vector(0), Vector(0), 1.0};
  return ProblemSpec{"rosenbrock",
                     Box(vec({0, 0}), vec({1, 1})),
                     std::make_shared<RosenbrockPlant>(),
                     {},
                     std::move(lip),
                     vec({0, 0}),
                     TargetRule::fixed(vec({1, 1})),
                     c,
                     0.0};
}

struct ScalarConstraint {
  std::function<double(const Vector&)> value;
  std::function<Vector(const Vector&)> gradient;
};

std::vector<ScalarConstraint> all_constraints(const ProblemSpec& spec, const AnalyticPlant& plant) {
  std::vector<ScalarConstraint> out;
  for (std::size_t j = 0; j < spec.n_gp(); ++j) {
    const auto ij = static_cast<Eigen::Index>(j);
    out.push_back({[&plant, ij](const Vector& u) { return plant.evaluate(u).g_p[ij]; },
                   [&plant, ij](const Vector& u) { return Vector(plant.evaluate(u).grad_g_p.row(ij).transpose()); }});
  }
  for (const auto& c : spec.numerical_constraints) out.push_back({c.value, c.gradient});
  return out;
}

/// Root of f on [a, b] given a sign change; returns nullopt otherwise.
std::optional<double> bisect(const std::function<double(double)>& f, double a, double b) {
  double fa = f(a);
  const double fb = f(b);
  if (fa == 0.0) return a;
  if (fb == 0.0) return b;
  if ((fa < 0.0) == (fb < 0.0)) return std::nullopt;
  for (int it = 0; it < 200 && b - a > 1e-15; ++it) {
    const double mid = 0.5 * (a + b);
    const double fm = f(mid);
    if ((fm < 0.0) == (fa < 0.0)) {
      a = mid;
      fa = fm;
    } else {
      b = mid;
    }
  }
  return 0.5 * (a + b);
}

/// Root of f nearest x0 inside [lo, hi], searching outward from a small window.
std::optional<double> bracket_root(const std::function<double(double)>& f, double x0, double w, double lo,
                                   double hi) {
  for (; w < 4.0 * (hi - lo); w *= 2.0) {
    const double a = std::max(lo, x0 - w);
    const double b = std::min(hi, x0 + w);
    if (auto r = bisect(f, a, b)) return r;
  }
  return std::nullopt;
}

Vector polish_on_boundary(const AnalyticPlant& plant, const ScalarConstraint& c, const Box& box, const Vector& start,
                          double resolution) {
  const Vector g0 = c.gradient(start);
  const Eigen::Index dep = std::abs(g0[1]) >= std::abs(g0[0]) ? 1 : 0;
  const Eigen::Index free = 1 - dep;

  auto lift = [&](double x) -> std::optional<Vector> {
    Vector u = start;
    u[free] = x;
    auto along = [&](double y) {
      u[dep] = y;
      return c.value(u);
    };
    auto y = bracket_root(along, start[dep], 20.0 * resolution, box.lower()[dep], box.upper()[dep]);
    if (!y) return std::nullopt;
    u[dep] = *y;
    return u;
  };
  auto reduced = [&](double x) {
    auto u = lift(x);
    if (!u) return std::numeric_limits<double>::quiet_NaN();
    const Vector gp = plant.evaluate(*u).grad_phi;
    const Vector gc = c.gradient(*u);
    return gp[free] - gp[dep] * gc[free] / gc[dep];
  };
  const auto x = bracket_root(reduced, start[free], 5.0 * resolution, box.lower()[free], box.upper()[free]);
  if (!x) return start;
  auto u = lift(*x);
  return u ? *u : start;
}

Vector newton_polish(const AnalyticPlant& plant, const Box& box, Vector u) {
  for (int it = 0; it < 50; ++it) {
    const Vector g = plant.evaluate(u).grad_phi;
    const Matrix h = plant.hessian_phi(u);
    Eigen::LLT<Matrix> llt(h);
    if (llt.info() != Eigen::Success) return u;
    const Vector next = box.clamp(u - llt.solve(g));
    if ((next - u).norm() < 1e-15) return next;
    u = next;
  }
  return u;
}

}  // namespace

ProblemSpec builtin(const std::string& name) {
  if (name == "constrained_quadratic") return constrained_quadratic();
  if (name == "rosenbrock") return rosenbrock();
  throw ValidationError("unknown builtin problem '" + name + "' (expected constrained_quadratic or rosenbrock)");
}

Vector derived_optimum(const ProblemSpec& spec, double resolution) {
  const auto* plant = dynamic_cast<const AnalyticPlant*>(spec.oracle.get());
  if (plant == nullptr) throw ValidationError("derived optimum needs a builtin analytic plant");
  if (!(resolution > 0.0)) throw ValidationError("grid resolution must be positive");
  const auto n = static_cast<Eigen::Index>(spec.n_u());
  const Box& box = spec.box;
  const auto constraints = all_constraints(spec, *plant);

  std::vector<Eigen::Index> counts(static_cast<std::size_t>(n));
  double total = 1.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    counts[static_cast<std::size_t>(i)] = static_cast<Eigen::Index>(std::floor(box.range()[i] / resolution + 1e-9)) + 1;
    total *= static_cast<double>(counts[static_cast<std::size_t>(i)]);
  }
  if (total > 2e7) throw ValidationError("derived-optimum grid too large");

  std::vector<Eigen::Index> idx(static_cast<std::size_t>(n), 0);
  Vector u(n);
  Vector best;
  double best_phi = std::numeric_limits<double>::infinity();
  while (true) {
    for (Eigen::Index i = 0; i < n; ++i) {
      u[i] = std::min(box.upper()[i], box.lower()[i] + resolution * static_cast<double>(idx[static_cast<std::size_t>(i)]));
    }
    const Measurement m = plant->evaluate(u);
    bool feasible = m.g_p.size() == 0 || m.g_p.maxCoeff() <= 0.0;
    for (std::size_t j = 0; feasible && j < spec.n_g(); ++j) feasible = spec.numerical_constraints[j].value(u) <= 0.0;
    if (feasible && m.phi < best_phi) {
      best_phi = m.phi;
      best = u;
    }
    Eigen::Index axis = 0;
    while (axis < n && ++idx[static_cast<std::size_t>(axis)] == counts[static_cast<std::size_t>(axis)]) {
      idx[static_cast<std::size_t>(axis)] = 0;
      ++axis;
    }
    if (axis == n) break;
  }
  if (best.size() == 0) throw ValidationError("no feasible grid point");

  std::vector<std::size_t> near;
  for (std::size_t j = 0; j < constraints.size(); ++j) {
    const double tol = 3.0 * resolution * constraints[j].gradient(best).lpNorm<1>();
    if (constraints[j].value(best) >= -tol) near.push_back(j);
  }
  if (near.empty()) return newton_polish(*plant, box, best);
  if (near.size() == 1 && n == 2) return polish_on_boundary(*plant, constraints[near.front()], box, best, resolution);
  return best;
}

Summary summarize(const Trajectory& traj, const std::optional<Vector>& reference) {
  if (traj.records.empty()) throw ValidationError("cannot summarize an empty trajectory");
  Summary s;
  s.max_g_p = -std::numeric_limits<double>::infinity();
  s.max_g = -std::numeric_limits<double>::infinity();
  for (const auto& r : traj.records) {
    if (r.status == StepStatus::initial || r.status == StepStatus::stepped) {
      ++s.experiments;
      s.cost.push_back(r.measurement.phi);
      if (reference) s.distance.push_back((r.u - *reference).norm());
    }
    if (r.status == StepStatus::stepped) ++s.stepped;
    if (r.measurement.g_p.size() > 0) s.max_g_p = std::max(s.max_g_p, r.measurement.g_p.maxCoeff());
    if (r.g_values.size() > 0) s.max_g = std::max(s.max_g, r.g_values.maxCoeff());
  }
  s.terminated = traj.terminal.has_value();
  s.initial_cost = traj.records.front().measurement.phi;
  s.final_cost = traj.last().measurement.phi;
  s.final_point = traj.last().u;
  return s;
}

}  // namespace scfo
