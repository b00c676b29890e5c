#include "scfo/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "scfo/errors.hpp"

namespace scfo {

double linear_growth(const Vector& kappa_row, const Vector& from, const Vector& to) {
  return kappa_row.dot((to - from).cwiseAbs());
}

double quadratic_growth(const Matrix& M, const Vector& from, const Vector& to) {
  const Vector d = (to - from).cwiseAbs();
  return 0.5 * d.dot(M * d);
}

GrowthBounds worst_case_growth(const LipschitzData& lip, const Box& box) {
  const Vector r = box.range();
  GrowthBounds gb;
  gb.L_p = lip.kappa_p() * r;
  gb.L = lip.kappa() * r;
  gb.Q_phi = r.dot(lip.m_phi() * r);
  gb.Q_g.resize(static_cast<Eigen::Index>(lip.n_g()));
  for (std::size_t j = 0; j < lip.n_g(); ++j) {
    gb.Q_g[static_cast<Eigen::Index>(j)] = r.dot(lip.m_g()[j] * r);
  }
  gb.Q_gp.resize(static_cast<Eigen::Index>(lip.n_gp()));
  for (std::size_t j = 0; j < lip.n_gp(); ++j) {
    gb.Q_gp[static_cast<Eigen::Index>(j)] = r.dot(lip.m_gp()[j] * r);
  }
  return gb;
}

double constraint_floor(const LipschitzData& lip, const ProjectionParams& params,
                        const GrowthBounds& gb, const Vector& g_p_at_u0, std::size_t j) {
  const auto i = static_cast<Eigen::Index>(j);
  const double slack = 1.0 - lip.gamma()[i];
  const double delta = params.delta_gp[i];
  return std::min({slack * params.eps_p[i], 2.0 * slack * delta * delta / gb.Q_gp[i], -g_p_at_u0[i]});
}

double filter_gain_floor(const ProjectionParams& params, const GrowthBounds& gb,
                         const LipschitzData& lip, const Vector& g_p_at_u0) {
  if (g_p_at_u0.size() != static_cast<Eigen::Index>(lip.n_gp())) {
    throw ValidationError("g_p(u0) length does not match the experimental constraint count");
  }
  for (Eigen::Index j = 0; j < g_p_at_u0.size(); ++j) {
    if (!(g_p_at_u0[j] < 0.0)) {
      throw ValidationError("filter gain floor requires g_p(u0) < 0 (constraint " + std::to_string(j) + ")");
    }
  }
  double floor = 2.0 * params.delta_phi / gb.Q_phi;
  for (Eigen::Index j = 0; j < gb.L.size(); ++j) {
    floor = std::min({floor, params.eps[j] / gb.L[j], 2.0 * params.delta_g[j] / gb.Q_g[j]});
  }
  for (std::size_t j = 0; j < lip.n_gp(); ++j) {
    floor = std::min(floor, constraint_floor(lip, params, gb, g_p_at_u0, j) /
                                gb.L_p[static_cast<Eigen::Index>(j)]);
  }
  return floor;
}

double max_feasible_iterations(double k_floor, const LipschitzData& lip, const GrowthBounds& gb,
                               double delta_phi, double phi_u0, double phi_lower) {
  if (!(k_floor > 0.0)) throw ValidationError("iteration bound requires a positive gain floor");
  if (phi_lower > phi_u0) throw ValidationError("iteration bound requires phi_lower <= phi(u0)");
  const double gamma = lip.gamma_phi();
  const double at_floor = k_floor * (k_floor * gamma * gb.Q_phi / 2.0 - delta_phi);
  const double at_cap = 2.0 * (gamma - 1.0) * delta_phi * delta_phi / gb.Q_phi;
  const double decrease = std::max(at_floor, at_cap);
  if (!(decrease < 0.0)) {
    throw ValidationError("per-experiment decrease bound is not negative; check gamma_phi and the gain floor");
  }
  return (phi_lower - phi_u0) / decrease;
}

namespace {

class RatioTracker {
 public:
  explicit RatioTracker(std::vector<LipschitzCheck>& out) : out_(out) {}

  void observe(const std::string& name, double derivative, double constant) {
    const double ratio = std::abs(derivative) / constant;
    for (auto& c : out_) {
      if (c.constant == name) {
        c.worst_ratio = std::max(c.worst_ratio, ratio);
        return;
      }
    }
    out_.push_back({name, ratio, true});
  }

 private:
  std::vector<LipschitzCheck>& out_;
};

std::string idx(const std::string& base, std::size_t a, std::size_t b) {
  return base + "[" + std::to_string(a) + "][" + std::to_string(b) + "]";
}

std::string idx(const std::string& base, std::size_t a, std::size_t b, std::size_t c) {
  return base + "[" + std::to_string(a) + "][" + std::to_string(b) + "][" + std::to_string(c) + "]";
}

}  // namespace

LipschitzReport validate_lipschitz(const ProblemSpec& spec, std::size_t samples, std::uint64_t seed) {
  const auto* plant = dynamic_cast<const AnalyticPlant*>(spec.oracle.get());
  if (plant == nullptr) {
    throw ValidationError("Lipschitz validation needs a builtin analytic plant");
  }
  const auto& lip = spec.lipschitz;
  const std::size_t n = spec.n_u();

  LipschitzReport report;
  report.samples = samples;
  RatioTracker track(report.checks);

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Vector u(static_cast<Eigen::Index>(n));

  for (std::size_t s = 0; s < samples; ++s) {
    for (std::size_t i = 0; i < n; ++i) {
      const auto ii = static_cast<Eigen::Index>(i);
      u[ii] = spec.box.lower()[ii] + unit(rng) * spec.box.range()[ii];
    }
    const Measurement m = plant->evaluate(u);
    const Matrix h_phi = plant->hessian_phi(u);
    for (std::size_t a = 0; a < n; ++a) {
      for (std::size_t b = 0; b < n; ++b) {
        const auto ia = static_cast<Eigen::Index>(a);
        const auto ib = static_cast<Eigen::Index>(b);
        track.observe(idx("M_phi", a, b), h_phi(ia, ib), lip.m_phi()(ia, ib));
      }
    }
    for (std::size_t j = 0; j < spec.n_gp(); ++j) {
      const auto ij = static_cast<Eigen::Index>(j);
      const Matrix h = plant->hessian_g_p(j, u);
      for (std::size_t a = 0; a < n; ++a) {
        const auto ia = static_cast<Eigen::Index>(a);
        track.observe(idx("kappa_p", j, a), m.grad_g_p(ij, ia), lip.kappa_p()(ij, ia));
        for (std::size_t b = 0; b < n; ++b) {
          const auto ib = static_cast<Eigen::Index>(b);
          track.observe(idx("M_gp", j, a, b), h(ia, ib), lip.m_gp()[j](ia, ib));
        }
      }
    }
    for (std::size_t j = 0; j < spec.n_g(); ++j) {
      const auto& c = spec.numerical_constraints[j];
      const auto ij = static_cast<Eigen::Index>(j);
      const Vector grad = c.gradient(u);
      for (std::size_t a = 0; a < n; ++a) {
        const auto ia = static_cast<Eigen::Index>(a);
        track.observe(idx("kappa", j, a), grad[ia], lip.kappa()(ij, ia));
      }
      if (!c.hessian) continue;
      const Matrix h = c.hessian(u);
      for (std::size_t a = 0; a < n; ++a) {
        for (std::size_t b = 0; b < n; ++b) {
          const auto ia = static_cast<Eigen::Index>(a);
          const auto ib = static_cast<Eigen::Index>(b);
          track.observe(idx("M_g", j, a, b), h(ia, ib), lip.m_g()[j](ia, ib));
        }
      }
    }
  }

  for (auto& c : report.checks) {
    c.pass = c.worst_ratio < 1.0;
    report.ok = report.ok && c.pass;
  }
  return report;
}

}  // namespace scfo
