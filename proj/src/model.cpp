#include "scfo/model.hpp"

#include <cmath>
#include <sstream>

#include "scfo/errors.hpp"

namespace scfo {

namespace {

bool all_finite(const Matrix& m) { return m.array().isFinite().all(); }
bool all_finite(const Vector& v) { return v.array().isFinite().all(); }

void require_positive(const Matrix& m, const std::string& what) {
  if (!all_finite(m) || (m.size() > 0 && m.minCoeff() <= 0.0)) {
    throw ValidationError(what + ": every constant must be finite and > 0");
  }
}

Matrix symmetrized(const Matrix& m) { return 0.5 * (m + m.transpose()); }

}  // namespace

Box::Box(Vector lower, Vector upper) : lower_(std::move(lower)), upper_(std::move(upper)) {
  if (lower_.size() != upper_.size() || lower_.size() == 0) {
    throw ValidationError("box bounds must be nonempty vectors of equal length");
  }
  if (!all_finite(lower_) || !all_finite(upper_)) {
    throw ValidationError("box bounds must be finite");
  }
  for (Eigen::Index i = 0; i < lower_.size(); ++i) {
    if (!(lower_[i] < upper_[i])) {
      throw ValidationError("box requires lower < upper on every axis (axis " + std::to_string(i) + ")");
    }
  }
}

bool Box::contains(const Vector& u, double tol) const {
  if (u.size() != lower_.size()) return false;
  for (Eigen::Index i = 0; i < u.size(); ++i) {
    if (u[i] < lower_[i] - tol || u[i] > upper_[i] + tol) return false;
  }
  return true;
}

Vector Box::clamp(const Vector& u) const { return u.cwiseMax(lower_).cwiseMin(upper_); }

LipschitzData::LipschitzData(Matrix kappa_p, Matrix kappa, Matrix m_phi,
                             std::vector<Matrix> m_g, std::vector<Matrix> m_gp,
                             Vector gamma, double gamma_phi)
    : kappa_p_(std::move(kappa_p)),
      kappa_(std::move(kappa)),
      m_phi_(std::move(m_phi)),
      m_g_(std::move(m_g)),
      m_gp_(std::move(m_gp)),
      gamma_(std::move(gamma)),
      gamma_phi_(gamma_phi) {
  const Eigen::Index n = m_phi_.rows();
  if (n == 0 || m_phi_.cols() != n) throw ValidationError("M_phi must be a nonempty square matrix");
  if (kappa_p_.size() > 0 && kappa_p_.cols() != n) throw ValidationError("kappa_p must have n_u columns");
  if (kappa_.size() > 0 && kappa_.cols() != n) throw ValidationError("kappa must have n_u columns");
  // Allow 0 x 0 placeholders for empty constraint sets.
  if (kappa_p_.rows() == 0) kappa_p_.resize(0, n);
  if (kappa_.rows() == 0) kappa_.resize(0, n);

  require_positive(kappa_p_, "kappa_p");
  require_positive(kappa_, "kappa");
  require_positive(m_phi_, "M_phi");
  m_phi_ = symmetrized(m_phi_);

  if (m_g_.size() != static_cast<std::size_t>(kappa_.rows())) {
    throw ValidationError("M_g needs one matrix per numerical constraint");
  }
  if (m_gp_.size() != static_cast<std::size_t>(kappa_p_.rows())) {
    throw ValidationError("M_gp needs one matrix per experimental constraint");
  }
  for (auto& m : m_g_) {
    if (m.rows() != n || m.cols() != n) throw ValidationError("M_g matrices must be n_u x n_u");
    require_positive(m, "M_g");
    m = symmetrized(m);
  }
  for (auto& m : m_gp_) {
    if (m.rows() != n || m.cols() != n) throw ValidationError("M_gp matrices must be n_u x n_u");
    require_positive(m, "M_gp");
    m = symmetrized(m);
  }

  if (gamma_.size() != kappa_p_.rows()) throw ValidationError("gamma needs one entry per experimental constraint");
  for (Eigen::Index j = 0; j < gamma_.size(); ++j) {
    if (!(gamma_[j] > 0.0 && gamma_[j] < 1.0)) throw ValidationError("gamma entries must lie in (0, 1)");
  }
  if (!(gamma_phi_ >= 0.0 && gamma_phi_ < 1.0)) throw ValidationError("gamma_phi must lie in [0, 1)");
}

LipschitzData LipschitzData::scaled(double factor) const {
  std::vector<Matrix> m_g = m_g_;
  std::vector<Matrix> m_gp = m_gp_;
  for (auto& m : m_g) m *= factor;
  for (auto& m : m_gp) m *= factor;
  return LipschitzData(kappa_p_ * factor, kappa_ * factor, m_phi_ * factor, std::move(m_g),
                       std::move(m_gp), gamma_, gamma_phi_);
}

bool Measurement::finite() const {
  return std::isfinite(phi) && all_finite(g_p) && all_finite(grad_phi) && all_finite(grad_g_p);
}

TargetRule TargetRule::sequence(std::vector<Vector> points) {
  if (points.empty()) throw ValidationError("target sequence must not be empty");
  return TargetRule(Kind::sequence, std::move(points));
}

Vector TargetRule::next(std::size_t k, const Box& box) const {
  switch (kind_) {
    case Kind::box_center:
      return box.center();
    case Kind::fixed:
      return points_.front();
    case Kind::sequence:
      return points_[std::min(k, points_.size() - 1)];
  }
  return box.center();
}

void ProblemSpec::check_consistency() const {
  const auto n = static_cast<Eigen::Index>(n_u());
  if (!oracle) throw ValidationError("problem has no plant oracle");
  if (oracle->n_u() != n_u()) throw ValidationError("plant dimension does not match the box");
  if (oracle->n_gp() != n_gp()) throw ValidationError("plant constraint count does not match kappa_p rows");
  if (lipschitz.n_u() != n_u()) throw ValidationError("Lipschitz data dimension does not match the box");
  if (lipschitz.n_g() != n_g()) throw ValidationError("kappa rows must match the numerical constraint count");
  if (u0.size() != n || !all_finite(u0)) throw ValidationError("u0 must be a finite vector of length n_u");
  if (target.kind() != TargetRule::Kind::box_center) {
    for (const auto& p : target.points()) {
      if (p.size() != n || !all_finite(p)) throw ValidationError("target points must be finite vectors of length n_u");
    }
  }
  if (ceilings) {
    const auto& c = *ceilings;
    if (c.eps_p.size() != static_cast<Eigen::Index>(n_gp()) || c.delta_gp.size() != c.eps_p.size() ||
        c.eps.size() != static_cast<Eigen::Index>(n_g()) || c.delta_g.size() != c.eps.size()) {
      throw ValidationError("ceiling vector lengths do not match the constraint counts");
    }
  }
}

void ValidationReport::add(std::string label, double value, bool pass) {
  if (!pass) {
    ok = false;
    violations.push_back(label);
  }
  checks.push_back({std::move(label), value, pass});
}

std::string ValidationReport::summary() const {
  if (ok) return "all checks passed";
  std::ostringstream os;
  os << "violated:";
  for (const auto& v : violations) os << ' ' << v;
  return os.str();
}

ValidationReport validate_initial_point(const ProblemSpec& spec, const Measurement& m0) {
  ValidationReport report;
  if (!m0.finite() || m0.g_p.size() != static_cast<Eigen::Index>(spec.n_gp())) {
    report.add("measurement", 0.0, false);
    return report;
  }
  for (Eigen::Index j = 0; j < m0.g_p.size(); ++j) {
    report.add("g_p[" + std::to_string(j) + "]", m0.g_p[j], m0.g_p[j] < 0.0);
  }
  const NumericalValues num = evaluate_numerical(spec, spec.u0);
  for (Eigen::Index j = 0; j < num.values.size(); ++j) {
    report.add("g[" + std::to_string(j) + "]", num.values[j], num.values[j] <= 0.0);
  }
  for (Eigen::Index i = 0; i < spec.u0.size(); ++i) {
    const double u = spec.u0[i];
    report.add("u_lower[" + std::to_string(i) + "]", u, u >= spec.box.lower()[i]);
    report.add("u_upper[" + std::to_string(i) + "]", u, u <= spec.box.upper()[i]);
  }
  return report;
}

NumericalValues evaluate_numerical(const ProblemSpec& spec, const Vector& u) {
  const auto n_g = static_cast<Eigen::Index>(spec.n_g());
  NumericalValues out{Vector(n_g), Matrix(n_g, u.size())};
  for (Eigen::Index j = 0; j < n_g; ++j) {
    const auto& c = spec.numerical_constraints[static_cast<std::size_t>(j)];
    const double v = c.value(u);
    const Vector grad = c.gradient(u);
    if (!std::isfinite(v) || grad.size() != u.size() || !all_finite(grad)) {
      throw ValidationError("numerical constraint '" + c.name + "' produced a non-finite or malformed result");
    }
    out.values[j] = v;
    out.gradients.row(j) = grad.transpose();
  }
  return out;
}

}  // namespace scfo
