#include "scfo/fj.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>

#include "scfo/errors.hpp"

namespace scfo {

std::string to_string(FjNormalization mode) {
  return mode == FjNormalization::unit_sphere ? "unit_sphere" : "fixed_cost_multiplier";
}

FjNormalization parse_fj_normalization(const std::string& text) {
  if (text == "sphere" || text == "unit_sphere") return FjNormalization::unit_sphere;
  if (text == "fixed" || text == "fixed_cost_multiplier") return FjNormalization::fixed_cost_multiplier;
  throw ValidationError("unknown FJ normalization '" + text + "' (expected sphere or fixed)");
}

Matrix FjSystem::form() const {
  Matrix psi = gradients.transpose() * gradients;
  psi.diagonal() += slacks.cwiseAbs2();
  return psi;
}

FjSystem build_fj_system(const Vector& u, const Box& box, const Vector& grad_phi, const Vector& g_p,
                         const Matrix& grad_g_p, const Vector& g, const Matrix& grad_g) {
  const Eigen::Index n = u.size();
  const Eigen::Index n_gp = g_p.size();
  const Eigen::Index n_g = g.size();
  const Eigen::Index total = 1 + n_gp + n_g + 2 * n;

  FjSystem sys;
  sys.n_gp = static_cast<std::size_t>(n_gp);
  sys.n_g = static_cast<std::size_t>(n_g);
  sys.gradients = Matrix::Zero(n, total);
  sys.slacks = Vector::Zero(total);

  sys.gradients.col(0) = grad_phi;
  Eigen::Index c = 1;
  for (Eigen::Index j = 0; j < n_gp; ++j, ++c) {
    sys.gradients.col(c) = grad_g_p.row(j).transpose();
    sys.slacks[c] = g_p[j];
  }
  for (Eigen::Index j = 0; j < n_g; ++j, ++c) {
    sys.gradients.col(c) = grad_g.row(j).transpose();
    sys.slacks[c] = g[j];
  }
  for (Eigen::Index i = 0; i < n; ++i, ++c) {
    sys.gradients(i, c) = -1.0;
    sys.slacks[c] = box.lower()[i] - u[i];
  }
  for (Eigen::Index i = 0; i < n; ++i, ++c) {
    sys.gradients(i, c) = 1.0;
    sys.slacks[c] = u[i] - box.upper()[i];
  }
  return sys;
}

ActivityThresholds ActivityThresholds::exact(std::size_t n_gp, std::size_t n_g, double tol) {
  return ActivityThresholds{Vector::Constant(static_cast<Eigen::Index>(n_gp), tol),
                            Vector::Constant(static_cast<Eigen::Index>(n_g), tol), 1e-12};
}

void jacobi_eigen(const Matrix& a, Vector& eigenvalues, Matrix& eigenvectors) {
  const Eigen::Index n = a.rows();
  Matrix m = 0.5 * (a + a.transpose());
  Matrix v = Matrix::Identity(n, n);
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());

  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (Eigen::Index p = 0; p < n; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) off += m(p, q) * m(p, q);
    }
    if (off <= 1e-32 * scale * scale) break;

    for (Eigen::Index p = 0; p < n; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) {
        const double apq = m(p, q);
        if (apq == 0.0) continue;
        const double theta = (m(q, q) - m(p, p)) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (Eigen::Index k = 0; k < n; ++k) {
          const double mkp = m(k, p);
          const double mkq = m(k, q);
          m(k, p) = c * mkp - s * mkq;
          m(k, q) = s * mkp + c * mkq;
        }
        for (Eigen::Index k = 0; k < n; ++k) {
          const double mpk = m(p, k);
          const double mqk = m(q, k);
          m(p, k) = c * mpk - s * mqk;
          m(q, k) = s * mpk + c * mqk;
        }
        for (Eigen::Index k = 0; k < n; ++k) {
          const double vkp = v(k, p);
          const double vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }

  // Sort ascending.
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
  std::sort(order.begin(), order.end(), [&](Eigen::Index x, Eigen::Index y) { return m(x, x) < m(y, y); });
  eigenvalues.resize(n);
  eigenvectors.resize(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    eigenvalues[i] = m(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(i)]);
    eigenvectors.col(i) = v.col(order[static_cast<std::size_t>(i)]);
  }
}

SphereMinimum min_nonnegative_rayleigh(const Matrix& psi) {
  const Eigen::Index n = psi.rows();
  if (n == 0 || psi.cols() != n) throw ValidationError("Rayleigh form must be a nonempty square matrix");
  if (n > 24) throw ValidationError("support enumeration limited to 24 multipliers");

  SphereMinimum best{std::numeric_limits<double>::infinity(), Vector::Zero(n)};
  std::vector<Eigen::Index> support;
  Vector values;
  Matrix vectors;
  const std::uint64_t subsets = std::uint64_t{1} << n;
  for (std::uint64_t mask = 1; mask < subsets; ++mask) {
    support.clear();
    for (Eigen::Index i = 0; i < n; ++i) {
      if (mask & (std::uint64_t{1} << i)) support.push_back(i);
    }
    const auto k = static_cast<Eigen::Index>(support.size());
    Matrix sub(k, k);
    for (Eigen::Index a = 0; a < k; ++a) {
      for (Eigen::Index b = 0; b < k; ++b) {
        sub(a, b) = psi(support[static_cast<std::size_t>(a)], support[static_cast<std::size_t>(b)]);
      }
    }
    jacobi_eigen(sub, values, vectors);
    Vector v = vectors.col(0);
    if (v.sum() < 0.0) v = -v;
    if (v.minCoeff() < -1e-10) continue;
    v = v.cwiseMax(0.0);
    v.normalize();
    Vector full = Vector::Zero(n);
    for (Eigen::Index a = 0; a < k; ++a) full[support[static_cast<std::size_t>(a)]] = v[a];
    const double value = full.dot(psi * full);
    if (value < best.value) {
      best.value = value;
      best.argmin = full;
    }
  }
  best.value = std::max(0.0, best.value);
  return best;
}

Vector nonnegative_least_squares(const Matrix& A, const Vector& b) {
  const Eigen::Index n = A.cols();
  Vector x = Vector::Zero(n);
  std::vector<bool> passive(static_cast<std::size_t>(n), false);
  const double tol = 1e-12 * std::max(1.0, A.cwiseAbs().maxCoeff()) * std::max<Eigen::Index>(1, n);

  auto solve_passive = [&](Vector& z) {
    std::vector<Eigen::Index> idx;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (passive[static_cast<std::size_t>(i)]) idx.push_back(i);
    }
    z = Vector::Zero(n);
    if (idx.empty()) return;
    Matrix sub(A.rows(), static_cast<Eigen::Index>(idx.size()));
    for (std::size_t a = 0; a < idx.size(); ++a) sub.col(static_cast<Eigen::Index>(a)) = A.col(idx[a]);
    const Vector s = sub.completeOrthogonalDecomposition().solve(b);
    for (std::size_t a = 0; a < idx.size(); ++a) z[idx[a]] = s[static_cast<Eigen::Index>(a)];
  };

  const int cap = static_cast<int>(30 * n + 30);
  for (int outer = 0; outer < cap; ++outer) {
    const Vector w = A.transpose() * (b - A * x);
    Eigen::Index enter = -1;
    double best = tol;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (!passive[static_cast<std::size_t>(i)] && w[i] > best) {
        best = w[i];
        enter = i;
      }
    }
    if (enter < 0) return x;
    passive[static_cast<std::size_t>(enter)] = true;

    for (int inner = 0; inner < cap; ++inner) {
      Vector z;
      solve_passive(z);
      bool positive = true;
      for (Eigen::Index i = 0; i < n; ++i) {
        if (passive[static_cast<std::size_t>(i)] && z[i] <= 0.0) positive = false;
      }
      if (positive) {
        x = z;
        break;
      }
      double alpha = 1.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        if (passive[static_cast<std::size_t>(i)] && z[i] <= 0.0) {
          alpha = std::min(alpha, x[i] / (x[i] - z[i]));
        }
      }
      x += alpha * (z - x);
      for (Eigen::Index i = 0; i < n; ++i) {
        if (passive[static_cast<std::size_t>(i)] && x[i] <= 1e-15) {
          passive[static_cast<std::size_t>(i)] = false;
          x[i] = 0.0;
        }
      }
    }
  }
  throw SolverError("nonnegative least squares exceeded its iteration cap");
}

FjCertificate fj_error(const FjSystem& system, FjNormalization mode, const std::vector<bool>& free_mask) {
  const auto total = static_cast<Eigen::Index>(system.multipliers());
  FjCertificate cert;
  cert.normalization = mode;

  if (mode == FjNormalization::unit_sphere) {
    const SphereMinimum s = min_nonnegative_rayleigh(system.form());
    cert.error = s.value;
    cert.multipliers = s.argmin;
    return cert;
  }

  if (free_mask.size() != system.multipliers()) {
    throw ValidationError("activity mask length does not match the multiplier count");
  }
  std::vector<Eigen::Index> free_idx;
  for (Eigen::Index c = 1; c < total; ++c) {
    if (free_mask[static_cast<std::size_t>(c)]) free_idx.push_back(c);
  }
  const Eigen::Index n = system.gradients.rows();
  const auto f = static_cast<Eigen::Index>(free_idx.size());
  const Vector base = system.gradients.col(0);

  cert.multipliers = Vector::Zero(total);
  cert.multipliers[0] = 1.0;
  if (f == 0) {
    cert.error = base.squaredNorm();
    return cert;
  }

  Matrix A = Matrix::Zero(n + f, f);
  Vector b = Vector::Zero(n + f);
  b.head(n) = -base;
  for (Eigen::Index a = 0; a < f; ++a) {
    const Eigen::Index c = free_idx[static_cast<std::size_t>(a)];
    A.block(0, a, n, 1) = system.gradients.col(c);
    A(n + a, a) = system.slacks[c];
  }
  const Vector mu = nonnegative_least_squares(A, b);
  for (Eigen::Index a = 0; a < f; ++a) cert.multipliers[free_idx[static_cast<std::size_t>(a)]] = mu[a];
  cert.error = (A * mu - b).squaredNorm();
  return cert;
}

FjCertificate fj_error(const Vector& u, const ProblemSpec& spec, const Measurement& m, FjNormalization mode,
                       const std::optional<ActivityThresholds>& thresholds) {
  const NumericalValues num = evaluate_numerical(spec, u);
  const FjSystem sys = build_fj_system(u, spec.box, m.grad_phi, m.g_p, m.grad_g_p, num.values, num.gradients);
  const ActivityThresholds th = thresholds ? *thresholds : ActivityThresholds::exact(spec.n_gp(), spec.n_g());

  ActiveSets active;
  std::vector<bool> mask(sys.multipliers(), false);
  std::size_t c = 1;
  for (std::size_t j = 0; j < spec.n_gp(); ++j, ++c) {
    const auto ij = static_cast<Eigen::Index>(j);
    if (m.g_p[ij] >= -th.eps_p[ij]) {
      mask[c] = true;
      active.g_p.push_back(j);
    }
  }
  for (std::size_t j = 0; j < spec.n_g(); ++j, ++c) {
    const auto ij = static_cast<Eigen::Index>(j);
    if (num.values[ij] >= -th.eps[ij]) {
      mask[c] = true;
      active.g.push_back(j);
    }
  }
  for (std::size_t i = 0; i < spec.n_u(); ++i, ++c) {
    const auto ii = static_cast<Eigen::Index>(i);
    if (u[ii] - spec.box.lower()[ii] <= th.bound_tol) {
      mask[c] = true;
      active.lower.push_back(i);
    }
  }
  for (std::size_t i = 0; i < spec.n_u(); ++i, ++c) {
    const auto ii = static_cast<Eigen::Index>(i);
    if (spec.box.upper()[ii] - u[ii] <= th.bound_tol) {
      mask[c] = true;
      active.upper.push_back(i);
    }
  }

  FjCertificate cert = fj_error(sys, mode, mask);
  cert.point = u;
  cert.active_sets = std::move(active);
  return cert;
}

}  // namespace scfo
