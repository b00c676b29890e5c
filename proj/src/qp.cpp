#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "scfo/errors.hpp"
#include "scfo/qp.hpp"

namespace scfo {

namespace {

/// All constraints of the projection as C u <= d with unit-norm rows:
/// halfspaces first, then upper bounds, then lower bounds.
struct StackedConstraints {
  Matrix C;
  Vector d;
  Vector row_scale;  // original norms of the halfspace rows
  Eigen::Index m = 0;
  Eigen::Index n = 0;

  explicit StackedConstraints(const HalfspaceSet& hs) : m(hs.rows()), n(hs.dim()) {
    C = Matrix::Zero(m + 2 * n, n);
    d = Vector::Zero(m + 2 * n);
    row_scale = Vector::Ones(m);
    for (Eigen::Index i = 0; i < m; ++i) {
      const double norm = hs.normals().row(i).norm();
      row_scale[i] = norm;
      C.row(i) = hs.normals().row(i) / norm;
      d[i] = (hs.offsets()[i] + hs.normals().row(i).dot(hs.anchor())) / norm;
    }
    for (Eigen::Index j = 0; j < n; ++j) {
      C(m + j, j) = 1.0;
      d[m + j] = hs.box().upper()[j];
      C(m + n + j, j) = -1.0;
      d[m + n + j] = -hs.box().lower()[j];
    }
  }

  bool is_upper(Eigen::Index i) const { return i >= m && i < m + n; }
  bool is_lower(Eigen::Index i) const { return i >= m + n; }
};

/// Pins coordinates whose bound constraint is in the working set.
void snap_to_bounds(Vector& x, const std::vector<Eigen::Index>& working, const StackedConstraints& sc,
                    const Box& box) {
  for (Eigen::Index i : working) {
    if (sc.is_upper(i)) x[i - sc.m] = box.upper()[i - sc.m];
    if (sc.is_lower(i)) x[i - sc.m - sc.n] = box.lower()[i - sc.m - sc.n];
  }
}

ProjectionResult box_only_result(const Vector& target, const HalfspaceSet& hs) {
  ProjectionResult r;
  r.point = hs.box().clamp(target);
  r.row_multipliers = Vector::Zero(hs.rows());
  r.upper_multipliers = (target - hs.box().upper()).cwiseMax(0.0);
  r.lower_multipliers = (hs.box().lower() - target).cwiseMax(0.0);
  return r;
}

}  // namespace

ProjectionResult qp_project_detailed(const Vector& target, const HalfspaceSet& hs,
                                     const std::optional<FeasibilityWitness>& witness) {
  if (target.size() != hs.dim() || !target.array().isFinite().all()) {
    throw ValidationError("projection target must be a finite vector of the problem dimension");
  }

  // The box projection is optimal whenever it already satisfies every row.
  {
    const Vector clamped = hs.box().clamp(target);
    if (hs.rows() == 0 || hs.max_violation(clamped) <= 0.0) return box_only_result(target, hs);
  }

  const FeasibilityWitness start = witness ? *witness : lp_feasible(hs);
  if (!start.feasible) {
    throw ValidationError("projection set is empty (phase-1 infeasibility " +
                          std::to_string(start.infeasibility) + ")");
  }

  const StackedConstraints sc(hs);
  const Eigen::Index total = sc.C.rows();
  const Eigen::Index n = sc.n;
  Vector x = start.point;
  std::vector<Eigen::Index> working;
  std::vector<bool> in_working(static_cast<std::size_t>(total), false);
  Vector lambda;

  const int cap = static_cast<int>(100 * (total + n) + 100);
  int iter = 0;
  for (;; ++iter) {
    if (iter > cap) {
      throw SolverError("active-set projection exceeded its iteration cap (" + std::to_string(cap) + ")");
    }
    const Vector r = target - x;
    Vector p = r;
    const auto k = static_cast<Eigen::Index>(working.size());
    lambda.resize(k);
    if (k > 0) {
      Matrix cw(k, n);
      for (Eigen::Index a = 0; a < k; ++a) cw.row(a) = sc.C.row(working[static_cast<std::size_t>(a)]);
      // Step direction: r projected onto the null space of the working rows.
      Eigen::JacobiSVD<Matrix> svd(cw, Eigen::ComputeFullV);
      svd.setThreshold(1e-10);
      const auto rank = svd.rank();
      const Matrix z = svd.matrixV().rightCols(n - rank);
      p = z * (z.transpose() * r);
      lambda = cw.transpose().completeOrthogonalDecomposition().solve(r - p);
    }

    if (p.lpNorm<Eigen::Infinity>() <= 1e-13 * (1.0 + r.lpNorm<Eigen::Infinity>())) {
      if (k == 0) break;
      Eigen::Index worst = 0;
      lambda.minCoeff(&worst);
      if (lambda[worst] >= -1e-12) break;
      in_working[static_cast<std::size_t>(working[static_cast<std::size_t>(worst)])] = false;
      working.erase(working.begin() + worst);
      continue;
    }

    double alpha = 1.0;
    Eigen::Index block = -1;
    const double pnorm = p.norm();
    for (Eigen::Index i = 0; i < total; ++i) {
      if (in_working[static_cast<std::size_t>(i)]) continue;
      const double s = sc.C.row(i).dot(p);
      if (s <= 1e-12 * pnorm) continue;
      const double slack = std::max(0.0, sc.d[i] - sc.C.row(i).dot(x));
      const double a = slack / s;
      if (a < alpha) {
        alpha = a;
        block = i;
      }
    }
    x += alpha * p;
    if (block >= 0) {
      working.push_back(block);
      in_working[static_cast<std::size_t>(block)] = true;
    }
    snap_to_bounds(x, working, sc, hs.box());
  }

  ProjectionResult out;
  out.point = hs.box().clamp(x);
  out.iterations = iter;
  out.row_multipliers = Vector::Zero(sc.m);
  out.upper_multipliers = Vector::Zero(n);
  out.lower_multipliers = Vector::Zero(n);
  for (std::size_t a = 0; a < working.size(); ++a) {
    const Eigen::Index i = working[a];
    const double value = std::max(0.0, lambda[static_cast<Eigen::Index>(a)]);
    if (i < sc.m) {
      out.row_multipliers[i] = value / sc.row_scale[i];
    } else if (sc.is_upper(i)) {
      out.upper_multipliers[i - sc.m] = value;
    } else {
      out.lower_multipliers[i - sc.m - n] = value;
    }
  }
  return out;
}

double KktResiduals::max() const { return std::max({stationarity, primal, dual, complementarity}); }

KktResiduals kkt_residuals(const Vector& target, const HalfspaceSet& hs, const ProjectionResult& res) {
  KktResiduals k;
  const Vector& u = res.point;
  Vector grad = u - target + res.upper_multipliers - res.lower_multipliers;
  if (hs.rows() > 0) grad += hs.normals().transpose() * res.row_multipliers;
  k.stationarity = grad.lpNorm<Eigen::Infinity>();

  const Vector upper_gap = u - hs.box().upper();
  const Vector lower_gap = hs.box().lower() - u;
  k.primal = std::max({0.0, upper_gap.maxCoeff(), lower_gap.maxCoeff()});
  if (hs.rows() > 0) k.primal = std::max(k.primal, hs.max_violation(u));

  k.dual = std::max({0.0, -res.upper_multipliers.minCoeff(), -res.lower_multipliers.minCoeff()});
  if (hs.rows() > 0) k.dual = std::max(k.dual, -res.row_multipliers.minCoeff());

  k.complementarity = std::max((res.upper_multipliers.array() * upper_gap.array()).abs().maxCoeff(),
                               (res.lower_multipliers.array() * lower_gap.array()).abs().maxCoeff());
  if (hs.rows() > 0) {
    const Vector row_gap = hs.normals() * (u - hs.anchor()) - hs.offsets();
    k.complementarity =
        std::max(k.complementarity, (res.row_multipliers.array() * row_gap.array()).abs().maxCoeff());
  }
  return k;
}

}  // namespace scfo
