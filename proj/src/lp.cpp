#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "scfo/errors.hpp"
#include "scfo/qp.hpp"

namespace scfo {

HalfspaceSet::HalfspaceSet(Matrix normals, Vector offsets, Vector anchor, Box box)
    : normals_(std::move(normals)), offsets_(std::move(offsets)), anchor_(std::move(anchor)), box_(std::move(box)) {
  if (anchor_.size() != static_cast<Eigen::Index>(box_.size())) {
    throw ValidationError("halfspace anchor dimension does not match the box");
  }
  if (normals_.rows() == 0) normals_.resize(0, anchor_.size());
  if (normals_.cols() != anchor_.size() || offsets_.size() != normals_.rows()) {
    throw ValidationError("halfspace normals/offsets have inconsistent shapes");
  }
  if (!normals_.array().isFinite().all() || !offsets_.array().isFinite().all()) {
    throw ValidationError("halfspace data must be finite");
  }
  for (Eigen::Index i = 0; i < normals_.rows(); ++i) {
    if (normals_.row(i).norm() == 0.0) {
      throw ValidationError("halfspace row " + std::to_string(i) + " has a zero normal");
    }
  }
}

double HalfspaceSet::max_violation(const Vector& u) const {
  if (normals_.rows() == 0) return -std::numeric_limits<double>::infinity();
  return (normals_ * (u - anchor_) - offsets_).maxCoeff();
}

namespace {

constexpr double kPivotTol = 1e-12;
constexpr double kCostTol = 1e-12;

/// Dense phase-1 tableau over the shifted variables x = u - u^L, 0 <= x <= r.
class PhaseOneTableau {
 public:
  explicit PhaseOneTableau(const HalfspaceSet& hs) {
    const Eigen::Index n = hs.dim();
    const Eigen::Index m = hs.rows();
    const Vector shift = hs.anchor() - hs.box().lower();
    const Vector range = hs.box().range();

    rows_ = m + n;
    std::vector<double> rhs(static_cast<std::size_t>(rows_));
    std::vector<bool> flipped(static_cast<std::size_t>(rows_), false);
    Eigen::Index artificials = 0;
    for (Eigen::Index i = 0; i < m; ++i) {
      const double norm = hs.normals().row(i).norm();
      const double c = (hs.offsets()[i] + hs.normals().row(i).dot(shift)) / norm;
      rhs[static_cast<std::size_t>(i)] = c;
      if (c < 0.0) {
        flipped[static_cast<std::size_t>(i)] = true;
        ++artificials;
      }
    }
    for (Eigen::Index j = 0; j < n; ++j) rhs[static_cast<std::size_t>(m + j)] = range[j];

    n_ = n;
    cols_ = n + rows_ + artificials;
    t_ = Matrix::Zero(rows_ + 1, cols_ + 1);
    basis_.assign(static_cast<std::size_t>(rows_), 0);

    Eigen::Index art = n + rows_;
    for (Eigen::Index i = 0; i < rows_; ++i) {
      const bool flip = flipped[static_cast<std::size_t>(i)];
      const double sign = flip ? -1.0 : 1.0;
      if (i < m) {
        t_.row(i).head(n) = sign * hs.normals().row(i) / hs.normals().row(i).norm();
      } else {
        t_(i, i - m) = 1.0;
      }
      t_(i, n + i) = sign;
      t_(i, cols_) = sign * rhs[static_cast<std::size_t>(i)];
      if (flip) {
        t_(i, art) = 1.0;
        basis_[static_cast<std::size_t>(i)] = art++;
      } else {
        basis_[static_cast<std::size_t>(i)] = n + i;
      }
    }
    // Objective row: sum of artificials expressed in the nonbasic columns.
    for (Eigen::Index i = 0; i < rows_; ++i) {
      if (basis_[static_cast<std::size_t>(i)] >= n + rows_) t_.row(rows_) -= t_.row(i);
    }
    for (Eigen::Index i = 0; i < rows_; ++i) t_(rows_, basis_[static_cast<std::size_t>(i)]) = 0.0;
  }

  /// Runs Bland's rule to optimality; returns the pivot count.
  int solve() {
    const int guard = static_cast<int>(50 * (rows_ + cols_) + 1000);
    int pivots = 0;
    while (true) {
      Eigen::Index enter = -1;
      for (Eigen::Index j = 0; j < cols_; ++j) {
        if (t_(rows_, j) < -kCostTol) {
          enter = j;
          break;
        }
      }
      if (enter < 0) return pivots;

      Eigen::Index leave = -1;
      double best = std::numeric_limits<double>::infinity();
      for (Eigen::Index i = 0; i < rows_; ++i) {
        const double a = t_(i, enter);
        if (a <= kPivotTol) continue;
        const double ratio = t_(i, cols_) / a;
        if (leave < 0 || ratio < best - 1e-15) {
          best = ratio;
          leave = i;
        } else if (ratio <= best + 1e-15 &&
                   basis_[static_cast<std::size_t>(i)] < basis_[static_cast<std::size_t>(leave)]) {
          best = std::min(best, ratio);
          leave = i;
        }
      }
      // Phase 1 is bounded below by zero, so a ray cannot occur.
      if (leave < 0) throw SolverError("phase-1 simplex found an unbounded ray");
      pivot(leave, enter);
      if (++pivots > guard) {
        throw SolverError("phase-1 simplex exceeded its pivot guard (" + std::to_string(guard) + ")");
      }
    }
  }

  double objective() const { return std::max(0.0, -t_(rows_, cols_)); }

  Vector shifted_point() const {
    Vector x = Vector::Zero(n_);
    for (Eigen::Index i = 0; i < rows_; ++i) {
      const Eigen::Index b = basis_[static_cast<std::size_t>(i)];
      if (b < n_) x[b] = t_(i, cols_);
    }
    return x;
  }

 private:
  void pivot(Eigen::Index r, Eigen::Index c) {
    t_.row(r) /= t_(r, c);
    for (Eigen::Index i = 0; i <= rows_; ++i) {
      if (i == r) continue;
      const double f = t_(i, c);
      if (f != 0.0) t_.row(i) -= f * t_.row(r);
    }
    basis_[static_cast<std::size_t>(r)] = c;
  }

  Eigen::Index n_ = 0;
  Eigen::Index rows_ = 0;
  Eigen::Index cols_ = 0;
  Matrix t_;
  std::vector<Eigen::Index> basis_;
};

}  // namespace

FeasibilityWitness lp_feasible(const HalfspaceSet& hs) {
  FeasibilityWitness w;
  if (hs.rows() == 0) {
    w.feasible = true;
    w.point = hs.box().center();
    return w;
  }
  PhaseOneTableau tableau(hs);
  w.pivots = tableau.solve();
  w.infeasibility = tableau.objective();
  w.feasible = w.infeasibility <= kLpFeasibilityTol;
  if (w.feasible) {
    w.point = hs.box().clamp(hs.box().lower() + tableau.shifted_point());
  }
  return w;
}

}  // namespace scfo
