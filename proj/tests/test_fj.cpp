#include "doctest.h"

#include <random>

#include "oracles.hpp"
#include "scfo/bench.hpp"
#include "scfo/errors.hpp"
#include "scfo/fj.hpp"

using namespace scfo;

namespace {

Matrix random_psd(std::mt19937_64& rng, Eigen::Index n, Eigen::Index rank) {
  std::normal_distribution<double> g;
  Matrix b(rank, n);
  for (Eigen::Index i = 0; i < rank; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) b(i, j) = g(rng);
  }
  return b.transpose() * b;
}

// Residual-free system: support columns combine to zero with positive weights
// (cost weight 1), off-support columns carry nonzero slacks.
FjSystem constructed_fj_point(std::mt19937_64& rng, Eigen::Index n, Eigen::Index total, std::vector<bool>& mask) {
  std::normal_distribution<double> g;
  std::uniform_real_distribution<double> w(0.2, 2.0), s(0.1, 1.0);
  FjSystem sys;
  sys.gradients = Matrix(n, total);
  sys.slacks = Vector(total);
  mask.assign(static_cast<std::size_t>(total), false);
  const Eigen::Index support = 2 + static_cast<Eigen::Index>(rng() % static_cast<std::uint64_t>(total - 1));
  Vector sum = Vector::Zero(n);
  for (Eigen::Index c = 0; c < total; ++c) {
    for (Eigen::Index i = 0; i < n; ++i) sys.gradients(i, c) = g(rng);
    const bool in = c < support;
    sys.slacks[c] = in ? 0.0 : -s(rng);
    mask[static_cast<std::size_t>(c)] = in;
    if (in && c + 1 < support) sum += (c == 0 ? 1.0 : w(rng)) * sys.gradients.col(c);
  }
  const double last = w(rng);
  sys.gradients.col(support - 1) = -sum / last;
  return sys;
}

}  // namespace

TEST_CASE("normalization names round trip") {
  CHECK(parse_fj_normalization("sphere") == FjNormalization::unit_sphere);
  CHECK(parse_fj_normalization("fixed") == FjNormalization::fixed_cost_multiplier);
  CHECK(parse_fj_normalization(to_string(FjNormalization::unit_sphere)) == FjNormalization::unit_sphere);
  CHECK(parse_fj_normalization(to_string(FjNormalization::fixed_cost_multiplier)) ==
        FjNormalization::fixed_cost_multiplier);
  CHECK_THROWS_AS(parse_fj_normalization("l1"), ValidationError);
}

TEST_CASE("jacobi eigen agrees with Eigen's solver") {
  std::mt19937_64 rng(3);
  for (int t = 0; t < 50; ++t) {
    const Eigen::Index n = 1 + t % 8;
    const Matrix a = random_psd(rng, n, n) - Matrix::Identity(n, n);
    Vector vals;
    Matrix vecs;
    jacobi_eigen(a, vals, vecs);
    Eigen::SelfAdjointEigenSolver<Matrix> es(a);
    CHECK((vals - es.eigenvalues()).cwiseAbs().maxCoeff() <= 1e-10);
    CHECK((a * vecs - vecs * vals.asDiagonal()).cwiseAbs().maxCoeff() <= 1e-10);
    CHECK((vecs.transpose() * vecs - Matrix::Identity(n, n)).cwiseAbs().maxCoeff() <= 1e-10);
    for (Eigen::Index i = 1; i < n; ++i) CHECK(vals[i - 1] <= vals[i]);
  }
}

TEST_CASE("sphere minimum matches support brute force") {
  std::mt19937_64 rng(17);
  for (int t = 0; t < 100; ++t) {
    const Eigen::Index n = 1 + t % 8;
    const Matrix psi = random_psd(rng, n, 1 + t % 3);
    const SphereMinimum s = min_nonnegative_rayleigh(psi);
    CHECK(std::abs(s.value - oracle::brute_force_sphere(psi)) <= 1e-9);
    CHECK(s.argmin.minCoeff() >= 0.0);
    CHECK(s.argmin.norm() == doctest::Approx(1.0));
    CHECK(s.argmin.dot(psi * s.argmin) == doctest::Approx(s.value).epsilon(1e-9).scale(1.0));
  }
  CHECK_THROWS_AS(min_nonnegative_rayleigh(Matrix::Identity(25, 25)), ValidationError);
}

TEST_CASE("nnls matches support enumeration") {
  std::mt19937_64 rng(23);
  std::normal_distribution<double> g;
  for (int t = 0; t < 100; ++t) {
    const Eigen::Index rows = 2 + t % 5, cols = 1 + t % 6;
    Matrix a(rows, cols);
    Vector b(rows);
    for (Eigen::Index i = 0; i < rows; ++i) {
      b[i] = g(rng);
      for (Eigen::Index j = 0; j < cols; ++j) a(i, j) = g(rng);
    }
    double best = b.squaredNorm();
    for (std::uint64_t mask = 1; mask < (std::uint64_t{1} << cols); ++mask) {
      std::vector<Eigen::Index> s;
      for (Eigen::Index j = 0; j < cols; ++j) {
        if (mask & (std::uint64_t{1} << j)) s.push_back(j);
      }
      Matrix sub(rows, static_cast<Eigen::Index>(s.size()));
      for (std::size_t k = 0; k < s.size(); ++k) sub.col(static_cast<Eigen::Index>(k)) = a.col(s[k]);
      const Vector x = sub.colPivHouseholderQr().solve(b);
      if (x.size() > 0 && x.minCoeff() < 0) continue;
      best = std::min(best, (sub * x - b).squaredNorm());
    }
    const Vector x = nonnegative_least_squares(a, b);
    CHECK(x.minCoeff() >= 0.0);
    CHECK((a * x - b).squaredNorm() == doctest::Approx(best).epsilon(1e-9).scale(1.0));
  }
}

TEST_CASE("constructed FJ points have zero error in both modes") {
  std::mt19937_64 rng(29);
  for (int t = 0; t < 20; ++t) {
    std::vector<bool> mask;
    const FjSystem sys = constructed_fj_point(rng, 2 + t % 3, 4 + t % 4, mask);
    CHECK(fj_error(sys, FjNormalization::unit_sphere, mask).error <= 1e-8);
    CHECK(fj_error(sys, FjNormalization::fixed_cost_multiplier, mask).error <= 1e-8);
  }
}

TEST_CASE("rosenbrock at the origin") {
  const ProblemSpec spec = builtin("rosenbrock");
  const Vector u = Vector::Zero(2);
  const Measurement m = spec.oracle->measure(u);
  const FjCertificate fixed = fj_error(u, spec, m, FjNormalization::fixed_cost_multiplier);
  CHECK(std::abs(fixed.error - 4.0) <= 1e-9);
  REQUIRE(fixed.active_sets.lower.size() == 2);

  const FjCertificate sphere = fj_error(u, spec, m, FjNormalization::unit_sphere);
  CHECK(sphere.error == doctest::Approx((3.0 - std::sqrt(5.0)) / 2.0).epsilon(1e-10));
  CHECK(std::abs(sphere.error - oracle::brute_force_sphere(build_fj_system(u, spec.box, m.grad_phi, m.g_p, m.grad_g_p,
                                                                           Vector(0), Matrix(0, 2))
                                                               .form())) <= 1e-12);
}

TEST_CASE("thresholds widen the free multiplier set") {
  const ProblemSpec spec = builtin("constrained_quadratic");
  Vector u(2);
  u << 0.3, 0.3;
  const Measurement m = spec.oracle->measure(u);
  const FjCertificate exact = fj_error(u, spec, m, FjNormalization::fixed_cost_multiplier);
  CHECK(exact.active_sets.g_p.empty());
  CHECK(exact.error == doctest::Approx(m.grad_phi.squaredNorm()));
  ActivityThresholds wide{Vector::Constant(2, 100.0), Vector::Constant(1, 100.0), 1e-12};
  const FjCertificate loose = fj_error(u, spec, m, FjNormalization::fixed_cost_multiplier, wide);
  CHECK(loose.active_sets.g_p.size() == 2);
  CHECK(loose.error <= exact.error);
}

TEST_CASE("sphere error scales quadratically with the gradients") {
  std::mt19937_64 rng(37);
  std::normal_distribution<double> g;
  for (int t = 0; t < 50; ++t) {
    FjSystem sys;
    sys.gradients = Matrix(2, 5);
    sys.slacks = Vector::Zero(5);
    for (Eigen::Index c = 0; c < 5; ++c) {
      for (Eigen::Index i = 0; i < 2; ++i) sys.gradients(i, c) = g(rng);
    }
    const double e = fj_error(sys, FjNormalization::unit_sphere, {}).error;
    FjSystem scaled = sys;
    scaled.gradients *= 3.0;
    const double e3 = fj_error(scaled, FjNormalization::unit_sphere, {}).error;
    if (e > 1e-8) CHECK(e3 / e == doctest::Approx(9.0).epsilon(1e-8));
  }
}

TEST_CASE("fixed mode pins the cost multiplier and inactive multipliers") {
  std::mt19937_64 rng(43);
  std::normal_distribution<double> g;
  for (int t = 0; t < 50; ++t) {
    FjSystem sys;
    sys.gradients = Matrix(2, 6);
    sys.slacks = Vector(6);
    std::vector<bool> mask(6);
    for (Eigen::Index c = 0; c < 6; ++c) {
      for (Eigen::Index i = 0; i < 2; ++i) sys.gradients(i, c) = g(rng);
      mask[static_cast<std::size_t>(c)] = (rng() % 2) == 0;
      sys.slacks[c] = (c == 0 || mask[static_cast<std::size_t>(c)]) ? 0.0 : -0.5;
    }
    const FjCertificate cert = fj_error(sys, FjNormalization::fixed_cost_multiplier, mask);
    CHECK(cert.multipliers[0] == 1.0);
    for (std::size_t c = 1; c < 6; ++c) {
      CHECK(cert.multipliers[static_cast<Eigen::Index>(c)] >= 0.0);
      if (!mask[c]) CHECK(cert.multipliers[static_cast<Eigen::Index>(c)] == 0.0);
    }
    CHECK(cert.error == doctest::Approx(cert.multipliers.dot(sys.form() * cert.multipliers)).epsilon(1e-10).scale(1.0));
  }
}
