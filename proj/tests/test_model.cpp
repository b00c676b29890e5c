#include "doctest.h"

#include "scfo/bench.hpp"
#include "scfo/errors.hpp"
#include "scfo/model.hpp"

using namespace scfo;

namespace {

Vector v2(double a, double b) {
  Vector v(2);
  v << a, b;
  return v;
}

Matrix m2(double a, double b, double c, double d) {
  Matrix m(2, 2);
  m << a, b, c, d;
  return m;
}

}  // namespace

TEST_CASE("box rejects empty, mismatched, non-finite and degenerate bounds") {
  CHECK_THROWS_AS(Box(Vector(0), Vector(0)), ValidationError);
  CHECK_THROWS_AS(Box(v2(0, 0), Vector::Zero(3)), ValidationError);
  CHECK_THROWS_AS(Box(v2(0, 0), v2(1, 0)), ValidationError);
  CHECK_THROWS_AS(Box(v2(0, 0), v2(1, std::numeric_limits<double>::infinity())), ValidationError);
  const Box b(v2(-1, 0), v2(1, 2));
  CHECK(b.range().isApprox(v2(2, 2)));
  CHECK(b.center().isApprox(v2(0, 1)));
  CHECK(b.contains(v2(1, 0)));
  CHECK_FALSE(b.contains(v2(1.0000001, 0)));
  CHECK(b.clamp(v2(3, -1)).isApprox(v2(1, 0)));
}

TEST_CASE("lipschitz data validation") {
  const Matrix kp = m2(1, 1, 1, 1);
  const Matrix k0(0, 2);
  const std::vector<Matrix> mgp{m2(1, 0.5, 0.5, 1), m2(1, 0.5, 0.5, 1)};
  const Vector gamma = Vector::Constant(2, 0.9);
  CHECK_NOTHROW(LipschitzData(kp, k0, m2(1, 0.5, 0.5, 1), {}, mgp, gamma, 0.5));
  CHECK_THROWS_AS(LipschitzData(m2(1, 0, 1, 1), k0, m2(1, 0.5, 0.5, 1), {}, mgp, gamma, 0.5), ValidationError);
  CHECK_THROWS_AS(LipschitzData(kp, k0, m2(1, 0, 0, 1), {}, mgp, gamma, 0.5), ValidationError);
  CHECK_THROWS_AS(LipschitzData(kp, k0, m2(1, 0.5, 0.5, 1), {}, mgp, Vector::Constant(2, 1.0), 0.5), ValidationError);
  CHECK_THROWS_AS(LipschitzData(kp, k0, m2(1, 0.5, 0.5, 1), {}, mgp, Vector::Constant(2, 0.0), 0.5), ValidationError);
  CHECK_THROWS_AS(LipschitzData(kp, k0, m2(1, 0.5, 0.5, 1), {}, mgp, gamma, 1.0), ValidationError);
  CHECK_NOTHROW(LipschitzData(kp, k0, m2(1, 0.5, 0.5, 1), {}, mgp, gamma, 0.0));
  CHECK_THROWS_AS(LipschitzData(kp, k0, m2(1, 0.5, 0.5, 1), {}, {mgp[0]}, gamma, 0.5), ValidationError);
}

TEST_CASE("M matrices are symmetrized") {
  const LipschitzData lip(Matrix(0, 2), Matrix(0, 2), m2(2, 1, 3, 2), {}, {}, Vector(0), 0.5);
  CHECK(lip.m_phi().isApprox(m2(2, 2, 2, 2)));
  const LipschitzData s = lip.scaled(0.5);
  CHECK(s.m_phi().isApprox(m2(1, 1, 1, 1)));
  CHECK(s.gamma_phi() == 0.5);
}

TEST_CASE("target rules") {
  const Box b(v2(0, 0), v2(2, 4));
  CHECK(TargetRule::box_center().next(7, b).isApprox(v2(1, 2)));
  CHECK(TargetRule::fixed(v2(5, 5)).next(3, b).isApprox(v2(5, 5)));
  const auto seq = TargetRule::sequence({v2(1, 1), v2(2, 2)});
  CHECK(seq.next(0, b).isApprox(v2(1, 1)));
  CHECK(seq.next(1, b).isApprox(v2(2, 2)));
  CHECK(seq.next(40, b).isApprox(v2(2, 2)));
  CHECK_THROWS_AS(TargetRule::sequence({}), ValidationError);
}

TEST_CASE("initial point validation") {
  ProblemSpec spec = builtin("constrained_quadratic");
  CHECK(validate_initial_point(spec, spec.oracle->measure(spec.u0)).ok);

  // Inside the excluded disc around (0, 0.15).
  spec.u0 = v2(0.0, 0.15);
  auto r = validate_initial_point(spec, spec.oracle->measure(spec.u0));
  CHECK_FALSE(r.ok);
  CHECK(r.summary().find("g[0]") != std::string::npos);

  spec.u0 = v2(0.6, 0.2);
  CHECK_FALSE(validate_initial_point(spec, spec.oracle->measure(spec.u0)).ok);
}

TEST_CASE("consistency checks") {
  ProblemSpec spec = builtin("constrained_quadratic");
  CHECK_NOTHROW(spec.check_consistency());
  ProblemSpec bad = spec;
  bad.u0 = Vector::Zero(3);
  CHECK_THROWS_AS(bad.check_consistency(), ValidationError);
  bad = spec;
  bad.numerical_constraints.clear();
  CHECK_THROWS_AS(bad.check_consistency(), ValidationError);
  bad = spec;
  bad.ceilings->eps_p = Vector::Ones(3);
  CHECK_THROWS_AS(bad.check_consistency(), ValidationError);
  bad = spec;
  bad.target = TargetRule::fixed(Vector::Zero(3));
  CHECK_THROWS_AS(bad.check_consistency(), ValidationError);
}

TEST_CASE("numerical constraints evaluate with gradients") {
  const ProblemSpec spec = builtin("constrained_quadratic");
  const NumericalValues nv = evaluate_numerical(spec, v2(0.1, 0.25));
  CHECK(nv.values[0] == doctest::Approx(-0.01 - 0.01 + 0.01));
  CHECK(nv.gradients(0, 0) == doctest::Approx(-0.2));
  CHECK(nv.gradients(0, 1) == doctest::Approx(-0.2));

  ProblemSpec broken = spec;
  broken.numerical_constraints[0].value = [](const Vector&) { return std::nan(""); };
  CHECK_THROWS_AS(evaluate_numerical(broken, v2(0, 0)), ValidationError);
}
