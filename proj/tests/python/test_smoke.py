import math

import numpy as np
import pytest

import scfo


def test_builtins():
    assert scfo.builtin_names() == ["constrained_quadratic", "rosenbrock"]
    p = scfo.builtin("constrained_quadratic")
    assert (p.n_u, p.n_gp, p.n_g) == (2, 2, 1)
    np.testing.assert_allclose(p.u0, [-0.45, 0.05])
    m = p.measure(p.u0)
    assert m["phi"] == pytest.approx(0.95**2 + 0.35**2)
    assert np.all(m["g_p"] < 0) and np.all(m["g"] <= 0)
    with pytest.raises(scfo.ValidationError):
        scfo.builtin("nope")


def test_growth_and_floor():
    assert scfo.linear_growth([1.0, 2.0], [0.0, 0.0], [1.0, -1.0]) == pytest.approx(3.0)
    assert scfo.quadratic_growth(np.array([[2.0, 1.0], [1.0, 2.0]]), [0, 0], [1, -1]) == pytest.approx(3.0)
    ros = scfo.builtin("rosenbrock")
    assert scfo.worst_case_growth(ros)["Q_phi"] == pytest.approx(2800)
    assert scfo.filter_gain_floor(ros) == pytest.approx(2 / 2800)
    assert scfo.filter_gain_floor(ros, level=2) == pytest.approx(0.5 / 2800)


def test_run_constrained_quadratic():
    p = scfo.builtin("constrained_quadratic")
    t = scfo.run(p, budget=500)
    assert t["terminal"] is not None
    phi = t["phi"]
    assert np.all(np.diff(phi[:-1]) < 0)
    assert max(g.max() for g in t["g_p"]) < 0
    assert t["status"][0] == "initial" and t["status"][-1] == "terminated"
    assert np.linalg.norm(t["terminal"] - scfo.derived_optimum(p)) < 0.02
    assert t["csv"].startswith("k,u1,u2,phi,g_p1,g_p2,g1,K,level,status\n")


def test_lp_and_qp():
    normals = np.array([[1.0, 1.0]])
    ok, point = scfo.lp_feasible(normals, [-0.5], [0.5, 0.5], [0, 0], [1, 1])
    assert ok and point.sum() <= 0.5 + 1e-9
    bad, none = scfo.lp_feasible(normals, [-5.0], [0.5, 0.5], [0, 0], [1, 1])
    assert not bad and none is None
    x = scfo.qp_project([1.0, 1.0], normals, [-0.5], [0.5, 0.5], [0, 0], [1, 1])
    np.testing.assert_allclose(x, [0.25, 0.25], atol=1e-12)
    with pytest.raises(scfo.ValidationError):
        scfo.qp_project([1.0, 1.0], normals, [-5.0], [0.5, 0.5], [0, 0], [1, 1])


def test_fj():
    ros = scfo.builtin("rosenbrock")
    err, mult = scfo.fj_error(ros, [0.0, 0.0])
    assert err == pytest.approx(4.0, abs=1e-9)
    assert mult[0] == 1.0
    sphere, _ = scfo.fj_error(ros, [0.0, 0.0], mode="sphere")
    assert sphere == pytest.approx((3 - math.sqrt(5)) / 2, abs=1e-12)
    value, vec = scfo.min_nonnegative_rayleigh(np.array([[2.0, -1.0], [-1.0, 2.0]]))
    assert value == pytest.approx(1.0)
    np.testing.assert_allclose(vec, [math.sqrt(0.5)] * 2)


def test_validate_lipschitz():
    ros = scfo.builtin("rosenbrock")
    ok, worst = scfo.validate_lipschitz(ros, samples=2000)
    assert ok and all(r < 1 for r in worst.values())
    bad, _ = scfo.validate_lipschitz(ros, samples=2000, scale=0.5)
    assert not bad


def test_load_problem(tmp_path):
    f = tmp_path / "p.json"
    f.write_text('{"plant": "builtin:rosenbrock", "u0": [0.2, 0.1]}')
    p = scfo.load_problem(str(f))
    np.testing.assert_allclose(p.u0, [0.2, 0.1])
    f.write_text('{"plant": "stdio"}')
    with pytest.raises(scfo.ValidationError):
        scfo.load_problem(str(f))
