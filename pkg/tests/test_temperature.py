import math

import numpy as np
import pytest

from bqwave.fields import ScalarField, VectorField, field_from_stream, make_grid
from bqwave.geometry import build_rectangle
from bqwave.reaction import NonlinearitySpec
from bqwave.temperature import (LinearSolverError, TemperatureOperator, TemperatureProblem,
                                boundary_lift, discrete_planar, discrete_planar_speed,
                                normalization_argmax, normalization_gap, planar_profile,
                                planar_speed, solve_temperature)

HAT = NonlinearitySpec("hat", 4.0, 0.25)


def grid(a=10.0, nx=64, n=4):
    return make_grid(a, nx, build_rectangle(0.5, 0.5, n, n))


def test_linear_profile_without_drift():
    g = grid()
    T = solve_temperature(TemperatureProblem(g.ra, 0.0, HAT))
    x = g.ra.xn[:, None, None]
    assert np.abs(T.values - (g.a - x) / (2 * g.a)).max() < 1e-11


def test_planar_solution_second_order():
    errs = []
    for nx in (32, 64, 128):
        g = grid(nx=nx)
        c = 0.3
        T = solve_temperature(TemperatureProblem(g.ra, c, HAT))
        exact = planar_profile(c, g.a)(g.ra.xn)[:, None, None]
        errs.append(np.abs(T.values - exact).max())
        # one-dimensional and equal to the 1D discrete profile
        assert np.abs(T.values - discrete_planar(c, g.a, nx)[:, None, None]).max() < 1e-10
    r = [errs[0] / errs[1], errs[1] / errs[2]]
    assert all(3.6 <= q <= 4.4 for q in r), r


def test_planar_profile_closed_form():
    a = 10.0
    for c in (-2.0, -0.1, 1e-14, 0.1, 3.0, 80.0):
        T = planar_profile(c, a)
        assert T(-a) == pytest.approx(1.0, abs=1e-15) and T(a) == pytest.approx(0.0, abs=1e-15)
        assert np.all(np.isfinite(T(np.linspace(-a, a, 101))))
    x = np.linspace(-a, a, 11)
    assert np.allclose(planar_profile(1e-9, a)(x), (a - x) / (2 * a), atol=1e-8)
    # the ODE -c T' - T'' = 0 holds: check with sympy-free finite differences
    c, h = 0.7, 1e-4
    T = planar_profile(c, a)
    for x0 in (-3.0, 0.0, 4.0):
        d1 = (T(x0 + h) - T(x0 - h)) / (2 * h)
        d2 = (T(x0 + h) - 2 * T(x0) + T(x0 - h)) / h**2
        assert abs(-c * d1 - d2) < 1e-6


def test_planar_value_at_origin():
    a = 10.0
    # (1 - e^{-ca}) / (e^{ca} - e^{-ca}) = 1 / (e^{ca} + 1)
    c = math.log(4) / a
    assert planar_profile(c, a)(0.0) == pytest.approx(0.2, rel=1e-14)
    c = planar_speed(a, 0.25)
    assert c == pytest.approx(math.log(3) / a, rel=1e-15)
    assert planar_profile(c, a)(0.0) == pytest.approx(0.25, rel=1e-14)


def test_discrete_planar_speed():
    errs = []
    for nx in (64, 128):
        errs.append(abs(discrete_planar_speed(10.0, 0.25, nx) / planar_speed(10.0, 0.25) - 1))
    assert errs[0] < 1e-4
    assert math.log2(errs[0] / errs[1]) >= 1.9
    # the root moves monotonically with a
    cs = [discrete_planar_speed(a, 0.25, int(6.4 * a)) for a in (5, 10, 20)]
    assert cs[0] > cs[1] > cs[2] > 0


def test_normalization_gap():
    g = grid()
    c = discrete_planar_speed(g.a, 0.25, g.nx)
    T = solve_temperature(TemperatureProblem(g.ra, c, HAT))
    assert abs(normalization_gap(T, 0.25)) < 1e-6
    flat = ScalarField(g.ra, np.full(g.ra.shape("node"), 0.25))
    assert normalization_gap(flat, 0.25) == 0.0
    shifted = T.values.copy()
    shifted[g.nx // 2:] += 0.125
    assert normalization_gap(ScalarField(g.ra, shifted), 0.25) == pytest.approx(
        normalization_gap(T, 0.25) + 0.125, abs=1e-15)
    assert normalization_argmax(T)[0] == g.nx // 2


def stream(box):
    ly = box.cs.ly
    return field_from_stream(box, lambda x, y: 0.8 * np.sin(np.pi * y / ly) ** 2
                             * np.cos(0.4 * x))


def test_maximum_principle_with_flow_and_reaction(rng):
    g = grid(a=5.0, nx=80, n=6)
    Z = ScalarField(g.ra, rng.uniform(0, 1, g.ra.shape("node")))
    T = solve_temperature(TemperatureProblem(g.ra, 0.5, HAT, tau=1.0, v=stream(g.ra), Z=Z))
    assert T.values.min() >= -1e-8
    # source bounded by sup f = k (1 - theta0)^2 / 4
    assert T.values.max() <= 1.0 + 4 * 0.75**2 / 4 * g.a**2


@pytest.mark.parametrize("precond", ["ilu", "none"])
def test_preconditioners_agree(precond, rng):
    g = grid(a=3.0, nx=24, n=4)
    Z = ScalarField(g.ra, rng.uniform(0, 1, g.ra.shape("node")))
    kw = dict(tau=0.7, v=stream(g.ra), Z=Z)
    ref = solve_temperature(TemperatureProblem(g.ra, 0.4, HAT, **kw))
    other = solve_temperature(TemperatureProblem(g.ra, 0.4, HAT, precond=precond, **kw))
    assert np.abs(ref.values - other.values).max() < 1e-9


def test_residual_is_small(rng):
    g = grid(a=4.0, nx=48, n=6)
    v = stream(g.ra)
    Z = ScalarField(g.ra, rng.uniform(0, 1, g.ra.shape("node")))
    T = solve_temperature(TemperatureProblem(g.ra, -0.3, HAT, tau=0.5, v=v, Z=Z))
    op = TemperatureOperator(g.ra, -0.3, v, 0.5)
    rhs = 0.5 * HAT(Z.values[1:-1])
    assert np.linalg.norm(op.apply(T.values) - rhs) <= 1e-10 * np.linalg.norm(
        rhs - op.apply(boundary_lift(g.ra)))


def test_stall_is_reported():
    g = grid(a=10.0, nx=128, n=8)
    op = TemperatureOperator(g.ra, 0.0)
    rhs = np.ones(op.ishape)
    with pytest.raises(LinearSolverError) as exc:
        op.solve(rhs, precond="none", rtol=1e-14, maxiter=1)
    assert len(exc.value.history) > 0
    with pytest.raises(ValueError):
        op.solve(rhs, precond="jacobi")


def test_problem_validation():
    g = grid()
    with pytest.raises(ValueError):
        TemperatureProblem(g.ra, 0.1, HAT, tau=1.5)
    with pytest.raises(ValueError):
        TemperatureProblem(g.ra, math.nan, HAT)
    with pytest.raises(ValueError):
        TemperatureProblem(g.ra, 0.1, HAT, v=VectorField.zeros(g.flow))
