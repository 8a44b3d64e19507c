import math
from dataclasses import replace

import numpy as np
import pytest

from bqwave.fields import ScalarField, VectorField, make_grid, restrict_velocity
from bqwave.fixedpoint import (ConditionViolated, FixedPointConfig, WaveProblem, WaveState,
                               apply_Ka, continue_in_a, pad_state, planar_state,
                               solve_homotopy)
from bqwave.geometry import PhysParams, build_rectangle
from bqwave.reaction import NonlinearitySpec
from bqwave.temperature import discrete_planar, discrete_planar_speed, normalization_gap

CS = build_rectangle(0.5, 0.5, 6, 6)
HAT = NonlinearitySpec("hat", 4.0, 0.25)
P0 = PhysParams(1.0, (0.0, 0.0, -1.0), 0, 0.25)


@pytest.fixture(scope="module")
def d0_state():
    g = make_grid(8.0, 64, CS)
    seen = []
    st = solve_homotopy(FixedPointConfig(taus=(0, 0.5, 1)), g, P0, HAT,
                        on_stage=lambda s, p: seen.append(s.tau))
    return st, WaveProblem(g, P0, HAT), seen


def test_config_validation():
    assert FixedPointConfig().omega == 1.0
    assert FixedPointConfig(scheme="picard").omega == 0.5
    for kw in (dict(omega=0.0), dict(omega=1.5), dict(taus=()), dict(taus=(0.5, 0.2)),
               dict(taus=(0, 1.2)), dict(a_schedule=(20, 10)), dict(tol=0.0),
               dict(scheme="anderson"), dict(n_ext=1)):
        with pytest.raises(ValueError):
            FixedPointConfig(**kw)


def test_planar_state_is_fixed_point():
    g = make_grid(8.0, 64, CS)
    prob = WaveProblem(g, P0, HAT)
    st = planar_state(prob)
    out = apply_Ka(st, FixedPointConfig(), prob, 0.0)
    assert out.report["Ka_residual"] <= 1e-10
    # the maximum over x >= 0 already equals theta0, so c does not move
    assert abs(out.c - st.c) <= 1e-12
    assert abs(normalization_gap(st.T, 0.25)) <= 1e-12


def test_c_update_matches_planar_oracle():
    g = make_grid(8.0, 64, CS)
    prob = WaveProblem(g, P0, HAT)
    c = 0.31
    st = WaveState(c, planar_state(prob).T, VectorField.zeros(g.ra), 0.0, g.a)
    out = apply_Ka(st, FixedPointConfig(), prob, 0.0)
    # discrete 1D profile, decreasing, so its max over x >= 0 sits at x = 0
    oracle = c - 0.25 + discrete_planar(c, g.a, g.nx)[g.nx // 2]
    assert out.c == pytest.approx(oracle, abs=1e-12)


def test_tau0_stage_converges_fast(d0_state):
    st, _, _ = d0_state
    assert st.stages[0]["tau"] == 0.0 and st.stages[0]["iterations"] <= 3


def test_d0_homotopy_reaches_tau1(d0_state):
    st, prob, seen = d0_state
    assert st.converged and st.tau == 1.0
    assert seen == [0.0, 0.5, 1.0]
    assert [s["tau"] for s in st.stages] == [0.0, 0.5, 1.0]
    assert st.c > 0
    assert abs(normalization_gap(st.T, 0.25)) <= 1e-9
    assert st.v.is_solenoidal()
    r = restrict_velocity(st.u, prob.grid)
    assert all(np.array_equal(a, b) for a, b in zip(r.comps, st.v.comps))
    assert -0.01 <= st.T.values.min() and st.T.values.max() <= 1.01
    assert st.report["condition"]["status"] == "condition not required"


def test_damping_invariance():
    g = make_grid(8.0, 64, CS)
    tol = 1e-8
    runs = [solve_homotopy(FixedPointConfig(taus=(0, 0.25), tol=tol, scheme=s, omega=w,
                                            max_iter=400), g, P0, HAT)
            for s, w in (("newton", 1.0), ("newton", 0.5), ("picard", 0.5))]
    assert all(r.converged for r in runs)
    for r in runs[1:]:
        assert abs(r.c - runs[0].c) <= 10 * tol
        assert np.abs(r.T.values - runs[0].T.values).max() <= 10 * tol


def test_gate_refuses_thick_sections():
    g = make_grid(8.0, 64, CS)
    pp = PhysParams(1e-3, (0.0, 0.0, -1.0), 1, 0.25)
    with pytest.raises(ConditionViolated) as exc:
        solve_homotopy(FixedPointConfig(), g, pp, HAT)
    assert exc.value.report.lhs > 1 and not exc.value.report.satisfied


def test_zero_reaction_is_flagged():
    g = make_grid(8.0, 64, CS)
    st = solve_homotopy(FixedPointConfig(taus=(0, 1)), g, P0, NonlinearitySpec("hat", 0.0, 0.25))
    assert "degenerate" in st.report
    # only the weak buoyant flow moves c away from the planar root
    assert st.c == pytest.approx(discrete_planar_speed(g.a, 0.25, g.nx), rel=1e-5)


def test_failure_is_reported():
    g = make_grid(8.0, 64, CS)
    st = solve_homotopy(FixedPointConfig(taus=(0, 1), scheme="picard", max_iter=2), g, P0, HAT)
    assert not st.converged
    assert st.report["failed_tau"] == 1.0 and "no convergence" in st.report["failure"]
    assert st.tau == 0.0 and st.stages[-1]["converged"] is False


def test_pad_state():
    g = make_grid(8.0, 64, CS)
    st = planar_state(WaveProblem(g, P0, HAT))
    big = make_grid(12.0, 96, CS)
    p = pad_state(st, big)
    assert (p.T.values[:16] == 1.0).all() and (p.T.values[-16:] == 0.0).all()
    assert np.array_equal(p.T.values[16:81], st.T.values)
    with pytest.raises(ValueError):
        pad_state(st, make_grid(12.0, 64, CS))


def test_continuation_planar_matches_root_per_a():
    g = make_grid(5.0, 40, CS)
    states, table = continue_in_a(FixedPointConfig(taus=(0,), a_schedule=(5, 10, 20)), g, P0,
                                  HAT)
    for row in table:
        assert row["c"] == pytest.approx(discrete_planar_speed(row["a"], 0.25,
                                                               int(round(8 * row["a"]))),
                                         rel=1e-9)


def test_continuation_d0_cauchy_and_duplicate():
    g = make_grid(4.0, 32, CS)
    cfg = FixedPointConfig(taus=(0, 0.5, 1), a_schedule=(4, 8, 16, 16))
    states, table = continue_in_a(cfg, g, P0, HAT)
    assert all(r["converged"] for r in table)
    cauchy = [r["cauchy"] for r in table[1:3]]
    assert cauchy[0] > cauchy[1]
    # the repeated a restarts from its own fixed point
    assert table[3]["iterations"] == 1 and table[3]["cauchy"] <= 1e-9
