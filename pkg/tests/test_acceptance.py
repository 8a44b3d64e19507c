"""Acceptance suite: one test per criterion, summarised as PASS/FAIL lines at the end
of the pytest run (see conftest.py)."""

import json
import math
import time
from pathlib import Path

import numpy as np
import pytest

from bqwave.cli import EXIT_GATE, EXIT_OK, load_state, main, run_solve
from bqwave.config import RunConfig, load_config
from bqwave.diagnostics import energy_identity_residual, profiles_and_monotonicity
from bqwave.fields import (ScalarField, VectorField, divergence, extend_temperature,
                           extend_velocity, extension_coefficients, extension_epsilon,
                           field_from_stream, gradient, helmholtz_project, inner, l2_norm,
                           make_grid, restrict_velocity)
from bqwave.fixedpoint import (ConditionViolated, FixedPointConfig, WaveProblem,
                               solve_homotopy)
from bqwave.flow import force_residual_norm, grad_norm_node
from bqwave.geometry import (PhysParams, build_rectangle, evaluate_thinness,
                             poincare_constant, poincare_wirtinger_constant, transverse_moment)
from bqwave.reaction import NonlinearitySpec
from bqwave.temperature import planar_speed

CONFIGS = Path(__file__).resolve().parent.parent / "configs"
SEED = 20240611


class timer:
    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.dt = time.perf_counter() - self.t0


# -- 1: planar oracle -------------------------------------------------------------

def test_criterion_1_planar_oracle(record_property):
    pp = PhysParams(1.0, (0.0, 0.0, -1.0), 0, 0.25)
    rx = NonlinearitySpec("hat", 4.0, 0.25)
    cs = build_rectangle(0.5, 0.5, 4, 4)
    exact = planar_speed(10.0, 0.25)
    errs = []
    with timer() as t:
        for nx in (64, 128):
            st = solve_homotopy(FixedPointConfig(taus=(0,)), make_grid(10.0, nx, cs), pp, rx)
            errs.append(abs(st.c / exact - 1))
    order = math.log2(errs[0] / errs[1])
    record_property("measured", f"rel err {errs[0]:.2e}, order {order:.3f}, {t.dt:.2f}s")
    assert (1 - math.exp(-exact * 10)) / (math.exp(exact * 10) - math.exp(-exact * 10)) \
        == pytest.approx(0.25, rel=1e-14)
    assert errs[0] <= 1e-4
    assert order >= 1.9
    assert t.dt < 5


# -- 2: extension operator ----------------------------------------------------------

def test_criterion_2_extension_suite(record_property):
    rng = np.random.default_rng(SEED)
    cs = build_rectangle(0.5, 0.5, 6, 6)
    g = make_grid(4.0, 128, cs)
    worst_div = worst_amp = 0.0
    with timer() as t:
        for n in (2, 4, 8):
            l1, l2, l3 = extension_coefficients(n)
            assert abs(l1 + l2 + l3 - 1) <= 1e-12
            assert abs(-n * l2 - n * n * l3 - 1) <= 1e-12
            assert abs(n * n * l2 + n**4 * l3 - 1) <= 1e-12
            for _ in range(3):
                a1, a2, a3 = rng.uniform(0.5, 1.5, 3)
                v = field_from_stream(g.ra, lambda x, y: np.sin(np.pi * y / cs.ly) ** 2
                                      * (1 + a1 * np.sin(a3 * x + a2)))
                E = extend_velocity(v, g, n)
                div = np.abs(divergence(E).values).max() * min(E.box.spacings) / E.max_speed()
                amp = E.sup() / v.sup()
                worst_div = max(worst_div, div)
                worst_amp = max(worst_amp, amp - 1 - extension_epsilon(n))
                assert div <= 1e-8
                assert amp <= 1 + extension_epsilon(n)
                R = restrict_velocity(E, g)
                assert all(np.array_equal(p, q) for p, q in zip(R.comps, v.comps))
    eps = [extension_epsilon(n) for n in (2, 4, 8)]
    record_property("measured", f"eps {eps[0]:.3f}>{eps[1]:.3f}>{eps[2]:.3f}, "
                    f"scaled div {worst_div:.1e}, {t.dt:.2f}s")
    assert eps[0] > eps[1] > eps[2]
    assert t.dt < 10


# -- 3: force potential bound -----------------------------------------------------

def random_temperature(g, rng):
    """Smooth T on R_a with traces 1 and 0, plus transverse and axial modes."""
    a, cs = g.a, g.cs
    X, Y, Z = g.ra.coords("node")
    s = rng.uniform(0.3, 3.0)
    base = (np.tanh(s * a) - np.tanh(s * X)) / (2 * np.tanh(s * a))
    T = base + 0 * Y + 0 * Z
    for _ in range(3):
        j, k, l = rng.integers(1, 4, 3)
        amp = rng.normal(scale=0.3)
        T = T + amp * np.sin(j * np.pi * (X + a) / (2 * a)) * np.cos(k * np.pi * Y / cs.ly) \
            * np.cos(l * np.pi * Z / cs.lz)
    return ScalarField(g.ra, T)


def test_criterion_3_force_potential_bound(record_property):
    rng = np.random.default_rng(SEED)
    cs = build_rectangle(0.5, 0.5, 8, 8)
    g = make_grid(3.0, 48, cs)
    worst = 0.0
    with timer() as t:
        for i in range(50):
            rho = rng.normal(size=3) * rng.uniform(0.5, 5.0)
            Te = extend_temperature(random_temperature(g, rng), g)
            K = np.linalg.norm(rho) * poincare_wirtinger_constant(cs) + transverse_moment(cs, rho)
            ratio = force_residual_norm(Te, rho) / (K * grad_norm_node(Te))
            worst = max(worst, ratio)
            assert ratio <= 1.05, f"field {i}: ratio {ratio}"
    record_property("measured", f"worst ratio {worst:.3f}, {t.dt:.2f}s")
    assert t.dt < 30


# -- 4: thinness evaluator ---------------------------------------------------------

def test_criterion_4_thinness(record_property):
    with timer() as t:
        cs = build_rectangle(0.5, 0.5, 64, 64)
        rep = evaluate_thinness(cs, PhysParams(1.0, (0.0, 0.0, -1.0), 1, 0.25))
        # C_P = 1/(pi sqrt 8), C_PW = 0.5/pi, L = side/(2 sqrt 3), |Omega| = 0.25
        C_P, C_PW, L = 1 / (math.pi * math.sqrt(8)), 0.5 / math.pi, 0.5 / (2 * math.sqrt(3))
        oracle = math.sqrt(14) * C_P / math.sqrt(math.pi) * math.sqrt(0.25) * (C_PW + L)
        num_p = poincare_constant(cs, numeric=True)
        num_pw = poincare_wirtinger_constant(cs, numeric=True)
    record_property("measured", f"lhs {rep.lhs:.6f}, numeric gaps "
                    f"{abs(num_p / C_P - 1):.1e}/{abs(num_pw / C_PW - 1):.1e}, {t.dt:.2f}s")
    assert rep.lhs == pytest.approx(oracle, rel=1e-10)
    assert rep.lhs == pytest.approx(0.036, abs=5e-4)
    assert num_p == pytest.approx(C_P, rel=1e-3)
    assert num_pw == pytest.approx(C_PW, rel=1e-3)
    assert t.dt < 20


# -- 5, 6, 9: fixed-point regressions through the command line ---------------------

def solve_cli(config, root, monkeypatch):
    monkeypatch.setenv("BQ_OUT", str(root))
    with timer() as t:
        code = main(["solve", str(config)])
    return code, Path(root) / Path(config).stem, t.dt


def run_longer(config, a, root):
    """Same configuration on a domain of half-length a with the same spacing."""
    cfg = load_config(config)
    raw = json.loads(json.dumps(cfg.raw))
    a0, nx0 = cfg.get("geometry", "a"), cfg.get("geometry", "nx")
    raw["geometry"].update(a=a, nx=int(round(nx0 * a / a0)))
    out = Path(root) / f"a{a:g}"
    out.mkdir(parents=True)
    code, _ = run_solve(RunConfig(raw, source=str(config)).validate(), out)
    return code, out


def check_regression(run, longer, d):
    summary = json.loads((run / "summary.json").read_text())
    audit = json.loads((run / "audit.json").read_text())
    recs = {r["name"]: r for r in audit["records"]}
    stages = json.loads((run / "stages.json").read_text())["stages"]
    assert stages[-1]["tau"] == 1 and all(s["converged"] for s in stages)
    assert summary["converged"] and summary["c"] > 0
    assert summary["reaction_integral"] > 0
    for name, r in recs.items():
        if name.startswith("th_rd"):
            assert r["passed"], name
            if name.startswith(("th_rd(iii)", "th_rd(iv)", "th_rd(v)")):
                assert r["slack"] == 0.05 and r["lhs"] <= 1.05 * r["rhs"], name
    st, prob, _ = load_state(run / "state.bqfl")
    _, m, _ = profiles_and_monotonicity(st)
    assert np.diff(m).max() <= 1e-8
    st2, prob2, _ = load_state(longer / "state.bqfl")
    res = energy_identity_residual(st, prob), energy_identity_residual(st2, prob2)
    assert res[1] < res[0]
    if d == 1:
        for name in ("due", "cinque", "thXie"):
            assert recs[name]["asserted"] and recs[name]["passed"], name
            assert recs[name]["slack"] == 0.05
        for name in ("thour_bound ratio", "th_uniform_H2(ii) ratio"):
            assert not recs[name]["asserted"] and math.isfinite(recs[name]["lhs"])
    assert audit["passed"] and summary["audit_passed"]
    return summary, res, recs


@pytest.fixture(scope="module")
def d0_run(tmp_path_factory):
    mp = pytest.MonkeyPatch()
    root = tmp_path_factory.mktemp("d0")
    try:
        code, run, dt = solve_cli(CONFIGS / "d0_regression.cfg", root, mp)
    finally:
        mp.undo()
    return code, run, dt, root


def test_criterion_5_regression_d0(d0_run, record_property):
    code, run, dt, root = d0_run
    assert code == EXIT_OK
    code40, longer = run_longer(CONFIGS / "d0_regression.cfg", 40.0, root)
    assert code40 == EXIT_OK
    summary, res, _ = check_regression(run, longer, 0)
    record_property("measured", f"c {summary['c']:.10f}, energy residual {res[0]:.2e} (a=20) "
                    f"> {res[1]:.2e} (a=40), solve {dt:.1f}s")
    assert dt < 600


def test_criterion_6_regression_d1(tmp_path, monkeypatch, record_property):
    assert evaluate_thinness(load_config(CONFIGS / "d1_regression.cfg").cross_section(),
                             load_config(CONFIGS / "d1_regression.cfg").physics()).satisfied
    code, run, dt = solve_cli(CONFIGS / "d1_regression.cfg", tmp_path, monkeypatch)
    assert code == EXIT_OK
    code40, longer = run_longer(CONFIGS / "d1_regression.cfg", 40.0, tmp_path)
    assert code40 == EXIT_OK
    summary, res, recs = check_regression(run, longer, 1)
    ratios = [recs[n]["lhs"] for n in ("thour_bound ratio", "th_uniform_H2(ii) ratio")]
    record_property("measured", f"c {summary['c']:.10f}, energy residual {res[0]:.2e} > "
                    f"{res[1]:.2e}, logged ratios {ratios[0]:.3g}/{ratios[1]:.3g}, "
                    f"solve {dt:.1f}s")
    assert dt < 1200


# -- 7: gate --------------------------------------------------------------------

def test_criterion_7_gate(tmp_path, monkeypatch, capsys, record_property):
    cfg = CONFIGS / "gate_violation.cfg"
    code, run, _ = solve_cli(cfg, tmp_path, monkeypatch)
    assert code == EXIT_GATE
    summary = json.loads((run / "summary.json").read_text())
    assert summary["status"] == "condition violated" and summary["exit"] == EXIT_GATE
    report = summary["condition"]
    assert report["lhs"] >= 1 and report["required"] and not report["satisfied"]
    assert not (run / "state.bqfl").exists()
    assert json.loads(capsys.readouterr().err)["lhs"] == report["lhs"]
    c = load_config(cfg)
    with pytest.raises(ConditionViolated) as ei:
        solve_homotopy(c.solver(), c.grid(), c.physics(), c.reaction())
    assert ei.value.report.lhs == report["lhs"]
    record_property("measured", f"lhs {report['lhs']:.4g}, exit {code}")


# -- 8: projection -----------------------------------------------------------------

def test_criterion_8_projection(record_property):
    rng = np.random.default_rng(SEED)
    cs = build_rectangle(0.5, 0.5, 8, 8)
    g = make_grid(2.0, 32, cs)
    b = g.ra
    worst = 0.0
    with timer() as t:
        for _ in range(20):
            f = VectorField(b, *(rng.normal(size=b.shape(c)) for c in ("u1", "u2", "u3")))
            P = helmholtz_project(f)
            PP = helmholtz_project(P)
            idem = max(np.abs(p - q).max() for p, q in zip(PP.comps, P.comps))
            orth = abs(inner(P, f - P)) / inner(f, f)
            worst = max(worst, idem, orth)
            assert idem <= 1e-9 and orth <= 1e-9
            assert l2_norm(P) <= l2_norm(f)
            q = ScalarField(b, rng.normal(size=b.shape("cell")), "cell")
            G = gradient(q)
            assert l2_norm(helmholtz_project(G)) <= 1e-9 * max(1.0, l2_norm(G))
    record_property("measured", f"worst idempotence/orthogonality {worst:.1e}, {t.dt:.2f}s")
    assert t.dt < 10


# -- 9: determinism --------------------------------------------------------------

def test_criterion_9_determinism(d0_run, tmp_path, monkeypatch, record_property):
    code, run, _, _ = d0_run
    code2, run2, _ = solve_cli(CONFIGS / "d0_regression.cfg", tmp_path, monkeypatch)
    assert code == code2 == EXIT_OK
    names = sorted(p.name for p in run.iterdir() if p.suffix in (".json", ".csv"))
    assert {"summary.json", "audit.json", "stages.json", "profiles.csv"} <= set(names)
    assert names == sorted(p.name for p in run2.iterdir() if p.suffix in (".json", ".csv"))
    for n in names:
        assert (run / n).read_bytes() == (run2 / n).read_bytes(), n
    assert (run / "state.bqfl").read_bytes() == (run2 / "state.bqfl").read_bytes()
    record_property("measured", f"{len(names)} JSON/CSV files and the state dump identical")
