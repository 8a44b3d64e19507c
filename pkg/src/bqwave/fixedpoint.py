"""The map K_a, the homotopy in tau, and continuation in the half-length a.

K_a(c, Z, v, tau) = (c - theta0 + max_{x >= 0} T, T, u|R_a), where u solves the
flow problem driven by the extended temperature of Z and advected by the
extended v, and T solves the temperature problem with reaction f(Z).

Two drivers are provided.  ``picard`` iterates the damped map literally.
``newton`` (default) keeps the velocity update of K_a but resolves the
(c, T) block exactly at each outer step: with v frozen, the fixed points of
K_a in (c, Z) are the solutions of

    -c T_x - Lap T + tau v . grad T = tau f(T),   max_{x >= 0} T = theta0,

which are found by pseudo-transient Newton continuation.  Both drivers stop on
the same literal K_a residual, so they share fixed points.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .fields import (AxialGrid, ScalarField, VectorField, dx_centered, extend_temperature,
                     extend_velocity, make_grid, restrict_velocity)
from .flow import FlowProblem, solve_flow
from .geometry import ConditionReport, PhysParams, evaluate_thinness
from .reaction import NonlinearitySpec
from .temperature import (TemperatureOperator, TemperatureProblem, boundary_lift,
                          discrete_planar_speed, normalization_argmax, solve_temperature)

log = logging.getLogger(__name__)


class ConditionViolated(RuntimeError):
    def __init__(self, report: ConditionReport):
        super().__init__(f"thinness condition violated (lhs = {report.lhs:.6g} >= 1)")
        self.report = report


class StageFailure(RuntimeError):
    def __init__(self, msg, stage=None):
        super().__init__(msg)
        self.stage = stage


@dataclass
class FixedPointConfig:
    omega: float | None = None          # default: 1 for newton, 0.5 for picard
    taus: tuple = (0.0, 0.25, 0.5, 0.75, 1.0)
    a_schedule: tuple = ()
    tol: float = 1e-9
    max_iter: int = 60
    n_ext: int = 8
    flow_factor: float = 1.0
    scheme: str = "newton"
    newton_tol: float = 1e-11
    newton_max: int = 80
    advection: str = "auto"
    precond: str = "spectral"
    force: bool = False

    def __post_init__(self):
        self.taus = tuple(float(t) for t in self.taus)
        self.a_schedule = tuple(float(a) for a in self.a_schedule)
        if self.omega is None:
            self.omega = 1.0 if self.scheme == "newton" else 0.5
        if not 0 < self.omega <= 1:
            raise ValueError(f"damping must lie in (0, 1], got {self.omega}")
        if not self.taus:
            raise ValueError("tau schedule is empty")
        if any(t < 0 or t > 1 for t in self.taus) or list(self.taus) != sorted(self.taus):
            raise ValueError("tau schedule must ascend within [0, 1]")
        if list(self.a_schedule) != sorted(self.a_schedule):
            raise ValueError("a schedule must ascend")
        if not self.tol > 0:
            raise ValueError("tolerance must be positive")
        if self.scheme not in ("newton", "picard"):
            raise ValueError(f"unknown fixed-point scheme {self.scheme!r}")
        if self.n_ext < 2:
            raise ValueError("extension order must be >= 2")


@dataclass
class WaveState:
    c: float
    T: ScalarField
    v: VectorField
    tau: float
    a: float
    history: list = field(default_factory=list)
    omega: float = 1.0
    u: VectorField | None = None        # last flow solve on the flow box
    p: ScalarField | None = None
    T_ext: ScalarField | None = None
    v_ext: VectorField | None = None
    converged: bool = True
    stages: list = field(default_factory=list)
    report: dict = field(default_factory=dict)

    def check(self, band=(-0.01, 1.01)):
        if not math.isfinite(self.c):
            raise ValueError("wave speed is not finite")
        lo, hi = float(self.T.values.min()), float(self.T.values.max())
        if lo < band[0] or hi > band[1]:
            log.warning("temperature left the monitor band: [%g, %g]", lo, hi)
        return self


@dataclass
class WaveProblem:
    grid: AxialGrid
    params: PhysParams
    reaction: NonlinearitySpec

    @property
    def theta0(self):
        return self.reaction.theta0


def _max_right(T: ScalarField) -> float:
    return float(T.values[T.box.nx // 2:].max())


def planar_state(prob: WaveProblem) -> WaveState:
    """tau = 0 start: planar profile with the root-found discrete speed."""
    g = prob.grid
    c = discrete_planar_speed(g.a, prob.theta0, g.nx)
    T = solve_temperature(TemperatureProblem(g.ra, c, prob.reaction))
    return WaveState(c, T, VectorField.zeros(g.ra), 0.0, g.a)


# -- flow part of K_a --------------------------------------------------------

def flow_step(state: WaveState, prob: WaveProblem, cfg: FixedPointConfig, tau: float):
    """Extend (T, v), solve the flow, return (u on flow box, p, T_ext, v_ext, info)."""
    g = prob.grid
    T_ext = extend_temperature(state.T, g)
    if prob.params.d == 1 and tau != 0.0:
        v_ext = extend_velocity(state.v, g, cfg.n_ext)
    else:
        v_ext = None
    if tau == 0.0:
        u = VectorField.zeros(g.flow)
        return u, None, T_ext, v_ext, {}
    fp = FlowProblem(g.flow, state.c, tau, prob.params.d, T_ext, prob.params, w=v_ext,
                     scheme=cfg.advection)
    u, p = solve_flow(fp)
    return u, p, T_ext, v_ext, dict(fp.info)


def apply_Ka(state: WaveState, cfg: FixedPointConfig, prob: WaveProblem,
             tau: float | None = None) -> WaveState:
    """One damped application of K_a."""
    tau = state.tau if tau is None else tau
    try:
        u, p, T_ext, v_ext, info = flow_step(state, prob, cfg, tau)
    except Exception as e:
        raise StageFailure(f"flow solve failed: {e}") from e
    g = prob.grid
    try:
        T = solve_temperature(TemperatureProblem(g.ra, state.c, prob.reaction, tau=tau,
                                                 v=state.v, Z=state.T, precond=cfg.precond))
    except Exception as e:
        raise StageFailure(f"temperature solve failed: {e}") from e
    c_new = state.c - prob.theta0 + _max_right(T)
    ur = restrict_velocity(u, g)
    w = cfg.omega
    out = WaveState(state.c + w * (c_new - state.c),
                    ScalarField(g.ra, state.T.values + w * (T.values - state.T.values)),
                    ur if w == 1.0 else state.v + (ur - state.v).scale(w),
                    tau, state.a, list(state.history), w, u, p, T_ext, v_ext)
    out.report = {"Ka_residual": _ka_residual(state, c_new, T, ur), **info}
    return out


def _ka_residual(state, c_new, T, ur) -> float:
    return max(abs(c_new - state.c), float(np.abs(T.values - state.T.values).max()),
               (ur - state.v).sup())


# -- (c, T) block by pseudo-transient Newton ---------------------------------

def newton_temperature(c: float, T: ScalarField, v: VectorField | None, tau: float,
                       prob: WaveProblem, cfg: FixedPointConfig, *, dt0: float = 2.0):
    """Solve the nonlinear temperature problem with the normalisation for (c, T).

    Returns (c, T, info).  Steps of the damped system (J + I/dt) are accepted
    when the residual decreases; dt grows with the residual ratio, so the
    iteration turns into plain Newton near the solution.
    """
    box = T.box
    f = prob.reaction
    th0 = prob.theta0
    adv = v if (v is not None and tau != 0.0) else None
    Tv = T.values.copy()

    def residual(c, Tv):
        op = TemperatureOperator(box, c, adv, tau)
        F = op.apply(Tv)
        if tau != 0.0:
            F = F - tau * np.asarray(f(Tv[1:-1]))
        return F

    def gap(Tv):
        i, j, k = normalization_argmax(ScalarField(box, Tv))
        return Tv[i, j, k] - th0, (i, j, k)

    F = residual(c, Tv)
    gv, _ = gap(Tv)
    merit = math.hypot(float(np.linalg.norm(F)) * math.sqrt(box.vol), gv)
    dt = dt0
    info = {"steps": 0, "rejected": 0, "merit": [merit]}
    for it in range(cfg.newton_max):
        gv, p = gap(Tv)
        if float(np.abs(F).max()) <= cfg.newton_tol and abs(gv) <= cfg.newton_tol:
            break
        sigma = np.zeros_like(Tv)
        if tau != 0.0:
            sigma -= tau * np.asarray(f.derivative(Tv))
        sigma += 1.0 / dt
        op = TemperatureOperator(box, c, adv, tau, sigma=sigma)
        try:
            w1 = op.solve(-F, precond=cfg.precond, rtol=1e-10, atol=1e-15)
            w2 = op.solve(dx_centered(Tv, box.hx)[1:-1], precond=cfg.precond, rtol=1e-10)
        except Exception as e:
            raise StageFailure(f"Newton linear solve failed: {e}") from e
        pi = (p[0] - 1, p[1], p[2])
        if abs(w2[pi]) < 1e-300:
            raise StageFailure("normalisation row is singular")
        dc = (-gv - w1[pi]) / w2[pi]
        dT = w1 + dc * w2
        Tn = Tv.copy()
        Tn[1:-1] += dT
        cn = c + dc
        Fn = residual(cn, Tn)
        gn, _ = gap(Tn)
        mn = math.hypot(float(np.linalg.norm(Fn)) * math.sqrt(box.vol), gn)
        info["steps"] += 1
        if mn < merit or mn < 1e-14:
            dt = min(dt * min(merit / max(mn, 1e-300), 4.0), 1e12)
            c, Tv, F, gv, merit = cn, Tn, Fn, gn, mn
            info["merit"].append(merit)
            info["last_dc"] = abs(dc)
        else:
            dt /= 4.0
            info["rejected"] += 1
            if dt < 1e-8:
                raise StageFailure("pseudo-transient continuation collapsed")
    else:
        raise StageFailure(f"Newton did not converge in {cfg.newton_max} steps "
                           f"(|F| = {float(np.abs(F).max()):.3e})")
    info["F_max"] = float(np.abs(F).max())
    info["gap"] = float(gv)
    return c, ScalarField(box, Tv), info


# -- stage driver --------------------------------------------------------------

def _stage(state: WaveState, tau: float, prob: WaveProblem, cfg: FixedPointConfig) -> WaveState:
    g = prob.grid
    st = replace(state, tau=tau, history=[], stages=list(state.stages))
    res_hist = []
    for it in range(1, cfg.max_iter + 1):
        if cfg.scheme == "newton":
            c, T, ninfo = newton_temperature(st.c, st.T, st.v, tau, prob, cfg)
            st = replace(st, c=c, T=T)
        try:
            nxt = apply_Ka(st, cfg, prob, tau)
        except StageFailure as e:
            e.stage = tau
            raise
        res = nxt.report["Ka_residual"]
        res_hist.append(res)
        log.info("a=%g tau=%g it=%d c=%.12g residual=%.3e", g.a, tau, it, nxt.c, res)
        if cfg.scheme == "newton":
            # keep the resolved (c, T); only v moves along the damped K_a step
            nxt = replace(nxt, c=st.c, T=st.T)
        if res <= cfg.tol:
            ur = restrict_velocity(nxt.u, g)
            out = replace(nxt, v=ur, converged=True, history=res_hist,
                          stages=list(state.stages))
            if cfg.scheme == "picard":
                out = replace(out, c=st.c, T=st.T)
            out.stages.append({"a": g.a, "tau": tau, "c": out.c, "iterations": it,
                               "residuals": res_hist, "converged": True,
                               **{k: v for k, v in nxt.report.items() if k != "Ka_residual"}})
            return out.check()
        if not all(math.isfinite(r) for r in res_hist):
            break
        st = nxt
    raise StageFailure(f"no convergence at tau={tau} after {len(res_hist)} iterations "
                       f"(last residual {res_hist[-1]:.3e})", tau)


def check_gate(prob: WaveProblem, cfg: FixedPointConfig) -> ConditionReport:
    rep = evaluate_thinness(prob.grid.cs, prob.params)
    if not rep.ok and not cfg.force:
        raise ConditionViolated(rep)
    return rep


def solve_homotopy(cfg: FixedPointConfig, grid: AxialGrid, params: PhysParams,
                   reaction: NonlinearitySpec, init: WaveState | None = None,
                   on_stage=None) -> WaveState:
    """March tau through the schedule from the planar state.

    On failure the last converged stage is returned with ``converged`` False
    and the failure message in ``report``.  ``on_stage(state, problem)`` is
    called after every converged stage and may annotate ``state.stages[-1]``.
    """
    prob = WaveProblem(grid, params, reaction)
    gate = check_gate(prob, cfg)
    state = init if init is not None else planar_state(prob)
    state.omega = cfg.omega
    for tau in cfg.taus:
        try:
            state = _stage(state, tau, prob, cfg)
            if on_stage is not None:
                on_stage(state, prob)
        except StageFailure as e:
            failed = replace(state, converged=False)
            failed.report = {"failure": str(e), "failed_tau": tau}
            failed.stages = list(state.stages) + [{"a": grid.a, "tau": tau, "converged": False,
                                                   "error": str(e)}]
            return failed
    state.report = {"condition": gate.as_dict()}
    if reaction.k == 0:
        state.report["degenerate"] = "zero reaction: the normalisation only holds on the " \
                                     "bounded domain and the integral of f vanishes"
    return state


# -- continuation in a ------------------------------------------------------

def pad_state(state: WaveState, grid: AxialGrid) -> WaveState:
    """Zero-pad onto a longer centred grid with the same spacing.

    Temperature padding uses the end values (1 on the left, 0 on the right).
    """
    old = state.T.box
    if abs(old.hx - grid.hx) > 1e-12 * old.hx:
        raise ValueError("continuation keeps the axial spacing fixed")
    k = (grid.nx - old.nx) // 2
    if k < 0 or grid.nx - old.nx != 2 * k:
        raise ValueError("new grid must extend the old one symmetrically")
    T = boundary_lift(grid.ra)
    T[k:k + old.nx + 1] = state.T.values
    T[:k] = 1.0
    v = VectorField.zeros(grid.ra)
    v.u1[k:k + old.nx + 1] = state.v.u1
    v.u2[k:k + old.nx] = state.v.u2
    v.u3[k:k + old.nx] = state.v.u3
    return WaveState(state.c, ScalarField(grid.ra, T), v, state.tau, grid.a,
                     stages=list(state.stages))


def continue_in_a(cfg: FixedPointConfig, grid: AxialGrid, params: PhysParams,
                  reaction: NonlinearitySpec, on_stage=None):
    """Solve along cfg.a_schedule keeping the axial spacing of ``grid``.

    The first a runs the whole homotopy; later ones start at tau = 1 from the
    padded previous state.  Returns (states, table) with table rows
    {a, c, cauchy}.
    """
    sched = cfg.a_schedule or (grid.a,)
    hx = grid.hx
    states, table = [], []
    prev = None
    for a in sched:
        nx = int(round(2 * a / hx))
        g = make_grid(a, nx, grid.cs, a + (grid.A - grid.a))
        if prev is None:
            st = solve_homotopy(cfg, g, params, reaction, on_stage=on_stage)
        else:
            init = pad_state(prev, g)
            st = solve_homotopy(replace(cfg, taus=(cfg.taus[-1],)), g, params, reaction,
                                init=init, on_stage=on_stage)
        if not st.converged:
            states.append(st)
            table.append({"a": a, "c": float("nan"), "cauchy": float("nan"),
                          "converged": False})
            break
        cauchy = abs(st.c - prev.c) if prev is not None else float("nan")
        table.append({"a": a, "c": st.c, "cauchy": cauchy, "converged": True,
                      "iterations": st.stages[-1]["iterations"]})
        states.append(st)
        prev = st
    return states, table
