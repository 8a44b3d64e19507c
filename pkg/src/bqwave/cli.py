"""Command line entry point: ``bqwave <subcommand> config``.

Exit statuses: 0 success, 1 configuration error, 2 thinness condition
violated, 3 no convergence, 4 an asserted audit failed.
"""

from __future__ import annotations

import argparse
import copy
import logging
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .config import ConfigError, RunConfig, load_config
from .diagnostics import full_audit, nonzero_reaction
from .fields import ScalarField, VectorField, extend_temperature
from .fixedpoint import (ConditionViolated, WaveProblem, WaveState, continue_in_a,
                         solve_homotopy)
from .geometry import evaluate_thinness
from .io import (FormatError, read_bqfl, to_json, write_bqfl, write_csv, write_json)
from .temperature import discrete_planar_speed, planar_speed

EXIT_OK, EXIT_CONFIG, EXIT_GATE, EXIT_NOCONV, EXIT_AUDIT = 0, 1, 2, 3, 4
SWEEP_AXES = ("a", "nu", "rho", "k", "lz")

log = logging.getLogger("bqwave")


def versions() -> dict:
    return {"bqwave": __version__, "numpy": np.__version__, "scipy": scipy.__version__}


def stamp(cfg: RunConfig) -> dict:
    return {"config_hash": cfg.hash, "versions": versions()}


def csv_stamp(cfg: RunConfig) -> dict:
    return {"config_hash": cfg.hash,
            "versions": ";".join(f"{k}={v}" for k, v in versions().items())}


def output_dir(cfg: RunConfig, config_path=None) -> Path:
    root = os.environ.get("BQ_OUT") or cfg.get("output", "dir")
    name = cfg.get("output", "name")
    if name is None:
        name = Path(config_path).stem if config_path else cfg.hash
    out = Path(root) / str(name)
    out.mkdir(parents=True, exist_ok=True)
    return out


# -- state dumps ---------------------------------------------------------------

def dump_state(path, state: WaveState, grid, cfg: RunConfig):
    ra, fl = grid.ra, grid.flow
    sp = (ra.hx, ra.hy, ra.hz)
    recs = {"T": (state.T.values, sp, (ra.x0, 0.0, 0.0))}
    for i, q in enumerate(state.v.comps, 1):
        recs[f"v{i}"] = (q, sp, (ra.x0, 0.0, 0.0))
    if state.u is not None:
        for i, q in enumerate(state.u.comps, 1):
            recs[f"u{i}"] = (q, sp, (fl.x0, 0.0, 0.0))
    if state.p is not None:
        recs["p"] = (state.p.values, sp, (fl.x0, 0.0, 0.0))
    if state.v_ext is not None:
        for i, q in enumerate(state.v_ext.comps, 1):
            recs[f"w{i}"] = (q, sp, (fl.x0, 0.0, 0.0))
    meta = {"c": state.c, "tau": state.tau, "a": grid.a, "A": grid.A, "nx": grid.nx,
            "converged": state.converged, "config": cfg.merged(), **stamp(cfg)}
    write_bqfl(path, recs, meta)


def load_state(path):
    """Rebuild (state, problem, RunConfig) from a dump."""
    meta, recs = read_bqfl(path)
    cfg = RunConfig(meta["config"], source=str(path))
    cs = cfg.cross_section()
    grid = cfg.grid(cs, a=meta["a"])
    if grid.nx != meta["nx"] or abs(grid.A - meta["A"]) > 1e-12 * grid.A:
        raise FormatError(f"{path}: stored grid does not match its configuration")
    prob = WaveProblem(grid, cfg.physics(), cfg.reaction())
    ra, fl = grid.ra, grid.flow
    try:
        T = ScalarField(ra, recs["T"][0])
        v = VectorField(ra, *(recs[f"v{i}"][0] for i in (1, 2, 3)))
        u = VectorField(fl, *(recs[f"u{i}"][0] for i in (1, 2, 3))) if "u1" in recs else None
        p = ScalarField(fl, recs["p"][0], "cell") if "p" in recs else None
        w = VectorField(fl, *(recs[f"w{i}"][0] for i in (1, 2, 3))) if "w1" in recs else None
    except (KeyError, ValueError) as e:
        raise FormatError(f"{path}: {e}") from e
    st = WaveState(float(meta["c"]), T, v, float(meta["tau"]), grid.a, u=u, p=p,
                   T_ext=extend_temperature(T, grid), v_ext=w,
                   converged=bool(meta["converged"]))
    return st, prob, cfg


# -- solve ---------------------------------------------------------------------

def audit_summary(rep) -> dict:
    return {"passed": rep.passed, "failures": rep.failures(),
            "theta_minus": rep.theta_minus, "branch": rep.branch}


def run_solve(cfg: RunConfig, out: Path) -> tuple[int, dict]:
    """Run one configuration and write its artifacts into ``out``."""
    cs = cfg.cross_section()
    pp = cfg.physics()
    rx = cfg.reaction()
    fpc = cfg.solver()
    slack = float(cfg.get("solver", "slack"))
    cond = evaluate_thinness(cs, pp)
    base = {"condition": cond.as_dict(), **stamp(cfg)}
    if not cond.ok and not fpc.force:
        summary = {**base, "status": "condition violated", "exit": EXIT_GATE}
        write_json(out / "summary.json", summary)
        return EXIT_GATE, summary
    grid = cfg.grid(cs)

    def on_stage(state, prob):
        state.stages[-1]["audit"] = audit_summary(full_audit(state, prob, slack=slack))

    try:
        if fpc.a_schedule:
            states, table = continue_in_a(fpc, grid, pp, rx, on_stage=on_stage)
            state = states[-1]
            grid = cfg.grid(cs, a=state.a)
            if cfg.get("output", "csv"):
                write_csv(out / "continuation.csv", ["a", "c", "cauchy", "converged"],
                          [[r["a"], r["c"], r["cauchy"], r["converged"]] for r in table],
                          csv_stamp(cfg))
        else:
            state = solve_homotopy(fpc, grid, pp, rx, on_stage=on_stage)
    except ConditionViolated as e:
        summary = {**base, "status": "condition violated", "exit": EXIT_GATE,
                   "condition": e.report.as_dict()}
        write_json(out / "summary.json", summary)
        return EXIT_GATE, summary
    write_json(out / "stages.json", {"stages": state.stages, **stamp(cfg)})
    prob = WaveProblem(grid, pp, rx)
    if cfg.get("output", "dump"):
        dump_state(out / "state.bqfl", state, grid, cfg)
    summary = {**base, "c": state.c, "tau": state.tau, "a": state.a,
               "converged": state.converged, "report": state.report}
    if not state.converged or state.tau != fpc.taus[-1]:
        summary.update(status="no convergence", exit=EXIT_NOCONV)
        write_json(out / "summary.json", summary)
        return EXIT_NOCONV, summary
    rep = full_audit(state, prob, slack=slack)
    write_json(out / "audit.json", {**rep.as_dict(), **stamp(cfg)})
    if cfg.get("output", "csv"):
        prof = rep.profiles
        write_csv(out / "profiles.csv", ["x", "M", "m", "mean"],
                  zip(prof["x"], prof["M"], prof["m"], prof["mean"]), csv_stamp(cfg))
    code = EXIT_OK if rep.passed else EXIT_AUDIT
    summary.update(reaction_integral=nonzero_reaction(state, prob),
                   theta_minus=rep.theta_minus, branch=rep.branch,
                   audit_passed=rep.passed, audit_failures=rep.failures(),
                   status="ok" if code == EXIT_OK else "audit failure", exit=code)
    write_json(out / "summary.json", summary)
    return code, summary


# -- sweep ---------------------------------------------------------------------

def sweep_config(raw: dict, axis: str, value: float) -> dict:
    raw = copy.deepcopy(raw)
    geo = raw.setdefault("geometry", {})
    phys = raw.setdefault("physics", {})
    if axis == "a":
        base = RunConfig(raw)
        a0, nx0 = base.get("geometry", "a"), base.get("geometry", "nx")
        nx = int(round(nx0 * value / a0))
        geo.update(a=value, nx=nx + nx % 2)
    elif axis == "nu":
        phys["nu"] = value
    elif axis == "rho":
        r = np.asarray(RunConfig(raw).get("physics", "rho"), dtype=float)
        n = float(np.linalg.norm(r))
        phys["rho"] = (r / n * value).tolist() if n > 0 else [0.0, 0.0, -value]
    elif axis == "k":
        phys["k"] = value
    elif axis == "lz":
        geo["lz"] = value
    else:
        raise ConfigError(f"unknown sweep axis {axis!r}")
    return raw


def _sweep_job(args):
    raw, axis, value, out = args
    row = {"value": value, "c": math.nan, "theta_minus": math.nan,
           "reaction_integral": math.nan, "condition_lhs": math.nan,
           "converged": False, "degenerate": False, "exit": EXIT_CONFIG, "error": ""}
    try:
        cfg = RunConfig(raw, source=f"{axis}={value}").validate()
        row["condition_lhs"] = evaluate_thinness(cfg.cross_section(), cfg.physics()).lhs
        row["degenerate"] = cfg.reaction().k == 0
        out = Path(out)
        out.mkdir(parents=True, exist_ok=True)
        code, summary = run_solve(cfg, out)
        row.update(exit=code, converged=bool(summary.get("converged", False)),
                   c=summary.get("c", math.nan),
                   theta_minus=summary.get("theta_minus") if summary.get("theta_minus")
                   is not None else math.nan,
                   reaction_integral=summary.get("reaction_integral", math.nan),
                   error="" if code == EXIT_OK else summary.get("status", ""))
    except Exception as e:       # recorded per row, the sweep goes on
        row["error"] = f"{type(e).__name__}: {e}".replace(",", ";").replace("\n", " ")
    return row


def run_sweep(cfg: RunConfig, axis: str, values, out: Path, workers: int | None = None):
    jobs = [(sweep_config(cfg.raw, axis, v), axis, v, str(out / f"{axis}={v!r}"))
            for v in values]
    if workers == 1 or len(jobs) == 1:
        rows = [_sweep_job(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            rows = list(ex.map(_sweep_job, jobs))
    cols = ["value", "c", "theta_minus", "reaction_integral", "condition_lhs",
            "converged", "degenerate", "exit", "error"]
    if axis == "a":
        prev = math.nan
        for r in rows:
            r["cauchy"] = abs(r["c"] - prev) if math.isfinite(prev) else math.nan
            prev = r["c"] if r["converged"] else math.nan
        cols.insert(2, "cauchy")
    write_csv(out / "sweep.csv", cols, [[r[k] for k in cols] for r in rows],
              {"axis": axis, **csv_stamp(cfg)})
    return rows


# -- argument handling ---------------------------------------------------------

def _load(path) -> RunConfig:
    return load_config(path).validate()


def cmd_check_condition(args) -> int:
    cfg = _load(args.config)
    rep = evaluate_thinness(cfg.cross_section(), cfg.physics())
    print(to_json({**rep.as_dict(), **stamp(cfg)}))
    return EXIT_OK if rep.ok else EXIT_GATE


def cmd_solve(args) -> int:
    cfg = _load(args.config)
    out = output_dir(cfg, args.config)
    code, summary = run_solve(cfg, out)
    keys = ("status", "c", "tau", "converged", "theta_minus", "branch", "audit_failures")
    print(to_json({k: summary[k] for k in keys if k in summary} | {"output": str(out)}))
    if code == EXIT_GATE:
        print(to_json(summary["condition"]), file=sys.stderr)
    return code


def _parse_values(text: str):
    vals = []
    for tok in text.replace(",", " ").split():
        try:
            vals.append(float(tok))
        except ValueError:
            raise ConfigError(f"sweep value {tok!r} is not a number") from None
    if not vals:
        raise ConfigError("no sweep values given")
    return vals


def cmd_sweep(args) -> int:
    cfg = _load(args.config)
    out = output_dir(cfg, args.config) / f"sweep-{args.axis}"
    out.mkdir(parents=True, exist_ok=True)
    rows = run_sweep(cfg, args.axis, _parse_values(args.values), out, args.workers)
    print(f"{len(rows)} runs, {sum(r['exit'] == 0 for r in rows)} ok -> {out / 'sweep.csv'}")
    return EXIT_OK


def cmd_verify(args) -> int:
    try:
        st, prob, cfg = load_state(args.dump)
    except (OSError, FormatError, KeyError) as e:
        raise ConfigError(f"{args.dump}: cannot read dump ({e})") from e
    slack = args.slack if args.slack is not None else float(cfg.get("solver", "slack"))
    rep = full_audit(st, prob, slack=slack)
    print(to_json({"c": st.c, "tau": st.tau, **audit_summary(rep), **stamp(cfg)}))
    if args.out:
        write_json(args.out, {**rep.as_dict(), **stamp(cfg)})
    return EXIT_OK if rep.passed else EXIT_AUDIT


def cmd_planar(args) -> int:
    if args.config:
        cfg = _load(args.config)
        a = float(cfg.get("geometry", "a"))
        nx = int(cfg.get("geometry", "nx"))
        th0 = float(cfg.get("physics", "theta0"))
    else:
        a, nx, th0 = args.a, args.nx, args.theta0
    if not (a > 0 and 0 < th0 < 1 and nx >= 4 and nx % 2 == 0):
        raise ConfigError("planar needs a > 0, 0 < theta0 < 1 and an even nx >= 4")
    c = planar_speed(a, th0)
    cd = discrete_planar_speed(a, th0, nx)
    print(to_json({"a": a, "theta0": th0, "nx": nx, "c_closed_form": c,
                   "c_discrete": cd, "relative_gap": (cd - c) / c if c else 0.0,
                   "versions": versions()}))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="bqwave", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true", help="log solver progress")
    sub = ap.add_subparsers(dest="command", required=True)
    p = sub.add_parser("check-condition", help="evaluate the thinness condition")
    p.add_argument("config")
    p.set_defaults(func=cmd_check_condition)
    p = sub.add_parser("solve", help="run the homotopy and audit the result")
    p.add_argument("config")
    p.set_defaults(func=cmd_solve)
    p = sub.add_parser("sweep", help="independent runs along one parameter")
    p.add_argument("config")
    p.add_argument("--axis", required=True, choices=SWEEP_AXES)
    p.add_argument("--values", required=True, help="comma or space separated numbers")
    p.add_argument("--workers", type=int, default=None)
    p.set_defaults(func=cmd_sweep)
    p = sub.add_parser("verify", help="re-audit a state dump")
    p.add_argument("dump")
    p.add_argument("--slack", type=float, default=None)
    p.add_argument("--out", default=None, help="write the full audit here")
    p.set_defaults(func=cmd_verify)
    p = sub.add_parser("planar", help="closed-form and discrete planar speeds")
    p.add_argument("config", nargs="?")
    p.add_argument("--a", type=float, default=10.0)
    p.add_argument("--theta0", type=float, default=0.25)
    p.add_argument("--nx", type=int, default=64)
    p.set_defaults(func=cmd_planar)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
