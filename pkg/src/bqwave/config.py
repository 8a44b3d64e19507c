"""Run configuration: flat ``section.key = value`` text or a JSON mirror.

Values are parsed as JSON when possible (numbers, lists, true/false, quoted
strings) and kept as bare strings otherwise.  Blank lines and lines starting
with '#' are ignored.  Every error names the offending line.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

from .fields import AxialGrid, make_grid
from .fixedpoint import FixedPointConfig
from .geometry import CrossSection, PhysParams, build_polygon, build_rectangle
from .io import config_hash
from .reaction import NonlinearitySpec


class ConfigError(ValueError):
    pass


DEFAULTS = {
    "geometry": {"kind": "rectangle", "ly": 0.5, "lz": 0.5, "ny": 24, "nz": 24,
                 "vertices": None, "origin": "centroid", "cpw_convention": "sharp",
                 "a": 20.0, "nx": 128, "A": None},
    "physics": {"nu": 1.0, "rho": [0.0, 0.0, -1.0], "d": 0, "theta0": 0.25,
                "reaction": "hat", "k": 4.0},
    "solver": {"omega": None, "taus": [0.0, 0.25, 0.5, 0.75, 1.0], "a_schedule": [],
               "tol": 1e-9, "max_iter": 60, "n_ext": 8, "flow_factor": 1.0,
               "scheme": "newton", "newton_tol": 1e-11, "advection": "auto",
               "precond": "spectral", "slack": 0.05, "force": False},
    "output": {"dir": "runs", "name": None, "dump": True, "csv": True},
}


def parse_text(text: str, source: str = "<config>") -> tuple[dict, dict]:
    """Flat key/value text -> (nested dict, {dotted key: line number})."""
    out: dict = {}
    lines: dict = {}
    for n, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{n}: expected 'section.key = value', got {raw!r}")
        key, _, val = (s.strip() for s in line.partition("="))
        parts = key.split(".")
        if len(parts) != 2 or not all(parts):
            raise ConfigError(f"{source}:{n}: key {key!r} must look like section.key")
        sec, name = parts
        if sec not in DEFAULTS:
            raise ConfigError(f"{source}:{n}: unknown section {sec!r}")
        if name not in DEFAULTS[sec]:
            raise ConfigError(f"{source}:{n}: unknown key {key!r}")
        if key in lines:
            raise ConfigError(f"{source}:{n}: duplicate key {key!r} (first on line {lines[key]})")
        try:
            value = json.loads(val)
        except json.JSONDecodeError:
            value = val
        out.setdefault(sec, {})[name] = value
        lines[key] = n
    return out, lines


def parse_json(text: str, source: str = "<config>") -> tuple[dict, dict]:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"{source}:{e.lineno}: {e.msg}") from e
    if not isinstance(data, dict):
        raise ConfigError(f"{source}:1: top level must be an object")
    for sec, body in data.items():
        if sec not in DEFAULTS or not isinstance(body, dict):
            raise ConfigError(f"{source}: unknown or malformed section {sec!r}")
        for k in body:
            if k not in DEFAULTS[sec]:
                raise ConfigError(f"{source}: unknown key {sec}.{k}")
    return data, {}


@dataclass
class RunConfig:
    raw: dict
    lines: dict = field(default_factory=dict)
    source: str = "<config>"

    def get(self, sec, key):
        return self.raw.get(sec, {}).get(key, DEFAULTS[sec][key])

    def merged(self) -> dict:
        return {sec: {k: self.get(sec, k) for k in DEFAULTS[sec]} for sec in DEFAULTS}

    @property
    def hash(self) -> str:
        return config_hash(self.merged())

    def _err(self, sec, key, msg):
        ln = self.lines.get(f"{sec}.{key}")
        where = f"{self.source}:{ln}" if ln else self.source
        return ConfigError(f"{where}: {sec}.{key}: {msg}")

    def _num(self, sec, key, kind=float):
        v = self.get(sec, key)
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise self._err(sec, key, f"expected a number, got {v!r}")
        if kind is int:
            if int(v) != v:
                raise self._err(sec, key, f"expected an integer, got {v!r}")
            return int(v)
        if not math.isfinite(v):
            raise self._err(sec, key, "must be finite")
        return float(v)

    # builders; each wraps validation errors with the line of the key
    def cross_section(self) -> CrossSection:
        kind = self.get("geometry", "kind")
        opts = dict(cpw_convention=self.get("geometry", "cpw_convention"),
                    origin=self.get("geometry", "origin"))
        try:
            if kind == "rectangle":
                return build_rectangle(self._num("geometry", "ly"), self._num("geometry", "lz"),
                                       self._num("geometry", "ny", int),
                                       self._num("geometry", "nz", int), **opts)
            if kind == "polygon":
                return build_polygon(self.get("geometry", "vertices"),
                                     self._num("geometry", "ny", int),
                                     self._num("geometry", "nz", int), **opts)
        except ConfigError:
            raise
        except ValueError as e:
            raise self._err("geometry", "kind", str(e)) from e
        raise self._err("geometry", "kind", f"unknown geometry kind {kind!r}")

    def physics(self) -> PhysParams:
        rho = self.get("physics", "rho")
        if not (isinstance(rho, list) and len(rho) == 3):
            raise self._err("physics", "rho", "expected a list of three numbers")
        try:
            return PhysParams(self._num("physics", "nu"), tuple(float(r) for r in rho),
                              self._num("physics", "d", int), self._num("physics", "theta0"))
        except ConfigError:
            raise
        except (TypeError, ValueError) as e:
            raise self._err("physics", "nu", str(e)) from e

    def reaction(self) -> NonlinearitySpec:
        try:
            return NonlinearitySpec(self.get("physics", "reaction"), self._num("physics", "k"),
                                    self._num("physics", "theta0"))
        except ConfigError:
            raise
        except ValueError as e:
            raise self._err("physics", "reaction", str(e)) from e

    def solver(self) -> FixedPointConfig:
        s = {k: self.get("solver", k) for k in DEFAULTS["solver"]}
        try:
            return FixedPointConfig(omega=s["omega"], taus=tuple(s["taus"]),
                                    a_schedule=tuple(s["a_schedule"]), tol=float(s["tol"]),
                                    max_iter=int(s["max_iter"]), n_ext=int(s["n_ext"]),
                                    flow_factor=float(s["flow_factor"]), scheme=s["scheme"],
                                    newton_tol=float(s["newton_tol"]),
                                    advection=s["advection"], precond=s["precond"],
                                    force=bool(s["force"]))
        except (TypeError, ValueError) as e:
            raise ConfigError(f"{self.source}: solver: {e}") from e

    def grid(self, cs: CrossSection | None = None, a: float | None = None) -> AxialGrid:
        cs = cs or self.cross_section()
        a0 = self._num("geometry", "a")
        nx0 = self._num("geometry", "nx", int)
        A = self.get("geometry", "A")
        if a is not None and a != a0:
            # keep the axial spacing when only the half-length changes
            nx = int(round(nx0 * a / a0))
            nx += nx % 2
            A = None if A is None else float(A) - a0 + a
        else:
            a, nx = a0, nx0
        try:
            return make_grid(a, nx, cs, None if A is None else float(A),
                             factor=float(self.get("solver", "flow_factor")))
        except ValueError as e:
            raise self._err("geometry", "nx", str(e)) from e

    def validate(self):
        """Build every component once so that errors surface before a solve."""
        cs = self.cross_section()
        self.physics()
        self.reaction()
        self.solver()
        if cs.is_rectangle:
            self.grid(cs)
        slack = self.get("solver", "slack")
        if not isinstance(slack, (int, float)) or slack < 0:
            raise self._err("solver", "slack", "must be a non-negative number")
        return self


def load_config(path) -> RunConfig:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as e:
        raise ConfigError(f"{path}: cannot read ({e.strerror})") from e
    if text.lstrip().startswith("{"):
        raw, lines = parse_json(text, str(path))
    else:
        raw, lines = parse_text(text, str(path))
    return RunConfig(raw, lines, str(path))


def dump_text(raw: dict) -> str:
    """Inverse of parse_text for the keys present in ``raw``."""
    from .io import to_json
    out = []
    for sec in DEFAULTS:
        for k in DEFAULTS[sec]:
            if k in raw.get(sec, {}):
                out.append(f"{sec}.{k} = {to_json(raw[sec][k])}")
    return "\n".join(out) + "\n"
