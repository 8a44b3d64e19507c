"""Channel cross-sections and their spectral constants.

A :class:`CrossSection` is a 2D domain discretised on a uniform tensor grid of
cells.  Rectangles fill the whole grid; polygon meshes mask the cells whose
centres fall inside the polygon.  The Poincare constant comes from the first
Dirichlet eigenvalue of the Laplacian, the Poincare-Wirtinger constant from
the first nonzero Neumann eigenvalue.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu
from matplotlib.path import Path


class EigenSolverError(RuntimeError):
    pass


@dataclass(frozen=True)
class CrossSection:
    kind: str
    ly: float
    lz: float
    ny: int
    nz: int
    mask: np.ndarray = field(repr=False, compare=False)
    # "sharp" -> mu1**-0.5 ; "literal" -> mu1**-1
    cpw_convention: str = "sharp"
    # "centroid" or "as-given"
    origin: str = "centroid"
    vertices: tuple | None = None
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def hy(self) -> float:
        return self.ly / self.ny

    @property
    def hz(self) -> float:
        return self.lz / self.nz

    @property
    def y(self) -> np.ndarray:
        return (np.arange(self.ny) + 0.5) * self.hy

    @property
    def z(self) -> np.ndarray:
        return (np.arange(self.nz) + 0.5) * self.hz

    @property
    def weights(self) -> np.ndarray:
        """Cell quadrature weights, zero outside the domain."""
        return self.mask * (self.hy * self.hz)

    @property
    def area(self) -> float:
        if self.kind == "rectangle":
            return self.ly * self.lz
        return float(self.weights.sum())

    @property
    def centroid(self) -> tuple[float, float]:
        w = self.weights
        Y, Z = np.meshgrid(self.y, self.z, indexing="ij")
        return float((w * Y).sum() / w.sum()), float((w * Z).sum() / w.sum())

    @property
    def is_rectangle(self) -> bool:
        return self.kind == "rectangle"


def build_rectangle(ly: float, lz: float, ny: int, nz: int, *,
                    cpw_convention: str = "sharp",
                    origin: str = "centroid") -> CrossSection:
    """Uniform cell grid on (0, ly) x (0, lz)."""
    if not (ly > 0 and lz > 0):
        raise ValueError(f"rectangle sides must be positive, got ({ly}, {lz})")
    if ny < 4 or nz < 4:
        raise ValueError(f"need at least 4 cells per direction, got ({ny}, {nz})")
    _check_conventions(cpw_convention, origin)
    mask = np.ones((ny, nz), dtype=bool)
    return CrossSection("rectangle", float(ly), float(lz), int(ny), int(nz),
                        mask, cpw_convention, origin)


def build_polygon(vertices, ny: int, nz: int, *,
                  cpw_convention: str = "sharp",
                  origin: str = "centroid") -> CrossSection:
    """Embed a polygon in its bounding box and mask cells by centre."""
    verts = np.asarray(vertices, dtype=float)
    if verts.ndim != 2 or verts.shape[1] != 2 or len(verts) < 3:
        raise ValueError("polygon needs at least three (y, z) vertices")
    if ny < 4 or nz < 4:
        raise ValueError(f"need at least 4 cells per direction, got ({ny}, {nz})")
    _check_conventions(cpw_convention, origin)
    lo = verts.min(axis=0)
    verts = verts - lo
    ly, lz = verts.max(axis=0)
    hy, hz = ly / ny, lz / nz
    Y, Z = np.meshgrid((np.arange(ny) + 0.5) * hy, (np.arange(nz) + 0.5) * hz,
                       indexing="ij")
    pts = np.column_stack([Y.ravel(), Z.ravel()])
    mask = Path(verts).contains_points(pts).reshape(ny, nz)
    if mask.sum() < 4:
        raise ValueError("polygon too small for the requested resolution")
    return CrossSection("polygon", float(ly), float(lz), int(ny), int(nz), mask,
                        cpw_convention, origin, tuple(map(tuple, verts)))


def _check_conventions(cpw_convention, origin):
    if cpw_convention not in ("sharp", "literal"):
        raise ValueError(f"unknown cpw_convention {cpw_convention!r}")
    if origin not in ("centroid", "as-given"):
        raise ValueError(f"unknown origin convention {origin!r}")


# -- eigenvalues -------------------------------------------------------------

def _masked_laplacian(cs: CrossSection, bc: str) -> sp.csr_matrix:
    """5-point (-Laplacian) on masked cells.

    Dirichlet neighbours outside the mask use the ghost value -u so the wall
    sits half a cell from the centre; Neumann neighbours drop out.
    """
    ny, nz = cs.ny, cs.nz
    idx = -np.ones((ny, nz), dtype=int)
    idx[cs.mask] = np.arange(cs.mask.sum())
    rows, cols, vals = [], [], []
    diag = np.zeros(cs.mask.sum())
    for (dj, dk, h) in ((1, 0, cs.hy), (-1, 0, cs.hy), (0, 1, cs.hz), (0, -1, cs.hz)):
        for j, k in zip(*np.nonzero(cs.mask)):
            jj, kk = j + dj, k + dk
            me = idx[j, k]
            inside = 0 <= jj < ny and 0 <= kk < nz and cs.mask[jj, kk]
            if inside:
                diag[me] += 1.0 / h**2
                rows.append(me)
                cols.append(idx[jj, kk])
                vals.append(-1.0 / h**2)
            elif bc == "dirichlet":
                diag[me] += 2.0 / h**2
    n = len(diag)
    rows.extend(range(n))
    cols.extend(range(n))
    vals.extend(diag)
    return sp.csr_matrix((vals, (rows, cols)), shape=(n, n))


def inverse_power(A: sp.spmatrix, *, shift: float = 0.0, deflate=None,
                  tol: float = 1e-10, maxiter: int = 10_000) -> float:
    """Smallest eigenvalue of the SPD matrix ``A`` above ``shift``.

    ``deflate`` is a vector spanning a known eigenspace that is projected out
    of every iterate.  The start vector is fixed, so results are reproducible.
    """
    n = A.shape[0]
    lu = splu((A - shift * sp.eye(n)).tocsc())
    x = np.cos(np.linspace(0.3, 2.9, n)) + np.linspace(0.0, 1.0, n) ** 2
    d = None
    if deflate is not None:
        d = deflate / np.linalg.norm(deflate)
        x -= d * (d @ x)
    x /= np.linalg.norm(x)
    lam_old = np.inf
    for _ in range(maxiter):
        y = lu.solve(x)
        if d is not None:
            y -= d * (d @ y)
        y /= np.linalg.norm(y)
        lam = float(y @ (A @ y))
        if abs(lam - lam_old) <= tol * abs(lam):
            return lam
        x, lam_old = y, lam
    raise EigenSolverError(f"inverse power iteration stalled after {maxiter} steps")


def dirichlet_eigenvalue(cs: CrossSection, *, numeric: bool | None = None) -> float:
    if numeric is None:
        numeric = not cs.is_rectangle
    if not numeric:
        return math.pi**2 * (1.0 / cs.ly**2 + 1.0 / cs.lz**2)
    key = "lambda1"
    if key not in cs._cache:
        cs._cache[key] = inverse_power(_masked_laplacian(cs, "dirichlet"))
    return cs._cache[key]


def neumann_eigenvalue(cs: CrossSection, *, numeric: bool | None = None) -> float:
    if numeric is None:
        numeric = not cs.is_rectangle
    if not numeric:
        return math.pi**2 / max(cs.ly, cs.lz) ** 2
    key = "mu1"
    if key not in cs._cache:
        A = _masked_laplacian(cs, "neumann")
        ones = np.ones(A.shape[0])
        # shift below zero keeps the factorisation regular; the constant mode
        # is deflated explicitly
        h2 = min(cs.hy, cs.hz) ** 2
        cs._cache[key] = inverse_power(A, shift=-1.0 / (max(cs.ly, cs.lz) ** 2 + h2),
                                       deflate=ones)
    return cs._cache[key]


def poincare_constant(cs: CrossSection, *, numeric: bool | None = None) -> float:
    """C_P = lambda1**-1/2 for the first Dirichlet eigenvalue."""
    return dirichlet_eigenvalue(cs, numeric=numeric) ** -0.5


def poincare_wirtinger_constant(cs: CrossSection, *, numeric: bool | None = None,
                                convention: str | None = None) -> float:
    mu1 = neumann_eigenvalue(cs, numeric=numeric)
    convention = convention or cs.cpw_convention
    if convention == "sharp":
        return mu1 ** -0.5
    if convention == "literal":
        return 1.0 / mu1
    raise ValueError(f"unknown cpw_convention {convention!r}")


# -- transverse moment and thinness ------------------------------------------

def transverse_moment(cs: CrossSection, rho, *, origin: str | None = None) -> float:
    """Root mean square of rho . (0, y, z) over the cross-section.

    Each cell contributes its exact second moment, so the value is exact for
    rectangles (and any union of grid cells).
    """
    rho = np.asarray(rho, dtype=float)
    origin = origin or cs.origin
    if origin == "centroid":
        y0, z0 = cs.centroid
    elif origin == "as-given":
        y0, z0 = 0.0, 0.0
    else:
        raise ValueError(f"unknown origin convention {origin!r}")
    w = cs.weights
    Y, Z = np.meshgrid(cs.y - y0, cs.z - z0, indexing="ij")
    area = w.sum()
    myy = (w * (Y**2 + cs.hy**2 / 12)).sum() / area
    mzz = (w * (Z**2 + cs.hz**2 / 12)).sum() / area
    myz = (w * Y * Z).sum() / area
    r2, r3 = rho[1], rho[2]
    return math.sqrt(max(r2 * r2 * myy + 2 * r2 * r3 * myz + r3 * r3 * mzz, 0.0))


@dataclass
class PhysParams:
    nu: float
    rho: tuple
    d: int
    theta0: float

    def __post_init__(self):
        self.rho = tuple(float(r) for r in self.rho)
        if not self.nu > 0:
            raise ValueError(f"nu must be positive, got {self.nu}")
        if len(self.rho) != 3:
            raise ValueError("rho must be a 3-vector")
        if self.d not in (0, 1):
            raise ValueError(f"d must be 0 or 1, got {self.d}")
        if not 0 < self.theta0 < 1:
            raise ValueError(f"theta0 must lie in (0, 1), got {self.theta0}")

    @property
    def rho_norm(self) -> float:
        return math.sqrt(sum(r * r for r in self.rho))

    def check_gravity(self) -> bool:
        """Warn when gravity is aligned with the channel axis."""
        if self.rho[2] == 0.0:
            warnings.warn("rho . e3 == 0: gravity has no component along e3",
                          stacklevel=2)
            return False
        return True


@dataclass
class ConditionReport:
    lhs: float
    satisfied: bool
    required: bool
    components: dict

    @property
    def ok(self) -> bool:
        return self.satisfied or not self.required

    def as_dict(self) -> dict:
        return {
            "lhs": self.lhs,
            "satisfied": self.satisfied,
            "required": self.required,
            "status": ("satisfied" if self.satisfied else "violated")
                      if self.required else "condition not required",
            "components": dict(self.components),
        }


def evaluate_thinness(cs: CrossSection, pp: PhysParams, *,
                      numeric: bool | None = None) -> ConditionReport:
    C_P = poincare_constant(cs, numeric=numeric)
    C_PW = poincare_wirtinger_constant(cs, numeric=numeric)
    L = transverse_moment(cs, pp.rho)
    rho = pp.rho_norm
    prefactor = math.sqrt(14.0) * C_P / (pp.nu * math.sqrt(math.pi * pp.nu))
    force = rho * C_PW + L
    lhs = prefactor * math.sqrt(cs.area) * force
    comps = {"C_P": C_P, "C_PW": C_PW, "L": L, "area": cs.area,
             "rho_norm": rho, "nu": pp.nu, "prefactor": prefactor,
             "force_constant": force}
    return ConditionReport(lhs, lhs < 1.0, pp.d == 1, comps)
