"""Reaction-advection-diffusion solves for the temperature on R_a.

The unknowns are the interior axial nodes; the end nodes carry the Dirichlet
values 1 (x = -a) and 0 (x = a), the walls are insulating.  The operator

    L T = -c T_x - Lap T + tau v . grad T + sigma T

is applied matrix-free.  Krylov solves are preconditioned by the exact
inverse of its cross-section average (transverse cosine transform plus one
tridiagonal solve per mode), or optionally by an incomplete LU of the
assembled matrix.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.optimize import brentq
from scipy.sparse.linalg import LinearOperator, gmres, spilu

from .fields import Box, ScalarField, VectorField, advect, dx_centered, laplacian
from .reaction import NonlinearitySpec
from .spectral import BoxSolver


class LinearSolverError(RuntimeError):
    def __init__(self, msg, history=()):
        super().__init__(msg)
        self.history = list(history)


def assemble_by_probing(matvec, shape) -> sp.csr_matrix:
    """Sparse matrix of a 7-point stencil operator from seven products.

    Colouring by (i + 2j + 3k) mod 7 separates every stencil neighbour, so a
    probe of each colour recovers the matrix exactly.
    """
    I, J, K = np.indices(shape)
    colour = ((I + 2 * J + 3 * K) % 7).ravel()
    n = colour.size
    flat = np.arange(n).reshape(shape)
    padded = np.pad(flat, 1, constant_values=-1)
    rows, cols, vals = [], [], []
    offsets = [(0, 0, 0), (1, 0, 0), (-1, 0, 0), (0, 1, 0), (0, -1, 0),
               (0, 0, 1), (0, 0, -1)]
    for col in range(7):
        probe = (colour == col).astype(float)
        out = matvec(probe)
        for di, dj, dk in offsets:
            nb = padded[1 + di:1 + di + shape[0], 1 + dj:1 + dj + shape[1],
                        1 + dk:1 + dk + shape[2]].ravel()
            ok = nb >= 0
            # row r gets column nb when nb has this colour
            sel = ok & (colour[np.where(ok, nb, 0)] == col)
            r = np.nonzero(sel)[0]
            rows.append(r)
            cols.append(nb[r])
            vals.append(out[r])
    A = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                      shape=(n, n))
    A.sum_duplicates()
    return A


class TemperatureOperator:
    """Matrix-free L on a node scalar, see the module docstring."""

    def __init__(self, box: Box, c: float, v: VectorField | None = None,
                 tau: float = 0.0, sigma=None, scheme: str = "centered"):
        self.box = box
        self.c = float(c)
        self.v = v
        self.tau = float(tau)
        self.sigma = sigma
        self.scheme = scheme
        self.ishape = (box.nx - 1, box.ny, box.nz)
        self.n = int(np.prod(self.ishape))

    def apply(self, T: np.ndarray) -> np.ndarray:
        """L T at interior nodes for a full node array (ends used as data)."""
        b = self.box
        sf = ScalarField(b, T, "node")
        out = -self.c * dx_centered(T, b.hx)
        out -= laplacian(sf, "dirichlet-axial+neumann-lateral").values
        if self.v is not None and self.tau != 0.0:
            out += self.tau * advect(self.v, sf, self.scheme).values
        if self.sigma is not None:
            out += self.sigma * T
        return out[1:-1]

    def full(self, x, left=0.0, right=0.0) -> np.ndarray:
        T = np.empty(self.box.shape("node"))
        T[1:-1] = np.reshape(x, self.ishape)
        T[0] = left
        T[-1] = right
        return T

    def matvec(self, x):
        return self.apply(self.full(x)).ravel()

    def spectral_preconditioner(self) -> BoxSolver:
        b = self.box
        conv = -self.c * np.ones(b.nx - 1)
        if self.v is not None and self.tau != 0.0:
            conv = conv + self.tau * self.v.u1[1:-1].mean(axis=(1, 2))
        shift = 0.0
        if self.sigma is not None:
            shift = np.broadcast_to(self.sigma, b.shape("node"))[1:-1].mean(axis=(1, 2))
        return BoxSolver(b.nx - 1, b.hx, b.ny, b.hy, b.nz, b.hz, axial="dirichlet-node",
                         transverse=("neumann", "neumann"), conv=conv, shift=shift)

    def solve(self, rhs: np.ndarray, *, x0=None, precond: str = "spectral",
              rtol: float = 1e-12, atol: float = 0.0, maxiter: int = 8) -> np.ndarray:
        """Solve L x = rhs for the interior unknowns (homogeneous ends)."""
        A = LinearOperator((self.n, self.n), matvec=self.matvec, dtype=float)
        if precond == "spectral":
            P = self.spectral_preconditioner()
            M = LinearOperator((self.n, self.n), dtype=float,
                               matvec=lambda r: P.solve(r.reshape(self.ishape)).ravel())
        elif precond == "ilu":
            ilu = spilu(assemble_by_probing(self.matvec, self.ishape).tocsc(),
                        drop_tol=1e-5, fill_factor=20)
            M = LinearOperator((self.n, self.n), matvec=ilu.solve, dtype=float)
        elif precond == "none":
            M = None
        else:
            raise ValueError(f"unknown preconditioner {precond!r}")
        b = np.ravel(rhs)
        bn = np.linalg.norm(b)
        if bn <= atol or bn == 0.0:
            return np.zeros(self.ishape)
        hist = []
        x, info = gmres(A, b, x0=None if x0 is None else np.ravel(x0), rtol=rtol, atol=atol,
                        restart=60, maxiter=maxiter, M=M,
                        callback=hist.append, callback_type="pr_norm")
        res = np.linalg.norm(b - A.matvec(x)) / bn
        if info != 0 and res * bn > 100 * max(rtol * bn, atol):
            raise LinearSolverError(f"temperature GMRES stalled at relative residual {res:.3e}",
                                    hist)
        return x.reshape(self.ishape)


@dataclass
class TemperatureProblem:
    box: Box
    c: float
    spec: NonlinearitySpec
    tau: float = 0.0
    v: VectorField | None = None
    Z: ScalarField | None = None
    scheme: str = "centered"
    precond: str = "spectral"
    rtol: float = 1e-12
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        if not 0.0 <= self.tau <= 1.0:
            raise ValueError(f"tau must lie in [0, 1], got {self.tau}")
        if not math.isfinite(self.c):
            raise ValueError("wave speed must be finite")
        if self.v is not None:
            if self.v.box != self.box:
                raise ValueError("velocity must be given on R_a")
            if not all(np.all(np.isfinite(u)) for u in self.v.comps):
                raise ValueError("non-finite velocity")


def boundary_lift(box: Box) -> np.ndarray:
    T = np.zeros(box.shape("node"))
    T[0] = 1.0
    return T


def solve_temperature(prob: TemperatureProblem) -> ScalarField:
    """Solve the linear problem with the reaction frozen at Z."""
    box = prob.box
    op = TemperatureOperator(box, prob.c, prob.v, prob.tau, scheme=prob.scheme)
    rhs = np.zeros(op.ishape)
    if prob.tau != 0.0 and prob.Z is not None:
        rhs += prob.tau * np.asarray(prob.spec(prob.Z.values[1:-1]))
    lift = boundary_lift(box)
    rhs -= op.apply(lift)
    x = op.solve(rhs, precond=prob.precond, rtol=prob.rtol)
    T = op.full(x, 1.0, 0.0)
    return ScalarField(box, T, "node")


# -- planar reference --------------------------------------------------------

def planar_profile(c: float, a: float):
    """x -> (e^{-cx} - e^{-ca}) / (e^{ca} - e^{-ca}), overflow-safe."""
    c = float(c)
    a = float(a)

    def T(x):
        x = np.asarray(x, dtype=float)
        if abs(c) * a < 1e-12:
            return (a - x) / (2 * a)
        if c < 0:
            return 1.0 - planar_profile(-c, a)(-x)
        # e^{-c(x+a)} (1 - e^{-c(a-x)}) / (1 - e^{-2ca})
        return np.exp(-c * (x + a)) * (-np.expm1(-c * (a - x))) / (-np.expm1(-2 * c * a))

    return T


def planar_speed(a: float, theta0: float) -> float:
    """c with planar_profile(c, a)(0) = theta0, i.e. 1 / (e^{ca} + 1) = theta0."""
    return math.log(1.0 / theta0 - 1.0) / a


def discrete_planar(c: float, a: float, nx: int) -> np.ndarray:
    """Node values of the centred finite-difference planar problem."""
    h = 2 * a / nx
    n = nx - 1
    lo = -1 / h**2 + c / (2 * h)
    up = -1 / h**2 - c / (2 * h)
    A = sp.diags([np.full(n - 1, lo), np.full(n, 2 / h**2), np.full(n - 1, up)],
                 [-1, 0, 1], format="csc")
    rhs = np.zeros(n)
    rhs[0] = -lo
    T = np.empty(nx + 1)
    T[0], T[-1] = 1.0, 0.0
    T[1:-1] = sp.linalg.spsolve(A, rhs)
    return T


def discrete_planar_speed(a: float, theta0: float, nx: int) -> float:
    """Root of the discrete normalisation in 1D (the value at x = 0 is the max
    over [0, a] since the profile decreases)."""
    g = lambda c: discrete_planar(c, a, nx)[nx // 2] - theta0
    c0 = planar_speed(a, theta0)
    lo, hi = c0 - 0.5 * abs(c0) - 1e-3, c0 + 0.5 * abs(c0) + 1e-3
    return brentq(g, lo, hi, xtol=1e-15, rtol=1e-14)


def normalization_gap(T: ScalarField, theta0: float) -> float:
    """max over the nodes with x >= 0 of T, minus theta0."""
    return float(T.values[T.box.nx // 2:].max()) - theta0


def normalization_argmax(T: ScalarField) -> tuple:
    """First (lexicographic) node realising the max over x >= 0."""
    half = T.values[T.box.nx // 2:]
    i, j, k = np.unravel_index(int(np.argmax(half)), half.shape)
    return (int(i) + T.box.nx // 2, int(j), int(k))
