"""Stationary flow in the moving frame on the truncated channel.

    -c u_x - nu Lap u + tau d w . grad u + grad p = tau T rho,   div u = 0,

with u = 0 on the walls and at x = +-A.  The saddle-point system is reduced
to the pressure Schur complement S = D A^{-1} G, solved by GMRES.  For d = 0
the momentum operator A has constant coefficients and is inverted exactly by
transverse sine transforms and axial tridiagonal sweeps; for d = 1 that
inverse preconditions an inner GMRES.  S itself is preconditioned by the
cross-section-mean split: -nu on transverse pressure modes, and the inverse of
the 1D Poiseuille operator on the cross-mean.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.fft as sfft
from scipy.sparse.linalg import LinearOperator, gmres

from .fields import (Box, ScalarField, VectorField, advect_vector, divergence, gradient,
                     node_gradient, vector_laplacian)
from .geometry import PhysParams
from .spectral import BoxSolver, from_modes, to_modes, transverse_eigenvalues
from .temperature import LinearSolverError


class PecletWarning(UserWarning):
    pass


@dataclass
class FlowProblem:
    box: Box
    c: float
    tau: float
    d: int
    T: ScalarField
    params: PhysParams
    w: VectorField | None = None
    scheme: str = "auto"
    rtol: float = 1e-13
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.T.box != self.box or self.T.loc != "node":
            raise ValueError("temperature must be a node field on the flow box")
        if self.d not in (0, 1):
            raise ValueError(f"d must be 0 or 1, got {self.d}")
        if self.d == 1 and self.w is None:
            raise ValueError("d = 1 needs an advecting velocity")
        if self.w is not None:
            if self.w.box != self.box:
                raise ValueError("advecting velocity must live on the flow box")
            if not self.w.is_solenoidal(1e-8):
                raise ValueError("advecting velocity is not discretely solenoidal")

    @property
    def advecting(self) -> bool:
        return self.d == 1 and self.tau != 0.0

    def resolve_scheme(self) -> str:
        """Centred advection unless the cell Peclet number exceeds 2."""
        if not self.advecting:
            return "centered"
        pe = self.tau * self.w.max_speed() * max(self.box.spacings) / self.params.nu
        self.info["cell_peclet"] = pe
        if self.scheme == "auto":
            s = "upwind" if pe > 2.0 else "centered"
        else:
            s = self.scheme
            if s == "centered" and pe > 2.0:
                warnings.warn(f"cell Peclet number {pe:.3g} > 2 with centred advection",
                              PecletWarning, stacklevel=2)
        self.info["advection_scheme"] = s
        return s


def buoyancy(T: ScalarField, rho, tau: float = 1.0) -> VectorField:
    """tau T rho sampled on the velocity faces."""
    b = T.box
    t = T.values
    t2 = 0.5 * (t[1:] + t[:-1])                       # cells
    f2 = np.zeros(b.shape("u2"))
    f2[:, 1:-1] = 0.5 * (t2[:, 1:] + t2[:, :-1])
    f3 = np.zeros(b.shape("u3"))
    f3[:, :, 1:-1] = 0.5 * (t2[:, :, 1:] + t2[:, :, :-1])
    f1 = t.copy()
    f1[[0, -1]] = 0.0
    return VectorField(b, tau * rho[0] * f1, tau * rho[1] * f2, tau * rho[2] * f3)


def _dx_faces(q, h):
    out = np.zeros_like(q)
    out[1:-1] = (q[2:] - q[:-2]) / (2 * h)
    return out


def _dx_cells(q, h):
    g = np.pad(q, ((1, 1), (0, 0), (0, 0)))
    g[0] = -q[0]
    g[-1] = -q[-1]
    return (g[2:] - g[:-2]) / (2 * h)


def momentum(u: VectorField, c, nu, tau_d=0.0, w=None, scheme="centered") -> VectorField:
    """-c u_x - nu Lap u + tau_d (w . grad) u on the MAC layout.

    Values on boundary faces are returned as zero.
    """
    b = u.box
    lap = vector_laplacian(u)
    out = [-c * _dx_faces(u.u1, b.hx) - nu * lap.u1,
           -c * _dx_cells(u.u2, b.hx) - nu * lap.u2,
           -c * _dx_cells(u.u3, b.hx) - nu * lap.u3]
    if tau_d != 0.0 and w is not None:
        adv = advect_vector(w, u, scheme)
        out = [o + tau_d * a for o, a in zip(out, adv.comps)]
    out[1][:, [0, -1]] = 0.0
    out[2][:, :, [0, -1]] = 0.0
    out[0][[0, -1]] = 0.0
    return VectorField(b, *out)


class _Interior:
    """Packing of the interior face unknowns of a MAC field."""

    def __init__(self, box: Box):
        self.box = box
        nx, ny, nz = box.nx, box.ny, box.nz
        self.shapes = [(nx - 1, ny, nz), (nx, ny - 1, nz), (nx, ny, nz - 1)]
        self.sizes = [int(np.prod(s)) for s in self.shapes]
        self.n = sum(self.sizes)

    def pack(self, vf: VectorField) -> np.ndarray:
        return np.concatenate([vf.u1[1:-1].ravel(), vf.u2[:, 1:-1].ravel(),
                               vf.u3[:, :, 1:-1].ravel()])

    def split(self, x):
        i1, i2 = self.sizes[0], self.sizes[0] + self.sizes[1]
        return (x[:i1].reshape(self.shapes[0]), x[i1:i2].reshape(self.shapes[1]),
                x[i2:].reshape(self.shapes[2]))

    def unpack(self, x) -> VectorField:
        a, b_, c = self.split(x)
        vf = VectorField.zeros(self.box)
        vf.u1[1:-1] = a
        vf.u2[:, 1:-1] = b_
        vf.u3[:, :, 1:-1] = c
        return vf


class StokesSolver:
    """Reusable solver for one (box, c, nu, advecting field) combination."""

    def __init__(self, box: Box, c: float, nu: float, *, tau_d: float = 0.0,
                 w: VectorField | None = None, scheme: str = "centered",
                 rtol: float = 1e-13):
        self.box = box
        self.c = float(c)
        self.nu = float(nu)
        self.tau_d = float(tau_d)
        self.w = w
        self.scheme = scheme
        self.rtol = rtol
        self.pack = _Interior(box)
        b = box
        conv = -self.c
        kw = dict(nu=self.nu, conv=conv)
        self.fast = [
            BoxSolver(b.nx - 1, b.hx, b.ny, b.hy, b.nz, b.hz, axial="dirichlet-node",
                      transverse=("dirichlet-cell", "dirichlet-cell"), **kw),
            BoxSolver(b.nx, b.hx, b.ny, b.hy, b.nz, b.hz, axial="dirichlet-cell",
                      transverse=("dirichlet-face", "dirichlet-cell"), **kw),
            BoxSolver(b.nx, b.hx, b.ny, b.hy, b.nz, b.hz, axial="dirichlet-cell",
                      transverse=("dirichlet-cell", "dirichlet-face"), **kw),
        ]
        self.stats = {"schur_iterations": 0, "momentum_iterations": 0}
        self._kappa = self._poiseuille_coefficient()
        self._K = transverse_eigenvalues("neumann", b.nx, b.hx)

    # momentum
    def _fast_inverse(self, x):
        r = self.pack.split(x)
        return np.concatenate([s.solve(ri).ravel() for s, ri in zip(self.fast, r)])

    def _apply_A(self, x):
        u = self.pack.unpack(x)
        return self.pack.pack(momentum(u, self.c, self.nu, self.tau_d, self.w, self.scheme))

    def solve_momentum(self, rhs: np.ndarray) -> np.ndarray:
        if self.tau_d == 0.0 or self.w is None:
            return self._fast_inverse(rhs)
        n = self.pack.n
        A = LinearOperator((n, n), matvec=self._apply_A, dtype=float)
        M = LinearOperator((n, n), matvec=self._fast_inverse, dtype=float)
        count = [0]

        def cb(_):
            count[0] += 1

        x, info = gmres(A, rhs, rtol=1e-13, atol=0.0, restart=40, maxiter=50, M=M,
                        callback=cb, callback_type="pr_norm")
        self.stats["momentum_iterations"] += count[0]
        bn = np.linalg.norm(rhs)
        if bn > 0:
            res = np.linalg.norm(rhs - A.matvec(x)) / bn
            if res > 1e-10:
                raise LinearSolverError(f"momentum GMRES stalled at {res:.3e}")
        return x

    # Schur complement on the pressure
    def _poiseuille_coefficient(self) -> float:
        b = self.box
        kinds = ("dirichlet-cell", "dirichlet-cell")
        ly = transverse_eigenvalues(kinds[0], b.ny, b.hy)
        lz = transverse_eigenvalues(kinds[1], b.nz, b.hz)
        one = np.ones((1, b.ny, b.nz))
        wm = from_modes(to_modes(one, kinds) / (ly[:, None] + lz[None, :])[None], kinds)
        return float(wm.mean()) / self.nu

    def _schur_precond(self, p):
        b = self.box
        p = p.reshape(b.shape("cell"))
        pm = p.mean(axis=(1, 2))
        out = -self.nu * (p - pm[:, None, None])
        mh = sfft.dct(pm, type=2, norm="ortho")
        lam = self._kappa * self._K
        mh[1:] = -mh[1:] / lam[1:]
        mh[0] = 0.0
        out += sfft.idct(mh, type=2, norm="ortho")[:, None, None]
        return out.ravel()

    def _grad(self, p):
        return self.pack.pack(gradient(ScalarField(self.box, p.reshape(self.box.shape("cell")),
                                                   "cell")))

    def _div(self, x):
        return divergence(self.pack.unpack(x)).values.ravel()

    def solve(self, F: VectorField):
        """(u, p) for momentum forcing F; p has zero mean."""
        b = self.box
        f = self.pack.pack(F)
        g = self._div(self.solve_momentum(f))
        np_ = int(np.prod(b.shape("cell")))
        count = [0]

        def S(p):
            p = p - p.mean()
            return self._div(self.solve_momentum(self._grad(p)))

        def cb(_):
            count[0] += 1

        gn = np.linalg.norm(g)
        if gn > 1e-300 * max(np.linalg.norm(f), 1.0):
            Sop = LinearOperator((np_, np_), matvec=S, dtype=float)
            M = LinearOperator((np_, np_), matvec=self._schur_precond, dtype=float)
            p, info = gmres(Sop, g, rtol=self.rtol, atol=0.0, restart=80, maxiter=10,
                            M=M, callback=cb, callback_type="pr_norm")
            res = np.linalg.norm(g - S(p)) / gn
            if info != 0 and res > 100 * self.rtol:
                raise LinearSolverError(f"pressure iteration stalled at {res:.3e}")
        else:
            p = np.zeros(np_)
        p = p - p.mean()
        self.stats["schur_iterations"] += count[0]
        u = self.pack.unpack(self.solve_momentum(f - self._grad(p)))
        return u, ScalarField(b, p.reshape(b.shape("cell")), "cell")


def solve_flow(prob: FlowProblem, solver: StokesSolver | None = None):
    """Velocity and zero-mean pressure for a flow problem."""
    scheme = prob.resolve_scheme()
    tau_d = prob.tau * prob.d
    if solver is None:
        solver = StokesSolver(prob.box, prob.c, prob.params.nu, tau_d=tau_d,
                              w=prob.w if prob.advecting else None, scheme=scheme,
                              rtol=prob.rtol)
    F = buoyancy(prob.T, prob.params.rho, prob.tau)
    u, p = solver.solve(F)
    prob.info.update(solver.stats)
    return u, p


def flow_residual(u: VectorField, p: ScalarField, prob: FlowProblem) -> float:
    """max |momentum residual| / max(|forcing|, tiny) + max |div u| h / max|u|."""
    scheme = prob.info.get("advection_scheme", "centered")
    r = momentum(u, prob.c, prob.params.nu, prob.tau * prob.d, prob.w, scheme)
    r = r + gradient(p) - buoyancy(prob.T, prob.params.rho, prob.tau)
    r = VectorField(r.box, *r.comps)
    r.u1[[0, -1]] = 0.0
    r.u2[:, [0, -1]] = 0.0
    r.u3[:, :, [0, -1]] = 0.0
    return r.max_speed() + float(np.abs(divergence(u).values).max())


# -- force potential ---------------------------------------------------------

def _section_origin(cs):
    return cs.centroid if cs.origin == "centroid" else (0.0, 0.0)


def potential_q(T: ScalarField, rho, cs=None) -> ScalarField:
    """q = rho_1 int_0^x mean T + rho . (0, y, z) mean T(x), at the nodes.

    The axial integral is the trapezoid rule anchored at the node x = 0 (or the
    first node if 0 is not on the grid).
    """
    b = T.box
    cs = cs or b.cs
    rho = np.asarray(rho, dtype=float)
    m = T.values.mean(axis=(1, 2))
    cum = np.concatenate([[0.0], np.cumsum(0.5 * (m[1:] + m[:-1]) * b.hx)])
    i0 = int(np.argmin(np.abs(b.xn)))
    cum -= cum[i0]
    y0, z0 = _section_origin(cs)
    Y = (cs.y - y0)[None, :, None]
    Z = (cs.z - z0)[None, None, :]
    q = rho[0] * cum[:, None, None] + (rho[1] * Y + rho[2] * Z) * m[:, None, None]
    return ScalarField(b, q, "node")


def force_residual(T: ScalarField, rho, cs=None):
    """Components of T rho - grad q: axial at cells, transverse at nodes."""
    b = T.box
    rho = np.asarray(rho, dtype=float)
    q = potential_q(T, rho, cs).values
    t = T.values
    r1 = rho[0] * 0.5 * (t[1:] + t[:-1]) - np.diff(q, axis=0) / b.hx
    dev = t - t.mean(axis=(1, 2), keepdims=True)
    return r1, rho[1] * dev, rho[2] * dev


def force_residual_norm(T: ScalarField, rho, cs=None) -> float:
    b = T.box
    r1, r2, r3 = force_residual(T, rho, cs)
    return math.sqrt(b.vol * float((r1**2).sum() + (r2**2).sum() + (r3**2).sum()))


def grad_norm_node(T: ScalarField) -> float:
    """Discrete L2 norm of grad T for a node scalar."""
    b = T.box
    tx, ty, tz = node_gradient(T)
    return math.sqrt(b.vol * float((tx**2).sum() + (ty**2).sum() + (tz**2).sum()))
