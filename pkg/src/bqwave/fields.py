"""Staggered grids on truncated channels and the discrete operators on them.

Layout on a box [x0, x0 + nx hx] x (0, ly) x (0, lz) with a rectangular
cross-section of ny x nz cells:

* pressure-like scalars live at cell centres, shape (nx, ny, nz);
* temperature-like scalars live on the x-faces (axial nodes) crossed with the
  cross-section cells, shape (nx + 1, ny, nz), so the end values sit exactly
  on x = x0 and x = x0 + nx hx;
* velocities use the MAC layout: u1 on x-faces, u2 on y-faces, u3 on z-faces.

No-slip walls are imposed by ghost reflection for the tangential components
and by storing zeros on the wall faces for the normal ones.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import CrossSection, poincare_constant
from .spectral import neumann_poisson


class GridMismatch(ValueError):
    pass


@dataclass(frozen=True)
class Box:
    x0: float
    hx: float
    nx: int
    cs: CrossSection

    @property
    def ny(self):
        return self.cs.ny

    @property
    def nz(self):
        return self.cs.nz

    @property
    def hy(self):
        return self.cs.hy

    @property
    def hz(self):
        return self.cs.hz

    @property
    def spacings(self):
        return (self.hx, self.hy, self.hz)

    @property
    def vol(self):
        return self.hx * self.hy * self.hz

    @property
    def xn(self) -> np.ndarray:
        """Axial node (x-face) positions."""
        return self.x0 + self.hx * np.arange(self.nx + 1)

    @property
    def xc(self) -> np.ndarray:
        return self.x0 + self.hx * (np.arange(self.nx) + 0.5)

    @property
    def yf(self):
        return self.hy * np.arange(self.ny + 1)

    @property
    def zf(self):
        return self.hz * np.arange(self.nz + 1)

    def shape(self, loc: str):
        nx, ny, nz = self.nx, self.ny, self.nz
        return {"cell": (nx, ny, nz), "node": (nx + 1, ny, nz),
                "u1": (nx + 1, ny, nz), "u2": (nx, ny + 1, nz),
                "u3": (nx, ny, nz + 1)}[loc]

    def coords(self, loc: str):
        """Broadcastable (x, y, z) coordinate arrays for a location tag."""
        x = self.xn if loc in ("node", "u1") else self.xc
        y = self.yf if loc == "u2" else self.cs.y
        z = self.zf if loc == "u3" else self.cs.z
        return x[:, None, None], y[None, :, None], z[None, None, :]


@dataclass(frozen=True)
class AxialGrid:
    """Temperature box R_a = [-a, a] x section inside a longer flow box.

    Both boxes share the axial spacing; the flow box has ``m`` extra cells on
    each side, so flow node ``i + m`` coincides with temperature node ``i``.
    """

    a: float
    nx: int
    cs: CrossSection
    A: float
    m: int

    @property
    def hx(self):
        return 2.0 * self.a / self.nx

    @property
    def ra(self) -> Box:
        return Box(-self.a, self.hx, self.nx, self.cs)

    @property
    def flow(self) -> Box:
        return Box(-self.A, self.hx, self.nx + 2 * self.m, self.cs)


def make_grid(a: float, nx: int, cs: CrossSection, A: float | None = None, *,
              factor: float = 1.0) -> AxialGrid:
    """Build the nested grids.

    ``nx`` must be even so that x = 0 is a node.  ``A`` defaults to
    a + factor * max(4, 8 C_P) and is rounded up to a whole number of cells.
    """
    if not a > 0:
        raise ValueError(f"half-length a must be positive, got {a}")
    if nx < 4 or nx % 2:
        raise ValueError(f"nx must be an even integer >= 4, got {nx}")
    if not cs.is_rectangle:
        raise ValueError("the field solvers support rectangular sections only")
    if A is None:
        A = a + factor * max(4.0, 8.0 * poincare_constant(cs))
    if A < a + 1.0 - 1e-12:
        raise ValueError(f"flow half-length A={A} must be at least a + 1")
    hx = 2.0 * a / nx
    m = int(math.ceil((A - a) / hx - 1e-9))
    return AxialGrid(float(a), int(nx), cs, a + m * hx, m)


@dataclass
class ScalarField:
    box: Box
    values: np.ndarray
    loc: str = "node"

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != self.box.shape(self.loc):
            raise GridMismatch(f"{self.loc} field needs shape {self.box.shape(self.loc)}, "
                               f"got {self.values.shape}")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("non-finite entries in scalar field")

    def sup(self) -> float:
        return float(np.abs(self.values).max())


@dataclass
class VectorField:
    box: Box
    u1: np.ndarray
    u2: np.ndarray
    u3: np.ndarray

    def __post_init__(self):
        for name in ("u1", "u2", "u3"):
            arr = np.asarray(getattr(self, name), dtype=float)
            if arr.shape != self.box.shape(name):
                raise GridMismatch(f"{name} needs shape {self.box.shape(name)}, "
                                   f"got {arr.shape}")
            setattr(self, name, arr)

    @classmethod
    def zeros(cls, box: Box) -> "VectorField":
        return cls(box, *(np.zeros(box.shape(c)) for c in ("u1", "u2", "u3")))

    @property
    def comps(self):
        return (self.u1, self.u2, self.u3)

    def flat(self) -> np.ndarray:
        return np.concatenate([c.ravel() for c in self.comps])

    @classmethod
    def from_flat(cls, box: Box, w: np.ndarray) -> "VectorField":
        out, k = [], 0
        for c in ("u1", "u2", "u3"):
            shp = box.shape(c)
            n = int(np.prod(shp))
            out.append(np.asarray(w[k:k + n]).reshape(shp))
            k += n
        return cls(box, *out)

    def __add__(self, other):
        _same(self.box, other.box)
        return VectorField(self.box, *(a + b for a, b in zip(self.comps, other.comps)))

    def __sub__(self, other):
        _same(self.box, other.box)
        return VectorField(self.box, *(a - b for a, b in zip(self.comps, other.comps)))

    def scale(self, s: float) -> "VectorField":
        return VectorField(self.box, *(s * a for a in self.comps))

    def sup(self) -> float:
        """sqrt of the sum of the squared component maxima."""
        return math.sqrt(sum(float(np.abs(c).max()) ** 2 for c in self.comps))

    def max_speed(self) -> float:
        return max(float(np.abs(c).max()) for c in self.comps)

    def is_solenoidal(self, rtol: float = 1e-10) -> bool:
        h = min(self.box.spacings)
        scale = max(self.max_speed() / h, 1e-300)
        return float(np.abs(divergence(self).values).max()) <= rtol * scale

    def cell_centred(self) -> np.ndarray:
        """Velocity averaged to cell centres, shape (3, nx, ny, nz)."""
        return np.stack([0.5 * (self.u1[1:] + self.u1[:-1]),
                         0.5 * (self.u2[:, 1:] + self.u2[:, :-1]),
                         0.5 * (self.u3[:, :, 1:] + self.u3[:, :, :-1])])


def _same(b1: Box, b2: Box):
    if b1 != b2:
        raise GridMismatch("fields live on different grids")


def inner(f: VectorField, g: VectorField) -> float:
    _same(f.box, g.box)
    return f.box.vol * sum(float((a * b).sum()) for a, b in zip(f.comps, g.comps))


def l2_norm(f) -> float:
    if isinstance(f, VectorField):
        return math.sqrt(inner(f, f))
    return math.sqrt(f.box.vol * float((f.values ** 2).sum()))


def enforce_walls(vf: VectorField) -> VectorField:
    """Zero the normal velocity on every boundary face."""
    u1, u2, u3 = (c.copy() for c in vf.comps)
    u1[[0, -1]] = 0.0
    u2[:, [0, -1]] = 0.0
    u3[:, :, [0, -1]] = 0.0
    return VectorField(vf.box, u1, u2, u3)


# -- first-order operators ---------------------------------------------------

def divergence(vf: VectorField) -> ScalarField:
    b = vf.box
    d = (np.diff(vf.u1, axis=0) / b.hx + np.diff(vf.u2, axis=1) / b.hy
         + np.diff(vf.u3, axis=2) / b.hz)
    return ScalarField(b, d, "cell")


def gradient(p: ScalarField) -> VectorField:
    """Face gradient of a cell scalar; zero on boundary faces."""
    if p.loc != "cell":
        raise GridMismatch("gradient expects a cell-centred scalar")
    b = p.box
    g = VectorField.zeros(b)
    g.u1[1:-1] = np.diff(p.values, axis=0) / b.hx
    g.u2[:, 1:-1] = np.diff(p.values, axis=1) / b.hy
    g.u3[:, :, 1:-1] = np.diff(p.values, axis=2) / b.hz
    return g


def node_gradient(T: ScalarField):
    """(T_x at cells, T_y and T_z at interior lateral faces) of a node scalar."""
    b = T.box
    return (np.diff(T.values, axis=0) / b.hx, np.diff(T.values, axis=1) / b.hy,
            np.diff(T.values, axis=2) / b.hz)


def dx_centered(q: np.ndarray, h: float) -> np.ndarray:
    """Centred axial derivative at interior nodes, zero at the ends."""
    out = np.zeros_like(q)
    out[1:-1] = (q[2:] - q[:-2]) / (2.0 * h)
    return out


# -- Laplacians --------------------------------------------------------------

def second_difference(q: np.ndarray, axis: int, h: float, closure: str) -> np.ndarray:
    """1D second difference along ``axis``.

    closure: ``stored`` (end entries are boundary values, result zero there),
    ``dirichlet`` (ghost = -q, wall half a cell out), ``neumann`` (mirror
    about the wall half a cell out), ``neumann-node`` (mirror about the end
    entry itself).
    """
    q = np.moveaxis(q, axis, 0)
    out = np.zeros_like(q)
    out[1:-1] = q[2:] - 2.0 * q[1:-1] + q[:-2]
    if closure == "dirichlet":
        out[0] = q[1] - 3.0 * q[0]
        out[-1] = q[-2] - 3.0 * q[-1]
    elif closure == "neumann":
        out[0] = q[1] - q[0]
        out[-1] = q[-2] - q[-1]
    elif closure == "neumann-node":
        out[0] = 2.0 * (q[1] - q[0])
        out[-1] = 2.0 * (q[-2] - q[-1])
    elif closure != "stored":
        raise ValueError(f"unknown closure {closure!r}")
    return np.moveaxis(out / h**2, 0, axis)


_SCALAR_BC = {
    # tag -> (axial closure for node fields, axial closure for cell fields, lateral)
    "neumann-lateral": ("neumann-node", "neumann", "neumann"),
    "dirichlet-all": ("stored", "dirichlet", "dirichlet"),
    "dirichlet-axial+neumann-lateral": ("stored", "dirichlet", "neumann"),
}


def laplacian(sf: ScalarField, bc: str) -> ScalarField:
    """7-point Laplacian with ghost-cell closures.

    ``neumann-lateral`` is insulating everywhere; the other two tags hold
    homogeneous Dirichlet data on the channel ends (stored end values for node
    fields) and on the walls or not.
    """
    if bc not in _SCALAR_BC:
        raise ValueError(f"unknown boundary tag {bc!r}")
    ax_node, ax_cell, lat = _SCALAR_BC[bc]
    b = sf.box
    q = sf.values
    ax = ax_node if sf.loc == "node" else ax_cell
    out = (second_difference(q, 0, b.hx, ax) + second_difference(q, 1, b.hy, lat)
           + second_difference(q, 2, b.hz, lat))
    if ax == "stored":
        out[[0, -1]] = 0.0
    return ScalarField(b, out, sf.loc)


def vector_laplacian(vf: VectorField) -> VectorField:
    """Componentwise Laplacian for no-slip walls and zero end velocity."""
    b = vf.box
    h = b.spacings
    out = []
    for s, q in enumerate(vf.comps):
        r = np.zeros_like(q)
        for ax in range(3):
            r += second_difference(q, ax, h[ax], "stored" if ax == s else "dirichlet")
        idx = [slice(None)] * 3
        idx[s] = [0, -1]
        r[tuple(idx)] = 0.0
        out.append(r)
    return VectorField(b, *out)


# -- advection ---------------------------------------------------------------

def _avg(a, axis):
    a = np.moveaxis(a, axis, 0)
    return np.moveaxis(0.5 * (a[1:] + a[:-1]), 0, axis)


def _pad_ends(a, axis):
    w = [(0, 0)] * a.ndim
    w[axis] = (1, 1)
    return np.pad(a, w)


def _dual_velocities(vel, s):
    """Velocities on the faces of the control volumes around points staggered
    along axis ``s``.  Averages of MAC values, so the dual divergence is the
    mean of the two adjacent primal divergences."""
    V = []
    for d in range(3):
        v = vel[d]
        if d == s:
            V.append(_pad_ends(_avg(v, d), d))
        else:
            V.append(_pad_ends(_avg(v, s), s))
    return V


def _advect_staggered(q, s, vel, h, scheme):
    V = _dual_velocities(vel, s)
    qp = np.pad(q, 1)
    core = (slice(1, -1),) * 3
    out = np.zeros_like(q)
    for d in range(3):
        lo = [slice(1, -1)] * 3
        hi = [slice(1, -1)] * 3
        lo[d] = slice(0, -2)
        hi[d] = slice(2, None)
        dq_plus = qp[tuple(hi)] - qp[core]
        dq_minus = qp[core] - qp[tuple(lo)]
        Vm = np.moveaxis(np.moveaxis(V[d], d, 0)[:-1], 0, d)
        Vp = np.moveaxis(np.moveaxis(V[d], d, 0)[1:], 0, d)
        if scheme == "centered":
            out += (Vp * dq_plus + Vm * dq_minus) / (2.0 * h[d])
        elif scheme == "upwind":
            Vn = 0.5 * (Vp + Vm)
            out += np.where(Vn > 0, Vn * dq_minus, Vn * dq_plus) / h[d]
        else:
            raise ValueError(f"unknown advection scheme {scheme!r}")
    idx = [slice(None)] * 3
    idx[s] = [0, -1]
    out[tuple(idx)] = 0.0
    return out


def advect(vf: VectorField, sf: ScalarField, scheme: str = "centered") -> ScalarField:
    """v . grad T for a node scalar, zero at the two end nodes.

    The centred form is skew-symmetric: summed against T it leaves boundary
    terms only when v is discretely solenoidal.
    """
    _same(vf.box, sf.box)
    if sf.loc != "node":
        raise GridMismatch("advect expects a node scalar")
    out = _advect_staggered(sf.values, 0, vf.comps, vf.box.spacings, scheme)
    return ScalarField(sf.box, out, "node")


def advect_vector(vf: VectorField, wf: VectorField, scheme: str = "centered") -> VectorField:
    """(v . grad) w componentwise on the MAC layout."""
    _same(vf.box, wf.box)
    h = vf.box.spacings
    out = [_advect_staggered(q, s, vf.comps, h, scheme) for s, q in enumerate(wf.comps)]
    return VectorField(vf.box, *out)


# -- cut-offs and extensions -------------------------------------------------

PSI_MAX = 1.25          # plateau of -phi' on the unit ramp; slope on [1/3,2/3] is 3x
_DELTA = 1.0 - 1.0 / PSI_MAX


def unit_ramp(t) -> np.ndarray:
    """C^2 non-increasing ramp: 1 for t <= 0, 0 for t >= 1, |slope| <= 1.25.

    -phi' rises by a cubic smoothstep over [0, 0.2], stays flat, then falls
    symmetrically.
    """
    t = np.clip(np.asarray(t, dtype=float), 0.0, 1.0)

    def G(t):
        u = np.clip(t / _DELTA, 0.0, 1.0)
        rise = PSI_MAX * _DELTA * (u**3 - 0.5 * u**4)
        return np.where(t < _DELTA, rise, PSI_MAX * _DELTA / 2 + PSI_MAX * (t - _DELTA))

    g = np.where(t <= 0.5, G(t), 1.0 - G(1.0 - t))
    return 1.0 - g


def cutoff(s) -> np.ndarray:
    """1 for s < 1/3, 0 for s > 2/3, max slope 3.75."""
    return unit_ramp(3.0 * np.asarray(s, dtype=float) - 1.0)


def extend_temperature(T: ScalarField, grid: AxialGrid, *, tol: float = 1e-8) -> ScalarField:
    """Odd-type reflection of T about the end values, cut off beyond 2/3.

    Left:  phi(|x| - a) (2 - T(-2a - x));  right: -phi(|x| - a) T(2a - x).
    """
    ra, fl = grid.ra, grid.flow
    _same(T.box, ra)
    v = T.values
    if np.abs(v[0] - 1.0).max() > tol or np.abs(v[-1]).max() > tol:
        raise ValueError("temperature trace must be 1 at x = -a and 0 at x = a")
    m, nx = grid.m, grid.nx
    out = np.zeros(fl.shape("node"))
    out[m:m + nx + 1] = v
    k = np.arange(1, m + 1)
    kk = k[k <= nx]
    phi = cutoff(kk * grid.hx)[:, None, None]
    # left node m - k reflects to node k, right node m + nx + k to nx - k
    out[m - kk] = phi * (2.0 - v[kk])
    out[m + nx + kk] = -phi * v[nx - kk]
    return ScalarField(fl, out, "node")


def extension_coefficients(n: int):
    if n < 2:
        raise ValueError(f"extension order n must be >= 2, got {n}")
    l1 = (1 + n) * (1 + n * n) / n**3
    l2 = -(1 + n * n) / (n * n * (n - 1))
    l3 = (1 + n) / (n**3 * (n - 1))
    return l1, l2, l3


def extension_epsilon(n: int) -> float:
    """Excess over 1 of the sup-norm gain of the velocity extension."""
    l1, l2, l3 = extension_coefficients(n)
    return max(abs(l1) + abs(l2) + abs(l3), n * abs(l2) + n * n * abs(l3)) - 1.0


def _extend_right(u1, u2, u3, n, K, m):
    """Extension past the right end by m cells; arrays are on R_a."""
    l1, l2, l3 = extension_coefficients(n)
    nx = u1.shape[0] - 1
    Kc = min(K, m)
    e1 = np.zeros((m,) + u1.shape[1:])
    e2 = np.zeros((m,) + u2.shape[1:])
    e3 = np.zeros((m,) + u3.shape[1:])
    i = np.arange(K + 1)
    v1 = (l1 * u1[nx] + l2 * u1[nx - n * i] + l3 * u1[nx - n * n * i])
    v1[0] = u1[nx]

    def block_mean(u, width):
        # mean over original cells [nx - width (i+1), nx - width i) for i < K
        cells = u[nx - width * K:nx]
        return cells.reshape((K, width) + u.shape[1:]).mean(axis=1)[::-1]

    vt2 = -n * l2 * block_mean(u2, n) - n * n * l3 * block_mean(u2, n * n)
    vt3 = -n * l2 * block_mean(u3, n) - n * n * l3 * block_mean(u3, n * n)
    phi = unit_ramp(i / K)[:, None, None]
    corr = np.concatenate([np.zeros((1,) + v1.shape[1:]),
                           np.cumsum(np.diff(phi, axis=0) * 0.5 * (v1[1:] + v1[:-1]), axis=0)])
    t1 = phi * v1 - corr
    phic = 0.5 * (phi[1:] + phi[:-1])
    # face nx + j of the extension is stored as e1[j - 1]
    e1[:Kc] = t1[1:Kc + 1]
    e1[Kc:] = t1[Kc]
    e2[:Kc] = (phic * vt2)[:Kc]
    e3[:Kc] = (phic * vt3)[:Kc]
    return e1, e2, e3


def extend_velocity(v: VectorField, grid: AxialGrid, n: int = 8, *,
                    rtol: float = 1e-8) -> VectorField:
    """Solenoidal extension of v from R_a to the flow box.

    Beyond the cut-off the axial component is constant along x and the
    transverse ones vanish; on R_a the values are copied exactly.
    """
    _same(v.box, grid.ra)
    extension_coefficients(n)
    K = grid.nx // (n * n)
    if K < 1:
        raise ValueError(f"grid too coarse for extension order n={n}: "
                         f"need nx >= {n * n}, got {grid.nx}")
    if not v.is_solenoidal(rtol):
        raise ValueError("velocity to extend is not discretely solenoidal")
    m, nx = grid.m, grid.nx
    r1, r2, r3 = _extend_right(v.u1, v.u2, v.u3, n, K, m)
    l1_, l2_, l3_ = _extend_right(-v.u1[::-1], v.u2[::-1], v.u3[::-1], n, K, m)
    fl = grid.flow
    u1 = np.concatenate([-l1_[::-1], v.u1, r1])
    u2 = np.concatenate([l2_[::-1], v.u2, r2])
    u3 = np.concatenate([l3_[::-1], v.u3, r3])
    out = VectorField(fl, u1, u2, u3)
    return out


def restrict_velocity(u: VectorField, grid: AxialGrid) -> VectorField:
    _same(u.box, grid.flow)
    m, nx = grid.m, grid.nx
    return VectorField(grid.ra, u.u1[m:m + nx + 1], u.u2[m:m + nx], u.u3[m:m + nx])


def restrict_node(T: ScalarField, grid: AxialGrid) -> ScalarField:
    _same(T.box, grid.flow)
    return ScalarField(grid.ra, T.values[grid.m:grid.m + grid.nx + 1], "node")


# -- projection --------------------------------------------------------------

def helmholtz_project(g: VectorField, return_potential: bool = False):
    """Discrete Leray projection: g - grad q with Lap q = div g, Neumann walls.

    The normal trace is dropped first, so the result is solenoidal with zero
    normal component.  The operator is an orthogonal projection in the grid
    L2 inner product.
    """
    g0 = enforce_walls(g)
    b = g.box
    q = neumann_poisson(divergence(g0).values, b.spacings)
    qf = ScalarField(b, q, "cell")
    out = g0 - gradient(qf)
    return (out, qf) if return_potential else out


# -- manufactured solenoidal fields ------------------------------------------

def field_from_stream(box: Box, psi) -> VectorField:
    """Solenoidal field (d_y psi, -d_x psi, 0) from a stream function psi(x, y).

    psi is sampled on (x-face, y-face) edges, so the discrete divergence
    vanishes identically; psi = 0 on the walls y = 0, ly gives zero normal
    velocity there.  The field is constant in z.
    """
    X = box.xn[:, None]
    Y = box.yf[None, :]
    P = np.asarray(psi(X, Y), dtype=float) * np.ones((box.nx + 1, box.ny + 1))
    u1 = np.diff(P, axis=1) / box.hy
    u2 = -np.diff(P, axis=0) / box.hx
    nz = box.nz
    return VectorField(box, np.repeat(u1[:, :, None], nz, 2),
                       np.repeat(u2[:, :, None], nz, 2), np.zeros(box.shape("u3")))
