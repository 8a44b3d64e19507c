"""Fast solvers for constant-coefficient operators on boxes.

The cross-section directions are diagonalised with sine/cosine transforms, which
leaves one tridiagonal system along the channel axis per transverse mode.  All
modes are eliminated together by a vectorised Thomas sweep.

Transverse closures (per direction):

``neumann``
    cell-centred unknowns, mirror ghost (DCT-II)
``dirichlet-cell``
    cell-centred unknowns, wall half a cell away, ghost = -u (DST-II)
``dirichlet-face``
    unknowns on interior faces, zero on the walls (DST-I)

Axial closures: ``dirichlet-node`` (unknowns strictly between two fixed end
values), ``dirichlet-cell`` and ``neumann-cell`` (ghost reflection).
"""

from __future__ import annotations

import numpy as np
import scipy.fft as sfft


def transverse_eigenvalues(kind: str, n: int, h: float) -> np.ndarray:
    """Eigenvalues of the 1D (-second difference) for the given closure.

    ``n`` is the number of cells; the returned array has one entry per unknown.
    """
    if kind == "neumann":
        k = np.arange(n)
        return (2.0 / h * np.sin(np.pi * k / (2 * n))) ** 2
    if kind == "dirichlet-cell":
        k = np.arange(1, n + 1)
        return (2.0 / h * np.sin(np.pi * k / (2 * n))) ** 2
    if kind == "dirichlet-face":
        k = np.arange(1, n)
        return (2.0 / h * np.sin(np.pi * k / (2 * n))) ** 2
    raise ValueError(f"unknown transverse closure {kind!r}")


def _fwd(x, kind, axis):
    if kind == "neumann":
        return sfft.dct(x, type=2, axis=axis, norm="ortho")
    if kind == "dirichlet-cell":
        return sfft.dst(x, type=2, axis=axis, norm="ortho")
    return sfft.dst(x, type=1, axis=axis, norm="ortho")


def _inv(x, kind, axis):
    if kind == "neumann":
        return sfft.idct(x, type=2, axis=axis, norm="ortho")
    if kind == "dirichlet-cell":
        return sfft.idst(x, type=2, axis=axis, norm="ortho")
    return sfft.dst(x, type=1, axis=axis, norm="ortho")


def to_modes(x: np.ndarray, kinds) -> np.ndarray:
    return _fwd(_fwd(x, kinds[0], 1), kinds[1], 2)


def from_modes(x: np.ndarray, kinds) -> np.ndarray:
    return _inv(_inv(x, kinds[1], 2), kinds[0], 1)


class TridiagonalBatch:
    """Many tridiagonal systems sharing their length, factored once.

    ``lower[i]`` couples row i to i-1 and ``upper[i]`` row i to i+1; every
    coefficient array has the system index first and broadcasts over the rest.
    """

    def __init__(self, lower, diag, upper):
        diag = np.asarray(diag, dtype=float)
        n = diag.shape[0]
        lower = np.broadcast_to(np.asarray(lower, dtype=float), diag.shape)
        upper = np.broadcast_to(np.asarray(upper, dtype=float), diag.shape)
        piv = np.empty_like(diag)
        mult = np.empty_like(diag)
        piv[0] = diag[0]
        mult[0] = 0.0
        with np.errstate(divide="ignore", invalid="ignore"):
            for i in range(1, n):
                mult[i] = lower[i] / piv[i - 1]
                piv[i] = diag[i] - mult[i] * upper[i - 1]
        if not np.all(np.isfinite(piv)) or np.any(piv == 0.0):
            raise ZeroDivisionError("singular tridiagonal system")
        self.n = n
        self.piv = piv
        self.mult = mult
        self.upper = upper

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        y = np.array(rhs, dtype=float, copy=True)
        for i in range(1, self.n):
            y[i] -= self.mult[i] * y[i - 1]
        y[-1] /= self.piv[-1]
        for i in range(self.n - 2, -1, -1):
            y[i] = (y[i] - self.upper[i] * y[i + 1]) / self.piv[i]
        return y


class BoxSolver:
    """Inverse of  -nu Lap + conv(x) d/dx + shift(x)  on a box.

    ``conv`` and ``shift`` may vary along the axis only.  The axial derivative
    is the centred difference.  ``hx, hy, hz`` are the grid spacings and
    ``ny, nz`` the cell counts of the cross-section.
    """

    def __init__(self, n_axial, hx, ny, hy, nz, hz, *, axial, transverse,
                 nu=1.0, conv=0.0, shift=0.0):
        self.kinds = tuple(transverse)
        ly = transverse_eigenvalues(self.kinds[0], ny, hy)
        lz = transverse_eigenvalues(self.kinds[1], nz, hz)
        lam = (ly[:, None] + lz[None, :])[None]
        N = n_axial
        conv = np.broadcast_to(np.asarray(conv, dtype=float), (N,))
        shift = np.broadcast_to(np.asarray(shift, dtype=float), (N,))
        lo = -nu / hx**2 - conv / (2 * hx)
        up = -nu / hx**2 + conv / (2 * hx)
        d0 = 2 * nu / hx**2 + shift
        if axial == "dirichlet-cell":
            d0 = d0.copy()
            d0[0] -= lo[0]
            d0[-1] -= up[-1]
        elif axial == "neumann-cell":
            d0 = d0.copy()
            d0[0] += lo[0]
            d0[-1] += up[-1]
        elif axial != "dirichlet-node":
            raise ValueError(f"unknown axial closure {axial!r}")
        diag = d0[:, None, None] + nu * lam
        self.shape = (N, lam.shape[1], lam.shape[2])
        self.tri = TridiagonalBatch(lo[:, None, None], diag, up[:, None, None])

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        r = to_modes(np.asarray(rhs, dtype=float).reshape(self.shape), self.kinds)
        return from_modes(self.tri.solve(r), self.kinds)


def neumann_poisson(rhs: np.ndarray, h) -> np.ndarray:
    """Mean-zero solution of  Lap q = rhs  with homogeneous Neumann closures.

    Cell-centred unknowns in every direction; the mean of ``rhs`` is removed
    first to satisfy the compatibility condition.
    """
    rhs = np.asarray(rhs, dtype=float)
    r = sfft.dctn(rhs - rhs.mean(), type=2, norm="ortho")
    lam = np.zeros(rhs.shape)
    for ax, (n, hh) in enumerate(zip(rhs.shape, h)):
        shape = [1] * rhs.ndim
        shape[ax] = n
        lam = lam + transverse_eigenvalues("neumann", n, hh).reshape(shape)
    lam.flat[0] = 1.0
    q = -r / lam
    q.flat[0] = 0.0
    return sfft.idctn(q, type=2, norm="ortho")
