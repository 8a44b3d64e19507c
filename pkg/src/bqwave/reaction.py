"""Ignition-type reaction terms.

Two families are provided.  ``hat`` is k (T - theta0)_+ (1 - T)_+, which grows
linearly past the ignition temperature; ``quadratic`` is
k [(T - theta0)_+]^2 (1 - T)_+ and satisfies a quadratic growth bound.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

FAMILIES = ("hat", "quadratic")


@dataclass(frozen=True)
class NonlinearitySpec:
    family: str
    k: float
    theta0: float

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown reaction family {self.family!r}")
        if self.k < 0:
            raise ValueError(f"amplitude k must be non-negative, got {self.k}")
        if not 0 < self.theta0 < 1:
            raise ValueError(f"theta0 must lie in (0, 1), got {self.theta0}")

    def __call__(self, T):
        return ignition_value(self, T)

    def derivative(self, T):
        return ignition_derivative(self, T)


def ignition_value(spec: NonlinearitySpec, T):
    T = np.asarray(T, dtype=float)
    s = np.clip(T - spec.theta0, 0.0, None)
    r = np.clip(1.0 - T, 0.0, None)
    if spec.family == "hat":
        out = spec.k * s * r
    else:
        out = spec.k * s * s * r
    return out if out.ndim else float(out)


def ignition_derivative(spec: NonlinearitySpec, T):
    """df/dT, taking the zero branch at the two kinks."""
    T = np.asarray(T, dtype=float)
    inside = (T > spec.theta0) & (T < 1.0)
    s = T - spec.theta0
    if spec.family == "hat":
        d = spec.k * (1.0 - T - s)
    else:
        d = spec.k * (2.0 * s * (1.0 - T) - s * s)
    out = np.where(inside, d, 0.0)
    return out if out.ndim else float(out)


def lipschitz_bound(spec: NonlinearitySpec) -> float:
    """sup |f'| over [0, 1]."""
    b = 1.0 - spec.theta0
    if spec.family == "hat":
        # f' = k (1 + theta0 - 2T) runs from k b down to -k b
        return spec.k * b
    # with s = T - theta0: f' = k (2 b s - 3 s^2), extremes k b^2/3 and -k b^2
    return spec.k * b * b


def sup_abs(spec: NonlinearitySpec) -> float:
    """max of f on [0, 1]."""
    b = 1.0 - spec.theta0
    if spec.family == "hat":
        return spec.k * b * b / 4.0
    return spec.k * 4.0 * b**3 / 27.0


def quadratic_growth_check(spec: NonlinearitySpec, *, n: int = 100_001):
    """Smallest k with f(T) <= k [(T - theta0)_+]^2 on [0, 1].

    Returns ``(k_min, holds)``.  The supremum of f / (T - theta0)^2 is taken on
    a dense grid; growth that is only linear at the ignition point makes the
    ratio unbounded, which is detected by probing T -> theta0 from above.
    """
    if spec.k == 0:
        return 0.0, True
    T = np.linspace(spec.theta0, 1.0, n)[1:]
    ratio = ignition_value(spec, T) / (T - spec.theta0) ** 2
    k_grid = float(ratio.max())
    eps = np.array([1e-6, 1e-9, 1e-12]) * (1.0 - spec.theta0)
    Tp = spec.theta0 + eps
    # divide by the rounded offset so the ratio sees the same s as f does
    probe = ignition_value(spec, Tp) / (Tp - spec.theta0) ** 2
    if probe[-1] > 10.0 * probe[0] and probe[-1] > k_grid:
        return math.inf, False
    return max(k_grid, float(probe.max())), True
