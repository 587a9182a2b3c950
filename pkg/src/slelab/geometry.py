"""Boundary geometry of the half-plane: cross-ratios, Moebius maps, Poisson kernels.

Points at infinity are represented by the IEEE inf sentinel; the formulas
special-case it with their standard limits.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

__all__ = [
    "INF",
    "MobiusMap",
    "cross_ratio",
    "poisson_kernel_halfplane",
    "poisson_kernel_slit",
    "normalize_to_halfplane",
]

INF = math.inf


class OrderError(ValueError):
    """Marked boundary points are not in the required strict order."""


class SingularError(ValueError):
    """Kernel evaluated at coincident points."""


class SwallowedError(ValueError):
    """A requested tracked point has been swallowed by the hull."""


def _gap(u: float, v: float) -> float:
    """v - u with inf conventions: inf - finite = inf."""
    if math.isinf(v) or math.isinf(u):
        return INF
    return v - u


def cross_ratio(x1: float, x2: float, x3: float, x4: float) -> float:
    """z = (x2-x1)(x4-x3) / ((x3-x1)(x4-x2)) for x1<x2<x3<x4; z in (0,1).

    x1 = -inf or x4 = +inf are handled by the standard limits.
    """
    if not (x1 < x2 < x3 < x4):
        raise OrderError(f"points not strictly increasing: {(x1, x2, x3, x4)}")
    if math.isinf(x4) and math.isinf(x1):
        raise OrderError("at most one endpoint may be infinite")
    if math.isinf(x4):
        return (x2 - x1) / (x3 - x1)
    if math.isinf(x1):
        return (x4 - x3) / (x4 - x2)
    return ((x2 - x1) * (x4 - x3)) / ((x3 - x1) * (x4 - x2))


def poisson_kernel_halfplane(x: float, y: float) -> float:
    """Boundary Poisson kernel of the upper half-plane, |y-x|^-2."""
    if x == y:
        raise SingularError(f"coincident boundary points x=y={x}")
    if math.isinf(x) or math.isinf(y):
        return 0.0
    return 1.0 / (y - x) ** 2


@dataclass(frozen=True)
class MobiusMap:
    """x -> (p x + q) / (r x + s) with ps - qr > 0 (preserves the half-plane)."""

    p: float
    q: float
    r: float
    s: float

    def __post_init__(self) -> None:
        if self.det <= 0:
            raise ValueError(f"determinant {self.det} not positive")

    @property
    def det(self) -> float:
        return self.p * self.s - self.q * self.r

    def __call__(self, x: float) -> float:
        if math.isinf(x):
            return self.p / self.r if self.r != 0.0 else INF
        den = self.r * x + self.s
        if den == 0.0:
            return INF
        return (self.p * x + self.q) / den

    def deriv(self, x: float) -> float:
        """phi'(x) = det / (r x + s)^2; finite points only."""
        if math.isinf(x):
            raise SingularError("derivative at infinity is not a number")
        return self.det / (self.r * x + self.s) ** 2

    def inverse(self) -> "MobiusMap":
        return MobiusMap(self.s, -self.q, -self.r, self.p)

    def compose(self, other: "MobiusMap") -> "MobiusMap":
        """self after other."""
        return MobiusMap(
            self.p * other.p + self.q * other.r,
            self.p * other.q + self.q * other.s,
            self.r * other.p + self.s * other.r,
            self.r * other.q + self.s * other.s,
        )

    @staticmethod
    def identity() -> "MobiusMap":
        return MobiusMap(1.0, 0.0, 0.0, 1.0)

    @staticmethod
    def to_zero_one_inf(a: float, b: float, c: float) -> "MobiusMap":
        """The map sending (a, b, c) to (0, 1, inf); requires a < b < c."""
        if not a < b < c:
            raise OrderError(f"need a<b<c, got {(a, b, c)}")
        if math.isinf(c):
            scale = 1.0 / (b - a)
            return MobiusMap(scale, -a * scale, 0.0, 1.0)
        # x -> ((x-a)(b-c)) / ((x-c)(b-a));  det = (b-a)(b-c)(c-a) ... > 0
        return MobiusMap(b - c, -a * (b - c), b - a, -c * (b - a))

    @staticmethod
    def random(rng: np.random.Generator, scale: float = 2.0) -> "MobiusMap":
        """A random orientation-preserving boundary Moebius map."""
        while True:
            p, q, r, s = rng.normal(0.0, scale, size=4)
            if p * s - q * r > 1e-3:
                return MobiusMap(p, q, r, s)


def normalize_to_halfplane(
    pts: Sequence[float], target: tuple[int, int, int]
) -> tuple[MobiusMap, list[float]]:
    """Moebius-normalize marked points so three chosen ones go to (0, 1, inf).

    `target` gives the indices (i, j, k), i<j<k, of the points sent to 0, 1
    and inf; returns the map and the transformed list.  Derivatives at every
    point are available from the returned map for covariance factors.
    """
    i, j, k = target
    phi = MobiusMap.to_zero_one_inf(pts[i], pts[j], pts[k])
    return phi, [phi(x) for x in pts]


def poisson_kernel_slit(state, i: int, j: int) -> float:
    """Boundary Poisson kernel of a Loewner slit domain from tracked data.

    Consumes a LoewnerState-like object with tracked point images V and
    log-derivatives L: returns exp(L_i + L_j) / (V_j - V_i)^2, i.e.
    g'(x_i) g'(x_j) / (g(x_j) - g(x_i))^2.  Both points must be alive and on
    the same side of the driving value.
    """
    pi, pj = state.tracked[i], state.tracked[j]
    if pi.swallowed or pj.swallowed:
        raise SwallowedError(f"tracked point swallowed: {i if pi.swallowed else j}")
    if (pi.v - state.w) * (pj.v - state.w) < 0:
        raise OrderError("points straddle the tip; kernel undefined for the slit component")
    if pi.v == pj.v:
        raise SingularError("coincident tracked images")
    return math.exp(pi.log_deriv + pj.log_deriv) / (pj.v - pi.v) ** 2
