"""Closed-form partition functions on quads and their PDE/COV/ASY checkers.

All values are assembled in log space and exponentiated at the boundary, so
tiny point gaps (exponents -2h, -2b) cannot under- or overflow.
"""

from __future__ import annotations

import math
from typing import Callable, Sequence

from .geometry import OrderError, cross_ratio, poisson_kernel_halfplane
from .linkpatterns import LinkPattern
from .special import DomainError, HypParams, Params, f_hsle, gamma, hyp2f1, hyp2f1_at_one

__all__ = [
    "z_kappa_nu",
    "log_z_kappa_nu",
    "pure_z_n1",
    "pure_z_n2",
    "log_pure_z",
    "pure_z",
    "bound_b_alpha",
    "pde_residual",
    "asy_ratio",
    "avoid_probability",
    "avoid_probability_from_z",
]


def _check_increasing(pts: Sequence[float]) -> None:
    if any(b <= a for a, b in zip(pts, pts[1:])):
        raise OrderError(f"points not strictly increasing: {tuple(pts)}")


def log_z_kappa_nu(par: Params, x1: float, x2: float, x3: float, x4: float) -> float:
    """log of (x4-x1)^-2h (x3-x2)^-2b z^a F(z) with z the quad cross-ratio."""
    _check_increasing((x1, x2, x3, x4))
    z = cross_ratio(x1, x2, x3, x4)
    f = f_hsle(par, z)
    if f <= 0.0:
        raise DomainError(f"drift-weight solution not positive at z={z}")
    return (
        -2.0 * par.h * math.log(x4 - x1)
        - 2.0 * par.b * math.log(x3 - x2)
        + par.a * math.log(z)
        + math.log(f)
    )


def z_kappa_nu(par: Params, x1: float, x2: float, x3: float, x4: float) -> float:
    """Quad partition function; positive, covariant with weights (h, b, b, h)."""
    return math.exp(log_z_kappa_nu(par, x1, x2, x3, x4))


def pure_z_n1(par: Params, x: float, y: float) -> float:
    """(y - x)^-2h."""
    _check_increasing((x, y))
    return math.exp(-2.0 * par.h * math.log(y - x))


def _n2_family(kappa: float) -> tuple[HypParams, float]:
    hp = HypParams(4.0 / kappa, 1.0 - 4.0 / kappa, 8.0 / kappa)
    return hp, hyp2f1_at_one(hp)


_NESTED = LinkPattern([(1, 4), (2, 3)])
_SIDE = LinkPattern([(1, 2), (3, 4)])


def log_pure_z_n2(par: Params, pattern: LinkPattern, x1, x2, x3, x4) -> float:
    """log pure partition function for the two four-point link patterns.

    Nested {{1,4},{2,3}}: (x4-x1)^-2h (x3-x2)^-2h z^(2/kappa) F(z) / F(1),
    side-by-side {{1,2},{3,4}}: the z <-> 1-z image with swapped prefactors.
    The 1/F(1) factor pins the collapse asymptotics to the one-link function.
    """
    _check_increasing((x1, x2, x3, x4))
    z = cross_ratio(x1, x2, x3, x4)
    hp, f_at_1 = _n2_family(par.kappa)
    if pattern == _NESTED:
        gaps = (x4 - x1, x3 - x2)
        arg = z
    elif pattern == _SIDE:
        gaps = (x2 - x1, x4 - x3)
        arg = 1.0 - z
    else:
        raise ValueError(f"not a four-point pattern: {pattern.links}")
    return (
        -2.0 * par.h * (math.log(gaps[0]) + math.log(gaps[1]))
        + (2.0 / par.kappa) * math.log(arg)
        + math.log(hyp2f1(hp, arg))
        - math.log(f_at_1)
    )


def pure_z_n2(par: Params, pattern: LinkPattern, x1, x2, x3, x4) -> float:
    return math.exp(log_pure_z_n2(par, pattern, x1, x2, x3, x4))


def log_pure_z(par: Params, pattern: LinkPattern, pts: Sequence[float]) -> float:
    """log pure partition function for N <= 2 (closed forms); N=0 gives 0."""
    if len(pts) != 2 * pattern.n:
        raise ValueError(f"{len(pts)} points for an N={pattern.n} pattern")
    if pattern.n == 0:
        return 0.0
    if pattern.n == 1:
        _check_increasing(pts)
        return -2.0 * par.h * math.log(pts[1] - pts[0])
    if pattern.n == 2:
        return log_pure_z_n2(par, pattern, *pts)
    raise ValueError("closed forms exist only for N <= 2; use the cascade estimator")


def pure_z(par: Params, pattern: LinkPattern, pts: Sequence[float]) -> float:
    return math.exp(log_pure_z(par, pattern, pts))


def bound_b_alpha(par: Params, alpha: LinkPattern, pts: Sequence[float]) -> float:
    """Power-law bound: product over links of half-plane kernels to the h."""
    _check_increasing(pts)
    if len(pts) != 2 * alpha.n:
        raise ValueError(f"{len(pts)} points for an N={alpha.n} pattern")
    log_b = sum(
        par.h * math.log(poisson_kernel_halfplane(pts[a - 1], pts[b - 1]))
        for a, b in alpha
    )
    return math.exp(log_b)


ZFun = Callable[[Sequence[float]], float]


def pde_residual(
    zfun: ZFun,
    kappa: float,
    i: int,
    pts: Sequence[float],
    step: float,
    weights: Sequence[float] | None = None,
    richardson: bool = False,
) -> float:
    """Centered finite-difference residual of the null-vector PDE at index i.

    (kappa/2) d_i^2 Z + sum_{j != i} [ 2/(x_j-x_i) d_j Z - 2 w_j/(x_j-x_i)^2 Z ]
    with conformal weights w_j (all h for pure partition functions; b at the
    two interior marked points for the quad function).  Plain O(step^2)
    stencils by default; `richardson` upgrades one extrapolation level.
    """
    if richardson:
        r1 = pde_residual(zfun, kappa, i, pts, step, weights)
        r2 = pde_residual(zfun, kappa, i, pts, step / 2.0, weights)
        return (4.0 * r2 - r1) / 3.0
    pts = list(map(float, pts))
    n = len(pts)
    h_default = (6.0 - kappa) / (2.0 * kappa)
    w = list(weights) if weights is not None else [h_default] * n

    def shifted(j, d):
        q = pts.copy()
        q[j] += d
        return zfun(q)

    z0 = zfun(pts)
    res = kappa / 2.0 * (shifted(i, step) - 2.0 * z0 + shifted(i, -step)) / step**2
    for j in range(n):
        if j == i:
            continue
        dj = (shifted(j, step) - shifted(j, -step)) / (2.0 * step)
        gap = pts[j] - pts[i]
        res += 2.0 / gap * dj - 2.0 * w[j] / gap**2 * z0
    return res


def asy_ratio(
    par: Params, zfun: ZFun, j: int, pts: Sequence[float], gap: float
) -> float:
    """Collapse ratio Z(..., xi - gap/2, xi + gap/2, ...) / gap^-2h.

    The pair (j, j+1) is replaced by a symmetric pair of separation `gap`
    around its midpoint; callers drive gap -> 0 and compare with the
    removed-link function or with zero.
    """
    pts = list(map(float, pts))
    xi = 0.5 * (pts[j] + pts[j + 1])
    pts[j] = xi - gap / 2.0
    pts[j + 1] = xi + gap / 2.0
    return zfun(pts) * gap ** (2.0 * par.h)


def avoid_probability_from_z(par: Params, z: float) -> float:
    """The avoidance chance as a function of the quad cross-ratio alone.

    The Z-ratio's gap prefactors cancel (the paired kappa-8-nu weight has the
    same b), leaving z^((kappa-8-2nu)/kappa) F_hat(z)/F(z) times the Gamma
    ratio.
    """
    k, nu = par.kappa, par.nu
    if nu >= k / 2.0 - 4.0:
        return 1.0
    if nu <= max(-4.0, k / 2.0 - 6.0):
        raise DomainError(f"nu={nu} below the admissible band for kappa={k}")
    if not 0.0 < z < 1.0:
        raise DomainError(f"cross-ratio {z} outside (0,1)")
    par_hat = Params(kappa=k, nu=k - 8.0 - nu)
    log_gamma_ratio = (
        math.log(gamma((2.0 * nu + 8.0) / k))
        + math.log(gamma((k - 4.0 - 2.0 * nu) / k))
        - math.log(gamma((2.0 * nu + 12.0 - k) / k))
        - math.log(gamma((2.0 * k - 8.0 - 2.0 * nu) / k))
    )
    return math.exp(
        (par_hat.a - par.a) * math.log(z)
        + math.log(f_hsle(par_hat, z))
        - math.log(f_hsle(par, z))
        + log_gamma_ratio
    )


def avoid_probability(par: Params, x1: float, x2: float, x3: float, x4: float) -> float:
    """Chance that the quad curve stays clear of the boundary arc (x2, x3).

    Equals 1 when nu >= kappa/2 - 4.  In the band
    max(-4, kappa/2-6) < nu < kappa/2 - 4 it is
    Z_{kappa, kappa-8-nu} / Z_{kappa, nu} * G((2nu+8)/k) G((k-4-2nu)/k)
    / ( G((2nu+12-k)/k) G((2k-8-2nu)/k) ).
    """
    _check_increasing((x1, x2, x3, x4))
    if par.nu >= par.kappa / 2.0 - 4.0:
        return 1.0
    return avoid_probability_from_z(par, cross_ratio(x1, x2, x3, x4))
