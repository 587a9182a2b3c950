"""Gauss hypergeometric machinery and the drift-weight solutions of Euler's ODE.

Everything here is self-contained double-precision scalar math: a Lanczos
Gamma function, the 2F1 power series with a z->1 connection formula, and the
two solution branches F (and its reflected form built from G) that drive the
hypergeometric SLE.  All functions are pure.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

__all__ = [
    "HypParams",
    "Params",
    "gamma",
    "hyp2f1",
    "hyp2f1_at_one",
    "f_hsle",
    "g_reflect",
    "f_hsle_prime",
    "euler_ode_residual",
]

# Truncation contract for the power series: stop once the next term is below
# SERIES_RTOL relative to the partial sum, give up past MAX_TERMS.
SERIES_RTOL = 1e-15
MAX_TERMS = 10_000

# Above this point the series is handed to the z=1 connection formula.
SERIES_Z_CUTOFF = 0.9

# Lanczos approximation, g=7, 9 coefficients: ~15 significant digits on the
# positive real axis, reflected for negative non-integer arguments.
_LANCZOS_G = 7.0
_LANCZOS_COEF = (
    0.99999999999980993,
    676.5203681218851,
    -1259.1392167224028,
    771.32342877765313,
    -176.61502916214059,
    12.507343278686905,
    -0.13857109526572012,
    9.9843695780195716e-6,
    1.5056327351493116e-7,
)


class ParameterError(ValueError):
    """Invalid hypergeometric parameters (C a nonpositive integer, etc.)."""


class DomainError(ValueError):
    """Evaluation requested outside the function's domain of definition."""


def _is_nonpositive_integer(x: float, tol: float = 1e-12) -> bool:
    return x <= tol and abs(x - round(x)) < tol


def gamma(x: float) -> float:
    """Gamma function on the real line, poles at 0, -1, -2, ..."""
    if _is_nonpositive_integer(x):
        raise DomainError(f"gamma pole at x={x}")
    if x < 0.5:
        # reflection: Gamma(x) Gamma(1-x) = pi / sin(pi x)
        return math.pi / (math.sin(math.pi * x) * gamma(1.0 - x))
    x -= 1.0
    acc = _LANCZOS_COEF[0]
    for i, c in enumerate(_LANCZOS_COEF[1:], start=1):
        acc += c / (x + i)
    t = x + _LANCZOS_G + 0.5
    return math.sqrt(2.0 * math.pi) * t ** (x + 0.5) * math.exp(-t) * acc


@dataclass(frozen=True)
class HypParams:
    """The three parameters (A, B, C) of 2F1."""

    a: float
    b: float
    c: float

    def __post_init__(self) -> None:
        if _is_nonpositive_integer(self.c):
            raise ParameterError(f"C={self.c} is a nonpositive integer; series undefined")

    @property
    def terminates(self) -> bool:
        """True when A or B is a nonpositive integer, making 2F1 a polynomial."""
        return _is_nonpositive_integer(self.a) or _is_nonpositive_integer(self.b)


def _hyp2f1_series(a: float, b: float, c: float, z: float) -> float:
    """Raw power series sum_n (A)_n (B)_n / ((C)_n n!) z^n."""
    term = 1.0
    total = 1.0
    for n in range(MAX_TERMS):
        term *= (a + n) * (b + n) / ((c + n) * (n + 1)) * z
        if term == 0.0:
            return total
        total += term
        if abs(term) < SERIES_RTOL * abs(total):
            return total
    raise DomainError(
        f"2F1 series did not converge in {MAX_TERMS} terms at z={z} (A={a}, B={b}, C={c})"
    )


def hyp2f1_at_one(p: HypParams) -> float:
    """Gauss's evaluation 2F1(A,B,C;1) = G(C)G(C-A-B) / (G(C-A)G(C-B)).

    Requires C > A + B unless the series terminates (A or B a nonpositive
    integer), in which case the finite sum is evaluated directly.
    """
    if p.terminates:
        return _hyp2f1_series(p.a, p.b, p.c, 1.0)
    s = p.c - p.a - p.b
    if s <= 0:
        raise DomainError(f"2F1 at z=1 diverges: C-A-B={s} <= 0")
    return gamma(p.c) * gamma(s) / (gamma(p.c - p.a) * gamma(p.c - p.b))


def _hyp2f1_near_one(p: HypParams, z: float) -> float:
    """Two-term connection in terms of solutions around z=1.

    2F1(A,B,C;z) = c1 * 2F1(A,B,A+B-C+1;1-z)
                 + c2 * (1-z)^(C-A-B) * 2F1(C-A,C-B,C-A-B+1;1-z)
    valid when C-A-B is not an integer.
    """
    a, b, c = p.a, p.b, p.c
    s = c - a - b
    w = 1.0 - z
    c1 = gamma(c) * gamma(s) / (gamma(c - a) * gamma(c - b))
    c2 = gamma(c) * gamma(-s) / (gamma(a) * gamma(b))
    return c1 * _hyp2f1_series(a, b, 1.0 - s, w) + c2 * w ** s * _hyp2f1_series(
        c - a, c - b, 1.0 + s, w
    )


def hyp2f1(p: HypParams, z: float) -> float:
    """2F1(A,B,C; z) for real z in [0, 1].

    Uses the defining series for z <= 0.9; beyond that switches to the
    connection formula around z=1 (Gamma-ratio coefficients), unless the
    series terminates or the connection exponent C-A-B is an integer, in
    which case the series is used throughout.  z=1 requires C > A+B.
    """
    if z < 0.0 or z > 1.0:
        raise DomainError(f"z={z} outside [0, 1]")
    if z == 1.0:
        return hyp2f1_at_one(p)
    if p.terminates or z <= SERIES_Z_CUTOFF:
        return _hyp2f1_series(p.a, p.b, p.c, z)
    s = p.c - p.a - p.b
    if abs(s - round(s)) < 1e-9 or _is_nonpositive_integer(p.a) or _is_nonpositive_integer(p.b):
        # Degenerate connection; the series still converges for z < 1.
        return _hyp2f1_series(p.a, p.b, p.c, z)
    return _hyp2f1_near_one(p, z)


@dataclass(frozen=True)
class Params:
    """Global (kappa, nu) parameterization with the derived exponents.

    h = (6-kappa)/(2 kappa), a = (nu+2)/kappa, b = (nu+2)(nu+6-kappa)/(4 kappa).
    `low_nu` flags nu <= max(-4, kappa/2-6), where the reflected solution
    branch applies.
    """

    kappa: float
    nu: float
    h: float = field(init=False)
    a: float = field(init=False)
    b: float = field(init=False)

    def __post_init__(self) -> None:
        if not 0.0 < self.kappa < 8.0:
            raise ParameterError(f"kappa={self.kappa} outside (0, 8)")
        object.__setattr__(self, "h", (6.0 - self.kappa) / (2.0 * self.kappa))
        object.__setattr__(self, "a", (self.nu + 2.0) / self.kappa)
        object.__setattr__(
            self, "b", (self.nu + 2.0) * (self.nu + 6.0 - self.kappa) / (4.0 * self.kappa)
        )

    @property
    def low_nu(self) -> bool:
        return self.nu <= max(-4.0, self.kappa / 2.0 - 6.0)

    def hyp_high(self) -> HypParams:
        """2F1 parameters of the principal solution branch."""
        k, n = self.kappa, self.nu
        return HypParams((2.0 * n + 4.0) / k, 1.0 - 4.0 / k, (2.0 * n + 8.0) / k)

    def hyp_reflect(self) -> HypParams:
        """2F1 parameters of G in the reflected branch."""
        k, n = self.kappa, self.nu
        return HypParams((2.0 * n + 12.0 - k) / k, 4.0 / k, 8.0 / k)


def g_reflect(par: Params, z: float) -> float:
    """The companion function G of the reflected branch, G(0)=1."""
    return hyp2f1(par.hyp_reflect(), z)


def f_hsle(par: Params, z: float) -> float:
    """Drift-weight solution F of the Euler ODE, on z in [0, 1].

    High-nu regime (nu > max(-4, kappa/2-6)): the principal 2F1 branch,
    F(0)=1.  Otherwise the reflected form (1-z)^(8/kappa-1) G(1-z).
    """
    if par.low_nu:
        w = 1.0 - z
        if w == 0.0:
            return 0.0 if par.kappa < 8.0 else 1.0
        return w ** (8.0 / par.kappa - 1.0) * g_reflect(par, w)
    return hyp2f1(par.hyp_high(), z)


def f_hsle_prime(par: Params, z: float) -> float:
    """dF/dz in closed form.

    High-nu regime: ((nu+2)/(nu+4)) (1-4/kappa) (1-z)^(8/kappa-2)
    * 2F1(4/kappa, (12+2nu)/kappa-1, (8+2nu)/kappa+1; z).  The reflected
    branch is differentiated term by term through G and the power prefactor.
    """
    k, n = par.kappa, par.nu
    if par.low_nu:
        p = 8.0 / k - 1.0
        w = 1.0 - z
        hp = par.hyp_reflect()
        g = hyp2f1(hp, w)
        gp = (
            hp.a * hp.b / hp.c
            * hyp2f1(HypParams(hp.a + 1.0, hp.b + 1.0, hp.c + 1.0), w)
        )
        # d/dz [ w^p G(w) ] with w = 1-z
        return -p * w ** (p - 1.0) * g - w ** p * gp
    if n == -2.0:
        return 0.0
    if n == -4.0:
        raise ParameterError("closed-form derivative undefined at nu=-4")
    pref = ((n + 2.0) / (n + 4.0)) * (1.0 - 4.0 / k)
    return pref * (1.0 - z) ** (8.0 / k - 2.0) * hyp2f1(
        HypParams(4.0 / k, (12.0 + 2.0 * n) / k - 1.0, (8.0 + 2.0 * n) / k + 1.0), z
    )


def euler_ode_residual(par: Params, z: float, step: float) -> float:
    """Finite-difference residual of the Euler hypergeometric ODE at z.

    Evaluates z(1-z) F'' + ((2nu+8)/kappa - ((2nu+2kappa)/kappa) z) F'
    - (2(nu+2)(kappa-4)/kappa^2) F with centered differences of F itself;
    O(step^2) for smooth F when z +- step stays inside (0, 1).
    """
    if not (0.0 < z - step and z + step < 1.0):
        raise DomainError(f"stencil z+-step leaves (0,1): z={z}, step={step}")
    k, n = par.kappa, par.nu
    fm = f_hsle(par, z - step)
    f0 = f_hsle(par, z)
    fp = f_hsle(par, z + step)
    d1 = (fp - fm) / (2.0 * step)
    d2 = (fp - 2.0 * f0 + fm) / (step * step)
    return (
        z * (1.0 - z) * d2
        + ((2.0 * n + 8.0) / k - (2.0 * n + 2.0 * k) / k * z) * d1
        - 2.0 * (n + 2.0) * (k - 4.0) / (k * k) * f0
    )
