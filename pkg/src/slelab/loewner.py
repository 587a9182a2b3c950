"""Chordal Loewner-chain engine.

Forward Euler-Maruyama drivers for SLE_kappa, SLE_kappa(rho...) and the
hypergeometric variant; evolution of tracked boundary images and their
log-derivatives; continuation-threshold and swallowing detection; backward
slit-map trace reconstruction and the inverse (zipper) driving extraction.

Scalar, single-path code lives here; the vectorized multi-path engine used by
the Monte Carlo experiments is in `ensemble`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .rngutil import path_rng
from .special import Params, f_hsle, g_reflect, hyp2f1, HypParams

__all__ = [
    "SWALLOW_EPS",
    "TrackedPoint",
    "LoewnerState",
    "BrownianDriver",
    "SleRhoDriver",
    "HsleDriver",
    "DrivingPath",
    "Trace",
    "make_state",
    "drift_sle_rho",
    "drift_hsle",
    "hsle_drift_term",
    "step",
    "sample_path",
    "trace_from_path",
    "driving_from_curve",
    "target_change_driver",
]

# Swallow tolerance in capacity units (scaled by the driver's point scale).
SWALLOW_EPS = 1e-6

# Sub-divide dt by 10 (up to MAX_SUBSTEP_LEVELS times) while
# min_gap^2 < SUBSTEP_TRIGGER * dt.
SUBSTEP_TRIGGER = 100.0
MAX_SUBSTEP_LEVELS = 2


class StateCorruptionError(RuntimeError):
    """An internal invariant of the chain state failed."""


@dataclass
class TrackedPoint:
    label: str
    v: float                  # image g_t(x)
    log_deriv: float = 0.0    # log g_t'(x); <= 0 for real points off the hull
    swallowed: bool = False
    rho: float = 0.0          # force weight; 0 for passive markers
    side: int = 1             # +1 if started right of the seed, -1 left


@dataclass
class LoewnerState:
    t: float
    w: float
    tracked: list[TrackedPoint]
    eps: float = SWALLOW_EPS

    def point(self, label: str) -> TrackedPoint:
        for p in self.tracked:
            if p.label == label:
                return p
        raise KeyError(label)

    def gap(self, label: str) -> float:
        p = self.point(label)
        return p.side * (p.v - self.w)


@dataclass(frozen=True)
class BrownianDriver:
    """Plain SLE_kappa: dW = sqrt(kappa) dB."""

    kappa: float
    x0: float = 0.0
    marks: tuple[tuple[str, float], ...] = ()   # passive tracked points


@dataclass(frozen=True)
class SleRhoDriver:
    """SLE_kappa(rho_1, ..., rho_n) with force points."""

    kappa: float
    force: tuple[tuple[float, float], ...]      # (position, rho)
    x0: float = 0.0
    marks: tuple[tuple[str, float], ...] = ()


@dataclass(frozen=True)
class HsleDriver:
    """Hypergeometric SLE from x0 to infinity with marked points x < y."""

    kappa: float
    nu: float
    x: float
    y: float
    x0: float = 0.0
    marks: tuple[tuple[str, float], ...] = ()

    def __post_init__(self) -> None:
        if not self.x0 < self.x < self.y:
            raise ValueError(f"need x0 < x < y, got {(self.x0, self.x, self.y)}")

    @property
    def params(self) -> Params:
        return Params(kappa=self.kappa, nu=self.nu)


DriverSpec = BrownianDriver | SleRhoDriver | HsleDriver


def _scale(spec: DriverSpec) -> float:
    pts = [abs(x - spec.x0) for _, x in spec.marks]
    if isinstance(spec, SleRhoDriver):
        pts += [abs(x - spec.x0) for x, _ in spec.force]
    elif isinstance(spec, HsleDriver):
        pts += [abs(spec.x - spec.x0), abs(spec.y - spec.x0)]
    return max(pts, default=1.0) or 1.0


def make_state(spec: DriverSpec) -> LoewnerState:
    tracked: list[TrackedPoint] = []
    if isinstance(spec, SleRhoDriver):
        for i, (x, rho) in enumerate(spec.force):
            tracked.append(TrackedPoint(f"force{i}", x, rho=rho,
                                        side=1 if x >= spec.x0 else -1))
    elif isinstance(spec, HsleDriver):
        tracked.append(TrackedPoint("x", spec.x, side=1))
        tracked.append(TrackedPoint("y", spec.y, side=1))
    for label, x in spec.marks:
        tracked.append(TrackedPoint(label, x, side=1 if x >= spec.x0 else -1))
    return LoewnerState(t=0.0, w=spec.x0, tracked=tracked,
                        eps=SWALLOW_EPS * _scale(spec))


def drift_sle_rho(state: LoewnerState, spec: SleRhoDriver) -> float:
    """Sum of rho_i / (W - V_i) over force points.

    Swallowed right-side points keep contributing through their glued
    (rightmost-hull) image, with the gap floored at the swallow tolerance.
    """
    total = 0.0
    for p in state.tracked:
        if p.rho == 0.0 or not p.label.startswith("force"):
            continue
        gap = state.w - p.v
        if abs(gap) < state.eps:
            gap = -p.side * state.eps
        total += p.rho / gap
    return total


def hsle_drift_term(par: Params, z: float) -> float:
    """F'(z) (1-z) / F(z), the hypergeometric part of the drift, stably.

    In the principal branch F'(z)(1-z) = pref * (1-z)^(8/kappa-1) * 2F1(...),
    which stays bounded as z -> 1 for kappa < 8.
    """
    k, n = par.kappa, par.nu
    if n == -2.0:
        return 0.0
    if z >= 1.0:
        return 0.0
    if par.low_nu:
        # F = w^p G(w), w = 1-z:  F'(z)(1-z) = -(p w^p G(w) + w^(p+1) G'(w))
        p = 8.0 / k - 1.0
        w = 1.0 - z
        hp = par.hyp_reflect()
        g = g_reflect(par, w)
        gp = hp.a * hp.b / hp.c * hyp2f1(HypParams(hp.a + 1, hp.b + 1, hp.c + 1), w)
        num = -(p * w ** p * g + w ** (p + 1.0) * gp)
        return num / (w ** p * g)
    pref = ((n + 2.0) / (n + 4.0)) * (1.0 - 4.0 / k)
    num = pref * (1.0 - z) ** (8.0 / k - 1.0) * hyp2f1(
        HypParams(4.0 / k, (12.0 + 2.0 * n) / k - 1.0, (8.0 + 2.0 * n) / k + 1.0), z
    )
    return num / f_hsle(par, z)


def drift_hsle(state: LoewnerState, spec: HsleDriver) -> float:
    """(nu+2)/(W-Vx) - (nu+2)/(W-Vy) - kappa (F'/F)(Z) (1-Z)/(Vy-W)."""
    px, py = state.point("x"), state.point("y")
    if py.swallowed:
        return 0.0  # past the swallowing of y the chain runs as plain SLE
    vx, vy = px.v, py.v
    w = state.w
    z = (vx - w) / (vy - w)
    if z < -1e-9 or z > 1.0 + 1e-9:
        raise StateCorruptionError(f"cross-ratio coordinate Z={z} outside [0,1]")
    z = min(max(z, 0.0), 1.0)
    nu = spec.nu
    return (
        (nu + 2.0) / (w - vx)
        - (nu + 2.0) / (w - vy)
        - spec.kappa * hsle_drift_term(spec.params, z) / (vy - w)
    )


def drift(state: LoewnerState, spec: DriverSpec) -> float:
    if isinstance(spec, BrownianDriver):
        return 0.0
    if isinstance(spec, SleRhoDriver):
        return drift_sle_rho(state, spec)
    return drift_hsle(state, spec)


def step(state: LoewnerState, drift_value: float, dw: float, dt: float) -> LoewnerState:
    """One explicit Euler step; returns a new state.

    W <- W + drift dt + dw; every live V advances by 2 dt/(V - W_old), its
    log-derivative by -2 dt/(V - W_old)^2.  Points whose gap falls below the
    tolerance are flagged swallowed and glued at the tolerance (never raised).
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    w_old = state.w
    w_new = w_old + drift_value * dt + dw
    tracked = []
    for p in state.tracked:
        if p.swallowed:
            # rightmost-image convention: ride along glued to the hull base
            v = p.v + (2.0 * dt / (p.v - w_old) if abs(p.v - w_old) > state.eps else 0.0)
            v = p.side * max(p.side * (v - w_new), state.eps) + w_new
            tracked.append(replace(p, v=v))
            continue
        gap_old = p.v - w_old
        v = p.v + 2.0 * dt / gap_old
        ld = p.log_deriv - 2.0 * dt / (gap_old * gap_old)
        swallowed = p.side * (v - w_new) < state.eps
        if swallowed:
            v = w_new + p.side * state.eps
        tracked.append(replace(p, v=v, log_deriv=ld, swallowed=swallowed))
    return LoewnerState(t=state.t + dt, w=w_new, tracked=tracked, eps=state.eps)


@dataclass
class DrivingPath:
    """Driving function on a uniform capacity grid t_k = k dt."""

    dt: float
    samples: np.ndarray           # W at t = 0, dt, 2 dt, ...
    seed: int | None = None
    driver: str = ""
    stop_reason: str = "horizon"
    stop_time: float = 0.0

    @property
    def times(self) -> np.ndarray:
        return self.dt * np.arange(len(self.samples))


@dataclass
class Trace:
    """Reconstructed planar curve, gamma(t_k) in the closed upper half-plane."""

    points: np.ndarray            # complex
    dt: float


def _dt_effective(base_dt: float, min_gap2: float) -> float:
    dt = base_dt
    for _ in range(MAX_SUBSTEP_LEVELS):
        if min_gap2 >= SUBSTEP_TRIGGER * dt:
            break
        dt /= 10.0
    return dt


def sample_path(
    spec: DriverSpec,
    horizon: float,
    dt: float,
    seed: int,
    stop_labels: tuple[str, ...] = (),
    path_index: int = 0,
) -> tuple[DrivingPath, LoewnerState]:
    """Simulate dW = sqrt(kappa) dB + drift dt up to the capacity horizon.

    Stops early at the continuation threshold (colliding force weights
    summing to <= -2) or when any label in `stop_labels` is swallowed; the
    stop reason is recorded.  Samples are recorded on the uniform outer grid;
    adaptive sub-stepping near collisions is internal.  Deterministic given
    (seed, path_index).
    """
    rng = path_rng(seed, path_index)
    state = make_state(spec)
    sqrt_kappa = math.sqrt(spec.kappa)
    n_outer = int(round(horizon / dt))
    samples = np.empty(n_outer + 1)
    samples[0] = state.w
    stop_reason, stop_time = "horizon", horizon
    k = 0
    for k in range(1, n_outer + 1):
        rem = dt
        stopped = False
        while rem > 0.0:
            gaps2 = [
                (p.v - state.w) ** 2 for p in state.tracked if not p.swallowed
            ]
            h = min(_dt_effective(dt, min(gaps2)) if gaps2 else dt, rem)
            dw = sqrt_kappa * math.sqrt(h) * rng.standard_normal()
            state = step(state, drift(state, spec), dw, h)
            rem -= h
            newly = [p for p in state.tracked if p.swallowed]
            if newly:
                colliding_rho = sum(
                    p.rho for p in state.tracked
                    if p.swallowed and abs(p.v - state.w) <= 2.0 * state.eps
                )
                if colliding_rho <= -2.0:
                    stop_reason, stop_time = "threshold", state.t
                    stopped = True
                elif any(p.label in stop_labels for p in newly):
                    lbl = next(p.label for p in newly if p.label in stop_labels)
                    stop_reason, stop_time = f"swallow:{lbl}", state.t
                    stopped = True
            if stopped:
                break
        samples[k] = state.w
        if stopped:
            samples = samples[: k + 1]
            break
    path = DrivingPath(
        dt=dt,
        samples=samples,
        seed=seed,
        driver=repr(spec),
        stop_reason=stop_reason,
        stop_time=min(stop_time, state.t),
    )
    return path, state


def target_change_driver(kappa: float, from_x: float, to_x: float) -> SleRhoDriver:
    """Chordal SLE_kappa from `from_x` to `to_x` as a chain aimed at infinity.

    A single force point at the target with weight kappa - 6; valid up to the
    swallowing of the target.
    """
    if from_x == to_x:
        raise ValueError("source and target coincide")
    return SleRhoDriver(kappa=kappa, force=((to_x, kappa - 6.0),), x0=from_x)


# ------------------------------------------------------------------ traces

def _inv_slit(w: np.ndarray, c: float, dtau: float) -> np.ndarray:
    """Inverse elementary map H -> H minus a vertical slit of capacity dtau at c.

    Written as u sqrt(1 - 4 dtau / u^2) so the principal branch cut sits
    exactly on the welded segment [c - 2 sqrt(dtau), c + 2 sqrt(dtau)] and the
    map behaves like the identity at infinity.
    """
    u = np.asarray(w, dtype=complex) - c
    with np.errstate(divide="ignore", invalid="ignore"):
        s = u * np.sqrt(1.0 - 4.0 * dtau / (u * u))
    return c + np.where(u == 0, 0.0, s)


def trace_from_path(path: DrivingPath, stride: int = 1) -> Trace:
    """Reconstruct the curve by backward composition of elementary slit maps.

    Each interval uses the midpoint driving value; the tip of step k is the
    image of c_k + 2 i sqrt(dt) under the first k-1 inverse maps.  O(n^2/stride)
    with vectorized inner updates.
    """
    w = np.asarray(path.samples, dtype=float)
    n = len(w) - 1
    if n < 1:
        return Trace(points=np.array([complex(w[0], 0.0)]), dt=path.dt)
    c = 0.5 * (w[:-1] + w[1:])           # midpoint driving per interval
    dt = path.dt
    keep = np.arange(1, n + 1, stride)
    if keep[-1] != n:
        keep = np.append(keep, n)
    tips = c[keep - 1].astype(complex) + 2j * math.sqrt(dt)
    # tips[i] must receive maps f_{keep[i]-1}, ..., f_1 (in that order)
    start = np.searchsorted(keep, np.arange(1, n + 1), side="right")
    for j in range(n - 1, 0, -1):
        tips[start[j]:] = _inv_slit(tips[start[j]:], c[j - 1], dt)
    pts = np.concatenate([[complex(w[0], 0.0)], tips])
    pts = np.where(pts.imag < 0, pts.real + 0j, pts)  # clip FP dust below axis
    return Trace(points=pts, dt=dt * stride)


def _fwd_slit(w: np.ndarray, c: float, dtau: float) -> np.ndarray:
    """Forward elementary map sending the tip c + 2i sqrt(dtau) to c.

    u sqrt(1 + 4 dtau / u^2): the branch cut is the slit itself, the map is
    the identity at infinity, and the real axis maps to itself with signs
    preserved.
    """
    u = np.asarray(w, dtype=complex) - c
    with np.errstate(divide="ignore", invalid="ignore"):
        s = u * np.sqrt(1.0 + 4.0 * dtau / (u * u))
    return c + np.where(u == 0, 0.0, s)


def driving_from_curve(points: np.ndarray) -> tuple[np.ndarray, np.ndarray, int]:
    """Discrete zipper: recover (capacity times, driving values) from a curve.

    `points[0]` must be the real starting point.  Each subsequent point is
    absorbed by a vertical-slit map of capacity (Im w)^2 / 4 rooted at Re w.
    Returns (t, W) with t[0] = 0, plus the count of degenerate (zero
    capacity) steps that were skipped.
    """
    pts = np.asarray(points, dtype=complex)
    if abs(pts[0].imag) > 1e-9:
        raise ValueError("curve must start on the real axis")
    ts = [0.0]
    ws = [pts[0].real]
    live = pts[1:].copy()
    t = 0.0
    skipped = 0
    k = 0
    while k < len(live):
        wk = live[k]
        y = wk.imag
        if y <= 1e-12:
            skipped += 1
            k += 1
            continue
        c = wk.real
        dtau = y * y / 4.0
        t += dtau
        ts.append(t)
        ws.append(c)
        live[k + 1:] = _fwd_slit(live[k + 1:], c, dtau)
        k += 1
    return np.asarray(ts), np.asarray(ws), skipped


def resample_driving(ts: np.ndarray, ws: np.ndarray, dt: float) -> DrivingPath:
    """Linear-interpolate an irregular (t, W) series onto a uniform dt grid."""
    total = ts[-1]
    n = max(int(total / dt), 1)
    grid = dt * np.arange(n + 1)
    return DrivingPath(dt=dt, samples=np.interp(grid, ts, ws), driver="resampled")
