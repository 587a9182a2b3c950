"""Vectorized multi-path Loewner chains for the Monte Carlo experiments.

An ensemble advances every live path by one (per-path adaptive) Euler step
per iteration; finished paths are removed so the work stays proportional to
the live count.  Paths are partitioned into fixed chunks of
`rngutil.ENSEMBLE_CHUNK`; chunk j draws from its own counter-based stream, so
estimates depend only on (seed, n_paths) and never on worker count.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Iterable

import numpy as np

from .rngutil import ENSEMBLE_CHUNK, chunk_rng
from .special import Params
from .loewner import hsle_drift_term

__all__ = [
    "StepOpts",
    "Chains",
    "drift_rho",
    "HsleDriftTable",
    "run_chunked",
]

# Floor for gap denominators; far below any stopping tolerance in use.
GLUE = 1e-12


@dataclass(frozen=True)
class StepOpts:
    """Per-step time control around the stiffness rule dt <= min_gap^2/trigger.

    mode "decades": divide the base dt by 10, up to `levels` times, while
    min_gap^2 < trigger * dt (the scalar engine's rule).  mode "continuous":
    track dt = min_gap^2 / trigger itself, clipped to [dt_floor, cap]; with
    `growth` the cap is dt_max instead of the base dt, which makes long
    transience horizons cheap and keeps collision cascades resolved at a
    fixed relative resolution.
    """

    dt: float
    trigger: float = 100.0
    mode: str = "decades"
    levels: int = 2
    dt_floor: float = 0.0
    growth: bool = False
    dt_max: float = math.inf

    def effective(self, min_gap2: np.ndarray) -> np.ndarray:
        if self.mode == "continuous":
            cap = self.dt_max if self.growth else self.dt
            return np.clip(min_gap2 / self.trigger, self.dt_floor, cap)
        dt = np.full_like(min_gap2, self.dt)
        for _ in range(self.levels):
            dt = np.where(min_gap2 < self.trigger * dt, dt / 10.0, dt)
        if self.growth:
            dt = np.maximum(dt, np.minimum(min_gap2 / self.trigger, self.dt_max))
        return dt


@dataclass
class Chains:
    """State arrays for a batch of chains with identically-labeled points.

    v[i, j] is the image of tracked point j on path i; ld its log-derivative;
    side[j] = +1 for points starting right of the seed, -1 left.
    """

    kappa: float
    t: np.ndarray        # (n,)
    w: np.ndarray        # (n,)
    v: np.ndarray        # (n, m)
    ld: np.ndarray       # (n, m)
    side: np.ndarray     # (m,)
    idx: np.ndarray      # (n,) original path indices

    @staticmethod
    def start(kappa: float, x0: float, positions: Iterable[float], n: int) -> "Chains":
        pos = np.asarray(list(positions), dtype=float)
        side = np.where(pos >= x0, 1.0, -1.0)
        return Chains(
            kappa=kappa,
            t=np.zeros(n),
            w=np.full(n, float(x0)),
            v=np.tile(pos, (n, 1)),
            ld=np.zeros((n, len(pos))),
            side=side,
            idx=np.arange(n),
        )

    @property
    def n(self) -> int:
        return len(self.w)

    def gaps(self) -> np.ndarray:
        """side * (V - W), positive for unswallowed points: (n, m)."""
        return (self.v - self.w[:, None]) * self.side[None, :]

    def keep(self, mask: np.ndarray) -> None:
        self.t = self.t[mask]
        self.w = self.w[mask]
        self.v = self.v[mask]
        self.ld = self.ld[mask]
        self.idx = self.idx[mask]

    def advance(self, drift: np.ndarray, dt: np.ndarray, xi: np.ndarray) -> None:
        """One Euler step: W += drift dt + sqrt(kappa dt) xi, V and log-derivs
        by the Loewner flow at the pre-step W.  Gaps are floored at GLUE so
        later arithmetic stays finite; callers stop paths before that matters.
        """
        w_old = self.w
        denom = self.v - w_old[:, None]
        denom = np.where(np.abs(denom) < GLUE, self.side[None, :] * GLUE, denom)
        self.v += 2.0 * dt[:, None] / denom
        self.ld -= 2.0 * dt[:, None] / (denom * denom)
        self.w = w_old + drift * dt + np.sqrt(self.kappa * dt) * xi
        self.t += dt
        # keep swallowed points glued on their own side of the driving value
        g = (self.v - self.w[:, None]) * self.side[None, :]
        crossed = g < GLUE
        if crossed.any():
            vfix = self.w[:, None] + self.side[None, :] * GLUE
            self.v = np.where(crossed, vfix, self.v)


def drift_rho(ch: Chains, rho: np.ndarray) -> np.ndarray:
    """sum_i rho_i / (W - V_i) rowwise; zero-weight columns are skipped."""
    out = np.zeros(ch.n)
    for j, r in enumerate(np.asarray(rho, dtype=float)):
        if r == 0.0:
            continue
        gap = ch.w - ch.v[:, j]
        gap = np.where(np.abs(gap) < GLUE, -ch.side[j] * GLUE, gap)
        out += r / gap
    return out


class HsleDriftTable:
    """Tabulated F'(z)(1-z)/F(z) on [0,1] for vectorized hypergeometric drift.

    4097-point linear interpolation; the term is smooth and bounded on [0,1]
    for kappa < 8, and identically zero at nu = -2.
    """

    def __init__(self, par: Params, size: int = 4097):
        self.par = par
        self.zs = np.linspace(0.0, 1.0, size)
        self.vals = np.array([hsle_drift_term(par, float(z)) for z in self.zs])

    def __call__(self, z: np.ndarray) -> np.ndarray:
        return np.interp(np.clip(z, 0.0, 1.0), self.zs, self.vals)

    def drift(self, ch: Chains, jx: int = 0, jy: int = 1) -> np.ndarray:
        """Drift of the hypergeometric driver with marked columns jx, jy."""
        nu = self.par.nu
        gx = ch.v[:, jx] - ch.w
        gy = ch.v[:, jy] - ch.w
        gx = np.maximum(gx, GLUE)
        gy = np.maximum(gy, GLUE)
        z = gx / gy
        return -(nu + 2.0) / gx + (nu + 2.0) / gy - ch.kappa * self(z) / gy


def run_chunked(
    n_paths: int,
    seed: int,
    chunk_fn: Callable[[int, int, np.random.Generator], dict],
    workers: int = 0,
) -> list[dict]:
    """Split n_paths into fixed chunks, run chunk_fn on each, in index order.

    chunk_fn(chunk_index, chunk_size, rng) -> dict of result arrays.  With
    workers > 0 the chunks are farmed to threads (the inner loops are
    vectorized numpy, which releases the GIL); results are identical to the
    sequential run because streams are derived per chunk.
    """
    sizes = []
    left = n_paths
    while left > 0:
        take = min(ENSEMBLE_CHUNK, left)
        sizes.append(take)
        left -= take
    if workers and len(sizes) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futs = [
                pool.submit(_run_one_chunk, chunk_fn, j, size, seed)
                for j, size in enumerate(sizes)
            ]
            return [f.result() for f in futs]
    return [_run_one_chunk(chunk_fn, j, size, seed) for j, size in enumerate(sizes)]


def _run_one_chunk(chunk_fn, j: int, size: int, seed: int) -> dict:
    return chunk_fn(j, size, chunk_rng(seed, j))
