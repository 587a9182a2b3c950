"""Monte Carlo pure partition functions for N >= 3 via the cascade identity.

One link of the pattern is grown as a chordal curve between its endpoints.
The quad is first mapped so that the link runs from 0 to infinity: the chain
is then a plain transient SLE, both complementary components stay open, and
every group functional (log-derivatives, pairwise log-spreads, cross-ratios)
converges at power rates by the capacity horizon.  Growing the curve toward
a finite target instead (the naive epsilon-swallowing surrogate) loses the
interior group's cross-ratio: exterior harmonic measure concentrates through
the pinching neck and the squeezed images degenerate.

Groups with more than two links recurse with nested Monte Carlo.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .ensemble import StepOpts, run_chunked
from .linkpatterns import LinkPattern
from .partition import avoid_probability_from_z
from .special import HypParams, Params, hyp2f1, hyp2f1_at_one
from .stats import MCEstimate, from_samples

__all__ = ["MCConfig", "estimate_pure_z", "symmetry_report", "DegenerateEstimateError"]


class DegenerateEstimateError(RuntimeError):
    """Every sample was rejected; the estimate carries no information."""


@dataclass(frozen=True)
class MCConfig:
    n_paths: int = 2000
    dt: float = 1e-4
    epsilon_target: float = 1e-4    # swallow tolerance for the avoidance test
    seed: int = 0
    max_recursion_depth: int = 4
    workers: int = 0
    n_paths_inner: int = 128         # nested sample size for N >= 3 sub-factors
    trigger: float = 2500.0
    horizon_factor: float = 50.0

    def __post_init__(self) -> None:
        if self.n_paths < 100:
            raise ValueError("n_paths >= 100 required")
        if self.dt > 1e-3:
            raise ValueError("dt <= 1e-3 required")
        if self.epsilon_target > 1e-3:
            raise ValueError("epsilon_target <= 1e-3 required")


class _FTable:
    """log of the four-point drift family F on a z grid, for batched rows."""

    def __init__(self, kappa: float, size: int = 8193):
        hp = HypParams(4.0 / kappa, 1.0 - 4.0 / kappa, 8.0 / kappa)
        self.zs = np.linspace(0.0, 1.0, size)
        self.log_f = np.log([hyp2f1(hp, float(z)) for z in self.zs])
        self.log_f1 = math.log(hyp2f1_at_one(hp))

    def __call__(self, z: np.ndarray) -> np.ndarray:
        return np.interp(np.clip(z, 0.0, 1.0), self.zs, self.log_f)


_NESTED = LinkPattern([(1, 4), (2, 3)])
_SIDE = LinkPattern([(1, 2), (3, 4)])


def _log_pure_z_from_spreads(
    par: Params, pattern: LinkPattern, ls: np.ndarray, table: _FTable
) -> np.ndarray:
    """Row-wise log pure partition values for N <= 2 from log spreads.

    ls[:, i, j] = log(V_j - V_i) for the group's columns in increasing
    order; all ratios live in log space.  The cross-ratio complement uses
    1 - z = d21 d30 / (d20 d31), so z near either end stays exact.
    """
    n = pattern.n
    if n == 0:
        return np.zeros(len(ls))
    h = par.h
    if n == 1:
        return -2.0 * h * ls[:, 0, 1]
    if n == 2:
        log_z = ls[:, 0, 1] + ls[:, 2, 3] - ls[:, 0, 2] - ls[:, 1, 3]
        log_1mz = ls[:, 1, 2] + ls[:, 0, 3] - ls[:, 0, 2] - ls[:, 1, 3]
        if pattern == _NESTED:
            return (
                -2.0 * h * (ls[:, 0, 3] + ls[:, 1, 2])
                + (2.0 / par.kappa) * log_z
                + table(np.exp(log_z))
                - table.log_f1
            )
        if pattern == _SIDE:
            return (
                -2.0 * h * (ls[:, 0, 1] + ls[:, 2, 3])
                + (2.0 / par.kappa) * log_1mz
                + table(np.exp(log_1mz))
                - table.log_f1
            )
        raise ValueError(f"unknown four-point pattern {pattern.links}")
    raise ValueError("batched closed forms cover N <= 2 only")


def _cyclic_outer(alpha: LinkPattern, a_k: int, b_k: int) -> LinkPattern:
    """The complement-arc pattern relabeled in cyclic order from b_k + 1."""
    n2 = 2 * alpha.n
    seq = list(range(b_k + 1, n2 + 1)) + list(range(1, a_k))
    rank = {orig: i + 1 for i, orig in enumerate(seq)}
    links = [
        (rank[a], rank[b])
        for a, b in alpha.links
        if a in rank and b in rank
    ]
    return LinkPattern(links)


def estimate_pure_z(
    par: Params,
    alpha: LinkPattern,
    points,
    k: int,
    cfg: MCConfig,
    _depth: int = 0,
) -> MCEstimate:
    """Cascade Monte Carlo estimate of the pure partition function.

    `k` indexes the link of `alpha` (canonical order) grown as the chordal
    curve.  Deterministic for N = 1; otherwise the kernel prefactor
    H(x_a, x_b)^h times the sample mean of the split-domain product, each
    factor read off the transient chain's log-derivatives and log-spreads at
    the capacity horizon.  For kappa in (4, 6] a path whose marked image
    pinches before the horizon fails the avoidance indicator and scores zero.
    """
    points = [float(x) for x in points]
    if not 0.0 < par.kappa <= 6.0:
        raise ValueError("cascade construction requires kappa in (0, 6]")
    if len(points) != 2 * alpha.n:
        raise ValueError(f"{len(points)} points for N={alpha.n}")
    if any(b <= a for a, b in zip(points, points[1:])):
        raise ValueError("points must be strictly increasing")
    if _depth > cfg.max_recursion_depth:
        raise RecursionError(f"cascade recursion deeper than {cfg.max_recursion_depth}")
    a_k, b_k = alpha.links[k]
    xa, xb = points[a_k - 1], points[b_k - 1]
    log_pref = -2.0 * par.h * math.log(xb - xa)
    if alpha.n == 1:
        return MCEstimate(mean=math.exp(log_pref), stderr=0.0, n=cfg.n_paths)

    inner, _ = alpha.split((a_k, b_k))
    outer = _cyclic_outer(alpha, a_k, b_k)
    # map the link to (0, infinity): u = (x - xa)/(xb - x); the interior arc
    # fills the positive axis, the complement arc (cyclic from b_k + 1) the
    # negative axis, both in ascending order
    inside_orig = list(range(a_k + 1, b_k))
    outside_orig = list(range(b_k + 1, 2 * alpha.n + 1)) + list(range(1, a_k))

    def phi(x):
        return (x - xa) / (xb - x)

    def log_dphi(x):
        return math.log(xb - xa) - 2.0 * math.log(abs(xb - x))

    u_out = [phi(points[j - 1]) for j in outside_orig]
    u_in = [phi(points[j - 1]) for j in inside_orig]
    positions = np.array(u_out + u_in)     # ascending: negatives then positives
    out_cols = list(range(len(u_out)))
    in_cols = list(range(len(u_out), len(u_out) + len(u_in)))
    log_w0 = log_pref + par.h * sum(
        log_dphi(points[j - 1]) for j in inside_orig + outside_orig
    )
    umax = max(np.abs(positions).max(), 1.0)
    horizon = cfg.horizon_factor * umax * umax
    reject_on_pinch = par.kappa > 4.0
    # kappa > 4: a column dies (is pocketed) once its gap pinches to
    # eps_death; E_k fails when a group pinches while its far end stays
    # macroscopic (a clean jump-over pockets the far end along).  At
    # kappa <= 4 marked points are never swallowed: a column dies only by
    # crossing at the dt floor, a truncation event of negligible weight.
    eps_death = cfg.epsilon_target * 1e-2 * umax if reject_on_pinch else 0.0
    table = _FTable(par.kappa)
    # dips below floor_gap carry negligible weight; flooring dt there keeps
    # critically-recurrent dips (kappa=4) from stalling the capacity clock
    floor_gap = 3e-5 * umax
    opts = StepOpts(dt=cfg.dt, mode="continuous", trigger=cfg.trigger,
                    growth=True, dt_max=horizon / 500.0,
                    dt_floor=floor_gap * floor_gap / cfg.trigger)
    sides = np.where(positions >= 0.0, 1.0, -1.0)
    pairs = [(g[i], g[j]) for g in (in_cols, out_cols)
             for i in range(len(g)) for j in range(i + 1, len(g))]
    # column pairs of the split patterns' links: the product of their kernel
    # combinations exp(h(ld_a + ld_b) - 2h ls_ab) bounds the path weight
    # (power-law bound) and decreases monotonically, so hopeless paths can
    # be retired early with a zero score
    link_cols = [
        (cols[a - 1], cols[b - 1])
        for pattern, cols in ((inner, in_cols), (outer, out_cols))
        for a, b in pattern.links
    ]
    sqrt_k = math.sqrt(par.kappa)
    m = len(positions)
    # initial value of the weight bound; the retirement threshold is
    # relative to it
    log_w0_rel = -2.0 * par.h * sum(
        math.log(positions[b] - positions[a]) for (a, b) in link_cols
    ) if link_cols else 0.0

    def eval_group(pattern, cols, ls_full, ld, depth):
        """log Z of one split group from log spreads, batched."""
        if pattern.n == 0:
            return np.zeros(len(ld))
        lds = ld[:, cols].sum(axis=1)
        mm = len(cols)
        ls = np.zeros((len(ld), mm, mm))
        for a in range(mm):
            for b in range(a + 1, mm):
                ls[:, a, b] = ls_full[:, cols[a], cols[b]]
        if pattern.n <= 2:
            return par.h * lds + _log_pure_z_from_spreads(par, pattern, ls, table)
        # nested Monte Carlo: rebuild each squeezed configuration from its
        # adjacent spreads (anchored at 0 with unit first gap; scale
        # covariance restores the rest) and recurse
        out = np.empty(len(ld))
        sub_cfg = MCConfig(
            n_paths=max(cfg.n_paths_inner, 100), dt=cfg.dt,
            epsilon_target=cfg.epsilon_target,
            seed=cfg.seed + 7919 * (depth + 1),
            max_recursion_depth=cfg.max_recursion_depth,
            n_paths_inner=cfg.n_paths_inner, trigger=cfg.trigger,
            horizon_factor=cfg.horizon_factor,
        )
        for i in range(len(ld)):
            rel = np.concatenate(
                [[0.0], np.cumsum(np.exp([ls[i, a, a + 1] - ls[i, 0, 1]
                                          for a in range(mm - 1)]))]
            )
            sub = estimate_pure_z(par, pattern, rel, 0, sub_cfg, _depth=depth + 1)
            log_val = math.log(max(sub.mean, 1e-300)) \
                - 2.0 * par.h * pattern.n * ls[i, 0, 1]
            out[i] = par.h * lds[i] + log_val
        return out

    def chunk(jc, size, rng):
        w = np.zeros(size)
        v = np.tile(positions, (size, 1))
        ld = np.zeros((size, m))
        ls = np.zeros((size, m, m))
        for (a, b) in pairs:
            ls[:, a, b] = math.log(positions[b] - positions[a])
        t = np.zeros(size)
        idx = np.arange(size)
        dead = np.zeros((size, m), dtype=bool)
        rejected = np.zeros(size, dtype=bool)
        zeroed = np.zeros(size, dtype=bool)
        finished = np.zeros(size, dtype=bool)
        ld_fin = np.empty((size, m))
        ls_fin = np.empty((size, m, m))
        avoid_factor = np.ones(size)
        vals = np.zeros(size)

        def residual_avoid(i):
            """Conditional chance the remaining plain chain keeps E_k, for
            groups not yet pinched (kappa > 4 heavy-tailed swallow times)."""
            if not reject_on_pinch:
                return 1.0
            plain = Params(kappa=par.kappa, nu=-2.0)
            factor = 1.0
            if in_cols and not dead[i, in_cols].any():
                zlo = (v[i, in_cols[0]] - w[i]) / (v[i, in_cols[-1]] - w[i])
                factor *= avoid_probability_from_z(
                    plain, min(max(zlo, 1e-12), 1 - 1e-12))
            if out_cols and not dead[i, out_cols].any():
                zlo = (w[i] - v[i, out_cols[-1]]) / (w[i] - v[i, out_cols[0]])
                factor *= avoid_probability_from_z(
                    plain, min(max(zlo, 1e-12), 1 - 1e-12))
            return factor

        iters = 0
        while len(idx) and iters < 600_000:
            iters += 1
            gaps = (v - w[:, None]) * sides[None, :]
            live_gaps = np.where(dead, np.inf, np.maximum(gaps, 1e-30))
            mg2 = live_gaps.min(axis=1) ** 2
            dts = np.minimum(opts.effective(mg2),
                             np.maximum(horizon - t, 0.0) + 1e-12)
            # dead (pocketed) columns stay frozen: their kernel data has
            # converged at the pinch, as the transient-limit identity prices
            inv = np.where(dead, 0.0, 1.0 / (v - w[:, None]))
            ld_prev = ld.copy()
            ls_prev = ls[idx].copy()
            for (a, b) in pairs:
                ls[idx, a, b] -= 2.0 * dts * np.abs(inv[:, a] * inv[:, b])
            v = v + 2.0 * dts[:, None] * inv
            ld = ld - 2.0 * dts[:, None] * inv * inv
            w = w + sqrt_k * np.sqrt(dts) * rng.standard_normal(len(idx))
            t = t + dts
            gaps = (v - w[:, None]) * sides[None, :]
            newly = (gaps <= eps_death) & ~dead
            if newly.any():
                for i in np.nonzero(newly.any(axis=1))[0]:
                    cols = set(np.nonzero(newly[i])[0].tolist())
                    # revert the corrupting final step for the dying columns
                    for c in cols:
                        ld[i, c] = ld_prev[i, c]
                    for (a, b) in pairs:
                        if a in cols or b in cols:
                            ls[idx[i], a, b] = ls_prev[i, a, b]
                    dead[i, list(cols)] = True
            if reject_on_pinch:
                # a group is touched when it has pinched columns while its
                # far end is still macroscopic; mid-cascade states (far end
                # between the thresholds) resolve over later iterations
                for grp, far in ((in_cols, in_cols[-1] if in_cols else None),
                                 (out_cols, out_cols[0] if out_cols else None)):
                    if far is None:
                        continue
                    pinched = dead[:, grp].any(axis=1)
                    far_ok = (gaps[:, far] > 100.0 * eps_death) & ~dead[:, far]
                    rejected[idx[pinched & far_ok]] = True
            log_bound = np.zeros(len(idx))
            for (a, b) in link_cols:
                log_bound += par.h * (ld[:, a] + ld[:, b]) \
                    - 2.0 * par.h * ls[idx, a, b]
            worthless = log_bound < math.log(1e-12) + log_w0_rel
            done = rejected[idx] | worthless | (t >= horizon - 1e-9)
            if done.any():
                for i in np.nonzero(done)[0]:
                    p = idx[i]
                    finished[p] = True
                    if rejected[p]:
                        continue
                    if worthless[i]:
                        zeroed[p] = True        # provably negligible weight
                    else:
                        ld_fin[p] = ld[i]
                        ls_fin[p] = ls[p]
                        avoid_factor[p] = residual_avoid(i)
                keep = ~done
                w, v, ld, t, idx, dead = (
                    w[keep], v[keep], ld[keep], t[keep], idx[keep], dead[keep]
                )
        # iteration-cap leftovers are truncated at their current state
        for i in range(len(idx)):
            p = idx[i]
            finished[p] = True
            ld_fin[p] = ld[i]
            ls_fin[p] = ls[p]
            avoid_factor[p] = residual_avoid(i)
        ok = finished & ~rejected & ~zeroed
        if ok.any():
            log_in = eval_group(inner, in_cols, ls_fin[ok], ld_fin[ok], _depth)
            log_out = eval_group(outer, out_cols, ls_fin[ok], ld_fin[ok], _depth)
            vals[ok] = avoid_factor[ok] * np.exp(log_w0 + log_in + log_out)
        return {"vals": vals, "rejected": rejected}

    out = run_chunked(cfg.n_paths, cfg.seed, chunk, cfg.workers)
    vals = np.concatenate([o["vals"] for o in out])
    rejected = np.concatenate([o["rejected"] for o in out])
    if rejected.all():
        raise DegenerateEstimateError("all cascade samples rejected")
    return from_samples(vals)


def symmetry_report(
    par: Params, alpha: LinkPattern, points, cfg: MCConfig
) -> list[dict]:
    """One cascade estimate per link of alpha, with pairwise z-scores.

    Links share the base seed but draw from per-link sub-streams.
    """
    rows = []
    for k in range(alpha.n):
        sub_cfg = MCConfig(
            n_paths=cfg.n_paths, dt=cfg.dt, epsilon_target=cfg.epsilon_target,
            seed=cfg.seed + 1_000_003 * k,
            max_recursion_depth=cfg.max_recursion_depth, workers=cfg.workers,
            n_paths_inner=cfg.n_paths_inner, trigger=cfg.trigger,
            horizon_factor=cfg.horizon_factor,
        )
        est = estimate_pure_z(par, alpha, points, k, sub_cfg)
        rows.append({"k": k, "link": alpha.links[k], "estimate": est})
    for row in rows:
        row["z_vs_others"] = [
            row["estimate"].z_against(other["estimate"])
            for other in rows if other is not row
        ]
    return rows
