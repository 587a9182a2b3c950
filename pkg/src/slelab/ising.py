"""Critical Ising interfaces on rectangular lattice domains.

Spins live on the dual cells of a width x height grid with prescribed
boundary arcs (plus / minus / free); the sampler is single-cluster Wolff with
frozen boundary spins (a cluster touching a frozen site is never flipped)
plus an interleaved Metropolis sweep, all jit-compiled.  Interfaces are
traced on the primal lattice with the left/right tie-breaking conventions;
crossing events are 4-adjacency component searches (8-adjacency for the
sharpened dual event).  Driving functions are extracted by uniformizing the
rectangle with the elliptic-sine map and running the discrete zipper.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np
from numba import njit
from scipy.optimize import brentq
from scipy.special import ellipj, ellipk
from scipy import ndimage

from .loewner import DrivingPath, driving_from_curve, resample_driving

__all__ = [
    "BETA_C",
    "LatticeDomain",
    "dobrushin_domain",
    "alternating_domain",
    "sample_critical",
    "trace_interface",
    "crossing_events",
    "crossing_events_dual",
    "extract_driving",
    "kappa_estimate",
    "rectangle_uniformizer",
]

# self-dual point of the square-lattice model: log(1 + sqrt(2)) / 2
BETA_C = 0.5 * math.log(1.0 + math.sqrt(2.0))

PLUS, MINUS, FREE = 1, -1, 0


@dataclass(frozen=True)
class LatticeDomain:
    """Rectangle of width x height spin cells with boundary arcs.

    The boundary ring is described by a single array of length
    2*(width+height) walking counterclockwise from the lower-left corner:
    bottom row (left to right), right column (bottom to top), top row (right
    to left), left column (top to bottom).  Entries are PLUS, MINUS or FREE.
    Marked boundary sites are primal-lattice vertices given as (x, y) pairs
    with x in 0..width, y in 0..height.
    """

    width: int
    height: int
    ring: tuple[int, ...]
    marks: tuple[tuple[int, int], ...] = ()

    def __post_init__(self) -> None:
        if len(self.ring) != 2 * (self.width + self.height):
            raise ValueError("ring length must be 2*(width+height)")

    def ring_padded(self) -> np.ndarray:
        """Spins on a (width+2) x (height+2) array with the frozen ring.

        Interior cells are zero; corners are FREE (never coupled).
        """
        w, hgt = self.width, self.height
        pad = np.zeros((w + 2, hgt + 2), dtype=np.int8)
        r = np.asarray(self.ring, dtype=np.int8)
        pad[1:w + 1, 0] = r[0:w]                        # bottom
        pad[w + 1, 1:hgt + 1] = r[w:w + hgt]            # right
        pad[1:w + 1, hgt + 1] = r[w + hgt:2 * w + hgt][::-1]   # top
        pad[0, 1:hgt + 1] = r[2 * w + hgt:][::-1]       # left
        return pad


def _ring_segment(w: int, h: int, side: str) -> slice:
    starts = {"bottom": 0, "right": w, "top": w + h, "left": 2 * w + h}
    lengths = {"bottom": w, "right": h, "top": w, "left": h}
    s = starts[side]
    return slice(s, s + lengths[side])


def dobrushin_domain(width: int, height: int) -> LatticeDomain:
    """Minus on the left half of the boundary, plus on the right half.

    The two arcs meet at the bottom-middle and top-middle primal vertices,
    which are the marked interface endpoints.
    """
    w, h = width, height
    ring = np.empty(2 * (w + h), dtype=int)
    half = w // 2
    ring[_ring_segment(w, h, "bottom")] = np.where(np.arange(w) < half, MINUS, PLUS)
    ring[_ring_segment(w, h, "right")] = PLUS
    top = np.where(np.arange(w)[::-1] < half, MINUS, PLUS)
    ring[_ring_segment(w, h, "top")] = top
    ring[_ring_segment(w, h, "left")] = MINUS
    return LatticeDomain(w, h, tuple(ring), marks=((half, 0), (half, h)))


def alternating_domain(width: int, height: int,
                       top: int = MINUS) -> LatticeDomain:
    """Minus on the bottom arc, plus on left and right, `top` on the top arc.

    The default MINUS gives the alternating plus/minus/plus/minus quad with
    the four corners marked; passing FREE or PLUS varies the top arc for the
    boundary-comparison experiments.
    """
    w, h = width, height
    ring = np.empty(2 * (w + h), dtype=int)
    ring[_ring_segment(w, h, "bottom")] = MINUS
    ring[_ring_segment(w, h, "right")] = PLUS
    ring[_ring_segment(w, h, "top")] = top
    ring[_ring_segment(w, h, "left")] = PLUS
    marks = ((0, 0), (w, 0), (w, h), (0, h))
    return LatticeDomain(w, h, tuple(ring), marks=marks)


# ------------------------------------------------------------------ sampler

@njit(cache=True)
def _splitmix64(state):
    state = (state + 0x9E3779B97F4A7C15) & 0xFFFFFFFFFFFFFFFF
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & 0xFFFFFFFFFFFFFFFF
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & 0xFFFFFFFFFFFFFFFF
    return state, z ^ (z >> 31)


@njit(cache=True)
def _rand_u01(state):
    state, z = _splitmix64(state)
    return state, (z >> 11) * (1.0 / 9007199254740992.0)


@njit(cache=True)
def _wolff_once(spins, frozen, p_add, state, stack, in_cluster):
    """One Wolff update; returns the new RNG state.

    Grows a same-spin cluster with bond probability p_add, including frozen
    sites; a cluster containing any frozen site is left unflipped.
    """
    nx, ny = spins.shape
    state, u = _rand_u01(state)
    sx = 1 + int(u * (nx - 2))
    state, u = _rand_u01(state)
    sy = 1 + int(u * (ny - 2))
    target = spins[sx, sy]
    if target == 0:
        return state
    n_sites = 0
    stack[n_sites, 0] = sx
    stack[n_sites, 1] = sy
    n_sites = 1
    in_cluster[sx, sy] = True
    head = 0
    pinned = False
    while head < n_sites:
        cx, cy = stack[head, 0], stack[head, 1]
        head += 1
        for d in range(4):
            nx_, ny_ = cx, cy
            if d == 0:
                nx_ += 1
            elif d == 1:
                nx_ -= 1
            elif d == 2:
                ny_ += 1
            else:
                ny_ -= 1
            if nx_ < 0 or nx_ >= nx or ny_ < 0 or ny_ >= ny:
                continue
            if in_cluster[nx_, ny_] or spins[nx_, ny_] != target:
                continue
            state, u = _rand_u01(state)
            if u < p_add:
                in_cluster[nx_, ny_] = True
                if frozen[nx_, ny_]:
                    pinned = True
                else:
                    stack[n_sites, 0] = nx_
                    stack[n_sites, 1] = ny_
                    n_sites += 1
    if not pinned:
        for i in range(n_sites):
            spins[stack[i, 0], stack[i, 1]] *= -1
    # clear the visit marks
    for i in range(n_sites):
        in_cluster[stack[i, 0], stack[i, 1]] = False
    if pinned:
        in_cluster[:] = False
    return state


@njit(cache=True)
def _metropolis_sweep(spins, frozen, beta, state):
    nx, ny = spins.shape
    for x in range(1, nx - 1):
        for y in range(1, ny - 1):
            if frozen[x, y]:
                continue
            s = spins[x, y]
            nb = spins[x + 1, y] + spins[x - 1, y] + spins[x, y + 1] + spins[x, y - 1]
            de = 2.0 * s * nb
            if de <= 0.0:
                spins[x, y] = -s
            else:
                state, u = _rand_u01(state)
                if u < math.exp(-beta * de):
                    spins[x, y] = -s
    return state


@njit(cache=True)
def _run_sampler(spins, frozen, beta, n_wolff, metro_every, state):
    p_add = 1.0 - math.exp(-2.0 * beta)
    nx, ny = spins.shape
    stack = np.empty((nx * ny, 2), dtype=np.int64)
    in_cluster = np.zeros((nx, ny), dtype=np.bool_)
    for k in range(n_wolff):
        state = _wolff_once(spins, frozen, p_add, state, stack, in_cluster)
        if metro_every > 0 and (k + 1) % metro_every == 0:
            state = _metropolis_sweep(spins, frozen, beta, state)
    return state


def sample_critical(
    dom: LatticeDomain,
    seed: int,
    sweeps: int | None = None,
    beta: float = BETA_C,
) -> np.ndarray:
    """An approximate critical sample with the domain's boundary condition.

    Returns the padded (width+2) x (height+2) spin array (ring included).
    Thermalization default: 10 * max(width, height) Wolff steps from a random
    configuration, with a Metropolis sweep every 8 cluster updates to relax
    boundary-pinned layers.  beta=0 is an exact independent-spin diagnostic.
    """
    size = max(dom.width, dom.height)
    if sweeps is None:
        sweeps = 10 * size
    pad = dom.ring_padded()
    frozen = np.zeros_like(pad, dtype=np.bool_)
    frozen[0, :] = frozen[-1, :] = True
    frozen[:, 0] = frozen[:, -1] = True
    rng = np.random.default_rng(np.random.SeedSequence(entropy=seed,
                                                       spawn_key=(0xB0A2,)))
    spins = pad.astype(np.int8)
    interior = ~frozen
    spins[interior] = rng.choice(np.array([-1, 1], dtype=np.int8),
                                 size=int(interior.sum()))
    if beta > 0.0:
        state = np.uint64(rng.integers(1, 2**63 - 1))
        _run_sampler(spins, frozen, beta, sweeps, 8, state)
    return spins


# ------------------------------------------------------------------ tracing

# directions on the primal lattice: 0=+x, 1=+y, 2=-x, 3=-y
_DX = (1, 0, -1, 0)
_DY = (0, 1, 0, -1)


def _cell_left(x, y, d):
    """Dual cell (padded coordinates) to the left of edge from (x,y) along d."""
    if d == 0:
        return (x + 1, y + 1)
    if d == 1:
        return (x, y + 1)
    if d == 2:
        return (x, y)
    return (x + 1, y)


def _cell_right(x, y, d):
    if d == 0:
        return (x + 1, y)
    if d == 1:
        return (x + 1, y + 1)
    if d == 2:
        return (x, y + 1)
    return (x, y)


class TracingError(RuntimeError):
    """The interface walker left the domain or found no admissible edge."""


def trace_interface(
    spins: np.ndarray,
    dom: LatticeDomain,
    start: tuple[int, int],
    chirality: str = "left",
    minus_on_left: bool = True,
) -> np.ndarray:
    """Trace the interface from a marked primal vertex.

    The path follows primal edges keeping minus spins on its left and plus on
    its right (or the mirrored convention); at ambiguous vertices it turns
    toward `chirality`.  Deterministic given the configuration; ends at
    another boundary vertex, which the Dobrushin arcs make the matching mark.
    Returns an array of (x, y) vertices.
    """
    w, h = dom.width, dom.height
    want_left = MINUS if minus_on_left else PLUS
    want_right = -want_left

    def admissible(x, y, d):
        lx, ly = _cell_left(x, y, d)
        rx, ry = _cell_right(x, y, d)
        sl, sr = spins[lx, ly], spins[rx, ry]
        return (sl == want_left or sl == 0) and (sr == want_right or sr == 0)

    x, y = start
    turns = (1, 0, 3) if chirality == "left" else (3, 0, 1)

    def next_direction(x, y, d_in):
        # edges one step beyond the rectangle are legal: their adjacent
        # cells are the frozen ring, and choosing one terminates the walk
        for turn in turns:
            d2 = (d_in + turn) % 4
            if admissible(x, y, d2):
                return d2
        return None

    # the walk enters through the boundary between the two arc cells, so the
    # incoming direction at the start is the inward normal of its side
    inward = []
    if y == 0:
        inward.append(1)
    if y == h:
        inward.append(3)
    if x == 0:
        inward.append(0)
    if x == w:
        inward.append(2)
    if not inward:
        raise TracingError(f"start {start} is not a boundary vertex")
    d = None
    for d_in in inward:
        d = next_direction(x, y, d_in)
        if d is not None:
            break
    if d is None:
        raise TracingError(f"no admissible first edge at {start}")
    path = [(x, y)]
    seen: set[tuple[int, int, int]] = set()
    guard = 8 * (w + 1) * (h + 1)
    for _ in range(guard):
        if (x, y, d) in seen:
            raise TracingError(f"walker re-entered state {(x, y, d)}")
        seen.add((x, y, d))
        x, y = x + _DX[d], y + _DY[d]
        if not (0 <= x <= w and 0 <= y <= h):
            return np.asarray(path)      # exited through the ring: done
        path.append((x, y))
        nxt = next_direction(x, y, d)
        if nxt is None:
            if x == 0 or x == w or y == 0 or y == h:
                return np.asarray(path)
            raise TracingError(f"walker stuck at {(x, y)}")
        d = nxt
    raise TracingError("walker failed to terminate")


# ------------------------------------------------------------------ crossings

def _arc_cells(dom: LatticeDomain, side: str) -> tuple[np.ndarray, np.ndarray]:
    """Padded-array indices of the ring cells on one side."""
    w, h = dom.width, dom.height
    if side == "bottom":
        return np.arange(1, w + 1), np.zeros(w, dtype=int)
    if side == "top":
        return np.arange(1, w + 1), np.full(w, h + 1)
    if side == "left":
        return np.zeros(h, dtype=int), np.arange(1, h + 1)
    return np.full(h, w + 1), np.arange(1, h + 1)


def _inward(dom, side):
    return {"bottom": (0, 1), "top": (0, -1), "left": (1, 0), "right": (-1, 0)}[side]


def _side_labels(labels, mask, spins, dom, side, value):
    """Component labels touching one boundary arc.

    Fixed arc cells of the right sign count directly; free (absent) arc
    cells delegate to their adjacent interior cell.
    """
    xs, ys = _arc_cells(dom, side)
    dx, dy = _inward(dom, side)
    out = set()
    for x, y in zip(xs, ys):
        if spins[x, y] == value and mask[x, y]:
            out.add(int(labels[x, y]))
        elif spins[x, y] == 0 and mask[x + dx, y + dy]:
            out.add(int(labels[x + dx, y + dy]))
    return out - {0}


def _crossing(spins, dom, value, from_side, to_side, structure) -> bool:
    w, h = dom.width, dom.height
    mask = np.zeros_like(spins, dtype=bool)
    mask[1:w + 1, 1:h + 1] = spins[1:w + 1, 1:h + 1] == value
    for side in (from_side, to_side):
        xs, ys = _arc_cells(dom, side)
        mask[xs, ys] = spins[xs, ys] == value
    labels, _ = ndimage.label(mask, structure=structure)
    src = _side_labels(labels, mask, spins, dom, from_side, value)
    if not src:
        return False
    dst = _side_labels(labels, mask, spins, dom, to_side, value)
    return bool(src & dst)


_FOUR = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]])
_EIGHT = np.ones((3, 3), dtype=int)


def crossing_events(spins: np.ndarray, dom: LatticeDomain) -> tuple[bool, bool]:
    """(vertical minus crossing, horizontal plus crossing), 4-adjacency."""
    c_v = _crossing(spins, dom, MINUS, "bottom", "top", _FOUR)
    c_h = _crossing(spins, dom, PLUS, "left", "right", _FOUR)
    return c_v, c_h


def crossing_events_dual(spins: np.ndarray, dom: LatticeDomain) -> tuple[bool, bool]:
    """The sharpened dual pair: 4-adjacency minus vs 8-adjacency plus.

    Exactly one of the two holds on every configuration with fixed arcs.
    """
    c_v = _crossing(spins, dom, MINUS, "bottom", "top", _FOUR)
    c_h = _crossing(spins, dom, PLUS, "left", "right", _EIGHT)
    return c_v, c_h


# ------------------------------------------------------------------ driving

@dataclass
class rectangle_uniformizer:
    """Conformal map of the open rectangle (0,w) x (0,h) onto the half-plane.

    z -> sn(2K z / w - K, k) with K'(k)/K(k) = 2h/w; the bottom-middle vertex
    goes to 0 and the top-middle to infinity, so a Dobrushin interface
    between those marks needs no further normalization.
    """

    width: float
    height: float
    modulus: float = field(init=False)
    quarter_period: float = field(init=False)

    def __post_init__(self) -> None:
        ratio = 2.0 * self.height / self.width

        def target(m):
            return ellipk(1.0 - m) / ellipk(m) - ratio

        m = brentq(target, 1e-12, 1.0 - 1e-12)
        object.__setattr__(self, "modulus", math.sqrt(m))
        object.__setattr__(self, "quarter_period", float(ellipk(m)))

    def __call__(self, z: np.ndarray) -> np.ndarray:
        z = np.asarray(z, dtype=complex)
        k = self.modulus
        m = k * k
        kk = self.quarter_period
        u = 2.0 * kk * z.real / self.width - kk
        vv = 2.0 * kk * z.imag / self.width
        sn_u, cn_u, dn_u, _ = ellipj(u, m)
        sn_v, cn_v, dn_v, _ = ellipj(vv, 1.0 - m)
        den = cn_v**2 + m * (sn_u * sn_v) ** 2
        re = sn_u * dn_v / den
        im = cn_u * dn_u * sn_v * cn_v / den
        return re + 1j * im


def extract_driving(
    path: np.ndarray, dom: LatticeDomain, dt: float = 1e-3,
    t_max: float | None = None,
) -> tuple[DrivingPath, int]:
    """Half-plane driving function of a lattice interface.

    Maps the rectangle to the half-plane with the elliptic uniformizer (the
    Dobrushin marks go to 0 and infinity), then runs the discrete zipper and
    resamples onto a uniform capacity grid.  Returns the path and the count
    of degenerate (zero-capacity) steps skipped by the zipper.
    """
    uni = rectangle_uniformizer(float(dom.width), float(dom.height))
    pts = np.asarray([complex(x, y) for x, y in path])
    # nudge off the boundary so sn stays finite; the first point stays real
    pts = pts + 1e-9j
    img = uni(pts)
    img[0] = complex(img[0].real, 0.0)
    keep = np.isfinite(img.real) & np.isfinite(img.imag)
    img = img[keep]
    img = np.where(img.imag < 0, img.real + 0j, img)
    ts, ws, skipped = driving_from_curve(img)
    if t_max is not None and ts[-1] > t_max:
        cut = int(np.searchsorted(ts, t_max)) + 1
        ts, ws = ts[:cut], ws[:cut]
    return resample_driving(ts, ws, dt), skipped


def kappa_estimate(drivings: Iterable[DrivingPath],
                   t_fit: float | None = None) -> tuple[float, float]:
    """Diffusivity estimate: regression of Var[W_t] on t, with its stderr.

    Fits through the origin over the first quartile of the shortest path's
    capacity span, or over [0, t_fit] when given (lattice interfaces need the
    window kept inside the pre-boundary diffusive regime: the uniformized
    capacity diverges toward the far mark).  Error from a path-resampling
    bootstrap.
    """
    drivings = list(drivings)
    if len(drivings) < 2:
        raise ValueError("need at least two driving paths")
    dt = drivings[0].dt
    n_keep = min(len(p.samples) for p in drivings)
    if t_fit is not None:
        n_keep = min(n_keep, max(int(t_fit / dt), 16))
        n_fit = n_keep
    else:
        n_fit = max(int(n_keep / 4), 4)
    data = np.stack([p.samples[:n_fit] - p.samples[0] for p in drivings])
    ts = dt * np.arange(n_fit)

    def slope(rows):
        var = rows.var(axis=0, ddof=1)
        return float(np.dot(var, ts) / np.dot(ts, ts))

    k_hat = slope(data)
    rng = np.random.default_rng(12345)
    boot = [
        slope(data[rng.integers(0, len(data), len(data))]) for _ in range(200)
    ]
    return k_hat, float(np.std(boot))


# ------------------------------------------------------------------ batteries

def rsw_domain(length: int) -> LatticeDomain:
    """A 3:1 quad with free short arcs and minus long arcs."""
    w, h = 3 * length, length
    ring = np.empty(2 * (w + h), dtype=int)
    ring[_ring_segment(w, h, "bottom")] = MINUS
    ring[_ring_segment(w, h, "top")] = MINUS
    ring[_ring_segment(w, h, "left")] = FREE
    ring[_ring_segment(w, h, "right")] = FREE
    return LatticeDomain(w, h, tuple(ring),
                         marks=((0, 0), (w, 0), (w, h), (0, h)))


def crossing_frequency(dom: LatticeDomain, n_samples: int, seed: int,
                       event: str = "h_plus") -> tuple[float, float]:
    """Empirical frequency of a crossing event with its standard error."""
    hits = 0
    for k in range(n_samples):
        spins = sample_critical(dom, seed=seed + k)
        c_v, c_h = crossing_events(spins, dom)
        hits += c_h if event == "h_plus" else c_v
    p = hits / n_samples
    return p, math.sqrt(max(p * (1 - p), 1.0 / n_samples) / n_samples)


def fkg_upgrade_check(size: int, n_samples: int, seed: int) -> dict:
    """P[plus crossing] must not decrease when the free arc becomes plus."""
    p_free, se_free = crossing_frequency(
        alternating_domain(size, size, top=FREE), n_samples, seed)
    p_plus, se_plus = crossing_frequency(
        alternating_domain(size, size, top=PLUS), n_samples, seed + 777_000)
    return {
        "p_free": p_free, "se_free": se_free,
        "p_plus": p_plus, "se_plus": se_plus,
        "passed": p_free <= p_plus + 3.0 * math.hypot(se_free, se_plus),
    }


def rsw_bound_check(lengths=(32, 64, 128), n_samples: int = 60,
                    seed: int = 0, c_floor: float = 0.05) -> dict:
    """Crossing frequency of 3:1 quads stays below 1 - c uniformly in size."""
    rows = []
    ok = True
    for i, length in enumerate(lengths):
        p, se = crossing_frequency(rsw_domain(length), n_samples,
                                   seed + 10_000 * i)
        rows.append({"length": length, "freq": p, "se": se})
        ok &= p <= 1.0 - c_floor
    return {"rows": rows, "passed": ok}


def dobrushin_kappa_experiment(size: int, n_samples: int, seed: int,
                               dt: float = 2e-3) -> dict:
    """Driving-function diffusivity of Dobrushin interfaces.

    The fit window is |phi(center)|^2 / 4: inside it the uniformized chain
    has not yet felt the far boundary.
    """
    dom = dobrushin_domain(size, size)
    uni = rectangle_uniformizer(float(size), float(size))
    center = uni(np.array([complex(size / 2, size / 2)]))[0]
    t_fit = abs(center) ** 2 / 4.0
    drivings = []
    skipped_total = 0
    for k in range(n_samples):
        spins = sample_critical(dom, seed=seed + k)
        path = trace_interface(spins, dom, dom.marks[0])
        drv, skipped = extract_driving(path, dom, dt=dt, t_max=4 * t_fit)
        skipped_total += skipped
        drivings.append(drv)
    slope, stderr = kappa_estimate(drivings, t_fit=t_fit)
    return {
        "size": size, "n": n_samples, "slope": slope, "stderr": stderr,
        "t_fit": t_fit, "skipped_steps": skipped_total, "seed": seed,
    }
