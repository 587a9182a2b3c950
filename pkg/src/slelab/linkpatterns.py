"""Planar pair partitions (link patterns) of {1..2N}."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

__all__ = ["LinkPattern", "enumerate_patterns", "catalan"]

MAX_ENUMERATION_N = 12


class CapacityError(ValueError):
    """Enumeration request above the combinatorial guard."""


class PatternError(ValueError):
    """Malformed or non-planar link pattern."""


def catalan(n: int) -> int:
    c = 1
    for i in range(n):
        c = c * 2 * (2 * i + 1) // (i + 2)
    return c


@dataclass(frozen=True)
class LinkPattern:
    """A noncrossing perfect matching of {1..2N}.

    Canonical form: each link stored as (min, max), links sorted by first
    coordinate.  Immutable and hashable.
    """

    links: tuple[tuple[int, int], ...]

    def __init__(self, links) -> None:
        canon = tuple(sorted((min(a, b), max(a, b)) for a, b in links))
        object.__setattr__(self, "links", canon)
        self._validate()

    def _validate(self) -> None:
        n2 = 2 * len(self.links)
        seen = sorted(x for pair in self.links for x in pair)
        if seen != list(range(1, n2 + 1)):
            raise PatternError(f"links do not exactly cover 1..{n2}: {self.links}")
        for a, b in self.links:
            for c, d in self.links:
                if a < c < b < d:
                    raise PatternError(f"crossing links {{{a},{b}}} and {{{c},{d}}}")

    @property
    def n(self) -> int:
        return len(self.links)

    def __iter__(self):
        return iter(self.links)

    def __contains__(self, pair) -> bool:
        a, b = pair
        return (min(a, b), max(a, b)) in self.links

    def remove_link(self, pair) -> "LinkPattern":
        """Drop one link and relabel the survivors onto 1..2(N-1), order kept."""
        key = (min(pair), max(pair))
        if key not in self.links:
            raise PatternError(f"link {key} not in pattern {self.links}")
        rest = [l for l in self.links if l != key]
        return _relabel(rest)

    def split(self, pair) -> tuple["LinkPattern", "LinkPattern"]:
        """Split on one link {a,b}: (inside pattern, outside pattern).

        The inside part collects links within {a+1..b-1}; the outside part
        the links among {1..a-1} u {b+1..2N} (relabelled by rank).  Planarity
        guarantees no link straddles the divider; violations raise.
        """
        a, b = min(pair), max(pair)
        if (a, b) not in self.links:
            raise PatternError(f"link {(a, b)} not in pattern {self.links}")
        inside, outside = [], []
        for l in self.links:
            if l == (a, b):
                continue
            lo_in, hi_in = a < l[0] < b, a < l[1] < b
            if lo_in != hi_in:
                raise PatternError(f"straddling link {l} across {(a, b)}; pattern corrupt")
            (inside if lo_in else outside).append(l)
        return _relabel(inside), _relabel(outside)

    def format(self) -> str:
        """Text form like '1-4,2-3'."""
        return ",".join(f"{a}-{b}" for a, b in self.links)

    @staticmethod
    def parse(text: str) -> "LinkPattern":
        """Parse the '1-4,2-3' text form (empty string -> empty pattern)."""
        text = text.strip()
        if not text:
            return LinkPattern(())
        try:
            pairs = [tuple(int(x) for x in chunk.split("-")) for chunk in text.split(",")]
        except ValueError as exc:
            raise PatternError(f"cannot parse pattern {text!r}") from exc
        if any(len(p) != 2 for p in pairs):
            raise PatternError(f"cannot parse pattern {text!r}")
        return LinkPattern(pairs)


def _relabel(links) -> LinkPattern:
    points = sorted(x for pair in links for x in pair)
    rank = {x: i + 1 for i, x in enumerate(points)}
    return LinkPattern(tuple((rank[a], rank[b]) for a, b in links))


@lru_cache(maxsize=None)
def enumerate_patterns(n: int) -> tuple[LinkPattern, ...]:
    """All noncrossing perfect matchings of {1..2n}, deterministic order.

    Recursive construction: 1 pairs with an even-offset partner 2k, splitting
    the rest into independent inside/outside blocks.  Count is Catalan(n).
    """
    if n > MAX_ENUMERATION_N:
        raise CapacityError(f"N={n} above enumeration guard {MAX_ENUMERATION_N}")
    if n < 0:
        raise PatternError("negative N")
    if n == 0:
        return (LinkPattern(()),)
    out: list[LinkPattern] = []
    for k in range(1, n + 1):
        partner = 2 * k
        for ins in enumerate_patterns(k - 1):
            ins_links = [(a + 1, b + 1) for a, b in ins.links]
            for outs in enumerate_patterns(n - k):
                out_links = [(a + partner, b + partner) for a, b in outs.links]
                out.append(LinkPattern([(1, partner), *ins_links, *out_links]))
    return tuple(out)
