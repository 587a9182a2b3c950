import itertools

import pytest

from slelab.linkpatterns import (
    CapacityError,
    LinkPattern,
    PatternError,
    catalan,
    enumerate_patterns,
)


def brute_force_noncrossing(n):
    """Oracle: all perfect matchings of 1..2n filtered by the crossing predicate."""
    def matchings(points):
        if not points:
            yield ()
            return
        first = points[0]
        for i in range(1, len(points)):
            pair = (first, points[i])
            rest = points[1:i] + points[i + 1:]
            for m in matchings(rest):
                yield (pair,) + m

    def crossing(m):
        for (a, b), (c, d) in itertools.combinations(m, 2):
            if a < c < b < d or c < a < d < b:
                return True
        return False

    return {frozenset(map(frozenset, m))
            for m in matchings(tuple(range(1, 2 * n + 1))) if not crossing(m)}


def as_key(p: LinkPattern):
    return frozenset(frozenset(l) for l in p.links)


def test_empty_pattern():
    pats = enumerate_patterns(0)
    assert len(pats) == 1 and pats[0].links == ()


def test_lp2_exact_contents():
    got = {as_key(p) for p in enumerate_patterns(2)}
    assert got == {
        frozenset({frozenset({1, 4}), frozenset({2, 3})}),
        frozenset({frozenset({1, 2}), frozenset({3, 4})}),
    }


def test_counts_match_brute_force_and_catalan():
    for n in range(1, 6):
        pats = enumerate_patterns(n)
        assert len(pats) == catalan(n)
        assert len(set(map(as_key, pats))) == len(pats)  # no duplicates
        assert {as_key(p) for p in pats} == brute_force_noncrossing(n)


def test_counts_catalan_up_to_8():
    for n, c in [(6, 132), (7, 429), (8, 1430)]:
        assert len(enumerate_patterns(n)) == c == catalan(n)


def test_enumeration_guard():
    with pytest.raises(CapacityError):
        enumerate_patterns(13)


def test_crossing_rejected():
    with pytest.raises(PatternError):
        LinkPattern([(1, 3), (2, 4)])


def test_cover_violation_rejected():
    with pytest.raises(PatternError):
        LinkPattern([(1, 2), (2, 3)])


def test_remove_link_simple():
    assert LinkPattern([(1, 2)]).remove_link((1, 2)).links == ()
    assert LinkPattern([(1, 4), (2, 3)]).remove_link((1, 4)).links == ((1, 2),)


def test_remove_link_missing():
    with pytest.raises(PatternError):
        LinkPattern([(1, 2), (3, 4)]).remove_link((1, 3))


def test_remove_link_always_valid_exhaustive():
    for n in range(1, 6):
        for pat in enumerate_patterns(n):
            for link in pat.links:
                out = pat.remove_link(link)
                assert out.n == n - 1  # constructor re-validates


def test_split_examples():
    r, l = LinkPattern([(1, 4), (2, 3)]).split((1, 4))
    assert r.links == ((1, 2),) and l.links == ()
    r, l = LinkPattern([(1, 2), (3, 4)]).split((1, 2))
    assert r.links == () and l.links == ((1, 2),)


def test_split_sizes_exhaustive_lp3():
    for pat in enumerate_patterns(3):
        for link in pat.links:
            r, l = pat.split(link)
            assert r.n + l.n == pat.n - 1


def test_split_valid_exhaustive():
    for n in range(1, 6):
        for pat in enumerate_patterns(n):
            for link in pat.links:
                r, l = pat.split(link)
                assert r.n + l.n == n - 1


def test_text_round_trip():
    for n in range(0, 5):
        for pat in enumerate_patterns(n):
            assert LinkPattern.parse(pat.format()) == pat


def test_parse_errors():
    with pytest.raises(PatternError):
        LinkPattern.parse("1-2-3")
    with pytest.raises(PatternError):
        LinkPattern.parse("bogus")
