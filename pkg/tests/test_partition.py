import math

import numpy as np
import pytest

from slelab.geometry import MobiusMap, OrderError
from slelab.linkpatterns import LinkPattern
from slelab.partition import (
    asy_ratio,
    avoid_probability,
    bound_b_alpha,
    log_z_kappa_nu,
    pde_residual,
    pure_z,
    pure_z_n1,
    pure_z_n2,
    z_kappa_nu,
)
from slelab.special import DomainError, Params

NESTED = LinkPattern([(1, 4), (2, 3)])
SIDE = LinkPattern([(1, 2), (3, 4)])


def random_ordered_mobius(rng, pts):
    while True:
        phi = MobiusMap.random(rng)
        imgs = [phi(x) for x in pts]
        if all(b > a for a, b in zip(imgs, imgs[1:])) and all(
            abs(phi.deriv(x)) > 1e-6 for x in pts
        ):
            return phi, imgs


# ------------------------------------------------------------- z_kappa_nu

def test_z_kappa_nu_exponent_collapse_at_nu_minus_two():
    par = Params(kappa=3.0, nu=-2.0)
    assert z_kappa_nu(par, 0, 1, 2, 3) == pytest.approx(3.0 ** (-1.0), rel=1e-12)


def test_z_kappa_nu_frozen_value_kappa4():
    # independent scratchpad evaluation: h=1/4, b=1/4, a=1/2, F == 1
    par = Params(kappa=4.0, nu=0.0)
    assert z_kappa_nu(par, 0, 1, 2, 3) == pytest.approx(0.28867513459481288, rel=1e-12)


def test_z_kappa_nu_order_error():
    with pytest.raises(OrderError):
        z_kappa_nu(Params(kappa=3.0, nu=0.0), 0, 2, 1, 3)


def test_z_kappa_nu_mobius_covariance():
    rng = np.random.default_rng(21)
    pts = (0.0, 1.0, 2.5, 4.0)
    for (k, nu) in [(2.0, 1.0), (3.0, 0.0), (4.0, -1.0), (6.0, 0.0)]:
        par = Params(kappa=k, nu=nu)
        base = z_kappa_nu(par, *pts)
        weights = (par.h, par.b, par.b, par.h)
        for _ in range(50):
            phi, imgs = random_ordered_mobius(rng, pts)
            factor = math.prod(phi.deriv(x) ** w for x, w in zip(pts, weights))
            assert factor * z_kappa_nu(par, *imgs) == pytest.approx(base, rel=1e-8)


# ------------------------------------------------------------- pure Z

def test_pure_z_n1_values():
    assert pure_z_n1(Params(kappa=3.0, nu=0.0), 0.0, 1.0) == pytest.approx(1.0)
    assert pure_z_n1(Params(kappa=6.0, nu=0.0), -3.0, 14.0) == pytest.approx(1.0)
    assert pure_z_n1(Params(kappa=2.0, nu=0.0), 0.0, 2.0) == pytest.approx(0.25)


def test_pure_z_n2_frozen_kappa6():
    par = Params(kappa=6.0, nu=0.0)
    assert pure_z_n2(par, NESTED, 0, 1, 2, 3) == pytest.approx(
        0.37354879133423045, rel=1e-10
    )
    assert pure_z_n2(par, SIDE, 0, 1, 2, 3) == pytest.approx(
        0.62645120866576955, rel=1e-10
    )


def test_pure_z_n2_reflection_invariance():
    # the boundary reflection x -> -x (reversed) fixes both patterns
    rng = np.random.default_rng(5)
    for k in [2.0, 3.0, 4.0, 6.0]:
        par = Params(kappa=k, nu=0.0)
        for _ in range(25):
            x = np.sort(rng.uniform(-3, 3, size=4))
            if np.diff(x).min() < 1e-3:
                continue
            for pat in (NESTED, SIDE):
                za = pure_z_n2(par, pat, *x)
                zb = pure_z_n2(par, pat, *(-x[::-1]))
                assert za == pytest.approx(zb, rel=1e-10)


def test_pure_z_n2_exchange_under_complementary_cross_ratio():
    # the two patterns trade places under z <-> 1-z with swapped gap
    # prefactors; checked through the explicit assembled values
    rng = np.random.default_rng(6)
    for k in [2.0, 3.0, 6.0]:
        par = Params(kappa=k, nu=0.0)
        for _ in range(25):
            x = np.sort(rng.uniform(-3, 3, size=4))
            if np.diff(x).min() < 1e-3:
                continue
            from slelab.geometry import cross_ratio

            z = cross_ratio(*x)
            za = pure_z_n2(par, NESTED, *x)
            zb = pure_z_n2(par, SIDE, *x)
            ratio = za / zb
            pref = (((x[3] - x[0]) * (x[2] - x[1]))
                    / ((x[1] - x[0]) * (x[3] - x[2]))) ** (-2 * par.h)
            # za/zb = pref * [z^(2/k) F(z)] / [(1-z)^(2/k) F(1-z)]
            from slelab.special import HypParams, hyp2f1

            hp = HypParams(4 / k, 1 - 4 / k, 8 / k)
            want = pref * (z ** (2 / k) * hyp2f1(hp, z)) / (
                (1 - z) ** (2 / k) * hyp2f1(hp, 1 - z)
            )
            assert ratio == pytest.approx(want, rel=1e-10)


def test_pure_z_n2_partition_of_unity_at_kappa6():
    # h=0 at kappa=6: the two normalized pattern values are complementary
    # crossing probabilities and must sum to 1 on every quad.
    par = Params(kappa=6.0, nu=0.0)
    rng = np.random.default_rng(7)
    for _ in range(50):
        x = np.sort(rng.uniform(-4, 4, size=4))
        if np.diff(x).min() < 1e-3:
            continue
        total = pure_z_n2(par, NESTED, *x) + pure_z_n2(par, SIDE, *x)
        assert total == pytest.approx(1.0, rel=1e-9)


def test_pure_z_dispatcher():
    par = Params(kappa=3.0, nu=0.0)
    assert pure_z(par, LinkPattern(()), ()) == 1.0
    assert pure_z(par, LinkPattern([(1, 2)]), (0.0, 2.0)) == pytest.approx(0.5)
    with pytest.raises(ValueError):
        pure_z(par, LinkPattern([(1, 2)]), (0.0, 1.0, 2.0, 3.0))


def test_pure_z_mobius_covariance_weight_h_everywhere():
    rng = np.random.default_rng(31)
    pts = (0.0, 0.8, 2.2, 3.1)
    for k in [2.0, 3.0, 6.0]:
        par = Params(kappa=k, nu=0.0)
        for pat in (NESTED, SIDE):
            base = pure_z_n2(par, pat, *pts)
            for _ in range(30):
                phi, imgs = random_ordered_mobius(rng, pts)
                factor = math.prod(phi.deriv(x) ** par.h for x in pts)
                assert factor * pure_z_n2(par, pat, *imgs) == pytest.approx(
                    base, rel=1e-8
                )


# ------------------------------------------------------------- B_alpha

def test_bound_single_link_equals_n1():
    par = Params(kappa=3.0, nu=0.0)
    assert bound_b_alpha(par, LinkPattern([(1, 2)]), (0.3, 1.7)) == pytest.approx(
        pure_z_n1(par, 0.3, 1.7)
    )


def test_bound_kappa6_is_one():
    par = Params(kappa=6.0, nu=0.0)
    assert bound_b_alpha(par, NESTED, (0, 1, 2, 3)) == pytest.approx(1.0)


def test_power_law_bound_on_random_quads():
    rng = np.random.default_rng(41)
    for k in [2.0, 3.0, 4.0, 6.0]:
        par = Params(kappa=k, nu=0.0)
        for _ in range(250):
            x = np.sort(rng.uniform(-5, 5, size=4))
            if np.diff(x).min() < 1e-4:
                continue
            for pat in (NESTED, SIDE):
                z = pure_z_n2(par, pat, *x)
                assert 0.0 < z <= bound_b_alpha(par, pat, x) * (1 + 1e-12)


# ------------------------------------------------------------- PDE

def pure_n1_fun(par):
    return lambda pts: pure_z_n1(par, *pts)


def pure_n2_fun(par, pat):
    return lambda pts: pure_z_n2(par, pat, *pts)


def quad_fun(par):
    return lambda pts: z_kappa_nu(par, *pts)


def test_pde_residual_n1_small():
    par = Params(kappa=3.0, nu=0.0)
    f = pure_n1_fun(par)
    for i in (0, 1):
        r = pde_residual(f, 3.0, i, (0.0, 1.0), 1e-4)
        assert abs(r) / f((0.0, 1.0)) < 1e-5


def test_pde_residual_n2_contracts_all_indices():
    pts = (0.0, 1.0, 2.0, 3.0)
    for k in [2.0, 3.0, 4.0, 6.0]:
        par = Params(kappa=k, nu=0.0)
        for pat in (NESTED, SIDE):
            f = pure_n2_fun(par, pat)
            for i in range(4):
                r1 = pde_residual(f, k, i, pts, 2e-2)
                r2 = pde_residual(f, k, i, pts, 1e-2)
                assert 3.5 <= abs(r1 / r2) <= 4.5, (k, pat.links, i, r1, r2)


def test_pde_residual_quad_function_weights_b():
    pts = (0.0, 1.0, 2.0, 3.0)
    for (k, nu) in [(3.0, 0.0), (6.0, 0.5), (2.0, 1.0)]:
        par = Params(kappa=k, nu=nu)
        f = quad_fun(par)
        w = (par.h, par.b, par.b, par.h)
        for i in (0, 3):
            r1 = pde_residual(f, k, i, pts, 2e-2, weights=w)
            r2 = pde_residual(f, k, i, pts, 1e-2, weights=w)
            assert 3.5 <= abs(r1 / r2) <= 4.5, (k, nu, i)
            r3 = pde_residual(f, k, i, pts, 1e-3, weights=w)
            assert abs(r3) / f(pts) < 1e-4


def test_pde_richardson_contracts_faster():
    par = Params(kappa=3.0, nu=0.0)
    f = pure_n2_fun(par, NESTED)
    r1 = pde_residual(f, 3.0, 0, (0.0, 1.0, 2.0, 3.0), 4e-2, richardson=True)
    r2 = pde_residual(f, 3.0, 0, (0.0, 1.0, 2.0, 3.0), 2e-2, richardson=True)
    assert abs(r1 / r2) > 8.0  # ~16 for clean O(step^4)


# ------------------------------------------------------------- ASY

def collapse_extrapolate(par, f, j, pts, gaps=(1e-2, 1e-3, 1e-4)):
    """Three-point fit removing the gap^s and gap^1 corrections (s=8/kappa-1)."""
    s = 8.0 / par.kappa - 1.0
    exps = (s, 1.0) if abs(s - 1.0) > 1e-9 else (1.0, 2.0)
    g = np.asarray(gaps)
    vals = np.array([asy_ratio(par, f, j, pts, float(x)) for x in g])
    m = np.column_stack([np.ones(3), g ** exps[0], g ** exps[1]])
    return np.linalg.solve(m, vals)[0]


def test_asy_linked_pair_reaches_removed_function():
    pts = (0.0, 1.0, 2.0, 3.0)
    for k in [2.0, 3.0, 4.0, 6.0]:
        par = Params(kappa=k, nu=0.0)
        # side pattern, collapse (1,2) which is a link
        f = pure_n2_fun(par, SIDE)
        target = pure_z_n1(par, 2.0, 3.0)
        extrapolated = collapse_extrapolate(par, f, 0, pts)
        assert extrapolated == pytest.approx(target, rel=1e-3), k


def test_asy_unlinked_pair_decays_with_expected_exponent():
    pts = (0.0, 1.0, 2.0, 3.0)
    for k in [2.0, 3.0, 4.0, 6.0]:
        par = Params(kappa=k, nu=0.0)
        f = pure_n2_fun(par, NESTED)  # (1,2) is NOT a link here
        gaps = np.array([1e-2, 1e-3, 1e-4])
        ratios = np.array([asy_ratio(par, f, 0, pts, g) for g in gaps])
        slope = np.polyfit(np.log(gaps), np.log(ratios), 1)[0]
        expect = (8.0 - k) / k
        assert slope == pytest.approx(expect, rel=0.10), k


def test_asy_interior_collapse_nested_pattern():
    # nested pattern, collapse (2,3) which IS a link -> N=1 on outer points
    pts = (0.0, 1.0, 2.0, 3.0)
    par = Params(kappa=3.0, nu=0.0)
    f = pure_n2_fun(par, NESTED)
    target = pure_z_n1(par, 0.0, 3.0)
    assert collapse_extrapolate(par, f, 1, pts) == pytest.approx(target, rel=1e-3)


# ------------------------------------------------------------- avoid

def test_avoid_probability_one_above_band():
    par = Params(kappa=6.0, nu=0.0)  # nu >= kappa/2-4 = -1
    assert avoid_probability(par, 0, 1, 2, 3) == 1.0


def test_avoid_probability_frozen_kappa6():
    par = Params(kappa=6.0, nu=-2.0)  # plain SLE_6
    assert avoid_probability(par, 0, 1, 2, 3) == pytest.approx(
        0.3735487913342305, rel=1e-10
    )


def test_avoid_probability_monotone_in_interval_width():
    # widening (x2, x3) can only lower the avoidance chance
    par = Params(kappa=6.0, nu=-2.0)
    vals = [avoid_probability(par, 0.0, 1.0, x3, 4.0) for x3 in (1.5, 2.0, 2.5, 3.0)]
    assert all(b < a for a, b in zip(vals, vals[1:]))
    # shrinking the obstacle toward a point sends the chance to 1, at the
    # slow gap^(8/kappa - 1) rate of the z -> 1 corrections
    tail = [avoid_probability(par, 0.0, 1.0, 1.0 + g, 4.0)
            for g in (1e-6, 1e-9, 1e-12)]
    assert all(b > a for a, b in zip(tail, tail[1:]))
    assert tail[-1] == pytest.approx(1.0, abs=5e-3)


def test_avoid_probability_below_band_raises():
    par = Params(kappa=6.0, nu=-3.5)
    with pytest.raises(DomainError):
        avoid_probability(par, 0, 1, 2, 3)


def test_avoid_probability_in_unit_interval_across_band():
    rng = np.random.default_rng(8)
    for k in [5.0, 6.0, 7.0]:
        lo = max(-4.0, k / 2.0 - 6.0)
        hi = k / 2.0 - 4.0
        for nu in np.linspace(lo + 0.05, hi - 0.05, 5):
            par = Params(kappa=k, nu=float(nu))
            x = np.sort(rng.uniform(-2, 2, size=4))
            if np.diff(x).min() < 1e-2:
                continue
            p = avoid_probability(par, *x)
            assert 0.0 < p <= 1.0, (k, nu, x, p)
