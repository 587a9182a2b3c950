import numpy as np
import pytest

from slelab.martingales import (
    avoid_probability_mc,
    martingale_check_kappa4,
    martingale_start_value,
    poisson_martingale_identity,
    terminal_endpoint_kappa4,
)
from slelab.partition import avoid_probability
from slelab.special import Params


def test_endpoint_nu4_hits_quarter():
    r = terminal_endpoint_kappa4(nu=-4.0, points=(0, 1, 2, 3), n_paths=1500,
                                 dt=1e-4, seed=101)
    assert r.target == pytest.approx(0.25)
    assert abs(r.estimate.mean - r.target) < 4 * r.estimate.stderr + 0.01


def test_endpoint_nu6_hits_squared_target():
    r = terminal_endpoint_kappa4(nu=-6.0, points=(0, 1, 2, 3), n_paths=1500,
                                 dt=1e-4, seed=102)
    assert r.target == pytest.approx(0.0625)
    assert abs(r.estimate.mean - r.target) < 4 * r.estimate.stderr + 0.01


def test_endpoint_tracks_formula_across_geometries():
    # sweep the third point; the estimate must track z^alpha
    for x3, seed in [(1.5, 7), (2.5, 8)]:
        r = terminal_endpoint_kappa4(nu=-4.0, points=(0, 1, x3, 3), n_paths=800,
                                     dt=1e-4, seed=seed)
        assert abs(r.estimate.mean - r.target) < 4 * r.estimate.stderr + 0.02


def test_endpoint_rejects_invalid_nu():
    with pytest.raises(ValueError):
        terminal_endpoint_kappa4(nu=-3.0, points=(0, 1, 2, 3), n_paths=100)


def test_martingale_check_at_zero_time_is_exact():
    r = martingale_check_kappa4(nu=-4.0, points=(0, 1, 2, 3), n_paths=100,
                                t_check=0.0)
    assert r.estimate.mean == r.target
    assert r.estimate.stderr == 0.0


def test_martingale_check_fixed_time():
    r = martingale_check_kappa4(nu=-4.0, points=(0, 1, 2, 3), n_paths=1500,
                                t_check=0.05, dt=1e-4, seed=103)
    assert abs(r.estimate.mean - r.target) < 4 * r.estimate.stderr + 0.002


def test_martingale_constant_between_times():
    r1 = martingale_check_kappa4(nu=-4.0, points=(0, 1, 2, 3), n_paths=1200,
                                 t_check=0.05, dt=1e-4, seed=104)
    r2 = martingale_check_kappa4(nu=-4.0, points=(0, 1, 2, 3), n_paths=1200,
                                 t_check=0.10, dt=1e-4, seed=105)
    assert abs(r1.estimate.mean - r2.estimate.mean) < 4 * (
        r1.estimate.stderr + r2.estimate.stderr
    )


def test_avoid_mc_plain_sle6():
    par = Params(kappa=6.0, nu=-2.0)
    r = avoid_probability_mc(par, (0, 1, 2, 3), n_paths=1500, dt=2e-4, seed=106)
    assert r.target == pytest.approx(avoid_probability(par, 0, 1, 2, 3))
    assert abs(r.estimate.mean - r.target) < 4 * r.estimate.stderr + 0.01


def test_avoid_mc_above_band_avoids_almost_surely():
    # nu >= kappa/2 - 4: a.s. avoidance up to discretization leakage
    par = Params(kappa=5.0, nu=0.0)
    r = avoid_probability_mc(par, (0, 1, 2, 3), n_paths=400, dt=2e-4, seed=107)
    assert r.target == 1.0
    assert r.estimate.mean >= 0.99


def test_poisson_martingale_start_value_frozen():
    # kappa=3, nu=0, (x, y) = (1, 2): the normalized start value is exactly 3/4
    par = Params(kappa=3.0, nu=0.0)
    assert martingale_start_value(par, 1.0, 2.0) == pytest.approx(0.75, rel=1e-12)


def test_poisson_martingale_identity_small():
    par = Params(kappa=3.0, nu=0.0)
    r = poisson_martingale_identity(par, 1.0, 2.0, n_paths=1200, dt=1e-4, seed=108)
    assert abs(r.estimate.mean - 0.75) < 4 * r.estimate.stderr + 0.02
    assert r.extras["short_fraction"] <= 0.10


def test_poisson_martingale_trivial_nu_minus_two():
    par = Params(kappa=3.0, nu=-2.0)
    # b = 0: the kernel power is identically 1 on every path
    r = poisson_martingale_identity(par, 1.0, 2.0, n_paths=200, dt=2e-4, seed=109)
    assert r.estimate.mean == pytest.approx(1.0, abs=1e-12)
    assert r.target == pytest.approx(1.0, rel=1e-12)


def test_poisson_martingale_scaling_covariance():
    # doubling (x, y) multiplies both sides by 2^(-2b)
    par = Params(kappa=3.0, nu=0.0)
    base = martingale_start_value(par, 1.0, 2.0)
    scaled = martingale_start_value(par, 2.0, 4.0)
    assert scaled == pytest.approx(base * 2.0 ** (-2.0 * par.b), rel=1e-12)
    r = poisson_martingale_identity(par, 2.0, 4.0, n_paths=1200, dt=1e-4, seed=110)
    assert abs(r.estimate.mean - scaled) < 4 * r.estimate.stderr + 0.02


def test_experiments_are_seed_deterministic():
    a = terminal_endpoint_kappa4(nu=-4.0, points=(0, 1, 2, 3), n_paths=300,
                                 dt=2e-4, seed=42)
    b = terminal_endpoint_kappa4(nu=-4.0, points=(0, 1, 2, 3), n_paths=300,
                                 dt=2e-4, seed=42)
    assert a.estimate.mean == b.estimate.mean
    c = avoid_probability_mc(Params(kappa=6.0, nu=-2.0), (0, 1, 2, 3),
                             n_paths=300, seed=9)
    d = avoid_probability_mc(Params(kappa=6.0, nu=-2.0), (0, 1, 2, 3),
                             n_paths=300, seed=9)
    assert c.estimate.mean == d.estimate.mean


def test_worker_count_does_not_change_results():
    a = poisson_martingale_identity(Params(kappa=3.0, nu=0.0), 1.0, 2.0,
                                    n_paths=2500, dt=2e-4, seed=11, workers=0)
    b = poisson_martingale_identity(Params(kappa=3.0, nu=0.0), 1.0, 2.0,
                                    n_paths=2500, dt=2e-4, seed=11, workers=2)
    assert a.estimate.mean == b.estimate.mean


def test_result_row_shape():
    r = martingale_check_kappa4(nu=-4.0, points=(0, 1, 2, 3), n_paths=100,
                                t_check=0.0)
    row = r.row()
    for key in ("experiment", "estimate", "stderr", "target", "zscore", "n"):
        assert key in row


@pytest.mark.slow
def test_avoid_estimates_monotone_in_interval_width():
    # widening (x2, x3) lowers the empirical avoidance too
    par = Params(kappa=6.0, nu=-2.0)
    means = []
    for i, x3 in enumerate((1.5, 2.0, 2.5)):
        r = avoid_probability_mc(par, (0.0, 1.0, x3, 3.0), n_paths=800,
                                 dt=2e-4, seed=500 + i)
        means.append((r.estimate.mean, r.estimate.stderr))
    for (m1, s1), (m2, s2) in zip(means, means[1:]):
        assert m2 <= m1 + 3 * (s1 + s2), means
