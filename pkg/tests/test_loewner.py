import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from slelab.loewner import (
    BrownianDriver,
    HsleDriver,
    SleRhoDriver,
    StateCorruptionError,
    Trace,
    drift_hsle,
    drift_sle_rho,
    driving_from_curve,
    hsle_drift_term,
    make_state,
    resample_driving,
    sample_path,
    step,
    target_change_driver,
    trace_from_path,
)
from slelab.special import Params


# ------------------------------------------------------------------ drifts

def test_drift_rho_zero_weights():
    spec = SleRhoDriver(kappa=4.0, force=((1.0, 0.0), (2.0, 0.0)))
    assert drift_sle_rho(make_state(spec), spec) == 0.0


def test_drift_rho_single_point():
    spec = SleRhoDriver(kappa=4.0, force=((1.0, 2.0),))
    assert drift_sle_rho(make_state(spec), spec) == pytest.approx(-2.0)


def test_drift_rho_symmetric_cancellation():
    spec = SleRhoDriver(kappa=4.0, force=((1.5, 1.0), (-1.5, 1.0)))
    assert drift_sle_rho(make_state(spec), spec) == pytest.approx(0.0)


def test_drift_hsle_nu_minus_two_vanishes():
    spec = HsleDriver(kappa=3.0, nu=-2.0, x=1.0, y=2.0)
    assert drift_hsle(make_state(spec), spec) == pytest.approx(0.0, abs=1e-14)


def test_drift_hsle_far_y_degenerates_to_single_force_point():
    # with y at 1e6 the drift approaches the SLE_kappa(nu+2) drift on x
    nu = 1.0
    spec = HsleDriver(kappa=3.0, nu=nu, x=1.0, y=1e6)
    got = drift_hsle(make_state(spec), spec)
    want = (nu + 2.0) / (0.0 - 1.0)
    assert got == pytest.approx(want, rel=1e-4)


def test_drift_hsle_kappa4_drops_hypergeometric_term():
    nu = 0.5
    spec = HsleDriver(kappa=4.0, nu=nu, x=1.0, y=2.0)
    got = drift_hsle(make_state(spec), spec)
    want = (nu + 2.0) / (0.0 - 1.0) - (nu + 2.0) / (0.0 - 2.0)
    assert got == pytest.approx(want, rel=1e-12)


def test_drift_hsle_state_corruption_detected():
    spec = HsleDriver(kappa=3.0, nu=0.0, x=1.0, y=2.0)
    state = make_state(spec)
    state.point("x").v = 5.0  # z > 1
    with pytest.raises(StateCorruptionError):
        drift_hsle(state, spec)


def test_hsle_drift_term_bounded_near_one():
    par = Params(kappa=6.0, nu=0.0)
    vals = [hsle_drift_term(par, z) for z in [0.9, 0.99, 0.999999, 1.0]]
    assert all(np.isfinite(vals))


# ------------------------------------------------------------------ stepping

def test_step_explicit_arithmetic():
    spec = BrownianDriver(kappa=2.0, marks=(("a", 1.0),))
    state = make_state(spec)
    out = step(state, 0.0, 0.0, 0.01)
    p = out.point("a")
    assert p.v == pytest.approx(1.02)
    assert p.log_deriv == pytest.approx(-0.02)
    assert out.t == pytest.approx(state.t + 0.01)


@given(
    v1=st.floats(0.1, 5.0),
    gap=st.floats(0.05, 5.0),
    dw=st.floats(-0.5, 0.5),
)
@settings(max_examples=200, deadline=None)
def test_step_preserves_order_of_right_points(v1, gap, dw):
    spec = BrownianDriver(kappa=2.0, marks=(("a", v1), ("b", v1 + gap)))
    state = make_state(spec)
    out = step(state, 0.0, dw, 1e-3)
    pa, pb = out.point("a"), out.point("b")
    if not (pa.swallowed or pb.swallowed):
        assert pa.v < pb.v
        assert pa.log_deriv <= 0.0 and pb.log_deriv <= 0.0


def test_step_flags_swallowed_and_glues():
    spec = BrownianDriver(kappa=2.0, marks=(("a", 1e-3),))
    state = make_state(spec)
    out = step(state, 0.0, 0.5, 1e-6)  # drive W past the point
    p = out.point("a")
    assert p.swallowed
    assert p.v >= out.w


# ------------------------------------------------------------------ sampling

def test_brownian_increment_variance():
    spec = BrownianDriver(kappa=3.0)
    path, _ = sample_path(spec, horizon=10.0, dt=1e-3, seed=42)
    inc = np.diff(path.samples)
    n = len(inc)
    var = inc.var()
    target = 3.0 * 1e-3
    # chi^2 3-sigma band around kappa dt
    assert abs(var - target) < 3.0 * target * math.sqrt(2.0 / n)


def test_same_seed_identical_paths():
    spec = SleRhoDriver(kappa=4.0, force=((1.0, 1.0),))
    p1, _ = sample_path(spec, horizon=0.2, dt=1e-3, seed=9)
    p2, _ = sample_path(spec, horizon=0.2, dt=1e-3, seed=9)
    assert np.array_equal(p1.samples, p2.samples)
    p3, _ = sample_path(spec, horizon=0.2, dt=1e-3, seed=10)
    assert not np.array_equal(p1.samples, p3.samples)


def test_continuation_threshold_triggers_for_heavy_rho():
    spec = SleRhoDriver(kappa=4.0, force=((1e-4, -2.5),))
    hits = 0
    for i in range(50):
        path, _ = sample_path(spec, horizon=2.0, dt=1e-3, seed=100 + i)
        if path.stop_reason == "threshold":
            hits += 1
    assert hits >= 49  # a.s. in the continuum; allow one discretization escape


def test_threshold_rule_exact_on_constructed_state():
    # two swallowed points with rho summing below -2 flag the threshold
    spec = SleRhoDriver(kappa=4.0, force=((1e-7, -1.5), (2e-7, -1.0)))
    path, _ = sample_path(spec, horizon=0.5, dt=1e-4, seed=3)
    assert path.stop_reason == "threshold"
    assert path.stop_time < 0.5


def test_stop_on_designated_swallow():
    spec = target_change_driver(6.0, 0.0, 0.5)
    path, state = sample_path(spec, horizon=50.0, dt=1e-3, seed=5,
                              stop_labels=("force0",))
    assert path.stop_reason in ("swallow:force0", "threshold")
    assert path.stop_time < 50.0


def test_target_change_weights():
    assert target_change_driver(6.0, 0.0, 1.0).force[0][1] == pytest.approx(0.0)
    assert target_change_driver(3.0, 0.0, 1.0).force[0][1] == pytest.approx(-3.0)
    assert target_change_driver(4.0, 0.0, 1.0).force[0][1] == pytest.approx(-2.0)


def test_hsle_never_swallows_x_before_y_at_small_kappa():
    # nu >= kappa/2 - 4: the chain should not hit [x, y]; at dt=1e-4 allow
    # at most 1% discretization leakage.
    spec = HsleDriver(kappa=3.0, nu=0.0, x=0.5, y=1.0)
    bad = 0
    for i in range(60):
        path, state = sample_path(spec, horizon=0.4, dt=1e-4, seed=600 + i,
                                  stop_labels=("x",))
        if path.stop_reason == "swallow:x":
            bad += 1
    assert bad <= 1


# ------------------------------------------------------------------ traces

def test_trace_constant_driving_is_vertical_slit():
    n = 400
    dt = 1e-3
    path_like = type("P", (), {})()
    from slelab.loewner import DrivingPath

    path = DrivingPath(dt=dt, samples=np.zeros(n + 1))
    tr = trace_from_path(path)
    tip = tr.points[-1]
    assert abs(tip - 2j * math.sqrt(n * dt)) < 5 * math.sqrt(dt)
    assert max(abs(tr.points.real)) < 5 * math.sqrt(dt)
    assert (tr.points.imag >= 0).all()


def test_trace_linear_driving_smooth_and_starts_at_seed():
    from slelab.loewner import DrivingPath

    n, dt = 1000, 1e-3
    w = 1.5 * dt * np.arange(n + 1)
    tr = trace_from_path(DrivingPath(dt=dt, samples=w))
    assert abs(tr.points[0]) == 0.0
    assert abs(tr.points[1]) < 2.0 * math.sqrt(dt) + 2 * dt
    steps = np.abs(np.diff(tr.points))
    assert steps.max() < 0.25  # no wild jumps for smooth driving


def test_trace_scaling_covariance():
    # W -> lam W(t / lam^2) rescales the trace by lam
    from slelab.loewner import DrivingPath

    rng = np.random.default_rng(1)
    n, dt, lam = 800, 1e-3, 2.0
    bm = np.concatenate([[0.0], np.cumsum(rng.normal(0, math.sqrt(3 * dt), n))])
    base = trace_from_path(DrivingPath(dt=dt, samples=bm))
    scaled = trace_from_path(DrivingPath(dt=lam**2 * dt, samples=lam * bm))
    err = abs(scaled.points[-1] - lam * base.points[-1])
    assert err < 5 * math.sqrt(dt) * lam


def test_trace_kappa2_mostly_simple():
    ok = 0
    for i in range(20):
        path, _ = sample_path(BrownianDriver(kappa=2.0), horizon=0.25,
                              dt=2e-4, seed=900 + i)
        tr = trace_from_path(path, stride=5)
        pts = tr.points
        d = np.abs(pts[:, None] - pts[None, :])
        n = len(pts)
        idx = np.abs(np.arange(n)[:, None] - np.arange(n)[None, :])
        min_nonadj = d[idx > 3].min()
        if min_nonadj > 1e-3:
            ok += 1
    assert ok >= 17  # 85%+ of kappa=2 traces show no near-self-intersection


def test_trace_stride_subsamples_consistently():
    path, _ = sample_path(BrownianDriver(kappa=3.0), horizon=0.1, dt=1e-3, seed=2)
    full = trace_from_path(path, stride=1)
    coarse = trace_from_path(path, stride=4)
    assert coarse.points[-1] == pytest.approx(full.points[-1], abs=1e-12)


# ------------------------------------------------------------------ zipper

def test_zipper_vertical_slit_exact():
    h = 0.01
    pts = np.array([0.5 + 0j] + [0.5 + 1j * h * k for k in range(1, 101)])
    ts, ws, skipped = driving_from_curve(pts)
    assert skipped == 0
    assert np.allclose(ws, 0.5, atol=1e-12)
    # a vertical segment of height H has capacity H^2/4 and constant driving
    assert ts[-1] == pytest.approx((h * 100) ** 2 / 4, rel=1e-12)


def test_zipper_scaling():
    rng = np.random.default_rng(4)
    steps = rng.normal(0, 0.05, 60) + 0.08j * np.ones(60)
    pts = np.concatenate([[0.0 + 0j], np.cumsum(steps)])
    pts[1:] = pts[1:].real + 1j * np.maximum(pts[1:].imag, 1e-6)
    t1, w1, _ = driving_from_curve(pts)
    t2, w2, _ = driving_from_curve(2.0 * pts)
    assert np.allclose(t2, 4.0 * t1, rtol=1e-9)
    assert np.allclose(w2, 2.0 * w1, rtol=1e-9)


def test_zipper_round_trip_with_trace():
    # driving -> trace -> driving recovers the original path approximately
    path, _ = sample_path(BrownianDriver(kappa=3.0), horizon=0.2, dt=5e-4, seed=77)
    tr = trace_from_path(path)
    ts, ws, _ = driving_from_curve(tr.points)
    re = resample_driving(ts, ws, path.dt)
    m = min(len(re.samples), len(path.samples))
    err = np.abs(re.samples[:m] - path.samples[:m]).max()
    assert err < 10.0 * math.sqrt(path.dt)  # O(sqrt(dt)), rough driving


def test_trace_round_trip_endpoint():
    # curve -> driving -> curve endpoint agreement within 5% relative
    rng = np.random.default_rng(12)
    steps = rng.normal(0, 0.03, 80) + 0.06j * np.ones(80)
    pts = np.concatenate([[0.0 + 0j], np.cumsum(steps)])
    pts[1:] = pts[1:].real + 1j * np.maximum(pts[1:].imag, 1e-6)
    ts, ws, _ = driving_from_curve(pts)
    dt = ts[-1] / 2000
    re = resample_driving(ts, ws, dt)
    tr = trace_from_path(re)
    end_err = abs(tr.points[-1] - pts[-1]) / abs(pts[-1])
    assert end_err < 0.05
