import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import transcription as tr
from pitchtrack.kalman import (KalmanConfig, KalmanState, ObservationStats, fuse, kf_step,
                               run_backward, run_forward, smooth, to_frequency,
                               update_observation_stats)

CFG = KalmanConfig()


def test_defaults():
    assert (CFG.sigma2_delta0, CFG.l_window, CFG.alpha) == (0.06, 8, 0.95)
    assert CFG.initial_error_variance == pytest.approx(0.6)


@pytest.mark.parametrize("kwargs", [dict(sigma2_delta0=0), dict(l_window=1), dict(alpha=0),
                                    dict(alpha=1.5), dict(p0_init=-1.0)])
def test_config_validation(kwargs):
    with pytest.raises(ValueError):
        KalmanConfig(**kwargs)


def test_mean_update_example():
    stats = update_observation_stats(ObservationStats(100.0, 0.06, (0.0,)), 120.0, CFG)
    assert stats.mean == pytest.approx(119.0)


def test_constant_observations_zero_variance():
    stats = ObservationStats.start(80.0, CFG)
    for _ in range(12):
        stats = update_observation_stats(stats, 80.0, CFG)
    assert stats.variance == 0.0 and stats.mean == 80.0


def test_window_matches_transcription():
    obs = [80, 80, 80, 80, 120, 120, 120, 120]
    stats = ObservationStats.start(obs[0], CFG)
    for n in obs[1:]:
        stats = update_observation_stats(stats, n, CFG)
    means, variances = tr.running_stats(obs, 0.95, 8)
    assert stats.variance == pytest.approx(variances[-1], abs=1e-12)
    assert stats.mean == pytest.approx(means[-1], abs=1e-12)
    assert len(stats.residuals) == 8


def test_window_slides():
    obs = list(np.random.default_rng(0).uniform(40, 200, 30))
    cfg = KalmanConfig(l_window=5)
    stats = ObservationStats.start(obs[0], cfg)
    _, variances = tr.running_stats(obs, cfg.alpha, 5)
    for k, n in enumerate(obs[1:], start=1):
        stats = update_observation_stats(stats, n, cfg)
        assert stats.variance == pytest.approx(variances[k], rel=1e-12)
        assert len(stats.residuals) == min(5, k + 1)


def test_kf_step_example():
    state = kf_step(KalmanState(80.0, 1.0 - CFG.sigma2_delta0), 100.0, 1.0, CFG)
    assert state.gain == pytest.approx(0.5)
    assert state.estimate == pytest.approx(90.0)
    assert state.variance == pytest.approx(0.5)


def test_kf_step_limits():
    big = kf_step(KalmanState(80.0, 0.5), 200.0, 1e12, CFG)
    assert big.gain < 1e-11 and big.estimate == pytest.approx(80.0, abs=1e-8)
    exact = kf_step(KalmanState(80.0, 0.5), 93.25, 0.0, CFG)
    assert exact.gain == 1.0 and exact.estimate == 93.25 and exact.variance == 0.0
    with pytest.raises(ValueError):
        kf_step(KalmanState(80.0, 0.5), 93.0, -1.0, CFG)


@settings(max_examples=300, deadline=None)
@given(est=st.floats(20, 500), p=st.floats(0, 1e3), obs=st.floats(20, 500),
       r=st.floats(0, 1e6))
def test_kf_step_convex_and_contracting(est, p, obs, r):
    out = kf_step(KalmanState(est, p), obs, r, CFG)
    p_pred = p + CFG.sigma2_delta0
    assert 0.0 <= out.gain <= 1.0
    assert out.estimate == pytest.approx((1 - out.gain) * est + out.gain * obs, abs=1e-9)
    assert min(est, obs) - 1e-9 <= out.estimate <= max(est, obs) + 1e-9
    assert 0.0 <= out.variance <= p_pred


def test_single_observation():
    res = run_forward([80.0])
    assert res.estimate.tolist() == [80.0]


def test_empty_sequence():
    with pytest.raises(ValueError):
        run_forward([])


def riccati_fixed_point(q, r, p=0.0, iters=10_000):
    for _ in range(iters):
        p = (p + q) * r / (p + q + r)
    return p


def test_constant_sequence_reaches_riccati_fixed_point():
    res = run_forward(np.full(200, 80.0))
    assert np.all(res.estimate == 80.0)
    assert res.obs_variance[0] == CFG.sigma2_delta0
    assert np.all(res.obs_variance[1:] == 0.0)
    # the floored observation variance drives the steady state
    p_star = riccati_fixed_point(CFG.sigma2_delta0, CFG.var_floor)
    assert res.error_variance[-1] == pytest.approx(p_star, rel=1e-9)
    # closed form of the same fixed point
    q, r = CFG.sigma2_delta0, CFG.var_floor
    closed = (-q + np.sqrt(q * q + 4 * q * r)) / 2
    assert p_star == pytest.approx(closed, rel=1e-9)


def test_step_is_monotone_without_overshoot():
    obs = np.r_[np.full(20, 80.0), np.full(20, 120.0)]
    est = run_forward(obs).estimate
    assert np.all(np.diff(est) >= -1e-12)
    assert est.min() >= 80.0 and est.max() <= 120.0


def test_backward_is_reversed_forward():
    obs = np.random.default_rng(4).uniform(50, 150, 40)
    bwd = run_backward(obs)
    fwd_rev = run_forward(obs[::-1])
    np.testing.assert_array_equal(bwd.estimate, fwd_rev.estimate[::-1])
    np.testing.assert_array_equal(bwd.obs_variance, fwd_rev.obs_variance[::-1])


def test_constant_forward_equals_backward():
    obs = np.full(15, 97.0)
    np.testing.assert_array_equal(run_forward(obs).estimate, run_backward(obs).estimate)


def test_ramp_endpoints_differ():
    obs = np.r_[np.linspace(60, 160, 12), np.full(8, 160.0)]
    fwd, bwd = run_forward(obs), run_backward(obs)
    # each filter starts exactly on its first observation and lags at the far end
    assert fwd.estimate[0] == 60.0 and bwd.estimate[-1] == 160.0
    assert bwd.estimate[0] > fwd.estimate[0]
    assert fwd.estimate[-1] < bwd.estimate[-1]
    assert fwd.estimate[11] < obs[11]


def test_forward_matches_transcription():
    rng = np.random.default_rng(9)
    obs = list(rng.uniform(60, 200, 50))
    res = run_forward(obs)
    _, variances = tr.running_stats(obs, CFG.alpha, CFG.l_window)
    n_hat, p_hat = obs[0], CFG.initial_error_variance
    for k in range(1, len(obs)):
        n_pred, p_pred = tr.predict(n_hat, p_hat, CFG.sigma2_delta0)
        r = min(max(variances[k], CFG.var_floor), CFG.var_cap)
        n_hat, p_hat, _ = tr.correct(n_pred, p_pred, obs[k], r)
        assert res.estimate[k] == pytest.approx(n_hat, rel=1e-12)
        assert res.error_variance[k] == pytest.approx(p_hat, rel=1e-9)


def test_missing_observation_predicts_only():
    obs = np.array([80.0, 80.0, np.nan, 90.0, 90.0])
    res = run_forward(obs)
    assert res.gain[2] == 0.0
    assert res.estimate[2] == res.estimate[1]
    assert res.obs_variance[2] == res.obs_variance[1]
    assert res.error_variance[2] == pytest.approx(res.error_variance[1] + CFG.sigma2_delta0)
    with pytest.raises(ValueError):
        run_forward([np.nan, 80.0])


def test_fuse_examples():
    assert fuse(80.0, 2.0, 100.0, 2.0) == 90.0
    assert fuse(80.0, 0.0, 100.0, 5.0) == 80.0
    assert fuse(80.0, 1.0, 100.0, 3.0) == pytest.approx(85.0)
    assert fuse(80.0, 0.0, 100.0, 0.0) == 90.0
    with pytest.raises(ValueError):
        fuse(80.0, -1.0, 100.0, 1.0)


nonneg = st.floats(0, 1e6)
lag = st.floats(20, 600)


@settings(max_examples=300, deadline=None)
@given(f=lag, vf=nonneg, b=lag, vb=nonneg)
def test_fuse_symmetric_and_contained(f, vf, b, vb):
    x = fuse(f, vf, b, vb)
    assert x == fuse(b, vb, f, vf)
    assert min(f, b) <= x <= max(f, b)


def test_to_frequency():
    assert to_frequency(80.0, 16000) == 200.0
    assert to_frequency(160.0, 16000) == 100.0
    assert to_frequency(34.0, 16000) == 460.0
    np.testing.assert_allclose(to_frequency(np.array([80.0, 400.0]), 16000), [200.0, 60.0])
    for bad in (0.0, -3.0):
        with pytest.raises(ValueError):
            to_frequency(bad, 16000)


def test_smooth_uses_observation_variances():
    obs = np.r_[np.full(10, 80.0), np.full(10, 120.0)]
    fb = smooth(obs)
    np.testing.assert_allclose(
        fb.fused, fuse(fb.forward.estimate, fb.forward.obs_variance,
                       fb.backward.estimate, fb.backward.obs_variance))
    # right after the jump the backward pass is settled and dominates
    assert abs(fb.fused[10] - 120.0) < abs(fb.forward.estimate[10] - 120.0)
