import io
import math

import numpy as np
import pytest

from zeronoise import rng
from zeronoise.bounds import theorem_params
from zeronoise.mollifier import smoothed_abs_d1
from zeronoise.sde import (CSV_HEADER, NonFiniteStateError, SimConfig, abs_lower_margin,
                           abs_upper_margin, calibrate_lower_bound_tol, integrate_increments,
                           lower_bound_margins, path_increments, pathwise_lower_bound_check,
                           rounding_slack, simulate_path, tanaka_residual)


def _cfg(**kw):
    base = dict(gamma=0.0, epsilon=0.05, a=0.5, T=1.0, dt=1e-3, n_paths=8, seed=7)
    base.update(kw)
    return SimConfig(**base)


def test_zero_noise_stays_at_origin():
    for gamma, a in [(0.0, 0.5), (0.5, 0.8)]:
        path = simulate_path(_cfg(gamma=gamma, a=a, epsilon=0.0), 0.1, 0)
        assert np.all(path.x == 0)
        assert np.all(path.occupation == 0)


def test_forced_start_follows_unit_drift():
    path = simulate_path(_cfg(epsilon=0.0), 0.1, 0, x0=1e-3)
    assert np.allclose(path.x, 1e-3 + path.times, rtol=0, atol=1e-12)
    assert path.occupation[-1] == pytest.approx(1.0, abs=1e-12)


def test_forced_start_matches_extremal_growth():
    # gamma > 0 from a small positive start converges towards H(t) as dt -> 0
    path = simulate_path(_cfg(gamma=0.5, a=0.8, epsilon=0.0, dt=1e-5), 0.1, 0, x0=1e-12)
    assert path.x[-1] == pytest.approx(0.25, rel=1e-3)


def test_path_invariants():
    cfg = _cfg()
    path = simulate_path(cfg, 0.05, 3)
    n = cfg.n_steps + 1
    for arr in (path.times, path.x, path.w, path.m_sgn, path.m_moll, path.occupation):
        assert arr.shape == (n,)
        assert arr[0] == 0
    assert path.times[-1] == pytest.approx(cfg.T, rel=1e-12)
    assert np.all(np.diff(path.occupation) >= 0)
    assert np.all(path.occupation <= path.times + 1e-15)
    # sum of squared martingale increments is bounded by that of W (|integrand| <= 1)
    assert np.sum(np.diff(path.m_moll) ** 2) <= np.sum(np.diff(path.w) ** 2)
    assert np.sum(np.diff(path.m_sgn) ** 2) <= np.sum(np.diff(path.w) ** 2)


def test_martingale_integrand_is_left_point():
    cfg = _cfg()
    path = simulate_path(cfg, 0.05, 1)
    dw = np.diff(path.w)
    ref = np.concatenate([[0.0], np.cumsum(smoothed_abs_d1(path.x[:-1], 0.05) * dw)])
    assert np.allclose(path.m_moll, ref, rtol=0, atol=1e-13)
    ref_sgn = np.concatenate([[0.0], np.cumsum(np.sign(path.x[:-1]) * dw)])
    assert np.allclose(path.m_sgn, ref_sgn, rtol=0, atol=1e-13)


def test_simulation_is_reproducible():
    cfg = _cfg()
    a = simulate_path(cfg, 0.05, 5)
    b = simulate_path(cfg, 0.05, 5)
    assert np.array_equal(a.x, b.x)
    assert not np.array_equal(a.x, simulate_path(cfg, 0.05, 6).x)


def test_antithetic_pairs():
    cfg = _cfg(antithetic=True)
    assert np.array_equal(path_increments(cfg, 4), -path_increments(cfg, 5))
    # gamma = 0 drift is odd, so the mirrored noise gives the mirrored path
    a, b = simulate_path(cfg, 0.05, 4), simulate_path(cfg, 0.05, 5)
    assert np.array_equal(a.x, -b.x)


def test_abs_bounds_hold_in_the_scheme():
    cfg = _cfg(epsilon=0.2, dt=1e-3)
    for p in range(20):
        path = simulate_path(cfg, 0.1, p)
        slack = rounding_slack(path, cfg.epsilon)
        assert abs_upper_margin(path, cfg.epsilon) >= -slack
        assert abs_lower_margin(path, cfg.epsilon) >= -slack


def test_tanaka_residual_properties():
    cfg = _cfg(epsilon=0.3, dt=1e-3)
    for p in range(20):
        path = simulate_path(cfg, 0.1, p)
        lt = tanaka_residual(path, cfg)
        slack = rounding_slack(path, cfg.epsilon)
        assert lt[0] == 0
        assert lt.min() >= -slack
        assert np.diff(lt).min() >= -slack


def test_tanaka_residual_zero_noise():
    cfg = _cfg(epsilon=0.0)
    path = simulate_path(cfg, 0.1, 0)
    assert np.all(tanaka_residual(path, cfg) == 0)


def test_tanaka_rejects_positive_gamma():
    cfg = _cfg(gamma=0.5, a=0.8)
    with pytest.raises(ValueError):
        tanaka_residual(simulate_path(cfg, 0.1, 0), cfg)


def test_tanaka_scaling_identity():
    # X^eps(dt, T) = eps^2 X^1(dt / eps^2, T / eps^2) on matched noise
    eps, n = 0.1, 2000
    dt = 1e-4
    z = rng.standard_normals(11, 0, n)
    small = integrate_increments(math.sqrt(dt) * z, np.full(n, dt), 0.0, eps, 0.1)
    big_dt = dt / eps**2
    big = integrate_increments(math.sqrt(big_dt) * z, np.full(n, big_dt), 0.0, 1.0, 0.1)
    assert np.allclose(small.x, eps**2 * big.x, rtol=1e-12, atol=1e-15)
    l_small = np.abs(small.x) - small.occupation - eps * small.m_sgn
    l_big = np.abs(big.x) - big.occupation - big.m_sgn
    assert np.allclose(l_small, eps**2 * l_big, rtol=1e-9, atol=1e-14)


def test_lower_bound_margin_starts_positive():
    params = theorem_params(0.5, 0.1, 0.8, 1.0)
    cfg = _cfg(gamma=0.5, a=0.8, epsilon=0.1, dt=1e-4)
    path = simulate_path(cfg, params.delta, 0)
    m = lower_bound_margins(path, 0.5, 0.1)
    assert m[0] > 0
    assert pathwise_lower_bound_check(path, params) == pytest.approx(m.min())


def test_lower_bound_check_validation():
    params = theorem_params(0.5, 0.1, 0.8, 1.0)
    cfg = _cfg(gamma=0.5, a=0.8, epsilon=0.1)
    with pytest.raises(ValueError):
        pathwise_lower_bound_check(simulate_path(cfg, params.delta * 2, 0), params)
    with pytest.raises(ValueError):
        pathwise_lower_bound_check(simulate_path(_cfg(), 0.1, 0),
                                   theorem_params(0.0, 0.05, 0.5, 1.0))


def test_calibration_refinement():
    params = theorem_params(0.5, 0.1, 0.8, 1.0)
    coarse = calibrate_lower_bound_tol(_cfg(gamma=0.5, a=0.8, epsilon=0.1, dt=1e-3, n_paths=32),
                                       params, n_paths=32)
    assert coarse.tol >= 0
    assert coarse.dt_fine == coarse.dt / 2
    # violations cannot become more frequent on the refined grid (often both are 0)
    assert coarse.violations_fine <= coarse.violations_coarse
    with pytest.raises(ValueError):
        calibrate_lower_bound_tol(_cfg(), theorem_params(0.0, 0.05, 0.5, 1.0))


def test_non_finite_state_raises():
    n = 50
    dw = np.full(n, 1e300)
    with pytest.raises(NonFiniteStateError):
        integrate_increments(dw, np.full(n, 1.0), 0.5, 1e10, 0.1)


def test_csv_roundtrip():
    path = simulate_path(_cfg(dt=0.01), 0.05, 2)
    buf = io.StringIO()
    path.to_csv(buf)
    lines = buf.getvalue().splitlines()
    assert lines[0] == CSV_HEADER
    data = np.loadtxt(io.StringIO(buf.getvalue()), delimiter=",", skiprows=1)
    assert np.array_equal(data[:, 1], path.x)
    assert np.array_equal(data[:, 5], path.occupation)


def test_config_validation():
    with pytest.raises(ValueError):
        _cfg(gamma=0.5, a=0.5)  # a must exceed 2g/(1+g) = 2/3
    with pytest.raises(ValueError):
        _cfg(a=1.0)
    with pytest.raises(ValueError):
        _cfg(epsilon=-0.1)
    with pytest.raises(ValueError):
        _cfg(dt=2.0)
    with pytest.raises(ValueError):
        _cfg(n_paths=3, antithetic=True)
    with pytest.raises(ValueError):
        _cfg(gamma=1.0)


def test_partial_last_step():
    cfg = _cfg(dt=0.3)
    assert cfg.n_steps == 4
    assert cfg.partial_last_step
    dts = cfg.step_sizes()
    assert dts.sum() == pytest.approx(1.0, abs=1e-15)
    assert any("partial" in w for w in cfg.step_size_warnings())
    assert not _cfg(dt=1e-3).partial_last_step


def test_step_size_warnings():
    cfg = _cfg(epsilon=0.01, dt=1e-3)
    assert any("eps^2" in w for w in cfg.step_size_warnings())
    assert _cfg(epsilon=0.05, dt=1e-4).step_size_warnings() == []
