import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.integrate import quad

from zeronoise.mollifier import (KERNEL, SmoothedAbs, kernel_cdf, kernel_density, smoothed_abs,
                                 smoothed_abs_d1, smoothed_abs_d2, verify_mollifier_bounds)

KNOTS = [-0.75, -0.5, 0.5, 0.75]


def _psi(u):
    # unnormalized profile written out independently of the module
    a = abs(u)
    if a <= 0.5:
        return 1.0
    if a >= 0.75:
        return 0.0
    s = (a - 0.5) / 0.25
    return 1.0 - (10 * s**3 - 15 * s**4 + 6 * s**5)


Z_QUAD = quad(_psi, -1, 1, points=KNOTS, epsabs=1e-14, epsrel=1e-13)[0]


def test_normalization_by_quadrature():
    assert KERNEL.normalization == pytest.approx(Z_QUAD, rel=1e-14)
    assert quad(kernel_density, -1, 1, points=KNOTS, epsabs=1e-15)[0] == pytest.approx(1, abs=1e-10)


def test_kernel_density_examples():
    assert kernel_density(2.0) == 0.0
    assert kernel_density(0.0) == pytest.approx(1 / Z_QUAD, rel=1e-14)
    assert kernel_density(0.0) >= 0.75
    u = np.linspace(-1, 1, 1001)
    assert np.array_equal(kernel_density(u), kernel_density(-u))


def test_kernel_plateau_value():
    u = np.linspace(-0.5, 0.5, 101)
    assert np.all(kernel_density(u) >= 0.75)


@pytest.mark.parametrize("u", [-0.7, -0.6, -0.2, 0.1, 0.55, 0.7])
def test_kernel_cdf_matches_quadrature(u):
    ref = quad(kernel_density, -1, u, points=[k for k in KNOTS if k < u], epsabs=1e-15)[0]
    assert kernel_cdf(u) == pytest.approx(ref, abs=1e-12)


def test_kernel_cdf_examples():
    assert kernel_cdf(-1.0) == 0.0
    assert kernel_cdf(0.0) == 0.5
    assert kernel_cdf(1.0) == 1.0
    tail = quad(kernel_density, 0.5, 1, points=[0.75], epsabs=1e-15)[0]
    assert kernel_cdf(0.5) == pytest.approx(1 - tail, abs=1e-12)
    assert tail == pytest.approx((Z_QUAD - 1) / (2 * Z_QUAD), abs=1e-12)
    assert kernel_cdf(0.5) >= 7 / 8


def _conv_quad(x, delta):
    pts = sorted(set([x] + [k * delta for k in KNOTS]))
    f = lambda y: kernel_density(y / delta) * abs(x - y) / delta
    return quad(f, -delta, delta, points=[p for p in pts if -delta < p < delta],
                epsabs=1e-15, epsrel=1e-13, limit=200)[0]


@pytest.mark.parametrize("x", [0.0, 0.13, 0.49, 0.6, 0.74, 0.9, -0.3])
def test_smoothed_abs_matches_convolution(x):
    assert smoothed_abs(x, 1.0) == pytest.approx(_conv_quad(x, 1.0), abs=1e-12)


def test_smoothed_abs_examples():
    d = 0.3
    assert smoothed_abs(2 * d, d) == 2 * d
    assert smoothed_abs(-2 * d, d) == 2 * d
    at0 = smoothed_abs(0.0, d)
    moment = quad(lambda u: abs(u) * kernel_density(u), -1, 1, points=KNOTS, epsabs=1e-15)[0]
    assert at0 == pytest.approx(d * moment, rel=1e-12)
    assert 0 < at0 <= d
    assert KERNEL.abs_moment == pytest.approx(moment, rel=1e-12)


@given(st.floats(-5, 5), st.floats(1e-6, 10))
def test_symmetry_and_homogeneity(x, delta):
    assert smoothed_abs(x, delta) == smoothed_abs(-x, delta)
    assert smoothed_abs(x, delta) == delta * smoothed_abs(x / delta, 1.0)
    assert smoothed_abs_d1(x, delta) == smoothed_abs_d1(x / delta, 1.0)
    assert smoothed_abs_d2(x, delta) == smoothed_abs_d2(x / delta, 1.0) / delta
    assert smoothed_abs_d1(-x, delta) == -smoothed_abs_d1(x, delta)


def test_d1_examples():
    d = 0.2
    assert smoothed_abs_d1(0.0, d) == 0.0
    assert smoothed_abs_d1(d, d) == 1.0
    assert smoothed_abs_d1(d / 2, d) == pytest.approx(2 * kernel_cdf(0.5) - 1, abs=1e-15)
    assert smoothed_abs_d1(d / 2, d) >= 0.75


def test_d2_examples():
    d = 0.2
    assert smoothed_abs_d2(2 * d, d) == 0.0
    assert smoothed_abs_d2(0.0, d) == pytest.approx(2 / (Z_QUAD * d), rel=1e-14)
    assert 2 / Z_QUAD >= 1.5


def _away_from_knots(x, delta, gap=1e-3):
    return np.min(np.abs(np.abs(x)[:, None] - delta * np.array([0.5, 0.75])[None, :]), axis=1) > gap * delta


@pytest.mark.parametrize("delta", [1.0, 1e-3])
def test_derivatives_by_finite_differences(delta):
    x = np.linspace(-1.2 * delta, 1.2 * delta, 1237)
    x = x[_away_from_knots(x, delta)]
    h = 1e-4 * delta
    fd1 = (smoothed_abs(x + h, delta) - smoothed_abs(x - h, delta)) / (2 * h)
    fd2 = (smoothed_abs_d1(x + h, delta) - smoothed_abs_d1(x - h, delta)) / (2 * h)
    d1 = smoothed_abs_d1(x, delta)
    d2 = smoothed_abs_d2(x, delta)
    # relative to the natural scale of each derivative (1 and 1/delta)
    assert np.max(np.abs(fd1 - d1)) <= 1e-6
    assert np.max(np.abs(fd2 - d2)) * delta <= 1e-6


@given(st.lists(st.floats(-3, 3), min_size=1, max_size=50), st.floats(1e-6, 2))
def test_convexity(xs, delta):
    assert np.all(smoothed_abs_d2(np.array(xs), delta) >= 0)


@pytest.mark.parametrize("delta", [1.0, 1e-3, 1e-6])
def test_verify_bounds(delta):
    rep = verify_mollifier_bounds(delta, 10_000)
    assert rep.ok(1e-12), rep.margins()
    assert rep.gap_argmax == 0.0
    assert rep.d2_plateau >= 3 / 4 - 1e-12  # 2/Z - 3/4 >= 3/4 in units of 1/delta


def test_verify_bounds_validation():
    with pytest.raises(ValueError):
        verify_mollifier_bounds(1.0, 10)
    with pytest.raises(ValueError):
        smoothed_abs(0.0, 0.0)


def test_smoothed_abs_object():
    m = SmoothedAbs(0.5)
    assert m(1.0) == 1.0
    assert m.d1(-1.0) == -1.0
    assert m.d2(0.0) > 0
