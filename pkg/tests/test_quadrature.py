"""Quadrature primitives against closed-form and scipy oracles."""

import math

import numpy as np
from scipy import integrate

from scpp.quadrature import adaptive_simpson, exp_moments, \
    integrate_with_breakpoints


def test_polynomial_exact():
    val, err = adaptive_simpson(lambda t: 3.0 * t ** 2, 0.0, 2.0)
    assert abs(val - 8.0) < 1e-12
    assert err < 1e-10


def test_reversed_limits_negate():
    f = np.exp
    v1, _ = adaptive_simpson(f, 0.0, 1.0)
    v2, _ = adaptive_simpson(f, 1.0, 0.0)
    assert abs(v1 + v2) < 1e-14
    assert abs(v1 - (math.e - 1.0)) < 1e-12


def test_oscillatory_against_scipy():
    f = lambda t: np.sin(7.0 * t) * np.exp(-t)
    ours, _ = adaptive_simpson(f, 0.0, 3.0, tol=1e-12)
    ref, _ = integrate.quad(lambda t: math.sin(7 * t) * math.exp(-t), 0, 3)
    assert abs(ours - ref) < 1e-10


def test_breakpoints_handle_kinks():
    f = lambda t: np.abs(t - 0.3) + 1.0
    # exact: int_0^1 |t-0.3| dt + 1 = (0.09 + 0.49)/2 + 1
    exact = 0.5 * (0.3 ** 2 + 0.7 ** 2) + 1.0
    val, _ = integrate_with_breakpoints(f, 0.0, 1.0, [0.3], tol=1e-12)
    assert abs(val - exact) < 1e-12


def test_complex_integrand():
    f = lambda t: np.exp(1j * t)
    val, _ = adaptive_simpson(f, 0.0, math.pi / 2, tol=1e-12)
    assert abs(val - (1.0 + 1j)) < 1e-10


def test_zero_width_interval():
    assert integrate_with_breakpoints(np.exp, 1.0, 1.0, [])[0] == 0.0


def test_exp_moments_match_quadrature():
    rng = np.random.default_rng(7)
    for _ in range(50):
        c0 = rng.uniform(-3.0, 0.0)
        slope = rng.uniform(-40.0, 2.0)
        w = rng.uniform(1e-6, 2.0)
        if c0 + slope * w > 0:
            continue
        m0, m1, m2 = exp_moments(c0, slope, w, order=2)
        for k, got in enumerate((m0, m1, m2)):
            ref, _ = integrate.quad(
                lambda t: t ** k * math.exp(c0 + slope * t), 0.0, w)
            assert abs(got - ref) <= 1e-12 * max(1.0, abs(ref)) + 1e-15, \
                (c0, slope, w, k)


def test_exp_moments_zero_slope():
    m0, m1, m2 = exp_moments(0.0, 0.0, 0.5, order=2)
    assert abs(m0 - 0.5) < 1e-15
    assert abs(m1 - 0.125) < 1e-15
    assert abs(m2 - 0.5 ** 3 / 3.0) < 1e-15


def test_exp_moments_tiny_slope_series_branch():
    # z = slope*w sits below the series crossover; the expm1-based reference
    # itself carries ~1e-10 cancellation noise at this z, hence the tolerance
    slope, w = 1e-6, 0.5
    z = slope * w
    m0, m1, _ = exp_moments(0.0, slope, w, order=2)
    assert abs(m0 - math.expm1(z) / slope) < 1e-15
    assert abs(m1 - (z * math.exp(z) - math.expm1(z)) / slope ** 2) < 1e-9
