import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import gamma, ive

from spherebif.special_math import (
    QuadratureConfig,
    SeriesConfig,
    ball_volume,
    log_moment0,
    moment_integral,
    scaled_moments,
    series_coefficient,
    series_coefficients,
    sine_moment,
    sphere_area,
)


def sine_moment_oracle(d):
    # direct trapezoid-free evaluation via the Wallis recursion
    val = math.pi if d % 2 == 1 else 2.0
    start = 1 if d % 2 == 1 else 2
    for k in range(start, d, 2):
        # int sin^(k+1) = k/(k+1) int sin^(k-1)
        val *= k / (k + 1)
    return val


@pytest.mark.parametrize("m,expected", [(0, 1.0), (1, 2.0), (2, math.pi), (3, 4 * math.pi / 3)])
def test_ball_volume(m, expected):
    assert ball_volume(m) == pytest.approx(expected, rel=1e-14)


@pytest.mark.parametrize("d,expected", [(1, 2 * math.pi), (2, 4 * math.pi), (3, 2 * math.pi**2)])
def test_sphere_area(d, expected):
    assert sphere_area(d) == pytest.approx(expected, rel=1e-14)


@pytest.mark.parametrize("d,expected", [(1, math.pi), (2, 2.0), (3, math.pi / 2)])
def test_sine_moment(d, expected):
    assert sine_moment(d) == pytest.approx(expected, rel=1e-14)


@pytest.mark.parametrize("d", range(1, 11))
def test_area_identity(d):
    # |S^d| = d w_d int sin^(d-1): the ratio that makes f(0) vanish
    assert sine_moment(d) * d * ball_volume(d) == pytest.approx(sphere_area(d), rel=1e-12)
    assert sine_moment(d) == pytest.approx(sine_moment_oracle(d), rel=1e-13)


def test_invalid_dimensions():
    with pytest.raises(ValueError):
        sphere_area(0)
    with pytest.raises(ValueError):
        ball_volume(-1)
    with pytest.raises(ValueError):
        QuadratureConfig(node_count=1)
    with pytest.raises(ValueError):
        SeriesConfig(max_terms=0)


def test_moment_examples():
    assert moment_integral(0, 0.0, 2) == pytest.approx(2.0, rel=1e-14)
    for d in (1, 2, 3, 7):
        assert abs(moment_integral(1, 0.0, d)) < 1e-15
        assert moment_integral(2, 0.0, d) == pytest.approx(sine_moment(d) / (d + 1), rel=1e-13)


def test_moment_bessel_series_oracle():
    oracle = math.pi * math.fsum(0.5 ** (2 * m) / math.factorial(m) ** 2 for m in range(40))
    assert oracle == pytest.approx(3.97746326050642, rel=1e-14)
    assert moment_integral(0, 1.0, 1) == pytest.approx(oracle, rel=1e-14)


@pytest.mark.parametrize("d", [1, 2, 3, 4, 5, 8])
@pytest.mark.parametrize("eta", [0.3, 2.0, 17.5, 120.0, 900.0])
def test_scaled_i0_matches_bessel(d, eta):
    nu = 0.5 * (d - 1)
    scaled_oracle = math.sqrt(math.pi) * gamma(nu + 0.5) * (2.0 / eta) ** nu * ive(nu, eta)
    assert scaled_moments(eta, d, (0,))[0] == pytest.approx(scaled_oracle, rel=1e-12)


@pytest.mark.parametrize("d", [1, 2, 3, 6])
@pytest.mark.parametrize("eta", [0.5, 5.0, 50.0])
def test_mean_cosine_is_bessel_ratio(d, eta):
    nu = 0.5 * (d - 1)
    i0, i1 = scaled_moments(eta, d, (0, 1))
    assert i1 / i0 == pytest.approx(ive(nu + 1, eta) / ive(nu, eta), rel=1e-12)


def test_overflow_names_eta():
    with pytest.raises(OverflowError, match="eta=1000"):
        moment_integral(0, 1000.0, 2)
    assert math.isfinite(log_moment0(1000.0, 2))
    assert log_moment0(1000.0, 2) == pytest.approx(1000.0 - math.log(1000.0) + math.log(1 - math.exp(-2000.0)), rel=1e-14)


@pytest.mark.parametrize("d", range(1, 11))
def test_even_moments_match_series_coefficients(d):
    ks = tuple(range(0, 81, 2))
    moments = scaled_moments(0.0, d, ks)
    ratios = moments / moments[0]
    coeffs = np.array([series_coefficient(m, d) for m in range(41)])
    np.testing.assert_allclose(ratios, coeffs, rtol=1e-10)


@pytest.mark.parametrize("d", [1, 2, 3, 5, 9])
def test_moment_recurrence_and_odd_moments(d):
    for m in range(21):
        lhs = (d + 2 * m + 1) * moment_integral(2 * m + 2, 0.0, d)
        rhs = (2 * m + 1) * moment_integral(2 * m, 0.0, d)
        assert lhs == pytest.approx(rhs, rel=1e-10)
        assert abs(moment_integral(2 * m + 1, 0.0, d)) <= 1e-12 * moment_integral(0, 0.0, d)


@pytest.mark.parametrize("d", [1, 2, 4])
@pytest.mark.parametrize("eta", [0.5, 2.0, 10.0])
def test_i0_derivative_is_i1(d, eta):
    h = 1e-5 * max(1.0, eta)
    fd = (moment_integral(0, eta + h, d) - moment_integral(0, eta - h, d)) / (2 * h)
    assert fd == pytest.approx(moment_integral(1, eta, d), rel=1e-6)


def test_series_coefficient_examples():
    assert series_coefficient(0, 4) == 1.0
    assert series_coefficient(1, 2) == pytest.approx(1 / 3, rel=1e-15)
    assert series_coefficient(2, 1) == pytest.approx(3 / 8, rel=1e-15)


@given(d=st.integers(1, 30), m=st.integers(0, 60))
def test_series_coefficient_recurrence(d, m):
    a, b = series_coefficient(m, d), series_coefficient(m + 1, d)
    assert b == pytest.approx(a * (2 * m + 1) / (d + 2 * m + 1), rel=1e-13)
    assert 0 < b < a
    assert series_coefficients(m + 2, d)[m + 1] == pytest.approx(b, rel=1e-13)


@settings(max_examples=40)
@given(eta=st.floats(0.0, 300.0), d=st.integers(1, 8))
def test_moments_bounded_by_i0(eta, d):
    i0, i1, i2, i3 = scaled_moments(eta, d, (0, 1, 2, 3))
    assert i0 > 0
    # |cos| <= 1 and moments of a probability measure on [-1, 1]
    assert abs(i1) <= i0 * (1 + 1e-12)
    assert 0 <= i2 <= i0 * (1 + 1e-12)
    assert i2 / i0 >= (i1 / i0) ** 2 - 1e-12
    assert abs(i3) <= i2 * (1 + 1e-12)
