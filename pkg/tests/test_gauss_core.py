import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate, special, stats

from awgn_fbl import gauss_core as gc


def test_snr_point_validation():
    assert gc.SnrPoint(2.0).p == 2.0
    for bad in (0.0, -1.0, math.inf, math.nan):
        with pytest.raises(ValueError):
            gc.SnrPoint(bad)


# --- standard normal ---------------------------------------------------------

def test_cdf_special_values():
    assert gc.std_normal_cdf(0.0) == 0.5
    assert gc.std_normal_cdf(math.inf) == 1.0
    assert gc.std_normal_cdf(-math.inf) == 0.0


def test_cdf_against_density_quadrature():
    val, _ = integrate.quad(lambda t: math.exp(-0.5 * t * t) / math.sqrt(2 * math.pi), -math.inf, 1.2816)
    assert abs(gc.std_normal_cdf(1.2816) - val) < 1e-12
    assert abs(gc.std_normal_cdf(1.2816) - 0.90) < 1e-4


def test_cdf_accuracy_on_grid():
    a = np.linspace(-8, 8, 801)
    assert np.max(np.abs(gc.std_normal_cdf(a) - stats.norm.cdf(a))) <= 1e-14


@given(st.floats(-8, 8))
def test_cdf_symmetry(a):
    assert abs(gc.std_normal_cdf(-a) - (1.0 - gc.std_normal_cdf(a))) <= 1e-15


@given(st.floats(-10, 10), st.floats(0, 5))
def test_cdf_monotone(a, d):
    assert gc.std_normal_cdf(a + d) >= gc.std_normal_cdf(a)


def test_inverse_special_values():
    assert gc.std_normal_cdf_inv(0.5) == 0.0
    assert gc.std_normal_cdf_inv(-0.01) == -math.inf
    assert gc.std_normal_cdf_inv(0.0) == -math.inf
    assert gc.std_normal_cdf_inv(1.0) == math.inf
    assert gc.std_normal_cdf_inv(3.0) == math.inf


def test_inverse_at_090_against_bisection():
    lo, hi = 0.0, 3.0
    for _ in range(100):
        mid = 0.5 * (lo + hi)
        if gc.std_normal_cdf(mid) < 0.9:
            lo = mid
        else:
            hi = mid
    assert abs(gc.std_normal_cdf_inv(0.9) - lo) < 1e-6
    assert abs(gc.std_normal_cdf_inv(0.9) - 1.2816) < 1e-4


@given(st.floats(1e-300, 1 - 1e-16, exclude_min=True))
def test_inverse_round_trip(eps):
    assert abs(gc.std_normal_cdf(gc.std_normal_cdf_inv(eps)) - eps) <= 1e-12


# --- incomplete beta -------------------------------------------------------

def test_inc_beta_endpoints_and_uniform():
    assert gc.reg_inc_beta(0.0, 2.0, 3.0) == 0.0
    assert gc.reg_inc_beta(1.0, 2.0, 3.0) == 1.0
    for x in (0.1, 0.37, 0.9):
        assert abs(gc.reg_inc_beta(x, 1.0, 1.0) - x) < 1e-15


def test_inc_beta_against_quadrature():
    num, _ = integrate.quad(lambda t: t**1.5 * (1 - t) ** 3, 0, 0.3, epsabs=1e-16, epsrel=1e-13)
    den, _ = integrate.quad(lambda t: t**1.5 * (1 - t) ** 3, 0, 1, epsabs=1e-16, epsrel=1e-13)
    assert abs(gc.reg_inc_beta(0.3, 2.5, 4.0) - num / den) < 1e-10


@settings(max_examples=300)
@given(st.floats(0.001, 0.999), st.floats(0.05, 500), st.floats(0.05, 500))
def test_inc_beta_against_scipy(x, a, b):
    ref = special.betainc(a, b, x)
    got = gc.reg_inc_beta(x, a, b)
    # below ~1e-100 the rounding of a·ln x alone exceeds 1e-12 relative
    if ref > 1e-100:
        assert abs(got - ref) <= 1e-12 * ref
    elif ref > 1e-280:
        assert abs(got - ref) <= 1e-10 * ref


@given(st.floats(0.01, 0.99), st.floats(0.1, 50), st.floats(0.1, 50))
def test_inc_beta_reflection(x, a, b):
    assert abs(gc.reg_inc_beta(x, a, b) + gc.reg_inc_beta(1 - x, b, a) - 1.0) < 1e-13


@given(st.floats(0.0, 1.0), st.floats(0.0, 1.0), st.floats(0.1, 30), st.floats(0.1, 30))
def test_inc_beta_monotone(x1, x2, a, b):
    lo, hi = sorted((x1, x2))
    assert gc.reg_inc_beta(lo, a, b) <= gc.reg_inc_beta(hi, a, b) + 1e-15


@pytest.mark.parametrize("x,a,b", [(0.25, 352.0, 387.5), (0.4859, 1779.0, 1868.0), (0.01, 4999.5, 0.5)])
def test_inc_beta_large_parameters_against_mpmath(x, a, b):
    mpmath = pytest.importorskip("mpmath")
    mpmath.mp.dps = 40
    ref = float(mpmath.betainc(a, b, 0, x, regularized=True))
    assert abs(gc.reg_inc_beta(x, a, b) - ref) <= 1e-12 * ref


def test_inc_beta_deep_tail_in_log_domain():
    # n = 1e4 sphere tail far beyond double range in linear scale
    a, b, x = 0.5 * (10_000 - 1), 0.5, 0.01
    ref = special.betaln(a, b)
    got = gc.log_reg_inc_beta(x, a, b)
    # leading behaviour a·ln x + b·ln(1-x) - ln a - ln B(a, b)
    approx = a * math.log(x) + b * math.log1p(-x) - math.log(a) - ref
    assert abs(got - approx) < 1e-2 * abs(approx)


def test_inc_beta_domain_errors():
    for args in ((-0.1, 1, 1), (1.1, 1, 1), (0.5, 0, 1), (0.5, 1, -2)):
        with pytest.raises(ValueError):
            gc.reg_inc_beta(*args)


# --- capacity, dispersion, third moment -------------------------------------

def test_capacity_values():
    assert abs(gc.capacity(math.e**2 - 1) - 1.0) < 1e-15
    assert abs(gc.capacity(1.0) - 0.5 * math.log(2)) < 1e-16
    assert gc.capacity(1e-300) == pytest.approx(5e-301)


def test_dispersion_values():
    assert gc.dispersion(1.0) == 0.375
    assert gc.dispersion(1e-300) < 1e-299
    assert abs(gc.dispersion(1e12) - 0.5) < 1e-11


@given(st.floats(1e-6, 1e6), st.floats(1e-6, 1e6))
def test_capacity_dispersion_monotone(p1, p2):
    lo, hi = sorted((p1, p2))
    assert gc.capacity(lo) <= gc.capacity(hi)
    assert gc.dispersion(lo) <= gc.dispersion(hi)
    assert 0.0 <= gc.dispersion(hi) <= 0.5


def test_info_density_mean_and_variance():
    p = 1.7
    z = np.random.default_rng(4).standard_normal(2_000_000)
    i = gc.info_density(z, p)
    centred = i - i.mean()
    assert abs(np.mean(centred**2) - gc.dispersion(p)) < 5e-3


@pytest.mark.parametrize("p", [0.1, 1.0, 10.0])
def test_third_moment_against_monte_carlo(p):
    rng = np.random.default_rng(int(p * 1000))
    z = rng.standard_normal(4_000_000)
    a = np.abs(gc.info_density(z, p)) ** 3
    se = a.std(ddof=1) / math.sqrt(a.size)
    assert abs(a.mean() - gc.third_abs_moment(p)) <= 3 * se


def test_third_moment_extremes_positive():
    for p in (0.01, 100.0):
        t = gc.third_abs_moment(p)
        assert math.isfinite(t) and t > 0


# --- normal approximation --------------------------------------------------

def test_normal_approximation_examples():
    t = gc.normal_approximation(1000, 0.5, 1.0, include_third_order=False)
    assert abs(t.total - 346.5735902799726) < 1e-9
    t = gc.normal_approximation(1000, 0.1, 1.0, include_third_order=True)
    assert abs(t.total - 325.21) < 0.01
    t = gc.normal_approximation(1, 0.5, math.e**2 - 1, include_third_order=False)
    assert abs(t.total - 1.0) < 1e-15


@given(st.integers(1, 10**7), st.floats(1e-6, 1 - 1e-6), st.floats(1e-3, 1e3), st.booleans())
def test_normal_approximation_sum_identity(n, eps, p, third):
    t = gc.normal_approximation(n, eps, p, include_third_order=third)
    assert t.total == t.capacity_term + t.dispersion_term + t.third_order_term
    assert t.capacity_term == n * gc.capacity(p)


def test_normal_approximation_rejects_bad_input():
    with pytest.raises(ValueError):
        gc.normal_approximation(0, 0.1, 1.0)
    with pytest.raises(ValueError):
        gc.normal_approximation(10, 1.5, 1.0)
