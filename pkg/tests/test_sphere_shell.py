import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate, special

from awgn_fbl import sphere_shell as sh


def bessel_log_normalizer(n, ps):
    # ∫(1-u²)^(ν-½) e^(zu) du = √π Γ(ν+½) (z/2)^(-ν) I_ν(z), ν = (n-2)/2
    nu = 0.5 * (n - 2)
    z = n * math.sqrt(ps)
    ive = special.ive(nu, z)
    if ive == 0.0:
        return None
    return 0.5 * math.log(math.pi) + special.gammaln(nu + 0.5) - nu * math.log(z / 2) + math.log(ive) + z


def test_surface_area_small_dimensions():
    for r in (0.5, 1.0, 3.0):
        assert abs(sh.sphere_surface_area_log(2, r) - math.log(2 * math.pi * r)) < 1e-14
        assert abs(sh.sphere_surface_area_log(3, r) - math.log(4 * math.pi * r * r)) < 1e-14


def test_surface_area_log_gamma_identity():
    ref = math.log(2) + 50 * math.log(math.pi) - math.lgamma(50)
    assert abs(sh.sphere_surface_area_log(100, 1.0) - ref) < 1e-10
    assert math.isfinite(sh.sphere_surface_area_log(10**6, 2.0))
    with pytest.raises(ValueError):
        sh.sphere_surface_area_log(3, 0.0)


def test_shell_mode_examples():
    assert abs(sh.shell_mode(2.0) - 1 / math.sqrt(2)) < 1e-15
    assert abs(sh.shell_mode(6.0) - 2 / math.sqrt(6)) < 1e-15
    assert sh.shell_mode(0.0) == 0.0
    assert abs(sh.shell_mode(1e-12) / math.sqrt(1e-12) - 1.0) < 1e-5


@given(st.floats(1e-10, 1e8), st.floats(1e-10, 1e8))
def test_shell_mode_range_and_monotone(a, b):
    lo, hi = sorted((a, b))
    assert 0.0 < sh.shell_mode(lo) <= sh.shell_mode(hi) < 1.0


def test_finite_mode_matches_golden_section():
    # golden section in 40-digit arithmetic; double precision stalls near 1e-8
    mpmath = pytest.importorskip("mpmath")
    mpmath.mp.dps = 40
    n, ps = 100, 2
    c = mpmath.mpf(1) / 2 - mpmath.mpf(3) / (2 * n)

    def f(u):
        return c * mpmath.log(1 - u * u) + mpmath.sqrt(ps) * u

    g = (mpmath.sqrt(5) - 1) / 2
    a, b = mpmath.mpf("0.1"), mpmath.mpf("0.99")
    for _ in range(200):
        x1, x2 = b - g * (b - a), a + g * (b - a)
        if f(x1) > f(x2):
            b = x2
        else:
            a = x1
    got = sh.shell_mode_finite(float(ps), n)
    assert 0.0 < got < 1 / math.sqrt(2) + 0.01
    assert abs(got - float((a + b) / 2)) < 1e-10


def test_finite_mode_limits():
    assert abs(sh.shell_mode_finite(2.0, 10**9) - 1 / math.sqrt(2)) < 1e-8
    assert sh.shell_mode_finite(5.0, 3) == 1.0


def test_normalizer_n3_closed_form():
    for ps in (0.01, 1.0, 2.0, 50.0):
        k = 3 * math.sqrt(ps)
        ref = math.log(2 * math.sinh(k) / k)
        assert abs(sh.ShellDensitySpec(3, ps, 1.0).log_normalizer - ref) < 1e-12


@pytest.mark.parametrize("n", [4, 5, 10, 100, 1000])
def test_normalizer_zero_ps_beta_identity(n):
    ref = 0.5 * math.log(math.pi) + math.lgamma(0.5 * (n - 1)) - math.lgamma(0.5 * n)
    assert abs(sh.ShellDensitySpec(n, 0.0, 2.0).log_normalizer - ref) < 1e-12


@pytest.mark.parametrize("n", [4, 7, 30, 200, 3000, 10**5])
@pytest.mark.parametrize("ps", [1e-4, 0.3, 2.0, 40.0])
def test_normalizer_against_bessel_form(n, ps):
    ref = bessel_log_normalizer(n, ps)
    if ref is None:
        pytest.skip("Bessel oracle underflows here")
    got = sh.ShellDensitySpec(n, ps, 1.0).log_normalizer
    assert abs(got - ref) <= 1e-11 * max(1.0, abs(ref))


def test_normalizer_laplace_lower_bound():
    n, p, s = 1000, 1.0, 2.0
    u = sh.shell_mode(p * s)
    alpha = 0.5 * math.log1p(-u * u) + math.sqrt(p * s) * u
    alpha2 = -(1 + u * u) / (1 - u * u) ** 2
    # the density exponent carries (n-3)/2 rather than n/2
    lower = n * alpha - 1.5 * math.log1p(-u * u) + 0.5 * math.log(2 * math.pi / (n * abs(alpha2)))
    assert sh.ShellDensitySpec(n, p, s).log_normalizer >= lower - 0.01


def test_density_support():
    spec = sh.ShellDensitySpec(50, 1.0, 2.0)
    assert sh.shell_density(1.5, spec) == 0.0
    assert sh.shell_density(-1.5, spec) == 0.0
    assert np.all(sh.shell_density(np.linspace(-1, 1, 101), spec) >= 0)


@pytest.mark.parametrize("n", [3, 10, 100, 1000])
@pytest.mark.parametrize("p", [0.1, 1.0, 10.0])
@pytest.mark.parametrize("ds", [-0.2, 0.2])
def test_density_normalization(n, p, ds):
    spec = sh.ShellDensitySpec(n, p, p + 1 + ds)
    _, pts = sh._breakpoints(n, spec.ps)
    mass = sum(integrate.quad(lambda u: sh.shell_density(u, spec), a, b, epsabs=1e-15, epsrel=1e-13, limit=200)[0]
               for a, b in zip(pts[:-1], pts[1:]) if b > a)
    assert abs(mass - 1.0) <= 1e-9


def test_density_symmetric_at_zero_snr():
    spec = sh.ShellDensitySpec(80, 0.0, 1.5)
    u = np.linspace(-0.999, 0.999, 201)
    assert np.max(np.abs(sh.shell_density(u, spec) - sh.shell_density(-u, spec))) <= 1e-12


def test_cdf_endpoints_and_monotone():
    spec = sh.ShellDensitySpec(200, 1.0, 2.0)
    vals = [sh.shell_cdf(u, spec) for u in np.linspace(-1, 1, 41)]
    assert vals[0] == 0.0 and vals[-1] == 1.0
    assert all(b >= a for a, b in zip(vals, vals[1:]))


def test_cdf_matches_chi_square_sampling():
    # U = y1/|y| with |y|² pinned near ns; sufficient statistics y1 and χ²(n-1)
    n, p, s = 60, 1.0, 2.0
    rng = np.random.default_rng(11)
    m = 4_000_000
    y1 = math.sqrt(n * p) + rng.standard_normal(m)
    r = rng.chisquare(n - 1, m)
    keep = np.abs(y1 * y1 + r - n * s) <= 0.2
    u = y1[keep] / np.sqrt(y1[keep] ** 2 + r[keep])
    spec = sh.ShellDensitySpec(n, p, s)
    grid = np.linspace(0.3, 0.95, 14)
    emp = np.searchsorted(np.sort(u), grid) / u.size
    ref = np.array([sh.shell_cdf(g, spec) for g in grid])
    assert np.max(np.abs(emp - ref)) < 0.01


# --- Laplace constant -------------------------------------------------------

def test_laplace_constant_examples():
    ref = 4 * math.sqrt(3) / math.sqrt(2 * math.pi)
    assert abs(sh.laplace_constant(1.0, 2.0) - ref) < 1e-12
    assert abs(sh.laplace_constant(1.0, 2.0) - 2.7639) < 1e-4
    assert abs(sh.laplace_constant_from_mode(1 / math.sqrt(2)) - math.sqrt(1.5 / (2 * math.pi * 0.03125))) < 1e-12


@given(st.floats(0.01, 100), st.floats(0.01, 100))
def test_laplace_forms_agree(p, s):
    r = sh.LaplaceReport(p, s)
    assert r.forms_gap <= 1e-12 * max(1.0, r.l_bound)
    assert 0.0 < r.u_star < 1.0
    assert r.alpha_second_deriv < 0.0


def test_laplace_report_sup_ratio():
    rep = sh.laplace_sup_bound(1.0, 2.0, n=10_000)
    assert rep.sup_ratio <= rep.l_bound * 1.05
    assert sh.laplace_sup_bound(1.0, 2.0).sup_ratio is None
    d = rep.as_dict()
    assert set(d) >= {"u_star", "u_star_n", "l_bound", "sup_ratio"}


def test_sup_ratio_matches_numeric_maximum():
    n, p, s = 500, 1.0, 2.0
    spec = sh.ShellDensitySpec(n, p, s)
    u = np.linspace(0.5, 0.9, 40001)
    brute = np.max(sh.shell_density(u, spec)) / math.sqrt(n)
    assert abs(sh.sup_density_ratio(n, p, s) - brute) < 1e-6 * brute


def test_sup_ratio_decreases_with_n():
    r = [sh.sup_density_ratio(n, 1.0, 2.0) for n in (100, 1000, 10_000)]
    assert r[0] > r[1] > r[2]


# --- slice and tail bounds --------------------------------------------------

def test_slice_prob_bound_examples():
    assert sh.slice_prob_bound(400, 1.0, 2.0, 0.0) == 0.0
    val = sh.slice_prob_bound(400, 1.0, 2.0, math.log(2))
    assert abs(val - 2 * 2.7639 * 0.6931 / math.sqrt(800)) < 1e-3
    assert abs(val - 0.1355) < 1e-3
    assert sh.slice_prob_bound(4, 1.0, 2.0, 100.0) == 1.0


def test_slice_bound_dominates_exact_window_probability():
    # exact probability of a width-μ window of the inner product n√(Ps)·u
    n, p, s, mu = 2000, 1.0, 2.0, math.log(2)
    spec = sh.ShellDensitySpec(n, p, s)
    width = mu / (n * math.sqrt(p * s))
    u0 = sh.shell_mode_finite(spec.ps, n)
    exact = integrate.quad(lambda u: sh.shell_density(u, spec), u0 - width / 2, u0 + width / 2)[0]
    assert exact <= sh.slice_prob_bound(n, p, s, mu)


def test_tail_constants_at_unit_snr():
    c = sh.tail_constants(1.0)
    assert abs(c["K"] - 3 * sh.laplace_constant(1.0, 2.0) / math.sqrt(2)) < 1e-14
    assert abs(c["K"] - 5.8628) < 1e-3
    assert abs(c["G"] - 8.127) < 2e-3
    assert c["eta"] == math.log(2)


def test_metric_tail_bound_decay():
    assert sh.metric_tail_bound(100, 1.0, 800.0) == 0.0
    t = np.linspace(0, 10, 11)
    vals = sh.metric_tail_bound(100, 1.0, t)
    assert np.all(np.diff(vals) < 0)
    assert np.all(sh.metric_tail_bound(100, 1.0, t, clamp=True) <= 1.0)


def test_spec_validation():
    for args in ((2, 1.0, 1.0), (10, -1.0, 1.0), (10, 1.0, 0.0)):
        with pytest.raises(ValueError):
            sh.ShellDensitySpec(*args)


@settings(max_examples=30, deadline=None)
@given(st.integers(3, 5000), st.floats(0.0, 20.0), st.floats(0.1, 20.0))
def test_density_finite_everywhere(n, p, s):
    spec = sh.ShellDensitySpec(n, p, s)
    vals = sh.shell_density(np.linspace(-1, 1, 33), spec)
    assert np.all(np.isfinite(vals)) and np.all(vals >= 0)
