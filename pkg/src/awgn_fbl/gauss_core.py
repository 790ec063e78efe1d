"""Gaussian special functions and closed-form finite-blocklength quantities.

Everything here works in nats. Conversion to bits happens at the CLI boundary.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate
from scipy.special import erfc, gammaln

__all__ = [
    "SnrPoint",
    "NormalApproxTerms",
    "std_normal_cdf",
    "std_normal_cdf_inv",
    "reg_inc_beta",
    "log_reg_inc_beta",
    "capacity",
    "dispersion",
    "third_abs_moment",
    "info_density",
    "normal_approximation",
]

_SQRT2 = math.sqrt(2.0)
_SQRT2PI = math.sqrt(2.0 * math.pi)


@dataclass(frozen=True)
class SnrPoint:
    """Linear SNR with unit noise variance."""

    p: float

    def __post_init__(self):
        p = float(self.p)
        if not math.isfinite(p) or p <= 0.0:
            raise ValueError(f"SNR must be finite and > 0, got {self.p!r}")
        object.__setattr__(self, "p", p)


def _as_p(snr) -> float:
    return snr.p if isinstance(snr, SnrPoint) else SnrPoint(snr).p


@dataclass(frozen=True)
class NormalApproxTerms:
    n: int
    eps: float
    capacity_term: float
    dispersion_term: float
    third_order_term: float
    total: float

    def as_dict(self) -> dict:
        return {
            "n": self.n,
            "eps": self.eps,
            "capacity_term": self.capacity_term,
            "dispersion_term": self.dispersion_term,
            "third_order_term": self.third_order_term,
            "total": self.total,
        }


# ---------------------------------------------------------------------------
# Normal distribution
# ---------------------------------------------------------------------------


def std_normal_cdf(a):
    """Standard normal CDF, computed through erfc so both tails keep full precision.

    Accepts scalars or arrays; ``±inf`` map to 1 and 0.
    """
    x = np.asarray(a, dtype=float)
    out = 0.5 * erfc(-x / _SQRT2)
    if out.ndim == 0:
        return float(out)
    return out


# Acklam's rational approximation, |rel err| < 1.15e-9 before refinement.
_A = (-3.969683028665376e01, 2.209460984245205e02, -2.759285104469687e02,
      1.383577518672690e02, -3.066479806614716e01, 2.506628277459239e00)
_B = (-5.447609879822406e01, 1.615858368580409e02, -1.556989798598866e02,
      6.680131188771972e01, -1.328068155288572e01)
_C = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e00,
      -2.549732539343734e00, 4.374664141464968e00, 2.938163982698783e00)
_D = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e00,
      3.754408661907416e00)
_P_LOW = 0.02425


def _acklam(eps: float) -> float:
    if eps < _P_LOW:
        q = math.sqrt(-2.0 * math.log(eps))
        return (((((_C[0] * q + _C[1]) * q + _C[2]) * q + _C[3]) * q + _C[4]) * q + _C[5]) / (
            (((_D[0] * q + _D[1]) * q + _D[2]) * q + _D[3]) * q + 1.0)
    if eps > 1.0 - _P_LOW:
        return -_acklam(1.0 - eps)
    q = eps - 0.5
    r = q * q
    return (((((_A[0] * r + _A[1]) * r + _A[2]) * r + _A[3]) * r + _A[4]) * r + _A[5]) * q / (
        ((((_B[0] * r + _B[1]) * r + _B[2]) * r + _B[3]) * r + _B[4]) * r + 1.0)


def std_normal_cdf_inv(eps: float) -> float:
    """Generalized inverse of the standard normal CDF.

    Returns ``-inf`` for ``eps <= 0`` and ``+inf`` for ``eps >= 1``. Inside
    (0, 1) an initial rational guess is polished with Halley steps on the
    tail closer to ``eps`` so the relative error of the tail mass stays small.
    """
    eps = float(eps)
    if math.isnan(eps):
        return math.nan
    if eps <= 0.0:
        return -math.inf
    if eps >= 1.0:
        return math.inf
    if eps == 0.5:
        return 0.0
    # Work on the lower tail: x < 0 with target mass t = min(eps, 1-eps).
    upper = eps > 0.5
    t = 1.0 - eps if upper else eps
    x = _acklam(t)
    for _ in range(3):
        err = 0.5 * math.erfc(-x / _SQRT2) - t
        pdf = math.exp(-0.5 * x * x) / _SQRT2PI
        if pdf == 0.0:
            break
        u = err / pdf
        x -= u / (1.0 + 0.5 * x * u)
    return -x if upper else x


# ---------------------------------------------------------------------------
# Regularized incomplete beta
# ---------------------------------------------------------------------------

_CF_TINY = 1e-300
_CF_EPS = 1e-16
_CF_MAXIT = 20000


def _betacf(a, b, x):
    """Modified Lentz evaluation of the incomplete-beta continued fraction.

    Vectorized over equal-shape arrays; iterates until every lane converged.
    """
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = np.ones_like(x)
    d = 1.0 - qab * x / qap
    d = np.where(np.abs(d) < _CF_TINY, _CF_TINY, d)
    d = 1.0 / d
    h = d.copy()
    active = np.ones(x.shape, dtype=bool)
    for m in range(1, _CF_MAXIT + 1):
        m2 = 2.0 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        d = np.where(np.abs(d) < _CF_TINY, _CF_TINY, d)
        c = 1.0 + aa / c
        c = np.where(np.abs(c) < _CF_TINY, _CF_TINY, c)
        d = 1.0 / d
        h = np.where(active, h * d * c, h)
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        d = np.where(np.abs(d) < _CF_TINY, _CF_TINY, d)
        c = 1.0 + aa / c
        c = np.where(np.abs(c) < _CF_TINY, _CF_TINY, c)
        d = 1.0 / d
        delta = d * c
        h = np.where(active, h * delta, h)
        active &= np.abs(delta - 1.0) > _CF_EPS
        if not active.any():
            return h
    raise ArithmeticError(
        f"incomplete beta continued fraction did not converge in {_CF_MAXIT} iterations"
    )


def _check_beta_args(x, a, b):
    if np.any(~np.isfinite(x)) or np.any((x < 0.0) | (x > 1.0)):
        raise ValueError("reg_inc_beta: x must lie in [0, 1]")
    if np.any(~(a > 0.0)) or np.any(~(b > 0.0)):
        raise ValueError("reg_inc_beta: a and b must be positive")


_HALF_LN_2PI = 0.5 * math.log(2.0 * math.pi)
# Stirling series coefficients for ln Γ(z) - [(z-½)ln z - z + ½ln 2π]
_STIRLING = (1.0 / 12.0, -1.0 / 360.0, 1.0 / 1260.0, -1.0 / 1680.0, 1.0 / 1188.0,
             -691.0 / 360360.0, 1.0 / 156.0)


def _lgamma_remainder(z):
    z = np.asarray(z, dtype=float)
    out = np.empty(z.shape)
    big = z >= 10.0
    if big.any():
        zb = z[big]
        w = 1.0 / (zb * zb)
        acc = np.zeros_like(zb)
        for c in reversed(_STIRLING):
            acc = acc * w + c
        out[big] = acc / zb
    small = ~big
    if small.any():
        zs = z[small]
        out[small] = gammaln(zs) - (zs - 0.5) * np.log(zs) + zs - _HALF_LN_2PI
    return out


def _log_beta_front(x, xc, a, b):
    """ln[x^a (1-x)^b / B(a, b)] without cancelling large log-gamma terms.

    Written as a·ln(x/x̂) + b·ln((1-x)/(1-x̂)) around the mean x̂ = a/(a+b)
    plus Stirling remainders, so accuracy does not degrade as a, b grow.
    """
    ab = a + b
    d = (x * b - xc * a) / a
    e = (xc * a - x * b) / b
    # log1p only near the mean; far from it the direct logs are accurate
    with np.errstate(divide="ignore"):
        ld = np.where(np.abs(d) < 0.5, np.log1p(d), np.log(x) + np.log1p(b / a))
        le = np.where(np.abs(e) < 0.5, np.log1p(e), np.log(xc) + np.log1p(a / b))
    main = a * ld + b * le
    return (
        main
        + 0.5 * np.log(a * b / ab)
        - _HALF_LN_2PI
        + _lgamma_remainder(ab) - _lgamma_remainder(a) - _lgamma_remainder(b)
    )


def log_reg_inc_beta(x, a, b, xc=None):
    """Natural log of the regularized incomplete beta I_x(a, b).

    Log-domain so tails far below the double-precision floor survive; the
    continued fraction is evaluated on whichever side of the symmetry point
    ``(a+1)/(a+b+2)`` converges fast. ``xc`` may carry an accurately computed
    ``1 - x`` when the caller has one.
    """
    x, a, b = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (x, a, b)))
    _check_beta_args(x, a, b)
    xc = 1.0 - x if xc is None else np.broadcast_to(np.asarray(xc, dtype=float), x.shape)
    out = np.empty(x.shape)
    zero = x == 0.0
    # x may round to 1 while its complement is still resolvable
    one = xc == 0.0
    out[zero] = -np.inf
    out[one] = 0.0
    mid = ~(zero | one)
    if mid.any():
        xm, xcm, am, bm = x[mid], xc[mid], a[mid], b[mid]
        direct = xm < (am + 1.0) / (am + bm + 2.0)
        # ln of x^a (1-x)^b / B(a,b)
        lfront = _log_beta_front(xm, xcm, am, bm)
        res = np.empty(xm.shape)
        if direct.any():
            cf = _betacf(am[direct], bm[direct], xm[direct])
            res[direct] = lfront[direct] + np.log(cf) - np.log(am[direct])
        flip = ~direct
        if flip.any():
            cf = _betacf(bm[flip], am[flip], xcm[flip])
            w = np.exp(lfront[flip] + np.log(cf) - np.log(bm[flip]))
            res[flip] = np.log1p(-np.minimum(w, 1.0))
        out[mid] = res
    if out.ndim == 0:
        return float(out)
    return out


def reg_inc_beta(x, a, b):
    """Regularized incomplete beta I_x(a, b), clipped to [0, 1]."""
    val = np.clip(np.exp(log_reg_inc_beta(x, a, b)), 0.0, 1.0)
    if np.ndim(val) == 0:
        return float(val)
    return val


# ---------------------------------------------------------------------------
# Capacity, dispersion, third absolute moment
# ---------------------------------------------------------------------------


def capacity(snr) -> float:
    """AWGN capacity ½·ln(1+P) in nats per channel use."""
    return 0.5 * math.log1p(_as_p(snr))


def dispersion(snr) -> float:
    """Gaussian dispersion P(P+2)/(2(P+1)²) in nats² per channel use."""
    p = _as_p(snr)
    return p * (p + 2.0) / (2.0 * (p + 1.0) ** 2)


def info_density(z, p: float):
    """Centered single-letter information density at input √P, as a function of the noise.

    With y = √P + z, ln W(y|√P) - ln f*(y) - C(P) = (P(1-z²) + 2√P z) / (2(1+P)).
    """
    z = np.asarray(z, dtype=float)
    rp = math.sqrt(p)
    return (p * (1.0 - z * z) + 2.0 * rp * z) / (2.0 * (1.0 + p))


def third_abs_moment(snr, rtol: float = 1e-11) -> float:
    """E|i - C|³ for the single-letter information density, by adaptive quadrature.

    The integrand is split at the noise mode and at both roots of the centered
    density, where |·|³ has a kink.
    """
    p = _as_p(snr)
    rp = math.sqrt(p)
    r = math.sqrt(1.0 + p)
    roots = sorted(((1.0 - r) / rp, (1.0 + r) / rp))
    cuts = [-np.inf, *sorted({roots[0], 0.0, roots[1]}), np.inf]

    def integrand(z):
        return abs(float(info_density(z, p))) ** 3 * math.exp(-0.5 * z * z) / _SQRT2PI

    total = 0.0
    err = 0.0
    for lo, hi in zip(cuts[:-1], cuts[1:]):
        val, e = integrate.quad(integrand, lo, hi, epsabs=0.0, epsrel=rtol, limit=200)
        total += val
        err += e
    if not (err <= 1e-8 * max(total, 1e-300)):
        raise ArithmeticError(
            f"third_abs_moment quadrature did not converge: estimate {total}, abs err {err}"
        )
    return total


# ---------------------------------------------------------------------------
# Normal approximation
# ---------------------------------------------------------------------------


def normal_approximation(n: int, eps: float, snr, include_third_order: bool = True) -> NormalApproxTerms:
    """n·C + √(nV)·Φ⁻¹(eps) [+ ½·ln n] in nats, with the per-term breakdown."""
    if isinstance(n, bool) or int(n) != n or n < 1:
        raise ValueError(f"blocklength must be a positive integer, got {n!r}")
    n = int(n)
    eps = float(eps)
    if not 0.0 < eps < 1.0:
        raise ValueError(f"eps must lie in (0, 1), got {eps!r}")
    p = _as_p(snr)
    cap = n * capacity(p)
    disp = math.sqrt(n * dispersion(p)) * std_normal_cdf_inv(eps)
    third = 0.5 * math.log(n) if include_third_order else 0.0
    return NormalApproxTerms(
        n=n,
        eps=eps,
        capacity_term=cap,
        dispersion_term=disp,
        third_order_term=third,
        total=cap + disp + third,
    )
