"""Conditional law of the inner-product coordinate on a shifted noise shell.

Given a codeword x0 = (√(nP), 0, ..., 0) and noise Z conditioned on
‖x0 + Z‖² = n·s, the cosine U between the output and x0 has density

    f(u) = (1-u²)^((n-3)/2) · exp(n·√(Ps)·u) / F_n,   u ∈ [-1, 1].

This module evaluates F_n, the density and its mode, the Laplace-type
constant L(P, s) bounding sup f/√n, and the interval/tail bounds that
follow from it.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate
from scipy.special import gammaln

__all__ = [
    "ShellDensitySpec",
    "LaplaceReport",
    "sphere_surface_area_log",
    "shell_mode",
    "shell_mode_finite",
    "shell_normalizer_log",
    "shell_density",
    "shell_cdf",
    "laplace_constant",
    "laplace_constant_from_mode",
    "laplace_sup_bound",
    "sup_density_ratio",
    "slice_prob_bound",
    "tail_constants",
    "metric_tail_bound",
    "ETA",
]

#: Slice width used when summing the metric tail over geometric segments.
ETA = math.log(2.0)

_EDGE = 1e-8


def sphere_surface_area_log(n: int, r: float) -> float:
    """ln of the surface area 2π^(n/2) r^(n-1) / Γ(n/2) of a radius-r sphere in ℝⁿ."""
    if n < 1:
        raise ValueError(f"dimension must be >= 1, got {n}")
    if not r > 0.0:
        raise ValueError(f"radius must be positive, got {r}")
    return math.log(2.0) + 0.5 * n * math.log(math.pi) + (n - 1) * math.log(r) - math.lgamma(0.5 * n)


def shell_mode(ps: float) -> float:
    """Maximizer (√(1+4Ps) - 1) / (2√(Ps)) of ½ln(1-u²) + √(Ps)·u."""
    if ps < 0.0:
        raise ValueError(f"ps must be nonnegative, got {ps}")
    if ps == 0.0:
        return 0.0
    # Rationalized form avoids cancellation for small ps.
    return 2.0 * math.sqrt(ps) / (math.sqrt(1.0 + 4.0 * ps) + 1.0)


def shell_mode_finite(ps: float, n: int) -> float:
    """Maximizer of the finite-n exponent (½ - 3/(2n))·ln(1-u²) + √(Ps)·u.

    At n = 3 the log term vanishes and the supremum sits on the boundary u = 1.
    """
    if n < 3:
        raise ValueError(f"n must be >= 3, got {n}")
    if ps < 0.0:
        raise ValueError(f"ps must be nonnegative, got {ps}")
    a = 1.0 - 3.0 / n
    if ps == 0.0:
        return 1.0 if a == 0.0 else 0.0
    if a == 0.0:
        return 1.0
    return 2.0 * math.sqrt(ps) / (math.sqrt(a * a + 4.0 * ps) + a)


@dataclass
class ShellDensitySpec:
    """The triple (n, P, s); ln F_n is computed on first access and cached."""

    n: int
    p: float
    s: float
    _log_normalizer: float | None = field(default=None, init=False, repr=False, compare=False)
    _lock: threading.Lock = field(default_factory=threading.Lock, init=False, repr=False, compare=False)

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 3:
            raise ValueError(f"n must be an integer >= 3, got {self.n}")
        if not (self.p >= 0.0 and math.isfinite(self.p)):
            raise ValueError(f"p must be finite and >= 0, got {self.p}")
        if not (self.s > 0.0 and math.isfinite(self.s)):
            raise ValueError(f"s must be finite and > 0, got {self.s}")
        self.n = int(self.n)

    @property
    def ps(self) -> float:
        return self.p * self.s

    @property
    def kappa(self) -> float:
        """Linear coefficient n·√(Ps) of the exponent."""
        return self.n * math.sqrt(self.ps)

    @property
    def log_normalizer(self) -> float:
        if self._log_normalizer is None:
            with self._lock:
                if self._log_normalizer is None:
                    self._log_normalizer = _log_normalizer(self.n, self.ps)
        return self._log_normalizer


def _log_kernel(u, n: int, kappa: float):
    u = np.asarray(u, dtype=float)
    half = 0.5 * (n - 3)
    with np.errstate(divide="ignore", invalid="ignore"):
        lk = kappa * u
        if half:
            lk = lk + half * np.log1p(-u * u)
    return lk


def _breakpoints(n: int, ps: float) -> tuple[float, list[float]]:
    u0 = shell_mode_finite(ps, n)
    a = 1.0 - 3.0 / n
    if a > 0.0:
        curv = n * a * (1.0 + u0 * u0) / (1.0 - u0 * u0) ** 2
    else:
        curv = 0.0
    pts = {-1.0, 1.0, -1.0 + _EDGE, 1.0 - _EDGE, u0}
    if curv > 0.0:
        w = 1.0 / math.sqrt(curv)
        for k in (0.5, 1, 2, 4, 8, 16, 32, 64):
            pts.add(u0 - k * w)
            pts.add(u0 + k * w)
    kappa = n * math.sqrt(ps)
    if kappa > 0.0:
        # exponential decay scale away from the peak
        for k in (1, 4, 16, 64):
            pts.add(u0 - k / kappa)
    return u0, sorted(p for p in pts if -1.0 <= p <= 1.0)


def _log_kernel_centered(u, n: int, kappa: float, u0: float):
    """ln kernel(u) - ln kernel(u0), without the cancellation of two large logs."""
    half = 0.5 * (n - 3)
    d = u0 - u
    lk = -kappa * d
    if half:
        lk = lk + half * math.log1p(d * (u0 + u) / ((1.0 - u0) * (1.0 + u0)))
    return lk


def _log_normalizer(n: int, ps: float, rtol: float = 1e-13) -> float:
    kappa = n * math.sqrt(ps)
    u0, pts = _breakpoints(n, ps)
    half = 0.5 * (n - 3)
    if u0 >= 1.0:
        # n = 3: pure exponential, supremum at the boundary
        peak = kappa
        u0 = 1.0

        def integrand(u):
            return math.exp(kappa * (u - 1.0))
    else:
        peak = kappa * u0 + half * math.log1p(-u0 * u0)

        def integrand(u):
            if u <= -1.0 or u >= 1.0:
                return 0.0
            return math.exp(_log_kernel_centered(u, n, kappa, u0))

    def upper_edge(u):
        # (1-u)^half is carried by the quadrature weight
        return math.exp(half * math.log1p(u) + kappa * u - peak)

    def lower_edge(u):
        return math.exp(half * math.log1p(-u) + kappa * u - peak)

    # endpoint singularity of (1-u²)^half only bites for fractional half < 1 (n = 4)
    weighted = 0.0 < half < 1.0
    # absolute floor far below the target relative accuracy of the whole integral
    scale = 2.0 if half <= 0.0 else min(2.0, math.sqrt(2.0 * math.pi / (n * (1.0 - 3.0 / n) * (1.0 + u0 * u0))) * (1.0 - u0 * u0))
    tiny = 1e-17 * scale
    total = 0.0
    abserr = 0.0
    for lo, hi in zip(pts[:-1], pts[1:]):
        if hi <= lo:
            continue
        if weighted and hi == 1.0:
            v, e = integrate.quad(upper_edge, lo, hi, weight="alg", wvar=(0.0, half),
                                  epsabs=tiny, epsrel=rtol, limit=200)
        elif weighted and lo == -1.0:
            v, e = integrate.quad(lower_edge, lo, hi, weight="alg", wvar=(half, 0.0),
                                  epsabs=tiny, epsrel=rtol, limit=200)
        else:
            v, e = integrate.quad(integrand, lo, hi, epsabs=tiny, epsrel=rtol, limit=200)
        total += v
        abserr += e
    if not (total > 0.0 and abserr <= 1e-10 * total):
        raise ArithmeticError(
            f"shell normalizer quadrature failed (n={n}, ps={ps}): value {total}, abs err {abserr}"
        )
    return peak + math.log(total)


def shell_normalizer_log(spec: ShellDensitySpec) -> float:
    """ln F_n = ln ∫_{-1}^{1} (1-u²)^((n-3)/2) exp(n√(Ps)u) du."""
    return spec.log_normalizer


def shell_density(u, spec: ShellDensitySpec):
    """Conditional density of U on the shell; zero outside [-1, 1]."""
    u = np.asarray(u, dtype=float)
    inside = (u >= -1.0) & (u <= 1.0)
    lk = _log_kernel(np.where(inside, u, 0.0), spec.n, spec.kappa)
    out = np.where(inside, np.exp(lk - spec.log_normalizer), 0.0)
    if out.ndim == 0:
        return float(out)
    return out


def shell_cdf(u: float, spec: ShellDensitySpec) -> float:
    """P(U <= u) by quadrature of the density (reference path for tests and checks)."""
    if u <= -1.0:
        return 0.0
    if u >= 1.0:
        return 1.0
    _, pts = _breakpoints(spec.n, spec.ps)
    lnf = spec.log_normalizer
    n, kappa = spec.n, spec.kappa

    def integrand(t):
        return math.exp(float(_log_kernel(t, n, kappa)) - lnf)

    cut = [p for p in pts if p < u] + [u]
    total = 0.0
    for lo, hi in zip(cut[:-1], cut[1:]):
        if hi > lo:
            total += integrate.quad(integrand, lo, hi, epsabs=1e-15, epsrel=1e-12, limit=200)[0]
    return min(1.0, total)


# ---------------------------------------------------------------------------
# Laplace constant L(P, s)
# ---------------------------------------------------------------------------


def laplace_constant(p: float, s: float) -> float:
    """L(P,s) = (2Ps)²/√(2π) · √((1+4Ps-√(1+4Ps)) / (√(1+4Ps)-1)⁵)."""
    ps = p * s
    if not ps > 0.0:
        raise ValueError(f"P·s must be positive, got {ps}")
    r = math.sqrt(1.0 + 4.0 * ps)
    # √(1+4Ps) - 1 written without cancellation
    rm1 = 4.0 * ps / (r + 1.0)
    return (2.0 * ps) ** 2 / math.sqrt(2.0 * math.pi) * math.sqrt(r * rm1 / rm1**5)


def laplace_constant_from_mode(u_star: float) -> float:
    """The same constant written through the mode: √((1+u²) / (2π(1-u²)⁵))."""
    one_m = 1.0 - u_star * u_star
    return math.sqrt((1.0 + u_star * u_star) / (2.0 * math.pi * one_m**5))


def sup_density_ratio(n: int, p: float, s: float) -> float:
    """sup_u f(u) / √n, evaluated at the analytic maximizer of the finite-n exponent."""
    spec = ShellDensitySpec(n, p, s)
    u0 = shell_mode_finite(spec.ps, n)
    if u0 >= 1.0:
        peak = spec.kappa
    else:
        peak = float(_log_kernel(u0, n, spec.kappa))
    return math.exp(peak - spec.log_normalizer) / math.sqrt(n)


class LaplaceReport:
    """Mode, curvature and L(P, s) for one (P, s); sup_ratio needs ``n`` and is computed once."""

    def __init__(self, p: float, s: float, n: int | None = None):
        ps = p * s
        if not ps > 0.0:
            raise ValueError(f"P·s must be positive, got {ps}")
        self.p = float(p)
        self.s = float(s)
        self.n = n
        self.u_star = shell_mode(ps)
        self.u_star_n = shell_mode_finite(ps, n) if n is not None else None
        u = self.u_star
        self.alpha_at_mode = 0.5 * math.log1p(-u * u) + math.sqrt(ps) * u
        self.alpha_second_deriv = -(1.0 + u * u) / (1.0 - u * u) ** 2
        self.l_bound = laplace_constant(p, s)
        self.l_bound_mode_form = laplace_constant_from_mode(u)
        self._sup_ratio: float | None = None
        self._lock = threading.Lock()

    @property
    def forms_gap(self) -> float:
        return abs(self.l_bound - self.l_bound_mode_form)

    @property
    def sup_ratio(self) -> float | None:
        if self.n is None:
            return None
        if self._sup_ratio is None:
            with self._lock:
                if self._sup_ratio is None:
                    self._sup_ratio = sup_density_ratio(self.n, self.p, self.s)
        return self._sup_ratio

    def as_dict(self) -> dict:
        return {
            "p": self.p,
            "s": self.s,
            "n": self.n,
            "u_star": self.u_star,
            "u_star_n": self.u_star_n,
            "alpha_at_mode": self.alpha_at_mode,
            "alpha_second_deriv": self.alpha_second_deriv,
            "l_bound": self.l_bound,
            "l_bound_mode_form": self.l_bound_mode_form,
            "sup_ratio": self.sup_ratio,
        }


def laplace_sup_bound(p: float, s: float, n: int | None = None) -> LaplaceReport:
    report = LaplaceReport(p, s, n)
    if report.forms_gap > 1e-12 * max(1.0, report.l_bound):
        raise ArithmeticError(
            f"closed forms of L disagree at P={p}, s={s}: {report.l_bound} vs {report.l_bound_mode_form}"
        )
    return report


# ---------------------------------------------------------------------------
# Interval and metric-tail bounds
# ---------------------------------------------------------------------------


def slice_prob_bound(n: int, p: float, s: float, mu: float) -> float:
    """2·L(P,s)·μ / √(nPs), clamped to [0, 1].

    Bounds the conditional probability that the inner product lands in a
    window of width μ. Valid only for sufficiently large n.
    """
    if n < 3:
        raise ValueError(f"n must be >= 3, got {n}")
    if mu < 0.0:
        raise ValueError(f"mu must be nonnegative, got {mu}")
    val = 2.0 * laplace_constant(p, s) * mu / math.sqrt(n * p * s)
    return min(1.0, max(0.0, val))


def tail_constants(p: float) -> dict:
    """K(P) = 3L(P,P+1)/√(P(P+1)) and G(P) = 2·ln2·K(P)."""
    k = 3.0 * laplace_constant(p, p + 1.0) / math.sqrt(p * (p + 1.0))
    g = ETA / (1.0 - math.exp(-ETA)) * k
    return {"K": k, "G": g, "eta": ETA}


def metric_tail_bound(n: int, p: float, t, clamp: bool = False):
    """G(P)·e^(-t)/√n, an upper bound on Pr(q(X̄, y) >= t) for typical y."""
    if n < 3:
        raise ValueError(f"n must be >= 3, got {n}")
    g = tail_constants(p)["G"]
    val = g * np.exp(-np.asarray(t, dtype=float)) / math.sqrt(n)
    if clamp:
        val = np.minimum(val, 1.0)
    if np.ndim(val) == 0:
        return float(val)
    return val
