"""High-rate error exponents of the AWGN channel through Shannon's cone angle.

Rates are in nats per channel use; angles in radians.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .gauss_core import _as_p, capacity

__all__ = [
    "ExponentPoint",
    "shannon_G",
    "shannon_F",
    "sp_exponent",
    "exponent_point",
    "cone_angle",
    "cone_angle_residual",
    "prefactor_exponent",
    "sp_exponent_slope",
    "high_rate_range",
]


@dataclass(frozen=True)
class ExponentPoint:
    rate: float
    phi: float
    e_of_r: float
    f_of_phi: float
    beta: float

    def as_dict(self) -> dict:
        return {
            "rate": self.rate,
            "phi": self.phi,
            "e_of_r": self.e_of_r,
            "f_of_phi": self.f_of_phi,
            "beta": self.beta,
        }


def shannon_G(phi: float, snr) -> float:
    """½(√P cos φ + √(P cos²φ + 4))."""
    if not 0.0 < phi <= math.pi:
        raise ValueError(f"phi must lie in (0, π], got {phi}")
    p = _as_p(snr)
    c = math.cos(phi)
    return 0.5 * (math.sqrt(p) * c + math.sqrt(p * c * c + 4.0))


def shannon_F(phi: float, snr) -> float:
    """Shannon's exponent P/2 - √P·G·cos φ / 2 - ln(G sin φ)."""
    if not 0.0 < phi <= 0.5 * math.pi:
        raise ValueError(f"phi must lie in (0, π/2], got {phi}")
    p = _as_p(snr)
    sin_phi = math.sin(phi)
    if sin_phi <= 0.0:
        raise ValueError("sin φ must be positive")
    g = shannon_G(phi, p)
    return 0.5 * p - 0.5 * math.sqrt(p) * g * math.cos(phi) - math.log(g * sin_phi)


def sp_exponent(rate: float, snr) -> float:
    """Sphere-packing exponent E(R) with β = e^(2R).

    Singular at R = 0, where β - 1 vanishes in a denominator.
    """
    if not rate > 0.0:
        raise ValueError(f"rate must be positive, got {rate}")
    p = _as_p(snr)
    bm1 = math.expm1(2.0 * rate)
    beta = bm1 + 1.0
    root = math.sqrt(1.0 + 4.0 * beta / (p * bm1))
    first = p / (4.0 * beta) * ((beta + 1.0) - bm1 * root)
    inner = beta - 0.5 * p * bm1 * (root - 1.0)
    if inner <= 0.0:
        raise ValueError(f"sphere-packing exponent undefined at rate {rate} (log argument {inner})")
    return first + 0.5 * math.log(inner)


def exponent_point(phi: float, snr) -> ExponentPoint:
    """Bundle F(φ) with E at the matching rate -ln sin φ."""
    rate = -math.log(math.sin(phi))
    return ExponentPoint(
        rate=rate,
        phi=phi,
        e_of_r=sp_exponent(rate, snr),
        f_of_phi=shannon_F(phi, snr),
        beta=math.exp(2.0 * rate),
    )


def _cone_log_rhs(phi: float, n: int) -> float:
    # ln of sinⁿφ / (√(2πn) sin φ cos φ)
    return (n - 1) * math.log(math.sin(phi)) - math.log(math.cos(phi)) - 0.5 * math.log(2.0 * math.pi * n)


def cone_angle_residual(phi: float, rate: float, n: int) -> float:
    """Log-domain residual of e^(-nR) = sinⁿφ / (√(2πn) sin φ cos φ)."""
    return _cone_log_rhs(phi, n) + n * rate


def cone_angle(rate: float, n: int) -> float:
    """Cone half-angle φ(R, n) solving the defining relation with the 1 + O(1/n) factor set to 1.

    The log-domain right side is strictly increasing on (0, π/2), so the
    root is unique and bisection brackets it.
    """
    if not rate > 0.0:
        raise ValueError(f"rate must be positive, got {rate}")
    if n < 2:
        raise ValueError(f"n must be >= 2, got {n}")
    # start below the n → ∞ angle and halve until the residual is negative
    lo = 0.5 * math.asin(min(1.0, math.exp(-rate)))
    while cone_angle_residual(lo, rate, n) > 0.0:
        lo *= 0.5
        if lo < 1e-300:
            raise ValueError(f"no cone angle for rate {rate} at n = {n}")
    hi = math.nextafter(0.5 * math.pi, 0.0)
    if cone_angle_residual(hi, rate, n) < 0.0:
        raise ValueError(f"no cone angle for rate {rate} at n = {n}")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        if cone_angle_residual(mid, rate, n) > 0.0:
            hi = mid
        else:
            lo = mid
    return lo if abs(cone_angle_residual(lo, rate, n)) <= abs(cone_angle_residual(hi, rate, n)) else hi


def sp_exponent_slope(rate: float, snr, h: float = 1e-4) -> float:
    """Central finite difference of E at ``rate``."""
    return (sp_exponent(rate + h, snr) - sp_exponent(rate - h, snr)) / (2.0 * h)


def prefactor_exponent(rate: float, snr, h: float = 1e-4, slope_tol: float = 1e-8) -> float:
    """(1 + |E'(R)|)/2, the polynomial order of the high-rate error prefactor."""
    slope = sp_exponent_slope(rate, snr, h)
    if slope > slope_tol:
        raise ArithmeticError(f"E'(R) = {slope} > 0 at rate {rate}; the exponent must be nonincreasing")
    return 0.5 * (1.0 + abs(slope))


def high_rate_range(snr) -> tuple[float, float]:
    """Rate interval (C/2, C) used as the high-rate regime."""
    c = capacity(snr)
    return 0.5 * c, c
