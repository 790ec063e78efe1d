"""Water-filling over parallel Gaussian channels and the matching bounds."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .code_sim import BoundResult
from .gauss_core import capacity, dispersion, std_normal_cdf_inv
from .sphere_shell import laplace_constant

__all__ = [
    "PowerAllocation",
    "waterfill",
    "parallel_slice_bound",
    "parallel_normal_approximation",
]


@dataclass(frozen=True)
class PowerAllocation:
    noise: tuple
    total_power: float
    nu: float
    powers: tuple
    active_set: tuple

    def as_dict(self) -> dict:
        return {
            "noise": list(self.noise),
            "total_power": self.total_power,
            "nu": self.nu,
            "powers": list(self.powers),
            "active_set": list(self.active_set),
        }


def waterfill(noise, total_power: float) -> PowerAllocation:
    """Allocate P_j = max(0, ν - N_j) with Σ P_j = P.

    The water level is found exactly: with noise sorted ascending, the active
    set is a prefix, and ν = (P + Σ_{j<=k} N_j)/k for the largest k with
    ν > N_k.
    """
    noise = np.asarray(noise, dtype=float).ravel()
    if noise.size < 1:
        raise ValueError("need at least one channel")
    if np.any(~np.isfinite(noise)) or np.any(noise <= 0.0):
        raise ValueError("noise variances must be finite and positive")
    if not (total_power > 0.0 and math.isfinite(total_power)):
        raise ValueError(f"total power must be finite and positive, got {total_power}")
    order = np.argsort(noise, kind="stable")
    srt = noise[order]
    k_active = 1
    nu = total_power + srt[0]
    for k in range(2, srt.size + 1):
        cand = (total_power + math.fsum(srt[:k])) / k
        if cand <= srt[k - 1]:
            break
        k_active, nu = k, cand
    powers = np.maximum(nu - noise, 0.0)
    # exact-sum touch-up: spread the rounding residue over the active channels
    active = np.flatnonzero(powers > 0.0)
    resid = total_power - math.fsum(powers)
    powers[active] += resid / active.size
    return PowerAllocation(
        noise=tuple(float(v) for v in noise),
        total_power=float(total_power),
        nu=float(nu),
        powers=tuple(float(v) for v in powers),
        active_set=tuple(int(j) for j in active),
    )


def parallel_slice_bound(alloc: PowerAllocation, s, n: int, mu: float) -> float:
    """min over active l of 2·L(P_l, s_l)·μ / √(n·P_l·s_l), clamped to [0, 1]."""
    if n < 3:
        raise ValueError(f"n must be >= 3, got {n}")
    if mu < 0.0:
        raise ValueError(f"mu must be nonnegative, got {mu}")
    s = np.asarray(s, dtype=float).ravel()
    if s.size != len(alloc.powers):
        raise ValueError(f"need one s per channel ({len(alloc.powers)}), got {s.size}")
    if not alloc.active_set:
        raise ValueError("allocation has no active channel")
    best = math.inf
    for l in alloc.active_set:
        pl, sl = alloc.powers[l], float(s[l])
        if not sl > 0.0:
            raise ValueError(f"s must be positive on active channel {l}")
        best = min(best, 2.0 * laplace_constant(pl, sl) * mu / math.sqrt(n * pl * sl))
    return min(1.0, max(0.0, best))


def parallel_normal_approximation(n: int, eps: float, noise, total_power: float) -> BoundResult:
    """n·Σ C(P_j/N_j) + √(n·Σ V(P_j/N_j))·Φ⁻¹(eps) + ½ ln n, in nats.

    The summed dispersion is a modelling convention; only the ½ ln n
    achievability is established for parallel channels.
    """
    if int(n) != n or n < 1:
        raise ValueError(f"blocklength must be a positive integer, got {n}")
    if not 0.0 < eps < 1.0:
        raise ValueError(f"eps must lie in (0, 1), got {eps}")
    alloc = waterfill(noise, total_power)
    snrs = [alloc.powers[j] / alloc.noise[j] for j in alloc.active_set]
    c_sum = math.fsum(capacity(q) for q in snrs)
    v_sum = math.fsum(dispersion(q) for q in snrs)
    cap = n * c_sum
    disp = math.sqrt(n * v_sum) * std_normal_cdf_inv(eps)
    third = 0.5 * math.log(n)
    return BoundResult(
        value=cap + disp + third,
        terms={"capacity_term": cap, "dispersion_term": disp, "third_order_term": third},
        constants={"capacity_sum": c_sum, "dispersion_sum": v_sum, "nu": alloc.nu},
        provenance="formula(dispersion-sum convention)",
    )
