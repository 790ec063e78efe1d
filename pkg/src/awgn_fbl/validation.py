"""Fast invariant suites behind ``awgn-fbl validate``.

Each check yields a record with the measured value, the bound it is held to,
and a pass flag. Bounds can be overridden by check key.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import integrate

from . import code_sim, exponents, gauss_core, parallel_wf, sphere_shell

__all__ = ["Check", "SUITES", "run_suite", "DEFAULT_TOLERANCES"]


@dataclass
class Check:
    key: str
    name: str
    measured: float
    bound: float
    passed: bool

    def as_dict(self) -> dict:
        return {
            "key": self.key,
            "name": self.name,
            "measured": self.measured,
            "bound": self.bound,
            "pass": self.passed,
        }


DEFAULT_TOLERANCES = {
    "density.normalization": 1e-9,
    "density.zero_snr_symmetry": 1e-12,
    "density.closed_form_n3": 1e-12,
    "laplace.forms": 1e-12,
    "laplace.sup_ratio": 1.05,
    "exponents.identity": 1e-10,
    "exponents.capacity_zero": 1e-10,
    "exponents.slope": 1e-8,
    "exponents.cone_residual": 1e-12,
    "waterfill.kkt": 1e-12,
    "waterfill.example": 1e-12,
    "rcu.n3_closed_form": 1e-12,
    "rcu.mc_agreement": 4.0,
    "rcu.monotone_in_m": 0.0,
}


def _le(key, name, measured, tol) -> Check:
    return Check(key, name, float(measured), float(tol), bool(measured <= tol))


def _density(tol) -> list[Check]:
    worst = 0.0
    for n in (3, 10, 100, 1000):
        for p in (0.1, 1.0, 10.0):
            for s in (p + 0.8, p + 1.2):
                spec = sphere_shell.ShellDensitySpec(n, p, s)
                u0, pts = sphere_shell._breakpoints(n, spec.ps)
                mass = sum(
                    integrate.quad(lambda u: sphere_shell.shell_density(u, spec), a, b,
                                   epsabs=1e-15, epsrel=1e-13, limit=200)[0]
                    for a, b in zip(pts[:-1], pts[1:]) if b > a
                )
                worst = max(worst, abs(mass - 1.0))
    spec0 = sphere_shell.ShellDensitySpec(50, 0.0, 2.0)
    u = np.linspace(-0.99, 0.99, 41)
    sym = float(np.max(np.abs(sphere_shell.shell_density(u, spec0) - sphere_shell.shell_density(-u, spec0))))
    gap3 = 0.0
    for ps in (0.1, 2.0, 20.0):
        k = 3.0 * math.sqrt(ps)
        exact = math.log(2.0 * math.sinh(k) / k)
        gap3 = max(gap3, abs(sphere_shell.ShellDensitySpec(3, ps, 1.0).log_normalizer - exact))
    return [
        _le("density.normalization", "shell density integrates to 1", worst, tol["density.normalization"]),
        _le("density.zero_snr_symmetry", "density symmetric at P = 0", sym, tol["density.zero_snr_symmetry"]),
        _le("density.closed_form_n3", "ln F_3 matches ln(2 sinh k / k)", gap3, tol["density.closed_form_n3"]),
    ]


def _laplace(tol) -> list[Check]:
    gap = 0.0
    for p in (0.5, 1.0, 4.0):
        for s in (p + 0.5, p + 1.0, p + 2.0):
            r = sphere_shell.LaplaceReport(p, s)
            gap = max(gap, r.forms_gap / max(1.0, r.l_bound))
    l12 = sphere_shell.laplace_constant(1.0, 2.0)
    ratio = sphere_shell.sup_density_ratio(10_000, 1.0, 2.0) / l12
    return [
        _le("laplace.forms", "L two-forms agree <= 1e-12", gap, tol["laplace.forms"]),
        _le("laplace.sup_ratio", "sup f/sqrt(n) at n=1e4 over L(1,2)", ratio, tol["laplace.sup_ratio"]),
    ]


def _exponents(tol) -> list[Check]:
    ident = 0.0
    zero = 0.0
    slope = -math.inf
    for p in (0.5, 1.0, 4.0):
        for th in np.linspace(0.3, 1.5, 20):
            ident = max(ident, abs(exponents.shannon_F(th, p) - exponents.sp_exponent(-math.log(math.sin(th)), p)))
    for p in (0.1, 1.0, 10.0):
        c = gauss_core.capacity(p)
        zero = max(zero, abs(exponents.sp_exponent(c, p)))
        for r in np.linspace(0.5 * c, c, 12):
            slope = max(slope, exponents.sp_exponent_slope(r, p))
    resid = 0.0
    for n in (10, 100, 1000):
        for r in (0.1, 0.3, 1.0):
            phi = exponents.cone_angle(r, n)
            resid = max(resid, abs(exponents.cone_angle_residual(phi, r, n)))
    return [
        _le("exponents.identity", "F=E identity <= 1e-10", ident, tol["exponents.identity"]),
        _le("exponents.capacity_zero", "E(C) = 0", zero, tol["exponents.capacity_zero"]),
        _le("exponents.slope", "E'(R) <= 0 on the high-rate grid", slope, tol["exponents.slope"]),
        _le("exponents.cone_residual", "cone-angle log residual", resid, tol["exponents.cone_residual"]),
    ]


def _waterfill(tol) -> list[Check]:
    rng = np.random.default_rng(20240601)
    worst = 0.0
    for _ in range(200):
        k = int(rng.integers(1, 17))
        noise = rng.uniform(0.05, 5.0, size=k)
        total = float(rng.uniform(0.01, 20.0))
        a = parallel_wf.waterfill(noise, total)
        pw = np.array(a.powers)
        worst = max(worst, abs(math.fsum(pw) - total) / total)
        worst = max(worst, max(0.0, -float(pw.min())))
        for j in a.active_set:
            worst = max(worst, abs(a.nu - a.noise[j] - a.powers[j]))
    ex = parallel_wf.waterfill([1.0, 2.0], 3.0)
    ex_gap = max(abs(ex.nu - 3.0), abs(ex.powers[0] - 2.0), abs(ex.powers[1] - 1.0))
    return [
        _le("waterfill.kkt", "KKT residuals on random instances", worst, tol["waterfill.kkt"]),
        _le("waterfill.example", "N=(1,2), P=3 gives nu=3, powers=(2,1)", ex_gap, tol["waterfill.example"]),
    ]


def _rcu(tol) -> list[Check]:
    c = np.linspace(-0.95, 0.95, 39)
    gap = float(np.max(np.abs(code_sim.pairwise_tail_exact(3, c) - 0.5 * (1.0 - c))))
    # sphere first-coordinate MC at n = 10
    n, c0, trials = 10, 0.4, 200_000

    def block(rng, count):
        g = rng.standard_normal((count, n))
        return (g[:, 0] / np.linalg.norm(g, axis=1) >= c0).astype(float)

    hits = code_sim.run_blocks(trials, 7, block)
    mc = float(hits.mean())
    se = float(hits.std(ddof=1) / math.sqrt(trials))
    z = abs(mc - code_sim.pairwise_tail_exact(n, c0)) / se
    lo = code_sim.rcu_error_estimate(50, 5.0, 1.0, 20_000, seed=3)
    hi = code_sim.rcu_error_estimate(50, 5.0 + math.log(2.0), 1.0, 20_000, seed=3)
    drop = max(0.0, lo.eps_hat - hi.eps_hat)
    return [
        _le("rcu.n3_closed_form", "n=3 tail equals (1-c)/2", gap, tol["rcu.n3_closed_form"]),
        _le("rcu.mc_agreement", "exact tail vs MC, in stderr units", z, tol["rcu.mc_agreement"]),
        _le("rcu.monotone_in_m", "doubling M never lowers the RCU estimate", drop, tol["rcu.monotone_in_m"]),
    ]


SUITES: dict[str, Callable[[dict], list[Check]]] = {
    "density": _density,
    "laplace": _laplace,
    "exponents": _exponents,
    "waterfill": _waterfill,
    "rcu": _rcu,
}


def run_suite(name: str, overrides: dict | None = None) -> list[Check]:
    tol = dict(DEFAULT_TOLERANCES)
    for key, val in (overrides or {}).items():
        if key not in tol:
            raise KeyError(f"unknown tolerance key {key!r}")
        tol[key] = float(val)
    names = list(SUITES) if name == "all" else [name]
    for nm in names:
        if nm not in SUITES:
            raise KeyError(f"unknown suite {name!r}")
    checks: list[Check] = []
    for nm in names:
        checks.extend(SUITES[nm](tol))
    return checks
