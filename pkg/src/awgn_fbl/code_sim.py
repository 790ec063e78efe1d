"""Spherical random codes: sampling, decoding, and RCU-bound evaluation.

Monte Carlo work is split into fixed-size trial blocks. Block ``b`` draws from
a Philox (counter-based) generator keyed by ``(seed, b)``, so every estimate
depends only on ``(seed, trials)`` and never on how blocks are scheduled
across workers.
"""

from __future__ import annotations

import io
import math
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
from scipy import stats
from scipy.special import gammaln

from .gauss_core import (
    capacity,
    dispersion,
    log_reg_inc_beta,
    normal_approximation,
    std_normal_cdf_inv,
    third_abs_moment,
)
from .sphere_shell import ShellDensitySpec, tail_constants

__all__ = [
    "BLOCK_SIZE",
    "BoundResult",
    "SphereCodebook",
    "RcuEstimate",
    "TypicalSetSpec",
    "TypicalSetEstimate",
    "VacuousBoundError",
    "BracketError",
    "CodebookTooLarge",
    "block_rng",
    "run_blocks",
    "sample_sphere_point",
    "generate_codebook",
    "decode_max_inner",
    "empirical_error",
    "pairwise_tail_exact",
    "log_pairwise_tail",
    "rcu_error_estimate",
    "rcu_max_rate",
    "typical_set_prob",
    "typical_set_prob_exact",
    "log_output_density_ratio",
    "output_density_ratio_bound",
    "achievable_log_m",
    "save_codebook",
    "load_codebook",
]

BLOCK_SIZE = 1 << 14
MAX_CODEBOOK_ENTRIES = 50_000_000
_SEED_MASK = (1 << 64) - 1


class VacuousBoundError(ValueError):
    """The requested bound has no content at these parameters."""


class BracketError(ValueError):
    """Bisection could not bracket the target error probability."""


class CodebookTooLarge(MemoryError):
    pass


@dataclass
class BoundResult:
    """A log-cardinality in nats with its ingredients."""

    value: float
    terms: dict = field(default_factory=dict)
    constants: dict = field(default_factory=dict)
    stderr: float | None = None
    provenance: str = "formula"

    def as_dict(self) -> dict:
        return {
            "value": self.value,
            "terms": dict(self.terms),
            "constants": dict(self.constants),
            "stderr": self.stderr,
            "provenance": self.provenance,
        }


# ---------------------------------------------------------------------------
# Random source
# ---------------------------------------------------------------------------


def block_rng(seed: int, block: int) -> np.random.Generator:
    """Generator for trial block ``block`` of stream ``seed``."""
    ss = np.random.SeedSequence([int(seed) & _SEED_MASK, int(block)])
    return np.random.Generator(np.random.Philox(ss))


def run_blocks(
    trials: int,
    seed: int,
    fn: Callable[[np.random.Generator, int], np.ndarray],
    workers: int = 1,
) -> np.ndarray:
    """Evaluate ``fn(rng, count)`` on each trial block and concatenate in block order."""
    if trials < 1:
        raise ValueError(f"trials must be >= 1, got {trials}")
    nblocks = -(-trials // BLOCK_SIZE)
    counts = [BLOCK_SIZE] * (nblocks - 1) + [trials - BLOCK_SIZE * (nblocks - 1)]

    def one(b):
        return np.asarray(fn(block_rng(seed, b), counts[b]))

    if workers <= 1 or nblocks == 1:
        parts = [one(b) for b in range(nblocks)]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(one, range(nblocks)))
    return np.concatenate(parts)


def _mean_stderr(values: np.ndarray) -> tuple[float, float]:
    mean = float(np.mean(values))
    if values.size < 2:
        return mean, 0.0
    return mean, float(np.std(values, ddof=1) / math.sqrt(values.size))


# ---------------------------------------------------------------------------
# Codebooks
# ---------------------------------------------------------------------------


def sample_sphere_point(n: int, radius: float, rng: np.random.Generator | None = None) -> np.ndarray:
    """Uniform point on the radius-``radius`` sphere in ℝⁿ (normalized Gaussian)."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if not radius > 0.0:
        raise ValueError(f"radius must be positive, got {radius}")
    rng = np.random.default_rng() if rng is None else rng
    if n == 1:
        return np.array([radius if rng.random() < 0.5 else -radius])
    while True:
        g = rng.standard_normal(n)
        norm = math.sqrt(float(g @ g))
        if norm > 0.0:
            return g * (radius / norm)


@dataclass(frozen=True)
class SphereCodebook:
    n: int
    m: int
    p: float
    codewords: np.ndarray = field(repr=False)
    seed: int | None = None

    def __post_init__(self):
        cw = np.asarray(self.codewords, dtype=float)
        if cw.shape != (self.m, self.n):
            raise ValueError(f"codewords shape {cw.shape} != ({self.m}, {self.n})")
        target = self.n * self.p
        sq = np.einsum("ij,ij->i", cw, cw)
        if np.any(np.abs(sq - target) > 1e-9 * target):
            raise ValueError("every codeword must have squared norm n·P")
        cw = cw.copy()
        cw.flags.writeable = False
        object.__setattr__(self, "codewords", cw)


def generate_codebook(n: int, m: int, p: float, seed: int, max_entries: int = MAX_CODEBOOK_ENTRIES) -> SphereCodebook:
    """M codewords drawn independently and uniformly from the √(nP) sphere."""
    if n < 1 or m < 1:
        raise ValueError(f"need n >= 1 and m >= 1, got n={n}, m={m}")
    if not p > 0.0:
        raise ValueError(f"p must be positive, got {p}")
    if n * m > max_entries:
        raise CodebookTooLarge(f"codebook of {m}x{n} exceeds the limit of {max_entries} entries")
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed) & _SEED_MASK])))
    g = rng.standard_normal((m, n))
    norms = np.linalg.norm(g, axis=1)
    for i in np.flatnonzero(norms == 0.0):
        while norms[i] == 0.0:
            g[i] = rng.standard_normal(n)
            norms[i] = np.linalg.norm(g[i])
    cw = g * (math.sqrt(n * p) / norms)[:, None]
    return SphereCodebook(n=n, m=m, p=p, codewords=cw, seed=int(seed))


def decode_max_inner(book: SphereCodebook, y) -> int:
    """Index (0-based) of the codeword with largest inner product; ties go to the smallest index."""
    y = np.asarray(y, dtype=float)
    if y.shape[-1] != book.n:
        raise ValueError(f"output length {y.shape[-1]} does not match blocklength {book.n}")
    return int(np.argmax(book.codewords @ y))


def empirical_error(book: SphereCodebook, trials: int, seed: int, workers: int = 1) -> tuple[float, float]:
    """Direct simulation of the average error probability of ``book`` under max-inner decoding.

    Messages are drawn uniformly, so every message carries equal weight.
    Returns (estimate, stderr).
    """
    cw = book.codewords
    m = book.m

    def block(rng, count):
        msg = rng.integers(0, m, size=count)
        y = cw[msg] + rng.standard_normal((count, book.n))
        return (np.argmax(y @ cw.T, axis=1) != msg).astype(float)

    errs = run_blocks(trials, seed, block, workers)
    return _mean_stderr(errs)


_CSV_MAGIC = "# sphere-codebook v1"
_BIN_MAGIC = b"SPHCB\x00v1"


def save_codebook(book: SphereCodebook, path, fmt: str = "csv") -> None:
    """Write a codebook as CSV (header comment + one row per codeword) or raw little-endian binary."""
    path = Path(path)
    seed = -1 if book.seed is None else book.seed
    if fmt == "csv":
        buf = io.StringIO()
        buf.write(f"{_CSV_MAGIC} n={book.n} m={book.m} p={book.p!r} seed={seed}\n")
        for row in book.codewords:
            buf.write(",".join(repr(float(v)) for v in row))
            buf.write("\n")
        path.write_text(buf.getvalue())
    elif fmt == "bin":
        header = _BIN_MAGIC + struct.pack("<QQdq", book.n, book.m, book.p, seed)
        path.write_bytes(header + np.ascontiguousarray(book.codewords, dtype="<f8").tobytes())
    else:
        raise ValueError(f"unknown codebook format {fmt!r}")


def load_codebook(path) -> SphereCodebook:
    """Read a codebook written by :func:`save_codebook`; the format is detected from the header."""
    path = Path(path)
    raw = path.read_bytes()
    if raw.startswith(_BIN_MAGIC):
        off = len(_BIN_MAGIC)
        n, m, p, seed = struct.unpack_from("<QQdq", raw, off)
        off += struct.calcsize("<QQdq")
        data = np.frombuffer(raw, dtype="<f8", offset=off)
        if data.size != n * m:
            raise ValueError(f"{path}: expected {n * m} values, found {data.size}")
        cw = data.reshape(m, n).astype(float)
    else:
        text = raw.decode()
        first, _, body = text.partition("\n")
        if not first.startswith(_CSV_MAGIC):
            raise ValueError(f"{path}: not a sphere-codebook file")
        meta = dict(tok.split("=", 1) for tok in first[len(_CSV_MAGIC):].split())
        n, m, p, seed = int(meta["n"]), int(meta["m"]), float(meta["p"]), int(meta["seed"])
        rows = [line for line in body.splitlines() if line.strip()]
        cw = np.array([[float(v) for v in line.split(",")] for line in rows], dtype=float).reshape(m, n)
    return SphereCodebook(n=n, m=m, p=p, codewords=cw, seed=None if seed < 0 else seed)


# ---------------------------------------------------------------------------
# Exact pairwise tail
# ---------------------------------------------------------------------------


def log_pairwise_tail(n: int, c, c_sq_comp=None):
    """ln Pr(U₁ >= c) for the first coordinate of a uniform direction in ℝⁿ.

    ``c_sq_comp`` may pass 1 - c² computed without cancellation.
    """
    if n < 2:
        raise ValueError(f"n must be >= 2, got {n}")
    c = np.asarray(c, dtype=float)
    x = 1.0 - c * c if c_sq_comp is None else np.asarray(c_sq_comp, dtype=float)
    out = np.empty(np.broadcast(c, x).shape)
    c, x = np.broadcast_arrays(c, x)
    hi = c >= 1.0
    lo = c <= -1.0
    mid = ~(hi | lo)
    out[hi] = -np.inf
    out[lo] = 0.0
    if mid.any():
        cm = c[mid]
        xm = np.clip(x[mid], 0.0, 1.0)
        half_ib = np.log(0.5) + log_reg_inc_beta(xm, 0.5 * (n - 1), 0.5, xc=cm * cm)
        out[mid] = np.where(cm >= 0.0, half_ib, np.log1p(-np.exp(half_ib)))
    if out.ndim == 0:
        return float(out)
    return out


def pairwise_tail_exact(n: int, c):
    """Pr(U₁ >= c): ½·I_{1-c²}((n-1)/2, ½) for c ∈ [0, 1), mirrored for c < 0."""
    val = np.exp(log_pairwise_tail(n, c))
    if np.ndim(val) == 0:
        return float(val)
    return val


# ---------------------------------------------------------------------------
# RCU bound
# ---------------------------------------------------------------------------


def _channel_stats(rng: np.random.Generator, count: int, n: int, p: float):
    """Sufficient statistics of Y = x0 + Z for x0 = (√(nP), 0, ..., 0).

    Returns (a, r) with a = Y₁ and r = Y₂² + ... + Yₙ² ~ χ²(n-1).
    """
    a = math.sqrt(n * p) + rng.standard_normal(count)
    r = rng.chisquare(n - 1, count) if n > 1 else np.zeros(count)
    return a, r


def _rcu_log_tails(n: int, p: float, trials: int, seed: int, workers: int = 1) -> np.ndarray:
    """Per-trial ln Pr(⟨X̄,Y⟩ >= ⟨X,Y⟩ | X, Y), exact given the channel draw."""

    def block(rng, count):
        a, r = _channel_stats(rng, count, n, p)
        ysq = a * a + r
        c = a / np.sqrt(ysq)
        return log_pairwise_tail(n, c, c_sq_comp=r / ysq)

    return run_blocks(trials, seed, block, workers)


@dataclass(frozen=True)
class RcuEstimate:
    n: int
    m_log: float
    eps_hat: float
    stderr: float
    trials: int
    seed: int

    def as_dict(self) -> dict:
        return {
            "n": self.n,
            "m_log": self.m_log,
            "eps_hat": self.eps_hat,
            "stderr": self.stderr,
            "trials": self.trials,
            "seed": self.seed,
        }


def _rcu_terms(log_tails: np.ndarray, m_log: float) -> np.ndarray:
    return np.exp(np.minimum(m_log + log_tails, 0.0))


def rcu_error_estimate(n: int, m_log: float, p: float, trials: int, seed: int, workers: int = 1) -> RcuEstimate:
    """Monte Carlo value of E[min{1, M·Pr(⟨X̄,Y⟩ >= ⟨X,Y⟩ | X, Y)}] with M = e^m_log.

    The factor is M, not M-1. The conditional probability is evaluated in
    closed form through the incomplete beta function.
    """
    if n < 2:
        raise ValueError(f"n must be >= 2, got {n}")
    lt = _rcu_log_tails(n, p, trials, seed, workers)
    eps_hat, se = _mean_stderr(_rcu_terms(lt, m_log))
    return RcuEstimate(n=n, m_log=float(m_log), eps_hat=eps_hat, stderr=se, trials=trials, seed=seed)


def rcu_max_rate(
    n: int,
    eps: float,
    p: float,
    trials: int,
    tol: float = 0.05,
    seed: int = 0,
    workers: int = 1,
) -> BoundResult:
    """Largest ln M (to within ``tol``) whose RCU estimate satisfies eps_hat + 2·stderr <= eps.

    All candidate rates reuse the same channel draws, so the estimate is
    monotone in ln M and bisection is well defined.
    """
    if not 0.0 < eps < 1.0:
        raise ValueError(f"eps must lie in (0, 1), got {eps}")
    if not tol > 0.0:
        raise ValueError(f"tol must be positive, got {tol}")
    lt = _rcu_log_tails(n, p, trials, seed, workers)

    def score(m):
        est, se = _mean_stderr(_rcu_terms(lt, m))
        return est, se

    def ok(m):
        est, se = score(m)
        return est + 2.0 * se <= eps

    lo = 0.0
    if not ok(lo):
        raise BracketError(f"target eps={eps} is not reached even with a single codeword")
    step = max(1.0, 0.5 * math.log(n))
    hi = normal_approximation(n, eps, p, include_third_order=False).total + math.log(n) + step
    hi = max(hi, step)
    while ok(hi):
        lo = hi
        hi += step
        step *= 2.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if ok(mid):
            lo = mid
        else:
            hi = mid
    est, se = score(lo)
    na = normal_approximation(n, eps, p, include_third_order=False)
    return BoundResult(
        value=lo,
        terms={
            "eps_hat": est,
            "normal_approx": na.total,
            "third_order_residual": lo - na.total,
        },
        constants={"tol": tol},
        stderr=se,
        provenance=f"monte-carlo(seed={seed},trials={trials})",
    )


# ---------------------------------------------------------------------------
# Typical output set
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TypicalSetSpec:
    n: int
    p: float
    delta: float | None = None

    def __post_init__(self):
        if self.n < 1:
            raise ValueError(f"n must be >= 1, got {self.n}")
        if not self.p > 0.0:
            raise ValueError(f"p must be positive, got {self.p}")
        if self.delta is None:
            object.__setattr__(self, "delta", self.n ** (-1.0 / 3.0))
        if not self.delta > 0.0:
            raise ValueError(f"delta must be positive, got {self.delta}")

    @property
    def interval(self) -> tuple[float, float]:
        return (self.p + 1.0 - self.delta, self.p + 1.0 + self.delta)


@dataclass(frozen=True)
class TypicalSetEstimate:
    prob_complement: float
    stderr: float
    trials: int
    seed: int


def typical_set_prob(spec: TypicalSetSpec, trials: int, seed: int, workers: int = 1) -> TypicalSetEstimate:
    """Monte Carlo estimate of Pr(‖X+Z‖²/n outside [P+1-δ, P+1+δ])."""
    n, p = spec.n, spec.p
    lo, hi = spec.interval

    def block(rng, count):
        a, r = _channel_stats(rng, count, n, p)
        s = (a * a + r) / n
        return ((s < lo) | (s > hi)).astype(float)

    est, se = _mean_stderr(run_blocks(trials, seed, block, workers))
    return TypicalSetEstimate(prob_complement=est, stderr=se, trials=trials, seed=seed)


def typical_set_prob_exact(spec: TypicalSetSpec) -> float:
    """The same probability from the noncentral χ²(n, nP) law of ‖x0 + Z‖²."""
    n, p = spec.n, spec.p
    lo, hi = spec.interval
    dist = stats.ncx2(df=n, nc=n * p)
    below = float(dist.cdf(n * lo)) if lo > 0.0 else 0.0
    return below + float(dist.sf(n * hi))


# ---------------------------------------------------------------------------
# Output-density ratio and the achievable rate
# ---------------------------------------------------------------------------


def _log_normalizer_centered(n: int) -> float:
    # ∫(1-u²)^((n-3)/2) du = B(½, (n-1)/2)
    return 0.5 * math.log(math.pi) + gammaln(0.5 * (n - 1)) - gammaln(0.5 * n)


def log_output_density_ratio(n: int, p: float, s: float) -> float:
    """ln of f_{X}Wⁿ(y) / f*_Y(y) for any y with ‖y‖² = n·s.

    The induced density of the sphere code is the Gaussian-smoothed uniform
    sphere; its ratio to N(0, (P+1)I) depends on y only through s.
    """
    if n < 3:
        raise ValueError(f"n must be >= 3, got {n}")
    ln_f = ShellDensitySpec(n, p, s).log_normalizer
    return (
        0.5 * n * math.log1p(p)
        - 0.5 * n * (p + s)
        + 0.5 * n * s / (p + 1.0)
        + ln_f
        - _log_normalizer_centered(n)
    )


def output_density_ratio_bound(n: int, p: float, delta: float | None = None, grid_points: int = 65) -> float:
    """1.01 × the largest density ratio over s ∈ [P+1-δ, P+1+δ] on a uniform grid."""
    if grid_points < 2:
        raise ValueError(f"grid_points must be >= 2, got {grid_points}")
    delta = n ** (-1.0 / 3.0) if delta is None else delta
    lo = max(p + 1.0 - delta, 1e-12)
    grid = np.linspace(lo, p + 1.0 + delta, grid_points)
    best = max(log_output_density_ratio(n, p, float(s)) for s in grid)
    return 1.01 * math.exp(best)


def achievable_log_m(
    n: int,
    eps: float,
    p: float,
    xi: float | None = None,
    j_grid_points: int = 65,
) -> BoundResult:
    """ln M = nC + √(nV)·Φ⁻¹(eps - (B+G)/√n - ξ_n) + ½ln n - ln(G·J).

    ``xi`` defaults to the exact noncentral-χ² probability that the output
    leaves the typical shell with δ = n^(-1/3).
    """
    if not 0.0 < eps < 1.0:
        raise ValueError(f"eps must lie in (0, 1), got {eps}")
    v = dispersion(p)
    t = third_abs_moment(p)
    b = 6.0 * t / v**1.5
    g = tail_constants(p)["G"]
    typ = TypicalSetSpec(n, p)
    if xi is None:
        xi = typical_set_prob_exact(typ)
    arg = eps - (b + g) / math.sqrt(n) - xi
    if not 0.0 < arg < 1.0:
        raise VacuousBoundError(
            f"bound is vacuous at n={n}, eps={eps}: backed-off target {arg:.4g} is outside (0, 1) "
            f"(B={b:.4g}, G={g:.4g}, xi={xi:.4g})"
        )
    j = output_density_ratio_bound(n, p, typ.delta, j_grid_points)
    cap = n * capacity(p)
    disp = math.sqrt(n * v) * std_normal_cdf_inv(arg)
    third = 0.5 * math.log(n)
    const = -math.log(g * j)
    return BoundResult(
        value=cap + disp + third + const,
        terms={
            "capacity_term": cap,
            "dispersion_term": disp,
            "third_order_term": third,
            "constant_term": const,
        },
        constants={"B": b, "G": g, "J": j, "T": t, "V": v, "xi": xi, "backed_off_eps": arg},
        provenance="formula",
    )
