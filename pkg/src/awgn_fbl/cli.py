"""Command-line front end: ``awgn-fbl <command> [flags]``.

Single records and validation reports are JSON; sweeps are CSV. Both carry a
versioned schema tag. Nothing time-dependent is written to stdout or files,
so identical flags give identical output.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
import time

import numpy as np

from . import code_sim, exponents, gauss_core, parallel_wf, sphere_shell, validation

SCHEMA_PREFIX = "awgn-fbl"
LN2 = math.log(2.0)

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_USAGE = 2
EXIT_VACUOUS = 3

SWEEP_OUTPUTS = ("na", "na2", "rcu", "achievable")


class UsageError(Exception):
    pass


def _schema(cmd: str) -> str:
    return f"{SCHEMA_PREFIX}/{cmd}/v1"


# ---------------------------------------------------------------------------
# argument types
# ---------------------------------------------------------------------------


def _positive_int(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {v}")
    return v


def _finite_float(text: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number, got {text!r}") from None
    if not math.isfinite(v):
        raise argparse.ArgumentTypeError(f"must be finite, got {text!r}")
    return v


def _positive_float(text: str) -> float:
    v = _finite_float(text)
    if v <= 0.0:
        raise argparse.ArgumentTypeError(f"must be > 0, got {v}")
    return v


def _probability(text: str) -> float:
    v = _finite_float(text)
    if not 0.0 < v < 1.0:
        raise argparse.ArgumentTypeError(f"must lie in (0, 1), got {v}")
    return v


def _seed(text: str) -> int:
    try:
        v = int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer seed, got {text!r}") from None
    if not 0 <= v < 1 << 64:
        raise argparse.ArgumentTypeError(f"seed must be a 64-bit unsigned integer, got {v}")
    return v


def _float_list(text: str) -> list[float]:
    parts = [t for t in text.replace(" ", "").split(",") if t]
    if not parts:
        raise argparse.ArgumentTypeError("expected a comma-separated list of numbers")
    return [_positive_float(t) for t in parts]


# ---------------------------------------------------------------------------
# output helpers
# ---------------------------------------------------------------------------


def _scale(units: str) -> float:
    return 1.0 if units == "nats" else 1.0 / LN2


def _json_text(record: dict) -> str:
    return json.dumps(record, indent=2, allow_nan=False) + "\n"


def _emit_json(record: dict, out: str | None) -> None:
    text = _json_text(record)
    if out:
        _write_text(out, text)
    sys.stdout.write(text)


def _write_text(path: str, text: str) -> None:
    try:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            fh.write(text)
    except OSError as exc:
        raise OSError(f"cannot write {path!r}: {exc.strerror or exc}") from exc


def _csv_text(schema: str, header: list[str], rows: list[list]) -> str:
    buf = io.StringIO()
    buf.write(f"# schema: {schema}\r\n")
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_cell(v) for v in row])
    return buf.getvalue()


def _cell(v):
    if isinstance(v, float):
        return repr(v)
    if v is None:
        return ""
    return v


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def cmd_na(args) -> int:
    t = gauss_core.normal_approximation(args.n, args.eps, args.snr, include_third_order=args.third_order)
    half_log_n = 0.5 * math.log(args.n)
    k = _scale(args.units)
    rec = {
        "schema": _schema("na"),
        "units": args.units,
        "n": args.n,
        "eps": args.eps,
        "snr": args.snr,
        "capacity_term": t.capacity_term * k,
        "dispersion_term": t.dispersion_term * k,
        "third_order_term": t.third_order_term * k,
        "total": t.total * k,
        "third_order_included": args.third_order,
        "half_log_n": half_log_n * k,
        "total_with_third_order": (t.capacity_term + t.dispersion_term + half_log_n) * k,
        "provenance": "formula(normal-approximation)",
    }
    _emit_json(rec, args.out)
    return EXIT_OK


def cmd_rcu(args) -> int:
    start = time.perf_counter()
    try:
        res = code_sim.rcu_max_rate(args.n, args.eps, args.snr, args.trials, tol=args.tol,
                                    seed=args.seed, workers=args.workers)
    except code_sim.BracketError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VACUOUS
    wall = time.perf_counter() - start
    k = _scale(args.units)
    na = res.terms["normal_approx"]
    rec = {
        "schema": _schema("rcu"),
        "units": args.units,
        "n": args.n,
        "eps": args.eps,
        "snr": args.snr,
        "trials": args.trials,
        "seed": args.seed,
        "m_log_nats": res.value,
        "m_log_bits": res.value / LN2,
        "eps_hat": res.terms["eps_hat"],
        "stderr": res.stderr,
        "window_low": na * k,
        "window_high": (na + 0.5 * math.log(args.n)) * k,
        "provenance": res.provenance,
    }
    sys.stdout.write(_json_text(rec))
    if args.out:
        header = [key for key in rec if key != "schema"]
        _write_text(args.out, _csv_text(rec["schema"], header, [[rec[h] for h in header]]))
    # wall time stays off stdout so numeric output is reproducible
    print(f"wall time: {wall:.3f} s", file=sys.stderr)
    return EXIT_OK


def cmd_density(args) -> int:
    if args.n < 3:
        raise UsageError("--n must be >= 3 for the shell density")
    if args.snr < 0.0:
        raise UsageError("--snr must be >= 0")
    spec = sphere_shell.ShellDensitySpec(args.n, args.snr, args.s)
    u = np.linspace(-1.0, 1.0, args.grid)
    dens = sphere_shell.shell_density(u, spec)
    rec = {
        "schema": _schema("density"),
        "n": args.n,
        "snr": args.snr,
        "s": args.s,
        "log_normalizer": spec.log_normalizer,
        "mode_limit": sphere_shell.shell_mode(spec.ps),
        "mode_finite_n": sphere_shell.shell_mode_finite(spec.ps, args.n),
        "u": [float(v) for v in u],
        "density": [float(v) for v in dens],
        "provenance": "formula(shell-density)",
    }
    _emit_json(rec, args.out)
    return EXIT_OK


def cmd_laplace(args) -> int:
    rep = sphere_shell.laplace_sup_bound(args.snr, args.s, args.n)
    rec = {"schema": _schema("laplace"), "snr": args.snr, "s": args.s, "n": args.n}
    rec.update(rep.as_dict())
    rec["provenance"] = "formula(laplace-peak)"
    _emit_json(rec, args.out)
    return EXIT_OK


def cmd_exponent(args) -> int:
    k = _scale(args.units)
    rate = args.rate / k
    c = gauss_core.capacity(args.snr)
    if rate > c:
        raise UsageError(f"--rate exceeds capacity {c * k:.6g} ({args.units})")
    e = exponents.sp_exponent(rate, args.snr)
    rec = {
        "schema": _schema("exponent"),
        "units": args.units,
        "rate": args.rate,
        "snr": args.snr,
        "capacity": c * k,
        "sp_exponent": e * k,
        "phi_limit": math.asin(math.exp(-rate)),
        "shannon_F": exponents.shannon_F(math.asin(math.exp(-rate)), args.snr) * k,
        "high_rate": bool(0.5 * c < rate < c),
        "provenance": "formula(sphere-packing)",
    }
    if rate + args.h < c:
        slope = exponents.sp_exponent_slope(rate, args.snr, args.h)
        rec["slope"] = slope
        rec["prefactor_order"] = exponents.prefactor_exponent(rate, args.snr, args.h)
    _emit_json(rec, args.out)
    return EXIT_OK


def cmd_cone_angle(args) -> int:
    k = _scale(args.units)
    rate = args.rate / k
    try:
        phi = exponents.cone_angle(rate, args.n)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VACUOUS
    rec = {
        "schema": _schema("cone-angle"),
        "units": args.units,
        "rate": args.rate,
        "n": args.n,
        "phi": phi,
        "phi_limit": math.asin(min(1.0, math.exp(-rate))),
        "log_residual": exponents.cone_angle_residual(phi, rate, args.n),
        "shifted_rate_gap": (-math.log(math.sin(phi)) - rate + math.log(args.n) / (2.0 * args.n)) * k,
        "provenance": "formula(cone-angle)",
    }
    _emit_json(rec, args.out)
    return EXIT_OK


def cmd_waterfill(args) -> int:
    alloc = parallel_wf.waterfill(args.noise, args.power)
    rec = {"schema": _schema("waterfill")}
    rec.update(alloc.as_dict())
    rec["provenance"] = "formula(water-filling)"
    _emit_json(rec, args.out)
    return EXIT_OK


def cmd_parallel_na(args) -> int:
    res = parallel_wf.parallel_normal_approximation(args.n, args.eps, args.noise, args.power)
    k = _scale(args.units)
    rec = {
        "schema": _schema("parallel-na"),
        "units": args.units,
        "n": args.n,
        "eps": args.eps,
        "noise": list(args.noise),
        "power": args.power,
        "total": res.value * k,
        "terms": {key: val * k for key, val in res.terms.items()},
        "constants": res.constants,
        "provenance": res.provenance,
    }
    _emit_json(rec, args.out)
    return EXIT_OK


def cmd_typical(args) -> int:
    spec = code_sim.TypicalSetSpec(args.n, args.snr, args.delta)
    est = code_sim.typical_set_prob(spec, args.trials, args.seed, args.workers)
    rec = {
        "schema": _schema("typical"),
        "n": args.n,
        "snr": args.snr,
        "delta": spec.delta,
        "interval": list(spec.interval),
        "prob_outside": est.prob_complement,
        "stderr": est.stderr,
        "prob_outside_exact": code_sim.typical_set_prob_exact(spec),
        "trials": est.trials,
        "seed": est.seed,
        "provenance": f"monte-carlo(seed={args.seed},trials={args.trials})",
    }
    _emit_json(rec, args.out)
    return EXIT_OK


def cmd_codebook_export(args) -> int:
    if not args.out:
        raise UsageError("codebook-export needs --out")
    try:
        book = code_sim.generate_codebook(args.n, args.m, args.snr, args.seed)
    except code_sim.CodebookTooLarge as exc:
        raise UsageError(str(exc)) from None
    try:
        code_sim.save_codebook(book, args.out, fmt=args.format)
    except OSError as exc:
        raise OSError(f"cannot write {args.out!r}: {exc.strerror or exc}") from exc
    rec = {
        "schema": _schema("codebook-export"),
        "n": args.n,
        "m": args.m,
        "snr": args.snr,
        "seed": args.seed,
        "format": args.format,
        "path": args.out,
    }
    sys.stdout.write(_json_text(rec))
    return EXIT_OK


def cmd_validate(args) -> int:
    overrides = {}
    for item in args.tol or []:
        key, sep, val = item.partition("=")
        if not sep:
            raise UsageError(f"--tol expects key=value, got {item!r}")
        try:
            overrides[key] = float(val)
        except ValueError:
            raise UsageError(f"--tol value for {key!r} is not a number") from None
    try:
        checks = validation.run_suite(args.suite, overrides)
    except KeyError as exc:
        raise UsageError(exc.args[0]) from None
    ok = all(c.passed for c in checks)
    rec = {
        "schema": _schema("validate"),
        "suite": args.suite,
        "pass": ok,
        "checks": [c.as_dict() for c in checks],
    }
    _emit_json(rec, args.out)
    return EXIT_OK if ok else EXIT_CHECK_FAILED


# ---------------------------------------------------------------------------
# sweep
# ---------------------------------------------------------------------------


def parse_values(spec: str, variable: str) -> list[float]:
    """Explicit ``a,b,c`` or ``start:stop:count[:log]``."""
    spec = spec.strip()
    if not spec:
        raise UsageError("--values is empty")
    if ":" in spec:
        parts = spec.split(":")
        if len(parts) not in (3, 4):
            raise UsageError("--values range must be start:stop:count[:log|lin]")
        try:
            start, stop, count = float(parts[0]), float(parts[1]), int(parts[2])
        except ValueError:
            raise UsageError(f"cannot parse --values range {spec!r}") from None
        scale = parts[3] if len(parts) == 4 else "lin"
        if count < 1:
            raise UsageError("--values range count must be >= 1")
        if scale == "log":
            if start <= 0.0 or stop <= 0.0:
                raise UsageError("log-spaced --values need positive endpoints")
            vals = list(np.geomspace(start, stop, count))
        elif scale == "lin":
            vals = list(np.linspace(start, stop, count))
        else:
            raise UsageError(f"unknown --values scale {scale!r}")
    else:
        try:
            vals = [float(t) for t in spec.split(",") if t.strip()]
        except ValueError:
            raise UsageError(f"cannot parse --values {spec!r}") from None
    if not vals:
        raise UsageError("--values is empty")
    vals = [float(v) for v in vals]
    if variable == "n":
        out = []
        for v in vals:
            r = round(v)
            if abs(v - r) > 1e-9 * max(1.0, abs(v)) and ":" not in spec:
                raise UsageError(f"blocklength values must be integers, got {v}")
            out.append(int(r))
        return out
    return vals


def _sweep_row(point: dict, outputs, args) -> tuple[dict, list[str], list[str]]:
    n, eps, snr = point["n"], point["eps"], point["snr"]
    k = _scale(args.units)
    cells: dict = {}
    prov: list[str] = []
    vacuous: list[str] = []
    if n < 1 or not 0.0 < eps < 1.0 or not snr > 0.0:
        for name in outputs:
            cells[name] = None
            vacuous.append(name)
        return cells, prov, vacuous
    rcu_nats = None
    for name in outputs:
        try:
            if name == "na":
                cells[name] = gauss_core.normal_approximation(n, eps, snr).total * k
                prov.append("na=formula(normal-approximation)")
            elif name == "na2":
                cells[name] = gauss_core.normal_approximation(n, eps, snr, include_third_order=False).total * k
                prov.append("na2=formula(normal-approximation,no-third-order)")
            elif name == "rcu":
                res = code_sim.rcu_max_rate(n, eps, snr, args.trials, tol=args.tol,
                                            seed=args.seed, workers=args.workers)
                rcu_nats = res.value
                cells[name] = res.value * k
                cells["rcu_stderr"] = res.stderr
                prov.append(f"rcu={res.provenance}")
            elif name == "achievable":
                cells[name] = code_sim.achievable_log_m(n, eps, snr).value * k
                prov.append("achievable=formula(achievability-construction)")
        except (code_sim.VacuousBoundError, code_sim.BracketError, ValueError):
            cells[name] = None
            vacuous.append(name)
    if args.regression:
        if rcu_nats is None:
            cells["y"] = None
        else:
            base = gauss_core.normal_approximation(n, eps, snr, include_third_order=False).total
            cells["y"] = (rcu_nats - base) * k
            cells["ln_n"] = math.log(n)
    return cells, prov, vacuous


def cmd_sweep(args) -> int:
    if args.outputs is None:
        raise UsageError("--outputs is required")
    outputs = [o for o in args.outputs.split(",") if o]
    if not outputs:
        raise UsageError("--outputs is empty")
    for o in outputs:
        if o not in SWEEP_OUTPUTS:
            raise UsageError(f"unknown --outputs entry {o!r}; choose from {', '.join(SWEEP_OUTPUTS)}")
    if args.regression and "rcu" not in outputs:
        raise UsageError("--regression needs rcu among --outputs")
    values = parse_values(args.values, args.var)
    fixed = {"n": args.n, "eps": args.eps, "snr": args.snr}
    header = [args.var]
    for o in outputs:
        header.append(o)
        if o == "rcu":
            header.append("rcu_stderr")
    if args.regression:
        header += ["ln_n", "y"]
    header += ["status", "provenance"]
    rows = []
    for v in values:
        point = dict(fixed)
        point[args.var] = v
        cells, prov, vacuous = _sweep_row(point, outputs, args)
        row = [v]
        for h in header[1:-2]:
            row.append(cells.get(h))
        row.append("vacuous:" + "|".join(vacuous) if vacuous else "ok")
        row.append(";".join(prov))
        rows.append(row)
    text = _csv_text(_schema("sweep"), header, rows)
    if args.out:
        _write_text(args.out, text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=_seed, default=0, help="64-bit RNG seed (default 0)")
    common.add_argument("--workers", type=_positive_int, default=1, help="Monte Carlo worker threads")
    common.add_argument("--units", choices=("bits", "nats"), default="bits", help="output units (default bits)")
    common.add_argument("--out", default=None, help="also write the record to this path")

    parser = argparse.ArgumentParser(
        prog="awgn-fbl",
        description="Finite-blocklength bounds and simulations for the AWGN channel.",
    )
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")

    def add(name, fn, help_text):
        p = sub.add_parser(name, parents=[common], help=help_text, description=help_text)
        p.set_defaults(func=fn)
        return p

    p = add("na", cmd_na, "normal approximation nC + sqrt(nV) Q^-1 + (1/2) ln n")
    p.add_argument("--n", type=_positive_int, required=True)
    p.add_argument("--eps", type=_probability, required=True)
    p.add_argument("--snr", type=_positive_float, required=True)
    p.add_argument("--third-order", action="store_true", help="include (1/2) ln n in total")

    p = add("rcu", cmd_rcu, "largest ln M meeting the target error under the Monte Carlo RCU bound")
    p.add_argument("--n", type=_positive_int, required=True)
    p.add_argument("--eps", type=_probability, required=True)
    p.add_argument("--snr", type=_positive_float, required=True)
    p.add_argument("--trials", type=_positive_int, default=100_000)
    p.add_argument("--tol", type=_positive_float, default=0.05, help="bisection tolerance in nats")

    p = add("density", cmd_density, "shell density of the normalized inner-product coordinate")
    p.add_argument("--n", type=_positive_int, required=True)
    p.add_argument("--snr", type=_finite_float, required=True, help="P (0 allowed)")
    p.add_argument("--s", type=_positive_float, required=True, help="squared output radius per dimension")
    p.add_argument("--grid", type=_positive_int, default=21, help="number of u grid points on [-1, 1]")

    p = add("laplace", cmd_laplace, "Laplace peak constant of the shell density, both closed forms")
    p.add_argument("--snr", type=_positive_float, required=True)
    p.add_argument("--s", type=_positive_float, required=True)
    p.add_argument("--n", type=_positive_int, default=None, help="also report sup f/sqrt(n) at this n")

    p = add("exponent", cmd_exponent, "sphere-packing exponent and high-rate prefactor order")
    p.add_argument("--rate", type=_positive_float, required=True, help="rate in the chosen --units")
    p.add_argument("--snr", type=_positive_float, required=True)
    p.add_argument("--h", type=_positive_float, default=1e-4, help="finite-difference step in nats")

    p = add("cone-angle", cmd_cone_angle, "finite-n cone half-angle at a given rate")
    p.add_argument("--rate", type=_positive_float, required=True, help="rate in the chosen --units")
    p.add_argument("--n", type=_positive_int, required=True)

    p = add("waterfill", cmd_waterfill, "water-filling power allocation")
    p.add_argument("--noise", type=_float_list, required=True, help="comma-separated noise variances")
    p.add_argument("--power", type=_positive_float, required=True)

    p = add("parallel-na", cmd_parallel_na, "normal approximation for water-filled parallel channels")
    p.add_argument("--n", type=_positive_int, required=True)
    p.add_argument("--eps", type=_probability, required=True)
    p.add_argument("--noise", type=_float_list, required=True)
    p.add_argument("--power", type=_positive_float, required=True)

    p = add("typical", cmd_typical, "probability the output leaves the typical shell")
    p.add_argument("--n", type=_positive_int, required=True)
    p.add_argument("--snr", type=_positive_float, required=True)
    p.add_argument("--delta", type=_positive_float, default=None, help="half-width (default n^(-1/3))")
    p.add_argument("--trials", type=_positive_int, default=100_000)

    p = add("sweep", cmd_sweep, "tabulate bounds over one variable as CSV")
    p.add_argument("--var", choices=("n", "eps", "snr"), required=True)
    p.add_argument("--values", required=True, help="a,b,c or start:stop:count[:log]")
    p.add_argument("--outputs", default="na", help=f"comma list from {','.join(SWEEP_OUTPUTS)}")
    p.add_argument("--n", type=_positive_int, default=100)
    p.add_argument("--eps", type=_probability, default=0.1)
    p.add_argument("--snr", type=_positive_float, default=1.0)
    p.add_argument("--trials", type=_positive_int, default=100_000)
    p.add_argument("--tol", type=_positive_float, default=0.05)
    p.add_argument("--regression", action="store_true",
                   help="add y = rcu - nC - sqrt(nV) Q^-1(eps) and ln n columns")

    p = add("validate", cmd_validate, "run invariant suites and report pass/fail as JSON")
    p.add_argument("suite", choices=(*validation.SUITES, "all"))
    p.add_argument("--tol", action="append", metavar="KEY=VALUE", help="override a check bound")

    p = add("codebook-export", cmd_codebook_export, "draw a random sphere codebook and save it")
    p.add_argument("--n", type=_positive_int, required=True)
    p.add_argument("--m", type=_positive_int, required=True)
    p.add_argument("--snr", type=_positive_float, required=True)
    p.add_argument("--format", choices=("csv", "bin"), default="csv")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        parser.error(f"{args.command}: {exc}")
    except (code_sim.VacuousBoundError, code_sim.BracketError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VACUOUS
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
