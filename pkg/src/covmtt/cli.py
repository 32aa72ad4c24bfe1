"""Command-line front end.

Subcommands: ``test`` runs one of the covariance-equality tests on two CSV
samples and prints a flat JSON result document; ``simulate`` runs Monte Carlo
size/power studies and emits a CSV table; ``boundary`` emits the
detection-boundary phase table.  Exit codes: 0 = ran (whatever the decision),
2 = input error, 3 = numeric error.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import sys

import numpy as np

from .boundary import phase_table, rho_star
from .bootstrap import mtt_test_bootstrap
from .errors import DataError, NumericError
from .experiments import SimConfig, p_from_rule, run_power, run_size
from .grids import SampleMatrix, diff_grid
from .mtt import ThresholdParams, mtt_test_asymptotic, single_level_test
from .rivals import RivalConfig, rival_test

_CSV_COLUMNS = [
    "method", "design", "dist", "n1", "n2", "p",
    "beta", "r", "reps", "B", "rate", "se", "seed",
]


def _fmt(value) -> str:
    # shortest round-trip formatting for floats; plain str elsewhere
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def csv_text(columns, rows) -> str:
    """Serialize rows (dicts) with LF endings and round-trip float text."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_fmt(row.get(c)) for c in columns])
    return buf.getvalue()


def parse_csv(text: str) -> list[dict]:
    """Parser for the package's own CSV outputs (header row required)."""
    return list(csv.DictReader(io.StringIO(text)))


def _write_out(text: str, out_path):
    if out_path:
        with open(out_path, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _sha256(path: str) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _read_csv_matrix(path: str, header: bool) -> np.ndarray:
    try:
        arr = np.loadtxt(path, delimiter=",", skiprows=1 if header else 0, ndmin=2)
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    except ValueError as exc:
        raise DataError(f"bad CSV in {path}: {exc}") from exc
    return arr


def _resolve_params(args) -> ThresholdParams:
    text = args.s0
    if text == "auto-exp":
        return ThresholdParams.auto_exponential(eta=args.eta, alpha=args.alpha)
    if text.startswith("auto-poly:"):
        try:
            xi = float(text.split(":", 1)[1])
        except ValueError as exc:
            raise DataError(f"bad --s0 value {text!r}") from exc
        return ThresholdParams.auto_polynomial(xi, eta=args.eta, alpha=args.alpha)
    try:
        s0 = float(text)
    except ValueError as exc:
        raise DataError(
            f"--s0 must be a number, auto-exp, or auto-poly:<xi>, got {text!r}"
        ) from exc
    return ThresholdParams(s0=s0, eta=args.eta, alpha=args.alpha)


def cmd_test(args) -> int:
    x = SampleMatrix(_read_csv_matrix(args.x, args.header))
    y = SampleMatrix(_read_csv_matrix(args.y, args.header))
    params = _resolve_params(args)
    if args.method == "mtt-bt":
        outcome = mtt_test_bootstrap(
            x, y, params, B=args.bootstrap, seed=args.seed, threads=args.threads
        )
    elif args.method == "mtt":
        outcome = mtt_test_asymptotic(diff_grid(x, y), params)
    elif args.method == "single":
        if args.level is None:
            raise DataError("--method single requires --level")
        outcome = single_level_test(diff_grid(x, y), args.level, args.alpha)
    else:
        cfg = RivalConfig(method=args.method, calibration="bootstrap",
                          B=args.bootstrap, seed=args.seed)
        outcome = rival_test(x, y, cfg, args.alpha, threads=args.threads)

    doc = {
        "method": outcome.method,
        "statistic": outcome.statistic,
        "p_value": outcome.p_value,
        "critical_value": outcome.critical_value,
        "reject": outcome.reject,
        "x": args.x,
        "y": args.y,
        "x_sha256": _sha256(args.x),
        "y_sha256": _sha256(args.y),
    }
    for key, value in outcome.params.items():
        doc[f"param_{key}"] = value
    _write_out(json.dumps(doc, indent=2, sort_keys=True) + "\n", args.out)
    return 0


def _parse_methods(text: str) -> tuple:
    methods = tuple(tok.strip().replace("-", "_") for tok in text.split(",") if tok.strip())
    if not methods:
        raise DataError("--methods must name at least one method")
    return methods


def cmd_simulate(args) -> int:
    if (args.p is None) == (not args.p_rule):
        raise DataError("give exactly one of --p or --p-rule")
    p = p_from_rule(args.n1) if args.p_rule else args.p
    methods = _parse_methods(args.methods)

    if args.mode == "power":
        if args.beta is None:
            raise DataError("power mode requires --beta")
        if (args.r is None) == (args.r_grid is None):
            raise DataError("power mode requires exactly one of --r or --r-grid")
        if args.r_grid is not None:
            try:
                r_values = [float(tok) for tok in args.r_grid.split(",") if tok.strip()]
            except ValueError as exc:
                raise DataError(f"bad --r-grid: {args.r_grid!r}") from exc
        else:
            r_values = [args.r]
        if not r_values:
            raise DataError("empty --r-grid")
    else:
        if args.r is not None or args.r_grid is not None or args.beta is not None:
            raise DataError("size mode takes no --beta/--r/--r-grid")
        r_values = [None]

    rows = []
    for r in r_values:
        config = SimConfig(
            design=args.design,
            dist=args.dist,
            n1=args.n1,
            n2=args.n2,
            p=p,
            beta=args.beta,
            r=r,
            reps=args.reps,
            B=args.bootstrap,
            alpha=args.alpha,
            methods=methods,
            master_seed=args.seed,
            size_adjust=args.size_adjust,
            s0=args.s0,
            eta=args.eta,
            threads=args.threads,
        )
        result = run_power(config) if args.mode == "power" else run_size(config)
        for method in methods:
            rows.append(
                {
                    "method": method,
                    "design": args.design,
                    "dist": args.dist,
                    "n1": args.n1,
                    "n2": args.n2,
                    "p": p,
                    "beta": args.beta,
                    "r": r,
                    "reps": args.reps,
                    "B": args.bootstrap,
                    "rate": result.rates[method],
                    "se": result.ses[method],
                    "seed": args.seed,
                }
            )
    _write_out(csv_text(_CSV_COLUMNS, rows), args.out)
    return 0


_BOUNDARY_COLUMNS = ["xi", "beta", "rho_star", "rho_mean"]


def _check_boundary_table(text: str) -> None:
    rows = parse_csv(text)
    if not rows:
        raise NumericError("boundary self-check: empty table")
    by_beta = {}
    for row in rows:
        xi, beta = float(row["xi"]), float(row["beta"])
        star, mean = float(row["rho_star"]), float(row["rho_mean"])
        if star < mean - 1e-12:
            raise NumericError(f"boundary self-check: rho_star < rho_mean at ({beta}, {xi})")
        by_beta.setdefault(beta, []).append((xi, star))
    for beta, pairs in by_beta.items():
        pairs.sort()
        for (_, lo), (_, hi) in zip(pairs[1:], pairs):
            if lo > hi + 1e-12:
                raise NumericError(f"boundary self-check: rho_star increasing in xi at beta={beta}")
    for xi in {float(r["xi"]) for r in rows}:
        for bp in (0.625 - xi / 16.0, 0.75):
            if bp <= 0.5:  # first piece vanishes at xi = 2
                continue
            left = rho_star(np.nextafter(bp, 0.5), xi)
            right = rho_star(np.nextafter(bp, 1.0), xi)
            if abs(left - right) > 1e-12:
                raise NumericError(f"boundary self-check: discontinuity near beta={bp}, xi={xi}")


def cmd_boundary(args) -> int:
    try:
        xis = [float(tok) for tok in args.xi.split(",") if tok.strip()]
    except ValueError as exc:
        raise DataError(f"bad --xi list: {args.xi!r}") from exc
    if not xis:
        raise DataError("empty --xi list")
    for xi in xis:
        if not 0.0 <= xi <= 2.0:
            raise DataError(f"xi must be in [0, 2], got {xi}")
    if not 0.5 < args.beta_min <= args.beta_max < 1.0:
        raise DataError(
            f"need 0.5 < beta-min <= beta-max < 1, got {args.beta_min}, {args.beta_max}"
        )
    if args.points < 1:
        raise DataError(f"--points must be >= 1, got {args.points}")
    beta_grid = np.linspace(args.beta_min, args.beta_max, args.points)
    text = csv_text(_BOUNDARY_COLUMNS, phase_table(xis, beta_grid))
    if args.check:
        _check_boundary_table(text)
    _write_out(text, args.out)
    return 0


def _add_common(sub):
    sub.add_argument("--out", default=None, help="output file (default stdout)")
    sub.add_argument("--seed", type=int, default=0)
    sub.add_argument("--threads", type=int, default=1,
                     help="worker count for parallel sections, 0 = all cores")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="covmtt",
        description="Thresholding tests for equality of two high-dimensional covariance matrices",
    )
    subs = parser.add_subparsers(dest="subcommand", required=True)

    test = subs.add_parser("test", help="test two CSV samples")
    test.add_argument("--x", required=True, help="first sample CSV (rows = observations)")
    test.add_argument("--y", required=True, help="second sample CSV")
    test.add_argument("--header", action="store_true", help="skip one header row")
    test.add_argument("--method", choices=["mtt-bt", "mtt", "single", "clx", "lc"],
                      default="mtt-bt")
    test.add_argument("--s0", default="0.5",
                      help="scan lower bound: number, auto-exp, or auto-poly:<xi>")
    test.add_argument("--eta", type=float, default=0.05)
    test.add_argument("--alpha", type=float, default=0.05)
    test.add_argument("--bootstrap", type=int, default=250, metavar="B")
    test.add_argument("--level", type=float, default=None,
                      help="threshold level s for --method single")
    _add_common(test)
    test.set_defaults(func=cmd_test)

    sim = subs.add_parser("simulate", help="Monte Carlo size/power tables")
    sim.add_argument("mode", choices=["size", "power"])
    sim.add_argument("--design", type=int, choices=[1, 2], default=1)
    sim.add_argument("--dist", choices=["gaussian", "gamma"], default="gaussian")
    sim.add_argument("--n1", type=int, required=True)
    sim.add_argument("--n2", type=int, required=True)
    sim.add_argument("--p", type=int, default=None)
    sim.add_argument("--p-rule", action="store_true",
                     help="set p = floor(0.25 * n1**1.6)")
    sim.add_argument("--beta", type=float, default=None)
    sim.add_argument("--r", type=float, default=None)
    sim.add_argument("--r-grid", default=None, help="comma-separated r values")
    sim.add_argument("--reps", type=int, default=500)
    sim.add_argument("--bootstrap", type=int, default=250, metavar="B")
    sim.add_argument("--alpha", type=float, default=0.05)
    sim.add_argument("--size-adjust", action="store_true")
    sim.add_argument("--methods", default="mtt,mtt_bt,clx,lc")
    sim.add_argument("--s0", type=float, default=0.5)
    sim.add_argument("--eta", type=float, default=0.05)
    _add_common(sim)
    sim.set_defaults(func=cmd_simulate)

    bound = subs.add_parser("boundary", help="detection-boundary phase table")
    bound.add_argument("--xi", default="0,0.75,1.5", help="comma-separated xi values")
    bound.add_argument("--beta-min", type=float, default=0.501)
    bound.add_argument("--beta-max", type=float, default=0.999)
    bound.add_argument("--points", type=int, default=200)
    bound.add_argument("--check", action="store_true",
                       help="re-parse the emitted table and re-validate its invariants")
    _add_common(bound)
    bound.set_defaults(func=cmd_boundary)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (DataError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NumericError as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return 3
    except np.linalg.LinAlgError as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
