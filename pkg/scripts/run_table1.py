"""Empirical size table for one design/distribution combination.

Desk scale finishes in minutes on a laptop; paper scale runs the four
(n, p) cells of the published table at reps=500, B=250 and takes hours.
Each cell prints a progress line to stderr; the CSV goes to --out or stdout.

    python scripts/run_table1.py --scale desk --out size_desk.csv
    python scripts/run_table1.py --scale paper --design 2 --dist gamma
"""

import argparse
import sys
import time

from covmtt import SimConfig, run_size
from covmtt.cli import _CSV_COLUMNS, _write_out, csv_text

SCALES = {
    # (n, p) cells, reps, B
    "desk": ([(40, 50), (60, 100)], 300, 200),
    "paper": ([(60, 175), (80, 277), (100, 396), (120, 530)], 500, 250),
}


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--scale", choices=sorted(SCALES), default="desk")
    ap.add_argument("--design", type=int, choices=[1, 2], default=1)
    ap.add_argument("--dist", choices=["gaussian", "gamma"], default="gaussian")
    ap.add_argument("--methods", default="mtt,mtt_bt,clx,lc")
    ap.add_argument("--reps", type=int, default=None, help="override the scale preset")
    ap.add_argument("--bootstrap", type=int, default=None, metavar="B")
    ap.add_argument("--alpha", type=float, default=0.05)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--threads", type=int, default=1)
    ap.add_argument("--out", default=None)
    args = ap.parse_args(argv)

    cells, reps, B = SCALES[args.scale]
    reps = args.reps if args.reps is not None else reps
    B = args.bootstrap if args.bootstrap is not None else B
    methods = tuple(tok.strip().replace("-", "_") for tok in args.methods.split(",") if tok.strip())

    rows = []
    for n, p in cells:
        config = SimConfig(
            design=args.design, dist=args.dist, n1=n, n2=n, p=p,
            reps=reps, B=B, alpha=args.alpha, methods=methods,
            master_seed=args.seed, threads=args.threads,
        )
        t0 = time.perf_counter()
        result = run_size(config)
        summary = "  ".join(f"{m}={result.rates[m]:.4f}" for m in methods)
        print(
            f"n={n} p={p}: {summary}  [{time.perf_counter() - t0:.0f}s]",
            file=sys.stderr,
        )
        for m in methods:
            rows.append(
                {
                    "method": m, "design": args.design, "dist": args.dist,
                    "n1": n, "n2": n, "p": p, "beta": None, "r": None,
                    "reps": reps, "B": B, "rate": result.rates[m],
                    "se": result.ses[m], "seed": args.seed,
                }
            )
    _write_out(csv_text(_CSV_COLUMNS, rows), args.out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
