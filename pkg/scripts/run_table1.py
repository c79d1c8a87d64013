"""Replicate the 2-D benchmark table: W2 mean (sd) for each benchmark and setting.

    python scripts/run_table1.py --reps 10 --out table1.csv --manifests runs/
"""

import argparse
import csv
import sys
from pathlib import Path

from dsbs.experiment import BENCHMARKS, PUBLISHED_W2, SdeOptions, replicate, write_manifest

SETTINGS = {
    "VE-DSBS": SdeOptions("ve"),
    "VP-DSBS-1": SdeOptions("vp", tau=1.0),
    "VP-DSBS-10": SdeOptions("vp", tau=10.0),
}


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--reps", type=int, default=10)
    ap.add_argument("--n", type=int, default=10_000, help="train and test size")
    ap.add_argument("--particles", type=int, default=10_000)
    ap.add_argument("--N", type=int, default=100)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--benchmarks", default=",".join(BENCHMARKS))
    ap.add_argument("--settings", default=",".join(SETTINGS))
    ap.add_argument("--out", default="table1.csv")
    ap.add_argument("--manifests", help="directory for per-setting manifests")
    args = ap.parse_args(argv)

    rows = []
    for bench in args.benchmarks.split(","):
        for name in args.settings.split(","):
            res = replicate(
                bench,
                SETTINGS[name],
                reps=args.reps,
                n_train=args.n,
                n_test=args.n,
                particles=args.particles,
                n_steps=args.N,
                seed=args.seed,
                workers=args.workers,
                progress=lambda r: print(f"  {bench} {name} rep {r.rep}: {r.w2:.4f}", file=sys.stderr),
            )
            ref = PUBLISHED_W2.get((bench, name))
            row = res.table_row()
            row["reference"] = f"{ref[0]:.3f} ({ref[1]:.3f})" if ref else ""
            rows.append(row)
            print(f"{bench:16s} {name:12s} {row['cell']:>16s}   reference {row['reference']}")
            if args.manifests:
                Path(args.manifests).mkdir(parents=True, exist_ok=True)
                write_manifest(Path(args.manifests) / f"{bench}_{name}.json", res.manifest())

    with open(args.out, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0]))
        writer.writeheader()
        writer.writerows(rows)


if __name__ == "__main__":
    main()
