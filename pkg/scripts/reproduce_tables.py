"""Run every simulation table and write CSVs under an output directory.

    python3 scripts/reproduce_tables.py --outdir results --reps 50
    python3 scripts/reproduce_tables.py --tables t1 t2 --reps 5 --nodes 60   # quick look
"""
import argparse
import sys
import time

from twhm.cli import TABLES, main as cli_main


def run(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--tables", nargs="+", choices=TABLES, default=list(TABLES))
    ap.add_argument("--reps", type=int, default=None, help="default: 20 for t1/ks/cluster, 50 otherwise")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--nodes", type=int, default=None)
    ap.add_argument("--outdir", default="results")
    args = ap.parse_args(argv)
    for table in args.tables:
        argv = ["bench", "--table", table, "--seed", str(args.seed), "--outdir", args.outdir]
        if args.reps is not None:
            argv += ["--reps", str(args.reps)]
        if args.nodes is not None:
            argv += ["--nodes", str(args.nodes)]
        t0 = time.perf_counter()
        code = cli_main(argv)
        print(f"# {table}: {time.perf_counter() - t0:.1f}s", file=sys.stderr)
        if code:
            return code
    return 0


if __name__ == "__main__":
    sys.exit(run())
