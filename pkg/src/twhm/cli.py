"""``twhm`` command line: simulate, fit, predict, bench, diagnose.

Results go to stdout as ``key=value`` lines; messages go to stderr.
Exit codes: 2 bad flags, 3 I/O or format error, 4 degenerate data,
5 non-convergence under ``--strict``.
"""
from __future__ import annotations

import argparse
import sys
import warnings
from pathlib import Path

import numpy as np

from . import bench
from .estimation import ConvergenceWarning, EstimationError, SolverOptions, fit_mle, fit_mme, mme_residual
from .forecast import PredictionConfig, predict_links, prediction_accuracy
from .io import FormatError, ModelFile, fit_timestamp, format_snapshots, read_model, read_snapshots, write_csv, write_model
from .model import SnapshotSeries
from .objective import block_pd_sufficient, gradient, hessian, neg_log_likelihood, smallest_eigenvalue, sufficient_stats
from .simulate import SimConfig, empirical_density, simulate

EXIT_USAGE = 2
EXIT_IO = 3
EXIT_DEGENERATE = 4
EXIT_NOCONV = 5

TABLES = ("t1", "t2", "t3", "t5", "fig2", "ks", "cluster")


class CliError(Exception):
    def __init__(self, code: int, msg: str):
        super().__init__(msg)
        self.code = code


def _emit(**kv) -> None:
    print(" ".join(f"{k}={_fmt(v)}" for k, v in kv.items()))


def _fmt(v) -> str:
    if isinstance(v, bool):
        return str(v).lower()
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _seed(text: str) -> int:
    v = int(text, 0)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def _unit(text: str) -> float:
    v = float(text)
    if not 0.0 <= v <= 1.0:
        raise argparse.ArgumentTypeError("must lie in [0, 1]")
    return v


def _setting(text: str):
    try:
        return bench.parse_setting_pair(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _load_series(path) -> SnapshotSeries:
    try:
        return read_snapshots(path)
    except (OSError, FormatError) as exc:
        raise CliError(EXIT_IO, f"cannot read snapshots from {path}: {exc}") from None


def _load_model(path) -> ModelFile:
    try:
        return read_model(path)
    except (OSError, FormatError) as exc:
        raise CliError(EXIT_IO, f"cannot read model from {path}: {exc}") from None


def _write_text(path, text: str) -> None:
    try:
        Path(path).write_text(text, encoding="utf-8")
    except OSError as exc:
        raise CliError(EXIT_IO, f"cannot write {path}: {exc}") from None


# ------------------------------------------------------------------ commands


def cmd_simulate(args) -> int:
    if args.model is not None:
        theta = _load_model(args.model).theta
        if args.nodes is not None and args.nodes != theta.p:
            raise CliError(EXIT_USAGE, f"--nodes {args.nodes} disagrees with the model (p = {theta.p})")
    else:
        if args.nodes is None:
            raise CliError(EXIT_USAGE, "--setting needs --nodes")
        if args.nodes < 2:
            raise CliError(EXIT_USAGE, "--nodes must be at least 2")
        s0, s1 = args.setting
        theta = bench.generate_setting(s0, s1, args.nodes, args.seed)
    series = simulate(SimConfig(theta, args.steps, args.seed))
    _write_text(args.out, format_snapshots(series))
    _emit(density=empirical_density(series), p=series.p, n=series.n)
    return 0


def cmd_fit(args) -> int:
    series = _load_series(args.data)
    if series.n < 1:
        raise CliError(EXIT_USAGE, "the data file needs at least two frames")
    stats = sufficient_stats(series)
    opts = SolverOptions(max_iters=args.max_iters, grad_tol=args.tol)
    # lambda = 0 is the unregularised estimator: no clamping of boundary degrees either
    strict = args.strict or args.lambda_ == 0
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        try:
            mme = fit_mme(stats, args.lambda_, opts, strict=strict)
            if args.method == "mle":
                res = fit_mle(stats, mme, opts)
                theta, grad_norm, converged = res.theta_hat, res.final_grad_norm, res.converged
            else:
                theta = mme
                grad_norm = mme_residual(stats, mme, args.lambda_)
                converged = grad_norm <= args.tol
        except EstimationError as exc:
            raise CliError(EXIT_DEGENERATE, str(exc)) from None
    for w in caught:
        if not issubclass(w.category, ConvergenceWarning):
            print(f"warning: {w.message}", file=sys.stderr)
    loss = neg_log_likelihood(theta, stats)
    meta = {
        "seed": args.seed,
        "method": args.method,
        "lambda": args.lambda_ if args.lambda_ is not None else "default",
        "grad_norm": grad_norm,
        "loss": loss,
        "timestamp": fit_timestamp(),
    }
    try:
        write_model(args.out, ModelFile(theta, meta))
    except OSError as exc:
        raise CliError(EXIT_IO, f"cannot write {args.out}: {exc}") from None
    _emit(converged=bool(converged), grad_norm=float(grad_norm), loss=float(loss))
    if not converged:
        print(f"warning: {args.method} fit did not reach tolerance {args.tol:g}", file=sys.stderr)
        if args.strict:
            return EXIT_NOCONV
    return 0


def cmd_predict(args) -> int:
    theta = _load_model(args.model).theta
    series = _load_series(args.data)
    if series.p != theta.p:
        raise CliError(EXIT_USAGE, f"model has p = {theta.p} but data has p = {series.p}")
    t = series.n if args.from_ is None else args.from_
    if not 0 <= t <= series.n:
        raise CliError(EXIT_USAGE, f"--from must lie in [0, {series.n}]")
    history = series.window(0, t + 1)
    if args.rule == "auto" and len(history) < 2:
        raise CliError(EXIT_USAGE, "the auto rule needs at least two history frames")
    cfg = PredictionConfig(args.rule, cutoff=args.cutoff, omega=args.omega)
    pred = predict_links(theta, series.edges[t], cfg, history=history)
    out = np.zeros((t + 2, pred.size), dtype=bool)
    out[t + 1] = pred
    _write_text(args.out, format_snapshots(SnapshotSeries(series.p, out)))
    result = {"t": t + 1, "edges": int(pred.sum())}
    if t < series.n:
        result["accuracy"] = prediction_accuracy(pred, series.edges[t + 1])
    _emit(**result)
    return 0


def _bench_rows(args):
    reps, seed = args.reps, args.seed
    override = args.nodes

    def grid(rows):
        for n, p, s0, s1, ref in rows:
            yield n, override or p, s0, s1, ref

    if args.table == "t1":
        rows = bench.table1_rows(p=override or 1000, n=2, reps=reps, seed=seed)
        return rows, bench.table1_summary(rows)
    if args.table in ("t2", "t3", "t5"):
        spec = {"t2": bench.TABLE2_ROWS, "t3": bench.table3_rows_def(), "t5": bench.table5_rows_def()}[args.table]
        rows, summary = [], []
        for n, p, s0, s1, ref in grid(spec):
            mme, mle, raw = bench.run_error_benchmark(s0, s1, n, p, reps, seed=seed)
            key = dict(n=n, p=p, beta0=s0.label(), beta1=s1.label())
            rows.extend({**key, **r} for r in raw)
            srow = dict(key, reps=reps)
            for rep in (mme, mle):
                m = rep.method.lower()
                for k in bench.ERROR_KEYS:
                    srow[f"{m}_{k}_mean"] = rep.mean(k)
                    srow[f"{m}_{k}_sd"] = rep.sd(k)
            if args.table == "t5":
                srow.update({f"paper_{k}": v for k, v in ref.items()})
            else:
                srow.update(zip(("paper_mme_l2", "paper_mme_linf", "paper_mle_l2", "paper_mle_linf"), ref))
            summary.append(srow)
        return rows, summary
    if args.table == "fig2":
        ps = (override,) if override else bench.FIG2_P
        rows = bench.fig2_rows(reps, seed=seed, ps=ps)
        return rows, bench.summarise(rows, ("method", "norm"), ("mean",))
    if args.table == "ks":
        rows = bench.ks_rows(reps, seed=seed, p=override or 100)
        return rows, bench.summarise(rows, (), ("ks_twhm", "ks_static", "reject_twhm", "reject_static", "self_reject"))
    rows = []
    for name, levels, cells in bench.CLUSTER_GRID:
        for n, p, paper in cells:
            p = override or p
            for r in bench.cluster_rows(levels, n, p, reps, seed=seed):
                rows.append(dict(setting=name, n=n, p=p, paper_accuracy=paper, **r))
    return rows, bench.summarise(rows, ("setting", "n", "p", "paper_accuracy"), ("accuracy",))


def cmd_bench(args) -> int:
    outdir = Path(args.outdir)
    try:
        outdir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise CliError(EXIT_IO, f"cannot create {outdir}: {exc}") from None
    try:
        rows, summary = _bench_rows(args)
    except bench.BenchmarkError as exc:
        raise CliError(EXIT_DEGENERATE, str(exc)) from None
    try:
        write_csv(outdir / f"{args.table}.csv", rows)
        write_csv(outdir / f"{args.table}_summary.csv", summary)
    except OSError as exc:
        raise CliError(EXIT_IO, f"cannot write CSV: {exc}") from None
    _emit(table=args.table, rows=len(rows), summary_rows=len(summary), outdir=str(outdir))
    return 0


def cmd_diagnose(args) -> int:
    theta = _load_model(args.model).theta
    series = _load_series(args.data)
    if series.p != theta.p:
        raise CliError(EXIT_USAGE, f"model has p = {theta.p} but data has p = {series.p}")
    stats = sufficient_stats(series)
    blocks = hessian(theta, stats)
    _emit(
        lambda_min=smallest_eigenvalue(blocks),
        pd_certificate=block_pd_sufficient(blocks),
        grad_norm=float(np.max(np.abs(gradient(theta, stats)))),
        diag_balance_resid=blocks.balance_residual(),
    )
    return 0


# -------------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="twhm", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("simulate", help="draw a snapshot series")
    src = sp.add_mutually_exclusive_group(required=True)
    src.add_argument("--model", help="model file with the parameters")
    src.add_argument("--setting", type=_setting, help="BETA0[/BETA1], e.g. twoblock:1,-1/const:0")
    sp.add_argument("--nodes", type=int)
    sp.add_argument("--steps", type=int, required=True, help="number of transitions n")
    sp.add_argument("--seed", type=_seed, default=0)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_simulate)

    fp = sub.add_parser("fit", help="estimate parameters from a snapshot file")
    fp.add_argument("--data", required=True)
    fp.add_argument("--method", choices=("mme", "mle"), default="mle")
    fp.add_argument("--lambda", dest="lambda_", type=float, default=None, help="ridge weight (default sqrt(log(np)/(np)))")
    fp.add_argument("--tol", type=float, default=1e-8)
    fp.add_argument("--max-iters", type=int, default=5000)
    fp.add_argument("--seed", type=_seed, default=None, help="recorded in the model metadata")
    fp.add_argument("--strict", action="store_true", help="fail on boundary degrees and non-convergence")
    fp.add_argument("--out", required=True)
    fp.set_defaults(func=cmd_fit)

    pp = sub.add_parser("predict", help="predict the next frame")
    pp.add_argument("--model", required=True)
    pp.add_argument("--data", required=True)
    pp.add_argument("--rule", choices=("fixed", "adaptive", "auto"), default="fixed")
    pp.add_argument("--omega", type=_unit, default=1.0)
    pp.add_argument("--cutoff", type=_unit, default=0.5)
    pp.add_argument("--from", dest="from_", type=int, default=None, help="frame to predict from (default: last)")
    pp.add_argument("--out", required=True)
    pp.set_defaults(func=cmd_predict)

    bp = sub.add_parser("bench", help="run a simulation table")
    bp.add_argument("--table", choices=TABLES, required=True)
    bp.add_argument("--reps", type=int, default=None)
    bp.add_argument("--seed", type=_seed, default=0)
    bp.add_argument("--outdir", default="bench_out")
    bp.add_argument("--nodes", type=int, default=None, help="override p in every cell (smoke runs)")
    bp.set_defaults(func=cmd_bench)

    dp = sub.add_parser("diagnose", help="curvature diagnostics of a model on data")
    dp.add_argument("--model", required=True)
    dp.add_argument("--data", required=True)
    dp.set_defaults(func=cmd_diagnose)
    return ap


def _validate(ap, args) -> None:
    if getattr(args, "steps", 1) is not None and getattr(args, "steps", 1) < 1:
        ap.error("--steps must be at least 1")
    if args.command == "fit":
        if args.tol <= 0 or args.max_iters < 1:
            ap.error("--tol must be positive and --max-iters at least 1")
        if args.lambda_ is not None and args.lambda_ < 0:
            ap.error("--lambda must be non-negative")
    if args.command == "bench":
        if args.reps is None:
            args.reps = 20 if args.table in ("t1", "ks", "cluster") else 50
        if args.reps < 1:
            ap.error("--reps must be at least 1")
        if args.nodes is not None and args.nodes < 3:
            ap.error("--nodes must be at least 3")


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    _validate(ap, args)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"twhm {args.command}: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
