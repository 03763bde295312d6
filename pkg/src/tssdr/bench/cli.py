"""Command-line interface: simulate, fit, select, forecast, study, table1, plot."""

import argparse
import csv
import dataclasses
import logging
import sys

import numpy as np

from ..errors import TssdrError
from ..estimators import (
    METHODS, read_fit_csv, tsdr_fit, vectorized_fit, write_fit_csv,
)
from ..predict import BASIS_CHOICES, PredictorConfig, lagged_values, rolling_forecast
from ..selection import STRATEGIES, format_chosen, select
from ..tsgen import RECIPES, RESPONSE_MODELS, make_simulation, read_panel_csv, simulate, write_panel_csv
from .config import parse_slices, read_config
from .plots import PLOT_KINDS, plot_report
from .runner import TABLE1_SEED, run_study, run_table1

FORECAST_COLUMNS = (
    "model", "method", "length", "n_slices", "weight", "threshold",
    "strategy", "basis", "replicate", "rmse", "relative_rmse",
)


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="tssdr",
        description="Supervised dimension reduction for multivariate time series.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="generate a dataset CSV (header t,x1..xp,y)")
    sim.add_argument("--model", required=True, choices=sorted(RESPONSE_MODELS))
    sim.add_argument("--recipe", default="base", choices=sorted(RECIPES))
    sim.add_argument("--length", type=int, required=True, help="series length T")
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--noise-sd", type=float, default=1.0)
    sim.add_argument("--out", required=True, help="output CSV path")

    fit = sub.add_parser("fit", help="fit an estimator on a dataset CSV")
    fit.add_argument("--data", required=True, help="dataset CSV from `simulate`")
    fit.add_argument("--method", required=True, choices=METHODS)
    fit.add_argument("--lags", type=int, default=12, help="use lags 1..LAGS")
    fit.add_argument("--slices", default=None,
                     help="slice count (pair like 10-2 for tssh); method default otherwise")
    fit.add_argument("--weight", type=float, default=0.5, help="hybrid weight (tssh)")
    fit.add_argument("--seed", type=int, default=None, help="recorded in the metadata only")
    fit.add_argument("--out", required=True, help="fit CSV path")

    sel = sub.add_parser("select", help="select sources and lags from a fit CSV")
    sel.add_argument("--fit", required=True, help="fit CSV from `fit`")
    sel.add_argument("--strategy", default="biggest_values", choices=STRATEGIES)
    sel.add_argument("--threshold", type=float, default=0.8)
    sel.add_argument("--out", default=None, help="selection CSV path (default: stdout)")

    fc = sub.add_parser("forecast", help="rolling one-step-ahead RMSE on a dataset CSV")
    fc.add_argument("--data", required=True)
    fc.add_argument("--method", required=True, choices=METHODS + ("vsir", "vsave"))
    fc.add_argument("--lags", type=int, default=12)
    fc.add_argument("--slices", default=None)
    fc.add_argument("--weight", type=float, default=0.5)
    fc.add_argument("--strategy", default="biggest_values", choices=STRATEGIES)
    fc.add_argument("--threshold", type=float, default=0.8)
    fc.add_argument("--basis", default="quadratic_spline")
    fc.add_argument("--test-size", type=int, default=100)
    fc.add_argument("--out", default=None, help="report CSV path (default: stdout)")

    study = sub.add_parser("study", help="run a configured study")
    study.add_argument("--config", required=True, help="study configuration file")
    study.add_argument("--out", required=True, help="output directory")
    study.add_argument("--workers", type=int, default=1)
    study.add_argument("--replicates", type=int, default=None, help="override the config")
    study.add_argument("--seed", type=int, default=None, help="override the base seed")

    t1 = sub.add_parser("table1", help="averaged L matrices for the long-sample protocol")
    t1.add_argument("--out", required=True, help="output directory")
    t1.add_argument("--replicates", type=int, default=100)
    t1.add_argument("--workers", type=int, default=1)
    t1.add_argument("--seed", type=int, default=TABLE1_SEED)

    pl = sub.add_parser("plot", help="render report figures from cell CSVs")
    pl.add_argument("--csv", nargs="+", required=True, help="cell CSV paths")
    pl.add_argument("--kind", default="box", choices=PLOT_KINDS)
    pl.add_argument("--out", required=True, help="output directory")
    return parser


def _cmd_simulate(args):
    spec = make_simulation(args.model, args.recipe, noise_sd=args.noise_sd)
    x, y, _ = simulate(spec, args.length, args.seed)
    write_panel_csv(args.out, x, y)
    print(f"wrote {args.out} ({args.length} x {x.shape[1]})")


def _cmd_fit(args):
    x, y = read_panel_csv(args.data)
    slices = parse_slices(args.slices) if args.slices else None
    fit = tsdr_fit(x, y, args.method, range(1, args.lags + 1), slices, args.weight)
    extra = {"length": x.shape[0]}
    if args.seed is not None:
        extra["seed"] = args.seed
    write_fit_csv(fit, args.out, extra_meta=extra)
    print(f"wrote {args.out} (method={args.method}, lags=1..{args.lags})")


def _cmd_select(args):
    l_matrix, _, lags, _ = read_fit_csv(args.fit)
    result = select(l_matrix, args.strategy, args.threshold, lags=lags)
    header = ["strategy", "threshold", "k_hat", "s_hat", "chosen", "covered_mass"]
    row = [result.strategy, f"{result.threshold:g}", str(result.k_hat),
           str(result.s_hat), format_chosen(result.chosen), f"{result.covered_mass:.17g}"]
    out = open(args.out, "w", newline="") if args.out else sys.stdout
    try:
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(header)
        writer.writerow(row)
    finally:
        if args.out:
            out.close()
            print(f"wrote {args.out}")


def _cmd_forecast(args):
    x, y = read_panel_csv(args.data)
    config = PredictorConfig(basis=args.basis, test_size=args.test_size)
    n_train = x.shape[0] - args.test_size
    slices = parse_slices(args.slices) if args.slices else None
    meta = {"n_slices": "", "weight": "", "threshold": f"{args.threshold:g}",
            "strategy": "", "basis": config.basis}
    if args.method in ("vsir", "vsave"):
        vfit = vectorized_fit(x[:n_train], y[:n_train], args.method[1:],
                              args.lags, slices if slices is not None else 10,
                              args.threshold)
        regressors = vfit.reduced(x)
        meta["n_slices"] = str(vfit.n_slices)
    else:
        fit = tsdr_fit(x[:n_train], y[:n_train], args.method,
                       range(1, args.lags + 1), slices, args.weight)
        result = select(fit.l_matrix, args.strategy, args.threshold, lags=fit.lags)
        regressors = lagged_values(fit.components(x), result.chosen)
        meta["strategy"] = args.strategy
        from .config import format_slices
        meta["n_slices"] = format_slices(fit.n_slices)
        if args.method == "tssh":
            meta["weight"] = f"{args.weight:g}"
    report = rolling_forecast(x, y, lambda *_: regressors, config, label=args.method)
    row = {
        "model": "", "method": args.method, "length": str(x.shape[0]),
        "n_slices": meta["n_slices"], "weight": meta["weight"],
        "threshold": meta["threshold"], "strategy": meta["strategy"],
        "basis": meta["basis"], "replicate": "",
        "rmse": f"{report.rmse:.17g}", "relative_rmse": "",
    }
    out = open(args.out, "w", newline="") if args.out else sys.stdout
    try:
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(FORECAST_COLUMNS)
        writer.writerow([row[c] for c in FORECAST_COLUMNS])
    finally:
        if args.out:
            out.close()
            print(f"wrote {args.out} (rmse={report.rmse:.6g})")


def _cmd_study(args):
    config = read_config(args.config)
    overrides = {}
    if args.replicates is not None:
        overrides["replicates"] = args.replicates
    if args.seed is not None:
        overrides["base_seed"] = args.seed
    if overrides:
        config = dataclasses.replace(config, **overrides)
    report = run_study(config, args.out, workers=args.workers)
    n_failed = sum(1 for c in report.cells if c.status == "failed")
    total = sum(c.runtime_seconds for c in report.cells)
    print(f"study {report.study}: {len(report.cells)} cells "
          f"({n_failed} failed), {total:.1f}s; summary at {report.summary_path}")
    for result in report.cells:
        print(f"  {result.cell.cell_id}: {result.status}"
              f" ({len(result.rows)} ok, {len(result.errors)} err,"
              f" {result.runtime_seconds:.1f}s{', resumed' if result.resumed else ''})")


def _cmd_table1(args):
    l_save, l_sir, paths = run_table1(
        args.out, replicates=args.replicates, workers=args.workers, base_seed=args.seed,
    )
    print(f"wrote {paths[0]} and {paths[1]}")
    print(f"second-moment L: (source1, lag5)={l_save[0, 4]:.3f}, "
          f"(source2, lag1)={l_save[1, 0]:.3f}")
    print(f"first-moment L:  (source1, lag5)={l_sir[0, 4]:.3f}, "
          f"source1 total={l_sir[0].sum():.3f}")


def _cmd_plot(args):
    paths = plot_report(args.csv, args.kind, args.out)
    for path in paths:
        print(f"wrote {path}")


_COMMANDS = {
    "simulate": _cmd_simulate,
    "fit": _cmd_fit,
    "select": _cmd_select,
    "forecast": _cmd_forecast,
    "study": _cmd_study,
    "table1": _cmd_table1,
    "plot": _cmd_plot,
}


def main(argv=None):
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    args = _build_parser().parse_args(argv)
    try:
        _COMMANDS[args.command](args)
    except (TssdrError, OSError, np.linalg.LinAlgError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
