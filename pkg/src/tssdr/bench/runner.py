"""Study execution: replicate loops, cell CSVs, summaries, resumability.

All numbers are written with 17 significant digits and rows are ordered by
replicate, so a rerun with the same configuration produces byte-identical
CSV output.  A cell whose CSV already exists is skipped after validating its
metadata header; failed cells (fewer than 90% of replicates succeeded) are
not written and re-run on resume.
"""

import csv
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..errors import InvalidInputError, TssdrError
from ..estimators import tsdr_fit, vectorized_fit
from ..predict import PredictorConfig, lagged_values, oracle_forecast, rolling_forecast
from ..selection import expected_structure_check, select
from ..tsgen import RESPONSE_MODELS, make_simulation, simulate
from .config import Cell

__all__ = ["CellResult", "StudyReport", "run_study", "run_table1", "run_replicate"]

logger = logging.getLogger(__name__)

ROW_COLUMNS = (
    "replicate", "seed", "rmse", "oracle_rmse", "relative_rmse",
    "k_hat", "s_hat", "n_chosen", "success",
)
ERROR_COLUMNS = ("cell", "replicate", "seed", "error", "message")
SUMMARY_COLUMNS = (
    "cell", "model", "recipe", "length", "method", "n_slices", "weight",
    "threshold", "strategy", "basis", "status", "n_ok", "n_failed",
    "rmse_mean", "rmse_median", "rmse_q1", "rmse_q3",
    "rel_median", "rel_q1", "rel_q3", "success_rate",
)

TABLE1_SEED = 20260801
MIN_OK_SHARE = 0.9


def _fmt(value):
    if value is None:
        return ""
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return f"{float(value):.17g}"


def run_replicate(cell, replicate):
    """Simulate, fit, select, and forecast one replicate of a cell."""
    seed = cell.base_seed + replicate
    spec = make_simulation(cell.model, cell.recipe)
    x, y, z = simulate(spec, cell.length, seed)
    config = PredictorConfig(basis=cell.basis, test_size=cell.test_size)
    row = {key: None for key in ROW_COLUMNS}
    row["replicate"] = replicate
    row["seed"] = seed

    if cell.method == "oracle":
        report = oracle_forecast(z, y, cell.model, config)
        row["rmse"] = report.rmse
        return row

    n_train = cell.length - cell.test_size
    if cell.method in ("vsir", "vsave"):
        fit = vectorized_fit(
            x[:n_train], y[:n_train], cell.method[1:],
            cell.lags, cell.n_slices, cell.threshold,
        )
        regressors = fit.reduced(x)
        row["k_hat"] = fit.k_hat
        row["s_hat"] = cell.lags
        row["n_chosen"] = fit.k_hat
    else:
        fit = tsdr_fit(
            x[:n_train], y[:n_train], cell.method, range(1, cell.lags + 1),
            n_slices=cell.n_slices,
            weight=cell.weight if cell.weight is not None else 0.5,
        )
        sel = select(fit.l_matrix, cell.strategy, cell.threshold, lags=fit.lags)
        regressors = lagged_values(fit.components(x), sel.chosen)
        row["k_hat"] = sel.k_hat
        row["s_hat"] = sel.s_hat
        row["n_chosen"] = len(sel.chosen)
        row["success"] = int(expected_structure_check(sel, RESPONSE_MODELS[cell.model].truth))

    report = rolling_forecast(x, y, lambda *_: regressors, config, label=cell.method)
    row["rmse"] = report.rmse
    return row


def _replicate_task(args):
    cell, replicate = args
    try:
        return run_replicate(cell, replicate), None
    except (TssdrError, np.linalg.LinAlgError) as exc:
        return None, {
            "cell": cell.cell_id,
            "replicate": replicate,
            "seed": cell.base_seed + replicate,
            "error": type(exc).__name__,
            "message": str(exc),
        }


class _OnceFilter(logging.Filter):
    """Pass each distinct warning template once; keeps per-replicate warnings readable."""

    def __init__(self):
        super().__init__()
        self._seen = set()

    def filter(self, record):
        key = (record.name, record.levelno, record.msg)
        if key in self._seen:
            return False
        self._seen.add(key)
        return True


def _init_worker():
    logging.getLogger("tssdr.predict").addFilter(_OnceFilter())


def _run_cell(cell, pool):
    tasks = [(cell, r) for r in range(cell.replicates)]
    outcomes = pool.map(_replicate_task, tasks) if pool else map(_replicate_task, tasks)
    rows, errors = [], []
    for row, error in outcomes:
        if row is not None:
            rows.append(row)
        else:
            errors.append(error)
    return rows, errors


@dataclass
class CellResult:
    """Rows and aggregates for one executed (or resumed) cell."""

    cell: Cell
    path: Path
    rows: list
    errors: list
    status: str
    resumed: bool
    runtime_seconds: float

    def column(self, name, drop_none=True):
        values = [row[name] for row in self.rows]
        if drop_none:
            values = [v for v in values if v is not None]
        return values


@dataclass
class StudyReport:
    """All cell results of one study plus the paths of the emitted CSVs."""

    study: str
    out_dir: Path
    cells: list
    summary_path: Path
    errors_path: Path = None

    def find(self, **match):
        """Cell results whose cell attributes equal all given values."""
        out = []
        for result in self.cells:
            if all(getattr(result.cell, key) == value for key, value in match.items()):
                out.append(result)
        return out

    def one(self, **match):
        results = self.find(**match)
        if len(results) != 1:
            raise InvalidInputError(
                f"expected exactly one cell for {match}, found {len(results)}"
            )
        return results[0]


def _write_cell_csv(path, cell, rows):
    with open(path, "w", newline="") as fh:
        for key, value in cell.meta().items():
            fh.write(f"# {key}={value}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(ROW_COLUMNS)
        for row in sorted(rows, key=lambda r: r["replicate"]):
            writer.writerow([_fmt(row[col]) for col in ROW_COLUMNS])


def _read_cell_csv(path, cell):
    meta = {}
    rows = []
    with open(path, newline="") as fh:
        lines = fh.read().splitlines()
    body_start = 0
    for i, line in enumerate(lines):
        if line.startswith("#"):
            key, _, value = line[1:].strip().partition("=")
            meta[key.strip()] = value
            body_start = i + 1
        else:
            break
    expected = cell.meta()
    if meta != expected:
        diff = {k for k in set(meta) | set(expected) if meta.get(k) != expected.get(k)}
        raise InvalidInputError(
            f"{path}: existing cell metadata does not match the configuration "
            f"(differing keys: {sorted(diff)}); use a fresh output directory"
        )
    body = lines[body_start:]
    if not body or body[0] != ",".join(ROW_COLUMNS):
        raise InvalidInputError(f"{path}: unexpected cell CSV header")
    for line in body[1:]:
        if not line:
            continue
        fields = line.split(",")
        row = {}
        for col, field in zip(ROW_COLUMNS, fields):
            if field == "":
                row[col] = None
            elif col in ("replicate", "seed", "k_hat", "s_hat", "n_chosen", "success"):
                row[col] = int(field)
            else:
                row[col] = float(field)
        rows.append(row)
    return rows


def _quartiles(values):
    if not values:
        return None, None, None
    arr = np.asarray(values, dtype=np.float64)
    return (
        float(np.percentile(arr, 25)),
        float(np.median(arr)),
        float(np.percentile(arr, 75)),
    )


def _summary_row(result):
    cell = result.cell
    rmse = result.column("rmse")
    rel = result.column("relative_rmse")
    success = result.column("success")
    q1, med, q3 = _quartiles(rmse)
    rq1, rmed, rq3 = _quartiles(rel)
    meta = cell.meta()
    return {
        "cell": cell.cell_id,
        "model": cell.model,
        "recipe": cell.recipe,
        "length": cell.length,
        "method": cell.method,
        "n_slices": meta["n_slices"],
        "weight": meta["weight"],
        "threshold": meta["threshold"],
        "strategy": meta["strategy"],
        "basis": meta["basis"],
        "status": result.status,
        "n_ok": len(result.rows),
        "n_failed": len(result.errors),
        "rmse_mean": float(np.mean(rmse)) if rmse else None,
        "rmse_median": med,
        "rmse_q1": q1,
        "rmse_q3": q3,
        "rel_median": rmed,
        "rel_q1": rq1,
        "rel_q3": rq3,
        "success_rate": float(np.mean(success)) if success else None,
    }


def run_study(config, out_dir, workers=1):
    """Execute every cell of a study configuration.

    Parameters
    ----------
    config : ExperimentConfig
    out_dir : path-like
        Per-cell CSVs land in ``out_dir/<study>/<cell>.csv`` together with
        ``summary.csv`` and, when replicates fail, ``errors.csv``.
    workers : int
        Replicate-level process parallelism (1 = in-process).

    Returns
    -------
    StudyReport
    """
    out = Path(out_dir) / config.study
    out.mkdir(parents=True, exist_ok=True)
    once = _OnceFilter()
    logging.getLogger("tssdr.predict").addFilter(once)
    pool = None
    results = []
    all_errors = []
    oracle_maps = {}
    try:
        if workers > 1:
            pool = ProcessPoolExecutor(max_workers=workers, initializer=_init_worker)
        for cell in config.cells():
            path = out / f"{cell.cell_id}.csv"
            started = time.perf_counter()
            if path.exists():
                rows = _read_cell_csv(path, cell)
                errors = []
                resumed = True
            else:
                rows, errors = _run_cell(cell, pool)
                resumed = False
                if cell.method != "oracle":
                    omap = oracle_maps.get(cell.data_key, {})
                    for row in rows:
                        reference = omap.get(row["seed"])
                        row["oracle_rmse"] = reference
                        row["relative_rmse"] = (
                            row["rmse"] / reference if reference else None
                        )
            status = "ok" if len(rows) >= MIN_OK_SHARE * cell.replicates else "failed"
            if not resumed and status == "ok":
                _write_cell_csv(path, cell, rows)
            if cell.method == "oracle":
                oracle_maps[cell.data_key] = {row["seed"]: row["rmse"] for row in rows}
            all_errors.extend(errors)
            elapsed = time.perf_counter() - started
            results.append(CellResult(cell, path, rows, errors, status, resumed, elapsed))
            logger.info(
                "cell %s: %s (%d ok, %d failed, %.1fs%s)",
                cell.cell_id, status, len(rows), len(errors), elapsed,
                ", resumed" if resumed else "",
            )
    finally:
        if pool is not None:
            pool.shutdown()
        logging.getLogger("tssdr.predict").removeFilter(once)

    summary_path = out / "summary.csv"
    with open(summary_path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(SUMMARY_COLUMNS)
        for result in results:
            row = _summary_row(result)
            writer.writerow([
                row[col] if isinstance(row[col], str) else _fmt(row[col])
                for col in SUMMARY_COLUMNS
            ])

    errors_path = None
    if all_errors:
        errors_path = out / "errors.csv"
        with open(errors_path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(ERROR_COLUMNS)
            for err in all_errors:
                writer.writerow([str(err[c]) for c in ERROR_COLUMNS])

    return StudyReport(config.study, out, results, summary_path, errors_path)


def paired_ratio(numerator, denominator):
    """Per-seed RMSE ratios between two cell results (paired replicates)."""
    base = {row["seed"]: row["rmse"] for row in denominator.rows}
    ratios = [
        row["rmse"] / base[row["seed"]]
        for row in numerator.rows
        if row["seed"] in base and base[row["seed"]] > 0
    ]
    return np.asarray(ratios)


def _table1_task(args):
    replicate, base_seed, length, lags, n_slices = args
    spec = make_simulation("B", "table1")
    x, y, _ = simulate(spec, length, base_seed + replicate)
    lag_list = range(1, lags + 1)
    fit_save = tsdr_fit(x, y, "tsave", lag_list, n_slices=n_slices)
    fit_sir = tsdr_fit(x, y, "tsir", lag_list, n_slices=n_slices)
    return fit_save.l_matrix, fit_sir.l_matrix


def _write_l_csv(path, l_matrix, lags):
    p, s = l_matrix.shape
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["lag"] + [f"source{i + 1}" for i in range(p)] + ["row_sum"])
        for j in range(s):
            writer.writerow(
                [str(lags[j])]
                + [_fmt(l_matrix[i, j]) for i in range(p)]
                + [_fmt(l_matrix[:, j].sum())]
            )
        writer.writerow(
            ["sum"] + [_fmt(l_matrix[i].sum()) for i in range(p)] + [_fmt(l_matrix.sum())]
        )


def run_table1(out_dir, replicates=100, workers=1, base_seed=TABLE1_SEED,
               length=10000, lags=12, n_slices=5):
    """Averaged L matrices for the fixed long-sample protocol.

    Simulates the 4-component setup with the response
    ``y_t = z1_{t-1}^2 + 3 z2_{t-5} + eps`` at the given length, fits both
    the first-moment and second-moment estimators with lags ``1..lags``, and
    averages the L matrices over replicates.

    Returns
    -------
    (l_tsave, l_tsir, paths)
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    tasks = [(r, base_seed, length, lags, n_slices) for r in range(replicates)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers, initializer=_init_worker) as pool:
            outcomes = list(pool.map(_table1_task, tasks))
    else:
        outcomes = [_table1_task(t) for t in tasks]
    l_save = np.mean([o[0] for o in outcomes], axis=0)
    l_sir = np.mean([o[1] for o in outcomes], axis=0)
    lag_list = tuple(range(1, lags + 1))
    paths = (out / "table1_tsave.csv", out / "table1_tsir.csv")
    _write_l_csv(paths[0], l_save, lag_list)
    _write_l_csv(paths[1], l_sir, lag_list)
    return l_save, l_sir, paths
