"""Static report figures from cell CSVs.

Boxplots show per-replicate (relative) RMSE distributions grouped by the
settings that vary across the given cells; line plots show selection success
rates against the single numeric setting that varies.  Output is SVG with a
fixed hash salt and no date metadata, so identical inputs give identical
files.
"""

import csv
from collections import OrderedDict
from pathlib import Path

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt

from ..errors import InvalidInputError, ReportSchemaError
from .runner import ROW_COLUMNS

__all__ = ["plot_report", "load_cell_csv", "boxplot_groups"]

PLOT_KINDS = ("box", "line")

# meta keys that may distinguish cells within one figure, in label order
_GROUP_KEYS = ("method", "n_slices", "weight", "threshold", "strategy", "length", "recipe")
_KEY_LABELS = {
    "n_slices": "H",
    "weight": "a",
    "threshold": "P",
    "length": "T",
}


def load_cell_csv(path):
    """Read one cell CSV; returns ``(meta, rows)``.

    Raises
    ------
    ReportSchemaError
        If the header block or column layout does not match, citing the
        offending line number.
    """
    meta = {}
    rows = []
    with open(path, newline="") as fh:
        lines = fh.read().splitlines()
    i = 0
    while i < len(lines) and lines[i].startswith("#"):
        key, eq, value = lines[i][1:].strip().partition("=")
        if not eq:
            raise ReportSchemaError(f"{path}:{i + 1}: malformed metadata line {lines[i]!r}")
        meta[key.strip()] = value
        i += 1
    if i >= len(lines):
        raise ReportSchemaError(f"{path}:{i + 1}: missing column header")
    header = lines[i].split(",")
    if header != list(ROW_COLUMNS):
        raise ReportSchemaError(
            f"{path}:{i + 1}: expected columns {','.join(ROW_COLUMNS)}, got {lines[i]!r}"
        )
    for j, line in enumerate(lines[i + 1:], start=i + 2):
        if not line:
            continue
        fields = line.split(",")
        if len(fields) != len(ROW_COLUMNS):
            raise ReportSchemaError(
                f"{path}:{j}: expected {len(ROW_COLUMNS)} fields, got {len(fields)}"
            )
        try:
            rows.append({
                col: (None if val == "" else float(val))
                for col, val in zip(ROW_COLUMNS, fields)
            })
        except ValueError as exc:
            raise ReportSchemaError(f"{path}:{j}: {exc}") from exc
    return meta, rows


def _cell_label(meta, varying):
    parts = []
    for key in varying:
        label = _KEY_LABELS.get(key, key)
        parts.append(f"{label}={meta.get(key, '')}" if key not in ("method", "strategy")
                     else str(meta.get(key, "")))
    return " ".join(parts) if parts else meta.get("cell", "cell")


def _varying_keys(metas):
    varying = []
    for key in _GROUP_KEYS:
        values = {meta.get(key, "") for meta in metas}
        if len(values) > 1:
            varying.append(key)
    return varying or ["method"]


def boxplot_groups(cells, value_column=None):
    """Grouped values for a boxplot: ``(labels, value lists, column name)``.

    ``cells`` is a list of ``(meta, rows)`` pairs.  The relative RMSE column
    is preferred when every cell carries it; otherwise the absolute RMSE is
    used.  Cells contribute boxes in input order.
    """
    if value_column is None:
        has_rel = all(
            rows and all(row["relative_rmse"] is not None for row in rows)
            for _, rows in cells
        )
        value_column = "relative_rmse" if has_rel else "rmse"
    varying = _varying_keys([meta for meta, _ in cells])
    labels, values = [], []
    for meta, rows in cells:
        data = [row[value_column] for row in rows if row[value_column] is not None]
        labels.append(_cell_label(meta, varying))
        values.append(data)
    return labels, values, value_column


def _group_by_model(cells):
    grouped = OrderedDict()
    for meta, rows in cells:
        grouped.setdefault(meta.get("model", ""), []).append((meta, rows))
    return grouped


def plot_report(csv_paths, kind, out_dir):
    """Render figure analogues from cell CSVs.

    Parameters
    ----------
    csv_paths : sequence of path-like
        Cell CSVs (as written by the study runner).
    kind : {"box", "line"}
        ``box``: per-replicate (relative) RMSE boxplots, one figure per
        model, one box per cell.  ``line``: selection success rate against
        the numeric setting that varies (e.g. the hybrid weight), one figure
        per model.
    out_dir : path-like

    Returns
    -------
    list of Path
        One SVG per model present in the input.
    """
    if kind not in PLOT_KINDS:
        raise InvalidInputError(f"unknown plot kind {kind!r}; choices: {PLOT_KINDS}")
    cells = [load_cell_csv(p) for p in csv_paths]
    if not cells or all(not rows for _, rows in cells):
        raise InvalidInputError("no replicate rows to plot")

    matplotlib.rcParams["svg.hashsalt"] = "tssdr"
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for model, group in _group_by_model(cells).items():
        study = group[0][0].get("study", "study")
        fig, ax = plt.subplots(figsize=(max(6.0, 1.2 * len(group)), 4.0))
        if kind == "box":
            labels, values, column = boxplot_groups(group)
            ax.boxplot(values, tick_labels=labels)
            ax.set_ylabel(column.replace("_", " "))
            if column == "relative_rmse":
                ax.axhline(1.0, color="gray", linewidth=0.8, linestyle="--")
        else:
            varying = _varying_keys([meta for meta, _ in group])
            axis_key = next(
                (k for k in ("weight", "n_slices", "length", "threshold") if k in varying),
                None,
            )
            if axis_key is None:
                raise InvalidInputError("line plot needs a numeric setting that varies")
            points = []
            for meta, rows in group:
                successes = [row["success"] for row in rows if row["success"] is not None]
                if not successes:
                    raise InvalidInputError(
                        f"cell {meta.get('cell')} has no success column for a line plot"
                    )
                points.append((float(meta[axis_key]), sum(successes) / len(successes)))
            points.sort()
            ax.plot([p[0] for p in points], [p[1] for p in points], marker="o")
            ax.set_xlabel(_KEY_LABELS.get(axis_key, axis_key))
            ax.set_ylabel("success rate")
            ax.set_ylim(-0.05, 1.05)
        ax.set_title(f"{study}: model {model}")
        ax.tick_params(axis="x", rotation=30)
        fig.tight_layout()
        path = out / f"{study}_{model}_{kind}.svg"
        fig.savefig(path, format="svg", metadata={"Date": None})
        plt.close(fig)
        paths.append(path)
    return paths
