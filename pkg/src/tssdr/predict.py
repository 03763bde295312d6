"""Rolling-window one-step-ahead prediction and RMSE scoring.

Selected (source, lag) pairs feed a linear or B-spline regression; the
forecast slides a fixed-length training window one step at a time over the
last ``test_size`` observations, refitting the regression coefficients at
every step.  The dimension reduction feeding the regressors is computed once
on the first training window unless ``refit_reduction`` is set.
"""

import logging
from dataclasses import dataclass, replace

import numpy as np

from .errors import EmptyDesignError, InvalidInputError
from .tsgen import RESPONSE_MODELS

__all__ = [
    "PredictorConfig",
    "RMSEReport",
    "bspline_basis",
    "build_design",
    "lagged_values",
    "rolling_forecast",
    "oracle_forecast",
    "BASIS_CHOICES",
]

logger = logging.getLogger(__name__)

BASIS_DEGREES = {
    "linear": 0,
    "quadratic_spline": 2,
    "cubic_spline": 3,
}
BASIS_ALIASES = {"quadratic": "quadratic_spline", "cubic": "cubic_spline"}
BASIS_CHOICES = tuple(BASIS_DEGREES)

RIDGE_PENALTY = 1e-8


@dataclass(frozen=True)
class PredictorConfig:
    """Regression basis and rolling-window settings."""

    basis: str = "quadratic_spline"
    interior_knots: int = 3
    test_size: int = 100
    window: str = "rolling"
    refit_reduction: bool = False

    def __post_init__(self):
        basis = BASIS_ALIASES.get(str(self.basis).lower(), str(self.basis).lower())
        if basis not in BASIS_DEGREES:
            raise InvalidInputError(f"unknown basis {self.basis!r}; choices: {BASIS_CHOICES}")
        object.__setattr__(self, "basis", basis)
        if self.interior_knots < 0:
            raise InvalidInputError("interior_knots must be nonnegative")
        if self.test_size < 1:
            raise InvalidInputError("test_size must be positive")
        if str(self.window).lower() != "rolling":
            raise InvalidInputError("only the rolling window scheme is supported")

    @property
    def degree(self):
        return BASIS_DEGREES[self.basis]


@dataclass(frozen=True)
class RMSEReport:
    """One-step-ahead RMSE over the test window."""

    label: str
    rmse: float
    n_test: int
    relative_to: str = None
    relative_rmse: float = None

    def relative(self, reference):
        """Copy of this report with the RMSE expressed relative to a reference."""
        return replace(
            self,
            relative_to=reference.label,
            relative_rmse=self.rmse / reference.rmse if reference.rmse > 0 else np.inf,
        )


def bspline_basis(xs, degree, knots):
    """B-spline basis matrix by the Cox-de Boor recursion.

    Parameters
    ----------
    xs : array_like
        Evaluation points, clamped to the knot range.
    degree : {2, 3}
    knots : array_like
        Strictly increasing knot sequence including the two boundary knots;
        boundary knots are repeated ``degree + 1`` times internally.

    Returns
    -------
    ndarray, shape (len(xs), len(knots) - 2 + degree + 1)
        Rows sum to 1 (partition of unity).
    """
    if degree not in (2, 3):
        raise InvalidInputError(f"degree must be 2 or 3, got {degree}")
    knots = np.asarray(knots, dtype=np.float64)
    if knots.ndim != 1 or knots.size < 2:
        raise InvalidInputError("need at least the two boundary knots")
    if np.any(np.diff(knots) <= 0):
        raise InvalidInputError("knots must be strictly increasing")
    t = np.concatenate([np.full(degree, knots[0]), knots, np.full(degree, knots[-1])])
    x = np.clip(np.asarray(xs, dtype=np.float64).ravel(), knots[0], knots[-1])

    m = t.size
    b = np.zeros((x.size, m - 1))
    for i in range(m - 1):
        if t[i] < t[i + 1]:
            b[:, i] = (t[i] <= x) & (x < t[i + 1])
    # close the right boundary: x equal to the last knot belongs to the last span
    at_end = x == t[-1]
    if np.any(at_end):
        last = np.nonzero(np.diff(t) > 0)[0][-1]
        b[at_end] = 0.0
        b[at_end, last] = 1.0
    for k in range(1, degree + 1):
        nb = np.zeros((x.size, m - 1 - k))
        for i in range(m - 1 - k):
            if t[i + k] > t[i]:
                nb[:, i] += (x - t[i]) / (t[i + k] - t[i]) * b[:, i]
            if t[i + k + 1] > t[i + 1]:
                nb[:, i] += (t[i + k + 1] - x) / (t[i + k + 1] - t[i + 1]) * b[:, i + 1]
        b = nb
    return b


def _lag_column(values, col, lag):
    out = np.full(values.shape[0], np.nan)
    if lag == 0:
        out[:] = values[:, col]
    else:
        out[lag:] = values[:-lag, col]
    return out


def lagged_values(sources, chosen):
    """Matrix of ``sources[t - lag, source - 1]`` columns, one per chosen pair."""
    src = np.asarray(sources, dtype=np.float64)
    if src.ndim != 2:
        raise InvalidInputError(f"sources must be a T x p matrix, got shape {src.shape}")
    cols = []
    for source, lag in chosen:
        if not 1 <= source <= src.shape[1]:
            raise InvalidInputError(f"source index {source} outside 1..{src.shape[1]}")
        if lag < 0:
            raise InvalidInputError(f"lag must be nonnegative, got {lag}")
        cols.append(_lag_column(src, source - 1, lag))
    return np.column_stack(cols)


def _knot_vector(train_values, interior):
    lo, hi = float(np.min(train_values)), float(np.max(train_values))
    if interior > 0:
        qs = np.quantile(train_values, np.arange(1, interior + 1) / (interior + 1))
        knots = np.unique(np.concatenate([[lo], qs, [hi]]))
    else:
        knots = np.unique([lo, hi])
    if knots.size < 2:
        raise InvalidInputError("regressor is constant on the training window")
    return knots


def build_design(sources, chosen, config, rows=None, knots=None):
    """Regression design for chosen (source, lag) pairs.

    One block of basis columns per pair, evaluated at the lagged source
    value, preceded by an intercept column; the linear basis uses the raw
    value.  Rows whose lags reach before the sample start are dropped.

    Parameters
    ----------
    sources : ndarray, shape (T, p)
    chosen : sequence of (source, lag)
        1-based source indices, nonnegative lags.
    config : PredictorConfig
    rows : array_like of int, optional
        Candidate target times (default: all).
    knots : list of ndarray, optional
        Per-pair knot vectors; computed from the given rows when omitted.

    Returns
    -------
    design : ndarray, shape (n_usable, width)
    rows_used : ndarray
        Target times corresponding to the design rows.
    knots : list of ndarray or None
        The knot vectors actually used (None for the linear basis).
    """
    chosen = tuple(chosen)
    if not chosen:
        raise EmptyDesignError(
            "no (source, lag) pairs selected; fall back to the unconditional-mean predictor"
        )
    values = lagged_values(sources, chosen)
    rows = np.arange(values.shape[0]) if rows is None else np.asarray(rows, dtype=np.int64)
    vals = values[rows]
    ok = np.all(np.isfinite(vals), axis=1)
    rows_used = rows[ok]
    vals = vals[ok]
    if vals.shape[0] == 0:
        raise InvalidInputError("no usable rows: every candidate row misses a lagged value")

    if config.degree == 0:
        design = np.column_stack([np.ones(vals.shape[0]), vals])
        return design, rows_used, None

    if knots is None:
        knots = [_knot_vector(vals[:, c], config.interior_knots) for c in range(vals.shape[1])]
    blocks = [np.ones((vals.shape[0], 1))]
    for c in range(vals.shape[1]):
        blocks.append(bspline_basis(vals[:, c], config.degree, knots[c]))
    return np.concatenate(blocks, axis=1), rows_used, knots


def _fit_coefficients(design, target, force_ridge=False):
    """Least squares with a ridge fallback for rank-deficient designs."""
    if not force_ridge:
        coef, _, rank, _ = np.linalg.lstsq(design, target, rcond=None)
        if rank == design.shape[1]:
            return coef, False
    gram = design.T @ design + RIDGE_PENALTY * np.eye(design.shape[1])
    return np.linalg.solve(gram, design.T @ target), True


def rolling_forecast(x, y, pipeline, config, label="model"):
    """One-step-ahead RMSE under the rolling-window protocol.

    For step ``i`` (0-based) the regression trains on observations
    ``i .. T - test_size + i - 1`` and predicts the response at
    ``T - test_size + i``.  ``pipeline(x, y, train_rows)`` must return the
    full-length regressor matrix (one column per selected pair, NaN where a
    lag is unavailable); it is invoked once on the first training window, or
    at every step when ``config.refit_reduction`` is set.

    Rank-deficient designs fall back to a ridge solve (penalty 1e-8) with a
    single logged warning per call.
    """
    y = np.asarray(y, dtype=np.float64)
    n = y.shape[0]
    n_test = config.test_size
    if n_test >= n:
        raise InvalidInputError(f"test_size {n_test} too large for series length {n}")
    n_train = n - n_test
    if np.any(~np.isfinite(y[n_train:])):
        raise InvalidInputError("test window contains unavailable response values")

    design_full = None
    ridge_mode = False
    warned = False
    errors = np.empty(n_test)
    for i in range(n_test):
        lo, hi = i, n_train + i
        if design_full is None or config.refit_reduction:
            regs = np.asarray(pipeline(x, y, np.arange(lo, hi)), dtype=np.float64)
            if regs.ndim != 2 or regs.shape[0] != n:
                raise InvalidInputError(
                    f"pipeline must return a full-length regressor matrix, got shape {regs.shape}"
                )
            pairs = tuple((c + 1, 0) for c in range(regs.shape[1]))
            train_ok = np.arange(lo, hi)[np.isfinite(y[lo:hi])]
            _, _, knots = build_design(regs, pairs, config, rows=train_ok)
            design, rows_used, _ = build_design(regs, pairs, config, knots=knots)
            design_full = np.full((n, design.shape[1]), np.nan)
            design_full[rows_used] = design
            ridge_mode = False

        usable = np.isfinite(y[lo:hi]) & np.all(np.isfinite(design_full[lo:hi]), axis=1)
        rows = np.arange(lo, hi)[usable]
        if rows.size <= design_full.shape[1]:
            raise InvalidInputError(
                f"training window {lo}..{hi} has only {rows.size} usable rows"
            )
        coef, used_ridge = _fit_coefficients(design_full[rows], y[rows], force_ridge=ridge_mode)
        if used_ridge:
            ridge_mode = True
            if not warned:
                logger.warning(
                    "rank-deficient design (width %d); using ridge fallback with penalty %g",
                    design_full.shape[1], RIDGE_PENALTY,
                )
                warned = True
        t_pred = n_train + i
        row = design_full[t_pred]
        if not np.all(np.isfinite(row)):
            raise InvalidInputError(f"prediction row {t_pred} has unavailable regressors")
        errors[i] = y[t_pred] - row @ coef

    return RMSEReport(label=label, rmse=float(np.sqrt(np.mean(errors ** 2))), n_test=n_test)


def oracle_forecast(z, y, model, config, label="oracle"):
    """Rolling forecast that regresses on the true transformed regressors.

    The functional form of the response model is taken as known; only the
    regression coefficients are estimated (by OLS, linear basis) under the
    same rolling protocol.
    """
    key = str(model).upper()
    if key not in RESPONSE_MODELS:
        raise InvalidInputError(f"unknown response model {key!r}")
    terms = RESPONSE_MODELS[key].oracle_terms(np.asarray(z, dtype=np.float64))
    linear = replace(config, basis="linear", refit_reduction=False)
    return rolling_forecast(z, y, lambda *_: terms, linear, label=label)
