"""TSIR / TSAVE / TSSH fit pipeline and vectorized iid baselines.

The time-series fit standardizes the predictors by their inverse covariance
square root, builds the lagged supervised moment stack, and jointly
diagonalizes it; the covariance constraint is handled entirely by the
whitening step.  Pseudo-eigenvalues are computed against the same whitened
stack used in the optimization, so their total equals the diagonalizer's
objective value exactly.
"""

import csv
from dataclasses import dataclass

import numpy as np

from . import supervision
from .errors import DegenerateStackError, InvalidInputError, SingularMatrixError
from .linalg import inv_sqrt, joint_diag, sym_eig

__all__ = [
    "FitResult",
    "VectorizedFitResult",
    "tsdr_fit",
    "check_affine_equivariance",
    "vectorized_fit",
    "write_fit_csv",
    "read_fit_csv",
    "METHODS",
]

METHODS = ("tsir", "tsave", "tssh")
VECTORIZED_METHODS = ("sir", "save")

# number of slices used when the caller does not pick one; the hybrid pair is
# (first-moment part, second-moment part)
DEFAULT_SLICES = {"tsir": 10, "tsave": 2, "tssh": (10, 2)}

_STACK_KIND = {
    "tsir": supervision.TSIR,
    "tsave": supervision.TSAVE,
    "tssh": supervision.HYBRID,
}


def _whiten(x):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2:
        raise InvalidInputError(f"predictors must be a T x p matrix, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise InvalidInputError("predictor panel contains non-finite entries")
    mean = x.mean(axis=0)
    centered = x - mean
    cov = centered.T @ centered / x.shape[0]
    try:
        whitener = inv_sqrt(cov)
    except SingularMatrixError as exc:
        raise SingularMatrixError(f"singular predictor covariance: {exc}") from exc
    return centered @ whitener, mean, whitener


@dataclass(frozen=True, eq=False)
class FitResult:
    """Fitted unmixing for one method.

    ``gamma`` holds the unmixing rows in original predictor coordinates,
    ordered by descending total pseudo-eigenvalue; ``w`` is the orthogonal
    basis in whitened coordinates; ``lambdas[i, j]`` is the diagonal
    contribution ``w_i' G_j w_i`` of component ``i`` at the ``j``-th lag of
    ``lags`` (nonnegative since the moment matrices are PSD; the optimizer's
    objective equals the sum of their squares); ``l_matrix`` is ``lambdas``
    scaled to total mass 1.
    """

    gamma: np.ndarray
    w: np.ndarray
    lambdas: np.ndarray
    l_matrix: np.ndarray
    lags: tuple
    method: str
    n_slices: object
    weight: float
    x_mean: np.ndarray
    whitener: np.ndarray

    def components(self, x):
        """Recovered component series for a predictor panel."""
        return (np.asarray(x, dtype=np.float64) - self.x_mean) @ self.gamma.T


def _resolve_slices(method, n_slices):
    if n_slices is None:
        return DEFAULT_SLICES[method]
    if method == "tssh":
        if np.ndim(n_slices) == 0:
            return (int(n_slices), int(n_slices))
        h_ir, h_ave = n_slices
        return (int(h_ir), int(h_ave))
    return int(n_slices)


def tsdr_fit(x, y, method, lags, n_slices=None, weight=0.5):
    """Fit a supervised time-series dimension reduction.

    Parameters
    ----------
    x : array_like, shape (T, p)
        Predictor panel with full-rank covariance.
    y : array_like, shape (T,)
        Response series aligned with ``x``; NaN marks unavailable values.
    method : {"tsir", "tsave", "tssh"}
    lags : sequence of int
        Distinct positive lags entering the moment stack.
    n_slices : int or (int, int), optional
        Slice count; defaults to 10 for tsir, 2 for tsave and (10, 2) for
        the hybrid (first-moment part, second-moment part).
    weight : float
        Hybrid mixing weight in [0, 1]; ignored for the pure methods.

    Returns
    -------
    FitResult
    """
    method = str(method).lower()
    if method not in METHODS:
        raise InvalidInputError(f"unknown method {method!r}; choices: {METHODS}")
    y = np.asarray(y, dtype=np.float64)
    x_st, mean, whitener = _whiten(x)
    if y.shape[0] != x_st.shape[0]:
        raise InvalidInputError(
            f"response length {y.shape[0]} does not match panel length {x_st.shape[0]}"
        )
    slices = _resolve_slices(method, n_slices)
    stack = supervision.moment_stack(
        x_st, y, lags, _STACK_KIND[method], slices,
        weight=weight if method == "tssh" else None,
    )
    w = joint_diag(stack.matrices)
    lambdas = np.stack([np.einsum("ij,jk,ik->i", w, g, w) for g in stack.matrices], axis=1)
    order = np.argsort(-lambdas.sum(axis=1), kind="stable")
    w = w[order]
    lambdas = lambdas[order]
    total = float(lambdas.sum())
    if total <= np.finfo(float).tiny:
        raise DegenerateStackError("all pseudo-eigenvalues are zero")
    return FitResult(
        gamma=w @ whitener,
        w=w,
        lambdas=lambdas,
        l_matrix=lambdas / total,
        lags=stack.lags,
        method=method,
        n_slices=slices,
        weight=float(weight) if method == "tssh" else None,
        x_mean=mean,
        whitener=whitener,
    )


def _greedy_match(corr):
    """Greedy absolute-correlation matching; returns matched |corr| values."""
    c = np.abs(corr.copy())
    k = c.shape[0]
    matched = []
    for _ in range(k):
        i, j = np.unravel_index(np.argmax(c), c.shape)
        matched.append(c[i, j])
        c[i, :] = -1.0
        c[:, j] = -1.0
    return np.array(matched)


def check_affine_equivariance(x, y, transform, shift, method, lags,
                              n_slices=None, weight=0.5):
    """Largest mismatch of recovered components under an affine predictor map.

    Fits on ``x`` and on ``x* = x A' + b``, matches the recovered component
    series greedily by absolute correlation, and returns the maximum of
    ``1 - |corr|`` over the matched components.
    """
    x = np.asarray(x, dtype=np.float64)
    transform = np.asarray(transform, dtype=np.float64)
    shift = np.asarray(shift, dtype=np.float64)
    fit_base = tsdr_fit(x, y, method, lags, n_slices, weight)
    fit_alt = tsdr_fit(x @ transform.T + shift, y, method, lags, n_slices, weight)
    s_base = fit_base.components(x)
    s_alt = fit_alt.components(x @ transform.T + shift)
    p = s_base.shape[1]
    corr = np.corrcoef(s_base, s_alt, rowvar=False)[:p, p:]
    return float(np.max(1.0 - _greedy_match(corr)))


@dataclass(frozen=True, eq=False)
class VectorizedFitResult:
    """Baseline fit on the stacked lagged predictor vector.

    ``directions`` are unmixing rows in original stacked coordinates (the
    whitener is already folded in); ``eigenvalues`` are all ``s*p`` values in
    descending order.
    """

    directions: np.ndarray
    eigenvalues: np.ndarray
    k_hat: int
    max_lag: int
    method: str
    n_slices: int
    threshold: float
    x_mean: np.ndarray

    def reduced(self, x):
        """Reduced predictor series aligned at ``t``; first ``max_lag`` rows are NaN."""
        stacked = _stack_lags(np.asarray(x, dtype=np.float64), self.max_lag)
        out = np.full((x.shape[0], self.k_hat), np.nan)
        out[self.max_lag:] = (stacked - self.x_mean) @ self.directions.T
        return out


def _stack_lags(x, max_lag):
    """Rows ``(x_{t-1}, ..., x_{t-max_lag})`` for ``t = max_lag .. T-1``."""
    t, p = x.shape
    cols = [x[max_lag - k:t - k] for k in range(1, max_lag + 1)]
    return np.concatenate(cols, axis=1)


def vectorized_fit(x, y, method, max_lag, n_slices, threshold):
    """Apply iid SIR/SAVE to the stacked vector of lagged predictors.

    The predictor for ``y_t`` is ``(x_{t-1}, ..., x_{t-max_lag})``; the
    stacked panel is whitened, a single supervised matrix is built from the
    sliced response, and the smallest ``k_hat`` whose cumulative eigenvalue
    share reaches ``threshold`` is retained.
    """
    method = str(method).lower()
    if method not in VECTORIZED_METHODS:
        raise InvalidInputError(f"unknown method {method!r}; choices: {VECTORIZED_METHODS}")
    if not 0.0 < threshold < 1.0:
        raise InvalidInputError(f"threshold must be in (0, 1), got {threshold}")
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.ndim != 2 or y.shape[0] != x.shape[0]:
        raise InvalidInputError("predictor panel and response are not aligned")
    t, p = x.shape
    s = int(max_lag)
    if t - s <= s * p:
        raise InvalidInputError(
            f"need T - s > s*p to whiten the stacked predictor (T={t}, s={s}, p={p})"
        )
    stacked = _stack_lags(x, s)
    target = y[s:]
    keep = np.isfinite(target)
    rows = stacked[keep]
    z, mean, whitener = _whiten(rows)
    assign = supervision.slice_response(target[keep], int(n_slices))
    if method == "sir":
        mat = supervision.slice_mean_matrix(z, assign.labels, int(n_slices))
    else:
        mat = supervision.slice_cov_matrix(z, assign.labels, int(n_slices))
    values, vectors = sym_eig(mat)
    total = float(values.sum())
    if total <= np.finfo(float).tiny:
        raise DegenerateStackError("supervised matrix has zero trace")
    share = np.cumsum(values) / total
    k_hat = int(np.searchsorted(share, threshold) + 1)
    k_hat = min(k_hat, values.size)
    return VectorizedFitResult(
        directions=vectors[:k_hat] @ whitener,
        eigenvalues=values,
        k_hat=k_hat,
        max_lag=s,
        method=method,
        n_slices=int(n_slices),
        threshold=float(threshold),
        x_mean=mean,
    )


def write_fit_csv(fit, path, extra_meta=None):
    """Serialize a fit to CSV: metadata header block plus one row per (source, lag)."""
    meta = {
        "method": fit.method,
        "n_slices": _format_slices(fit.n_slices),
        "weight": "" if fit.weight is None else f"{fit.weight:.17g}",
        "lags": ",".join(str(j) for j in fit.lags),
    }
    if extra_meta:
        meta.update({str(k): str(v) for k, v in extra_meta.items()})
    with open(path, "w", newline="") as fh:
        for key, value in meta.items():
            fh.write(f"# {key}={value}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["source", "lag", "lambda", "l"])
        p, s = fit.l_matrix.shape
        for i in range(p):
            for j in range(s):
                writer.writerow([
                    str(i + 1),
                    str(fit.lags[j]),
                    f"{fit.lambdas[i, j]:.17g}",
                    f"{fit.l_matrix[i, j]:.17g}",
                ])


def _format_slices(n_slices):
    if np.ndim(n_slices) == 0:
        return str(n_slices)
    return ",".join(str(h) for h in n_slices)


def read_fit_csv(path):
    """Read a fit CSV; returns ``(l_matrix, lambdas, lags, meta)``."""
    meta = {}
    rows = []
    with open(path, newline="") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if line.startswith("#"):
                key, _, value = line[1:].strip().partition("=")
                meta[key.strip()] = value
            elif line and not line.startswith("source,"):
                rows.append(line.split(","))
    if not rows:
        raise InvalidInputError(f"{path}: no fit rows found")
    sources = sorted({int(r[0]) for r in rows})
    lags = sorted({int(r[1]) for r in rows})
    lag_pos = {j: c for c, j in enumerate(lags)}
    lam = np.zeros((len(sources), len(lags)))
    lmat = np.zeros_like(lam)
    for r in rows:
        i, j = int(r[0]) - 1, lag_pos[int(r[1])]
        lam[i, j] = float(r[2])
        lmat[i, j] = float(r[3])
    return lmat, lam, tuple(lags), meta
