"""Response slicing and lagged supervised moment matrices.

The response is discretized into equal-frequency slices; the two moment
matrices measure, per lag, the between-slice variation of the conditional
mean (first-moment signal) and the departure of the conditional covariance
from identity (second-moment signal).  Both are built from pairs
``(z_t, y_{t+j})`` for a positive lag ``j``.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateSliceError, InvalidInputError, TooManySlicesError

__all__ = [
    "SliceAssignment",
    "LaggedMomentStack",
    "slice_response",
    "slice_mean_matrix",
    "slice_cov_matrix",
    "tsir_matrix",
    "tsave_matrix",
    "hybrid_matrix",
    "moment_stack",
    "TSIR",
    "TSAVE",
    "HYBRID",
]

TSIR = "tsir"
TSAVE = "tsave"
HYBRID = "hybrid"

# label value marking response positions that carry no slice (NaN response)
NO_SLICE = 0


@dataclass(frozen=True, eq=False)
class SliceAssignment:
    """Per-time-point slice labels in ``{1..H}``; 0 marks unavailable positions."""

    labels: np.ndarray
    n_slices: int
    boundaries: np.ndarray


def slice_response(y, n_slices):
    """Assign equal-frequency slice labels to a response series.

    The available values are ranked (ties broken by time index) and split
    into ``n_slices`` contiguous blocks whose sizes differ by at most one,
    larger blocks first.

    Parameters
    ----------
    y : array_like
        Response series; NaN entries are treated as unavailable.
    n_slices : int
        Number of slices, at least 2.

    Returns
    -------
    SliceAssignment
    """
    y = np.asarray(y, dtype=np.float64)
    if y.ndim != 1:
        raise InvalidInputError(f"response must be one-dimensional, got shape {y.shape}")
    if n_slices < 2:
        raise InvalidInputError(f"need at least 2 slices, got {n_slices}")
    avail = np.nonzero(np.isfinite(y))[0]
    n = avail.size
    if n_slices > n:
        raise TooManySlicesError(f"{n_slices} slices requested but only {n} response values")

    order = avail[np.argsort(y[avail], kind="stable")]
    base, extra = divmod(n, n_slices)
    sizes = [base + 1] * extra + [base] * (n_slices - extra)

    labels = np.zeros(y.shape[0], dtype=np.int64)
    boundaries = np.empty(n_slices - 1)
    start = 0
    for h, size in enumerate(sizes, start=1):
        block = order[start:start + size]
        labels[block] = h
        if h < n_slices:
            lo = y[order[start + size - 1]]
            hi = y[order[start + size]]
            boundaries[h - 1] = 0.5 * (lo + hi)
        start += size
    return SliceAssignment(labels=labels, n_slices=n_slices, boundaries=boundaries)


def _paired(z, slices, lag):
    """Predictor rows and slice labels for pairs ``(z_t, y_{t+lag})``."""
    z = np.asarray(z, dtype=np.float64)
    if z.ndim != 2:
        raise InvalidInputError(f"predictors must be a T x p matrix, got shape {z.shape}")
    if lag < 1:
        raise InvalidInputError(f"lag must be >= 1, got {lag}")
    t = z.shape[0]
    if lag >= t:
        raise InvalidInputError(f"lag {lag} leaves no usable pairs for length {t}")
    labels = np.asarray(slices.labels)
    if labels.shape[0] != t:
        raise InvalidInputError("slice labels are not aligned with the predictor panel")
    lab = labels[lag:]
    keep = lab != NO_SLICE
    return z[:t - lag][keep], lab[keep]


def slice_mean_matrix(z, labels, n_slices, lag=0):
    """Core first-moment matrix ``sum_h p_h m_h m_h'`` for paired rows.

    ``z`` rows and ``labels`` must already be aligned one to one; ``lag`` is
    only used to annotate degenerate-slice errors.
    """
    n = z.shape[0]
    center = z.mean(axis=0)
    out = np.zeros((z.shape[1], z.shape[1]))
    for h in range(1, n_slices + 1):
        rows = z[labels == h]
        if rows.shape[0] == 0:
            raise DegenerateSliceError(h, lag, needed=1)
        m = rows.mean(axis=0) - center
        out += (rows.shape[0] / n) * np.outer(m, m)
    return 0.5 * (out + out.T)


def slice_cov_matrix(z, labels, n_slices, lag=0):
    """Core second-moment matrix ``sum_h p_h (I - C_h)^2`` for paired rows."""
    n, p = z.shape
    eye = np.eye(p)
    out = np.zeros((p, p))
    for h in range(1, n_slices + 1):
        rows = z[labels == h]
        if rows.shape[0] < 2:
            raise DegenerateSliceError(h, lag, needed=2)
        centered = rows - rows.mean(axis=0)
        cov = centered.T @ centered / rows.shape[0]
        dev = eye - cov
        out += (rows.shape[0] / n) * (dev @ dev)
    return 0.5 * (out + out.T)


def tsir_matrix(z_st, slices, lag):
    """Between-slice covariance of conditional means at one lag.

    Computes ``sum_h p_h m_h m_h'`` over the usable pairs ``(z_t, y_{t+lag})``,
    where ``m_h`` is the within-slice mean of the predictors centered by the
    overall pair mean, and ``p_h`` the slice proportion.

    Raises
    ------
    DegenerateSliceError
        If a slice contains no pairs after lag pairing.
    """
    z, lab = _paired(z_st, slices, lag)
    if z.shape[0] < slices.n_slices:
        raise InvalidInputError(
            f"only {z.shape[0]} pairs at lag {lag} for {slices.n_slices} slices"
        )
    return slice_mean_matrix(z, lab, slices.n_slices, lag)


def tsave_matrix(z_st, slices, lag):
    """Average squared deviation of within-slice covariances from identity.

    Computes ``sum_h p_h (I - C_h)^2`` over the usable pairs, where ``C_h``
    is the within-slice sample covariance (denominator = slice pair count).

    Raises
    ------
    DegenerateSliceError
        If a slice has fewer than two pairs.
    """
    z, lab = _paired(z_st, slices, lag)
    return slice_cov_matrix(z, lab, slices.n_slices, lag)


def hybrid_matrix(weight, g_tsir, g_tsave):
    """Convex combination ``(1 - weight) * g_tsir + weight * g_tsave``.

    ``weight=0`` returns the first-moment matrix exactly, ``weight=1`` the
    second-moment matrix exactly.
    """
    if not 0.0 <= weight <= 1.0:
        raise InvalidInputError(f"hybrid weight must be in [0, 1], got {weight}")
    a = np.asarray(g_tsir, dtype=np.float64)
    b = np.asarray(g_tsave, dtype=np.float64)
    if a.shape != b.shape:
        raise InvalidInputError(f"shape mismatch: {a.shape} vs {b.shape}")
    return (1.0 - weight) * a + weight * b


@dataclass(frozen=True, eq=False)
class LaggedMomentStack:
    """Supervised moment matrices for a set of lags.

    ``weight`` is the hybrid mixing weight and is None for the pure kinds.
    """

    lags: tuple
    matrices: list
    kind: str
    weight: float = None


def _per_lag_slices(y, lag, n_slices):
    """Equal-frequency slicing of the response restricted to lag-``lag`` pairs."""
    y = np.asarray(y, dtype=np.float64)
    sub = slice_response(y[lag:], n_slices)
    labels = np.zeros(y.shape[0], dtype=np.int64)
    labels[lag:] = sub.labels
    return SliceAssignment(labels=labels, n_slices=n_slices, boundaries=sub.boundaries)


def moment_stack(z_st, y, lags, kind, n_slices, weight=None):
    """Build the stack of supervised matrices for a lag set.

    Slicing is recomputed per lag on the response values that actually pair
    with a predictor row, which keeps slice occupancy balanced for every lag.
    For the hybrid kind, ``n_slices`` may be a pair
    ``(first-moment H, second-moment H)``.

    Parameters
    ----------
    z_st : ndarray, shape (T, p)
        Standardized (whitened) predictor panel.
    y : array_like, shape (T,)
        Response series aligned with ``z_st``; NaN marks unavailable values.
    lags : sequence of int
        Distinct positive lags.
    kind : {"tsir", "tsave", "hybrid"}
    n_slices : int or (int, int)
    weight : float, optional
        Hybrid mixing weight, required for the hybrid kind.
    """
    lags = tuple(int(j) for j in lags)
    if not lags:
        raise InvalidInputError("lag set is empty")
    if any(j < 1 for j in lags):
        raise InvalidInputError(f"all lags must be >= 1, got {lags}")
    if len(set(lags)) != len(lags):
        raise InvalidInputError(f"lags must be distinct, got {lags}")
    if kind not in (TSIR, TSAVE, HYBRID):
        raise InvalidInputError(f"unknown stack kind {kind!r}")

    if kind == HYBRID:
        if weight is None:
            raise InvalidInputError("hybrid stack requires a weight")
        if np.ndim(n_slices) == 0:
            h_ir = h_ave = int(n_slices)
        else:
            h_ir, h_ave = (int(h) for h in n_slices)
        mats = []
        for j in lags:
            g0 = tsir_matrix(z_st, _per_lag_slices(y, j, h_ir), j)
            g1 = tsave_matrix(z_st, _per_lag_slices(y, j, h_ave), j)
            mats.append(hybrid_matrix(weight, g0, g1))
        return LaggedMomentStack(lags=lags, matrices=mats, kind=kind, weight=float(weight))

    h = int(n_slices)
    build = tsir_matrix if kind == TSIR else tsave_matrix
    mats = [build(z_st, _per_lag_slices(y, j, h), j) for j in lags]
    return LaggedMomentStack(lags=lags, matrices=mats, kind=kind)
