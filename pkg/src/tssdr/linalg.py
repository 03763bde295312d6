"""Dense symmetric-matrix primitives and orthogonal approximate joint diagonalization.

All routines work on plain ``numpy`` arrays.  Symmetric inputs are validated
and symmetrized on entry; orthogonal bases are returned as matrices with
orthonormal *rows*.
"""

import numpy as np

from .errors import DegenerateStackError, InvalidInputError, SingularMatrixError

__all__ = [
    "as_symmetric",
    "sym_eig",
    "inv_sqrt",
    "joint_diag",
    "fixed_point_diag",
    "diag_objective",
]


def as_symmetric(m, tol=1e-8):
    """Validate a square matrix and return its symmetrized copy.

    Parameters
    ----------
    m : array_like, shape (p, p)
        Matrix expected to be symmetric up to ``tol`` (relative to its
        largest absolute entry).
    tol : float
        Maximum tolerated relative asymmetry before the input is rejected.

    Returns
    -------
    ndarray
        ``(m + m.T) / 2`` as float64.
    """
    a = np.asarray(m, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise InvalidInputError(f"expected a square matrix, got shape {a.shape}")
    if a.shape[0] < 1:
        raise InvalidInputError("matrix dimension must be at least 1")
    if not np.all(np.isfinite(a)):
        raise InvalidInputError("matrix contains non-finite entries")
    scale = np.max(np.abs(a)) if a.size else 0.0
    if scale > 0 and np.max(np.abs(a - a.T)) > tol * max(scale, 1.0):
        raise InvalidInputError("matrix is not symmetric within tolerance")
    return 0.5 * (a + a.T)


def sym_eig(m):
    """Eigendecomposition of a symmetric matrix with descending eigenvalues.

    Returns
    -------
    values : ndarray, shape (p,)
        Eigenvalues sorted in descending order.
    vectors : ndarray, shape (p, p)
        Orthonormal basis whose *rows* are the matching eigenvectors, so that
        ``vectors.T @ diag(values) @ vectors`` reconstructs ``m``.
    """
    a = as_symmetric(m)
    values, vectors = np.linalg.eigh(a)
    order = np.argsort(values, kind="stable")[::-1]
    return values[order], vectors[:, order].T


def inv_sqrt(m, rel_tol=1e-12):
    """Symmetric inverse square root of a positive definite matrix.

    Parameters
    ----------
    m : array_like, shape (p, p)
        Symmetric positive definite matrix.
    rel_tol : float
        Eigenvalues below ``rel_tol`` times the largest eigenvalue are
        treated as zero and rejected.

    Returns
    -------
    ndarray
        Symmetric matrix ``r`` with ``r @ m @ r`` equal to the identity.

    Raises
    ------
    SingularMatrixError
        If any eigenvalue falls below the relative threshold.
    """
    values, vectors = sym_eig(m)
    largest = values[0]
    if largest <= 0.0:
        raise SingularMatrixError("matrix has no positive eigenvalue")
    bad = np.nonzero(values <= rel_tol * largest)[0]
    if bad.size:
        i = int(bad[0])
        raise SingularMatrixError(
            f"eigenvalue {i} ({values[i]:.3e}) below {rel_tol:.1e} x largest ({largest:.3e})"
        )
    return vectors.T @ np.diag(1.0 / np.sqrt(values)) @ vectors


def _as_stack(stack):
    mats = [as_symmetric(m) for m in stack]
    if not mats:
        raise InvalidInputError("matrix stack is empty")
    dim = mats[0].shape[0]
    for i, m in enumerate(mats):
        if m.shape[0] != dim:
            raise InvalidInputError(
                f"stack dimension mismatch: matrix 0 is {dim}x{dim}, matrix {i} is {m.shape[0]}x{m.shape[0]}"
            )
    return np.stack(mats)


def diag_objective(stack, w):
    """Sum of squared diagonal elements of ``w @ G @ w.T`` over the stack."""
    total = 0.0
    for g in stack:
        d = np.einsum("ij,jk,ik->i", w, g, w)
        total += float(np.sum(d * d))
    return total


def _canonical_rows(w, stack):
    """Order rows by descending sum of squared diagonal contributions, fix signs."""
    lam = np.zeros(w.shape[0])
    for g in stack:
        d = np.einsum("ij,jk,ik->i", w, np.asarray(g), w)
        lam += d * d
    order = np.argsort(-lam, kind="stable")
    w = w[order]
    for i in range(w.shape[0]):
        j = int(np.argmax(np.abs(w[i])))
        if w[i, j] < 0:
            w[i] = -w[i]
    return w


def joint_diag(stack, max_sweeps=100, conv_tol=1e-10, sweep_log=None):
    """Orthogonal approximate joint diagonalization by cyclic Jacobi rotations.

    Maximizes ``sum_j sum_i (w_i' G_j w_i)^2`` over orthogonal ``w`` using the
    closed-form Givens angle for the sum-of-squared-diagonals criterion.  The
    sweep loop stops once a full sweep improves the objective by less than
    ``conv_tol`` relative to its current value, or after ``max_sweeps``.

    Parameters
    ----------
    stack : sequence of array_like, each (p, p) symmetric
    max_sweeps : int
    conv_tol : float
        Relative objective-improvement threshold per sweep.
    sweep_log : list, optional
        If given, the objective value after each sweep is appended to it.

    Returns
    -------
    ndarray, shape (p, p)
        Orthonormal rows, ordered by descending sum of squared diagonal
        contributions; each row's largest-magnitude entry is positive.
    """
    d = _as_stack(stack)
    p = d.shape[1]
    v = np.eye(p)
    if p == 1:
        return v

    obj = float(np.sum(np.einsum("kii->ki", d) ** 2))
    for _ in range(max_sweeps):
        for i in range(p):
            for j in range(i + 1, p):
                h1 = d[:, i, i] - d[:, j, j]
                h2 = d[:, i, j] + d[:, j, i]
                ton = h1 @ h1 - h2 @ h2
                toff = 2.0 * (h1 @ h2)
                theta = 0.5 * np.arctan2(toff, ton + np.hypot(ton, toff))
                c = np.cos(theta)
                s = np.sin(theta)
                if s == 0.0:
                    continue
                # D <- R' D R for the plane rotation R in coordinates (i, j)
                col_i = d[:, :, i].copy()
                d[:, :, i] = c * col_i + s * d[:, :, j]
                d[:, :, j] = c * d[:, :, j] - s * col_i
                row_i = d[:, i, :].copy()
                d[:, i, :] = c * row_i + s * d[:, j, :]
                d[:, j, :] = c * d[:, j, :] - s * row_i
                v_i = v[:, i].copy()
                v[:, i] = c * v_i + s * v[:, j]
                v[:, j] = c * v[:, j] - s * v_i
        new_obj = float(np.sum(np.einsum("kii->ki", d) ** 2))
        if sweep_log is not None:
            sweep_log.append(new_obj)
        if new_obj - obj <= conv_tol * max(new_obj, np.finfo(float).tiny):
            obj = new_obj
            break
        obj = new_obj

    return _canonical_rows(v.T, stack)


def fixed_point_diag(stack, init, max_iter=500, conv_tol=1e-12):
    """Fixed-point joint diagonalizer, used as a cross-check for :func:`joint_diag`.

    Iterates ``W <- (M M')^{-1/2} M`` where row ``i`` of ``M`` is
    ``sum_j (w_i' G_j w_i) G_j w_i``, until the rows stop moving (up to sign)
    by less than ``conv_tol`` or ``max_iter`` is reached.

    Raises
    ------
    DegenerateStackError
        If ``M M'`` becomes singular during the iteration.
    """
    d = _as_stack(stack)
    w = np.asarray(init, dtype=np.float64).copy()
    if w.shape != (d.shape[1], d.shape[2]):
        raise InvalidInputError(
            f"init has shape {w.shape}, expected {(d.shape[1], d.shape[2])}"
        )
    for _ in range(max_iter):
        gw = np.einsum("kij,mj->kmi", d, w)            # G_j w_m
        quad = np.einsum("mi,kmi->km", w, gw)          # w_m' G_j w_m
        m = np.einsum("km,kmi->mi", quad, gw)          # rows m(w_i)
        try:
            root = inv_sqrt(m @ m.T)
        except SingularMatrixError as exc:
            raise DegenerateStackError(f"fixed-point step produced singular M M': {exc}") from exc
        w_new = root @ m
        drift = 1.0 - np.min(np.abs(np.sum(w_new * w, axis=1)))
        w = w_new
        if drift < conv_tol:
            break
    return _canonical_rows(w, stack)
