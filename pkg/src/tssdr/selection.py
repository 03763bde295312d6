"""Strategies for choosing the number of sources and lags from the L matrix.

All strategies pick the smallest structure whose covered share of the total
dependence mass reaches a threshold ``P``.  Sources are numbered from 1 in
the row order of ``L`` (strongest first); lags are the actual lag values.
"""

from dataclasses import dataclass
from itertools import permutations

import numpy as np

from .errors import InvalidInputError

__all__ = [
    "SelectionResult",
    "select",
    "expected_structure_check",
    "STRATEGIES",
    "format_chosen",
    "parse_chosen",
]

ALL_LAGS = "all_lags"
ALL_SOURCES = "all_sources"
RECTANGLE = "rectangle"
BIGGEST_VALUES = "biggest_values"
STRATEGIES = (ALL_LAGS, ALL_SOURCES, RECTANGLE, BIGGEST_VALUES)


@dataclass(frozen=True)
class SelectionResult:
    """Chosen (source, lag) pairs with the covered dependence mass.

    ``k_hat`` is the number of distinct chosen sources; ``s_hat`` is the
    strategy's lag bound (the largest chosen lag for the biggest-values
    strategy).
    """

    strategy: str
    threshold: float
    chosen: tuple
    k_hat: int
    s_hat: int
    covered_mass: float


def _validate(l_matrix, strategy, threshold):
    l = np.asarray(l_matrix, dtype=np.float64)
    if l.ndim != 2 or l.size == 0:
        raise InvalidInputError(f"L must be a nonempty 2-d matrix, got shape {l.shape}")
    if strategy not in STRATEGIES:
        raise InvalidInputError(f"unknown strategy {strategy!r}; choices: {STRATEGIES}")
    if not 0.0 < threshold < 1.0:
        raise InvalidInputError(f"threshold must be inside (0, 1), got {threshold}")
    if np.any(l < -1e-12):
        raise InvalidInputError("L has negative entries")
    if abs(l.sum() - 1.0) > 1e-9:
        raise InvalidInputError(f"L entries must sum to 1, got {l.sum():.12g}")
    return np.clip(l, 0.0, None)


def select(l_matrix, strategy, threshold, lags=None):
    """Select sources and lags covering at least ``threshold`` of the mass.

    ``l_matrix`` rows must already be ordered by descending row sum.  Lags
    default to ``1..s`` matching the column order; pass the fit's lag set to
    label columns with their actual lags.

    Strategies
    ----------
    all_lags
        Keep every lag, take the fewest leading sources.
    all_sources
        Keep every source, take the fewest leading lags.
    rectangle
        Top-left block with the smallest ``k_hat * s_hat`` product whose
        mass reaches the threshold; ties prefer fewer sources, then lags.
    biggest_values
        Greedily take the largest entries; ties prefer the lower source,
        then the lower lag.
    """
    strategy = str(strategy).lower()
    l = _validate(l_matrix, strategy, threshold)
    p, s = l.shape
    if lags is None:
        lags = tuple(range(1, s + 1))
    else:
        lags = tuple(int(j) for j in lags)
        if len(lags) != s:
            raise InvalidInputError(f"{len(lags)} lag labels for {s} columns")

    if strategy == ALL_LAGS:
        row_cum = np.cumsum(l.sum(axis=1))
        k_hat = int(np.searchsorted(row_cum, threshold - 1e-12) + 1)
        k_hat = min(k_hat, p)
        chosen = tuple((i + 1, lags[j]) for i in range(k_hat) for j in range(s))
        return SelectionResult(strategy, threshold, chosen, k_hat, max(lags), float(row_cum[k_hat - 1]))

    if strategy == ALL_SOURCES:
        col_cum = np.cumsum(l.sum(axis=0))
        s_hat = int(np.searchsorted(col_cum, threshold - 1e-12) + 1)
        s_hat = min(s_hat, s)
        chosen = tuple((i + 1, lags[j]) for i in range(p) for j in range(s_hat))
        return SelectionResult(strategy, threshold, chosen, p, lags[s_hat - 1], float(col_cum[s_hat - 1]))

    if strategy == RECTANGLE:
        block = l.cumsum(axis=0).cumsum(axis=1)
        best = None
        for k in range(1, p + 1):
            for m in range(1, s + 1):
                if block[k - 1, m - 1] >= threshold - 1e-12:
                    key = (k * m, k, m)
                    if best is None or key < best:
                        best = key
        if best is None:
            raise InvalidInputError(
                f"no rectangle reaches mass {threshold}; total is {l.sum():.6g}"
            )
        _, k_hat, s_hat = best
        chosen = tuple((i + 1, lags[j]) for i in range(k_hat) for j in range(s_hat))
        return SelectionResult(strategy, threshold, chosen, k_hat, lags[s_hat - 1],
                               float(block[k_hat - 1, s_hat - 1]))

    # biggest values
    cells = sorted(
        ((i, j) for i in range(p) for j in range(s)),
        key=lambda ij: (-l[ij[0], ij[1]], ij[0], ij[1]),
    )
    mass = 0.0
    taken = []
    for i, j in cells:
        taken.append((i + 1, lags[j]))
        mass += l[i, j]
        if mass >= threshold - 1e-12:
            break
    k_hat = len({i for i, _ in taken})
    s_hat = max(j for _, j in taken)
    return SelectionResult(strategy, threshold, tuple(taken), k_hat, s_hat, float(mass))


def expected_structure_check(sel, truth):
    """Whether a selection matches a true (slot, lag) pattern exactly.

    ``truth`` lists (slot, lag) requirements; slots are abstract source ids
    matched to recovered sources up to permutation.  True iff the selection
    contains exactly as many distinct sources as there are distinct slots and
    some one-to-one slot assignment covers every required lag.
    """
    required = {}
    for slot, lag in truth:
        required.setdefault(slot, set()).add(int(lag))
    found = {}
    for source, lag in sel.chosen:
        found.setdefault(source, set()).add(int(lag))
    if len(found) != len(required):
        return False
    slots = list(required)
    sources = list(found)
    for perm in permutations(sources):
        if all(required[slot] <= found[src] for slot, src in zip(slots, perm)):
            return True
    return False


def format_chosen(chosen):
    """Serialize chosen pairs as ``source:lag`` items joined by ``;``."""
    return ";".join(f"{i}:{j}" for i, j in chosen)


def parse_chosen(text):
    """Inverse of :func:`format_chosen`."""
    if not text:
        return ()
    out = []
    for item in text.split(";"):
        i, _, j = item.partition(":")
        out.append((int(i), int(j)))
    return tuple(out)
