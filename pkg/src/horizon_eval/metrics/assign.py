"""
Exact maximum-weight one-to-one assignment.

Every metric in the package reduces to a linear assignment problem on a
non-negative rectangular matrix: the summed overlap counts (IDTP), the
temporal IOU matrix (TrackTP) or a binary per-frame overlap (detection).
"""

import math
from typing import List, Optional, Tuple

import numpy as np
from numpy.typing import ArrayLike
from scipy.optimize import linear_sum_assignment

from horizon_eval.core.errors import ContractError
from horizon_eval.core.model import Matching

# Relative slack when testing whether a pinned pair keeps the optimum.
OBJECTIVE_TOLERANCE = 1e-12


def as_weight_matrix(w: ArrayLike) -> np.ndarray:
    """Validate and convert to a 2-D float array with finite, non-negative entries."""
    arr = np.asarray(w, dtype=np.float64)
    if arr.ndim == 1 and arr.size == 0:
        arr = arr.reshape(0, 0)
    if arr.ndim != 2:
        raise ContractError(f"weight matrix must be 2-D, got shape {arr.shape}")
    if arr.size and not np.all(np.isfinite(arr)):
        raise ContractError("weight matrix has non-finite entries")
    if arr.size and arr.min() < 0:
        raise ContractError("weight matrix has negative entries")
    return arr


def _solve(arr: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Optimal (rows, cols) restricted to strictly positive edges."""
    if arr.size == 0:
        empty = np.zeros(0, dtype=np.intp)
        return empty, empty
    rows, cols = linear_sum_assignment(arr, maximize=True)
    keep = arr[rows, cols] > 0
    return rows[keep], cols[keep]


def _lexicographic_optimum(arr: np.ndarray, rows: np.ndarray, cols: np.ndarray) -> List[Tuple[int, int]]:
    """
    Among all optimal matchings, the one whose sorted pair list is smallest.

    Rows are fixed in order: row i takes the smallest column that still
    admits an optimum of the remaining rows, starting from a known optimum so
    only columns left of its current partner need a re-solve. A row that is
    matched in some optimum is always matched.
    """
    optimum = math.fsum(arr[rows, cols].tolist())
    tolerance = OBJECTIVE_TOLERANCE * max(1.0, optimum)
    current = dict(zip(rows.tolist(), cols.tolist()))
    free_cols = list(range(arr.shape[1]))
    fixed: List[Tuple[int, int]] = []
    fixed_weights: List[float] = []
    for i in range(arr.shape[0]):
        partner = current.get(i)
        for j in free_cols:
            if partner is not None and j >= partner:
                break
            if arr[i, j] <= 0:
                continue
            rest_rows = np.arange(i + 1, arr.shape[0])
            rest_cols = np.array([c for c in free_cols if c != j], dtype=np.intp)
            sub = arr[np.ix_(rest_rows, rest_cols)]
            sr, sc = _solve(sub)
            total = math.fsum(fixed_weights + [float(arr[i, j])] + sub[sr, sc].tolist())
            if total >= optimum - tolerance:
                partner = j
                current = {int(rest_rows[r]): int(rest_cols[c]) for r, c in zip(sr, sc)}
                break
        if partner is not None:
            fixed.append((i, partner))
            fixed_weights.append(float(arr[i, partner]))
            free_cols.remove(partner)
    return fixed


def assignment_objective(arr: np.ndarray) -> float:
    """Optimal objective only; used by the windowed metrics' inner loop."""
    rows, cols = _solve(arr)
    return math.fsum(arr[rows, cols].tolist())


def max_weight_matching(w: ArrayLike) -> Matching:
    """
    Maximum-weight one-to-one matching (Hungarian method, O(n^3)).

    Zero-weight pairs are dropped from the result; they never change the
    objective. Among equal-objective optima the lexicographically smallest
    sorted pair list is returned. The objective is summed in (i, j) order so
    equal inputs give bitwise-equal results.
    """
    arr = as_weight_matrix(w)
    rows, cols = _solve(arr)
    pairs = _lexicographic_optimum(arr, rows, cols)
    objective = math.fsum(float(arr[i, j]) for i, j in pairs)
    return Matching(tuple(pairs), objective)


def max_cardinality_matching(b: ArrayLike, tie_weights: Optional[ArrayLike] = None) -> Matching:
    """
    Maximum-cardinality matching over the edges of a binary matrix.

    Ties are broken by the largest total tie weight (e.g. spatial IOU). The
    tie weights enter scaled by eps < 1 / (1 + sum(tie)), so no amount of tie
    weight can outweigh one extra matched edge. The returned objective is the
    cardinality.
    """
    edges = as_weight_matrix(b)
    if edges.size and not np.all((edges == 0) | (edges == 1)):
        raise ContractError("max_cardinality_matching expects a binary matrix")
    if tie_weights is None:
        ties = np.zeros_like(edges)
    else:
        ties = as_weight_matrix(tie_weights)
        if ties.shape != edges.shape:
            raise ContractError(f"tie weights shape {ties.shape} != {edges.shape}")
        if ties.size and ties.max() >= 1:
            # IOU of 1.0 is legal input; rescale so every tie weight is < 1.
            ties = ties / (ties.max() + 1.0)
    ties = ties * edges
    eps = 1.0 / (2.0 + float(ties.sum()))
    combined = edges + eps * ties
    rows, cols = _solve(combined)
    pairs = [(i, j) for i, j in _lexicographic_optimum(combined, rows, cols) if edges[i, j] == 1]
    return Matching(tuple(pairs), float(len(pairs)))
