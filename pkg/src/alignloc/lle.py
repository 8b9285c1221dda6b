"""Locally linear embedding primitives.

Neighbor search, closed-form reconstruction weights, and the neighborhood
Laplacian L = I - W.  These run identically on RSS fingerprints, extended
plan coordinates, or any other point cloud.
"""

from __future__ import annotations

import numpy as np
from scipy.spatial.distance import cdist

from .errors import ConfigurationError, NumericalError, StructuralError
from .validation import check_array, check_nonnegative_float, check_positive_int

DEFAULT_RIDGE = 1e-3
# optimum reported around 11% of the dataset size
DEFAULT_NEIGHBOR_FRACTION = 0.11


def default_n_neighbors(n_points: int) -> int:
    """Neighbor count rule of thumb: 11% of the dataset, at least 2."""
    return max(2, int(round(DEFAULT_NEIGHBOR_FRACTION * n_points)))


def _forbidden_mask(forbidden, n: int) -> np.ndarray | None:
    if forbidden is None:
        return None
    if callable(forbidden):
        mask = np.zeros((n, n), dtype=bool)
        for i in range(n):
            for j in range(n):
                if i != j and forbidden(i, j):
                    mask[i, j] = True
        return mask
    mask = np.asarray(forbidden, dtype=bool)
    if mask.shape != (n, n):
        raise StructuralError(f"forbidden mask must be ({n}, {n}), got {mask.shape}")
    return mask


def find_neighbors(points, n_neighbors: int, forbidden=None) -> np.ndarray:
    """k-nearest-neighbor indices per point, (n, n_neighbors), ascending distance.

    Ties break toward the lower index.  ``forbidden`` marks pairs that may
    never be neighbors: a callable taking (i, j) or a boolean (n, n) matrix.
    """
    points = check_array(points, name="points", ndim=2)
    n = len(points)
    n_neighbors = check_positive_int(n_neighbors, name="n_neighbors")
    if n_neighbors >= n:
        raise ConfigurationError(f"n_neighbors={n_neighbors} must be < number of points ({n})")
    d = cdist(points, points)
    np.fill_diagonal(d, np.inf)
    mask = _forbidden_mask(forbidden, n)
    if mask is not None:
        d[mask] = np.inf
    eligible = np.isfinite(d).sum(axis=1)
    short = np.flatnonzero(eligible < n_neighbors)
    if short.size:
        i = int(short[0])
        raise StructuralError(
            f"point {i} has only {int(eligible[i])} eligible neighbors, need {n_neighbors}"
        )
    # stable sort keeps equal distances in index order
    order = np.argsort(d, axis=1, kind="stable")
    return np.ascontiguousarray(order[:, :n_neighbors])


def compute_weights(points, neighbors, ridge: float = DEFAULT_RIDGE) -> np.ndarray:
    """Reconstruction weights: each point as an affine combination of its neighbors.

    Per point, solve (G + a*I) w = 1 with G the Gram matrix of the centered
    neighbor differences and a = ridge * trace(G), then normalize w to unit
    sum.  With ridge = 0 the raw system is solved and singularity is an error.
    Returns a dense (n, n) matrix whose row i is supported on neighbors[i].
    """
    points = check_array(points, name="points", ndim=2)
    n = len(points)
    neighbors = check_array(neighbors, name="neighbors", ndim=2, dtype=int)
    if len(neighbors) != n:
        raise StructuralError(f"neighbors has {len(neighbors)} rows for {n} points")
    if neighbors.min() < 0 or neighbors.max() >= n:
        raise StructuralError("neighbor index out of range")
    if np.any(neighbors == np.arange(n)[:, None]):
        raise StructuralError("a point may not be its own neighbor")
    ridge = check_nonnegative_float(ridge, name="ridge")
    k = neighbors.shape[1]
    W = np.zeros((n, n))
    ones = np.ones(k)
    for i in range(n):
        diffs = points[i] - points[neighbors[i]]
        gram = diffs @ diffs.T
        if ridge > 0:
            trace = np.trace(gram)
            alpha = ridge * trace if trace > 0 else ridge
            gram = gram + alpha * np.eye(k)
        try:
            w = np.linalg.solve(gram, ones)
        except np.linalg.LinAlgError as exc:
            raise NumericalError(
                f"weight system singular at point {i} (ridge={ridge}); "
                "increase ridge to regularize"
            ) from exc
        total = w.sum()
        if not np.isfinite(total) or abs(total) < 1e-12 * max(1.0, np.abs(w).max()):
            raise NumericalError(
                f"weight normalization degenerate at point {i}: sum of raw weights ~ 0"
            )
        W[i, neighbors[i]] = w / total
    return W


def build_laplacian(weights: np.ndarray) -> np.ndarray:
    """Neighborhood Laplacian L = I - W for a row-stochastic weight matrix."""
    W = check_array(weights, name="weights", ndim=2)
    if W.shape[0] != W.shape[1]:
        raise StructuralError(f"weight matrix must be square, got {W.shape}")
    row_sums = W.sum(axis=1)
    if np.any(np.abs(row_sums - 1.0) > 1e-10):
        worst = int(np.argmax(np.abs(row_sums - 1.0)))
        raise StructuralError(
            f"weight matrix not row-stochastic: row {worst} sums to {row_sums[worst]!r}"
        )
    return np.eye(len(W)) - W


def laplacian_from_points(
    points, n_neighbors: int | None = None, ridge: float = DEFAULT_RIDGE, forbidden=None
) -> np.ndarray:
    """Convenience chain: neighbors -> weights -> Laplacian."""
    points = check_array(points, name="points", ndim=2)
    if n_neighbors is None:
        n_neighbors = default_n_neighbors(len(points))
    nbrs = find_neighbors(points, n_neighbors, forbidden=forbidden)
    return build_laplacian(compute_weights(points, nbrs, ridge=ridge))
