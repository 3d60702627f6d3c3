"""Local Outlier Factor on scalar point sets and the reciprocal-LOF weights.

All routines operate on 1-D point sets (the outputs of the ensemble members
for one sample).  ``lof_scores_batch`` evaluates many such sets at once,
one per row, and is what the trainer uses; the scalar helpers exist for
inspection and testing.
"""

import numpy as np

#: Floor applied to the mean reachability distance before inversion.
EPS = 1e-12


def _check_points(points, k_lof):
    points = np.asarray(points, dtype=float)
    if points.ndim != 1:
        raise ValueError(f"expected a 1-D point set, got shape {points.shape}")
    n = points.shape[0]
    if n < 2:
        raise ValueError(f"LOF needs at least 2 points, got {n}")
    if not np.all(np.isfinite(points)):
        raise ValueError("point set contains non-finite values")
    _check_k(k_lof, n)
    return points


def _check_k(k_lof, n):
    if int(k_lof) != k_lof or not 1 <= k_lof <= n - 1:
        raise ValueError(f"k_lof must be an integer in [1, {n - 1}], got {k_lof}")


def pairwise_distance(points):
    """Distance matrix between scalar points, along the last axis.

    Works on a single point set of shape ``(n,)`` or a stack ``(m, n)``.
    """
    points = np.asarray(points, dtype=float)
    return np.abs(points[..., :, None] - points[..., None, :])


def k_distance(points, idx, k_lof):
    """Distance from ``points[idx]`` to its k-th nearest other point.

    Returns
    -------
    d_k : float
    neighbors : ndarray of int
        Indices of every other point within ``d_k``.  Ties at the k-th
        distance are all included, so there can be more than ``k_lof``.
    """
    points = _check_points(points, k_lof)
    d = np.abs(points - points[idx])
    d[idx] = np.inf
    d_k = np.partition(d, k_lof - 1)[k_lof - 1]
    return float(d_k), np.flatnonzero(d <= d_k)


def reachability_distance(d_k_b, d_ab):
    """``max(d_k(B), d(A, B))``."""
    if d_k_b < 0 or d_ab < 0:
        raise ValueError("distances must be non-negative")
    return max(d_k_b, d_ab)


def local_reachability_density(points, idx, k_lof):
    """Inverse of the mean reachability distance from ``idx`` to its neighbours.

    The mean is floored at :data:`EPS`, so co-located points get a finite
    density of ``1 / EPS``.
    """
    points = _check_points(points, k_lof)
    _, neighbors = k_distance(points, idx, k_lof)
    rd = [
        reachability_distance(k_distance(points, b, k_lof)[0], abs(points[idx] - points[b]))
        for b in neighbors
    ]
    return 1.0 / max(sum(rd) / len(rd), EPS)


def lof_scores_batch(rows, k_lof, chunk_size=4096):
    """LOF of every point in every row of ``rows``.

    Parameters
    ----------
    rows : array_like, shape (m, n)
        One point set per row.
    k_lof : int
        Neighbour count, ``1 <= k_lof <= n - 1``.
    chunk_size : int
        Rows processed per vectorised block; bounds memory at roughly
        ``chunk_size * n * n`` floats per temporary.

    Returns
    -------
    ndarray, shape (m, n)
    """
    rows = np.asarray(rows, dtype=float)
    if rows.ndim != 2:
        raise ValueError(f"expected a 2-D array of point sets, got shape {rows.shape}")
    m, n = rows.shape
    if n < 2:
        raise ValueError(f"LOF needs at least 2 points, got {n}")
    _check_k(k_lof, n)
    if not np.all(np.isfinite(rows)):
        raise ValueError("point sets contain non-finite values")

    out = np.empty((m, n))
    diag = np.eye(n, dtype=bool)
    for start in range(0, m, chunk_size):
        block = rows[start:start + chunk_size]
        dist = pairwise_distance(block)
        dist[:, diag] = np.inf
        d_k = np.partition(dist, k_lof - 1, axis=2)[:, :, k_lof - 1]
        neighbors = dist <= d_k[:, :, None]
        count = neighbors.sum(axis=2)
        # rd(A, B) = max(d_k(B), d(A, B)); B runs along the last axis
        reach = np.maximum(d_k[:, None, :], dist)
        mean_reach = np.where(neighbors, reach, 0.0).sum(axis=2) / count
        lrd = 1.0 / np.maximum(mean_reach, EPS)
        neighbor_lrd = np.where(neighbors, lrd[:, None, :], 0.0).sum(axis=2) / count
        out[start:start + chunk_size] = neighbor_lrd / lrd
    return out


def lof_scores(points, k_lof):
    """LOF score of every point in a single 1-D point set."""
    points = _check_points(points, k_lof)
    return lof_scores_batch(points[None, :], k_lof)[0]


def lof_weights(scores, selected=None):
    """Reciprocal-LOF weights over ``selected``, normalised to sum to one.

    ``scores`` may be a 1-D score vector or a 2-D stack (one row per sample);
    ``selected`` indexes the last axis.  In the 2-D case ``selected`` must be
    an integer array of shape ``(m, k)`` and the result has the same shape.
    """
    scores = np.asarray(scores, dtype=float)
    if selected is None:
        picked = scores
    elif scores.ndim == 1:
        selected = np.asarray(selected, dtype=int).reshape(-1)
        picked = scores[selected]
    else:
        picked = np.take_along_axis(scores, np.asarray(selected, dtype=int), axis=-1)
    if picked.shape[-1] == 0:
        raise ValueError("cannot weight an empty selection")
    if np.any(~(picked > 0)) or not np.all(np.isfinite(picked)):
        raise ValueError("LOF scores must be positive and finite")
    inv = 1.0 / picked
    return inv / inv.sum(axis=-1, keepdims=True)
