"""Numpy implementations of the hot kernels.

These define the reference semantics; the compiled module mirrors them.
"""

from __future__ import annotations

import numpy as np

_CHUNK = 1 << 20


def sym_eigh(a: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues (ascending) and column eigenvectors of a stack of symmetric matrices."""
    return np.linalg.eigh(a)


def _flat_targets(centers, offsets, shape):
    n = np.asarray(shape)
    pts = (centers[:, None, :] + offsets[None, :, :]) % n
    return np.ravel_multi_index(tuple(np.moveaxis(pts, -1, 0)), shape)


def stencil_sum(values, shape, centers, offsets, weights):
    """Weighted sums ``sum_q w_q v[c + o_q]`` for every center and value row.

    Parameters
    ----------
    values : ndarray, shape (V, N)
        Flattened fields on the lattice.
    shape : tuple of int
        Lattice shape.
    centers : ndarray of int, shape (K, m)
    offsets : ndarray of int, shape (Q, m)
    weights : ndarray, shape (Q,)

    Returns
    -------
    ndarray, shape (V, K)
    """
    values = np.asarray(values, dtype=float)
    K, Q = centers.shape[0], offsets.shape[0]
    out = np.empty((values.shape[0], K))
    step = max(1, _CHUNK // max(Q, 1))
    for s in range(0, K, step):
        idx = _flat_targets(centers[s:s + step], offsets, shape)
        out[:, s:s + step] = values[:, idx] @ weights
    return out


def stencil_max(values, shape, centers, offsets):
    """Maximum of ``values`` over the stencil around each center and its flat site."""
    values = np.asarray(values, dtype=float)
    K, Q = centers.shape[0], offsets.shape[0]
    best = np.empty(K)
    where = np.empty(K, dtype=np.int64)
    step = max(1, _CHUNK // max(Q, 1))
    for s in range(0, K, step):
        idx = _flat_targets(centers[s:s + step], offsets, shape)
        vals = values[idx]
        j = np.argmax(vals, axis=1)
        rows = np.arange(idx.shape[0])
        best[s:s + step] = vals[rows, j]
        where[s:s + step] = idx[rows, j]
    return best, where


def _torus_sq(points, c, period):
    d = points - c
    d -= period * np.floor(d / period + 0.5)
    return np.einsum("ij,ij->i", d, d)


def greedy_cover(points, period, r):
    """Greedy 2r-separated subset of ``points`` in input order.

    A point is accepted when its torus distance to every accepted point
    exceeds ``2 r``.  Returns the accepted row indices.
    """
    points = np.asarray(points, dtype=float)
    n = points.shape[0]
    if n == 0:
        return np.empty(0, dtype=np.int64)
    lim = (2.0 * r) ** 2
    blocked = np.zeros(n, dtype=bool)
    accepted = []
    for i in range(n):
        if blocked[i]:
            continue
        accepted.append(i)
        blocked |= _torus_sq(points, points[i], period) <= lim
    return np.asarray(accepted, dtype=np.int64)


def min_sq_distance(points, centers, period):
    """Squared torus distance from each point to its nearest center."""
    points = np.asarray(points, dtype=float)
    out = np.full(points.shape[0], np.inf)
    for c in np.asarray(centers, dtype=float):
        np.minimum(out, _torus_sq(points, c, period), out=out)
    return out
