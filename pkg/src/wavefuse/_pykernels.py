"""Pure-numpy fallback for the compiled distance kernels."""

import numpy as np


def _row_sq_dists(points, center):
    diff = points - center
    acc = np.zeros(points.shape[0])
    # sequential accumulation keeps results bitwise equal to the C loop
    for k in range(points.shape[1]):
        acc += diff[:, k] * diff[:, k]
    return acc


def min_sq_dists(points, centers):
    """Squared distance from each point to its nearest center (inf if none)."""
    points = np.ascontiguousarray(points, dtype=np.float64)
    centers = np.ascontiguousarray(centers, dtype=np.float64)
    mind = np.full(points.shape[0], np.inf)
    if centers.shape[0] and points.shape[1] != centers.shape[1]:
        raise ValueError("dimension mismatch between points and centers")
    for c in centers:
        np.minimum(mind, _row_sq_dists(points, c), out=mind)
    return mind


def update_min_sq_dists(points, center, mind):
    """Lower ``mind`` in place with distances to ``points[center]``."""
    np.minimum(mind, _row_sq_dists(points, points[center]), out=mind)


def farthest_first(points, mind, b):
    """Greedy farthest-first traversal.

    ``mind`` holds squared distances to the existing centers and is updated
    in place. Ties go to the lowest index; chosen points are never reused.
    """
    points = np.ascontiguousarray(points, dtype=np.float64)
    chosen = np.zeros(points.shape[0], dtype=bool)
    picks = np.empty(b, dtype=np.int64)
    for step in range(b):
        masked = np.where(chosen, -1.0, mind)
        best = int(np.argmax(masked))
        chosen[best] = True
        picks[step] = best
        update_min_sq_dists(points, best, mind)
    return picks
