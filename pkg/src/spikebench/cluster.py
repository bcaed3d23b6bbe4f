"""k-means with k-means++ seeding."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

MAX_ITER = 300
TOL = 1e-6
N_INIT = 10


@dataclass
class ClusterLabels:
    labels: np.ndarray
    k: int
    centroids: np.ndarray
    inertia_history: list = field(default_factory=list)
    n_iter: int = 0


def _sq_dist(x, c):
    return ((x[:, None, :] - c[None, :, :]) ** 2).sum(axis=2)


def kmeans_pp_init(x, k, rng):
    n = len(x)
    centroids = [x[rng.integers(n)]]
    d2 = ((x - centroids[0]) ** 2).sum(axis=1)
    for _ in range(1, k):
        total = d2.sum()
        if total <= 0:
            idx = rng.integers(n)
        else:
            idx = int(np.searchsorted(np.cumsum(d2), rng.random() * total, side="right"))
            idx = min(idx, n - 1)
        centroids.append(x[idx])
        d2 = np.minimum(d2, ((x - x[idx]) ** 2).sum(axis=1))
    return np.array(centroids, dtype=np.float64)


def _lloyd(x, k, rng, max_iter, tol):
    centroids = kmeans_pp_init(x, k, rng)
    history = []
    it = 0
    for it in range(1, max_iter + 1):
        d2 = _sq_dist(x, centroids)
        labels = np.argmin(d2, axis=1)
        history.append(float(d2[np.arange(len(x)), labels].sum()))
        new = np.empty_like(centroids)
        for j in range(k):
            members = labels == j
            if members.any():
                new[j] = x[members].mean(axis=0)
            else:
                far = int(np.argmax(d2[np.arange(len(x)), labels]))
                new[j] = x[far]
                labels[far] = j
                d2[far, labels[far]] = 0.0
        shift = np.sqrt(((new - centroids) ** 2).sum(axis=1)).max()
        centroids = new
        if shift < tol:
            break
    d2 = _sq_dist(x, centroids)
    labels = np.argmin(d2, axis=1)
    history.append(float(d2[np.arange(len(x)), labels].sum()))
    return ClusterLabels(labels=labels, k=k, centroids=centroids, inertia_history=history, n_iter=it)


def kmeans(features, k: int, seed: int = 0, max_iter: int = MAX_ITER, tol: float = TOL,
           n_init: int = N_INIT) -> ClusterLabels:
    """Lloyd iterations from ``n_init`` k-means++ starts; the lowest final
    inertia wins (earliest start on ties).

    Each run stops when no centroid moves more than ``tol`` or after
    ``max_iter`` rounds. A cluster that empties is re-seeded at the point
    farthest from its current centroid.
    """
    x = np.asarray(getattr(features, "values", features), dtype=np.float64)
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if n_init < 1:
        raise ValueError(f"n_init must be >= 1, got {n_init}")
    if len(x) < k:
        raise ValueError(f"need at least k={k} points, got {len(x)}")
    best = None
    for child in np.random.SeedSequence(seed).spawn(n_init):
        res = _lloyd(x, k, np.random.default_rng(child), max_iter, tol)
        if best is None or res.inertia_history[-1] < best.inertia_history[-1]:
            best = res
    return best
