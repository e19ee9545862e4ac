"""K-means centroid initialisation and hard label extraction."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import as_matrix


@dataclass
class KMeansResult:
    centroids: np.ndarray
    assignments: np.ndarray
    inertia: float
    iterations: int
    inertia_history: list[float] = field(default_factory=list)


def _sq_dists(x: np.ndarray, c: np.ndarray) -> np.ndarray:
    diff = x[:, None, :] - c[None, :, :]
    return np.einsum("ikd,ikd->ik", diff, diff)


def kmeans_plus_plus(x: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """D^2-weighted seeding; falls back to uniform draws once all points are covered."""
    n = x.shape[0]
    centers = [x[rng.integers(n)]]
    closest = _sq_dists(x, centers[0][None, :])[:, 0]
    for _ in range(1, k):
        total = closest.sum()
        if total > 0:
            idx = int(np.searchsorted(np.cumsum(closest), rng.random() * total, side="right"))
            idx = min(idx, n - 1)
        else:
            idx = int(rng.integers(n))
        centers.append(x[idx])
        closest = np.minimum(closest, _sq_dists(x, x[idx][None, :])[:, 0])
    return np.array(centers)


def kmeans(z, n_clusters: int, rng: np.random.Generator, max_iter: int = 300,
           tol: float = 1e-4) -> KMeansResult:
    """Lloyd's algorithm from a single k-means++ seeding.

    Stops once no centroid moves more than ``tol`` (Euclidean). A cluster
    that empties is re-seeded at the point farthest from its nearest centroid.
    """
    x = as_matrix(z, "z")
    n = x.shape[0]
    if n_clusters < 2:
        raise ValueError("need at least two clusters")
    if n < n_clusters:
        raise ValueError(f"cannot form {n_clusters} clusters from {n} points")

    centroids = kmeans_plus_plus(x, n_clusters, rng)
    history: list[float] = []
    it = 0
    for it in range(1, max_iter + 1):
        d = _sq_dists(x, centroids)
        labels = d.argmin(axis=1)
        inertia = float(d[np.arange(n), labels].sum())
        if history and inertia > history[-1] * (1 + 1e-12) + 1e-12:
            raise AssertionError(f"k-means inertia increased at iteration {it}: {history[-1]} -> {inertia}")
        history.append(inertia)

        new = centroids.copy()
        nearest = d[np.arange(n), labels]
        for c in range(n_clusters):
            members = labels == c
            if members.any():
                new[c] = x[members].mean(axis=0)
            else:
                far = int(nearest.argmax())
                new[c] = x[far]
                nearest[far] = 0.0
        shift = float(np.sqrt(((new - centroids) ** 2).sum(axis=1)).max())
        centroids = new
        if shift < tol:
            break

    d = _sq_dists(x, centroids)
    labels = d.argmin(axis=1)
    inertia = float(d[np.arange(n), labels].sum())
    return KMeansResult(centroids, labels, inertia, it, history)


def hard_labels(q) -> np.ndarray:
    """Row-wise argmax; ties go to the lowest cluster index."""
    return as_matrix(q, "q").argmax(axis=1)
