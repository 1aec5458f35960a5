"""From-scratch k-means over keypoint vectors (Lloyd's algorithm, k-means++
seeding) behind a scikit-learn-style estimator surface.

Determinism contract: for a given seed, fitting the same points in the
same row order always produces the same clustering. Callers that hold
(id, point) pairs should fit in id-sorted order; ``cluster_points_by_id``
does exactly that and returns the id -> cluster map.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

__all__ = ["KeypointKMeans", "cluster_points_by_id"]


def _sq_dists(X: np.ndarray, centers: np.ndarray) -> np.ndarray:
    # (n, k) squared Euclidean distances
    diff = X[:, None, :] - centers[None, :, :]
    return np.sum(diff * diff, axis=2)


class KeypointKMeans(BaseEstimator):
    """Plain Lloyd iterations with k-means++ initialization.

    Attributes set by :meth:`fit`:

    cluster_centers_ : (n_clusters, d) centroids
    labels_          : cluster index per input row
    inertia_         : sum of squared distances to assigned centroids
    n_iter_          : Lloyd iterations run
    inertia_history_ : inertia after each assignment step (non-increasing)
    """

    def __init__(self, n_clusters: int = 8, max_iter: int = 100, tol: float = 1e-6, seed: int = 0):
        self.n_clusters = n_clusters
        self.max_iter = max_iter
        self.tol = tol
        self.seed = seed

    def fit(self, X) -> "KeypointKMeans":
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2:
            raise ValueError(f"expected a 2-d point matrix, got ndim={X.ndim}")
        n = X.shape[0]
        k = self.n_clusters
        if k < 1:
            raise ValueError("n_clusters must be >= 1")
        if k > n:
            raise ValueError(f"n_clusters={k} exceeds the {n} points available")

        rng = np.random.default_rng(self.seed)
        centers = self._plus_plus_init(X, k, rng)

        history: list[float] = []
        labels = np.zeros(n, dtype=np.int64)
        n_iter = 0
        for n_iter in range(1, self.max_iter + 1):
            d2 = _sq_dists(X, centers)
            labels = np.argmin(d2, axis=1)
            history.append(float(d2[np.arange(n), labels].sum()))

            new_centers = centers.copy()
            for j in range(k):
                members = labels == j
                if np.any(members):
                    new_centers[j] = X[members].mean(axis=0)
            new_centers = self._repair_empty(X, new_centers, labels)

            movement = float(np.sqrt(np.sum((new_centers - centers) ** 2, axis=1)).max())
            centers = new_centers
            if movement < self.tol:
                break

        # final assignment against the converged centroids
        d2 = _sq_dists(X, centers)
        labels = np.argmin(d2, axis=1)
        history.append(float(d2[np.arange(n), labels].sum()))

        self.cluster_centers_ = centers
        self.labels_ = labels
        self.inertia_ = history[-1]
        self.n_iter_ = n_iter
        self.inertia_history_ = history
        return self

    def predict(self, X) -> np.ndarray:
        """Nearest-centroid index per row; ties resolve to the lowest index."""
        if not hasattr(self, "cluster_centers_"):
            raise NotFittedError("call fit before predict")
        X = np.asarray(X, dtype=np.float64)
        single = X.ndim == 1
        if single:
            X = X[None, :]
        if X.shape[1] != self.cluster_centers_.shape[1]:
            raise ValueError(
                f"points have dimension {X.shape[1]}, "
                f"centroids have {self.cluster_centers_.shape[1]}"
            )
        labels = np.argmin(_sq_dists(X, self.cluster_centers_), axis=1)
        return labels[0] if single else labels

    def fit_predict(self, X) -> np.ndarray:
        return self.fit(X).labels_

    @staticmethod
    def _plus_plus_init(X: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
        n = X.shape[0]
        centers = np.empty((k, X.shape[1]), dtype=np.float64)
        centers[0] = X[rng.integers(n)]
        if k == 1:
            return centers
        d2 = np.sum((X - centers[0]) ** 2, axis=1)
        for j in range(1, k):
            total = d2.sum()
            if total > 0:
                idx = int(rng.choice(n, p=d2 / total))
            else:
                # all remaining points coincide with a chosen center
                idx = int(rng.integers(n))
            centers[j] = X[idx]
            d2 = np.minimum(d2, np.sum((X - centers[j]) ** 2, axis=1))
        return centers

    @staticmethod
    def _repair_empty(X: np.ndarray, centers: np.ndarray, labels: np.ndarray) -> np.ndarray:
        """Re-seed each empty centroid at the point farthest from its own
        assigned centroid (the largest current inertia contributor)."""
        counts = np.bincount(labels, minlength=centers.shape[0])
        empty = np.flatnonzero(counts == 0)
        if empty.size == 0:
            return centers
        dist_to_own = np.sum((X - centers[labels]) ** 2, axis=1)
        taken: set[int] = set()
        for j in empty:
            order = np.argsort(-dist_to_own, kind="stable")
            pick = next(int(i) for i in order if int(i) not in taken)
            centers[j] = X[pick]
            taken.add(pick)
            dist_to_own[pick] = 0.0
        return centers


def cluster_points_by_id(
    points: list[tuple[int, np.ndarray]],
    n_clusters: int,
    seed: int,
    max_iter: int = 100,
    tol: float = 1e-6,
) -> tuple[dict[int, int], KeypointKMeans]:
    """Fit k-means over id-keyed points and return (id -> cluster, model).

    Input order does not matter: points are sorted by id before fitting,
    which pins down the determinism contract.
    """
    ordered = sorted(points, key=lambda p: p[0])
    ids = [i for i, _ in ordered]
    X = np.stack([np.asarray(v, dtype=np.float64) for _, v in ordered])
    model = KeypointKMeans(n_clusters=n_clusters, max_iter=max_iter, tol=tol, seed=seed).fit(X)
    return {i: int(c) for i, c in zip(ids, model.labels_)}, model
