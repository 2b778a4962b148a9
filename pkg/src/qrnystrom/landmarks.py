"""Landmark selection: uniform in-sample sampling and k-means centroids."""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy import sparse

from .kernels import DataMatrix


@dataclass(frozen=True)
class LandmarkSet:
    """Either in-sample row indices into X or explicit out-of-sample points."""

    indices: np.ndarray | None = None
    points: np.ndarray | None = None

    def __post_init__(self):
        if (self.indices is None) == (self.points is None):
            raise ValueError("a LandmarkSet holds exactly one of indices or points")
        if self.indices is not None:
            idx = np.asarray(self.indices, dtype=np.intp)
            if idx.ndim != 1 or idx.size < 1:
                raise ValueError("need at least one landmark index")
            if np.unique(idx).size != idx.size:
                raise ValueError("duplicate landmark indices")
            object.__setattr__(self, "indices", idx)
        else:
            pts = np.atleast_2d(np.asarray(self.points, dtype=float))
            if pts.shape[0] < 1:
                raise ValueError("need at least one landmark point")
            object.__setattr__(self, "points", pts)

    @classmethod
    def in_sample(cls, indices) -> "LandmarkSet":
        return cls(indices=indices)

    @classmethod
    def out_of_sample(cls, points) -> "LandmarkSet":
        return cls(points=points)

    @property
    def is_in_sample(self) -> bool:
        return self.indices is not None

    @property
    def m(self) -> int:
        return len(self.indices) if self.is_in_sample else self.points.shape[0]

    def sampling_matrix(self, n: int) -> np.ndarray:
        """Dense ``P`` with ``C = K P`` and ``W = P^T K P``."""
        if not self.is_in_sample:
            raise ValueError("out-of-sample landmarks have no sampling matrix")
        p = np.zeros((n, self.m))
        p[self.indices, np.arange(self.m)] = 1.0
        return p


def _rng(seed) -> np.random.Generator:
    return np.random.default_rng(seed)


def uniform_sample(n: int, m: int, seed) -> LandmarkSet:
    """m distinct indices drawn uniformly without replacement, in draw order."""
    if not 1 <= m <= n:
        raise ValueError(f"need 1 <= m <= n, got m={m}, n={n}")
    return LandmarkSet.in_sample(_rng(seed).choice(n, size=m, replace=False))


class KMeansResult(NamedTuple):
    centroids: np.ndarray
    labels: np.ndarray
    inertia_history: list
    n_iter: int


def _sq_dists_to(x: DataMatrix, centroids: np.ndarray) -> np.ndarray:
    cross = x.points @ centroids.T
    cross = np.asarray(cross)
    d = x.sq_norms[:, None] + np.einsum("ij,ij->i", centroids, centroids)[None, :] - 2.0 * cross
    return np.maximum(d, 0.0)


def _kmeanspp(x: DataMatrix, m: int, rng: np.random.Generator) -> np.ndarray:
    n = x.n
    chosen = [int(rng.integers(n))]
    closest = _sq_dists_to(x, x.dense_rows([chosen[0]]))[:, 0]
    closest[chosen[0]] = 0.0
    for _ in range(1, m):
        total = closest.sum()
        if total <= 0:
            # Fewer distinct points than m; fill with unused indices.
            pool = np.setdiff1d(np.arange(n), chosen)
            nxt = int(rng.choice(pool))
        else:
            nxt = int(rng.choice(n, p=closest / total))
        chosen.append(nxt)
        d = _sq_dists_to(x, x.dense_rows([nxt]))[:, 0]
        d[nxt] = 0.0
        np.minimum(closest, d, out=closest)
    return x.dense_rows(chosen)


def _update_centroids(x: DataMatrix, labels: np.ndarray, m: int) -> tuple[np.ndarray, np.ndarray]:
    counts = np.bincount(labels, minlength=m)
    onehot = sparse.csr_matrix(
        (np.ones(x.n), (labels, np.arange(x.n))), shape=(m, x.n)
    )
    sums = onehot @ x.points
    sums = sums.toarray() if sparse.issparse(sums) else np.asarray(sums)
    with np.errstate(invalid="ignore", divide="ignore"):
        centroids = sums / counts[:, None]
    return centroids, counts


def lloyd_kmeans(x: DataMatrix, m: int, seed, max_iter: int = 10) -> KMeansResult:
    """Lloyd iterations from k-means++ seeding.

    Stops after ``max_iter`` assignment/update rounds or when assignments stop
    changing. A cluster that empties out is re-seeded with the point farthest
    from its current centroid.
    """
    if not 1 <= m <= x.n:
        raise ValueError(f"need 1 <= m <= n, got m={m}, n={x.n}")
    if max_iter < 1:
        raise ValueError("max_iter must be at least 1")
    rng = _rng(seed)
    centroids = _kmeanspp(x, m, rng)
    d = _sq_dists_to(x, centroids)
    labels = np.argmin(d, axis=1)
    history = [float(d[np.arange(x.n), labels].sum())]
    n_iter = 0
    for n_iter in range(1, max_iter + 1):
        centroids, counts = _update_centroids(x, labels, m)
        for j in np.flatnonzero(counts == 0):
            dist_own = _sq_dists_to(x, np.nan_to_num(centroids))[np.arange(x.n), labels]
            # only steal from clusters that keep at least one point
            donors = np.bincount(labels, minlength=m)[labels] > 1
            far = int(np.argmax(np.where(donors, dist_own, -1.0)))
            labels[far] = j
            centroids, counts = _update_centroids(x, labels, m)
        d = _sq_dists_to(x, centroids)
        new_labels = np.argmin(d, axis=1)
        # keep the current label on exact ties so the objective cannot rise
        own = d[np.arange(x.n), labels]
        new_labels = np.where(d[np.arange(x.n), new_labels] < own, new_labels, labels)
        history.append(float(d[np.arange(x.n), new_labels].sum()))
        if np.array_equal(new_labels, labels):
            break
        labels = new_labels
    centroids, counts = _update_centroids(x, labels, m)
    return KMeansResult(centroids, labels, history, n_iter)


def kmeans_landmarks(x: DataMatrix, m: int, seed, max_iter: int = 10) -> LandmarkSet:
    return LandmarkSet.out_of_sample(lloyd_kmeans(x, m, seed, max_iter).centroids)
