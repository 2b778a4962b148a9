"""Gaussian kernel matrices and Nystrom blocks from dense or sparse data."""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import TYPE_CHECKING

import numpy as np
from scipy import sparse
from scipy.spatial.distance import cdist

if TYPE_CHECKING:
    from .landmarks import LandmarkSet

DEFAULT_DENSE_CAP = 8000


class DegenerateData(ValueError):
    """All data points coincide, so no bandwidth can be derived."""


class MemoryBudgetError(MemoryError):
    """A dense n x n matrix was requested above the configured cap."""


def check_cap(n: int, cap: int | None) -> None:
    if cap is not None and n > cap:
        raise MemoryBudgetError(
            f"dense {n}x{n} matrix exceeds the cap of {cap} points; "
            "subsample the data or raise the cap"
        )


@dataclass(frozen=True)
class DataMatrix:
    """n points in p dimensions, one point per row.

    ``points`` is either a dense float array or a CSR matrix. Sparse input
    is canonicalized (duplicates summed, column indices sorted).
    """

    points: np.ndarray | sparse.csr_matrix
    sq_norms: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        pts = self.points
        if sparse.issparse(pts):
            pts = sparse.csr_matrix(pts, dtype=float, copy=True)
            pts.sum_duplicates()
            pts.sort_indices()
            data = pts.data
        else:
            pts = np.atleast_2d(np.asarray(pts, dtype=float))
            data = pts
        if pts.ndim != 2 or pts.shape[0] < 1 or pts.shape[1] < 1:
            raise ValueError("DataMatrix needs at least one point of dimension >= 1")
        if not np.all(np.isfinite(data)):
            raise ValueError("DataMatrix coordinates must be finite")
        object.__setattr__(self, "points", pts)
        if sparse.issparse(pts):
            sq = np.asarray(pts.multiply(pts).sum(axis=1)).ravel()
        else:
            sq = np.einsum("ij,ij->i", pts, pts)
        object.__setattr__(self, "sq_norms", sq)

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def p(self) -> int:
        return self.points.shape[1]

    @property
    def is_sparse(self) -> bool:
        return sparse.issparse(self.points)

    def take(self, indices) -> "DataMatrix":
        indices = np.asarray(indices, dtype=np.intp)
        return DataMatrix(self.points[indices])

    def dense_rows(self, indices) -> np.ndarray:
        rows = self.points[np.asarray(indices, dtype=np.intp)]
        return rows.toarray() if self.is_sparse else np.array(rows)

    def dense(self) -> np.ndarray:
        return self.points.toarray() if self.is_sparse else self.points

    def mean(self) -> np.ndarray:
        return np.asarray(self.points.mean(axis=0)).ravel()


class KernelFamily(str, enum.Enum):
    GAUSSIAN = "gaussian"


@dataclass(frozen=True)
class KernelConfig:
    bandwidth_c: float
    family: KernelFamily = KernelFamily.GAUSSIAN

    def __post_init__(self):
        if not (np.isfinite(self.bandwidth_c) and self.bandwidth_c > 0):
            raise ValueError(f"bandwidth_c must be positive, got {self.bandwidth_c}")
        object.__setattr__(self, "family", KernelFamily(self.family))

    def apply(self, sq_dists: np.ndarray) -> np.ndarray:
        return np.exp(-sq_dists / self.bandwidth_c)


@dataclass(frozen=True)
class NystromPair:
    """Cross-kernel block ``c_block`` (n x m) and landmark kernel ``w_block`` (m x m)."""

    c_block: np.ndarray
    w_block: np.ndarray

    @property
    def n(self) -> int:
        return self.c_block.shape[0]

    @property
    def m(self) -> int:
        return self.c_block.shape[1]

    @classmethod
    def from_kernel(cls, k: np.ndarray, indices) -> "NystromPair":
        """Column/principal-submatrix extraction ``C = K P``, ``W = P^T K P``."""
        k = np.asarray(k, dtype=float)
        indices = _check_indices(indices, k.shape[0])
        c = k[:, indices]
        return cls(c, c[indices, :].copy())


def gaussian_kernel(x, z, c: float) -> float:
    if not c > 0:
        raise ValueError(f"bandwidth c must be positive, got {c}")
    diff = np.asarray(x, dtype=float) - np.asarray(z, dtype=float)
    return float(np.exp(-np.dot(diff, diff) / c))


def bandwidth_heuristic(x: DataMatrix) -> float:
    """Mean squared distance of the points to their sample mean (divides by n)."""
    if x.n < 2:
        raise DegenerateData("bandwidth heuristic needs at least two points")
    mu = x.mean()
    if x.is_sparse:
        # E||x||^2 - ||mu||^2 avoids densifying very wide data.
        c = float(x.sq_norms.mean() - mu @ mu)
        scale = float(x.sq_norms.mean())
        if c <= 1e-12 * scale:
            c = 0.0
    else:
        centered = x.points - mu
        c = float(np.einsum("ij,ij->", centered, centered) / x.n)
    if c <= 0:
        raise DegenerateData("all data points are identical")
    return c


def _check_indices(indices, n: int) -> np.ndarray:
    idx = np.asarray(indices)
    if idx.ndim != 1 or idx.size < 1:
        raise ValueError("need at least one landmark index")
    if not np.issubdtype(idx.dtype, np.integer):
        raise TypeError("landmark indices must be integers")
    idx = idx.astype(np.intp)
    if idx.min() < 0 or idx.max() >= n:
        raise IndexError(f"landmark index out of range [0, {n})")
    if np.unique(idx).size != idx.size:
        raise ValueError("duplicate landmark indices")
    return idx


def sq_distances(x: DataMatrix, z: DataMatrix | np.ndarray) -> np.ndarray:
    """Pairwise squared distances between the rows of ``x`` and ``z``.

    Dense pairs go through ``cdist`` so every entry depends only on its two
    points; sparse data uses cached norms, ``|x|^2 + |z|^2 - 2 x.z``,
    clamped at zero.
    """
    if not isinstance(z, DataMatrix):
        z = DataMatrix(z)
    if not (x.is_sparse or z.is_sparse):
        return cdist(x.points, z.points, "sqeuclidean")
    cross = x.points @ z.points.T
    cross = cross.toarray() if sparse.issparse(cross) else np.asarray(cross)
    d = x.sq_norms[:, None] + z.sq_norms[None, :] - 2.0 * cross
    return np.maximum(d, 0.0)


def kernel_block(x: DataMatrix, z, cfg: KernelConfig, self_index=None) -> np.ndarray:
    """``K_ij = kappa(x_i, z_j)``. ``self_index[j]`` marks ``z_j == x[self_index[j]]``."""
    d = sq_distances(x, z)
    if self_index is not None:
        d[np.asarray(self_index), np.arange(d.shape[1])] = 0.0
    return cfg.apply(d)


def build_kernel_matrix(x: DataMatrix, cfg: KernelConfig, cap: int | None = DEFAULT_DENSE_CAP) -> np.ndarray:
    check_cap(x.n, cap)
    d = sq_distances(x, x)
    np.fill_diagonal(d, 0.0)
    if x.is_sparse:
        d = 0.5 * (d + d.T)
    return cfg.apply(d)


def build_nystrom_pair(x: DataMatrix, landmarks: "LandmarkSet", cfg: KernelConfig) -> NystromPair:
    """Form ``C`` and ``W`` for in-sample indices or out-of-sample points."""
    if landmarks.is_in_sample:
        idx = _check_indices(landmarks.indices, x.n)
        c = kernel_block(x, x.take(idx), cfg, self_index=idx)
        return NystromPair(c, c[idx, :].copy())
    z = landmarks.points
    z = z if isinstance(z, DataMatrix) else DataMatrix(z)
    if z.p != x.p:
        raise ValueError(f"landmark dimension {z.p} does not match data dimension {x.p}")
    c = kernel_block(x, z, cfg)
    d = sq_distances(z, z)
    np.fill_diagonal(d, 0.0)
    w = cfg.apply(0.5 * (d + d.T))
    return NystromPair(c, w)
