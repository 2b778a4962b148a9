"""Dense factorizations and norms shared by the approximation pipelines.

Everything here is a pure function of its inputs. Symmetric inputs are
symmetrized as ``(A + A.T) / 2`` before any eigendecomposition, and
eigenvalues are always returned in non-increasing order.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy import linalg as sla

DEFAULT_REL_TOL = 1e-12


class DimensionError(ValueError):
    """Input shapes are incompatible with the requested factorization."""


class RankError(ValueError):
    """Requested rank is outside the admissible range."""


class NotPositiveDefinite(np.linalg.LinAlgError):
    """Matrix is singular to the requested relative tolerance."""


class ThinQR(NamedTuple):
    q: np.ndarray
    r: np.ndarray


class SymEigen(NamedTuple):
    vectors: np.ndarray
    values: np.ndarray


class Norms(NamedTuple):
    frobenius: float
    trace: float
    spectral: float


@dataclass(frozen=True)
class FixedRankFactors:
    """Rank-r approximation ``u_hat @ diag(lambda_hat) @ u_hat.T``.

    ``u_hat`` has orthonormal columns, ``lambda_hat`` is non-negative and
    sorted non-increasing.
    """

    u_hat: np.ndarray
    lambda_hat: np.ndarray

    @property
    def n(self) -> int:
        return self.u_hat.shape[0]

    @property
    def rank(self) -> int:
        return self.lambda_hat.shape[0]

    def sqrt_factor(self) -> np.ndarray:
        """``L`` with ``L @ L.T`` equal to the approximation."""
        return self.u_hat * np.sqrt(self.lambda_hat)


def _as_finite(a, name="input") -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} contains non-finite entries")
    return a


def symmetrize(a: np.ndarray) -> np.ndarray:
    return 0.5 * (a + a.T)


def thin_qr(a) -> ThinQR:
    """Thin QR with a non-negative diagonal on ``r``.

    The sign convention makes the factorization unique for full column rank
    input and reproduces textbook hand computations.
    """
    a = _as_finite(a)
    if a.ndim != 2:
        raise DimensionError("thin_qr expects a 2-D array")
    n, m = a.shape
    if n < m:
        raise DimensionError(f"thin_qr needs n >= m, got {n}x{m}")
    q, r = sla.qr(a, mode="economic", check_finite=False)
    flip = np.diag(r) < 0
    if flip.any():
        q[:, flip] *= -1.0
        r[flip, :] *= -1.0
    return ThinQR(q, np.triu(r))


class CompactQR:
    """Householder QR of a tall matrix kept in LAPACK's compact form.

    ``r`` follows the same sign convention as :func:`thin_qr`. Products
    ``Q @ b`` are applied reflector by reflector, so the n x m factor Q is
    never formed; that is the cheap path when only a few of its
    combinations are needed.
    """

    def __init__(self, a):
        a = _as_finite(a)
        if a.ndim != 2:
            raise DimensionError("CompactQR expects a 2-D array")
        n, m = a.shape
        if n < m:
            raise DimensionError(f"CompactQR needs n >= m, got {n}x{m}")
        (self._h, self._tau), r = sla.qr(a, mode="raw", check_finite=False)
        self._signs = np.where(np.diag(r) < 0, -1.0, 1.0)
        self.r = np.triu(self._signs[:, None] * r)
        self.shape = (n, m)

    def q_times(self, b: np.ndarray) -> np.ndarray:
        """``Q @ b`` for an m x k block ``b``."""
        n, m = self.shape
        b = np.asarray(b, dtype=float)
        k = b.shape[1]
        if k == 0:
            return np.zeros((n, 0))
        pad = np.zeros((n, k), order="F")
        pad[:m] = self._signs[:, None] * b
        ormqr, = sla.get_lapack_funcs(("ormqr",), (self._h,))
        out, _, info = ormqr("L", "N", self._h, self._tau, pad, lwork=64 * max(k, 1), overwrite_c=True)
        if info != 0:
            raise np.linalg.LinAlgError(f"ormqr failed with info={info}")
        return out


def sym_evd(a) -> SymEigen:
    """Full eigendecomposition of a symmetric matrix, descending order."""
    a = _as_finite(a)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionError("sym_evd expects a square matrix")
    values, vectors = np.linalg.eigh(symmetrize(a))
    return SymEigen(vectors[:, ::-1], values[::-1])


def _spsd_spectrum(w, rel_tol):
    """Eigenpairs of an SPSD matrix with roundoff negatives clamped and
    eigenvalues at or below ``rel_tol * max`` flagged as null."""
    if not 0 < rel_tol < 1:
        raise ValueError(f"rel_tol must lie in (0, 1), got {rel_tol}")
    vectors, values = sym_evd(w)
    values = np.clip(values, 0.0, None)
    top = values[0] if values.size else 0.0
    keep = values > rel_tol * top if top > 0 else np.zeros(values.shape, bool)
    return vectors, values, keep


def spsd_pinv(w, rel_tol: float = DEFAULT_REL_TOL) -> np.ndarray:
    """Moore-Penrose pseudo-inverse of an SPSD matrix by eigenvalue thresholding."""
    vectors, values, keep = _spsd_spectrum(w, rel_tol)
    v = vectors[:, keep]
    return symmetrize((v / values[keep]) @ v.T)


def spsd_inv_sqrt(w, rel_tol: float = DEFAULT_REL_TOL) -> np.ndarray:
    """Symmetric inverse square root of a positive definite matrix.

    Raises :class:`NotPositiveDefinite` when any eigenvalue falls at or below
    ``rel_tol`` times the largest one.
    """
    vectors, values, keep = _spsd_spectrum(w, rel_tol)
    if not keep.all():
        raise NotPositiveDefinite(
            f"matrix has thresholded rank {int(keep.sum())} < {keep.size}"
        )
    return symmetrize((vectors / np.sqrt(values)) @ vectors.T)


def norms(a, symmetric: bool | None = None) -> Norms:
    """Frobenius, trace (nuclear) and spectral norms.

    Singular values come from ``|eigvalsh|`` for symmetric input and from an
    SVD otherwise. ``symmetric=None`` detects symmetry exactly.
    """
    a = _as_finite(a)
    if a.size == 0:
        return Norms(0.0, 0.0, 0.0)
    if symmetric is None:
        symmetric = a.ndim == 2 and a.shape[0] == a.shape[1] and np.array_equal(a, a.T)
    if symmetric:
        s = np.abs(np.linalg.eigvalsh(symmetrize(a)))
    else:
        s = np.linalg.svd(a, compute_uv=False)
    return Norms(
        frobenius=float(np.sqrt(np.sum(s * s))),
        trace=float(np.sum(s)),
        spectral=float(np.max(s)),
    )


def best_rank_r(k, r: int) -> FixedRankFactors:
    """Truncated eigendecomposition of an SPSD matrix.

    When the r-th and (r+1)-th eigenvalues tie, whichever eigenvectors the
    solver orders first are kept.
    """
    k = _as_finite(k)
    d = k.shape[0]
    if not 0 < r <= d:
        raise RankError(f"rank must satisfy 0 < r <= {d}, got {r}")
    vectors, values = sym_evd(k)
    return FixedRankFactors(vectors[:, :r].copy(), np.clip(values[:r], 0.0, None))


def relative_eigengap(values: np.ndarray, r: int) -> float:
    """``(lambda_r - lambda_{r+1}) / lambda_1`` for a descending spectrum."""
    values = np.asarray(values)
    if values.size <= r:
        return np.inf
    top = abs(values[0])
    if top == 0:
        return 0.0
    return float((values[r - 1] - values[r]) / top)
