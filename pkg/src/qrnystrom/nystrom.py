"""Fixed-rank Nystrom approximations: the standard pipeline, which truncates
the landmark kernel ``W`` before projecting, and the QR-based pipeline, which
truncates ``C W^+ C^T`` itself.
"""
from __future__ import annotations

import numpy as np
from scipy.optimize import brentq

from .kernels import DEFAULT_DENSE_CAP, NystromPair, check_cap
from .linalg import (
    DEFAULT_REL_TOL,
    CompactQR,
    FixedRankFactors,
    RankError,
    best_rank_r,
    norms,
    spsd_pinv,
    sym_evd,
    symmetrize,
    thin_qr,
)

NORM_NAMES = ("trace", "frobenius", "spectral")


def _check_rank(r: int, m: int) -> None:
    if not 1 <= r <= m:
        raise RankError(f"target rank must satisfy 1 <= r <= m = {m}, got {r}")


def _inv_sqrt_or_zero(values: np.ndarray, cutoff: float) -> np.ndarray:
    out = np.zeros_like(values)
    keep = values > cutoff
    out[keep] = 1.0 / np.sqrt(values[keep])
    return out


def complete_orthonormal(u: np.ndarray, r: int, seed: int = 0) -> np.ndarray:
    """Extend the orthonormal columns of ``u`` to ``r`` columns.

    The new directions come from a QR of a seeded Gaussian block with the
    span of ``u`` projected out twice.
    """
    n, s = u.shape
    if s >= r:
        return u
    if r > n:
        raise RankError(f"cannot build {r} orthonormal columns in dimension {n}")
    block = np.random.default_rng(seed).standard_normal((n, r - s))
    for _ in range(2):
        block -= u @ (u.T @ block)
    return np.hstack([u, thin_qr(block).q])


def rank_m_nystrom(pair: NystromPair, rel_tol: float = DEFAULT_REL_TOL,
                   cap: int | None = DEFAULT_DENSE_CAP) -> np.ndarray:
    """Materialize ``C W^+ C^T``."""
    check_cap(pair.n, cap)
    c = pair.c_block
    return symmetrize(c @ spsd_pinv(pair.w_block, rel_tol) @ c.T)


def standard_nystrom(pair: NystromPair, r: int, rel_tol: float = DEFAULT_REL_TOL) -> FixedRankFactors:
    """Rank-r approximation ``C [[W]]_r^+ C^T`` with its eigendecomposition.

    ``L = C V_r (Sigma_r^+)^{1/2}`` is formed from the top-r eigenpairs of
    ``W``; the r x r matrix ``L^T L`` is then diagonalized to turn ``L`` into
    orthonormal eigenvectors and eigenvalues of ``L L^T``.

    Eigenvalues at or below ``rel_tol`` times the largest are treated as zero.
    If fewer than r survive, ``lambda_hat`` is zero-padded and ``u_hat`` is
    completed to r orthonormal columns.
    """
    c, w = pair.c_block, pair.w_block
    _check_rank(r, pair.m)
    v, sigma = sym_evd(w)
    sigma = np.clip(sigma, 0.0, None)
    scale = _inv_sqrt_or_zero(sigma[:r], rel_tol * sigma[0])
    l_nys = (c @ v[:, :r]) * scale

    v_t, sigma_t = sym_evd(l_nys.T @ l_nys)
    sigma_t = np.clip(sigma_t, 0.0, None)
    keep = sigma_t > rel_tol * sigma_t[0] if sigma_t[0] > 0 else np.zeros(r, bool)
    u_hat = (l_nys @ v_t[:, keep]) / np.sqrt(sigma_t[keep])
    lam = np.where(keep, sigma_t, 0.0)
    if not keep.all():
        u_hat = complete_orthonormal(u_hat, r)
    return FixedRankFactors(u_hat, lam)


def modified_nystrom(pair: NystromPair, r: int, rel_tol: float = DEFAULT_REL_TOL) -> FixedRankFactors:
    """Best rank-r approximation of ``C W^+ C^T`` via a thin QR of ``C``.

    With ``C = Q R`` the n x n problem reduces to the m x m eigenproblem
    ``R W^+ R^T = V' Sigma' V'^T``; the factors are ``Q V'_r`` and
    ``Sigma'_r``. Trailing eigenvalues at or below ``rel_tol`` times the
    largest are reported as zero.
    """
    _check_rank(r, pair.m)
    qr = CompactQR(pair.c_block)
    core = symmetrize(qr.r @ spsd_pinv(pair.w_block, rel_tol) @ qr.r.T)
    v_p, sigma_p = sym_evd(core)
    sigma_p = np.clip(sigma_p, 0.0, None)
    lam = sigma_p[:r].copy()
    lam[lam <= rel_tol * sigma_p[0]] = 0.0
    # Q V'_r without materializing Q
    return FixedRankFactors(qr.q_times(v_p[:, :r]), lam)


def evd_baseline(k: np.ndarray, r: int, cap: int | None = DEFAULT_DENSE_CAP) -> FixedRankFactors:
    check_cap(np.shape(k)[0], cap)
    return best_rank_r(k, r)


def reconstruct(f: FixedRankFactors, cap: int | None = DEFAULT_DENSE_CAP) -> np.ndarray:
    check_cap(f.n, cap)
    return symmetrize((f.u_hat * f.lambda_hat) @ f.u_hat.T)


METHODS = {
    "standard": standard_nystrom,
    "modified": modified_nystrom,
}


class KernelErrors:
    """Relative approximation errors ``|K - G| / |K|`` against a fixed K.

    Up to ``exact_max_n`` points every norm comes from the eigenvalues of the
    materialized difference. Above it, the Frobenius norm uses
    ``|K|_F^2 - 2 tr(L^T K L) + |L^T L|_F^2`` and the trace norm uses
    ``tr(K) - tr(G)`` corrected by the negative eigenvalues of ``K - G``,
    which are located exactly with a rank-r inertia count on the spectrum
    of K. The spectral norm is always computed on the materialized difference.
    """

    def __init__(self, k: np.ndarray, exact_max_n: int = 500):
        self.k = symmetrize(np.asarray(k, dtype=float))
        self.n = self.k.shape[0]
        self.exact_max_n = exact_max_n
        self._spectrum = None
        self.k_norms = norms(self.k, symmetric=True)

    @property
    def spectrum(self):
        if self._spectrum is None:
            values, vectors = np.linalg.eigh(self.k)
            self._spectrum = (np.clip(values, 0.0, None), vectors)
        return self._spectrum

    def absolute(self, f: FixedRankFactors, which=NORM_NAMES) -> dict:
        which = tuple(which)
        for name in which:
            if name not in NORM_NAMES:
                raise ValueError(f"unknown norm {name!r}")
        if self.n <= self.exact_max_n or "spectral" in which:
            diff_norms = norms(self.k - reconstruct(f, cap=None), symmetric=True)._asdict()
            return {name: diff_norms[name] for name in which}
        out = {}
        nz = f.lambda_hat > 0
        l = f.u_hat[:, nz] * np.sqrt(f.lambda_hat[nz])
        if "frobenius" in which:
            gram = l.T @ l
            sq = self.k_norms.frobenius ** 2 - 2.0 * np.sum(l * (self.k @ l)) + np.sum(gram * gram)
            out["frobenius"] = float(np.sqrt(max(sq, 0.0)))
        if "trace" in which:
            out["trace"] = self._trace_norm(l)
        return {name: out[name] for name in which}

    def relative(self, f: FixedRankFactors, which=NORM_NAMES) -> dict:
        absolute = self.absolute(f, which)
        base = self.k_norms._asdict()
        return {name: value / base[name] for name, value in absolute.items()}

    def _trace_norm(self, l: np.ndarray) -> float:
        tr = float(np.trace(self.k) - np.sum(l * l))
        if l.shape[1] == 0:
            return tr
        return tr - 2.0 * sum(self.negative_eigenvalues(l))

    def negative_eigenvalues(self, l: np.ndarray) -> list:
        """Eigenvalues of ``K - L L^T`` below ``-1e-13 tr(K)``.

        For shifts mu < 0 the number of eigenvalues of ``K - L L^T`` below mu
        equals the number of negative eigenvalues of
        ``I - L~^T (D - mu)^{-1} L~`` with ``K = V D V^T`` and ``L~ = V^T L``.
        Each such eigenvalue decreases monotonically in mu, so every crossing
        is bracketed and found with Brent's method.
        """
        d, vecs = self.spectrum
        lt = vecs.T @ l
        r = l.shape[1]
        ident = np.eye(r)

        def shifted(mu, j):
            mat = ident - (lt.T / (d - mu)) @ lt
            return np.linalg.eigvalsh(symmetrize(mat))[j]

        delta = 1e-13 * max(float(np.sum(d)), np.finfo(float).tiny)
        count = int(np.sum(np.linalg.eigvalsh(symmetrize(ident - (lt.T / (d + delta)) @ lt)) < 0))
        if count == 0:
            return []
        lo = -1.01 * float(np.linalg.eigvalsh(l.T @ l)[-1]) - delta
        roots = []
        for j in range(count):
            roots.append(brentq(shifted, lo, -delta, args=(j,), xtol=1e-15 * abs(lo), rtol=4 * np.finfo(float).eps))
        return roots


def trace_error_spsd(k: np.ndarray, f: FixedRankFactors) -> float:
    """``tr(K) - tr(G)``; equals the trace-norm error when ``K - G`` is SPSD."""
    return float(np.trace(k) - np.sum(f.lambda_hat))
