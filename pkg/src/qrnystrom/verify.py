"""Numerical checks of the trace-norm guarantees and the out-of-sample bound.

The in-sample checks compare the two pipelines on materialized matrices.
The out-of-sample diagnostics build the empirical landmark kernel
``W_e = C^T K^{-1} C`` and compare ``C W^+ C^T`` against ``C W_e^+ C^T``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy import linalg as sla

from .kernels import NystromPair, check_cap
from .linalg import (
    DEFAULT_REL_TOL,
    norms,
    spsd_inv_sqrt,
    spsd_pinv,
    symmetrize,
    thin_qr,
)
from .nystrom import modified_nystrom, reconstruct, standard_nystrom

DIAGNOSTICS_CAP = 4000


class SingularKernelError(np.linalg.LinAlgError):
    """Kernel matrix is not numerically positive definite."""


def kernel_cholesky(k, cap: int | None = DIAGNOSTICS_CAP) -> np.ndarray:
    """Lower Cholesky factor of K; raises :class:`SingularKernelError`."""
    k = np.asarray(k, dtype=float)
    check_cap(k.shape[0], cap)
    try:
        return np.linalg.cholesky(symmetrize(k))
    except np.linalg.LinAlgError as exc:
        raise SingularKernelError(f"kernel matrix is not positive definite: {exc}") from None


def empirical_inner_matrix(k, c_block, cap: int | None = DIAGNOSTICS_CAP, chol=None) -> np.ndarray:
    """``C^T K^{-1} C`` through a Cholesky factor ``K = G G^T``.

    Computed as ``B^T B`` with ``B = G^{-1} C`` so the result is symmetric
    positive semidefinite by construction. Pass ``chol`` to reuse G.
    """
    g = kernel_cholesky(k, cap) if chol is None else chol
    b = sla.solve_triangular(g, np.asarray(c_block, dtype=float), lower=True, check_finite=False)
    return symmetrize(b.T @ b)


def _spectral_of_projected(c: np.ndarray, core: np.ndarray) -> float:
    """``||C M C^T||_2`` as ``||R M R^T||_2`` with ``C = Q R`` (requires n >= m)."""
    r = thin_qr(c).r
    return norms(symmetrize(r @ core @ r.T), symmetric=True).spectral


@dataclass(frozen=True)
class OutOfSampleDiagnostics:
    w_e: np.ndarray
    e_mat: np.ndarray
    eta: float
    observed_rel_spec: float
    bound: float

    @property
    def bound_applies(self) -> bool:
        return self.eta < 1.0

    @property
    def holds(self) -> bool:
        return (not self.bound_applies) or self.observed_rel_spec <= self.bound + 1e-9


def theorem3_diagnostics(k, pair: NystromPair, rel_tol: float = DEFAULT_REL_TOL,
                         k_spectral: float | None = None, chol=None) -> OutOfSampleDiagnostics:
    """Relative perturbation ``eta`` of the landmark kernel and the resulting
    spectral gap between the two rank-m Nystrom approximations.

    ``bound = eta / (1 - eta)`` when ``eta < 1``, else ``inf``.
    """
    k = np.asarray(k, dtype=float)
    c, w = pair.c_block, pair.w_block
    w_e = empirical_inner_matrix(k, c, chol=chol)
    e_mat = symmetrize(w - w_e)
    scale = spsd_inv_sqrt(w_e, rel_tol)
    eta = norms(symmetrize(scale @ e_mat @ scale), symmetric=True).spectral
    if k_spectral is None:
        k_spectral = norms(k, symmetric=True).spectral
    gap = symmetrize(spsd_pinv(w, rel_tol) - spsd_pinv(w_e, rel_tol))
    observed = _spectral_of_projected(c, gap) / k_spectral
    bound = eta / (1.0 - eta) if eta < 1.0 else np.inf
    return OutOfSampleDiagnostics(w_e, e_mat, float(eta), float(observed), float(bound))


class Theorem1Check(NamedTuple):
    trace_nys: float
    trace_opt: float
    holds: bool


class Theorem2Check(NamedTuple):
    err_small: float
    err_large: float
    holds: bool


def _trace_error(k, f) -> float:
    return norms(k - reconstruct(f, cap=None), symmetric=True).trace


def check_theorem1(k, indices, r: int, rel_tol: float = DEFAULT_REL_TOL, slack: float = 1e-9) -> Theorem1Check:
    """Trace-norm errors of both pipelines on the same in-sample columns."""
    k = np.asarray(k, dtype=float)
    pair = NystromPair.from_kernel(k, indices)
    if pair.m < r:
        raise ValueError(f"need m >= r, got m={pair.m}, r={r}")
    tr_nys = _trace_error(k, standard_nystrom(pair, r, rel_tol))
    tr_opt = _trace_error(k, modified_nystrom(pair, r, rel_tol))
    k_trace = norms(k, symmetric=True).trace
    return Theorem1Check(tr_nys, tr_opt, tr_opt <= tr_nys + slack * k_trace)


def check_theorem2(k, indices_small, indices_large, r: int, rel_tol: float = DEFAULT_REL_TOL,
                   slack: float = 1e-9) -> Theorem2Check:
    """Trace-norm error of the QR pipeline before and after adding columns.

    ``indices_large`` must start with ``indices_small`` or contain it.
    """
    k = np.asarray(k, dtype=float)
    small = np.asarray(indices_small)
    large = np.asarray(indices_large)
    if not set(small.tolist()) <= set(large.tolist()):
        raise ValueError("indices_small must be a subset of indices_large")
    if small.size < r:
        raise ValueError(f"need |indices_small| >= r, got {small.size} < {r}")
    err_small = _trace_error(k, modified_nystrom(NystromPair.from_kernel(k, small), r, rel_tol))
    if small.size == large.size:
        err_large = err_small
    else:
        err_large = _trace_error(k, modified_nystrom(NystromPair.from_kernel(k, large), r, rel_tol))
    k_trace = norms(k, symmetric=True).trace
    return Theorem2Check(err_small, err_large, err_large <= err_small + slack * k_trace)


def check_remark1(k_blocked, m: int, r: int, rel_tol: float = DEFAULT_REL_TOL, tol: float = 1e-8) -> bool:
    """Both pipelines agree when the first m columns are decoupled from the rest."""
    k = np.asarray(k_blocked, dtype=float)
    pair = NystromPair.from_kernel(k, np.arange(m))
    g_nys = reconstruct(standard_nystrom(pair, r, rel_tol), cap=None)
    g_opt = reconstruct(modified_nystrom(pair, r, rel_tol), cap=None)
    scale = max(np.linalg.norm(g_opt), np.finfo(float).tiny)
    return bool(np.linalg.norm(g_nys - g_opt) <= tol * scale)


def relative_fixture_errors(k, indices, r: int, rel_tol: float = DEFAULT_REL_TOL) -> dict:
    """``{method: {norm: relative error}}`` for both pipelines on fixed columns."""
    k = np.asarray(k, dtype=float)
    pair = NystromPair.from_kernel(k, indices)
    base = norms(k, symmetric=True)._asdict()
    out = {}
    for name, fn in (("standard", standard_nystrom), ("modified", modified_nystrom)):
        diff = norms(k - reconstruct(fn(pair, r, rel_tol), cap=None), symmetric=True)._asdict()
        out[name] = {key: diff[key] / base[key] for key in base}
        out[name]["absolute"] = diff
    return out
