"""Fixed-rank Nystrom approximation of kernel matrices.

Two pipelines share the same landmark blocks ``C`` and ``W``:
:func:`standard_nystrom` truncates ``W`` to rank r before projecting, while
:func:`modified_nystrom` computes the best rank-r approximation of
``C W^+ C^T`` through a thin QR of ``C``.
"""
from .data import DataMatrix, paper_fixture, random_spsd, read_libsvm, subsample
from .kernels import (
    KernelConfig,
    NystromPair,
    bandwidth_heuristic,
    build_kernel_matrix,
    build_nystrom_pair,
    gaussian_kernel,
)
from .landmarks import LandmarkSet, kmeans_landmarks, uniform_sample
from .linalg import FixedRankFactors, best_rank_r, norms, spsd_pinv, sym_evd, thin_qr
from .nystrom import (
    KernelErrors,
    evd_baseline,
    modified_nystrom,
    rank_m_nystrom,
    reconstruct,
    standard_nystrom,
)

__version__ = "0.1.0"

__all__ = [
    "DataMatrix",
    "FixedRankFactors",
    "KernelConfig",
    "KernelErrors",
    "LandmarkSet",
    "NystromPair",
    "bandwidth_heuristic",
    "best_rank_r",
    "build_kernel_matrix",
    "build_nystrom_pair",
    "evd_baseline",
    "gaussian_kernel",
    "kmeans_landmarks",
    "modified_nystrom",
    "norms",
    "paper_fixture",
    "random_spsd",
    "rank_m_nystrom",
    "read_libsvm",
    "reconstruct",
    "spsd_pinv",
    "standard_nystrom",
    "subsample",
    "sym_evd",
    "thin_qr",
    "uniform_sample",
]
