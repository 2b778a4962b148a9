"""Dataset ingestion (LIBSVM text format), generators and fixed test matrices."""
from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, NamedTuple

import numpy as np
from scipy import sparse

from .kernels import DataMatrix

log = logging.getLogger(__name__)


class LibsvmFormatError(ValueError):
    pass


class LibsvmRecord(NamedTuple):
    label: float
    indices: tuple  # 1-based, strictly increasing
    values: tuple


def parse_libsvm_line(line: str, lineno: int = 0) -> LibsvmRecord:
    tokens = line.split()
    if not tokens:
        raise LibsvmFormatError(f"line {lineno}: empty line")
    if "#" in line:
        raise LibsvmFormatError(f"line {lineno}: comments are not supported")
    try:
        label = float(tokens[0])
    except ValueError:
        raise LibsvmFormatError(f"line {lineno}: bad label {tokens[0]!r}") from None
    indices, values = [], []
    last = 0
    for tok in tokens[1:]:
        head, sep, tail = tok.partition(":")
        try:
            if not sep:
                raise ValueError
            idx, val = int(head), float(tail)
        except ValueError:
            raise LibsvmFormatError(f"line {lineno}: malformed feature {tok!r}") from None
        if idx < 1:
            raise LibsvmFormatError(f"line {lineno}: feature index {idx} < 1")
        if idx <= last:
            raise LibsvmFormatError(f"line {lineno}: feature indices not strictly increasing at {idx}")
        if not np.isfinite(val):
            raise LibsvmFormatError(f"line {lineno}: non-finite value for feature {idx}")
        indices.append(idx)
        values.append(val)
        last = idx
    return LibsvmRecord(label, tuple(indices), tuple(values))


def iter_libsvm(path) -> Iterator[LibsvmRecord]:
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            if line.strip():
                yield parse_libsvm_line(line, lineno)


def read_libsvm(path, n_features: int | None = None, dense: bool | None = None) -> DataMatrix:
    """Load a LIBSVM file; labels are parsed and dropped.

    ``p`` is the largest feature index seen unless ``n_features`` is given.
    ``dense=None`` keeps the data sparse when fewer than a quarter of the
    entries are nonzero.
    """
    rows, cols, vals = [], [], []
    n = 0
    for i, rec in enumerate(iter_libsvm(path)):
        rows.extend([i] * len(rec.indices))
        cols.extend(j - 1 for j in rec.indices)
        vals.extend(rec.values)
        n = i + 1
    if n == 0:
        raise LibsvmFormatError(f"{path}: no records")
    p_seen = max(cols) + 1 if cols else 1
    p = p_seen if n_features is None else n_features
    if p < p_seen:
        raise LibsvmFormatError(f"{path}: feature index {p_seen} exceeds declared dimension {p}")
    log.info("read %d points (p=%d) from %s; labels ignored", n, p, path)
    mat = sparse.csr_matrix((vals, (rows, cols)), shape=(n, p), dtype=float)
    if dense is None:
        dense = mat.nnz > 0.25 * n * p
    return DataMatrix(mat.toarray() if dense else mat)


def write_libsvm(path, x: DataMatrix, labels=None) -> None:
    pts = sparse.csr_matrix(x.points)
    labels = np.zeros(x.n) if labels is None else np.asarray(labels, dtype=float)
    with open(path, "w") as fh:
        for i in range(x.n):
            start, stop = pts.indptr[i], pts.indptr[i + 1]
            feats = " ".join(
                f"{j + 1}:{v:.17g}" for j, v in zip(pts.indices[start:stop], pts.data[start:stop]) if v != 0
            )
            fh.write(f"{labels[i]:g} {feats}".rstrip() + "\n")


def subsample(x: DataMatrix, n_sub: int, seed) -> DataMatrix:
    """Uniform subset without replacement, kept in the original row order."""
    if not 1 <= n_sub <= x.n:
        raise ValueError(f"need 1 <= n_sub <= n = {x.n}, got {n_sub}")
    idx = np.sort(np.random.default_rng(seed).choice(x.n, size=n_sub, replace=False))
    return x.take(idx)


@dataclass(frozen=True)
class PaperFixture:
    name: str
    matrix: np.ndarray


_FIXTURES = {
    # 3x3 kernel where truncating W discards the dominant direction
    "example1": [[1.0, 0.0, 10.0],
                 [0.0, 1.01, 0.0],
                 [10.0, 0.0, 100.0]],
    # 4x4 kernel where the QR pipeline loses in Frobenius norm
    "remark2": [[1.0, 0.7, 0.9, 0.4],
                [0.7, 1.0, 0.6, 0.6],
                [0.9, 0.6, 1.0, 0.6],
                [0.4, 0.6, 0.6, 1.0]],
}


def paper_fixture(name: str) -> PaperFixture:
    try:
        rows = _FIXTURES[name]
    except KeyError:
        raise KeyError(f"unknown fixture {name!r}; choose from {sorted(_FIXTURES)}") from None
    mat = np.array(rows, dtype=float)
    mat.setflags(write=False)
    return PaperFixture(name, mat)


def fixture_names() -> list:
    return sorted(_FIXTURES)


def random_spsd(n: int, rank_hint: int, seed) -> np.ndarray:
    """``X^T X`` for a Gaussian ``rank_hint x n`` matrix X."""
    if not 1 <= rank_hint <= n:
        raise ValueError(f"need 1 <= rank_hint <= n, got {rank_hint}, {n}")
    x = np.random.default_rng(seed).standard_normal((rank_hint, n))
    k = x.T @ x
    return 0.5 * (k + k.T)


# Stand-ins for the LIBSVM sets when the files are not available. Dimension
# and class counts follow the public dataset descriptions.
SYNTHETIC_SPECS = {
    "pendigits": dict(p=16, classes=10, kind="dense", scale=100.0),
    "satimage": dict(p=36, classes=6, kind="dense", scale=1.0),
    "w6a": dict(p=300, classes=2, kind="binary", nnz=12),
}


def synthetic_dataset(name: str, n: int, seed) -> DataMatrix:
    """Class-structured synthetic data shaped like a named LIBSVM set.

    Dense kinds draw each class as an anisotropic Gaussian blob around a
    random prototype and clip to ``[0, scale]`` (``[-1, 1]`` for satimage).
    The binary kind draws sparse 0/1 rows whose active features come from
    class-specific popularity profiles.
    """
    try:
        spec = SYNTHETIC_SPECS[name]
    except KeyError:
        raise KeyError(f"no synthetic stand-in for {name!r}; choose from {sorted(SYNTHETIC_SPECS)}") from None
    rng = np.random.default_rng(seed)
    p, k = spec["p"], spec["classes"]
    labels = rng.integers(k, size=n)
    if spec["kind"] == "dense":
        protos = rng.uniform(0.15, 0.85, size=(k, p))
        spread = rng.uniform(0.03, 0.12, size=(k, p))
        x = protos[labels] + spread[labels] * rng.standard_normal((n, p))
        x = np.clip(x, 0.0, 1.0)
        if name == "satimage":
            x = 2.0 * x - 1.0
        else:
            x = spec["scale"] * x
        return DataMatrix(x)
    popularity = rng.dirichlet(np.full(p, 0.3), size=k)
    rows, cols = [], []
    for i, lab in enumerate(labels):
        nnz = max(1, min(p, rng.poisson(spec["nnz"])))
        feats = np.sort(rng.choice(p, size=nnz, replace=False, p=popularity[lab]))
        rows.extend([i] * nnz)
        cols.extend(feats)
    mat = sparse.csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, p))
    return DataMatrix(mat)


LIBSVM_FILENAMES = {
    "pendigits": ("pendigits", "pendigits.txt"),
    "satimage": ("satimage.scale", "satimage", "satimage.scale.txt"),
    "w6a": ("w6a", "w6a.txt"),
    "E2006-tfidf": ("E2006.train", "E2006-tfidf"),
}

DEFAULT_SUBSAMPLE = {"pendigits": 2000, "satimage": 2000, "w6a": 2000, "E2006-tfidf": 1000}


def find_dataset(name: str, data_dir) -> Path | None:
    if data_dir is None:
        return None
    for fname in LIBSVM_FILENAMES.get(name, (name,)):
        path = Path(data_dir) / fname
        if path.is_file():
            return path
    return None


def load_named_dataset(name: str, n: int, seed, data_dir=None) -> tuple[DataMatrix, str]:
    """Subsample of a LIBSVM file from ``data_dir`` if present, else the
    synthetic stand-in. Returns the data and a provenance string."""
    path = find_dataset(name, data_dir)
    if path is not None:
        x = read_libsvm(path)
        if n < x.n:
            x = subsample(x, n, seed)
        return x, f"file:{path}"
    return synthetic_dataset(name, n, seed), f"synthetic:{name}"
