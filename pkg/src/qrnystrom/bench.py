"""Experiment, verification and timing runners behind the CLI.

Every (selection, m, trial) cell draws its landmarks once from the seed
sequence ``(base_seed + trial, m)`` and feeds the same landmarks to every
method, so method comparisons are paired. Landmarks for different m are
drawn independently, not nested.
"""
from __future__ import annotations

import csv
import io
import logging
import time
from collections import defaultdict
from dataclasses import dataclass, field, replace
from typing import Iterable, NamedTuple

import numpy as np

from . import data as data_io
from .kernels import (
    DEFAULT_DENSE_CAP,
    DataMatrix,
    KernelConfig,
    NystromPair,
    bandwidth_heuristic,
    build_kernel_matrix,
    build_nystrom_pair,
)
from .landmarks import LandmarkSet, kmeans_landmarks, uniform_sample
from .linalg import DEFAULT_REL_TOL, norms
from .nystrom import METHODS, NORM_NAMES, KernelErrors, evd_baseline
from .verify import (
    SingularKernelError,
    check_remark1,
    check_theorem1,
    check_theorem2,
    kernel_cholesky,
    relative_fixture_errors,
    theorem3_diagnostics,
)

log = logging.getLogger(__name__)

CSV_HEADER = ("method", "selection", "m", "trial", "norm", "rel_error", "seconds")
ALL_METHODS = ("standard", "modified", "evd")
SELECTIONS = ("uniform", "kmeans", "columns")


class ConfigError(ValueError):
    pass


def fmt(x: float) -> str:
    return f"{x:.10g}"


@dataclass(frozen=True)
class ExperimentConfig:
    data: str | None = None
    fixture: str | None = None
    synthetic: str | None = None
    subsample: int | None = None
    n_features: int | None = None
    rank: int = 2
    m_grid: tuple | None = None
    trials: int = 50
    selections: tuple = ("uniform",)
    methods: tuple = ALL_METHODS
    norms: tuple = ("trace", "frobenius")
    seed: int = 0
    pinv_tol: float = DEFAULT_REL_TOL
    dense_cap: int = DEFAULT_DENSE_CAP
    columns: tuple | None = None
    kmeans_iter: int = 10
    timing: bool = True

    def __post_init__(self):
        sources = [s for s in (self.data, self.fixture, self.synthetic) if s is not None]
        if len(sources) != 1:
            raise ConfigError("give exactly one of data path, fixture or synthetic dataset")
        if self.rank < 1:
            raise ConfigError("rank must be >= 1")
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if self.columns is not None:
            object.__setattr__(self, "columns", tuple(int(c) for c in self.columns))
            object.__setattr__(self, "selections", ("columns",))
            if self.m_grid is None:
                object.__setattr__(self, "m_grid", (len(self.columns),))
            if tuple(self.m_grid) != (len(self.columns),):
                raise ConfigError("with fixed columns the m grid must be exactly [len(columns)]")
        if self.m_grid is None:
            object.__setattr__(self, "m_grid", tuple(self.rank * j for j in range(1, 6)))
        object.__setattr__(self, "m_grid", tuple(int(m) for m in self.m_grid))
        if any(m < self.rank for m in self.m_grid):
            raise ConfigError(f"every m must be >= rank {self.rank}")
        for sel in self.selections:
            if sel not in SELECTIONS:
                raise ConfigError(f"unknown selection {sel!r}")
        for meth in self.methods:
            if meth not in ALL_METHODS:
                raise ConfigError(f"unknown method {meth!r}")
        for nm in self.norms:
            if nm not in NORM_NAMES:
                raise ConfigError(f"unknown norm {nm!r}")
        if self.fixture is not None and "kmeans" in self.selections:
            raise ConfigError("fixtures carry no data points; k-means selection needs --data or --synthetic")


class ExperimentRecord(NamedTuple):
    method: str
    selection: str
    m: int
    trial: int
    rel_error: dict
    seconds: float


@dataclass
class Problem:
    """Kernel matrix plus, when available, the data that produced it."""

    k: np.ndarray
    x: DataMatrix | None
    kernel: KernelConfig | None
    provenance: str
    _errors: KernelErrors | None = field(default=None, repr=False)
    _chol: np.ndarray | None = field(default=None, repr=False)

    @property
    def n(self) -> int:
        return self.k.shape[0]

    @property
    def errors(self) -> KernelErrors:
        if self._errors is None:
            self._errors = KernelErrors(self.k)
        return self._errors

    @property
    def chol(self) -> np.ndarray:
        if self._chol is None:
            self._chol = kernel_cholesky(self.k)
        return self._chol


def load_problem(cfg: ExperimentConfig) -> Problem:
    if cfg.fixture is not None:
        fx = data_io.paper_fixture(cfg.fixture)
        return Problem(np.array(fx.matrix), None, None, f"fixture:{fx.name}")
    if cfg.synthetic is not None:
        n = cfg.subsample or data_io.DEFAULT_SUBSAMPLE.get(cfg.synthetic, 2000)
        x = data_io.synthetic_dataset(cfg.synthetic, n, cfg.seed)
        provenance = f"synthetic:{cfg.synthetic}"
    else:
        x = data_io.read_libsvm(cfg.data, n_features=cfg.n_features)
        if cfg.subsample is not None and cfg.subsample < x.n:
            x = data_io.subsample(x, cfg.subsample, cfg.seed)
        provenance = f"file:{cfg.data}"
    return problem_from_data(x, provenance, cfg.dense_cap)


def problem_from_data(x: DataMatrix, provenance: str, dense_cap: int | None = DEFAULT_DENSE_CAP) -> Problem:
    """Gaussian kernel matrix with the mean-squared-distance bandwidth."""
    kernel = KernelConfig(bandwidth_heuristic(x))
    k = build_kernel_matrix(x, kernel, cap=dense_cap)
    log.info("%s: n=%d p=%d c=%.6g", provenance, x.n, x.p, kernel.bandwidth_c)
    return Problem(k, x, kernel, provenance)


def select_landmarks(problem: Problem, selection: str, m: int, seed, cfg: ExperimentConfig) -> LandmarkSet:
    if selection == "columns":
        return LandmarkSet.in_sample(cfg.columns)
    if m > problem.n:
        raise ConfigError(f"m={m} exceeds n={problem.n}")
    if selection == "uniform":
        return uniform_sample(problem.n, m, seed)
    return kmeans_landmarks(problem.x, m, seed, max_iter=cfg.kmeans_iter)


def landmark_pair(problem: Problem, landmarks: LandmarkSet) -> NystromPair:
    if problem.x is None:
        return NystromPair.from_kernel(problem.k, landmarks.indices)
    return build_nystrom_pair(problem.x, landmarks, problem.kernel)


def cell_seed(base_seed: int, trial: int, m: int) -> tuple:
    return (base_seed + trial, m)


def run_experiment(cfg: ExperimentConfig, problem: Problem | None = None) -> list:
    """One :class:`ExperimentRecord` per (method, selection, m, trial)."""
    problem = problem or load_problem(cfg)
    records = []
    baseline = None
    if "evd" in cfg.methods:
        t0 = time.perf_counter()
        factors = evd_baseline(problem.k, cfg.rank, cap=cfg.dense_cap)
        seconds = time.perf_counter() - t0
        baseline = (problem.errors.relative(factors, cfg.norms), seconds)
    nystrom_methods = [meth for meth in cfg.methods if meth != "evd"]
    for selection in cfg.selections:
        for m in cfg.m_grid:
            for trial in range(cfg.trials):
                landmarks = select_landmarks(problem, selection, m, cell_seed(cfg.seed, trial, m), cfg)
                pair = landmark_pair(problem, landmarks)
                for meth in nystrom_methods:
                    t0 = time.perf_counter()
                    factors = METHODS[meth](pair, cfg.rank, cfg.pinv_tol)
                    seconds = time.perf_counter() - t0
                    errs = problem.errors.relative(factors, cfg.norms)
                    records.append(ExperimentRecord(meth, selection, m, trial, errs, seconds))
                if baseline is not None:
                    records.append(ExperimentRecord("evd", selection, m, trial, baseline[0], baseline[1]))
    return records


def write_records(records: Iterable[ExperimentRecord], fh, norms_order: Iterable[str],
                  timing: bool = True) -> None:
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for rec in records:
        for nm in norms_order:
            writer.writerow([rec.method, rec.selection, rec.m, rec.trial, nm,
                             fmt(rec.rel_error[nm]), fmt(rec.seconds if timing else 0.0)])


def records_to_csv(records, norms_order, timing=True) -> str:
    buf = io.StringIO()
    write_records(records, buf, norms_order, timing)
    return buf.getvalue()


class SummaryRow(NamedTuple):
    method: str
    selection: str
    m: int
    norm: str
    mean: float
    std: float
    trials: int


def summarize(records: Iterable[ExperimentRecord], norms_order) -> list:
    """Mean and population standard deviation per (method, selection, m, norm)."""
    groups = defaultdict(list)
    for rec in records:
        for nm in norms_order:
            groups[(rec.method, rec.selection, rec.m, nm)].append(rec.rel_error[nm])
    return [
        SummaryRow(meth, sel, m, nm, float(np.mean(v)), float(np.std(v)), len(v))
        for (meth, sel, m, nm), v in groups.items()
    ]


def format_summary(rows) -> str:
    lines = [f"{'method':<9} {'selection':<9} {'m':>4} {'norm':<10} {'mean':>12} {'std':>12} {'trials':>6}"]
    for row in rows:
        lines.append(f"{row.method:<9} {row.selection:<9} {row.m:>4} {row.norm:<10} "
                     f"{row.mean:>12.6g} {row.std:>12.6g} {row.trials:>6}")
    return "\n".join(lines)


def baseline_violations(records, norms_order, slack: float = 1e-9) -> list:
    """Cells where a Nystrom error falls below the EVD baseline by more than ``slack`` (relative)."""
    base = {}
    for rec in records:
        if rec.method == "evd":
            base[(rec.selection, rec.m, rec.trial)] = rec.rel_error
    bad = []
    for rec in records:
        ref = base.get((rec.selection, rec.m, rec.trial))
        if rec.method == "evd" or ref is None:
            continue
        for nm in norms_order:
            if ref[nm] > rec.rel_error[nm] + slack:
                bad.append((rec, nm, ref[nm]))
    return bad


# -- timing -----------------------------------------------------------------

class TimingRow(NamedTuple):
    method: str
    selection: str
    m: int
    mean_seconds: float
    std_seconds: float
    trials: int


def run_timing(cfg: ExperimentConfig, problem: Problem | None = None, repeats: int = 3) -> list:
    """Mean wall time of each factorization per (method, selection, m).

    Each trial keeps the fastest of ``repeats`` runs on its landmark blocks;
    kernel construction and landmark selection are not timed.
    """
    problem = problem or load_problem(cfg)
    times = defaultdict(list)
    for selection in cfg.selections:
        for m in cfg.m_grid:
            for trial in range(cfg.trials):
                landmarks = select_landmarks(problem, selection, m, cell_seed(cfg.seed, trial, m), cfg)
                pair = landmark_pair(problem, landmarks)
                for meth in cfg.methods:
                    if meth == "evd":
                        continue
                    best = np.inf
                    for _ in range(repeats):
                        t0 = time.perf_counter()
                        METHODS[meth](pair, cfg.rank, cfg.pinv_tol)
                        best = min(best, time.perf_counter() - t0)
                    times[(meth, selection, m)].append(best)
    return [TimingRow(meth, sel, m, float(np.mean(v)), float(np.std(v)), len(v))
            for (meth, sel, m), v in times.items()]


def timing_csv(rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(("method", "selection", "m", "mean_seconds", "std_seconds", "trials"))
    for row in rows:
        writer.writerow([row.method, row.selection, row.m, fmt(row.mean_seconds), fmt(row.std_seconds), row.trials])
    return buf.getvalue()


def timing_ratios(rows) -> dict:
    """``{(selection, m): mean modified time / mean standard time}``."""
    by = {(r.method, r.selection, r.m): r.mean_seconds for r in rows}
    out = {}
    for (meth, sel, m), t in by.items():
        if meth == "modified" and ("standard", sel, m) in by:
            out[(sel, m)] = t / by[("standard", sel, m)]
    return out


# -- verification suites ------------------------------------------------------

class CheckRow(NamedTuple):
    """One check of ``lhs <= rhs``; ``margin`` is ``(rhs - lhs) / scale``."""

    suite: str
    instance: int
    label: str
    lhs: float
    rhs: float
    margin: float
    holds: bool


@dataclass
class VerificationReport:
    rows: list = field(default_factory=list)

    @property
    def passed(self) -> int:
        return sum(r.holds for r in self.rows)

    @property
    def failed(self) -> int:
        return len(self.rows) - self.passed

    @property
    def ok(self) -> bool:
        return self.failed == 0

    def worst_margin(self, suite: str | None = None) -> float:
        margins = [r.margin for r in self.rows if suite is None or r.suite == suite]
        return min(margins) if margins else np.nan

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CheckRow._fields)
        for r in self.rows:
            writer.writerow([r.suite, r.instance, r.label, fmt(r.lhs), fmt(r.rhs), fmt(r.margin), int(r.holds)])
        return buf.getvalue()

    def summary(self) -> str:
        lines = []
        for suite in dict.fromkeys(r.suite for r in self.rows):
            rows = [r for r in self.rows if r.suite == suite]
            ok = sum(r.holds for r in rows)
            lines.append(f"{suite}: {ok}/{len(rows)} passed, worst margin {self.worst_margin(suite):.3e}")
        lines.append("PASS" if self.ok else f"FAIL ({self.failed} violations)")
        return "\n".join(lines)


def random_inclusion_instance(rng: np.random.Generator, max_n: int = 40, max_m: int = 10):
    """Random SPSD K with r < m <= min(n, max_m) and n <= max_n."""
    n = int(rng.integers(3, max_n + 1))
    m = int(rng.integers(2, min(n, max_m) + 1))
    r = int(rng.integers(1, m))
    rank_hint = int(rng.integers(1, n + 1))
    k = data_io.random_spsd(n, rank_hint, rng)
    idx = rng.choice(n, size=m, replace=False)
    return k, idx, r


def suite_thm1(instances: int, seed) -> list:
    rng = np.random.default_rng(seed)
    rows = []
    for i in range(instances):
        k, idx, r = random_inclusion_instance(rng)
        res = check_theorem1(k, idx, r)
        scale = norms(k, symmetric=True).trace
        rows.append(CheckRow("thm1", i, f"n={k.shape[0]} m={idx.size} r={r}", res.trace_opt, res.trace_nys,
                             (res.trace_nys - res.trace_opt) / scale, res.holds))
    return rows


def suite_thm2(instances: int, seed) -> list:
    rng = np.random.default_rng(seed)
    rows = []
    for i in range(instances):
        k, idx, r = random_inclusion_instance(rng)
        m1 = int(rng.integers(r, idx.size + 1))
        res = check_theorem2(k, idx[:m1], idx, r)
        scale = norms(k, symmetric=True).trace
        rows.append(CheckRow("thm2", i, f"n={k.shape[0]} m1={m1} m2={idx.size} r={r}", res.err_large,
                             res.err_small, (res.err_small - res.err_large) / scale, res.holds))
    return rows


def random_gaussian_problem(rng: np.random.Generator, max_n: int = 300, max_tries: int = 50):
    """Distinct random points whose Gaussian kernel admits a Cholesky factor."""
    for _ in range(max_tries):
        n = int(rng.integers(30, max_n + 1))
        p = int(rng.integers(3, 9))
        x = DataMatrix(rng.standard_normal((n, p)) * rng.uniform(0.5, 2.0, size=p))
        kernel = KernelConfig(bandwidth_heuristic(x))
        k = build_kernel_matrix(x, kernel)
        try:
            chol = np.linalg.cholesky(k)
        except np.linalg.LinAlgError:
            continue
        return Problem(k, x, kernel, "random-gaussian", _chol=chol)
    raise SingularKernelError("could not draw a positive definite Gaussian kernel")


def thm3_row(problem: Problem, landmarks: LandmarkSet, instance: int, label: str, k_spec: float) -> CheckRow:
    pair = landmark_pair(problem, landmarks)
    diag = theorem3_diagnostics(problem.k, pair, k_spectral=k_spec, chol=problem.chol)
    label = f"{label} eta={diag.eta:.3e}"
    if landmarks.is_in_sample:
        # control: an exact sampling matrix must give eta ~ 0
        return CheckRow("thm3-control", instance, label, diag.eta, 1e-10, 1e-10 - diag.eta, diag.eta <= 1e-10)
    return CheckRow("thm3", instance, label, diag.observed_rel_spec, diag.bound,
                    diag.bound - diag.observed_rel_spec, diag.holds and diag.bound_applies)


def suite_thm3(instances: int, seed, selection: str = "kmeans", max_m: int = 10) -> list:
    rng = np.random.default_rng(seed)
    rows = []
    for i in range(instances):
        problem = random_gaussian_problem(rng)
        k_spec = norms(problem.k, symmetric=True).spectral
        m = int(rng.integers(2, max_m + 1))
        sub_seed = int(rng.integers(2**63))
        if selection == "uniform":
            lm = uniform_sample(problem.n, m, sub_seed)
        else:
            lm = kmeans_landmarks(problem.x, m, sub_seed)
        rows.append(thm3_row(problem, lm, i, f"n={problem.n} m={m}", k_spec))
    return rows


def suite_thm3_dataset(cfg: ExperimentConfig, problem: Problem | None = None) -> list:
    """Out-of-sample bound on a dataset over ``cfg.m_grid`` x ``cfg.trials``."""
    problem = problem or load_problem(cfg)
    if problem.x is None:
        raise ConfigError("the thm3 suite needs data points, not a fixture")
    k_spec = norms(problem.k, symmetric=True).spectral
    rows = []
    instance = 0
    for selection in cfg.selections:
        for m in cfg.m_grid:
            for trial in range(cfg.trials):
                lm = select_landmarks(problem, selection, m, cell_seed(cfg.seed, trial, m), cfg)
                rows.append(thm3_row(problem, lm, instance, f"m={m} trial={trial}", k_spec))
                instance += 1
    return rows


def suite_remarks(instances: int, seed) -> list:
    rows = []
    # Decoupled landmark block: both pipelines coincide.
    rng = np.random.default_rng(seed)
    for i in range(instances):
        m = int(rng.integers(2, 7))
        n = m + int(rng.integers(1, 20))
        k = np.zeros((n, n))
        if i == 0:
            # identity block: every eigenvalue ties, so only r = m is well posed
            r = m
            k[:m, :m] = np.eye(m)
        else:
            r = int(rng.integers(1, m + 1))
            k[:m, :m] = data_io.random_spsd(m, m, rng)
        k[m:, m:] = data_io.random_spsd(n - m, int(rng.integers(1, n - m + 1)), rng)
        same = check_remark1(k, m, r)
        rows.append(CheckRow("remark1", i, f"n={n} m={m} r={r}", 0.0, 0.0, 0.0, same))

    # Frobenius reversal on the 4x4 fixture.
    k = data_io.paper_fixture("remark2").matrix
    errs = relative_fixture_errors(k, [0, 1], 1)
    std, mod = errs["standard"]["absolute"], errs["modified"]["absolute"]
    rows.append(CheckRow("remark2-trace", 0, "modified <= standard (trace)", mod["trace"], std["trace"],
                         std["trace"] - mod["trace"], mod["trace"] <= std["trace"]))
    rows.append(CheckRow("remark2-frobenius", 0, "standard < modified (frobenius)", std["frobenius"],
                         mod["frobenius"], mod["frobenius"] - std["frobenius"],
                         std["frobenius"] < mod["frobenius"]))

    # Adding a column hurts the standard pipeline on the 3x3 fixture.
    k = data_io.paper_fixture("example1").matrix
    one = relative_fixture_errors(k, [0], 1)
    two = relative_fixture_errors(k, [0, 1], 1)
    for nm in ("trace", "frobenius"):
        a, b = one["standard"][nm], two["standard"][nm]
        rows.append(CheckRow("remark3-standard", 0, f"err({{0}}) < err({{0,1}}) ({nm})", a, b, b - a, a < b))
        a, b = two["modified"][nm], one["modified"][nm]
        rows.append(CheckRow("remark3-modified", 0, f"err({{0,1}}) <= err({{0}}) ({nm})", a, b, b - a,
                             a <= b + 1e-12))
    return rows


SUITES = ("thm1", "thm2", "thm3", "remarks")


def run_verification(suite: str, instances: int, seed: int = 0, selection: str = "kmeans",
                     cfg: ExperimentConfig | None = None) -> VerificationReport:
    """Run one suite. ``thm3`` uses ``cfg``'s dataset when one is given."""
    if instances < 1:
        raise ConfigError("instances must be >= 1")
    if suite == "thm1":
        rows = suite_thm1(instances, seed)
    elif suite == "thm2":
        rows = suite_thm2(instances, seed)
    elif suite == "thm3":
        if cfg is not None:
            rows = suite_thm3_dataset(replace(cfg, selections=(selection,)))
        else:
            rows = suite_thm3(instances, seed, selection)
    elif suite == "remarks":
        rows = suite_remarks(instances, seed)
    else:
        raise ConfigError(f"unknown suite {suite!r}; choose from {SUITES}")
    return VerificationReport(rows)
