import numpy as np
import pytest

from qrnystrom.data import random_spsd
from qrnystrom.kernels import DataMatrix, KernelConfig, NystromPair, bandwidth_heuristic, build_kernel_matrix, build_nystrom_pair
from qrnystrom.landmarks import kmeans_landmarks, uniform_sample
from qrnystrom.linalg import FixedRankFactors, RankError, best_rank_r, norms, relative_eigengap, spsd_pinv
from qrnystrom.nystrom import (
    KernelErrors,
    complete_orthonormal,
    evd_baseline,
    modified_nystrom,
    rank_m_nystrom,
    reconstruct,
    standard_nystrom,
    trace_error_spsd,
)

from conftest import rel_fro

METHODS = [standard_nystrom, modified_nystrom]


def check_factors(f, n, r):
    assert f.u_hat.shape == (n, r) and f.lambda_hat.shape == (r,)
    assert np.abs(f.u_hat.T @ f.u_hat - np.eye(r)).max() <= 1e-8
    assert np.all(f.lambda_hat >= 0)
    assert np.all(np.diff(f.lambda_hat) <= 0)


def test_rank_m_full_sampling(rng):
    k = random_spsd(9, 9, rng)
    g = rank_m_nystrom(NystromPair.from_kernel(k, np.arange(9)))
    assert rel_fro(g, k) <= 1e-8


def test_rank_m_3x3_fixture(example1):
    g = rank_m_nystrom(NystromPair.from_kernel(example1, [0, 1]))
    np.testing.assert_allclose(g, example1, atol=1e-12)
    assert g[1, 1] == pytest.approx(1.01)


def test_rank_m_zero_w():
    pair = NystromPair(np.zeros((4, 2)), np.zeros((2, 2)))
    np.testing.assert_array_equal(rank_m_nystrom(pair), np.zeros((4, 4)))


def test_3x3_fixture_standard(example1):
    f = standard_nystrom(NystromPair.from_kernel(example1, [0, 1]), 1)
    np.testing.assert_allclose(reconstruct(f), [[0, 0, 0], [0, 1.01, 0], [0, 0, 0]], atol=1e-12)
    assert norms(example1 - reconstruct(f)).trace / 102.01 == pytest.approx(101 / 102.01, abs=1e-12)


def test_3x3_fixture_modified(example1):
    f = modified_nystrom(NystromPair.from_kernel(example1, [0, 1]), 1)
    np.testing.assert_allclose(reconstruct(f), [[1, 0, 10], [0, 0, 0], [10, 0, 100]], atol=1e-12)
    assert norms(example1 - reconstruct(f)).trace / 102.01 == pytest.approx(1.01 / 102.01, abs=1e-12)
    g_evd = reconstruct(evd_baseline(example1, 1))
    np.testing.assert_allclose(reconstruct(f), g_evd, atol=1e-12)


@pytest.mark.parametrize("method, trace, fro", [
    (standard_nystrom, 1.3441, 0.9397),
    (modified_nystrom, 1.3299, 0.9409),
])
def test_4x4_fixture_absolute_errors(remark2, method, trace, fro):
    g = reconstruct(method(NystromPair.from_kernel(remark2, [0, 1]), 1))
    err = norms(remark2 - g)
    assert err.trace == pytest.approx(trace, abs=2e-4)
    assert err.frobenius == pytest.approx(fro, abs=2e-4)


def test_standard_matches_truncated_w_formula(rng):
    k = random_spsd(25, 25, rng)
    pair = NystromPair.from_kernel(k, rng.choice(25, 7, replace=False))
    f = standard_nystrom(pair, 3)
    w_r = reconstruct(best_rank_r(pair.w_block, 3))
    expected = pair.c_block @ spsd_pinv(w_r) @ pair.c_block.T
    assert rel_fro(reconstruct(f), expected) <= 1e-8
    check_factors(f, 25, 3)


def test_m_equals_r_methods_agree(rng):
    for _ in range(20):
        k = random_spsd(20, 20, rng)
        pair = NystromPair.from_kernel(k, rng.choice(20, 4, replace=False))
        full = rank_m_nystrom(pair)
        for method in METHODS:
            assert rel_fro(reconstruct(method(pair, 4)), full) <= 1e-8


def test_modified_oracle_equivalence(rng):
    tested = 0
    while tested < 30:
        k = random_spsd(30, int(rng.integers(8, 31)), rng)
        pair = NystromPair.from_kernel(k, rng.choice(30, 8, replace=False))
        g = rank_m_nystrom(pair)
        if relative_eigengap(np.linalg.eigvalsh(g)[::-1], 3) <= 1e-6:
            continue
        f = modified_nystrom(pair, 3)
        check_factors(f, 30, 3)
        assert rel_fro(reconstruct(f), reconstruct(best_rank_r(g, 3))) <= 1e-8
        tested += 1


def test_rank_checks(example1):
    pair = NystromPair.from_kernel(example1, [0, 1])
    for method in METHODS:
        with pytest.raises(RankError):
            method(pair, 3)
        with pytest.raises(RankError):
            method(pair, 0)


@pytest.mark.parametrize("method", METHODS)
def test_rank_deficient_w_zero_pads(rng, method):
    # K of rank 2, three landmarks, target rank 3
    k = random_spsd(15, 2, rng)
    pair = NystromPair.from_kernel(k, [0, 1, 2])
    f = method(pair, 3)
    check_factors(f, 15, 3)
    assert f.lambda_hat[2] == 0.0
    assert rel_fro(reconstruct(f), rank_m_nystrom(pair)) <= 1e-8


def test_zero_pair_gives_zero_factors():
    pair = NystromPair(np.zeros((5, 2)), np.zeros((2, 2)))
    for method in METHODS:
        f = method(pair, 2)
        check_factors(f, 5, 2)
        np.testing.assert_array_equal(f.lambda_hat, 0.0)


def test_complete_orthonormal(rng):
    u = np.linalg.qr(rng.standard_normal((6, 2)))[0]
    full = complete_orthonormal(u, 4)
    assert np.abs(full.T @ full - np.eye(4)).max() <= 1e-12
    np.testing.assert_array_equal(full[:, :2], u)
    with pytest.raises(RankError):
        complete_orthonormal(u, 7)


def test_reconstruct_examples(rng):
    u = np.linalg.qr(rng.standard_normal((10, 3)))[0]
    np.testing.assert_array_equal(reconstruct(FixedRankFactors(u, np.zeros(3))), 0.0)
    lam = np.array([5.0, 2.0, 0.5])
    g = reconstruct(FixedRankFactors(u, lam))
    np.testing.assert_allclose(np.linalg.eigvalsh(g)[::-1][:3], lam, atol=1e-12)


def test_evd_baseline(rng):
    k = random_spsd(10, 10, rng)
    assert rel_fro(reconstruct(evd_baseline(k, 10)), k) <= 1e-10
    pair = NystromPair.from_kernel(k, rng.choice(10, 5, replace=False))
    best = norms(k - reconstruct(evd_baseline(k, 2)))
    for method in METHODS:
        err = norms(k - reconstruct(method(pair, 2)))
        assert best.trace <= err.trace + 1e-10
        assert best.frobenius <= err.frobenius + 1e-10


def test_in_sample_residual_is_spsd(rng):
    for _ in range(20):
        k = random_spsd(25, int(rng.integers(1, 26)), rng)
        pair = NystromPair.from_kernel(k, rng.choice(25, 6, replace=False))
        for method in METHODS:
            f = method(pair, 3)
            diff = k - reconstruct(f)
            assert np.linalg.eigvalsh(diff).min() >= -1e-8 * norms(k).spectral
            assert trace_error_spsd(k, f) == pytest.approx(norms(diff).trace, rel=1e-8, abs=1e-12)


def _gaussian_problem(rng, n=120, p=4):
    x = DataMatrix(rng.standard_normal((n, p)))
    cfg = KernelConfig(bandwidth_heuristic(x))
    return x, cfg, build_kernel_matrix(x, cfg)


def test_fast_error_path_matches_exact(rng):
    x, cfg, k = _gaussian_problem(rng)
    exact = KernelErrors(k, exact_max_n=10**6)
    fast = KernelErrors(k, exact_max_n=0)
    for seed in range(6):
        lm = kmeans_landmarks(x, 6, seed) if seed % 2 else uniform_sample(x.n, 6, seed)
        pair = build_nystrom_pair(x, lm, cfg)
        for method in METHODS:
            f = method(pair, 2)
            a = exact.relative(f, ("trace", "frobenius"))
            b = fast.relative(f, ("trace", "frobenius"))
            for nm in a:
                assert b[nm] == pytest.approx(a[nm], rel=1e-9)


def test_negative_eigenvalues_found(rng):
    # out-of-sample factors can overshoot K in some directions
    k = np.diag([3.0, 2.0, 1.0, 0.5])
    l = np.array([[2.0], [0.0], [0.0], [1.0]])
    f = FixedRankFactors(np.array([[2.0], [0.0], [0.0], [1.0]]) / np.sqrt(5), np.array([5.0]))
    assert np.allclose(reconstruct(f, cap=None), l @ l.T)
    errs = KernelErrors(k, exact_max_n=0)
    neg = errs.negative_eigenvalues(l)
    expected = np.linalg.eigvalsh(k - l @ l.T)
    np.testing.assert_allclose(sorted(neg), expected[expected < 0], rtol=1e-10)
    assert errs.absolute(f, ("trace",))["trace"] == pytest.approx(np.abs(expected).sum(), rel=1e-10)


def test_kernel_errors_rejects_unknown_norm(example1):
    f = best_rank_r(example1, 1)
    with pytest.raises(ValueError):
        KernelErrors(example1).absolute(f, ("nuclear",))
