import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import sparse

from qrnystrom.kernels import (
    DataMatrix,
    DegenerateData,
    KernelConfig,
    MemoryBudgetError,
    NystromPair,
    bandwidth_heuristic,
    build_kernel_matrix,
    build_nystrom_pair,
    gaussian_kernel,
    sq_distances,
)
from qrnystrom.landmarks import LandmarkSet


def test_gaussian_kernel_values():
    assert gaussian_kernel([1.0, 2.0], [1.0, 2.0], 3.0) == 1.0
    assert gaussian_kernel([0.0], [2.0], 4.0) == pytest.approx(np.exp(-1))
    assert gaussian_kernel([0, 0], [3, 4], 5.0) == pytest.approx(np.exp(-5), rel=1e-14)
    assert gaussian_kernel([0, 0], [3, 4], 5.0) == pytest.approx(0.0067379, abs=1e-7)


@pytest.mark.parametrize("c", [0.0, -1.0])
def test_gaussian_kernel_rejects_bad_bandwidth(c):
    with pytest.raises(ValueError):
        gaussian_kernel([0], [1], c)
    with pytest.raises(ValueError):
        KernelConfig(c)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-10, 10), min_size=3, max_size=3),
       st.lists(st.floats(-10, 10), min_size=3, max_size=3),
       st.floats(0.1, 100))
def test_gaussian_kernel_symmetric_and_bounded(x, z, c):
    a, b = gaussian_kernel(x, z, c), gaussian_kernel(z, x, c)
    assert a == b
    assert 0.0 <= a <= 1.0


def test_gaussian_kernel_monotone_in_distance():
    vals = [gaussian_kernel([0.0], [t], 2.0) for t in np.linspace(0, 5, 30)]
    assert np.all(np.diff(vals) < 0)


def test_bandwidth_heuristic():
    assert bandwidth_heuristic(DataMatrix([[0.0], [2.0]])) == pytest.approx(1.0)
    assert bandwidth_heuristic(DataMatrix([[0.0], [0.0], [3.0]])) == pytest.approx(2.0)
    with pytest.raises(DegenerateData):
        bandwidth_heuristic(DataMatrix(np.ones((5, 3))))
    with pytest.raises(DegenerateData):
        bandwidth_heuristic(DataMatrix([[1.0, 2.0]]))


def test_bandwidth_heuristic_sparse_matches_dense(rng):
    dense = rng.standard_normal((40, 7)) * (rng.random((40, 7)) < 0.3)
    c_dense = bandwidth_heuristic(DataMatrix(dense))
    c_sparse = bandwidth_heuristic(DataMatrix(sparse.csr_matrix(dense)))
    assert c_sparse == pytest.approx(c_dense, rel=1e-12)
    with pytest.raises(DegenerateData):
        bandwidth_heuristic(DataMatrix(sparse.csr_matrix(np.ones((4, 3)))))


def test_datamatrix_validation():
    with pytest.raises(ValueError):
        DataMatrix([[0.0, np.inf]])
    x = DataMatrix(sparse.csr_matrix(([1.0, 2.0], ([0, 0], [1, 1])), shape=(1, 3)))
    np.testing.assert_array_equal(x.dense(), [[0.0, 3.0, 0.0]])


def test_kernel_matrix_small_cases():
    np.testing.assert_array_equal(build_kernel_matrix(DataMatrix([[1.0, 2.0]]), KernelConfig(1.0)), [[1.0]])
    k = build_kernel_matrix(DataMatrix([[0.0], [2.0]]), KernelConfig(4.0))
    np.testing.assert_allclose(k, [[1, np.exp(-1)], [np.exp(-1), 1]])


@pytest.mark.parametrize("sparse_input", [False, True])
def test_kernel_matrix_spsd(rng, sparse_input):
    pts = rng.standard_normal((50, 4)) * (rng.random((50, 4)) < 0.7)
    x = DataMatrix(sparse.csr_matrix(pts) if sparse_input else pts)
    k = build_kernel_matrix(x, KernelConfig(bandwidth_heuristic(x)))
    assert np.abs(k - k.T).max() <= 1e-12
    np.testing.assert_array_equal(np.diag(k), 1.0)
    assert np.all((k > 0) & (k <= 1))
    assert np.linalg.eigvalsh(k).min() >= -1e-10


def test_sparse_and_dense_kernels_agree(rng):
    pts = rng.standard_normal((30, 6)) * (rng.random((30, 6)) < 0.4)
    cfg = KernelConfig(3.0)
    kd = build_kernel_matrix(DataMatrix(pts), cfg)
    ks = build_kernel_matrix(DataMatrix(sparse.csr_matrix(pts)), cfg)
    np.testing.assert_allclose(ks, kd, atol=1e-12)


def test_sparse_distances_clamped_nonnegative():
    pts = sparse.csr_matrix(np.array([[1e8, 1.0], [1e8, 1.0]]))
    d = sq_distances(DataMatrix(pts), DataMatrix(pts))
    assert d.min() >= 0.0


def test_kernel_matrix_cap():
    x = DataMatrix(np.arange(10.0)[:, None])
    with pytest.raises(MemoryBudgetError):
        build_kernel_matrix(x, KernelConfig(1.0), cap=5)


def test_in_sample_pair_equals_kernel_slices(rng):
    for pts in (rng.standard_normal((60, 5)), sparse.csr_matrix(rng.standard_normal((60, 5)) * (rng.random((60, 5)) < 0.5))):
        x = DataMatrix(pts)
        cfg = KernelConfig(bandwidth_heuristic(x))
        k = build_kernel_matrix(x, cfg)
        idx = np.array([17, 3, 42, 8])
        pair = build_nystrom_pair(x, LandmarkSet.in_sample(idx), cfg)
        p = LandmarkSet.in_sample(idx).sampling_matrix(x.n)
        if not x.is_sparse:
            np.testing.assert_array_equal(pair.c_block, k[:, idx])
            np.testing.assert_array_equal(pair.w_block, k[np.ix_(idx, idx)])
        np.testing.assert_allclose(pair.c_block, k @ p, atol=1e-12)
        np.testing.assert_allclose(pair.w_block, p.T @ k @ p, atol=1e-12)
        np.testing.assert_array_equal(pair.c_block[idx], pair.w_block)
        assert np.abs(pair.w_block - pair.w_block.T).max() <= 1e-12


def test_full_sampling_pair_is_kernel(rng):
    x = DataMatrix(rng.standard_normal((12, 3)))
    cfg = KernelConfig(2.0)
    k = build_kernel_matrix(x, cfg)
    pair = build_nystrom_pair(x, LandmarkSet.in_sample(np.arange(12)), cfg)
    np.testing.assert_array_equal(pair.c_block, k)
    np.testing.assert_array_equal(pair.w_block, k)


def test_3x3_fixture_pair(example1):
    pair = NystromPair.from_kernel(example1, [0, 1])
    np.testing.assert_array_equal(pair.c_block, [[1, 0], [0, 1.01], [10, 0]])
    np.testing.assert_array_equal(pair.w_block, [[1, 0], [0, 1.01]])


def test_out_of_sample_landmark_at_data_point(rng):
    pts = rng.standard_normal((20, 3))
    x = DataMatrix(pts)
    cfg = KernelConfig(1.5)
    k = build_kernel_matrix(x, cfg)
    pair = build_nystrom_pair(x, LandmarkSet.out_of_sample(pts[[5]]), cfg)
    np.testing.assert_allclose(pair.c_block[:, 0], k[:, 5], atol=1e-14)
    np.testing.assert_array_equal(pair.w_block, [[1.0]])


def test_pair_index_errors(rng):
    x = DataMatrix(rng.standard_normal((5, 2)))
    cfg = KernelConfig(1.0)
    with pytest.raises(ValueError):
        build_nystrom_pair(x, LandmarkSet.in_sample([1, 1]), cfg)
    with pytest.raises(IndexError):
        build_nystrom_pair(x, LandmarkSet.in_sample([0, 9]), cfg)
    with pytest.raises(ValueError):
        build_nystrom_pair(x, LandmarkSet.out_of_sample(np.zeros((2, 3))), cfg)
    with pytest.raises(ValueError):
        NystromPair.from_kernel(np.eye(3), [0, 0])
