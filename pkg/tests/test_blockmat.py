import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from bandpinv.blockmat import (
    BandedBlockMatrix,
    BlockPartition,
    PartitionMismatchError,
    band_product,
    band_sum,
    band_transpose,
    certify,
    load_matrix,
    measure_bandwidth,
    save_matrix,
    spectral_interval,
    svd_factors,
    truncate_to_band,
)
from bandpinv.instances import banded_on, block_tridiagonal, random_triple
from bandpinv.metric import Graph, MalformedInputError, graph_geodesic, line_metric
from bandpinv.ocp import benchmark_scenario, assemble


def _path_matrix(rng, n=6, sizes=(2, 1, 3, 2, 1, 2)):
    space = graph_geodesic(Graph.path(n))
    part = BlockPartition.from_sizes(space, sizes)
    return space, part


def test_block_tridiagonal_bandwidth_one(rng):
    space, part = _path_matrix(rng)
    A = BandedBlockMatrix(block_tridiagonal(rng, space, part.sizes(), part.sizes()), part, part)
    assert measure_bandwidth(A) == 1


def test_block_diagonal_bandwidth_zero(rng):
    space, part = _path_matrix(rng)
    A = banded_on(rng, part, part, 0)
    assert measure_bandwidth(A) == 0
    assert measure_bandwidth(A.with_data(np.zeros(A.shape))) == 0


def test_ocp_matrix_is_h_banded():
    d = assemble(benchmark_scenario(), 20)
    assert measure_bandwidth(d.H) == pytest.approx(d.h, rel=1e-9)


def test_zero_tol_hides_roundoff(rng):
    space, part = _path_matrix(rng)
    A = banded_on(rng, part, part, 1)
    noisy = A.data + 1e-17 * (np.abs(A.data) == 0)
    assert measure_bandwidth(A.with_data(noisy)) == 1
    assert measure_bandwidth(A.with_data(noisy), zero_tol=0.0) == 5


def test_partition_validation():
    space = graph_geodesic(Graph.path(3))
    with pytest.raises(MalformedInputError):
        BlockPartition(space, {1: [0, 1], 2: [1], 3: [2]})
    with pytest.raises(MalformedInputError):
        BlockPartition(space, {1: [0], 2: [1]})
    with pytest.raises(MalformedInputError):
        BlockPartition(space, {1: [0], 2: [], 3: [1]})
    BlockPartition(space, {1: [0], 2: [], 3: [1]}, allow_empty=True)
    with pytest.raises(MalformedInputError):
        BlockPartition(space, {1: [0], 2: [1], 3: [5]})


def test_interleaved_partition():
    space = graph_geodesic(Graph.path(2))
    part = BlockPartition(space, {1: [0, 2], 2: [1, 3]})
    assert not part.is_contiguous()
    assert list(part.owner) == [0, 1, 0, 1]


def test_shape_mismatch():
    space, part = _path_matrix(None)
    with pytest.raises(ValueError):
        BandedBlockMatrix(np.zeros((3, 3)), part, part)
    other = BlockPartition.from_sizes(graph_geodesic(Graph.path(6)), [2, 1, 3, 2, 1, 2])
    other_space = BlockPartition.from_sizes(line_metric(2.0 * np.arange(6)), [2, 1, 3, 2, 1, 2])
    BandedBlockMatrix(np.zeros((11, 11)), part, other)
    with pytest.raises(PartitionMismatchError):
        BandedBlockMatrix(np.zeros((11, 11)), part, other_space)


def test_product_examples(rng):
    space, part = _path_matrix(rng)
    A = certify(banded_on(rng, part, part, 1))
    B = certify(banded_on(rng, part, part, 1))
    P = band_product(A, B)
    assert P.certified_bandwidth == 2
    assert measure_bandwidth(P) <= 2
    I = certify(BandedBlockMatrix(np.eye(part.dim), part, part))
    assert measure_bandwidth(band_product(A, I)) <= 1


def test_product_requires_certificate_and_conformity(rng):
    space, part = _path_matrix(rng)
    A = banded_on(rng, part, part, 1)
    with pytest.raises(ValueError, match="certif"):
        band_product(A, certify(A))
    other = BlockPartition.from_sizes(space, [1] * 6)
    with pytest.raises(PartitionMismatchError):
        band_product(certify(A), certify(banded_on(rng, other, other, 1)))


@given(st.integers(0, 2**32))
def test_bandedness_algebra(seed):
    rng = np.random.default_rng(seed)
    A, B, C = random_triple(rng)
    kA, kB, kC = A.certified_bandwidth, B.certified_bandwidth, C.certified_bandwidth
    assert measure_bandwidth(band_transpose(A)) == kA
    assert measure_bandwidth(band_sum(A, B)) <= max(kA, kB)
    assert measure_bandwidth(band_product(A, C)) <= kA + kC
    assert band_product(A, C).certified_bandwidth == kA + kC


def test_truncate_examples(rng):
    space, part = _path_matrix(rng)
    dense = BandedBlockMatrix(rng.standard_normal((part.dim, part.dim)), part, part)
    assert np.array_equal(truncate_to_band(dense, space.diameter).data, dense.data)
    diag = truncate_to_band(dense, 0)
    assert measure_bandwidth(diag) == 0
    tri = banded_on(rng, part, part, 1)
    assert np.array_equal(truncate_to_band(tri, 1).data, tri.data)
    with pytest.raises(ValueError):
        truncate_to_band(tri, -1)


def test_truncate_keeps_block_diagonal(rng):
    space, part = _path_matrix(rng)
    dense = BandedBlockMatrix(rng.standard_normal((part.dim, part.dim)), part, part)
    diag = truncate_to_band(dense, 0).data
    same = part.owner[:, None] == part.owner[None, :]
    assert np.array_equal(diag[same], dense.data[same])
    assert np.all(diag[~same] == 0)


@given(st.integers(0, 2**32), st.floats(0, 5))
def test_truncate_idempotent(seed, kappa):
    rng = np.random.default_rng(seed)
    A, _, _ = random_triple(rng)
    T1 = truncate_to_band(A, kappa)
    assert np.array_equal(truncate_to_band(T1, kappa).data, T1.data)
    assert measure_bandwidth(T1) <= min(kappa, measure_bandwidth(A))
    assert T1.certified_bandwidth == kappa


def _dense(data, n_nodes=1):
    space = graph_geodesic(Graph.path(n_nodes))
    m, n = data.shape
    return BandedBlockMatrix(data, BlockPartition.from_sizes(space, [m]), BlockPartition.from_sizes(space, [n]))


def test_spectral_interval_examples():
    a, b, r = spectral_interval(_dense(np.diag([3.0, 1.0, 0.0])))
    assert (a, b, r) == (1.0, 3.0, 2)
    assert spectral_interval(_dense(np.eye(5))) == (1.0, 1.0, 5)
    with pytest.raises(ValueError):
        spectral_interval(_dense(np.zeros((2, 2))))


def test_spectral_interval_matches_numpy(rng):
    data = rng.standard_normal((20, 30))
    a, b, r = spectral_interval(_dense(data))
    s = np.linalg.svd(data, compute_uv=False)
    assert r == 20
    assert a == pytest.approx(s[-1], rel=1e-10)
    assert b == pytest.approx(np.linalg.norm(data, 2), rel=1e-10)


def test_svd_factors_orthonormal(rng):
    data = rng.standard_normal((7, 12))
    f = svd_factors(data)
    assert np.all(np.diff(f.singular_values) <= 0)
    assert np.allclose(f.left_vectors.T @ f.left_vectors, np.eye(7), atol=1e-10)
    assert np.allclose(f.right_vectors.T @ f.right_vectors, np.eye(7), atol=1e-10)
    assert np.allclose((f.left_vectors * f.singular_values) @ f.right_vectors.T, data)


def test_save_load_roundtrip(tmp_path, rng):
    space, part = _path_matrix(rng)
    A = certify(banded_on(rng, part, BlockPartition(space, {1: [0, 6], 2: [1], 3: [2], 4: [3], 5: [4], 6: [5]}), 2))
    save_matrix(A, tmp_path / "A.csv", tmp_path / "A.json")
    B = load_matrix(tmp_path / "A.csv", tmp_path / "A.json")
    assert np.array_equal(A.data, B.data)
    assert B.row_part == A.row_part and B.col_part == A.col_part
    assert B.certified_bandwidth == A.certified_bandwidth
