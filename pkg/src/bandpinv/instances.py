"""Seeded random instances for bound-verification suites.

All generators take a :class:`numpy.random.Generator` (PCG64 via
``numpy.random.default_rng(seed)``) so a 64-bit seed fixes every draw.
"""

from __future__ import annotations

import numpy as np

from .blockmat import BandedBlockMatrix, BlockPartition, certify
from .metric import Graph, graph_geodesic

KINDS = ("psd", "indefinite", "rectangular", "rank_deficient")


def block_tridiagonal(rng, space, row_sizes, col_sizes) -> np.ndarray:
    """Dense matrix whose only nonzero blocks couple path neighbours."""
    row = BlockPartition.from_sizes(space, row_sizes)
    col = BlockPartition.from_sizes(space, col_sizes)
    data = rng.standard_normal((row.dim, col.dim))
    dist = space.dist[np.ix_(row.owner, col.owner)]
    data[dist > 1] = 0.0
    return data


def random_banded(
    rng: np.random.Generator,
    kind: str,
    n_nodes: int,
    max_block: int = 4,
) -> BandedBlockMatrix:
    """Block tridiagonal instance on a path-graph metric with ``n_nodes`` nodes.

    ``kind`` selects a symmetric positive definite, an indefinite square
    (nonsymmetric), a rectangular, or a rectangular instance with some rows
    zeroed out (rank deficient). Block sizes are drawn from ``1..max_block``.
    """
    if kind not in KINDS:
        raise ValueError(f"kind must be one of {KINDS}")
    space = graph_geodesic(Graph.path(n_nodes))
    sizes = rng.integers(1, max_block + 1, size=n_nodes)
    if kind in ("psd", "indefinite"):
        col_sizes = sizes
    else:
        col_sizes = rng.integers(1, max_block + 1, size=n_nodes)
    data = block_tridiagonal(rng, space, sizes, col_sizes)
    if kind == "psd":
        sym = 0.5 * (data + data.T)
        lam = np.linalg.eigvalsh(sym)
        # condition number around 10-50 keeps the bounds away from roundoff
        target = rng.uniform(10.0, 50.0)
        shift = (lam[-1] - target * lam[0]) / (target - 1.0)
        data = sym + shift * np.eye(len(sym))
    elif kind == "rank_deficient":
        rows = rng.choice(data.shape[0], size=max(1, data.shape[0] // 10), replace=False)
        data[rows] = 0.0
    row = BlockPartition.from_sizes(space, sizes)
    col = BlockPartition.from_sizes(space, col_sizes)
    return certify(BandedBlockMatrix(data, row, col))


def random_suite(seed: int, count: int, n_range=(20, 60), max_block: int = 4) -> list[tuple[str, BandedBlockMatrix]]:
    """``count`` instances cycling through :data:`KINDS`."""
    rng = np.random.default_rng(seed)
    out = []
    for i in range(count):
        kind = KINDS[i % len(KINDS)]
        n_nodes = int(rng.integers(n_range[0], n_range[1] + 1))
        out.append((kind, random_banded(rng, kind, n_nodes, max_block)))
    return out


def random_saddle(rng: np.random.Generator, n: int, m: int, rho: float | None = None) -> tuple[np.ndarray, np.ndarray]:
    """``G = M^T M - rho I`` (indefinite allowed) and full-row-rank ``F``.

    ``rho`` defaults to a draw that keeps ``G + F^T F`` positive definite.
    """
    if m > n:
        raise ValueError("need m <= n")
    M = rng.standard_normal((n, n)) / np.sqrt(n)
    F = rng.standard_normal((m, n))
    while np.linalg.matrix_rank(F) < m:
        F = rng.standard_normal((m, n))
    base = M.T @ M
    if rho is None:
        lam = np.linalg.eigvalsh(base + F.T @ F)[0]
        rho = rng.uniform(0.0, 0.9) * lam
    return base - rho * np.eye(n), F


def pairs_at_distances(space, distances) -> list[tuple[tuple[int], tuple[int]]]:
    """Singleton node pairs ``({i}, {j})`` with ``d(i, j)`` in ``distances``, ``i < j`` by label."""
    out = []
    want = np.asarray(sorted(distances), dtype=float)
    for a, i in enumerate(space.nodes):
        for j in space.nodes[a + 1 :]:
            if np.any(np.isclose(space.d(i, j), want)):
                out.append(((i,), (j,)))
    return out


def random_graph(rng: np.random.Generator, n_nodes: int, extra_edges: int | None = None) -> Graph:
    """Connected graph: a random spanning tree plus ``extra_edges`` chords."""
    edges = {(int(rng.integers(1, k)), k) for k in range(2, n_nodes + 1)}
    extra = n_nodes // 3 if extra_edges is None else extra_edges
    for _ in range(extra):
        i, j = rng.integers(1, n_nodes + 1, size=2)
        if i != j:
            edges.add((int(min(i, j)), int(max(i, j))))
    return Graph(list(range(1, n_nodes + 1)), sorted(edges))


def banded_on(rng, row: BlockPartition, col: BlockPartition, kappa: float) -> BandedBlockMatrix:
    """Gaussian entries on blocks within distance ``kappa``, zero elsewhere."""
    data = rng.standard_normal((row.dim, col.dim))
    data[row.space.dist[np.ix_(row.owner, col.owner)] > kappa] = 0.0
    return BandedBlockMatrix(data, row, col)


def random_triple(rng: np.random.Generator, n_range=(5, 15), max_block: int = 3):
    """``(A, B, C)`` on a random graph metric with ``A, B`` sharing partitions
    and ``C`` conformable for ``A @ C``; each is certified by measurement."""
    n = int(rng.integers(n_range[0], n_range[1] + 1))
    space = graph_geodesic(random_graph(rng, n))
    I, J, K = (BlockPartition.from_sizes(space, rng.integers(1, max_block + 1, size=n)) for _ in range(3))
    kA, kB, kC = rng.integers(0, 4, size=3)
    return tuple(certify(banded_on(rng, r, c, k)) for r, c, k in ((I, J, kA), (I, J, kB), (J, K, kC)))
