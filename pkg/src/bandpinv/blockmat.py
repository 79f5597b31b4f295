"""Block-partitioned matrices indexed by a finite metric space.

Storage is dense. Bandedness is a certificate carried alongside the data:
``A`` is ``kappa``-banded when every block ``A[I_i, J_j]`` with
``d(i, j) > kappa`` vanishes.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .backend import get_backend
from .metric import MalformedInputError, MetricSpace, metric_from_json

RANK_TOL = 1e-10
ZERO_TOL_REL = 1e-14


class PartitionMismatchError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class BlockPartition:
    """Assignment of every index in ``range(dim)`` to exactly one node.

    Blocks are arbitrary sorted index arrays; contiguous ranges are the
    common case (see :meth:`from_sizes`) but interleaved layouts such as the
    variable-major ordering of a discretized control problem are allowed.
    """

    space: MetricSpace
    blocks: Mapping[int, np.ndarray]
    allow_empty: bool = False
    owner: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        blocks = {}
        for node in self.space.nodes:
            if node not in self.blocks:
                raise MalformedInputError(f"node {node} has no block")
            idx = np.array(np.sort(np.asarray(self.blocks[node], dtype=int).ravel()))
            if len(idx) == 0 and not self.allow_empty:
                raise MalformedInputError(f"node {node} owns an empty block")
            idx.setflags(write=False)
            blocks[node] = idx
        extra = set(self.blocks) - set(self.space.nodes)
        if extra:
            raise MalformedInputError(f"blocks given for nodes outside the metric space: {sorted(extra)}")
        allidx = np.concatenate([blocks[v] for v in self.space.nodes]) if blocks else np.zeros(0, int)
        dim = len(allidx)
        owner = np.full(dim, -1, dtype=int)
        for pos, node in enumerate(self.space.nodes):
            idx = blocks[node]
            if len(idx) and (idx[0] < 0 or idx[-1] >= dim):
                raise MalformedInputError(f"block of node {node} leaves the index range [0, {dim})")
            if np.any(owner[idx] >= 0) or len(np.unique(idx)) != len(idx):
                raise MalformedInputError(f"block of node {node} overlaps another block")
            owner[idx] = pos
        owner.setflags(write=False)
        object.__setattr__(self, "blocks", blocks)
        object.__setattr__(self, "owner", owner)

    @classmethod
    def from_sizes(cls, space: MetricSpace, sizes: Sequence[int], **kwargs) -> "BlockPartition":
        """Contiguous blocks of the given sizes, in node order."""
        if len(sizes) != len(space):
            raise MalformedInputError(f"need {len(space)} block sizes, got {len(sizes)}")
        bounds = np.concatenate([[0], np.cumsum(sizes)]).astype(int)
        return cls(space, {v: np.arange(bounds[k], bounds[k + 1]) for k, v in enumerate(space.nodes)}, **kwargs)

    @classmethod
    def from_ranges(cls, space: MetricSpace, ranges: Mapping, **kwargs) -> "BlockPartition":
        """Blocks from ``{node: [lo, hi]}`` half-open ranges or ``{node: {"indices": [...]}}``."""
        blocks = {}
        for key, r in ranges.items():
            if isinstance(r, Mapping):
                blocks[int(key)] = np.asarray(r["indices"], dtype=int)
            else:
                lo, hi = r
                blocks[int(key)] = np.arange(int(lo), int(hi))
        return cls(space, blocks, **kwargs)

    @property
    def dim(self) -> int:
        return len(self.owner)

    def sizes(self) -> list[int]:
        return [len(self.blocks[v]) for v in self.space.nodes]

    def indices_of(self, nodes) -> np.ndarray:
        """Sorted union of the blocks of ``nodes``."""
        parts = [self.blocks[v] for v in nodes]
        return np.sort(np.concatenate(parts)) if parts else np.zeros(0, int)

    def is_contiguous(self) -> bool:
        return all(len(b) == 0 or b[-1] - b[0] + 1 == len(b) for b in self.blocks.values())

    def to_json(self) -> dict:
        out = {}
        for v, b in self.blocks.items():
            if len(b) and b[-1] - b[0] + 1 == len(b):
                out[str(v)] = [int(b[0]), int(b[-1]) + 1]
            else:
                out[str(v)] = {"indices": [int(i) for i in b]}
        return out

    def __eq__(self, other) -> bool:
        if self is other:
            return True
        if not isinstance(other, BlockPartition):
            return NotImplemented
        return self.space == other.space and all(
            np.array_equal(self.blocks[v], other.blocks[v]) for v in self.space.nodes
        )

    __hash__ = None


@dataclass(frozen=True, eq=False)
class BandedBlockMatrix:
    """Dense matrix with row/column block partitions over one metric space.

    ``certified_bandwidth`` is ``None`` until measured (see :func:`certify`)
    or derived from the bandedness algebra.
    """

    data: np.ndarray
    row_part: BlockPartition
    col_part: BlockPartition
    certified_bandwidth: float | None = None

    def __post_init__(self):
        data = np.array(self.data, dtype=float)
        if data.ndim != 2:
            raise MalformedInputError("matrix data must be 2-D")
        if data.shape != (self.row_part.dim, self.col_part.dim):
            raise PartitionMismatchError(
                f"matrix shape {data.shape} does not match partitions "
                f"({self.row_part.dim}, {self.col_part.dim})"
            )
        if self.row_part.space != self.col_part.space:
            raise PartitionMismatchError("row and column partitions use different metric spaces")
        if self.certified_bandwidth is not None and self.certified_bandwidth < 0:
            raise ValueError("bandwidth must be nonnegative")
        data.setflags(write=False)
        object.__setattr__(self, "data", data)

    @property
    def space(self) -> MetricSpace:
        return self.row_part.space

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape

    @property
    def T(self) -> "BandedBlockMatrix":
        return BandedBlockMatrix(self.data.T, self.col_part, self.row_part, self.certified_bandwidth)

    def entry_distances(self) -> np.ndarray:
        """``d(owner(row), owner(col))`` for every entry, shape ``(m, n)``."""
        return self.space.dist[np.ix_(self.row_part.owner, self.col_part.owner)]

    def block(self, rows_nodes, cols_nodes) -> np.ndarray:
        return self.data[np.ix_(self.row_part.indices_of(rows_nodes), self.col_part.indices_of(cols_nodes))]

    def with_data(self, data, certified_bandwidth=None) -> "BandedBlockMatrix":
        return BandedBlockMatrix(data, self.row_part, self.col_part, certified_bandwidth)

    def check_certificate(self, zero_tol: float | None = None) -> bool:
        """Whether every block beyond the certified bandwidth is zero."""
        if self.certified_bandwidth is None:
            return False
        return measure_bandwidth(self, zero_tol) <= self.certified_bandwidth


@dataclass(frozen=True)
class SvdFactors:
    left_vectors: np.ndarray
    singular_values: np.ndarray
    right_vectors: np.ndarray
    numerical_rank: int


def _default_zero_tol(data: np.ndarray) -> float:
    return ZERO_TOL_REL * float(np.abs(data).max(initial=0.0))


def measure_bandwidth(A: BandedBlockMatrix, zero_tol: float | None = None) -> float:
    """Smallest ``kappa`` such that blocks with ``d(i, j) > kappa`` are zero.

    An entry counts as zero when its magnitude is at most ``zero_tol``
    (default ``1e-14 * max|A|``). An all-zero matrix has bandwidth 0.
    """
    tol = _default_zero_tol(A.data) if zero_tol is None else zero_tol
    rows, cols = np.nonzero(np.abs(A.data) > tol)
    if len(rows) == 0:
        return 0.0
    D = A.space.dist
    return float(D[A.row_part.owner[rows], A.col_part.owner[cols]].max())


def certify(A: BandedBlockMatrix, zero_tol: float | None = None) -> BandedBlockMatrix:
    """Copy of ``A`` carrying its measured bandwidth as the certificate."""
    return replace(A, certified_bandwidth=measure_bandwidth(A, zero_tol))


def _require_bandwidth(A: BandedBlockMatrix, name: str) -> float:
    if A.certified_bandwidth is None:
        raise ValueError(f"{name} has no certified bandwidth; call measure_bandwidth/certify first")
    return A.certified_bandwidth


def band_transpose(A: BandedBlockMatrix) -> BandedBlockMatrix:
    return A.T


def band_sum(A: BandedBlockMatrix, B: BandedBlockMatrix) -> BandedBlockMatrix:
    """``A + B`` certified at ``max(kappa_A, kappa_B)``."""
    if A.row_part != B.row_part or A.col_part != B.col_part:
        raise PartitionMismatchError("band_sum needs identical partitions")
    kappa = max(_require_bandwidth(A, "A"), _require_bandwidth(B, "B"))
    return A.with_data(A.data + B.data, kappa)


def band_product(A: BandedBlockMatrix, C: BandedBlockMatrix) -> BandedBlockMatrix:
    """``A @ C`` certified at ``kappa_A + kappa_C``.

    The certificate is an upper bound; the measured bandwidth may be smaller.
    """
    if A.col_part != C.row_part:
        raise PartitionMismatchError("column partition of A must equal row partition of C")
    kappa = _require_bandwidth(A, "A") + _require_bandwidth(C, "C")
    data = get_backend().matmul(A.data, C.data)
    return BandedBlockMatrix(data, A.row_part, C.col_part, kappa)


def truncate_to_band(A: BandedBlockMatrix, kappa: float) -> BandedBlockMatrix:
    """Zero every block with ``d(i, j) > kappa`` and certify ``kappa``."""
    if kappa < 0:
        raise ValueError("kappa must be nonnegative")
    data = np.array(A.data)
    # relative slack keeps mesh distances like |t_{k+2} - t_k| ~ 2h inside a 2h band
    data[A.entry_distances() > kappa * (1.0 + 1e-12)] = 0.0
    return A.with_data(data, float(kappa))


def svd_factors(A, rank_tol: float = RANK_TOL) -> SvdFactors:
    """Thin SVD with the numerical rank ``#{sigma > rank_tol * sigma_max}``."""
    data = A.data if isinstance(A, BandedBlockMatrix) else np.asarray(A, dtype=float)
    U, s, Vt = get_backend().svd(data)
    rank = int(np.count_nonzero(s > rank_tol * s[0])) if len(s) and s[0] > 0 else 0
    return SvdFactors(U, s, Vt.T, rank)


def spectral_interval(A, rank_tol: float = RANK_TOL) -> tuple[float, float, int]:
    """``(a, b, rank)`` with ``[a, b]`` the span of the nonzero singular values.

    ``a`` is the smallest singular value above ``rank_tol * sigma_max`` and
    ``b = sigma_max = ||A||_2``.
    """
    data = A.data if isinstance(A, BandedBlockMatrix) else np.asarray(A, dtype=float)
    s = get_backend().singular_values(data)
    if len(s) == 0 or s[0] == 0.0:
        raise ValueError("matrix is zero; it has no nonzero singular values")
    kept = s[s > rank_tol * s[0]]
    return float(kept[-1]), float(s[0]), int(len(kept))


def save_matrix(A: BandedBlockMatrix, csv_path, sidecar_path) -> None:
    """Write dense entries as CSV and partitions plus metric as a JSON sidecar."""
    np.savetxt(csv_path, A.data, delimiter=",", fmt="%.17g")
    sidecar = {
        "row_blocks": A.row_part.to_json(),
        "col_blocks": A.col_part.to_json(),
        "metric": A.space.to_json(),
    }
    if A.certified_bandwidth is not None:
        sidecar["certified_bandwidth"] = A.certified_bandwidth
    Path(sidecar_path).write_text(json.dumps(sidecar, indent=2))


def load_matrix(csv_path, sidecar_path) -> BandedBlockMatrix:
    """Inverse of :func:`save_matrix`.

    The sidecar ``metric`` entry is either an inline metric document or a
    path (relative to the sidecar) to one.
    """
    sidecar_path = Path(sidecar_path)
    side = json.loads(sidecar_path.read_text())
    ref = side.get("metric")
    if ref is None:
        raise MalformedInputError("sidecar needs a 'metric' entry")
    if isinstance(ref, str):
        ref = sidecar_path.parent / ref
    space = metric_from_json(ref)
    data = np.loadtxt(csv_path, delimiter=",", ndmin=2)
    row = BlockPartition.from_ranges(space, side["row_blocks"])
    col = BlockPartition.from_ranges(space, side["col_blocks"])
    return BandedBlockMatrix(data, row, col, side.get("certified_bandwidth"))
