"""Finite metric spaces indexing the blocks of a banded matrix.

A :class:`MetricSpace` is an ordered list of positive integer node labels
plus a full symmetric distance table. Two constructions are provided: the
unweighted geodesic distance of a connected graph, and the absolute
difference of points on a line (used for time meshes).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import shortest_path

MAX_NODES = 5000
EXACT_TRIANGLE_LIMIT = 300
TRIANGLE_SAMPLES = 200_000
ZERO_DIST_TOL = 1e-12


class MalformedInputError(ValueError):
    """Raised for distance tables or graphs that cannot be interpreted."""


class MetricError(ValueError):
    """Raised when a table fails the metric axioms or a graph is unusable."""


@dataclass(frozen=True)
class Violation:
    """One failed metric axiom.

    ``axiom`` is one of ``"a"`` (nonnegativity), ``"b"`` (zero exactly on the
    diagonal), ``"c"`` (symmetry) or ``"d"`` (triangle inequality).
    ``witness`` holds node labels: a pair for (a)-(c), and a triple
    ``(i, j, k)`` with ``d(i, j) > d(i, k) + d(k, j)`` for (d).
    """

    axiom: str
    witness: tuple[int, ...]
    detail: str = ""


def _as_table(nodes: Sequence[int], dist) -> tuple[tuple[int, ...], np.ndarray]:
    nodes = tuple(int(v) for v in nodes)
    try:
        table = np.array(dist, dtype=float)
    except (TypeError, ValueError) as exc:
        raise MalformedInputError(f"distance table is not numeric: {exc}") from None
    n = len(nodes)
    if table.ndim != 2 or table.shape != (n, n):
        raise MalformedInputError(
            f"distance table must be {n}x{n} to match the node list, got shape {table.shape}"
        )
    if not np.all(np.isfinite(table)):
        raise MalformedInputError("distance table has non-finite entries")
    if len(set(nodes)) != n:
        raise MalformedInputError("node labels must be unique")
    if any(v <= 0 for v in nodes):
        raise MalformedInputError("node labels must be positive integers")
    return nodes, table


def validate_metric(
    nodes: Sequence[int],
    dist,
    *,
    exact_limit: int = EXACT_TRIANGLE_LIMIT,
    samples: int = TRIANGLE_SAMPLES,
    seed: int = 0,
    max_per_axiom: int = 100,
) -> list[Violation]:
    """Check the four metric axioms on a square distance table.

    The triangle inequality is checked on every triple when there are at most
    ``exact_limit`` nodes and on ``samples`` seeded random triples otherwise.
    An empty list means the table is a metric. At most ``max_per_axiom``
    witnesses are reported per axiom.
    """
    nodes, D = _as_table(nodes, dist)
    n = len(nodes)
    label = np.asarray(nodes)
    report: list[Violation] = []

    def pairs(mask: np.ndarray, axiom: str, what: str) -> None:
        ii, jj = np.nonzero(mask)
        for i, j in list(zip(ii, jj))[:max_per_axiom]:
            report.append(Violation(axiom, (int(label[i]), int(label[j])), f"{what}: d={float(D[i, j])!r}"))

    pairs(D < 0, "a", "negative distance")
    off = ~np.eye(n, dtype=bool)
    pairs(np.eye(n, dtype=bool) & (np.abs(D) > ZERO_DIST_TOL), "b", "nonzero self-distance")
    pairs(off & (np.abs(D) <= ZERO_DIST_TOL), "b", "zero distance between distinct nodes")
    pairs(D != D.T, "c", "asymmetric")

    scale = max(1.0, float(np.abs(D).max(initial=0.0)))
    tol = 1e-12 * scale
    found = 0
    if n <= exact_limit:
        for k in range(n):
            excess = D - (D[:, k][:, None] + D[k, :][None, :])
            ii, jj = np.nonzero(excess > tol)
            for i, j in zip(ii, jj):
                if found >= max_per_axiom:
                    break
                report.append(
                    Violation("d", (int(label[i]), int(label[j]), int(label[k])), f"excess {float(excess[i, j])!r}")
                )
                found += 1
            if found >= max_per_axiom:
                break
    else:
        rng = np.random.default_rng(seed)
        i, j, k = rng.integers(0, n, size=(3, samples))
        excess = D[i, j] - D[i, k] - D[k, j]
        for t in np.nonzero(excess > tol)[0][:max_per_axiom]:
            report.append(
                Violation("d", (int(label[i[t]]), int(label[j[t]]), int(label[k[t]])), f"excess {float(excess[t])!r}")
            )
    return report


@dataclass(frozen=True, eq=False)
class MetricSpace:
    """Finite metric space with node labels and a read-only distance table.

    Use :meth:`from_table`, :func:`graph_geodesic` or :func:`line_metric` to
    build one; the raw constructor trusts its input.
    """

    nodes: tuple[int, ...]
    dist: np.ndarray
    coords: np.ndarray | None = None
    _index: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        self.dist.setflags(write=False)
        if self.coords is not None:
            self.coords.setflags(write=False)
        object.__setattr__(self, "_index", {v: i for i, v in enumerate(self.nodes)})

    @classmethod
    def from_table(cls, nodes: Sequence[int], dist, *, max_nodes: int = MAX_NODES, **kwargs) -> "MetricSpace":
        """Validate ``dist`` against the metric axioms and wrap it."""
        nodes, table = _as_table(nodes, dist)
        if len(nodes) > max_nodes:
            raise MalformedInputError(f"{len(nodes)} nodes exceeds the limit of {max_nodes}")
        report = validate_metric(nodes, table, **kwargs)
        if report:
            first = report[0]
            raise MetricError(
                f"{len(report)} metric violation(s); first: axiom ({first.axiom}) at {first.witness} {first.detail}"
            )
        return cls(nodes, table)

    def __len__(self) -> int:
        return len(self.nodes)

    def __eq__(self, other) -> bool:
        if self is other:
            return True
        if not isinstance(other, MetricSpace):
            return NotImplemented
        return self.nodes == other.nodes and np.array_equal(self.dist, other.dist)

    def __hash__(self) -> int:
        return hash((self.nodes, self.dist.shape))

    def index(self, node: int) -> int:
        try:
            return self._index[node]
        except KeyError:
            raise KeyError(f"node {node} is not in the metric space") from None

    def indices(self, nodes: Iterable[int]) -> np.ndarray:
        return np.array([self.index(v) for v in nodes], dtype=int)

    def d(self, i: int, j: int) -> float:
        return float(self.dist[self.index(i), self.index(j)])

    @property
    def diameter(self) -> float:
        return float(self.dist.max(initial=0.0))

    def to_json(self) -> dict:
        return {"nodes": list(self.nodes), "dist": self.dist.tolist()}


@dataclass(frozen=True)
class Graph:
    """Undirected unweighted graph on positive integer node labels."""

    nodes: tuple[int, ...]
    edges: frozenset[frozenset[int]]

    def __init__(self, nodes: Sequence[int], edges: Iterable[Sequence[int]]):
        nodes = tuple(int(v) for v in nodes)
        if len(set(nodes)) != len(nodes):
            raise MalformedInputError("node labels must be unique")
        if any(v <= 0 for v in nodes):
            raise MalformedInputError("node labels must be positive integers")
        members = set(nodes)
        edge_set = set()
        for e in edges:
            e = tuple(int(v) for v in e)
            if len(e) != 2:
                raise MalformedInputError(f"edge {e} must have two endpoints")
            if e[0] == e[1]:
                raise MalformedInputError(f"self-loop at node {e[0]}")
            if not members.issuperset(e):
                raise MalformedInputError(f"edge {e} has an endpoint outside the node list")
            edge_set.add(frozenset(e))
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "edges", frozenset(edge_set))

    @classmethod
    def path(cls, n: int) -> "Graph":
        return cls(range(1, n + 1), [(i, i + 1) for i in range(1, n)])

    @classmethod
    def cycle(cls, n: int) -> "Graph":
        return cls(range(1, n + 1), [(i, i % n + 1) for i in range(1, n + 1)])

    @classmethod
    def complete(cls, n: int) -> "Graph":
        return cls(range(1, n + 1), [(i, j) for i in range(1, n + 1) for j in range(i + 1, n + 1)])


def graph_geodesic(g: Graph, *, max_nodes: int = MAX_NODES) -> MetricSpace:
    """Shortest-path (edge count) metric of a connected graph."""
    n = len(g.nodes)
    if n > max_nodes:
        raise MalformedInputError(f"{n} nodes exceeds the limit of {max_nodes}")
    pos = {v: i for i, v in enumerate(g.nodes)}
    ends = np.array([[pos[v] for v in e] for e in g.edges], dtype=int).reshape(-1, 2)
    adj = coo_matrix((np.ones(len(ends)), (ends[:, 0], ends[:, 1])), shape=(n, n)).tocsr()
    D = shortest_path(adj, directed=False, unweighted=True)
    unreachable = np.argwhere(~np.isfinite(D))
    if len(unreachable):
        i, j = unreachable[0]
        raise MetricError(f"graph is disconnected: node {g.nodes[j]} is unreachable from node {g.nodes[i]}")
    return MetricSpace(g.nodes, D)


def line_metric(points: Sequence[float], nodes: Sequence[int] | None = None) -> MetricSpace:
    """Metric ``|x_i - x_j|`` on strictly increasing coordinates.

    Nodes are labelled ``1..len(points)`` unless ``nodes`` is given.
    """
    x = np.asarray(points, dtype=float)
    if x.ndim != 1 or len(x) == 0:
        raise MalformedInputError("points must be a nonempty 1-D sequence")
    if not np.all(np.isfinite(x)):
        raise MalformedInputError("points must be finite")
    if np.any(np.diff(x) <= ZERO_DIST_TOL):
        raise MetricError(f"line coordinates must be strictly increasing with gaps above {ZERO_DIST_TOL}")
    labels = tuple(range(1, len(x) + 1)) if nodes is None else tuple(int(v) for v in nodes)
    if len(labels) != len(x):
        raise MalformedInputError("one node label per point is required")
    return MetricSpace(labels, np.abs(x[:, None] - x[None, :]), coords=x.copy())


def set_distance(space: MetricSpace, V1: Iterable[int], V2: Iterable[int]) -> float:
    """Minimum pairwise distance between two nonempty node sets."""
    i = space.indices(V1)
    j = space.indices(V2)
    if len(i) == 0 or len(j) == 0:
        raise ValueError("set_distance needs two nonempty node sets")
    return float(space.dist[np.ix_(i, j)].min())


def metric_from_json(doc: Mapping | str | Path) -> MetricSpace:
    """Build a metric from ``{"nodes", "edges"}`` or ``{"nodes", "dist"}``.

    ``doc`` may be an already-parsed mapping or a path to a JSON file.
    """
    if not isinstance(doc, Mapping):
        doc = json.loads(Path(doc).read_text())
    if "nodes" not in doc:
        raise MalformedInputError("metric document needs a 'nodes' list")
    if "edges" in doc and "dist" in doc:
        raise MalformedInputError("metric document must give either 'edges' or 'dist', not both")
    if "edges" in doc:
        return graph_geodesic(Graph(doc["nodes"], doc["edges"]))
    if "dist" in doc:
        return MetricSpace.from_table(doc["nodes"], doc["dist"])
    raise MalformedInputError("metric document needs 'edges' or 'dist'")
