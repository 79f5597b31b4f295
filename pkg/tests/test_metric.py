import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from bandpinv.metric import (
    Graph,
    MalformedInputError,
    MetricError,
    MetricSpace,
    graph_geodesic,
    line_metric,
    metric_from_json,
    set_distance,
    validate_metric,
)


def test_negative_distance_flags_axiom_a():
    D = [[0, -1, 1], [-1, 0, 1], [1, 1, 0]]
    report = validate_metric([1, 2, 3], D)
    a = [v for v in report if v.axiom == "a"]
    assert (1, 2) in [v.witness for v in a]


def test_path_geodesic_table_is_valid():
    space = graph_geodesic(Graph.path(3))
    assert validate_metric(space.nodes, space.dist) == []


def test_triangle_violation_witness():
    D = [[0, 1, 5], [1, 0, 1], [5, 1, 0]]
    report = validate_metric([1, 2, 3], D)
    assert [v.axiom for v in report] == ["d", "d"]
    assert (1, 3, 2) in [v.witness for v in report]


@pytest.mark.parametrize(
    "D, axiom",
    [
        ([[1, 1], [1, 0]], "b"),
        ([[0, 0], [0, 0]], "b"),
        ([[0, 1], [2, 0]], "c"),
    ],
)
def test_other_axioms(D, axiom):
    assert axiom in {v.axiom for v in validate_metric([1, 2], D)}


@pytest.mark.parametrize("D", [[[0, 1]], [[0, np.inf], [np.inf, 0]], [[0, np.nan], [np.nan, 0]]])
def test_malformed_tables(D):
    with pytest.raises(MalformedInputError):
        validate_metric([1, 2][: len(D)] if len(D) == 2 else [1], D)


def test_sampled_triangle_check_above_limit():
    n = 40
    D = np.abs(np.subtract.outer(np.arange(n), np.arange(n))).astype(float)
    D[0, n - 1] = D[n - 1, 0] = 1000.0
    report = validate_metric(range(1, n + 1), D, exact_limit=10, samples=50_000, seed=1)
    assert any(v.axiom == "d" for v in report)
    assert validate_metric(range(1, n + 1), D, exact_limit=10, samples=500, seed=1) == validate_metric(
        range(1, n + 1), D, exact_limit=10, samples=500, seed=1
    )


def test_geodesic_examples():
    assert graph_geodesic(Graph.path(3)).d(1, 3) == 2
    K4 = graph_geodesic(Graph.complete(4))
    assert all(K4.d(i, j) == 1 for i in range(1, 5) for j in range(1, 5) if i != j)
    assert graph_geodesic(Graph.cycle(6)).d(1, 4) == 3


def _bfs(n_nodes, edges, src):
    adj = {v: set() for v in range(1, n_nodes + 1)}
    for i, j in edges:
        adj[i].add(j)
        adj[j].add(i)
    dist = {src: 0}
    frontier = [src]
    while frontier:
        nxt = []
        for v in frontier:
            for w in adj[v]:
                if w not in dist:
                    dist[w] = dist[v] + 1
                    nxt.append(w)
        frontier = nxt
    return dist


@st.composite
def connected_graphs(draw):
    n = draw(st.integers(2, 12))
    # random spanning tree plus extra edges
    edges = {(draw(st.integers(1, k - 1)), k) for k in range(2, n + 1)}
    extra = draw(st.lists(st.tuples(st.integers(1, n), st.integers(1, n)), max_size=10))
    edges |= {(min(i, j), max(i, j)) for i, j in extra if i != j}
    return n, sorted(edges)


@given(connected_graphs())
def test_geodesic_matches_bfs_and_is_metric(g):
    n, edges = g
    space = graph_geodesic(Graph(list(range(1, n + 1)), edges))
    assert validate_metric(space.nodes, space.dist) == []
    ref = _bfs(n, edges, 1)
    assert all(space.d(1, v) == ref[v] for v in range(1, n + 1))


def test_disconnected_graph_names_pair():
    with pytest.raises(MetricError, match=r"\(1, 3\)|unreachable"):
        graph_geodesic(Graph([1, 2, 3], [(1, 2)]))


@pytest.mark.parametrize("edges", [[(1, 1)], [(1, 9)]])
def test_bad_edges(edges):
    with pytest.raises(ValueError):
        Graph([1, 2], edges)


def test_line_metric_examples():
    assert line_metric([0, 0.5, 1.0]).d(1, 3) == 1.0
    h = 0.25
    assert line_metric([h * k for k in range(5)]).d(1, 5) == 1.0
    assert line_metric([0, 1, 10]).d(2, 3) == 9


@pytest.mark.parametrize("pts", [[0, 0, 1], [1, 0.5, 2]])
def test_line_metric_rejects_non_monotone(pts):
    with pytest.raises(MetricError):
        line_metric(pts)


@given(st.lists(st.floats(-1e3, 1e3, allow_nan=False), min_size=2, max_size=30, unique=True))
def test_line_metric_is_metric(pts):
    pts = sorted(pts)
    if np.any(np.diff(pts) <= 1e-12):
        with pytest.raises(MetricError):
            line_metric(pts)
        return
    space = line_metric(pts)
    assert validate_metric(space.nodes, space.dist) == []


def test_set_distance_examples():
    P4 = graph_geodesic(Graph.path(4))
    assert set_distance(P4, {1}, {3, 4}) == 2
    assert set_distance(P4, {1, 2}, {2, 4}) == 0
    line = line_metric([0, 1, 2, 3])
    assert set_distance(line, {1, 2}, {4}) == 2
    with pytest.raises(ValueError):
        set_distance(P4, set(), {1})


@given(
    st.sets(st.integers(1, 10), min_size=1),
    st.sets(st.integers(1, 10), min_size=1),
    st.sets(st.integers(1, 10)),
)
def test_set_distance_symmetric_and_monotone(V1, V2, extra):
    space = graph_geodesic(Graph.cycle(10))
    d = set_distance(space, V1, V2)
    assert d == set_distance(space, V2, V1)
    assert set_distance(space, V1 | extra, V2) <= d


def test_from_table_rejects_invalid():
    with pytest.raises(MetricError):
        MetricSpace.from_table([1, 2, 3], [[0, 1, 5], [1, 0, 1], [5, 1, 0]])


def test_dist_is_read_only():
    space = graph_geodesic(Graph.path(3))
    with pytest.raises(ValueError):
        space.dist[0, 1] = 7.0


def test_json_ingestion(tmp_path):
    doc = {"nodes": [1, 2, 3], "edges": [[1, 2], [2, 3]]}
    p = tmp_path / "g.json"
    p.write_text(json.dumps(doc))
    space = metric_from_json(p)
    assert space == metric_from_json({"nodes": [1, 2, 3], "dist": space.dist.tolist()})
    with pytest.raises(MalformedInputError):
        metric_from_json({"nodes": [1, 2]})
