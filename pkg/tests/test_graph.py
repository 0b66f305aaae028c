import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from iga_lwp.errors import ParseError, ValidationError
from iga_lwp.graph import (WeightedGraph, common_neighbors, load_edge_list, normalize_weights,
                           round_half_up, save_edge_list, second_order, split_train_test)
from iga_lwp.synthetic import random_graph


def write(tmp_path, text, name="g.txt"):
    p = tmp_path / name
    p.write_text(text)
    return p


def assert_graph_invariants(g):
    A, W = g.adjacency, g.weights
    assert np.array_equal(A, A.T) and np.array_equal(W, W.T)
    assert not np.diag(A).any() and not np.diag(W).any()


def test_load_simple(tmp_path):
    g = load_edge_list(write(tmp_path, "0 1 2\n1 2 3\n"))
    assert g.node_count == 3
    assert g.edge_list == [(0, 1, 2.0), (1, 2, 3.0)]
    assert_graph_invariants(g)


def test_load_aggregates_duplicates(tmp_path):
    g = load_edge_list(write(tmp_path, "0 1 2\n1 0 3\n"))
    assert g.edge_list == [(0, 1, 5.0)]


def test_load_csv_comments_reindex_and_self_loops(tmp_path, caplog):
    g = load_edge_list(write(tmp_path, "# header\n10,30,1.5\n30,30,4\n\n30,70,2\n"), format="csv")
    assert g.node_count == 3
    assert list(g.node_ids) == [10, 30, 70]
    assert g.edge_list == [(0, 1, 1.5), (1, 2, 2.0)]
    assert "self-loop" in caplog.text


def test_load_malformed_reports_line(tmp_path):
    with pytest.raises(ParseError) as exc:
        load_edge_list(write(tmp_path, "0 1 2\n1 2\n"))
    assert exc.value.line_no == 2
    with pytest.raises(ParseError, match="line 1"):
        load_edge_list(write(tmp_path, "a b c\n"))


@pytest.mark.parametrize("w", ["0", "-1.5", "nan"])
def test_load_rejects_non_positive_weight(tmp_path, w):
    with pytest.raises(ValidationError):
        load_edge_list(write(tmp_path, f"0 1 {w}\n"))


def test_export_round_trip(tmp_path):
    g = random_graph(12, 0.4, seed=3)
    path = tmp_path / "out.txt"
    save_edge_list(g, path)
    back = load_edge_list(path)
    # ten significant digits
    np.testing.assert_allclose(back.weights, g.weights[np.ix_(back.node_ids, back.node_ids)], rtol=1e-9)
    assert path.read_text().splitlines()[0].count(" ") == 2


def test_normalize_values():
    g = WeightedGraph.from_edges(3, [(0, 1, 1.0), (1, 2, 0.0526)])
    n = normalize_weights(g)
    assert n.weights[0, 1] == pytest.approx(0.36787944117, abs=1e-11)
    assert n.weights[1, 2] == pytest.approx(5.6e-9, rel=0.02)
    assert n.weights[0, 2] == 0.0
    assert np.array_equal(n.adjacency, g.adjacency)


@given(st.lists(st.floats(0.01, 1e4), min_size=2, max_size=20, unique=True))
def test_normalize_monotone_and_open_interval(ws):
    edges = [(i, i + 1, w) for i, w in enumerate(ws)]
    g = normalize_weights(WeightedGraph.from_edges(len(ws) + 1, edges))
    out = np.array([g.weights[i, i + 1] for i in range(len(ws))])
    assert np.all((out > 0) & (out < 1))
    order = np.argsort(ws)
    assert np.all(np.diff(out[order]) > 0)


def test_normalize_large_weight_tends_to_one():
    g = normalize_weights(WeightedGraph.from_edges(2, [(0, 1, 1e6)]))
    assert 1 - g.weights[0, 1] < 1e-5


def test_graph_rejects_asymmetry_and_self_loops():
    with pytest.raises(ValidationError):
        WeightedGraph(np.array([[0, 1], [0, 0]]), np.zeros((2, 2)))
    with pytest.raises(ValidationError):
        WeightedGraph(np.eye(2), np.zeros((2, 2)))


def test_graph_is_immutable():
    g = random_graph(5, 0.5, seed=0)
    with pytest.raises(ValueError):
        g.weights[0, 1] = 3.0


def test_split_counts_and_disjointness():
    g = random_graph(40, 0.2, seed=1)
    edges = g.edge_list[:100]
    g = WeightedGraph.from_edges(40, edges)
    s = split_train_test(g, 0.1, seed=5)
    assert len(s.test_edges) == 10
    test = {(u, v) for u, v, _ in s.test_edges}
    obs = {(u, v) for u, v, _ in s.observed.edge_list}
    assert not test & obs
    assert test | obs == {(u, v) for u, v, _ in edges}
    for u, v, w in s.test_edges:
        assert s.observed.adjacency[u, v] == 0 and s.observed.weights[u, v] == 0
        assert w == g.weights[u, v]
    assert_graph_invariants(s.observed)


def test_split_is_deterministic():
    g = random_graph(30, 0.3, seed=2)
    a, b = split_train_test(g, 0.1, 11), split_train_test(g, 0.1, 11)
    assert a.test_edges == b.test_edges
    assert a.observed == b.observed
    assert a.observed.weights.tobytes() == b.observed.weights.tobytes()


def test_split_size_rounding():
    # a 2137-link graph loses round(213.7) = 214 links
    assert round_half_up(0.1 * 2137) == 214
    assert round_half_up(0.5 * 3) == 2


@pytest.mark.parametrize("frac", [0.0, 1.0, -0.1, 1.5])
def test_split_rejects_bad_fraction(frac):
    with pytest.raises(ValidationError):
        split_train_test(random_graph(20, 0.4, seed=0), frac, 0)


def test_split_needs_ten_edges():
    g = WeightedGraph.from_edges(4, [(0, 1, 1.0), (1, 2, 1.0)])
    with pytest.raises(ValidationError):
        split_train_test(g, 0.1, 0)


def test_second_order_triangle_and_path():
    k3 = WeightedGraph.from_edges(3, [(0, 1, 1.0), (1, 2, 1.0), (0, 2, 1.0)])
    assert second_order(k3).tolist() == [[2, 1, 1], [1, 2, 1], [1, 1, 2]]
    path = WeightedGraph.from_edges(3, [(0, 1, 1.0), (1, 2, 1.0)])
    a2 = second_order(path)
    assert a2[0, 2] == 1 and a2[0, 1] == 0
    assert np.diag(second_order(path, zero_diagonal=True)).tolist() == [0, 0, 0]
    empty = WeightedGraph(np.zeros((4, 4)), np.zeros((4, 4)))
    assert not second_order(empty).any()


def test_common_neighbors_examples():
    k3 = WeightedGraph.from_edges(3, [(0, 1, 1.0), (1, 2, 1.0), (0, 2, 1.0)])
    assert common_neighbors(k3, 0, 1) == 1
    star = WeightedGraph.from_edges(5, [(0, i, 1.0) for i in range(1, 5)])
    assert common_neighbors(star, 0, 3) == 0
    hubs = WeightedGraph.from_edges(5, [(a, h, 1.0) for a in (0, 1) for h in (2, 3, 4)])
    assert common_neighbors(hubs, 0, 1) == 3


def test_common_neighbors_rejects_bad_ids():
    g = random_graph(5, 0.5, seed=0)
    with pytest.raises(ValidationError):
        common_neighbors(g, 0, 7)
    with pytest.raises(ValidationError):
        common_neighbors(g, 2, 2)


@settings(max_examples=60, deadline=None)
@given(st.integers(2, 50), st.floats(0.0, 1.0), st.integers(0, 10**6))
def test_second_order_matches_brute_force(n, p, seed):
    g = random_graph(n, p, seed)
    a2 = second_order(g)
    assert np.array_equal(a2, a2.T)
    adj = [set(np.flatnonzero(g.adjacency[u])) for u in range(n)]
    for u in range(n):
        for v in range(n):
            if u != v:
                assert a2[u, v] == len(adj[u] & adj[v]) == common_neighbors(g, u, v)
        assert a2[u, u] == len(adj[u])


def test_dense_limit():
    with pytest.raises(ValidationError):
        WeightedGraph(np.zeros((4097, 4097), dtype=np.int8), np.zeros((4097, 4097)))
