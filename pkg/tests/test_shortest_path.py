import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from equidta.expansion import graph_from_arcs
from equidta.instances import parallel_paths, random_instance
from equidta.shortest_path import (THREADS_ENV, UnreachableError, default_workers, extract_path,
                                   shortest_tree, shortest_trees)


def test_picks_cheaper_route():
    g = parallel_paths()
    tree = shortest_tree(g, g.cost, 0)
    assert tree.dist[3] == 3 and extract_path(tree, 3) == [0, 2]


def test_price_tie_breaks_by_arc_index():
    g = parallel_paths()
    tree = shortest_tree(g, g.cost + np.array([0, 0, 2.0, 0]), 0)
    assert tree.dist[3] == 5
    assert tree.parent[3] == 2


def test_isolated_origin():
    g = graph_from_arcs(3, [(1, 2, 1.0, math.inf)], [])
    tree = shortest_tree(g, g.cost, 0)
    assert np.isinf(tree.dist[1:]).all()
    with pytest.raises(UnreachableError):
        extract_path(tree, 2)


def test_chain_and_identity():
    g = graph_from_arcs(3, [(0, 1, 1.0, math.inf), (1, 2, 1.0, math.inf)], [])
    tree = shortest_tree(g, g.cost, 0)
    assert extract_path(tree, 2) == [0, 1]
    assert extract_path(tree, 0) == [] and tree.dist[0] == 0


def test_negative_cost_rejected():
    g = parallel_paths()
    with pytest.raises(ValueError, match="negative"):
        shortest_tree(g, g.cost - 5, 0)


def test_toy_label_matches_path(toy):
    c = toy.commodities[0]
    tree = shortest_tree(toy, toy.cost, c.origin)
    path = extract_path(tree, c.sink)
    assert abs(toy.path_cost(path) - tree.dist[c.sink]) <= 1e-12
    assert tree.dist[c.sink] == pytest.approx(20.0)


@st.composite
def small_dags(draw):
    n = draw(st.integers(2, 10))
    pairs = [(a, b) for a in range(n) for b in range(a + 1, n)]
    chosen = draw(st.lists(st.sampled_from(pairs), max_size=25))
    arcs = [(a, b, draw(st.integers(0, 9)) / 2, math.inf) for a, b in chosen]
    return graph_from_arcs(n, arcs, [])


def brute_force(g, origin):
    """Minimum over every origin path, enumerated depth first."""
    best = {}
    stack = [(origin, 0.0)]
    while stack:
        u, d = stack.pop()
        best[u] = min(best.get(u, math.inf), d)
        for e in g.out_of(u):
            stack.append((int(g.head[e]), d + g.cost[e]))
    return np.array([best.get(v, math.inf) for v in range(g.n_nodes)])


@settings(max_examples=80, deadline=None)
@given(small_dags())
def test_exact_against_enumeration(g):
    expect = brute_force(g, 0)
    for method in ("dag", "dijkstra"):
        tree = shortest_tree(g, g.cost, 0, method)
        assert np.array_equal(tree.dist, expect)
        for v in range(g.n_nodes):
            if tree.reachable(v):
                assert g.path_cost(extract_path(tree, v)) == pytest.approx(tree.dist[v], abs=1e-12)
    # triangle inequality at every arc
    d = shortest_tree(g, g.cost, 0).dist
    for e in range(g.n_arcs):
        if math.isfinite(d[g.tail[e]]):
            assert d[g.head[e]] <= d[g.tail[e]] + g.cost[e] + 1e-12


@settings(max_examples=40, deadline=None)
@given(small_dags(), st.data())
def test_monotone_in_prices(g, data):
    if g.n_arcs == 0:
        return
    y = np.array(data.draw(st.lists(st.floats(0, 5), min_size=g.n_arcs, max_size=g.n_arcs)))
    bump = y.copy()
    bump[data.draw(st.integers(0, g.n_arcs - 1))] += data.draw(st.floats(0, 5))
    before = shortest_tree(g, g.cost + y, 0).dist
    after = shortest_tree(g, g.cost + bump, 0).dist
    assert np.all(after >= before - 1e-12)


@pytest.mark.parametrize("seed", range(15))
def test_backends_agree_and_deterministic(seed):
    g, _ = random_instance(seed)
    rng = np.random.default_rng(seed)
    costs = g.cost + rng.uniform(0, 3, g.n_arcs)
    for o in g.origins:
        a = shortest_tree(g, costs, o, "dag")
        b = shortest_tree(g, costs, o, "dijkstra")
        assert np.array_equal(a.dist, b.dist)
        assert np.array_equal(a.parent, b.parent)
        again = shortest_tree(g, costs, o, "dag")
        assert np.array_equal(a.parent, again.parent)


def test_threaded_trees_match(monkeypatch):
    g, _ = next((g, d) for g, d in (random_instance(s) for s in itertools.count()) if len(g.origins) > 1)
    serial = shortest_trees(g, g.cost, g.origins, workers=1)
    monkeypatch.setenv(THREADS_ENV, "4")
    assert default_workers() == 4
    threaded = shortest_trees(g, g.cost, g.origins)
    for a, b in zip(serial, threaded):
        assert np.array_equal(a.dist, b.dist) and np.array_equal(a.parent, b.parent)


@pytest.mark.parametrize("raw", ["0", "x", "-2"])
def test_bad_thread_setting(monkeypatch, raw):
    monkeypatch.setenv(THREADS_ENV, raw)
    with pytest.raises(ValueError, match=THREADS_ENV):
        default_workers()
