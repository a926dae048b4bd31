import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from equidta.demand import ArrivalCostParams, Demand, DemandTable, aggregate
from equidta.expansion import (ARC_ARRIVAL, ARC_JUNCTION, ARC_ROAD, ARC_WAIT, HorizonError, TELink,
                               TENode, TimeGrid, arc_cost, build_time_expanded, quantize, DESIRED_LAYER,
                               NODE_LAYER, ACTUAL_LAYER)
from equidta.instances import random_instance
from equidta.network import expand_junctions, network_from_dict
from equidta.shortest_path import shortest_tree

P = ArrivalCostParams(2.0, 0.5)


def net_of(nodes, links, turns=()):
    return expand_junctions(network_from_dict({
        "nodes": [{"id": i, "kind": k} for i, k in nodes],
        "links": [{"tail": a, "head": b, "class": c, "capacity": cap, "free_flow_time": t}
                  for a, b, c, cap, t in links],
        "turns": [{"junction": j, "in_link": a, "out_link": b, "capacity": cap, "time": tt}
                  for j, a, b, cap, tt in turns],
    }))


def one_road(t_road=2.0):
    """o -> a ==road==> b -> d with a single-turn junction at a and at b."""
    return net_of(
        [("o", "origin"), ("a", "junction"), ("b", "junction"), ("d", "destination")],
        [("o", "a", "connector", "inf", 1), ("a", "b", "road", "inf", t_road), ("b", "d", "connector", "inf", 1)],
        [("a", "o->a", "a->b", 10, 1), ("b", "a->b", "b->d", 10, 1)])


def table(*recs):
    return aggregate([Demand(*r) for r in recs], P)


def test_grid_basics():
    g = TimeGrid(1.0, 440, 600)
    assert g.T == 161 and g.time_of(100) == 540 and g.index_of(540) == 100
    assert TimeGrid(2.0, 0, 10).index_of(3) == 2  # tie goes later
    assert TimeGrid(2.0, 0, 10, ties_later=False).index_of(3) == 1
    with pytest.raises(ValueError):
        TimeGrid(0.0, 0, 10)
    with pytest.raises(ValueError):
        TimeGrid(1.0, 0, 0.5)


def test_quantize_exact_division():
    net = one_road(20.0)
    q = quantize(net, table(("o", "d", 50.0, 1.0)), TimeGrid(1.0, 0, 100))
    assert {ql.link.id: ql.steps for ql in q.links}["a->b"] == 20
    assert not q.warnings


def test_quantize_rounding_warning():
    net = net_of([("o", "origin"), ("d", "destination")], [("o", "d", "road", "inf", 20)])
    with pytest.warns(UserWarning, match="20% change"):
        q = quantize(net, table(("o", "d", 48.0, 1.0)), TimeGrid(8.0, 0, 96))
    assert [ql.steps for ql in q.links] == [3]


def test_quantize_capacity_scaling():
    net = net_of([("o", "origin"), ("j", "junction"), ("d", "destination")],
                 [("o", "j", "road", "inf", 1), ("j", "d", "road", "inf", 1)],
                 [("j", "o->j", "j->d", 30, 1)])
    q = quantize(net, table(("o", "d", 5.0, 1.0)), TimeGrid(0.5, 0, 10))
    caps = [ql.capacity for ql in q.links if math.isfinite(ql.capacity)]
    assert caps == [15.0]


def test_quantize_desired_outside_horizon():
    with pytest.raises(HorizonError, match="outside the horizon"):
        quantize(one_road(), table(("o", "d", 700.0, 1.0)), TimeGrid(1.0, 0, 100))


def _counts(graph, link_id, node_base):
    road = sum(1 for e in range(graph.n_arcs) if graph.source_link[e] == link_id)
    wait = sum(1 for e in range(graph.n_arcs)
               if graph.klass_name(e) == ARC_WAIT and graph.nodes[graph.tail[e]].base == node_base)
    return road, wait


def test_quadratic_vs_compact_road_arcs():
    net = one_road(2.0)
    dem = table(("o", "d", 5.0, 1.0))
    grid = TimeGrid(1.0, 0, 5)
    compact = build_time_expanded(net, dem, grid, check_horizon=False)
    literal = build_time_expanded(net, dem, grid, literal_roads=True, check_horizon=False)
    rid = "a->b"
    assert _counts(compact, rid, "b/in/a->b") == (4, 5)
    assert _counts(literal, rid, "b/in/a->b") == (10, 0)
    # same shortest-path labels on every shared node
    for g in (compact, literal):
        assert g.nodes == compact.nodes
    d1 = shortest_tree(compact, compact.cost, compact.origins[0]).dist
    d2 = shortest_tree(literal, literal.cost, literal.origins[0]).dist
    assert np.array_equal(d1, d2)


def test_junction_arc_count():
    net = net_of([("o", "origin"), ("j", "junction"), ("d", "destination")],
                 [("o", "j", "road", "inf", 1), ("j", "d", "road", "inf", 1)],
                 [("j", "o->j", "j->d", 3, 1)])
    g = build_time_expanded(net, table(("o", "d", 4.0, 1.0)), TimeGrid(1.0, 0, 4))
    starts = sorted(g.nodes[g.tail[e]].t for e in range(g.n_arcs) if g.klass_name(e) == ARC_JUNCTION)
    assert starts == [0, 1, 2, 3]


def test_horizon_too_short():
    net = net_of([("o", "origin"), ("d", "destination")], [("o", "d", "road", "inf", 5)])
    with pytest.raises(HorizonError, match="horizon too short"):
        build_time_expanded(net, table(("o", "d", 1.0, 1.0)), TimeGrid(1.0, 0, 1))


def test_arc_cost_examples():
    grid = TimeGrid(1.0, 0, 600)
    w = TELink(TENode("v", 3, NODE_LAYER), TENode("v", 4, NODE_LAYER), ARC_WAIT, 1.0, math.inf, 1)
    j = TELink(TENode("u", 3, NODE_LAYER), TENode("v", 5, NODE_LAYER), ARC_JUNCTION, 2.0, 3.0, 2)
    a = TELink(TENode("d", 545, ACTUAL_LAYER), TENode("d", 540, DESIRED_LAYER, P), ARC_ARRIVAL, 10.0,
               math.inf, 0)
    assert (arc_cost(w, grid), arc_cost(j, grid), arc_cost(a, grid)) == (1.0, 2.0, 10.0)


def _check_structure(g):
    assert np.all(g.tail < g.head)
    names = [g.klass_name(e) for e in range(g.n_arcs)]
    for e, name in enumerate(names):
        tail, head = g.nodes[g.tail[e]], g.nodes[g.head[e]]
        if tail.t is not None and head.layer != DESIRED_LAYER:
            assert head.t >= tail.t
            assert g.cost[e] == pytest.approx((head.t - tail.t) * g.grid.dt)
        if name == ARC_WAIT:
            assert head.t == tail.t + 1 and g.cost[e] == g.grid.dt
        if name == ARC_JUNCTION:
            assert math.isfinite(g.capacity[e]) and head.t - tail.t == g.duration[e]
        else:
            assert math.isinf(g.capacity[e]) or name in ("connector", "origin-connector")
        if name == ARC_ARRIVAL:
            assert math.isinf(g.capacity[e])
            c = next(c for c in g.commodities if c.sink == g.head[e])
            expected = c.params.alpha * max(0, tail.t - head.t) + c.params.beta * max(0, head.t - tail.t)
            assert g.cost[e] == pytest.approx(expected * g.grid.dt)
        if name == ARC_ROAD:
            assert math.isinf(g.capacity[e])
    for c in g.commodities:
        assert c.sink in g.reachable_from(c.origin)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000))
def test_random_graph_structure(seed):
    graph, _ = random_instance(seed)
    _check_structure(graph)


def test_toy_structure(toy):
    _check_structure(toy)
    T = toy.grid.T
    n_arrival = sum(1 for e in range(toy.n_arcs) if toy.klass_name(e) == ARC_ARRIVAL)
    assert n_arrival <= T  # one desired copy, at most one arc per actual copy
    assert toy.n_arcs < 10 * T


def test_build_is_deterministic():
    a, _ = random_instance(7)
    b, _ = random_instance(7)
    assert a.to_dict() == b.to_dict()


def test_arrival_window_limits_arcs():
    net = one_road(1.0)
    dem = table(("o", "d", 20.0, 1.0))
    full = build_time_expanded(net, dem, TimeGrid(1.0, 0, 40))
    narrow = build_time_expanded(net, dem, TimeGrid(1.0, 0, 40), arrival_window=3)
    count = lambda g: sum(1 for e in range(g.n_arcs) if g.klass_name(e) == ARC_ARRIVAL)
    assert count(narrow) == 7 < count(full)


def test_unexpanded_network_rejected():
    raw = network_from_dict({"nodes": [{"id": "o", "kind": "origin"}, {"id": "j", "kind": "junction"},
                                       {"id": "d", "kind": "destination"}],
                             "links": [{"tail": "o", "head": "j", "class": "road", "capacity": "inf",
                                        "free_flow_time": 1},
                                       {"tail": "j", "head": "d", "class": "road", "capacity": "inf",
                                        "free_flow_time": 1}]})
    with pytest.raises(ValueError, match="expand junctions"):
        build_time_expanded(raw, table(("o", "d", 3.0, 1.0)), TimeGrid(1.0, 0, 5))


def test_demand_table_type():
    assert isinstance(table(("o", "d", 3.0, 1.0)), DemandTable)
