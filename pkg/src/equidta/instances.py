"""Ready-made instances: the single-bottleneck commute, a two-route toy and random corpora."""
from __future__ import annotations

import itertools
import math
import warnings

import numpy as np

from .demand import ArrivalCostParams, Demand, DemandTable, aggregate
from .expansion import TimeGrid, build_time_expanded, graph_from_arcs
from .network import expand_junctions, network_from_dict
from .vickrey import BottleneckScenario

COMMUTE = BottleneckScenario(1800, 30, 20, 540, ArrivalCostParams(2.0, 0.5))


def toy_network_dict(s: BottleneckScenario) -> dict:
    """Home -> bottleneck junction -> work, free-flow time ``s.t_free`` end to end.

    The junction turn takes one minute and carries the bottleneck capacity;
    the two connectors split the remaining free-flow time.
    """
    rest = s.t_free - 1.0
    if rest <= 0:
        raise ValueError("t_free must exceed the one-minute junction turn")
    before = math.ceil(rest / 2)
    return {
        "nodes": [
            {"id": "home", "kind": "origin"},
            {"id": "neck", "kind": "junction"},
            {"id": "work", "kind": "destination"},
        ],
        "links": [
            {"id": "approach", "tail": "home", "head": "neck", "class": "connector",
             "capacity": "inf", "free_flow_time": before},
            {"id": "exit", "tail": "neck", "head": "work", "class": "connector",
             "capacity": "inf", "free_flow_time": rest - before},
        ],
        "turns": [
            {"junction": "neck", "in_link": "approach", "out_link": "exit",
             "capacity": s.cap, "time": 1.0},
        ],
    }


def toy_demand_csv(s: BottleneckScenario) -> str:
    return ("origin,destination,desired_arrival,volume\n"
            f"home,work,{s.t_desired:g},{s.n_cars:g}\n")


def toy_instance(s: BottleneckScenario = COMMUTE, dt: float = 1.0,
                 horizon: tuple[float, float] = (440.0, 600.0)):
    """Expanded network, demand table and grid for the bottleneck commute."""
    net = expand_junctions(network_from_dict(toy_network_dict(s)))
    records = [Demand("home", "work", s.t_desired, s.n_cars)] if s.n_cars > 0 else []
    demands = DemandTable(records, s.params)
    return net, demands, TimeGrid(dt, *horizon)


def toy_graph(s: BottleneckScenario = COMMUTE, dt: float = 1.0,
              horizon: tuple[float, float] = (440.0, 600.0)):
    net, demands, grid = toy_instance(s, dt, horizon)
    return build_time_expanded(net, demands, grid)


def parallel_paths(cap_a: float = 1.0, demand: float = 2.0):
    """Two routes from node 0 to node 3.

    Route A (0-1-3) costs 3 and its last arc has capacity ``cap_a``; route B
    (0-2-3) costs 5 and is uncapacitated.
    """
    arcs = [
        (0, 1, 1.0, math.inf),
        (0, 2, 2.0, math.inf),
        (1, 3, 2.0, cap_a),
        (2, 3, 3.0, math.inf),
    ]
    return graph_from_arcs(4, arcs, [(0, 3, demand)] if demand > 0 else [])


# ------------------------------------------------------------------ random corpus

def random_network_dict(rng: np.random.Generator) -> dict:
    """Random network with at most six raw nodes and 1-2 junctions."""
    n_orig = int(rng.integers(1, 3))
    n_dest = int(rng.integers(1, 3))
    n_junc = int(rng.integers(1, 6 - n_orig - n_dest + 1)) if 6 - n_orig - n_dest >= 1 else 0
    n_junc = max(1, min(n_junc, 2))
    origins = [f"o{k}" for k in range(n_orig)]
    dests = [f"d{k}" for k in range(n_dest)]
    juncs = [f"j{k}" for k in range(n_junc)]
    nodes = ([{"id": o, "kind": "origin"} for o in origins]
             + [{"id": d, "kind": "destination"} for d in dests]
             + [{"id": j, "kind": "junction"} for j in juncs])
    links = []

    def add(tail, head, klass, t):
        links.append({"tail": tail, "head": head, "class": klass, "capacity": "inf",
                      "free_flow_time": float(t)})

    for o in origins:
        for j in rng.permutation(juncs)[: int(rng.integers(1, n_junc + 1))]:
            add(o, str(j), "road", rng.integers(1, 3))
    for a, b in itertools.permutations(juncs, 2):
        if rng.random() < 0.6:
            add(a, b, "road", rng.integers(1, 3))
    for d in dests:
        for j in rng.permutation(juncs)[: int(rng.integers(1, n_junc + 1))]:
            add(str(j), d, "connector", rng.integers(1, 3))
    if rng.random() < 0.3:
        add(origins[0], dests[0], "connector", rng.integers(3, 6))

    turns = []
    for j in juncs:
        ins = [f"{l['tail']}->{l['head']}" for l in links if l["head"] == j]
        outs = [f"{l['tail']}->{l['head']}" for l in links if l["tail"] == j]
        for a, b in itertools.product(ins, outs):
            if a.split("->")[0] == b.split("->")[1]:
                continue  # no U-turns
            if rng.random() < 0.8:
                turns.append({"junction": j, "in_link": a, "out_link": b,
                              "capacity": float(rng.integers(1, 4)),
                              "time": float(rng.integers(1, 3))})
    return {"nodes": nodes, "links": links, "turns": turns}


def random_instance(seed: int, max_T: int = 12, max_demands: int = 3):
    """Random small instance; returns ``(graph, description)``.

    Demands that cannot reach their destination within the horizon are
    dropped; instances may still be capacity-infeasible, callers filter.
    """
    rng = np.random.default_rng(seed)
    while True:
        doc = random_network_dict(rng)
        with warnings.catch_warnings():
            # junctions without turns are drawn on purpose
            warnings.simplefilter("ignore")
            net = expand_junctions(network_from_dict(doc))
        T = int(rng.integers(6, max_T + 1))
        grid = TimeGrid(1.0, 0.0, float(T - 1))
        params = ArrivalCostParams(float(rng.choice([0.5, 1.0, 2.0, 3.0])),
                                   float(rng.choice([0.25, 0.5, 0.8])))
        origins = sorted(n.id for n in net.nodes.values() if n.kind == "origin")
        dests = sorted(n.id for n in net.nodes.values() if n.kind == "destination")
        records = []
        for _ in range(int(rng.integers(1, max_demands + 1))):
            records.append(Demand(str(rng.choice(origins)), str(rng.choice(dests)),
                                  float(rng.integers(3, T)), float(rng.integers(1, 9)) / 2))
        table = aggregate(records, params)
        graph = build_time_expanded(net, table, grid, check_horizon=False)
        reach = {o: set(graph.reachable_from(o)) for o in graph.origins}
        keep = [d for d, c in zip(table.records, graph.commodities) if c.sink in reach[c.origin]]
        if not keep:
            continue
        table = DemandTable(keep, params)
        graph = build_time_expanded(net, table, grid)
        return graph, {"seed": seed, "network": doc, "T": T, "params": params,
                       "demands": [(d.origin, d.destination, d.desired_arrival, d.volume) for d in keep]}


def equivalence_networks():
    """Small road topologies (at most three raw links) for construction checks.

    Every road feeds a junction or a destination, so queueing at the road's
    end is representable in both graph constructions.
    """
    def doc(nodes, links, turns):
        return {
            "nodes": [{"id": i, "kind": k} for i, k in nodes],
            "links": [{"tail": a, "head": b, "class": c, "capacity": "inf", "free_flow_time": t}
                      for a, b, c, t in links],
            "turns": [{"junction": j, "in_link": a, "out_link": b, "capacity": cap, "time": 1.0}
                      for j, a, b, cap in turns],
        }

    out = []
    for t1, t2, cap in itertools.product((1.0, 2.0), (1.0, 2.0), (1.0, 2.0)):
        out.append(("single-bottleneck", doc(
            [("o", "origin"), ("j", "junction"), ("d", "destination")],
            [("o", "j", "road", t1), ("j", "d", "connector", t2)],
            [("j", "o->j", "j->d", cap)])))
        out.append(("merge", doc(
            [("o1", "origin"), ("o2", "origin"), ("j", "junction"), ("d", "destination")],
            [("o1", "j", "road", t1), ("o2", "j", "road", t2), ("j", "d", "connector", 1.0)],
            [("j", "o1->j", "j->d", cap), ("j", "o2->j", "j->d", 1.0)])))
        out.append(("two-junctions", doc(
            [("o", "origin"), ("a", "junction"), ("b", "junction"), ("d", "destination")],
            [("o", "a", "road", t1), ("a", "b", "road", t2), ("b", "d", "connector", 1.0)],
            [("a", "o->a", "a->b", cap), ("b", "a->b", "b->d", 1.0)])))
        out.append(("diverge", doc(
            [("o", "origin"), ("j", "junction"), ("d1", "destination"), ("d2", "destination")],
            [("o", "j", "road", t1), ("j", "d1", "connector", t2), ("j", "d2", "connector", 1.0)],
            [("j", "o->j", "j->d1", cap), ("j", "o->j", "j->d2", 1.0)])))
        out.append(("road-into-destination", doc(
            [("o", "origin"), ("j", "junction"), ("d", "destination")],
            [("o", "j", "road", t1), ("j", "d", "road", t2)],
            [("j", "o->j", "j->d", cap)])))
    return out


def equivalence_demands(doc: dict, T: int) -> DemandTable:
    origins = sorted(n["id"] for n in doc["nodes"] if n["kind"] == "origin")
    dests = sorted(n["id"] for n in doc["nodes"] if n["kind"] == "destination")
    records = []
    for k, (o, d) in enumerate(itertools.product(origins, dests)):
        records.append(Demand(o, d, float(min(T - 1, 3 + k)), 1.5 + k))
    return aggregate(records, ArrivalCostParams(2.0, 0.5))
