"""Capacity repair for approximately feasible path flows.

Averaged subgradient flows usually overshoot a few capacities slightly.
:func:`repair_flows` scales back every path crossing an overloaded arc and
sends the removed volume along cheapest paths with spare capacity.
"""
from __future__ import annotations

import math

import numpy as np

from .shortest_path import extract_path, shortest_tree
from .solution import PathFlow


def _loads(graph, paths):
    x = np.zeros(graph.n_arcs)
    for p in paths:
        x[list(p.arcs)] += p.flow
    return x


def repair_flows(graph, paths, tol: float = 1e-12):
    """Return ``(flows, paths, info)`` with capacities respected where possible.

    Volume that cannot be rerouted stays on its original paths and is
    reported under ``info["unrouted"]``.
    """
    paths = [PathFlow(p.commodity, tuple(p.arcs), p.flow, p.cost) for p in paths if p.flow > 0]
    x = _loads(graph, paths)
    cap = graph.capacitated
    ratio = np.ones(graph.n_arcs)
    over = cap[x[cap] > graph.capacity[cap] + tol]
    ratio[over] = graph.capacity[over] / x[over]

    residual: dict[int, float] = {}
    kept = []
    removed = 0.0
    for p in paths:
        f = min((ratio[e] for e in p.arcs), default=1.0)
        if f < 1.0:
            cut = p.flow * (1.0 - f)
            residual[p.commodity] = residual.get(p.commodity, 0.0) + cut
            removed += cut
            p = PathFlow(p.commodity, p.arcs, p.flow * f, p.cost)
        kept.append(p)

    x = _loads(graph, kept)
    spare = np.full(graph.n_arcs, math.inf)
    spare[cap] = graph.capacity[cap] - x[cap]
    unrouted = {}
    added = []
    for k in sorted(residual):
        need = residual[k]
        com = graph.commodities[k]
        while need > tol:
            costs = np.where(spare > tol, graph.cost, math.inf)
            tree = shortest_tree(graph, costs, com.origin)
            if not tree.reachable(com.sink):
                break
            arcs = tuple(extract_path(tree, com.sink))
            push = min(need, min((spare[e] for e in arcs), default=math.inf))
            spare[list(arcs)] -= push
            added.append(PathFlow(k, arcs, push, graph.path_cost(arcs)))
            need -= push
        if need > tol:
            unrouted[k] = need

    # volume that found no room goes back where it came from
    for k, v in unrouted.items():
        share = [p for p in paths if p.commodity == k]
        total = sum(p.flow for p in share)
        for p in share:
            added.append(PathFlow(k, p.arcs, v * p.flow / total, p.cost))

    merged: dict[tuple, float] = {}
    for p in kept + added:
        key = (p.commodity, p.arcs)
        merged[key] = merged.get(key, 0.0) + p.flow
    out = [PathFlow(k, arcs, f, graph.path_cost(arcs)) for (k, arcs), f in sorted(merged.items()) if f > tol]
    info = {"rerouted": removed - sum(unrouted.values()),
            "unrouted": {graph.commodities[k].origin_id + "->" + graph.commodities[k].destination_id: v
                         for k, v in unrouted.items()}}
    return _loads(graph, out), out, info
