"""Solver output: arc flows, optional path flows, prices and bookkeeping."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .expansion import ARC_ARRIVAL, ARC_ORIGIN, TimeExpandedGraph


@dataclass
class PathFlow:
    commodity: int
    arcs: tuple[int, ...]
    flow: float
    cost: float


@dataclass
class Solution:
    method: str
    flows: np.ndarray
    objective: float
    per_origin: dict[int, np.ndarray] | None = None
    paths: list[PathFlow] | None = None
    prices: np.ndarray | None = None
    potentials: np.ndarray | None = None
    dual_bound: float = math.nan
    gap: float = math.nan
    max_violation: float = 0.0
    infeasibility: float = 0.0
    status: str = "optimal"
    converged: bool = True
    iterations: int = 0
    log: list[dict] = field(default_factory=list)
    info: dict = field(default_factory=dict)


def violation(graph: TimeExpandedGraph, flows: np.ndarray) -> float:
    cap = graph.capacitated
    if cap.size == 0:
        return 0.0
    return float(max(0.0, (flows[cap] - graph.capacity[cap]).max()))


def path_departure(graph: TimeExpandedGraph, arcs) -> float | None:
    """Physical departure time of a path leaving a timeless origin."""
    if not arcs:
        return None
    e = arcs[0]
    if graph.klass_name(e) != ARC_ORIGIN:
        return graph.node_time(int(graph.tail[e]))
    t = graph.nodes[graph.head[e]].t - int(graph.duration[e])
    return graph.grid.time_of(t) if graph.grid else t


def path_arrival(graph: TimeExpandedGraph, arcs) -> float | None:
    """Physical arrival time: the actual-destination copy entered before the arrival-cost arc."""
    for e in reversed(arcs):
        if graph.klass_name(e) == ARC_ARRIVAL:
            return graph.node_time(int(graph.tail[e]))
    return graph.node_time(int(graph.head[arcs[-1]])) if arcs else None


def _num(v: float):
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    if math.isnan(v):
        return None
    return float(v)


def solution_to_dict(sol: Solution, graph: TimeExpandedGraph, config: dict | None = None,
                     flow_tol: float = 1e-12) -> dict:
    arcs = []
    prices = sol.prices if sol.prices is not None else np.zeros(graph.n_arcs)
    for e in range(graph.n_arcs):
        if abs(sol.flows[e]) > flow_tol or prices[e] > 0:
            link = graph.arc(e)
            arcs.append({
                "arc": e, "tail": link.tail.label(), "head": link.head.label(), "class": link.klass,
                "tail_time": graph.node_time(int(graph.tail[e])),
                "head_time": graph.node_time(int(graph.head[e])),
                "flow": float(sol.flows[e]), "price": float(prices[e]),
                "capacity": _num(link.capacity), "cost": link.cost,
            })
            if link.klass == ARC_ORIGIN:
                arcs[-1]["departure_time"] = path_departure(graph, [e])
    doc = {
        "method": sol.method,
        "status": sol.status,
        "converged": sol.converged,
        "objective": _num(sol.objective),
        "dual_bound": _num(sol.dual_bound),
        "gap": _num(sol.gap),
        "max_violation": sol.max_violation,
        "infeasibility": sol.infeasibility,
        "iterations": sol.iterations,
        "n_arcs": graph.n_arcs,
        "commodities": [
            {"origin": c.origin_id, "destination": c.destination_id,
             "desired_arrival": c.desired_arrival, "volume": c.volume,
             "potential": None if sol.potentials is None else _num(sol.potentials[k])}
            for k, c in enumerate(graph.commodities)
        ],
        "arcs": arcs,
    }
    if sol.per_origin is not None:
        doc["per_origin"] = {
            graph.nodes[o].base: {str(e): float(v[e]) for e in np.flatnonzero(np.abs(v) > flow_tol)}
            for o, v in sorted(sol.per_origin.items())
        }
    if sol.paths is not None:
        doc["paths"] = []
        for p in sol.paths:
            c = graph.commodities[p.commodity]
            doc["paths"].append({
                "origin": c.origin_id, "destination": c.destination_id,
                "desired_arrival": c.desired_arrival,
                "departure_time": path_departure(graph, p.arcs),
                "arrival_time": path_arrival(graph, p.arcs),
                "arcs": list(p.arcs), "flow": p.flow, "cost": p.cost,
            })
    if sol.info:
        doc["info"] = sol.info
    if config is not None:
        doc["config"] = config
    return doc


def _parse_num(v):
    if v is None:
        return math.nan
    if isinstance(v, str):
        return float(v)
    return float(v)


def solution_from_dict(doc: dict, graph: TimeExpandedGraph) -> Solution:
    """Rebuild a :class:`Solution` against the graph it was computed on."""
    if doc.get("n_arcs") != graph.n_arcs:
        raise ValueError("solution does not match the graph (arc count differs)")
    flows = np.zeros(graph.n_arcs)
    prices = np.zeros(graph.n_arcs)
    for rec in doc.get("arcs", []):
        flows[rec["arc"]] = rec["flow"]
        prices[rec["arc"]] = rec.get("price", 0.0)
    per_origin = None
    if "per_origin" in doc:
        per_origin = {}
        lookup = {graph.nodes[o].base: o for o in graph.origins}
        for base, rec in doc["per_origin"].items():
            v = np.zeros(graph.n_arcs)
            for e, f in rec.items():
                v[int(e)] = f
            per_origin[lookup[base]] = v
    paths = None
    if "paths" in doc:
        key = {(c.origin_id, c.destination_id, c.desired_arrival): k
               for k, c in enumerate(graph.commodities)}
        paths = [
            PathFlow(key[(p["origin"], p["destination"], p["desired_arrival"])], tuple(p["arcs"]),
                     p["flow"], p["cost"])
            for p in doc["paths"]
        ]
    pots = [c.get("potential") for c in doc.get("commodities", [])]
    return Solution(
        method=doc["method"], flows=flows, objective=_parse_num(doc["objective"]),
        per_origin=per_origin, paths=paths, prices=prices,
        potentials=None if not pots or any(p is None for p in pots) else np.array(pots, float),
        dual_bound=_parse_num(doc.get("dual_bound")), gap=_parse_num(doc.get("gap")),
        max_violation=doc.get("max_violation", 0.0), infeasibility=doc.get("infeasibility", 0.0),
        status=doc.get("status", "optimal"), converged=doc.get("converged", True),
        iterations=doc.get("iterations", 0), info=doc.get("info", {}),
    )


def dumps(doc: dict) -> str:
    return json.dumps(doc, indent=1, sort_keys=True, allow_nan=False) + "\n"
