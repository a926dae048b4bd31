"""Equilibrium certificate for a candidate assignment.

A flow passes when it is feasible (nonnegative, within capacities, meeting
every demand, conserving flow) and no used path is dearer than the
cheapest path that still has spare capacity on every arc.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .shortest_path import extract_path, shortest_tree
from .solution import PathFlow, Solution


class DecompositionError(ValueError):
    pass


class AuditError(ValueError):
    pass


@dataclass
class AuditReport:
    capacity_violations: list = field(default_factory=list)      # (arc, excess)
    demand_violations: list = field(default_factory=list)        # (commodity, deficit)
    conservation_residuals: list = field(default_factory=list)   # (origin, node, residual)
    negative_flows: list = field(default_factory=list)           # (arc, flow)
    wardrop_violations: list = field(default_factory=list)       # (commodity, used, best, gap)
    totals: dict = field(default_factory=dict)
    tolerances: dict = field(default_factory=dict)

    @property
    def verdict(self) -> str:
        lists = (self.capacity_violations, self.demand_violations, self.conservation_residuals,
                 self.negative_flows, self.wardrop_violations)
        return "pass" if not any(lists) else "fail"

    @property
    def passed(self) -> bool:
        return self.verdict == "pass"

    def merge(self, other: "AuditReport") -> "AuditReport":
        out = AuditReport()
        for name in ("capacity_violations", "demand_violations", "conservation_residuals",
                     "negative_flows", "wardrop_violations"):
            setattr(out, name, getattr(self, name) + getattr(other, name))
        out.totals = {**self.totals, **other.totals}
        out.tolerances = {**self.tolerances, **other.tolerances}
        return out

    def to_dict(self) -> dict:
        doc = asdict(self)
        doc["verdict"] = self.verdict
        return doc

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1, sort_keys=True, default=float) + "\n"


def default_tol_avail(graph) -> float:
    cap = graph.capacity[graph.capacitated]
    return 1e-6 * float(np.median(cap)) if cap.size else 1e-6


# ----------------------------------------------------------------- decomposition

def flow_decompose(per_origin: dict, graph, tol: float = 1e-9) -> list[PathFlow]:
    """Peel per-origin link flows into path flows, walking arcs in topological order.

    Each origin's flow must conserve at every node except its demand sinks,
    which may only absorb.  Paths are assigned to the commodity owning the
    sink they end in.
    """
    paths = []
    for o in sorted(per_origin):
        x = np.array(per_origin[o], dtype=float)
        scale = max(1.0, float(np.abs(x).max(initial=0.0)))
        if np.any(x < -tol * scale):
            e = int(np.argmin(x))
            raise DecompositionError(f"negative flow {x[e]:.3g} on arc {e} for origin {o}")
        x = np.maximum(x, 0.0)
        owners: dict[int, list[int]] = {}
        for k in graph.commodities_of(o):
            owners.setdefault(graph.commodities[k].sink, []).append(k)
        net = np.zeros(graph.n_nodes)
        np.add.at(net, graph.head, x)
        np.subtract.at(net, graph.tail, x)
        for v in np.flatnonzero(np.abs(net) > tol * scale):
            v = int(v)
            if v == o or (v in owners and net[v] > 0):
                continue
            raise DecompositionError(
                f"flow of origin {graph.nodes[o].label()} is not conserved at node "
                f"{graph.nodes[v].label()} (residual {net[v]:.3g})")
        absorb = {v: float(net[v]) for v in owners}
        supply = -float(net[o])
        while supply > tol * scale:
            arcs, v = [], o
            while not (v in owners and absorb[v] > tol * scale):
                nxt = [e for e in graph.out_of(v) if x[e] > tol * scale]
                if not nxt:
                    raise DecompositionError(f"flow from origin {o} dead-ends at node {v}")
                e = nxt[0]
                arcs.append(e)
                v = int(graph.head[e])
            f = min([supply, absorb[v]] + [x[e] for e in arcs])
            x[arcs] -= f
            absorb[v] -= f
            supply -= f
            ks = owners[v]
            vol = sum(graph.commodities[k].volume for k in ks)
            for k in ks:
                share = f * graph.commodities[k].volume / vol if vol > 0 else f / len(ks)
                paths.append(PathFlow(k, tuple(arcs), share, graph.path_cost(arcs)))
    merged: dict[tuple, float] = {}
    for p in paths:
        merged[(p.commodity, p.arcs)] = merged.get((p.commodity, p.arcs), 0.0) + p.flow
    return [PathFlow(k, arcs, f, graph.path_cost(arcs)) for (k, arcs), f in sorted(merged.items())]


def solution_paths(sol: Solution, graph) -> list[PathFlow]:
    if sol.paths is not None:
        return sol.paths
    if sol.per_origin is not None:
        return flow_decompose(sol.per_origin, graph)
    if len(graph.origins) <= 1:
        return flow_decompose({o: sol.flows for o in graph.origins}, graph)
    raise DecompositionError("path flows or per-origin link flows are needed to audit several origins")


# ----------------------------------------------------------------- checks

def total_cost(sol: Solution, graph, paths=None) -> float:
    """Link cost sum; checked against the path cost sum when paths are known."""
    link = float(graph.cost @ sol.flows)
    paths = paths if paths is not None else sol.paths
    if paths:
        by_path = sum(p.flow * graph.path_cost(p.arcs) for p in paths)
        if abs(by_path - link) > 1e-9 * max(1.0, abs(link)):
            raise AssertionError(f"path costs sum to {by_path}, link costs to {link}")
    return link


def check_feasibility(sol: Solution, graph, tol: float = 1e-9, paths=None,
                      capacity_tol: float | None = None) -> AuditReport:
    """Nonnegativity, capacities, demand totals and (for link flows) conservation."""
    rep = AuditReport(tolerances={"feasibility": tol})
    x = np.asarray(sol.flows, dtype=float)
    if x.shape != (graph.n_arcs,):
        raise ValueError(f"solution has {x.size} arc flows, graph has {graph.n_arcs} arcs")
    for e in np.flatnonzero(x < -tol):
        rep.negative_flows.append((int(e), float(x[e])))
    cap = graph.capacitated
    ctol = np.full(cap.size, tol) if capacity_tol is None else capacity_tol * np.maximum(graph.capacity[cap], 1.0)
    excess = x[cap] - graph.capacity[cap]
    for e, ex in zip(cap[excess > ctol], excess[excess > ctol]):
        rep.capacity_violations.append((int(e), float(ex)))

    if paths is None and sol.per_origin is not None:
        for o, xo in sorted(sol.per_origin.items()):
            net = np.zeros(graph.n_nodes)
            np.add.at(net, graph.head, xo)
            np.subtract.at(net, graph.tail, xo)
            expected = np.zeros(graph.n_nodes)
            for k in graph.commodities_of(o):
                c = graph.commodities[k]
                expected[c.sink] += c.volume
                expected[o] -= c.volume
            for v in np.flatnonzero(np.abs(net - expected) > tol):
                rep.conservation_residuals.append((int(o), int(v), float(net[v] - expected[v])))
        shipped = np.zeros(len(graph.commodities))
        for o, xo in sol.per_origin.items():
            for k in graph.commodities_of(o):
                into = graph.into(graph.commodities[k].sink)
                shipped[k] = float(np.sum(xo[into])) if into else 0.0
    else:
        if paths is None:
            paths = solution_paths(sol, graph)
        shipped = np.zeros(len(graph.commodities))
        for p in paths:
            shipped[p.commodity] += p.flow
    for k, c in enumerate(graph.commodities):
        deficit = c.volume - shipped[k]
        if abs(deficit) > tol * max(1.0, c.volume):
            rep.demand_violations.append((k, float(deficit)))
    return rep


def check_wardrop(sol: Solution, graph, tol_cost: float = 1e-9, tol_avail: float | None = None,
                  paths=None, tol_flow: float = 1e-9, gap: float | None = None) -> AuditReport:
    """Flag used paths dearer than the cheapest path with spare capacity on every arc.

    With ``gap`` (the duality gap of an approximate solution), a used path
    is only flagged when shifting what fits onto the cheaper path would save
    more than the gap.
    """
    if tol_avail is None:
        tol_avail = default_tol_avail(graph)
    paths = paths if paths is not None else solution_paths(sol, graph)
    rep = AuditReport(tolerances={"cost": tol_cost, "availability": tol_avail, "flow": tol_flow})
    residual = np.full(graph.n_arcs, math.inf)
    cap = graph.capacitated
    residual[cap] = graph.capacity[cap] - sol.flows[cap]
    costs = np.where(residual > tol_avail, graph.cost, math.inf)
    best, room = {}, {}
    for o in graph.origins:
        tree = shortest_tree(graph, costs, o)
        for k in graph.commodities_of(o):
            sink = graph.commodities[k].sink
            best[k] = float(tree.dist[sink])
            if gap is not None and tree.reachable(sink):
                room[k] = float(min(residual[extract_path(tree, sink)], default=math.inf))
    shipped = np.zeros(len(graph.commodities))
    for p in paths:
        shipped[p.commodity] += p.flow
    for k, b in best.items():
        c = graph.commodities[k]
        if not math.isfinite(b) and c.volume - shipped[k] > tol_flow * max(1.0, c.volume):
            raise AuditError(f"demand {c.origin_id}->{c.destination_id} has unrouted volume and "
                             "no path with spare capacity; the input looks infeasible")
    worst = 0.0
    for p in paths:
        if p.flow <= tol_flow:
            continue
        used = graph.path_cost(p.arcs)
        b = best[p.commodity]
        if not math.isfinite(b):
            # every route of this demand is saturated somewhere; nothing cheaper is open
            continue
        excess = used - b
        worst = max(worst, excess)
        allowed = tol_cost * max(1.0, abs(b))
        if gap is not None and excess * min(p.flow, room[p.commodity]) <= max(gap, 0.0):
            continue
        if excess > allowed:
            rep.wardrop_violations.append((p.commodity, used, b, excess))
    rep.totals["max_wardrop_gap"] = worst
    return rep


def vi_gap(sol: Solution, graph) -> float:
    """``min_{x' feasible} cost(x') - cost(x)``; nonnegative for an equilibrium.

    Re-minimizes the link LP with an independent solver (HiGHS via SciPy).
    """
    from scipy.optimize import linprog

    from .lp import build_link_lp

    lp = build_link_lp(graph)
    A = lp.sparse()
    eq = [i for i, s in enumerate(lp.senses) if s == "E"]
    le = [i for i, s in enumerate(lp.senses) if s == "L"]
    res = linprog(lp.c, A_ub=A[le] if le else None, b_ub=lp.rhs[le] if le else None,
                  A_eq=A[eq] if eq else None, b_eq=lp.rhs[eq] if eq else None,
                  bounds=list(zip(lp.lower, lp.upper)), method="highs")
    if res.status != 0:
        raise ValueError(f"re-minimization failed: {res.message}")
    return float(res.fun) - float(graph.cost @ sol.flows)


def audit(sol: Solution, graph, tol: float = 1e-9, tol_avail: float | None = None,
          approximate: bool = False) -> AuditReport:
    """Full audit.  ``approximate`` relaxes tolerances for iterative (subgradient) output."""
    paths = solution_paths(sol, graph) if sol.per_origin is None or sol.paths is not None else None
    cap_tol = None
    gap = None
    if approximate:
        rel = max(tol, 1e-3)
        cap_tol = rel
        gap = abs(sol.gap) if math.isfinite(sol.gap) else None
        tol = max(tol, rel)
    rep = check_feasibility(sol, graph, tol, paths=paths, capacity_tol=cap_tol)
    if paths is None:
        try:
            paths = solution_paths(sol, graph)
        except DecompositionError:
            # conservation residuals are already on the report
            rep.totals["objective"] = float(graph.cost @ sol.flows)
            return rep
    rep = rep.merge(check_wardrop(sol, graph, tol, tol_avail, paths=paths, gap=gap))
    rep.totals["objective"] = total_cost(sol, graph, paths)
    rep.totals["max_gap"] = rep.totals.pop("max_wardrop_gap", 0.0)
    return rep
