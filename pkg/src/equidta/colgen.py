"""Path-based column generation for the capacitated assignment LP.

The restricted master carries one flow variable per known path, an
expensive artificial column per demand (so it is always feasible) and a
capacity row for every capacitated arc that some known path uses.  Its
duals price the full graph: each demand's shortest path under ``cost + y``
enters when it undercuts the demand's potential ``sigma``.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .lp import LPError, StandardFormLP, dense_simplex
from .shortest_path import UnreachableError, extract_path, shortest_tree, shortest_trees
from .solution import PathFlow, Solution, violation

log = logging.getLogger(__name__)

# reduced costs below -PRICE_TOL admit a column
PRICE_TOL = 1e-9


class CyclingError(RuntimeError):
    pass


@dataclass
class ColumnGenerationOptions:
    max_iter: int = 10_000
    tol: float = PRICE_TOL
    # restrict capacity rows to arcs crossed by known paths
    prune: bool = True
    # evict paths that stayed empty and nonbasic this many solves in a row
    evict_after: int = 20
    big_m: float | None = None
    sp_method: str = "dag"
    # threads for pricing; None reads EQUIDTA_THREADS
    workers: int | None = None


@dataclass
class Column:
    commodity: int
    arcs: tuple[int, ...]
    cost: float
    idle: int = 0


@dataclass
class MasterResult:
    flows: dict[int, float]  # column position -> flow
    artificial: np.ndarray
    y: np.ndarray            # per graph arc
    sigma: np.ndarray        # per commodity
    objective: float
    basis: list[int]
    capacity_arcs: np.ndarray


def longest_path_bound(graph) -> float:
    """Largest cost of any origin-to-sink path; bounds every column's cost."""
    best = 0.0
    for o in graph.origins:
        dist = np.full(graph.n_nodes, -math.inf)
        dist[o] = 0.0
        for v in graph.reachable_from(o)[1:]:
            ins = graph.into(v)
            dist[v] = max(dist[graph._tail_list[e]] + graph.cost[e] for e in ins)
        sinks = [graph.commodities[k].sink for k in graph.commodities_of(o)]
        if sinks:
            best = max(best, float(np.max(dist[sinks])))
    return best


class RestrictedMaster:
    """Known paths per demand plus the LP over them."""

    def __init__(self, graph, *, prune: bool = True, big_m: float | None = None,
                 arc_costs: np.ndarray | None = None, artificial_cost: float | None = None):
        self.graph = graph
        self.prune = prune
        self.costs = graph.cost if arc_costs is None else np.asarray(arc_costs, dtype=float)
        for o in graph.origins:
            reach = set(graph.reachable_from(o))
            for k in graph.commodities_of(o):
                com = graph.commodities[k]
                if com.volume > 0 and com.sink not in reach:
                    raise UnreachableError(
                        f"demand {com.origin_id}->{com.destination_id} cannot reach its destination")
        if artificial_cost is not None:
            self.big_m = artificial_cost
        elif big_m is not None:
            self.big_m = big_m
        else:
            self.big_m = 10.0 * max(1.0, longest_path_bound(graph))
        self.columns: list[Column] = []
        self._known: set[tuple] = set()
        self.demand = np.array([c.volume for c in graph.commodities], dtype=float)

    def add(self, commodity: int, arcs) -> bool:
        arcs = tuple(int(e) for e in arcs)
        key = (commodity, arcs)
        if key in self._known:
            return False
        self._known.add(key)
        self.columns.append(Column(commodity, arcs, float(self.costs[list(arcs)].sum())))
        return True

    def remove(self, positions):
        drop = set(positions)
        for p in drop:
            c = self.columns[p]
            self._known.discard((c.commodity, c.arcs))
        self.columns = [c for i, c in enumerate(self.columns) if i not in drop]

    def capacity_arcs(self) -> np.ndarray:
        cap = self.graph.capacitated
        if not self.prune:
            return cap
        used = np.zeros(self.graph.n_arcs, dtype=bool)
        for c in self.columns:
            used[list(c.arcs)] = True
        return cap[used[cap]]

    def build_lp(self) -> tuple[StandardFormLP, np.ndarray]:
        g = self.graph
        K = len(g.commodities)
        cap_arcs = self.capacity_arcs()
        row_of = {int(e): K + i for i, e in enumerate(cap_arcs)}
        rows, cols, vals = [], [], []
        for j, c in enumerate(self.columns):
            rows.append(c.commodity)
            cols.append(j)
            vals.append(1.0)
            for e in c.arcs:
                r = row_of.get(e)
                if r is not None:
                    rows.append(r)
                    cols.append(j)
                    vals.append(1.0)
        n_paths = len(self.columns)
        for k in range(K):
            rows.append(k)
            cols.append(n_paths + k)
            vals.append(1.0)
        n = n_paths + K
        c = np.concatenate([[col.cost for col in self.columns], np.full(K, self.big_m)])
        lp = StandardFormLP(
            c=c, rows=np.array(rows, dtype=np.int64), cols=np.array(cols, dtype=np.int64),
            vals=np.array(vals), senses=["E"] * K + ["L"] * len(cap_arcs),
            rhs=np.concatenate([self.demand, g.capacity[cap_arcs]]),
            lower=np.zeros(n), upper=np.full(n, math.inf),
            row_names=[f"d{k}" for k in range(K)] + [f"u{e}" for e in cap_arcs],
            col_names=[f"p{j}" for j in range(n_paths)] + [f"a{k}" for k in range(K)],
            name="MASTER",
        )
        return lp, cap_arcs


def solve_master(rm: RestrictedMaster, tol: float = PRICE_TOL) -> MasterResult:
    """Optimal basic solution of the restricted master and its duals.

    Uses Bland's rule throughout.  Checks that every basic path of a demand
    has the same adjusted cost ``cost + y``, equal to the demand's potential.
    """
    g = rm.graph
    lp, cap_arcs = rm.build_lp()
    try:
        res = dense_simplex(lp, rule="bland")
    except LPError as exc:
        raise CyclingError(str(exc)) from exc
    if res.status != "optimal":
        # the artificial columns make the master feasible and bounded
        raise CyclingError(f"restricted master ended with status {res.status}")
    K = len(g.commodities)
    n_paths = len(rm.columns)
    sigma = res.duals[:K].copy()
    y = np.zeros(g.n_arcs)
    y[cap_arcs] = np.maximum(0.0, -res.duals[K:])
    scale = max(1.0, float(np.abs(lp.c).max(initial=0.0)))
    for j in res.basis:
        if j < n_paths:
            col = rm.columns[j]
            adjusted = col.cost + float(y[list(col.arcs)].sum())
            if abs(adjusted - sigma[col.commodity]) > 1e-7 * scale:
                raise AssertionError(
                    f"basic path {j} of demand {col.commodity} has adjusted cost {adjusted}, "
                    f"potential {sigma[col.commodity]}")
    flows = {j: float(res.x[j]) for j in range(n_paths)}
    return MasterResult(flows, res.x[n_paths:], y, sigma, res.objective, list(res.basis), cap_arcs)


def price(graph, y, sigma, tol: float = PRICE_TOL, arc_costs=None, sp_method: str = "dag",
          workers: int | None = None):
    """Improving columns: per demand, the shortest path under ``cost + y`` if it undercuts ``sigma``.

    Returns a list of ``(commodity, arcs, reduced_cost)``; empty means the
    restricted master is optimal for the full problem.
    """
    base = graph.cost if arc_costs is None else arc_costs
    costs = base + np.asarray(y, dtype=float)
    out = []
    origins = [o for o in graph.origins if any(graph.commodities[k].volume > 0 for k in graph.commodities_of(o))]
    for o, tree in zip(origins, shortest_trees(graph, costs, origins, sp_method, workers)):
        for k in graph.commodities_of(o):
            if graph.commodities[k].volume <= 0:
                continue
            sink = graph.commodities[k].sink
            reduced = float(tree.dist[sink]) - float(sigma[k])
            if reduced < -tol:
                out.append((k, tuple(extract_path(tree, sink)), reduced))
    return out


def _initial_columns(rm: RestrictedMaster, sp_method: str):
    g = rm.graph
    for o in g.origins:
        tree = shortest_tree(g, rm.costs, o, sp_method)
        for k in g.commodities_of(o):
            if g.commodities[k].volume > 0:
                rm.add(k, extract_path(tree, g.commodities[k].sink))


def _generate(rm: RestrictedMaster, opt: ColumnGenerationOptions, history: list):
    """Alternate master solves and pricing until no column prices out."""
    last = math.inf
    for it in range(1, opt.max_iter + 1):
        mr = solve_master(rm)
        scale = max(1.0, abs(mr.objective))
        if mr.objective > last + 1e-9 * scale:
            raise AssertionError(f"master objective rose from {last} to {mr.objective}")
        last = mr.objective
        basic = set(mr.basis)
        n_basic_paths = sum(1 for j in mr.basis if j < len(rm.columns))
        history.append({"iteration": it, "objective": mr.objective, "columns": len(rm.columns),
                        "capacity_rows": len(mr.capacity_arcs), "basic_paths": n_basic_paths,
                        "artificial": float(mr.artificial.sum())})
        new = price(rm.graph, mr.y, mr.sigma, opt.tol, rm.costs, opt.sp_method, opt.workers)
        if not new:
            return mr, it, True
        evict = []
        for j, col in enumerate(rm.columns):
            if mr.flows[j] > 0 or j in basic:
                col.idle = 0
            else:
                col.idle += 1
                if opt.evict_after and col.idle >= opt.evict_after:
                    evict.append(j)
        rm.remove(evict)
        added = sum(rm.add(k, arcs) for k, arcs, _ in new)
        if not added:
            # an evicted column priced back in at once; keep it this time
            return mr, it, True
    return mr, opt.max_iter, False


def _feasible(graph, opt: ColumnGenerationOptions) -> bool:
    """Phase-1 check: can the demand be routed at all within the capacities?"""
    rm = RestrictedMaster(graph, prune=opt.prune, arc_costs=np.zeros(graph.n_arcs), artificial_cost=1.0)
    _initial_columns(rm, opt.sp_method)
    mr, _, _ = _generate(rm, opt, [])
    return float(mr.artificial.sum()) <= 1e-9 * max(1.0, float(rm.demand.sum()))


def solve(graph, options: ColumnGenerationOptions | None = None, **kwargs) -> Solution:
    """Solve the assignment LP by column generation; path flows come back natively."""
    opt = options or ColumnGenerationOptions(**kwargs)
    K = len(graph.commodities)
    if K == 0 or all(c.volume <= 0 for c in graph.commodities):
        return Solution("column-generation", np.zeros(graph.n_arcs), 0.0, paths=[],
                        prices=np.zeros(graph.n_arcs), potentials=np.zeros(K), dual_bound=0.0,
                        gap=0.0, iterations=0)
    rm = RestrictedMaster(graph, prune=opt.prune, big_m=opt.big_m)
    _initial_columns(rm, opt.sp_method)
    history: list = []
    while True:
        mr, iters, done = _generate(rm, opt, history)
        leftover = float(mr.artificial.sum())
        if leftover <= 1e-9 * max(1.0, float(rm.demand.sum())) or not done:
            break
        if not _feasible(graph, opt):
            break
        # feasible, so the artificial cost was too low to push them out
        rm.big_m *= 100.0
        for col in rm.columns:
            col.idle = 0
        log.info("raising the artificial cost to %g", rm.big_m)

    paths = [PathFlow(c.commodity, c.arcs, mr.flows[j], c.cost)
             for j, c in enumerate(rm.columns) if mr.flows[j] > 0]
    flows = np.zeros(graph.n_arcs)
    for p in paths:
        flows[list(p.arcs)] += p.flow
    leftover = float(mr.artificial.sum())
    infeasible = leftover > 1e-9 * max(1.0, float(rm.demand.sum()))
    status = "infeasible" if infeasible else ("optimal" if done else "not-converged")
    objective = float(graph.cost @ flows) if not infeasible else mr.objective
    cap = mr.capacity_arcs
    dual = float(mr.sigma @ rm.demand - mr.y[cap] @ graph.capacity[cap])
    info = {"columns": len(rm.columns), "big_m": rm.big_m, "artificial_flow": leftover,
            "basic_paths": history[-1]["basic_paths"], "capacity_rows": int(len(cap))}
    if infeasible:
        info["unrouted"] = {f"{graph.commodities[k].origin_id}->{graph.commodities[k].destination_id}":
                            float(v) for k, v in enumerate(mr.artificial) if v > 0}
    return Solution(
        "column-generation", flows, objective, paths=paths, prices=mr.y, potentials=mr.sigma,
        dual_bound=dual, gap=objective - dual, max_violation=violation(graph, flows),
        infeasibility=leftover, status=status, converged=done and not infeasible,
        iterations=iters, log=history, info=info,
    )
