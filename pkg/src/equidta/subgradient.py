"""Lagrangian dual ascent on arc capacity prices.

Capacity constraints are priced out with multipliers ``y_e >= 0``.  Each
iteration routes every demand all-or-nothing on its shortest path under
``cost + y``, folds that assignment into a step-weighted running average of
flows, and moves prices along the capacity excess of the assignment.

Steps follow ``step0 / sqrt(k)``.  When the best dual value stops improving
for a while, ``step0`` is halved a bounded number of times; this keeps the
method from cycling between a few paths when prices are much smaller than
the free-flow diameter.
"""
from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .shortest_path import UnreachableError, extract_path, default_workers, shortest_tree, shortest_trees
from .solution import PathFlow, Solution, violation

log = logging.getLogger(__name__)


class DivergenceError(RuntimeError):
    pass


@dataclass
class SubgradientOptions:
    max_iter: int = 5000
    tol: float = 1e-3
    # "sqrt": step0/sqrt(k); "harmonic": step0/k; "polyak": needs target
    step_rule: str = "sqrt"
    step0: float | None = None
    # multiplier on the automatic step0 (free-flow diameter / first excess)
    step_scale: float = 2.0
    target: float | None = None
    # halve step0 when the best dual has not improved for this many iterations (0: never)
    stall_window: int = 300
    max_halvings: int = 6
    # start of the averaging window as a fraction of the iterations so far
    average_tail: float = 0.5
    repair: bool = False
    sp_method: str = "dag"
    # threads for the per-origin searches; None reads EQUIDTA_THREADS
    workers: int | None = None
    raise_on_divergence: bool = False


class _Accumulator:
    """Step-weighted running sums of flows and path shares from iteration ``start`` on."""

    def __init__(self, start: int, n_arcs: int):
        self.start = start
        self.weight = 0.0
        self.flows = np.zeros(n_arcs)
        self.paths: dict = {}

    def add(self, w: float, x: np.ndarray, paths):
        self.weight += w
        self.flows += w * x
        for key in paths:
            self.paths[key] = self.paths.get(key, 0.0) + w


@dataclass
class SolverState:
    graph: object
    options: SubgradientOptions
    y: np.ndarray
    k: int = 0
    best_dual: float = -math.inf
    best_y: np.ndarray | None = None
    primal: float = math.nan
    violation: float = math.inf
    step: float = 0.0
    step0: float | None = None
    x_last: np.ndarray | None = None
    dual_last: float = math.nan
    history: list = field(default_factory=list)
    # averaging windows open at powers of two; the latest one starting at or
    # before average_tail * k is reported
    windows: list = field(default_factory=list)
    last_improvement: int = 0
    halvings: int = 0
    workers: int = 1

    def window(self) -> _Accumulator:
        limit = max(1.0, self.options.average_tail * self.k)
        eligible = [w for w in self.windows if w.start <= limit and w.weight > 0]
        return eligible[-1] if eligible else self.windows[0]

    @property
    def x_bar(self) -> np.ndarray:
        w = self.window()
        return w.flows / w.weight if w.weight > 0 else w.flows

    @property
    def path_weights(self) -> dict:
        w = self.window()
        return {key: v / w.weight for key, v in w.paths.items()} if w.weight > 0 else {}


def _assign(graph, y, sp_method, workers=1):
    """All-or-nothing assignment under ``cost + y``; returns flows, dual value, paths."""
    costs = graph.cost + y
    x = np.zeros(graph.n_arcs)
    value = 0.0
    paths = []
    trees = shortest_trees(graph, costs, graph.origins, sp_method, workers)
    for o, tree in zip(graph.origins, trees):
        for k in graph.commodities_of(o):
            com = graph.commodities[k]
            if com.volume <= 0:
                continue
            if not tree.reachable(com.sink):
                raise UnreachableError(f"demand {com.origin_id}->{com.destination_id} is unreachable")
            arcs = extract_path(tree, com.sink)
            x[arcs] += com.volume
            value += com.volume * tree.dist[com.sink]
            paths.append((k, tuple(arcs)))
    cap = graph.capacitated
    value -= float(y[cap] @ graph.capacity[cap])
    return x, float(value), paths


def dual_value(graph, y) -> float:
    """Lagrangian dual function: sum_k d_k SP_k(cost + y) - sum_e y_e cap_e."""
    y = np.asarray(y, dtype=float)
    if np.any(y < 0):
        raise ValueError("prices must be nonnegative")
    return _assign(graph, y, "dag")[1]


def initial_state(graph, options: SubgradientOptions | None = None) -> SolverState:
    options = options or SubgradientOptions()
    workers = default_workers() if options.workers is None else options.workers
    return SolverState(graph, options, np.zeros(graph.n_arcs), workers=workers)


def _step_size(state: SolverState, excess: np.ndarray, dual: float) -> float:
    opt, k = state.options, state.k
    if opt.step_rule == "polyak":
        if opt.target is None:
            raise ValueError("Polyak steps need options.target (the optimal value)")
        norm2 = float(excess @ excess)
        # aim a little above the target so prices keep moving once it is reached
        lead = opt.tol * max(1.0, abs(opt.target))
        return 0.0 if norm2 == 0 else (max(0.0, opt.target - dual) + lead) / norm2
    if state.step0 is None:
        if opt.step0 is not None:
            state.step0 = opt.step0
        else:
            diameter = max(
                (float(shortest_tree(state.graph, state.graph.cost, o).dist[
                    [state.graph.commodities[j].sink for j in state.graph.commodities_of(o)]].max())
                 for o in state.graph.origins),
                default=1.0,
            )
            top = float(np.max(excess, initial=0.0))
            state.step0 = opt.step_scale * diameter / top if top > 0 else 1.0
    if opt.step_rule == "sqrt":
        return state.step0 / math.sqrt(k)
    if opt.step_rule == "harmonic":
        return state.step0 / k
    raise ValueError(f"unknown step rule {opt.step_rule!r}")


def iterate(state: SolverState) -> SolverState:
    """One dual step: assign, average, move prices.  Mutates and returns *state*."""
    g = state.graph
    state.k += 1
    x, dual, paths = _assign(g, state.y, state.options.sp_method, state.workers)
    state.x_last, state.dual_last = x, dual
    if dual > state.best_dual:
        if dual > state.best_dual + 1e-9 * max(1.0, abs(dual)):
            state.last_improvement = state.k
        state.best_dual = dual
        state.best_y = state.y.copy()
    opt = state.options
    restart = False
    if (opt.stall_window and state.step0 is not None and state.halvings < opt.max_halvings
            and state.k - state.last_improvement >= opt.stall_window):
        state.step0 *= 0.5
        state.halvings += 1
        state.last_improvement = state.k
        restart = True

    cap = g.capacitated
    excess = x[cap] - g.capacity[cap]
    # arcs that are unused and unpriced would stay at zero after projection
    active = (x[cap] > 0) | (state.y[cap] > 0)
    step = _step_size(state, np.where(active, excess, 0.0), dual)
    state.step = step

    k = state.k
    if k & (k - 1) == 0 or restart:
        state.windows.append(_Accumulator(k, g.n_arcs))
    w = step if step > 0 else 1e-300
    for acc in state.windows:
        acc.add(w, x, paths)
    keep = state.window()
    state.windows = [acc for acc in state.windows if acc.start >= keep.start]

    y_cap = state.y[cap]
    y_cap[active] = np.maximum(0.0, y_cap[active] + step * excess[active])
    state.y[cap] = y_cap

    state.primal = float(g.cost @ state.x_bar)
    state.violation = violation(g, state.x_bar)
    state.history.append({
        "k": state.k, "dual": dual, "primal": state.primal,
        "gap": state.primal - state.best_dual, "max_violation": state.violation, "step": step,
    })
    return state


def _converged(state: SolverState, tol: float) -> bool:
    g = state.graph
    gap = state.primal - state.best_dual
    if not gap <= tol * max(1.0, abs(state.best_dual)):
        return False
    cap = g.capacitated
    if cap.size == 0:
        return True
    return bool(np.all(state.x_bar[cap] - g.capacity[cap] <= tol * np.maximum(g.capacity[cap], 1.0)))


def solve(graph, options: SubgradientOptions | None = None, **kwargs) -> Solution:
    """Run dual subgradient ascent until the gap and capacity excess fall below ``tol``."""
    options = options or SubgradientOptions(**kwargs)
    state = initial_state(graph, options)
    total_demand = sum(c.volume for c in graph.commodities)
    if total_demand <= 0:
        return Solution("dual-subgradient", np.zeros(graph.n_arcs), 0.0, paths=[],
                        prices=np.zeros(graph.n_arcs), dual_bound=0.0, gap=0.0, iterations=1,
                        log=[{"k": 1, "dual": 0.0, "primal": 0.0, "gap": 0.0, "max_violation": 0.0,
                              "step": 0.0}])
    converged = False
    while state.k < options.max_iter:
        iterate(state)
        if _converged(state, options.tol):
            converged = True
            break
    status = "optimal" if converged else "not-converged"
    diverging = _diverging(state)
    if not converged and diverging:
        status = "infeasible-suspected"
        msg = (f"capacity excess {state.violation:.4g} is not shrinking after {state.k} iterations; "
               "the demand probably cannot be routed within the capacities")
        log.warning(msg)
        if options.raise_on_divergence:
            raise DivergenceError(msg)

    flows = state.x_bar
    paths = [PathFlow(k, arcs, w * graph.commodities[k].volume, graph.path_cost(arcs))
             for (k, arcs), w in sorted(state.path_weights.items())]
    info = {}
    if options.repair and state.violation > 0:
        from .repair import repair_flows
        flows, paths, info = repair_flows(graph, paths)
    objective = float(graph.cost @ flows)
    return Solution(
        "dual-subgradient", flows, objective, paths=paths, prices=state.best_y,
        dual_bound=state.best_dual, gap=objective - state.best_dual,
        max_violation=violation(graph, flows), infeasibility=state.violation, status=status,
        converged=converged, iterations=state.k, log=state.history, info=info,
    )


def _diverging(state: SolverState) -> bool:
    """Capacity excess of the averaged flows stalled well away from zero."""
    h = state.history
    if len(h) < 20:
        return False
    late = [r["max_violation"] for r in h[len(h) // 2:]]
    return min(late) > 0.5 * late[0] and state.violation > 1e-3 * max(1.0, late[0])


LOG_FIELDS = ("k", "dual", "primal", "gap", "max_violation", "step")


def write_log(history, fh):
    """Write the iteration log as CSV with columns ``k,dual,primal,gap,max_violation,step``."""
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(LOG_FIELDS)
    for rec in history:
        w.writerow([rec["k"]] + [repr(float(rec[f])) for f in LOG_FIELDS[1:]])
