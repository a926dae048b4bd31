"""Time discretization and the time-expanded graph.

Every regular node gets one copy per timepoint.  Origins stay timeless and
connect to every copy of their neighbours, so the departure time is a free
choice.  Destinations get two timed layers: *actual* copies reached by the
physical network, and *desired* copies (one per demanded arrival time) fed by
arrival-cost arcs that charge the schedule-delay penalty.

Road links are emitted with their fixed traversal time, and the point queue
lives in unit wait arcs at junction input nodes.  ``literal_roads=True``
instead emits one road arc per pair of times at least the free-flow time
apart; both constructions have the same optimal flows.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .demand import ArrivalCostParams, DemandTable, arrival_penalty
from .network import (ARTIFICIAL_IN, CONNECTOR, DESTINATION, JUNCTION, JUNCTION_LINK, ORIGIN, ROAD,
                      Link, TransportNetwork)

ORIGIN_LAYER = "origin"
NODE_LAYER = "node"
ACTUAL_LAYER = "actual"
DESIRED_LAYER = "desired"

ARC_ROAD = "road"
ARC_JUNCTION = "junction"
ARC_WAIT = "wait"
ARC_CONNECTOR = "connector"
ARC_ORIGIN = "origin-connector"
ARC_ARRIVAL = "arrival-cost"
ARC_CLASSES = (ARC_ROAD, ARC_JUNCTION, ARC_WAIT, ARC_CONNECTOR, ARC_ORIGIN, ARC_ARRIVAL)


class HorizonError(ValueError):
    """The time horizon cannot accommodate the requested demand."""


@dataclass(frozen=True)
class TimeGrid:
    """Timepoints ``start + k*dt`` for ``k = 0..T-1`` covering ``[start, end]``."""

    dt: float
    start: float
    end: float
    ties_later: bool = True

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if self.T < 2:
            raise ValueError("the horizon must contain at least two timepoints")

    @property
    def T(self) -> int:
        return int(math.floor((self.end - self.start) / self.dt + 1e-9)) + 1

    @property
    def length(self) -> float:
        return (self.T - 1) * self.dt

    def time_of(self, k: int) -> float:
        return self.start + k * self.dt

    def index_of(self, t: float) -> int:
        """Nearest grid index; exact halves go to the later point unless ``ties_later`` is off."""
        x = (t - self.start) / self.dt
        lo = math.floor(x + 1e-9)
        frac = x - lo
        if abs(frac - 0.5) <= 1e-9:
            return lo + 1 if self.ties_later else lo
        return lo + 1 if frac > 0.5 else lo

    def steps(self, duration: float) -> int:
        return max(1, math.ceil(duration / self.dt - 1e-9))


@dataclass(frozen=True)
class QuantizedLink:
    link: Link
    steps: int
    capacity: float  # vehicles per quant


@dataclass(frozen=True)
class QuantizedDemand:
    origin: str
    destination: str
    t_index: int
    volume: float
    params: ArrivalCostParams


@dataclass
class QuantizedInstance:
    net: TransportNetwork
    links: list[QuantizedLink]
    demands: list[QuantizedDemand]
    grid: TimeGrid
    warnings: list[str] = field(default_factory=list)


def quantize(net: TransportNetwork, demands: DemandTable, grid: TimeGrid) -> QuantizedInstance:
    """Express link times in quanta (rounded up) and capacities per quant.

    A warning is issued when rounding moves a free-flow time by more than 10%.
    """
    notes = []
    qlinks = []
    for link in net.links:
        steps = grid.steps(link.free_flow_time)
        change = abs(steps * grid.dt - link.free_flow_time) / link.free_flow_time
        if change > 0.1 + 1e-12:
            notes.append(
                f"link {link.id}: free-flow time {link.free_flow_time:g} rounded to "
                f"{steps} quanta ({steps * grid.dt:g}), a {100 * change:.0f}% change"
            )
        qlinks.append(QuantizedLink(link, steps, link.capacity * grid.dt))

    merged: dict[tuple, float] = {}
    for d in demands.records:
        if not (grid.start - 1e-9 <= d.desired_arrival <= grid.end + 1e-9):
            raise HorizonError(
                f"desired arrival {d.desired_arrival:g} of {d.origin}->{d.destination} "
                f"is outside the horizon [{grid.start:g}, {grid.end:g}]"
            )
        p = demands.params_for(d)
        key = (d.origin, d.destination, min(grid.index_of(d.desired_arrival), grid.T - 1), p)
        merged[key] = merged.get(key, 0.0) + d.volume
    qdemands = [QuantizedDemand(o, j, t, v, p) for (o, j, t, p), v in merged.items()]
    qdemands.sort(key=lambda q: (q.origin, q.destination, q.t_index, q.params.alpha, q.params.beta))

    for note in notes:
        warnings.warn(note, stacklevel=2)
    return QuantizedInstance(net, qlinks, qdemands, grid, notes)


@dataclass(frozen=True)
class TENode:
    base: str
    t: int | None
    layer: str
    # desired-arrival copies are split by cost parameters
    params: ArrivalCostParams | None = None

    def label(self) -> str:
        if self.t is None:
            return self.base
        mark = {NODE_LAYER: "", ACTUAL_LAYER: "'", DESIRED_LAYER: "*"}[self.layer]
        return f"{self.base}{mark}@{self.t}"


@dataclass(frozen=True)
class TELink:
    tail: TENode
    head: TENode
    klass: str
    cost: float
    capacity: float
    duration: int  # quanta; 0 for arrival-cost arcs


@dataclass(frozen=True)
class Commodity:
    """One aggregated demand: ``volume`` vehicles from ``origin`` to ``sink``."""

    origin: int
    sink: int
    volume: float
    origin_id: str
    destination_id: str
    t_index: int
    desired_arrival: float
    params: ArrivalCostParams


class TimeExpandedGraph:
    """Directed acyclic graph; node indices are a topological order.

    Arc attributes are stored column-wise in numpy arrays indexed by arc id.
    Arcs are sorted by ``(tail, head)`` so that every build is reproducible.
    """

    def __init__(self, nodes, tail, head, cost, capacity, klass, duration, commodities,
                 grid=None, source_link=None):
        self.nodes: list[TENode] = list(nodes)
        self.index = {n: k for k, n in enumerate(self.nodes)}
        order = np.lexsort((np.asarray(cost, float), np.asarray(klass), np.asarray(head), np.asarray(tail)))
        self.tail = np.asarray(tail, dtype=np.int64)[order]
        self.head = np.asarray(head, dtype=np.int64)[order]
        self.cost = np.asarray(cost, dtype=float)[order]
        self.capacity = np.asarray(capacity, dtype=float)[order]
        self.klass = np.asarray(klass, dtype=np.int8)[order]
        self.duration = np.asarray(duration, dtype=np.int64)[order]
        self.source_link = (
            [source_link[k] for k in order] if source_link is not None else [""] * len(order)
        )
        self.commodities: list[Commodity] = list(commodities)
        self.grid = grid
        if np.any(self.tail >= self.head):
            raise AssertionError("time-expanded graph is not in topological order")
        if np.any(self.cost < 0):
            raise ValueError("arc costs must be nonnegative")
        self._build_adjacency()

    def _build_adjacency(self):
        n = self.n_nodes
        self.out_ptr = np.zeros(n + 1, dtype=np.int64)
        np.add.at(self.out_ptr, self.tail + 1, 1)
        self.out_ptr = np.cumsum(self.out_ptr)
        self.out_arcs = np.argsort(self.tail, kind="stable")
        self.in_ptr = np.zeros(n + 1, dtype=np.int64)
        np.add.at(self.in_ptr, self.head + 1, 1)
        self.in_ptr = np.cumsum(self.in_ptr)
        self.in_arcs = np.argsort(self.head, kind="stable")
        self.capacitated = np.flatnonzero(np.isfinite(self.capacity))
        # plain lists are much faster than numpy scalars in the label loops
        self._in_lists = [self.in_arcs[self.in_ptr[v]:self.in_ptr[v + 1]].tolist() for v in range(n)]
        self._out_lists = [self.out_arcs[self.out_ptr[v]:self.out_ptr[v + 1]].tolist() for v in range(n)]
        self._tail_list = self.tail.tolist()
        self._head_list = self.head.tolist()

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def n_arcs(self) -> int:
        return len(self.tail)

    def out_of(self, v: int) -> list[int]:
        return self._out_lists[v]

    def into(self, v: int) -> list[int]:
        return self._in_lists[v]

    def klass_name(self, e: int) -> str:
        return ARC_CLASSES[self.klass[e]]

    def arc(self, e: int) -> TELink:
        return TELink(self.nodes[self.tail[e]], self.nodes[self.head[e]], self.klass_name(e),
                      float(self.cost[e]), float(self.capacity[e]), int(self.duration[e]))

    @property
    def origins(self) -> list[int]:
        return sorted({c.origin for c in self.commodities})

    def commodities_of(self, origin: int) -> list[int]:
        return [k for k, c in enumerate(self.commodities) if c.origin == origin]

    def reachable_from(self, origin: int) -> list[int]:
        """Nodes reachable from *origin*, in topological order (cached)."""
        cache = self.__dict__.setdefault("_reach", {})
        if origin not in cache:
            seen = np.zeros(self.n_nodes, dtype=bool)
            seen[origin] = True
            for v in range(origin, self.n_nodes):
                if seen[v]:
                    seen[self.head[self._out_lists[v]]] = True
            cache[origin] = np.flatnonzero(seen).tolist()
        return cache[origin]

    def node_time(self, v: int) -> float | None:
        t = self.nodes[v].t
        if t is None or self.grid is None:
            return t
        return self.grid.time_of(t)

    def path_cost(self, arcs, costs=None) -> float:
        c = self.cost if costs is None else costs
        return float(sum(c[e] for e in arcs))

    def to_dict(self) -> dict:
        return {
            "nodes": [
                {"id": k, "base": n.base, "t": n.t, "layer": n.layer}
                for k, n in enumerate(self.nodes)
            ],
            "links": [
                {
                    "tail": int(self.tail[e]),
                    "head": int(self.head[e]),
                    "class": self.klass_name(e),
                    "cost": float(self.cost[e]),
                    "capacity": "inf" if math.isinf(self.capacity[e]) else float(self.capacity[e]),
                }
                for e in range(self.n_arcs)
            ],
        }


def arc_cost(link: TELink, grid: TimeGrid) -> float:
    """Cost of one arc: elapsed time for physical arcs, schedule penalty for arrival arcs."""
    if link.klass == ARC_ARRIVAL:
        return arrival_penalty(grid.time_of(link.tail.t), grid.time_of(link.head.t), link.head.params)
    if link.tail.t is None:
        return link.duration * grid.dt
    return (link.head.t - link.tail.t) * grid.dt


def _node_sort_key(n: TENode):
    if n.layer == ORIGIN_LAYER:
        return (0, 0, 0, n.base, 0.0, 0.0)
    if n.layer == DESIRED_LAYER:
        return (2, 0, 0, n.base, n.t, n.params.alpha, n.params.beta)
    return (1, n.t, 0 if n.layer == NODE_LAYER else 1, n.base, 0.0, 0.0)


class _Builder:
    def __init__(self):
        self.nodes: dict[TENode, None] = {}
        self.arcs = []

    def node(self, n: TENode) -> TENode:
        self.nodes.setdefault(n, None)
        return n

    def arc(self, tail, head, klass, cost, capacity, duration, link_id=""):
        self.node(tail)
        self.node(head)
        self.arcs.append((tail, head, ARC_CLASSES.index(klass), cost, capacity, duration, link_id))


def build_time_expanded(net: TransportNetwork, demands, grid: TimeGrid | None = None, *,
                        literal_roads: bool = False, arrival_window: int | None = None,
                        check_horizon: bool = True) -> TimeExpandedGraph:
    """Build the time-expanded graph for a junction-expanded network.

    *demands* is either a :class:`DemandTable` (quantized here on *grid*) or a
    :class:`QuantizedInstance`.  ``arrival_window`` limits arrival-cost arcs to
    ``|t' - t| <= window`` quanta; ``None`` keeps the full horizon.
    """
    if isinstance(demands, QuantizedInstance):
        q = demands
        grid = q.grid
    else:
        if grid is None:
            raise ValueError("a TimeGrid is needed to quantize a demand table")
        q = quantize(net, demands, grid)
    if any(n.kind == JUNCTION for n in net.nodes.values()):
        raise ValueError("expand junctions before building the time-expanded graph")

    T, dt = grid.T, grid.dt
    kinds = {nid: n.kind for nid, n in net.nodes.items()}
    b = _Builder()

    def copy(nid, t):
        if kinds[nid] == ORIGIN:
            return TENode(nid, None, ORIGIN_LAYER)
        if kinds[nid] == DESTINATION:
            return TENode(nid, t, ACTUAL_LAYER)
        return TENode(nid, t, NODE_LAYER)

    road_heads = {ql.link.head for ql in q.links if ql.link.klass == ROAD}
    for ql in q.links:
        link, s = ql.link, ql.steps
        tk, hk = kinds[link.tail], kinds[link.head]
        if tk == DESTINATION:
            raise ValueError(f"link {link.id} leaves destination centroid {link.tail!r}")
        if hk == ORIGIN:
            raise ValueError(f"link {link.id} enters origin centroid {link.head!r}")
        cap = math.inf if link.klass == ROAD else ql.capacity
        if tk == ORIGIN:
            klass = ARC_ORIGIN
        else:
            klass = {ROAD: ARC_ROAD, JUNCTION_LINK: ARC_JUNCTION, CONNECTOR: ARC_CONNECTOR}[link.klass]
        if tk == ORIGIN:
            origin = copy(link.tail, None)
            for t in range(s, T):
                b.arc(origin, copy(link.head, t), klass, s * dt, cap, s, link.id)
        elif literal_roads and link.klass == ROAD:
            for t1 in range(T):
                for t2 in range(t1 + s, T):
                    b.arc(copy(link.tail, t1), copy(link.head, t2), klass, (t2 - t1) * dt, cap,
                          t2 - t1, link.id)
        else:
            for t in range(0, T - s):
                b.arc(copy(link.tail, t), copy(link.head, t + s), klass, s * dt, cap, s, link.id)

    for nid, kind in sorted(kinds.items()):
        if kind != ARTIFICIAL_IN:
            continue
        if literal_roads and nid in road_heads:
            continue  # queueing is already folded into the road arcs
        for t in range(T - 1):
            b.arc(TENode(nid, t, NODE_LAYER), TENode(nid, t + 1, NODE_LAYER), ARC_WAIT, dt, math.inf, 1)

    window = T if arrival_window is None else arrival_window
    sinks = {}
    for d in q.demands:
        sink = TENode(d.destination, d.t_index, DESIRED_LAYER, d.params)
        if sink in sinks:
            continue
        sinks[sink] = None
        b.node(sink)
        for tp in range(max(0, d.t_index - window), min(T, d.t_index + window + 1)):
            actual = TENode(d.destination, tp, ACTUAL_LAYER)
            if actual not in b.nodes:
                continue  # no physical arc arrives at this copy
            cost = arrival_penalty(grid.time_of(tp), grid.time_of(d.t_index), d.params)
            b.arc(actual, sink, ARC_ARRIVAL, cost, math.inf, 0)
    for o in sorted({d.origin for d in q.demands}):
        b.node(TENode(o, None, ORIGIN_LAYER))

    nodes = sorted(b.nodes, key=_node_sort_key)
    index = {n: k for k, n in enumerate(nodes)}
    if b.arcs:
        tails, heads, klasses, costs, caps, durs, link_ids = zip(*b.arcs)
    else:
        tails = heads = klasses = costs = caps = durs = link_ids = ()
    commodities = []
    for d in q.demands:
        commodities.append(Commodity(
            index[TENode(d.origin, None, ORIGIN_LAYER)],
            index[TENode(d.destination, d.t_index, DESIRED_LAYER, d.params)],
            d.volume, d.origin, d.destination, d.t_index, grid.time_of(d.t_index), d.params,
        ))
    graph = TimeExpandedGraph(
        nodes,
        [index[n] for n in tails],
        [index[n] for n in heads],
        costs, caps, klasses, durs, commodities, grid, list(link_ids),
    )
    if check_horizon:
        _check_horizon(graph)
    return graph


def _check_horizon(graph: TimeExpandedGraph):
    for o in graph.origins:
        seen = set(graph.reachable_from(o))
        for k in graph.commodities_of(o):
            c = graph.commodities[k]
            if c.volume > 0 and c.sink not in seen:
                raise HorizonError(
                    f"horizon too short: no path from {c.origin_id} to {c.destination_id} "
                    f"arriving near t={c.desired_arrival:g}"
                )


def graph_from_arcs(n_nodes: int, arcs, commodities) -> TimeExpandedGraph:
    """Wrap a hand-made DAG as a :class:`TimeExpandedGraph`.

    ``arcs`` holds ``(tail, head, cost, capacity)`` with ``tail < head``;
    ``commodities`` holds ``(origin, sink, volume)``.  Handy for unit tests and
    for instances that do not come from a road network.
    """
    nodes = [TENode(f"n{k}", k, NODE_LAYER) for k in range(n_nodes)]
    tails, heads, costs, caps = zip(*arcs) if arcs else ((), (), (), ())
    klass = [ARC_CLASSES.index(ARC_JUNCTION if math.isfinite(c) else ARC_ROAD) for c in caps]
    comms = [
        Commodity(o, s, float(v), f"n{o}", f"n{s}", s, float(s), ArrivalCostParams())
        for o, s, v in commodities
    ]
    return TimeExpandedGraph(nodes, tails, heads, costs, caps, klass, [0] * len(tails), comms)
