"""Single-origin shortest paths on the time-expanded DAG.

Two label-setting backends give identical trees: a binary-heap Dijkstra and
a relaxation in topological order (node indices of a
:class:`~equidta.expansion.TimeExpandedGraph` are already topological).
Among arcs that attain a node's label, the one with the smallest index
becomes its parent, so trees do not depend on the backend.
"""
from __future__ import annotations

import heapq
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

INF = math.inf
TIE_TOL = 1e-12
THREADS_ENV = "EQUIDTA_THREADS"


class UnreachableError(ValueError):
    pass


@dataclass
class PathTree:
    origin: int
    dist: np.ndarray
    parent: np.ndarray  # arc index, -1 for the origin and unreachable nodes
    tails: list

    def reachable(self, v: int) -> bool:
        return math.isfinite(self.dist[v])


def _pick_parents(graph, costs, dist, nodes):
    parent = np.full(graph.n_nodes, -1, dtype=np.int64)
    tails = graph._tail_list
    for v in nodes:
        dv = dist[v]
        if dv == INF:
            continue
        slack = TIE_TOL * max(1.0, abs(dv))
        for e in graph.into(v):
            if dist[tails[e]] + costs[e] <= dv + slack:
                parent[v] = e
                break
    return parent


def _dag_labels(graph, costs, origin):
    n = graph.n_nodes
    dist = [INF] * n
    dist[origin] = 0.0
    tails = graph._tail_list
    order = graph.reachable_from(origin)
    for v in order[1:]:
        best = INF
        for e in graph.into(v):
            d = dist[tails[e]] + costs[e]
            if d < best:
                best = d
        dist[v] = best
    return dist, order


def _dijkstra_labels(graph, costs, origin):
    n = graph.n_nodes
    dist = [INF] * n
    dist[origin] = 0.0
    done = [False] * n
    heads = graph._head_list
    heap = [(0.0, origin)]
    settled = []
    while heap:
        d, u = heapq.heappop(heap)
        if done[u]:
            continue
        done[u] = True
        settled.append(u)
        for e in graph.out_of(u):
            v = heads[e]
            nd = d + costs[e]
            if nd < dist[v]:
                dist[v] = nd
                heapq.heappush(heap, (nd, v))
    return dist, sorted(settled)


def shortest_tree(graph, costs, origin: int, method: str = "dag") -> PathTree:
    """Exact shortest-path tree from *origin* under nonnegative arc *costs*.

    ``method`` is ``"dag"`` (topological relaxation) or ``"dijkstra"``.
    Unreachable nodes keep an infinite label.
    """
    costs = np.asarray(costs, dtype=float)
    if costs.shape != (graph.n_arcs,):
        raise ValueError(f"expected {graph.n_arcs} arc costs, got shape {costs.shape}")
    if costs.size and costs.min() < 0:
        raise ValueError("negative arc cost; label-setting search needs costs >= 0")
    cl = costs.tolist()
    if method == "dag":
        dist, nodes = _dag_labels(graph, cl, origin)
    elif method == "dijkstra":
        dist, nodes = _dijkstra_labels(graph, cl, origin)
    else:
        raise ValueError(f"unknown shortest-path method {method!r}")
    parent = _pick_parents(graph, cl, dist, nodes)
    return PathTree(origin, np.array(dist), parent, graph._tail_list)


def extract_path(tree: PathTree, dest: int) -> list[int]:
    """Arc sequence from the tree's origin to *dest*."""
    if not tree.reachable(dest):
        raise UnreachableError(f"node {dest} is unreachable from {tree.origin}")
    arcs = []
    v = dest
    while v != tree.origin:
        e = int(tree.parent[v])
        arcs.append(e)
        v = tree.tails[e]
    arcs.reverse()
    return arcs


def default_workers() -> int:
    """Worker threads for per-origin searches, from ``EQUIDTA_THREADS`` (default 1)."""
    raw = os.environ.get(THREADS_ENV, "1")
    try:
        n = int(raw)
    except ValueError:
        raise ValueError(f"{THREADS_ENV} must be a positive integer, got {raw!r}") from None
    if n < 1:
        raise ValueError(f"{THREADS_ENV} must be a positive integer, got {raw!r}")
    return n


def shortest_trees(graph, costs, origins, method: str = "dag", workers: int | None = None) -> list[PathTree]:
    """One tree per origin, in the order given; searches may run on several threads."""
    origins = list(origins)
    costs = np.asarray(costs, dtype=float)
    workers = default_workers() if workers is None else workers
    if workers <= 1 or len(origins) <= 1:
        return [shortest_tree(graph, costs, o, method) for o in origins]
    with ThreadPoolExecutor(max_workers=min(workers, len(origins))) as pool:
        return list(pool.map(lambda o: shortest_tree(graph, costs, o, method), origins))
