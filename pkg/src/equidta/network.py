"""Static transportation graph: loading, validation and junction splitting.

A raw network has junction nodes whose allowed turns live in a turn table.
:func:`expand_junctions` rewrites every junction into artificial input and
output nodes joined by one junction link per allowed turn, so the result is a
plain directed graph whose links carry a capacity and a free-flow time.
"""
from __future__ import annotations

import json
import math
import warnings
from collections import defaultdict, deque
from dataclasses import dataclass, field, replace
from typing import Iterable

JUNCTION = "junction"
ORIGIN = "origin"
DESTINATION = "destination"
ARTIFICIAL_IN = "artificial-in"
ARTIFICIAL_OUT = "artificial-out"
NODE_KINDS = (JUNCTION, ORIGIN, DESTINATION, ARTIFICIAL_IN, ARTIFICIAL_OUT)
_KIND_ALIASES = {"origin-centroid": ORIGIN, "destination-centroid": DESTINATION}

ROAD = "road"
JUNCTION_LINK = "junction"
CONNECTOR = "connector"
LINK_CLASSES = (ROAD, JUNCTION_LINK, CONNECTOR)


class NetworkError(ValueError):
    """Raised for malformed or inconsistent network documents."""


@dataclass(frozen=True)
class Node:
    id: str
    kind: str
    # id of the raw junction an artificial node was split from
    junction: str | None = None


@dataclass(frozen=True)
class Link:
    tail: str
    head: str
    klass: str
    capacity: float
    free_flow_time: float
    id: str = ""

    def __post_init__(self):
        if not self.id:
            object.__setattr__(self, "id", f"{self.tail}->{self.head}")

    @property
    def capacitated(self) -> bool:
        return math.isfinite(self.capacity)


@dataclass(frozen=True)
class Turn:
    junction: str
    in_link: str
    out_link: str
    capacity: float | None = None
    time: float | None = None


@dataclass
class TransportNetwork:
    nodes: dict[str, Node]
    links: list[Link]
    turns: list[Turn] = field(default_factory=list)

    def __post_init__(self):
        self._by_id = {link.id: link for link in self.links}

    def link(self, link_id: str) -> Link:
        return self._by_id[link_id]

    @property
    def origins(self) -> list[str]:
        return sorted(n.id for n in self.nodes.values() if n.kind == ORIGIN)

    @property
    def destinations(self) -> list[str]:
        return sorted(n.id for n in self.nodes.values() if n.kind == DESTINATION)

    @property
    def junctions(self) -> list[str]:
        return sorted(n.id for n in self.nodes.values() if n.kind == JUNCTION)

    def out_links(self, node_id: str) -> list[Link]:
        return [link for link in self.links if link.tail == node_id]

    def in_links(self, node_id: str) -> list[Link]:
        return [link for link in self.links if link.head == node_id]

    def links_of_class(self, klass: str) -> list[Link]:
        return [link for link in self.links if link.klass == klass]

    def successors(self) -> dict[str, list[str]]:
        succ = defaultdict(list)
        for link in self.links:
            succ[link.tail].append(link.head)
        return succ

    def to_dict(self) -> dict:
        return {
            "nodes": [
                {"id": n.id, "kind": n.kind, **({"junction": n.junction} if n.junction else {})}
                for n in sorted(self.nodes.values(), key=lambda n: n.id)
            ],
            "links": [
                {
                    "id": link.id,
                    "tail": link.tail,
                    "head": link.head,
                    "class": link.klass,
                    "capacity": _dump_capacity(link.capacity),
                    "free_flow_time": link.free_flow_time,
                }
                for link in self.links
            ],
            "turns": [
                {
                    "junction": t.junction,
                    "in_link": t.in_link,
                    "out_link": t.out_link,
                    "capacity": _dump_capacity(t.capacity) if t.capacity is not None else None,
                    "time": t.time,
                }
                for t in self.turns
            ],
        }


def _dump_capacity(value: float):
    return "inf" if math.isinf(value) else value


def _parse_capacity(raw, where: str) -> float:
    if isinstance(raw, str):
        if raw.strip().lower() == "inf":
            return math.inf
        try:
            raw = float(raw)
        except ValueError:
            raise NetworkError(f"{where}: capacity must be a number or \"inf\", got {raw!r}") from None
    if isinstance(raw, bool) or not isinstance(raw, (int, float)):
        raise NetworkError(f"{where}: capacity must be a number or \"inf\", got {raw!r}")
    value = float(raw)
    if math.isnan(value):
        raise NetworkError(f"{where}: capacity is NaN")
    if value < 0:
        raise NetworkError(f"{where}: negative capacity {value:g}")
    return value


def _require(record: dict, key: str, where: str):
    if not isinstance(record, dict):
        raise NetworkError(f"{where}: expected an object, got {type(record).__name__}")
    if key not in record:
        raise NetworkError(f"{where}: missing key {key!r}")
    return record[key]


def network_from_dict(doc: dict) -> TransportNetwork:
    """Validate a decoded network document and build a raw network."""
    if not isinstance(doc, dict):
        raise NetworkError("network document must be a JSON object")
    for key in ("nodes", "links"):
        if not isinstance(doc.get(key), list):
            raise NetworkError(f"network document needs a {key!r} array")
    turns_raw = doc.get("turns", [])
    if not isinstance(turns_raw, list):
        raise NetworkError("'turns' must be an array")

    nodes: dict[str, Node] = {}
    for k, rec in enumerate(doc["nodes"]):
        where = f"nodes[{k}]"
        node_id = str(_require(rec, "id", where))
        kind = str(_require(rec, "kind", where))
        kind = _KIND_ALIASES.get(kind, kind)
        if kind not in NODE_KINDS:
            raise NetworkError(f"{where}: unknown node kind {kind!r}")
        if node_id in nodes:
            raise NetworkError(f"duplicate node id {node_id!r}")
        nodes[node_id] = Node(node_id, kind, rec.get("junction"))

    links: list[Link] = []
    seen_links: set[str] = set()
    for k, rec in enumerate(doc["links"]):
        where = f"links[{k}]"
        tail = str(_require(rec, "tail", where))
        head = str(_require(rec, "head", where))
        klass = str(_require(rec, "class", where))
        capacity = _parse_capacity(_require(rec, "capacity", where), where)
        fft = _require(rec, "free_flow_time", where)
        if isinstance(fft, bool) or not isinstance(fft, (int, float)):
            raise NetworkError(f"{where}: free_flow_time must be a number")
        if klass not in LINK_CLASSES:
            raise NetworkError(f"{where}: unknown link class {klass!r}")
        if not fft > 0:
            raise NetworkError(f"{where}: nonpositive free-flow time {fft}")
        for end in (tail, head):
            if end not in nodes:
                raise NetworkError(f"{where}: unknown node {end!r}")
        if tail == head:
            raise NetworkError(f"{where}: self-loop at {tail!r}")
        if klass == ROAD and math.isfinite(capacity):
            raise NetworkError(
                f"{where}: road links carry infinite capacity; "
                "model a bottleneck with a single-in/single-out junction"
            )
        link = Link(tail, head, klass, capacity, float(fft), str(rec.get("id", "")))
        if link.id in seen_links:
            raise NetworkError(f"duplicate link id {link.id!r}")
        seen_links.add(link.id)
        links.append(link)

    turns = []
    for k, rec in enumerate(turns_raw):
        where = f"turns[{k}]"
        cap = rec.get("capacity") if isinstance(rec, dict) else None
        time = rec.get("time") if isinstance(rec, dict) else None
        turn = Turn(
            str(_require(rec, "junction", where)),
            str(_require(rec, "in_link", where)),
            str(_require(rec, "out_link", where)),
            None if cap is None else _parse_capacity(cap, where),
            None if time is None else float(time),
        )
        if turn.time is not None and not turn.time > 0:
            raise NetworkError(f"{where}: nonpositive turn time {turn.time}")
        turns.append(turn)

    return TransportNetwork(nodes, links, turns)


def load_network(text: str) -> TransportNetwork:
    """Parse a network JSON document (see README for the schema)."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise NetworkError(f"invalid JSON: {exc}") from None
    return network_from_dict(doc)


def expand_junctions(raw: TransportNetwork) -> TransportNetwork:
    """Split every junction node into artificial input/output nodes.

    In-link ``(v1, v2)`` is re-headed to a node standing for ``v12``, out-link
    ``(v2, v3)`` is re-tailed from ``v23``, and each allowed turn becomes a
    junction link ``(v12, v23)`` with the turn's capacity and time.  Missing
    turn attributes default to one time unit and the smaller capacity of the
    two adjacent links.  Networks without junctions are returned unchanged.
    """
    junctions = set(raw.junctions)
    if not junctions:
        return raw

    turns_at = defaultdict(list)
    for turn in raw.turns:
        if turn.junction not in junctions:
            raise NetworkError(f"turn references unknown junction {turn.junction!r}")
        for link_id, end in ((turn.in_link, "head"), (turn.out_link, "tail")):
            if link_id not in raw._by_id:
                raise NetworkError(f"turn at {turn.junction!r} references missing link {link_id!r}")
            if getattr(raw.link(link_id), end) != turn.junction:
                raise NetworkError(
                    f"turn at {turn.junction!r}: link {link_id!r} is not adjacent to the junction"
                )
        turns_at[turn.junction].append(turn)

    def in_node(link: Link) -> str:
        return f"{link.head}/in/{link.id}"

    def out_node(link: Link) -> str:
        return f"{link.tail}/out/{link.id}"

    nodes = {nid: n for nid, n in raw.nodes.items() if nid not in junctions}
    links = []
    for link in raw.links:
        tail, head = link.tail, link.head
        if head in junctions:
            head = in_node(link)
            nodes[head] = Node(head, ARTIFICIAL_IN, link.head)
        if tail in junctions:
            tail = out_node(link)
            nodes[tail] = Node(tail, ARTIFICIAL_OUT, link.tail)
        links.append(replace(link, tail=tail, head=head))

    for v in sorted(junctions):
        if not turns_at[v]:
            warnings.warn(f"junction {v!r} has no allowed turns; its links become dead ends", stacklevel=2)
        for turn in turns_at[v]:
            a, b = raw.link(turn.in_link), raw.link(turn.out_link)
            cap = turn.capacity if turn.capacity is not None else min(a.capacity, b.capacity)
            time = turn.time if turn.time is not None else 1.0
            links.append(
                Link(in_node(a), out_node(b), JUNCTION_LINK, cap, time, id=f"{v}:{a.id}=>{b.id}")
            )
    return TransportNetwork(nodes, links, [])


def reachable(succ: dict[str, list[str]], sources: Iterable[str]) -> set[str]:
    seen = set(sources)
    queue = deque(seen)
    while queue:
        u = queue.popleft()
        for v in succ.get(u, ()):
            if v not in seen:
                seen.add(v)
                queue.append(v)
    return seen


def validate_network(net: TransportNetwork) -> list[str]:
    """Return human-readable diagnostics; an empty list means no findings."""
    diags = []
    succ = net.successors()
    touched = {link.tail for link in net.links} | {link.head for link in net.links}
    for nid in sorted(net.nodes):
        if nid not in touched:
            diags.append(f"dangling node {nid!r}")

    for o in net.origins:
        if not net.out_links(o):
            diags.append(f"origin isolated: {o!r} has no outgoing link")
    from_any_origin = reachable(succ, net.origins)
    for d in net.destinations:
        if d not in from_any_origin:
            diags.append(f"unreachable destination {d!r}")

    by_junction = defaultdict(list)
    for link in net.links_of_class(JUNCTION_LINK):
        junction = net.nodes[link.tail].junction or link.tail
        by_junction[junction].append(link)
    for junction, jlinks in sorted(by_junction.items()):
        if all(link.capacity == 0 for link in jlinks):
            diags.append(f"zero-capacity cut at junction {junction!r}")
    return diags
