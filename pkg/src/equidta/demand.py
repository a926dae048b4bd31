"""Time-dependent origin-destination demand and the schedule-delay penalty."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass

from .network import TransportNetwork


class DemandError(ValueError):
    pass


@dataclass(frozen=True)
class ArrivalCostParams:
    """Cost per time unit of arriving late (``alpha``) or early (``beta``).

    Both are dimensionless: one unit of travel time costs 1.
    """

    alpha: float = 2.0
    beta: float = 0.5

    def __post_init__(self):
        if not (self.alpha > 0 and self.beta > 0):
            raise DemandError(f"alpha and beta must be positive, got {self.alpha}, {self.beta}")


@dataclass(frozen=True)
class Demand:
    origin: str
    destination: str
    desired_arrival: float
    volume: float
    params: ArrivalCostParams | None = None

    @property
    def key(self):
        return (self.origin, self.destination, self.desired_arrival)


@dataclass
class DemandTable:
    records: list[Demand]
    params: ArrivalCostParams

    def params_for(self, demand: Demand) -> ArrivalCostParams:
        return demand.params or self.params

    @property
    def total(self) -> float:
        return sum(d.volume for d in self.records)

    def __len__(self):
        return len(self.records)


def arrival_penalty(actual: float, desired: float, params: ArrivalCostParams) -> float:
    """alpha * lateness + beta * earliness."""
    return params.alpha * max(0.0, actual - desired) + params.beta * max(0.0, desired - actual)


def aggregate(records, params: ArrivalCostParams) -> DemandTable:
    """Merge records sharing (origin, destination, desired arrival), summing volumes.

    Records merged into one key must agree on their cost parameters.
    """
    merged: dict[tuple, Demand] = {}
    for rec in records:
        prev = merged.get(rec.key)
        if prev is None:
            merged[rec.key] = rec
            continue
        if (prev.params or params) != (rec.params or params):
            raise DemandError(f"conflicting alpha/beta for demand {rec.key}")
        merged[rec.key] = Demand(rec.origin, rec.destination, rec.desired_arrival,
                                 prev.volume + rec.volume, prev.params)
    ordered = sorted(merged.values(), key=lambda d: (d.origin, d.destination, d.desired_arrival))
    return DemandTable(ordered, params)


def load_demands(text: str, params: ArrivalCostParams,
                 network: TransportNetwork | None = None) -> DemandTable:
    """Read ``origin,destination,desired_arrival,volume[,alpha,beta]`` CSV text.

    When *network* is given, origins and destinations are checked against its
    centroids.
    """
    reader = csv.DictReader(io.StringIO(text))
    required = ("origin", "destination", "desired_arrival", "volume")
    if reader.fieldnames is None:
        return DemandTable([], params)
    header = [h.strip() for h in reader.fieldnames]
    missing = [c for c in required if c not in header]
    if missing:
        raise DemandError(f"demand CSV is missing columns {missing}")
    reader.fieldnames = header

    origins = set(network.origins) if network else None
    destinations = set(network.destinations) if network else None
    records = []
    for lineno, row in enumerate(reader, start=2):
        if None in row or any(row.get(c) in (None, "") for c in required):
            raise DemandError(f"line {lineno}: malformed row")
        origin, dest = row["origin"].strip(), row["destination"].strip()
        try:
            desired = float(row["desired_arrival"])
            volume = float(row["volume"])
        except ValueError:
            raise DemandError(f"line {lineno}: malformed row") from None
        if not volume > 0:
            raise DemandError(f"line {lineno}: nonpositive volume {volume:g}")
        if origins is not None and origin not in origins:
            raise DemandError(f"line {lineno}: unknown node id {origin!r} (not an origin)")
        if destinations is not None and dest not in destinations:
            raise DemandError(f"line {lineno}: unknown node id {dest!r} (not a destination)")
        override = None
        a, b = (row.get("alpha") or "").strip(), (row.get("beta") or "").strip()
        if a or b:
            try:
                override = ArrivalCostParams(float(a) if a else params.alpha,
                                             float(b) if b else params.beta)
            except ValueError:
                raise DemandError(f"line {lineno}: malformed alpha/beta") from None
        records.append(Demand(origin, dest, desired, volume, override))
    return aggregate(records, params)


def dump_demands(table: DemandTable) -> str:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["origin", "destination", "desired_arrival", "volume", "alpha", "beta"])
    for d in table.records:
        p = table.params_for(d)
        writer.writerow([d.origin, d.destination, repr(d.desired_arrival), repr(d.volume),
                         repr(p.alpha), repr(p.beta)])
    return out.getvalue()
