"""Closed-form single-bottleneck morning commute.

``N`` drivers share one road with free-flow time ``t_free`` and a bottleneck
of capacity ``cap``; everyone wants to arrive at ``t_desired``.  Arriving
late costs ``alpha`` and arriving early ``beta`` per time unit, in travel
time units.  :func:`solve_analytic` gives the user equilibrium (a queue
forms, all drivers pay the same), :func:`system_optimum` the queue-free
schedule minimising total cost.  The discretized LP reproduces the latter.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from .demand import ArrivalCostParams


@dataclass(frozen=True)
class BottleneckScenario:
    n_cars: float
    cap: float
    t_free: float
    t_desired: float
    params: ArrivalCostParams = ArrivalCostParams(2.0, 0.5)

    def __post_init__(self):
        if self.n_cars < 0 or not (self.cap > 0 and self.t_free > 0):
            raise ValueError("n_cars must be >= 0, cap and t_free > 0")
        if self.params.beta >= 1:
            raise ValueError(
                f"beta = {self.params.beta:g} >= 1: the early departure rate cap/(1 - beta) "
                "is singular or negative"
            )

    @property
    def alpha(self):
        return self.params.alpha

    @property
    def beta(self):
        return self.params.beta


@dataclass(frozen=True)
class AnalyticEquilibrium:
    t1: float
    t2: float
    t3: float
    n1: float
    n2: float
    cost_per_driver: float

    def as_dict(self) -> dict:
        return {k: getattr(self, k) for k in ("t1", "t2", "t3", "n1", "n2", "cost_per_driver")}


@dataclass(frozen=True)
class SystemOptimum:
    arrival_window: tuple[float, float]
    early: float
    late: float
    total_cost: float

    def as_dict(self) -> dict:
        return {"arrival_window": list(self.arrival_window), "early": self.early,
                "late": self.late, "total_cost": self.total_cost}


def solve_analytic(s: BottleneckScenario) -> AnalyticEquilibrium:
    a, b = s.alpha, s.beta
    span = s.n_cars / s.cap
    t1 = s.t_desired - s.t_free - a / (a + b) * span
    t3 = s.t_desired - s.t_free + b / (a + b) * span
    t2 = s.t_desired - s.t_free - a * b / (a + b) * span
    n1 = s.cap / (1 - b)
    n2 = s.cap / (1 + a)
    # the first driver meets no queue and only pays earliness
    cost = s.t_free + b * (s.t_desired - t1 - s.t_free)
    return AnalyticEquilibrium(t1, t2, t3, n1, n2, cost)


def departure_rate(s: BottleneckScenario, t: float, eq: AnalyticEquilibrium | None = None) -> float:
    eq = eq or solve_analytic(s)
    if eq.t1 <= t < eq.t2:
        return eq.n1
    if eq.t2 <= t < eq.t3:
        return eq.n2
    return 0.0


def system_optimum(s: BottleneckScenario) -> SystemOptimum:
    """Arrivals metered at capacity over a window balancing marginal early and late costs."""
    a, b = s.alpha, s.beta
    span = s.n_cars / s.cap
    early = a / (a + b) * span
    late = b / (a + b) * span
    total = s.n_cars * s.t_free + s.cap * (b * early**2 + a * late**2) / 2
    return SystemOptimum((s.t_desired - early, s.t_desired + late), early, late, total)


def equilibrium_identities(s: BottleneckScenario, eq: AnalyticEquilibrium) -> dict[str, float]:
    """The three per-driver costs that equilibrium makes equal: first, last, punctual."""
    return {
        "first": s.t_free + s.beta * (s.t_desired - eq.t1 - s.t_free),
        "last": s.t_free + s.alpha * (eq.t3 + s.t_free - s.t_desired),
        "punctual": s.t_desired - eq.t2,
    }


def departure_profile(s: BottleneckScenario, start: float, end: float, step: float = 1.0):
    eq = solve_analytic(s)
    n = int(math.floor((end - start) / step + 1e-9)) + 1
    return [(start + k * step, departure_rate(s, start + k * step, eq)) for k in range(n)]
