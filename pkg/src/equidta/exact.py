"""Exact link-LP solve with the dense simplex, packaged as a :class:`Solution`."""
from __future__ import annotations

import math

import numpy as np

from .audit import flow_decompose
from .lp import build_link_lp, dense_simplex, flows_from_lp, link_lp_prices
from .solution import Solution, violation


def solve(graph, rule: str = "dantzig", max_cols: int | None = None) -> Solution:
    """Optimal link flows, their path decomposition, arc prices and demand potentials."""
    lp = build_link_lp(graph)
    kwargs = {"rule": rule}
    if max_cols is not None:
        kwargs["max_cols"] = max_cols
    res = dense_simplex(lp, **kwargs)
    if res.status != "optimal":
        return Solution("dense-simplex", np.zeros(graph.n_arcs), math.nan, status=res.status,
                        converged=False, iterations=res.iterations, infeasibility=math.inf,
                        info={"lp": lp.report()})
    flows, per_origin = flows_from_lp(graph, lp, res.x)
    y, sigma = link_lp_prices(lp, res.duals, graph)
    paths = flow_decompose(per_origin, graph)
    objective = float(graph.cost @ flows)
    return Solution(
        "dense-simplex", flows, objective, per_origin=per_origin, paths=paths,
        prices=np.maximum(y, 0.0), potentials=sigma, dual_bound=res.dual_objective,
        gap=objective - res.dual_objective, max_violation=violation(graph, flows),
        iterations=res.iterations, info={"lp": lp.report()},
    )
