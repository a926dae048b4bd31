import warnings

import numpy as np
import pytest
from scipy.optimize import linprog

from equidta import exact
from equidta.instances import toy_graph
from equidta.lp import build_link_lp


def highs_optimum(graph):
    """Optimal link-LP value from HiGHS, or None when infeasible."""
    lp = build_link_lp(graph)
    A = lp.sparse()
    eq = [i for i, s in enumerate(lp.senses) if s == "E"]
    le = [i for i, s in enumerate(lp.senses) if s == "L"]
    res = linprog(lp.c, A_ub=A[le] if le else None, b_ub=lp.rhs[le] if le else None,
                  A_eq=A[eq] if eq else None, b_eq=lp.rhs[eq] if eq else None,
                  bounds=list(zip(lp.lower, lp.upper)), method="highs")
    if res.status == 2:
        return None
    assert res.status == 0, res.message
    return float(res.fun)


@pytest.fixture(scope="session")
def toy():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return toy_graph()


@pytest.fixture(scope="session")
def toy_exact(toy):
    return exact.solve(toy)


def arrivals_by_time(graph, flows):
    out = {}
    for e in np.flatnonzero(flows > 1e-9):
        if graph.klass_name(e) == "arrival-cost":
            t = graph.node_time(int(graph.tail[e]))
            out[t] = out.get(t, 0.0) + float(flows[e])
    return out


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
