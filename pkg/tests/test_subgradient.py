import io
import math

import numpy as np
import pytest

from conftest import highs_optimum
from equidta import subgradient
from equidta.expansion import graph_from_arcs
from equidta.instances import parallel_paths, random_instance
from equidta.shortest_path import UnreachableError
from equidta.subgradient import SubgradientOptions, dual_value, initial_state, iterate, write_log


def test_dual_value_examples():
    g = parallel_paths()
    assert dual_value(g, np.zeros(4)) == 6.0
    assert dual_value(g, np.array([0, 0, 2.0, 0])) == 8.0
    assert dual_value(g, np.array([0, 0, 10.0, 0])) == 0.0


def test_dual_value_checks():
    g = parallel_paths()
    with pytest.raises(ValueError):
        dual_value(g, np.array([0, 0, -1.0, 0]))
    cut = graph_from_arcs(3, [(0, 1, 1.0, math.inf)], [(0, 2, 1.0)])
    with pytest.raises(UnreachableError):
        dual_value(cut, np.zeros(1))


def _one_step(cap, demand, y0, step0=0.1):
    g = graph_from_arcs(2, [(0, 1, 1.0, cap)], [(0, 1, demand)])
    state = initial_state(g, SubgradientOptions(step0=step0, step_rule="harmonic"))
    state.y[0] = y0
    return iterate(state).y[0]


def test_price_step_and_projection():
    assert _one_step(3.0, 5.0, 0.0) == pytest.approx(0.2)
    assert _one_step(10.0, 5.0, 0.1) == 0.0


def test_parallel_paths_converges():
    g = parallel_paths()
    sol = subgradient.solve(g, SubgradientOptions(tol=1e-3))
    assert sol.converged and sol.status == "optimal"
    assert sol.objective == pytest.approx(8, abs=1e-2)
    assert sol.flows[2] == pytest.approx(1, abs=1e-2) and sol.flows[3] == pytest.approx(1, abs=1e-2)
    assert sol.prices[2] == pytest.approx(2, abs=0.05)
    assert sol.gap <= 1e-3 * 8


def test_zero_demand():
    sol = subgradient.solve(parallel_paths(demand=0))
    assert sol.iterations == 1 and sol.gap == 0 and not sol.flows.any()


def test_iteration_invariants():
    g, _ = random_instance(3)
    state = initial_state(g, SubgradientOptions())
    supply = {o: sum(g.commodities[k].volume for k in g.commodities_of(o)) for o in g.origins}
    uncapped = np.isinf(g.capacity)
    for _ in range(200):
        iterate(state)
        assert np.all(state.y >= 0)
        assert not state.y[uncapped].any()
        x = state.x_bar
        for o, s in supply.items():
            assert x[g.out_of(o)].sum() == pytest.approx(s, rel=1e-12)
        sinks = {g.commodities[k].sink for k in range(len(g.commodities))}
        for v in sinks:
            want = sum(c.volume for c in g.commodities if c.sink == v)
            assert x[g.into(v)].sum() == pytest.approx(want, rel=1e-12)


@pytest.mark.parametrize("seed", range(12))
def test_small_instances_match_oracle(seed):
    g, _ = random_instance(seed)
    ref = highs_optimum(g)
    if ref is None:
        pytest.skip("capacity-infeasible draw")
    sol = subgradient.solve(g, SubgradientOptions(tol=2e-4, max_iter=20000))
    assert sol.objective == pytest.approx(ref, rel=1e-3, abs=1e-3)
    # weak duality against the exact optimum
    assert sol.dual_bound <= ref + 1e-9 * max(1.0, abs(ref))


def test_infeasible_flagged():
    g = graph_from_arcs(2, [(0, 1, 1.0, 1.0)], [(0, 1, 2.0)])
    sol = subgradient.solve(g, SubgradientOptions(max_iter=500))
    assert sol.status == "infeasible-suspected" and not sol.converged
    assert sol.max_violation == pytest.approx(1.0)  # reported, not clipped
    with pytest.raises(subgradient.DivergenceError):
        subgradient.solve(g, SubgradientOptions(max_iter=500, raise_on_divergence=True))


def test_repair_restores_capacity():
    g = parallel_paths()
    sol = subgradient.solve(g, SubgradientOptions(max_iter=50, repair=True))
    assert sol.max_violation <= 1e-9
    assert sum(p.flow for p in sol.paths) == pytest.approx(2)


def test_step_rules():
    g = parallel_paths()
    for rule in ("harmonic", "polyak"):
        sol = subgradient.solve(g, SubgradientOptions(step_rule=rule, target=8.0, max_iter=3000))
        assert sol.objective == pytest.approx(8, abs=0.05)
    with pytest.raises(ValueError, match="target"):
        subgradient.solve(g, SubgradientOptions(step_rule="polyak"))


def test_log_csv():
    sol = subgradient.solve(parallel_paths(), SubgradientOptions(max_iter=5))
    buf = io.StringIO()
    write_log(sol.log, buf)
    lines = buf.getvalue().splitlines()
    assert lines[0] == "k,dual,primal,gap,max_violation,step"
    assert len(lines) == 1 + sol.iterations


def test_threads_do_not_change_result():
    g = next(g for g, _ in (random_instance(s) for s in range(100)) if len(g.origins) > 1)
    a = subgradient.solve(g, SubgradientOptions(max_iter=300, workers=1))
    b = subgradient.solve(g, SubgradientOptions(max_iter=300, workers=3))
    assert np.array_equal(a.flows, b.flows) and a.objective == b.objective
