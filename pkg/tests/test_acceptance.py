"""Acceptance criteria, one test each.

Every test records a PASS/FAIL line that is printed in the pytest terminal
summary; running this file directly prints the same lines.
"""
import itertools
import math
import warnings

import pytest

from conftest import arrivals_by_time, highs_optimum
from equidta import audit as au
from equidta import colgen, exact, subgradient
from equidta.demand import ArrivalCostParams
from equidta.expansion import TimeGrid, build_time_expanded
from equidta.instances import COMMUTE, equivalence_demands, equivalence_networks, random_instance, toy_graph
from equidta.lp import build_link_lp, export_mps
from equidta.network import expand_junctions, network_from_dict
from equidta.subgradient import SubgradientOptions
from equidta.vickrey import BottleneckScenario, equilibrium_identities, solve_analytic, system_optimum

RESULTS: list[str] = []
N_CORPUS = 100


def record(name, ok, detail):
    line = f"{'PASS' if ok else 'FAIL'} {name}: {detail}"
    RESULTS.append(line)
    print(line)
    assert ok, line


def rel(a, b):
    return abs(a - b) / max(1.0, abs(b))


_corpus = None


def feasible_corpus():
    """The first N_CORPUS random instances whose LP is feasible, with HiGHS optima."""
    global _corpus
    if _corpus is None:
        _corpus = []
        for seed in itertools.count():
            g, _ = random_instance(seed)
            ref = highs_optimum(g)
            if ref is not None:
                _corpus.append((seed, g, ref))
            if len(_corpus) == N_CORPUS:
                break
    return _corpus


def test_c1_analytic_toy():
    eq = solve_analytic(COMMUTE)
    want = dict(t1=472, t2=496, t3=532, n1=60, n2=10, cost_per_driver=44)
    worst = max(rel(getattr(eq, k), v) for k, v in want.items())
    ids = equilibrium_identities(COMMUTE, eq)
    id_err = max(rel(v, eq.cost_per_driver) for v in ids.values())
    record("C1 analytic bottleneck equilibrium", worst <= 1e-9 and id_err <= 1e-9,
           f"max rel error {worst:.1e}, identity spread {id_err:.1e}")


def test_c2_discretized_toy(toy):
    target = system_optimum(COMMUTE).total_cost
    dense = exact.solve(toy)
    cg = colgen.solve(toy)
    agree = rel(dense.objective, cg.objective) <= 1e-9
    close = rel(dense.objective, target) <= 0.02
    arr = arrivals_by_time(toy, dense.flows)
    busy = sorted(t for t, v in arr.items() if v > 1e-9)
    metered = all(abs(arr[t] - 30.0) <= 1e-6 for t in busy)
    # arrivals at t..t+1 for t in busy; the window is [first, last + 1]
    window_ok = abs(busy[0] - 492) <= 1 and abs(busy[-1] + 1 - 552) <= 1
    audited = au.audit(dense, toy).passed and au.audit(cg, toy).passed
    sg = subgradient.solve(toy, SubgradientOptions(max_iter=5000))
    sg_obj = rel(sg.objective, dense.objective)
    sg_gap = abs(sg.gap) / abs(dense.objective)
    sg_ok = sg_obj <= 0.005 and sg_gap <= 0.005 and sg.iterations <= 5000
    record("C2 discretized toy", agree and close and metered and window_ok and audited and sg_ok,
           f"dense {dense.objective:.6g}, colgen {cg.objective:.6g}, oracle {target:g}; "
           f"arrivals 30/min over [{busy[0]:g},{busy[-1] + 1:g}]; audit {'pass' if audited else 'fail'}; "
           f"subgradient obj err {sg_obj:.2%}, gap {sg_gap:.2%} in {sg.iterations} it")


def test_c3_exact_optima_are_equilibria():
    corpus = feasible_corpus()
    bad = []
    worst_vi = math.inf
    for seed, g, _ in corpus:
        for sol in (exact.solve(g), colgen.solve(g)):
            if not au.check_wardrop(sol, g).passed:
                bad.append((seed, sol.method))
            vi = au.vi_gap(sol, g)
            worst_vi = min(worst_vi, vi)
            if vi < -1e-9:
                bad.append((seed, sol.method, "vi"))
    record("C3 exact optima are equilibria", len(corpus) >= 100 and not bad,
           f"{len(corpus)} instances x 2 solvers, failures {bad[:5]}, min VI gap {worst_vi:.1e}")


def _mps_optimum(graph, tmp_path):
    import highspy
    path = tmp_path / "model.mps"
    path.write_text(export_mps(build_link_lp(graph)))
    h = highspy.Highs()
    h.setOptionValue("output_flag", False)
    h.readModel(str(path))
    h.run()
    return h.getInfo().objective_function_value


def test_c4_cross_solver(tmp_path):
    corpus = feasible_corpus()
    worst_exact = 0.0
    worst_sg = 0.0
    for seed, g, _ in corpus:
        d = exact.solve(g).objective
        c = colgen.solve(g).objective
        m = _mps_optimum(g, tmp_path) if g.n_arcs else 0.0
        worst_exact = max(worst_exact, rel(d, c), rel(m, d))
        s = subgradient.solve(g, SubgradientOptions(tol=2e-4, max_iter=20000)).objective
        worst_sg = max(worst_sg, rel(s, d))
    record("C4 cross-solver equivalence", worst_exact <= 1e-9 and worst_sg <= 1e-3,
           f"{len(corpus)} instances; dense/colgen/MPS max rel diff {worst_exact:.1e}, "
           f"subgradient {worst_sg:.1e}")


def test_c5_construction_equivalence():
    worst = 0.0
    count = 0
    for (name, doc), T in itertools.product(equivalence_networks(), range(4, 9)):
        net = expand_junctions(network_from_dict(doc))
        table = equivalence_demands(doc, T)
        grid = TimeGrid(1.0, 0.0, float(T - 1))
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            compact = build_time_expanded(net, table, grid, check_horizon=False)
            literal = build_time_expanded(net, table, grid, literal_roads=True, check_horizon=False)
        reach = [c.sink in compact.reachable_from(c.origin) for c in compact.commodities]
        if not all(reach):
            continue
        a, b = highs_optimum(compact), highs_optimum(literal)
        if a is None or b is None:
            assert a is None and b is None, (name, T)
            continue
        worst = max(worst, rel(a, b), rel(exact.solve(compact).objective, exact.solve(literal).objective))
        count += 1
    record("C5 compact vs literal construction", count > 0 and worst <= 1e-9,
           f"{count} feasible instances, max rel diff {worst:.1e}")


def test_c6_infeasibility():
    s = BottleneckScenario(6000, 30, 20, 540, ArrivalCostParams(2.0, 0.5))
    toy = toy_graph(s)
    statuses = [exact.solve(toy).status, colgen.solve(toy).status]
    sg = subgradient.solve(toy, SubgradientOptions(max_iter=2000))
    flagged = [(sg.status, sg.infeasibility)]
    ok = statuses == ["infeasible", "infeasible"] and sg.status == "infeasible-suspected"
    n_random = 0
    for seed in itertools.count():
        g, _ = random_instance(seed)
        if highs_optimum(g) is not None:
            continue
        n_random += 1
        ex = [exact.solve(g).status, colgen.solve(g).status]
        sgr = subgradient.solve(g, SubgradientOptions(max_iter=3000))
        cap = g.capacity[g.capacitated].max()
        ok &= ex == ["infeasible", "infeasible"] and not sgr.converged and sgr.infeasibility > 1e-3 * cap
        flagged.append((sgr.status, round(sgr.infeasibility, 3)))
        if n_random == 10:
            break
    record("C6 infeasibility detection", ok,
           f"toy N=6000: exact {statuses}, subgradient {sg.status} (excess {sg.infeasibility:.3g}); "
           f"{n_random} random infeasible instances flagged")


if __name__ == "__main__":
    import sys
    sys.exit(pytest.main([__file__, "-q"]))
