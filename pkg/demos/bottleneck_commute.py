"""Morning commute through a single bottleneck.

Closed form first, then the same commute on a one-minute grid solved three
ways.  The LP meters arrivals at capacity and nobody queues, so its total
cost is the queue-free system optimum rather than the equilibrium total.
"""
import numpy as np

from equidta import colgen, exact, subgradient
from equidta.audit import audit
from equidta.instances import COMMUTE, toy_graph
from equidta.vickrey import departure_rate, solve_analytic, system_optimum

s = COMMUTE
eq = solve_analytic(s)
print(f"{s.n_cars:g} cars, capacity {s.cap:g}/min, free-flow {s.t_free:g} min, want to arrive at {s.t_desired:g}")
print(f"departures start {eq.t1:g}, switch rate at {eq.t2:g}, end {eq.t3:g}")
print(f"rates {eq.n1:g}/min then {eq.n2:g}/min; every driver pays {eq.cost_per_driver:g}")

# sample the departure profile
for t in (470, 480, 500, 531, 533):
    print(f"  n({t}) = {departure_rate(s, t, eq):g}")

so = system_optimum(s)
print(f"\nqueue-free optimum: arrivals over {so.arrival_window}, total {so.total_cost:g}")
print(f"equilibrium total would be {s.n_cars * eq.cost_per_driver:g}")

# %% discretized
g = toy_graph()
print(f"\ntime-expanded graph: {g.n_nodes} nodes, {g.n_arcs} arcs, {g.capacitated.size} capacitated")

sols = {
    "dense simplex": exact.solve(g),
    "column generation": colgen.solve(g),
    "dual subgradient": subgradient.solve(g),
}
for name, sol in sols.items():
    print(f"{name:>18}: objective {sol.objective:10.2f}  status {sol.status:<14} iterations {sol.iterations}")

sol = sols["column generation"]
rep = audit(sol, g)
print(f"\naudit: {rep.verdict}, objective {rep.totals['objective']:g}")

# arrival profile of the LP solution
arrive = np.zeros(g.grid.T)
for p in sol.paths:
    tail = g.tail[p.arcs[-1]]
    arrive[g.nodes[tail].t] += p.flow
busy = np.flatnonzero(arrive > 1e-9)
print(f"arrivals {arrive[busy].min():g}..{arrive[busy].max():g} per minute "
      f"from {g.grid.time_of(busy[0]):g} to {g.grid.time_of(busy[-1]) + 1:g}")
