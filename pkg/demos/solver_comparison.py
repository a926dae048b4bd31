"""Three solvers on a random corpus of small networks.

Column generation and the dense simplex are exact, so they should agree to
rounding.  The subgradient method only gets close, and the audit is run in
its approximate mode.
"""
import time

from equidta import colgen, exact, subgradient
from equidta.audit import audit
from equidta.instances import random_instance
from equidta.subgradient import SubgradientOptions

rows = []
for seed in range(30):
    g, desc = random_instance(seed)
    t0 = time.perf_counter()
    d = exact.solve(g)
    t1 = time.perf_counter()
    c = colgen.solve(g)
    t2 = time.perf_counter()
    sg = subgradient.solve(g, SubgradientOptions(tol=2e-4, max_iter=20000))
    t3 = time.perf_counter()
    if d.status != "optimal":
        print(f"seed {seed:3d}: {d.status} (colgen says {c.status}, subgradient {sg.status})")
        continue
    ok = audit(c, g).passed and audit(sg, g, approximate=True).passed
    rows.append((seed, g.n_arcs, d.objective, c.objective, sg.objective, sg.iterations, ok,
                 t1 - t0, t2 - t1, t3 - t2))

print(f"\n{'seed':>4} {'arcs':>5} {'simplex':>9} {'colgen':>9} {'subgrad':>9} {'iters':>6} audit")
for seed, arcs, d, c, s, it, ok, *_ in rows:
    print(f"{seed:4d} {arcs:5d} {d:9.4f} {c:9.4f} {s:9.4f} {it:6d} {'ok' if ok else 'FAIL'}")

worst = max(abs(s - d) / max(1, abs(d)) for _, _, d, _, s, *_ in rows)
print(f"\nworst subgradient relative error {worst:.1e}")
print("mean seconds: simplex {:.3f}, colgen {:.3f}, subgradient {:.3f}".format(
    *(sum(r[k] for r in rows) / len(rows) for k in (7, 8, 9))))
