"""Hand the link LP to an outside solver through an MPS file.

Writes the per-origin link-flow LP of the bottleneck commute at dt=5, reads
it back with HiGHS and compares the optimum with column generation.
"""
import tempfile
import warnings
from pathlib import Path

import highspy

from equidta import colgen
from equidta.instances import toy_graph
from equidta.lp import build_link_lp, export_mps, read_mps

with warnings.catch_warnings():
    # the one-minute turn rounds up to a full five-minute quantum; expected here
    warnings.simplefilter("ignore")
    g = toy_graph(dt=5.0)
lp = build_link_lp(g)
print("link LP:", lp.report())

text = export_mps(lp, "COMMUTE")
print("\n".join(text.splitlines()[:8]))
print("...")

back = read_mps(text)
assert (back.n_rows, back.n_cols, back.nnz) == (lp.n_rows, lp.n_cols, lp.nnz)

with tempfile.TemporaryDirectory() as tmp:
    path = Path(tmp) / "commute.mps"
    path.write_text(text)
    h = highspy.Highs()
    h.setOptionValue("output_flag", False)
    h.readModel(str(path))
    h.run()
    outside = h.getInfo().objective_function_value

ours = colgen.solve(g).objective
print(f"HiGHS {outside:.6f}  column generation {ours:.6f}")
