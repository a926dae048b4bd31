"""Link-based LP of the assignment problem, MPS I/O and a dense simplex oracle.

The link formulation uses one flow variable per (origin, arc), an aggregate
variable per capacitated arc, Kirchhoff rows per (origin, node), aggregation
rows ``x_e - sum_i x_ei = 0`` and capacity rows ``x_e <= cap_e``.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

log = logging.getLogger(__name__)

CONSERVATION = "conservation"
AGGREGATION = "aggregation"
CAPACITY = "capacity"

MAX_DENSE_COLUMNS = 5000


class LPError(ValueError):
    pass


@dataclass
class StandardFormLP:
    """``min c.x  s.t.  A x (<=,=,>=) b,  lower <= x <= upper`` with A in triplet form."""

    c: np.ndarray
    rows: np.ndarray
    cols: np.ndarray
    vals: np.ndarray
    senses: list[str]
    rhs: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    row_names: list[str]
    col_names: list[str]
    name: str = "LP"
    row_kinds: list[str] = field(default_factory=list)
    # ("flow", origin node, arc) or ("total", arc); empty for generic LPs
    col_info: list[tuple] = field(default_factory=list)
    row_info: list[tuple] = field(default_factory=list)

    @property
    def n_rows(self) -> int:
        return len(self.senses)

    @property
    def n_cols(self) -> int:
        return len(self.c)

    @property
    def nnz(self) -> int:
        return len(self.vals)

    def dense(self) -> np.ndarray:
        A = np.zeros((self.n_rows, self.n_cols))
        np.add.at(A, (self.rows, self.cols), self.vals)
        return A

    def sparse(self):
        from scipy.sparse import coo_matrix
        return coo_matrix((self.vals, (self.rows, self.cols)), shape=(self.n_rows, self.n_cols)).tocsr()

    def report(self) -> dict:
        kinds = {k: self.row_kinds.count(k) for k in (CONSERVATION, AGGREGATION, CAPACITY)}
        return {"rows": self.n_rows, "cols": self.n_cols, "nonzeros": self.nnz, "row_kinds": kinds}


@dataclass
class LPResult:
    status: str  # optimal | infeasible | unbounded
    x: np.ndarray | None = None
    duals: np.ndarray | None = None
    objective: float = math.nan
    dual_objective: float = math.nan
    iterations: int = 0
    basis: list[int] | None = None


def _usable_arcs(graph, origin: int, sinks) -> np.ndarray:
    fwd = np.zeros(graph.n_nodes, dtype=bool)
    fwd[graph.reachable_from(origin)] = True
    back = np.zeros(graph.n_nodes, dtype=bool)
    back[list(sinks)] = True
    for v in range(graph.n_nodes - 1, -1, -1):
        if not back[v]:
            outs = graph.out_of(v)
            if outs and back[graph.head[outs]].any():
                back[v] = True
    return np.flatnonzero(fwd[graph.tail] & back[graph.head] & fwd[graph.head])


def build_link_lp(graph, name: str = "DTA") -> StandardFormLP:
    """Materialize the per-origin link-flow LP of a time-expanded graph.

    Only arcs lying on some origin-to-sink path get a flow variable for that
    origin; this drops nothing an optimal flow could use.
    """
    c, rows, cols, vals = [], [], [], []
    senses, rhs, row_names, col_names, row_kinds, col_info, row_info = [], [], [], [], [], [], []

    def add_row(kind, sense, b, rname, info):
        senses.append(sense)
        rhs.append(b)
        row_names.append(rname)
        row_kinds.append(kind)
        row_info.append(info)
        return len(senses) - 1

    flow_cols: dict[int, list[int]] = {}
    for o in graph.origins:
        ks = graph.commodities_of(o)
        supply: dict[int, float] = {o: 0.0}
        for k in ks:
            com = graph.commodities[k]
            supply[o] += com.volume
            supply[com.sink] = supply.get(com.sink, 0.0) - com.volume
        arcs = _usable_arcs(graph, o, [graph.commodities[k].sink for k in ks])
        nodes = sorted(set(graph.tail[arcs].tolist()) | set(graph.head[arcs].tolist()) | set(supply))
        row_of = {}
        for v in nodes:
            row_of[v] = add_row(CONSERVATION, "E", supply.get(v, 0.0), f"k{o}_{v}", ("node", o, v))
        for e in arcs.tolist():
            j = len(c)
            c.append(float(graph.cost[e]))
            col_names.append(f"x{o}_{e}")
            col_info.append(("flow", o, e))
            rows += [row_of[graph.tail[e]], row_of[graph.head[e]]]
            cols += [j, j]
            vals += [1.0, -1.0]
            flow_cols.setdefault(e, []).append(j)

    for e in graph.capacitated.tolist():
        if e not in flow_cols:
            continue
        j = len(c)
        c.append(0.0)
        col_names.append(f"t{e}")
        col_info.append(("total", e))
        r = add_row(AGGREGATION, "E", 0.0, f"a{e}", ("arc", e))
        rows.append(r)
        cols.append(j)
        vals.append(1.0)
        for jf in flow_cols[e]:
            rows.append(r)
            cols.append(jf)
            vals.append(-1.0)
        r = add_row(CAPACITY, "L", float(graph.capacity[e]), f"u{e}", ("arc", e))
        rows.append(r)
        cols.append(j)
        vals.append(1.0)

    n = len(c)
    return StandardFormLP(
        np.array(c, float), np.array(rows, np.int64), np.array(cols, np.int64), np.array(vals, float),
        senses, np.array(rhs, float), np.zeros(n), np.full(n, math.inf), row_names, col_names,
        name, row_kinds, col_info, row_info,
    )


def flows_from_lp(graph, lp: StandardFormLP, x: np.ndarray):
    """Split an LP solution into aggregate arc flows and per-origin arc flows."""
    total = np.zeros(graph.n_arcs)
    per_origin: dict[int, np.ndarray] = {o: np.zeros(graph.n_arcs) for o in graph.origins}
    for j, info in enumerate(lp.col_info):
        if info[0] == "flow":
            _, o, e = info
            per_origin[o][e] += x[j]
            total[e] += x[j]
    return total, per_origin


def link_lp_prices(lp: StandardFormLP, duals: np.ndarray, graph):
    """Arc prices ``y_e >= 0`` and per-commodity potentials from link-LP duals."""
    y = np.zeros(graph.n_arcs)
    potential = {}
    for r, info in enumerate(lp.row_info):
        if lp.row_kinds[r] == CAPACITY:
            y[info[1]] = -duals[r]
        elif lp.row_kinds[r] == CONSERVATION:
            potential[(info[1], info[2])] = duals[r]
    sigma = np.array([
        potential[(com.origin, com.origin)] - potential[(com.origin, com.sink)]
        for com in graph.commodities
    ])
    return y, sigma


# --------------------------------------------------------------------------- MPS

def _fmt_fixed(v: float) -> str:
    if v == int(v) and abs(v) < 1e11:
        return str(int(v))
    for prec in range(12, 0, -1):
        s = f"{v:.{prec}g}"
        if len(s) <= 12:
            return s
    raise LPError(f"cannot fit {v!r} in a fixed-format MPS field")


def mps_names(names: list[str], width: int = 8):
    """Truncate names to *width* characters, suffixing collisions deterministically.

    Returns the new names and the list of ``(old, new)`` pairs that changed
    beyond plain truncation.
    """
    out, used, renamed = [], set(), []
    for name in names:
        cand = name.replace(" ", "_")[:width]
        if cand in used:
            k = 0
            while True:
                k += 1
                suffix = _base36(k)
                cand = name.replace(" ", "_")[: width - len(suffix) - 1] + "~" + suffix
                if cand not in used:
                    break
            renamed.append((name, cand))
        used.add(cand)
        out.append(cand)
    return out, renamed


def _base36(k: int) -> str:
    digits = "0123456789ABCDEFGHIJKLMNOPQRSTUVWXYZ"
    s = ""
    while True:
        k, r = divmod(k, 36)
        s = digits[r] + s
        if k == 0:
            return s


def export_mps(lp: StandardFormLP, name: str | None = None, free: bool = False) -> str:
    """Write *lp* as an MPS document (fixed format unless ``free``).

    Fixed format limits names to 8 characters; colliding truncated names are
    suffixed with ``~<n>`` and the renames are logged.
    """
    if free:
        rnames, cnames = list(lp.row_names), list(lp.col_names)

        def fmt(v):
            return repr(float(v))
    else:
        rnames, r_ren = mps_names(lp.row_names)
        cnames, c_ren = mps_names(lp.col_names)
        if "COST" in rnames:
            raise LPError("a row is named COST, which clashes with the objective row")
        for old, new in r_ren + c_ren:
            log.warning("MPS name collision: %s written as %s", old, new)
        fmt = _fmt_fixed

    def line(f1="", f2="", f3="", f4="", f5="", f6=""):
        if free:
            return " " + " ".join(x for x in (f1, f2, f3, f4, f5, f6) if x)
        s = f" {f1:<2} {f2:<8}  {f3:<8}  {f4:>12}"
        if f5:
            s += f"   {f5:<8}  {f6:>12}"
        return s.rstrip()

    out = [f"NAME          {name or lp.name}"]
    out.append("ROWS")
    out.append(line("N", "COST"))
    for s, r in zip(lp.senses, rnames):
        out.append(line(s, r))
    out.append("COLUMNS")
    A = lp.sparse().tocsc()
    A.sort_indices()
    for j in range(lp.n_cols):
        entries = []
        if lp.c[j] != 0:
            entries.append(("COST", lp.c[j]))
        for p in range(A.indptr[j], A.indptr[j + 1]):
            if A.data[p] != 0:
                entries.append((rnames[A.indices[p]], A.data[p]))
        if not entries:
            entries.append(("COST", 0.0))
        for p in range(0, len(entries), 2):
            pair = entries[p:p + 2]
            if len(pair) == 2:
                out.append(line("", cnames[j], pair[0][0], fmt(pair[0][1]), pair[1][0], fmt(pair[1][1])))
            else:
                out.append(line("", cnames[j], pair[0][0], fmt(pair[0][1])))
    out.append("RHS")
    for r, b in enumerate(lp.rhs):
        if b != 0:
            out.append(line("", "RHS", rnames[r], fmt(b)))
    out.append("RANGES")
    out.append("BOUNDS")
    for j in range(lp.n_cols):
        lo, up = lp.lower[j], lp.upper[j]
        if lo == up:
            out.append(line("FX", "BND", cnames[j], fmt(lo)))
            continue
        if lo != 0:
            out.append(line("MI", "BND", cnames[j]) if math.isinf(lo) else line("LO", "BND", cnames[j], fmt(lo)))
        if math.isfinite(up):
            out.append(line("UP", "BND", cnames[j], fmt(up)))
    out.append("ENDATA")
    return "\n".join(out) + "\n"


def read_mps(text: str) -> StandardFormLP:
    """Parse a fixed- or free-format MPS document with whitespace-free names."""
    section = None
    name = "LP"
    obj_row = None
    senses, row_names, row_index = [], [], {}
    col_index: dict[str, int] = {}
    col_names: list[str] = []
    c: list[float] = []
    rows, cols, vals = [], [], []
    rhs: dict[int, float] = {}
    bounds: dict[int, list[float]] = {}

    def col(cname):
        if cname not in col_index:
            col_index[cname] = len(col_names)
            col_names.append(cname)
            c.append(0.0)
        return col_index[cname]

    for raw in text.splitlines():
        if not raw.strip() or raw.startswith("*"):
            continue
        if not raw[0].isspace():
            parts = raw.split()
            section = parts[0].upper()
            if section == "NAME" and len(parts) > 1:
                name = parts[1]
            continue
        f = raw.split()
        if section == "ROWS":
            kind, rname = f[0].upper(), f[1]
            if kind == "N":
                if obj_row is None:
                    obj_row = rname
                continue
            if kind not in ("E", "L", "G"):
                raise LPError(f"unknown row type {kind!r}")
            row_index[rname] = len(senses)
            senses.append(kind)
            row_names.append(rname)
        elif section == "COLUMNS":
            if "'MARKER'" in f:
                raise LPError("integer markers are not supported")
            j = col(f[0])
            for rname, val in zip(f[1::2], f[2::2]):
                v = float(val)
                if rname == obj_row:
                    c[j] += v
                elif rname in row_index:
                    rows.append(row_index[rname])
                    cols.append(j)
                    vals.append(v)
                else:
                    raise LPError(f"column {f[0]} references unknown row {rname}")
        elif section == "RHS":
            pairs = f[1:] if len(f) % 2 == 1 else f
            for rname, val in zip(pairs[0::2], pairs[1::2]):
                if rname == obj_row:
                    continue
                rhs[row_index[rname]] = float(val)
        elif section == "RANGES":
            raise LPError("RANGES entries are not supported")
        elif section == "BOUNDS":
            kind = f[0].upper()
            j = col_index[f[2]]
            lo_up = bounds.setdefault(j, [0.0, math.inf])
            val = float(f[3]) if len(f) > 3 else None
            if kind == "UP":
                lo_up[1] = val
            elif kind == "LO":
                lo_up[0] = val
            elif kind == "FX":
                lo_up[0] = lo_up[1] = val
            elif kind == "FR":
                lo_up[0], lo_up[1] = -math.inf, math.inf
            elif kind == "MI":
                lo_up[0] = -math.inf
            elif kind == "PL":
                lo_up[1] = math.inf
            else:
                raise LPError(f"unsupported bound type {kind!r}")
        elif section in ("ENDATA", "OBJSENSE"):
            continue
        else:
            raise LPError(f"unexpected data in section {section!r}")

    n = len(col_names)
    lower = np.zeros(n)
    upper = np.full(n, math.inf)
    for j, (lo, up) in bounds.items():
        lower[j], upper[j] = lo, up
    b = np.zeros(len(senses))
    for r, v in rhs.items():
        b[r] = v
    return StandardFormLP(
        np.array(c, float), np.array(rows, np.int64), np.array(cols, np.int64), np.array(vals, float),
        senses, b, lower, upper, row_names, col_names, name,
    )


# ------------------------------------------------------------------ dense simplex

class _Tableau:
    """Dense simplex tableau; the last row holds reduced costs, last column the RHS."""

    def __init__(self, M: np.ndarray, basis: list[int], rule: str, tol: float):
        self.M = M
        self.basis = basis
        self.rule = rule
        self.tol = tol
        self.iterations = 0

    def pivot(self, r: int, j: int):
        M = self.M
        M[r] /= M[r, j]
        colj = M[:, j].copy()
        colj[r] = 0.0
        nz = np.flatnonzero(colj)
        if nz.size:
            M[nz] -= np.outer(colj[nz], M[r])
        self.basis[r] = j
        self.iterations += 1

    def run(self, allowed: np.ndarray, max_iter: int) -> str:
        M, tol = self.M, self.tol
        degenerate_run = 0
        use_bland = self.rule == "bland"
        while True:
            if self.iterations >= max_iter:
                raise LPError(f"simplex iteration limit {max_iter} reached")
            red = M[-1, :-1]
            cand = np.flatnonzero((red < -tol) & allowed)
            if cand.size == 0:
                return "optimal"
            j = int(cand[0]) if use_bland else int(cand[np.argmin(red[cand])])
            col = M[:-1, j]
            pos = np.flatnonzero(col > tol)
            if pos.size == 0:
                return "unbounded"
            ratios = M[pos, -1] / col[pos]
            best = ratios.min()
            ties = pos[ratios <= best + tol * max(1.0, abs(best))]
            # leaving variable: smallest basic index among ties
            r = int(min(ties, key=lambda i: self.basis[i]))
            degenerate = M[r, -1] <= tol
            self.pivot(r, j)
            if self.rule == "bland":
                continue
            degenerate_run = degenerate_run + 1 if degenerate else 0
            # Dantzig pricing, falling back to Bland's rule while stalling
            use_bland = degenerate_run >= 20


def dense_simplex(lp: StandardFormLP, *, rule: str = "dantzig", tol: float = 1e-9,
                  max_cols: int = MAX_DENSE_COLUMNS, max_iter: int = 200_000) -> LPResult:
    """Two-phase dense tableau simplex; a desk-scale oracle.

    ``rule="bland"`` uses Bland's smallest-index rule throughout; the default
    prices by most negative reduced cost and switches to Bland's rule after a
    run of degenerate pivots, which keeps the anti-cycling guarantee.
    Row duals follow the usual sign convention for minimization: ``<=`` rows
    have nonpositive duals, ``>=`` rows nonnegative ones.
    """
    if lp.n_cols > max_cols:
        raise LPError(f"dense simplex is limited to {max_cols} columns, LP has {lp.n_cols}")
    if rule not in ("dantzig", "bland"):
        raise ValueError(f"unknown pivot rule {rule!r}")
    if np.any(~np.isfinite(lp.lower)):
        raise LPError("free or unbounded-below variables are not supported")

    n, m0 = lp.n_cols, lp.n_rows
    A0 = lp.dense()
    shift_rhs = lp.rhs - A0 @ lp.lower
    ub_cols = np.flatnonzero(np.isfinite(lp.upper))
    m = m0 + len(ub_cols)
    A = np.zeros((m, n))
    A[:m0] = A0
    b = np.zeros(m)
    b[:m0] = shift_rhs
    senses = list(lp.senses) + ["L"] * len(ub_cols)
    for k, j in enumerate(ub_cols):
        A[m0 + k, j] = 1.0
        b[m0 + k] = lp.upper[j] - lp.lower[j]

    flip = b < 0
    A[flip] *= -1
    b[flip] *= -1
    senses = [{"L": "G", "G": "L", "E": "E"}[s] if f else s for s, f in zip(senses, flip)]

    n_slack = sum(s != "E" for s in senses)
    art_rows = [i for i, s in enumerate(senses) if s != "L"]
    n_art = len(art_rows)
    width = n + n_slack + n_art
    M = np.zeros((m + 1, width + 1))
    M[:m, :n] = A
    M[:m, -1] = b
    basis = [-1] * m
    k = n
    for i, s in enumerate(senses):
        if s == "L":
            M[i, k] = 1.0
            basis[i] = k
            k += 1
        elif s == "G":
            M[i, k] = -1.0
            k += 1
    art_start = k
    for a, i in enumerate(art_rows):
        M[i, art_start + a] = 1.0
        basis[i] = art_start + a

    tab = _Tableau(M, basis, rule, tol)
    allowed = np.ones(width, dtype=bool)
    # phase 1: minimise the sum of artificials
    M[-1, :] = 0.0
    for i in art_rows:
        M[-1] -= M[i]
    M[-1, art_start:width] = 0.0
    tab.run(allowed, max_iter)
    scale = max(1.0, float(np.abs(b).max(initial=0.0)))
    if -M[-1, -1] > 1e-7 * scale:
        return LPResult("infeasible", iterations=tab.iterations)

    # drive zero-level artificials out of the basis; drop redundant rows
    keep = np.ones(m + 1, dtype=bool)
    for r in range(m):
        if tab.basis[r] >= art_start:
            cand = np.flatnonzero(np.abs(M[r, :art_start]) > 1e-7)
            if cand.size:
                tab.pivot(r, int(cand[0]))
            else:
                keep[r] = False
    rows_kept = np.flatnonzero(keep[:m])
    M = tab.M[keep]
    M = np.delete(M, np.s_[art_start:width], axis=1)
    tab.M = M
    tab.basis = [tab.basis[r] for r in rows_kept]
    width = art_start
    allowed = np.ones(width, dtype=bool)

    cost = np.zeros(width)
    cost[:n] = lp.c
    M[-1, :-1] = cost
    M[-1, -1] = 0.0
    for r, j in enumerate(tab.basis):
        if cost[j] != 0:
            M[-1] -= cost[j] * M[r]
    status = tab.run(allowed, max_iter)
    if status == "unbounded":
        return LPResult("unbounded", iterations=tab.iterations)

    z = np.zeros(width)
    z[tab.basis] = M[:-1, -1]
    x = lp.lower + z[:n]

    # duals from the final basis on the (flipped, bound-augmented) system
    full = np.zeros((m, width))
    full[:, :n] = A
    k = n
    for i, s in enumerate(senses):
        if s == "L":
            full[i, k] = 1.0
            k += 1
        elif s == "G":
            full[i, k] = -1.0
            k += 1
    B = full[np.ix_(rows_kept, tab.basis)]
    y_kept = np.linalg.solve(B.T, cost[tab.basis])
    y = np.zeros(m)
    y[rows_kept] = y_kept
    y[flip] *= -1
    # objective of the dual, accounting for shifted lower bounds
    dual_obj = float(y @ np.concatenate([shift_rhs, lp.upper[ub_cols] - lp.lower[ub_cols]])
                     + lp.c @ lp.lower)
    return LPResult("optimal", x, y[:m0], float(lp.c @ x), dual_obj, tab.iterations, list(tab.basis))
