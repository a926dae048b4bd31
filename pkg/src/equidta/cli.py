"""Command-line front end: ``equidta {expand,solve,audit,toy,export-lp,report}``.

Times on the command line are minutes.  Exit codes: 0 success, 1 a solve
that did not converge or an audit that failed, 2 bad input.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import logging
import math
import sys
from dataclasses import dataclass
from pathlib import Path


from . import audit as audit_mod
from . import colgen, exact, subgradient
from .demand import ArrivalCostParams, DemandError, load_demands
from .expansion import HorizonError, TimeGrid, build_time_expanded
from .instances import random_instance, toy_graph
from .lp import MAX_DENSE_COLUMNS, LPError, build_link_lp, export_mps
from .network import NetworkError, expand_junctions, load_network
from .solution import dumps, solution_from_dict, solution_to_dict
from .vickrey import BottleneckScenario, departure_profile, equilibrium_identities, solve_analytic, system_optimum

log = logging.getLogger("equidta")

METHODS = ("dual-subgradient", "column-generation", "dense-simplex")


class CliError(Exception):
    pass


@dataclass
class RunConfig:
    network: str | None = None
    demands: str | None = None
    dt: float = 1.0
    horizon: tuple[float, float] | None = None
    alpha: float = 2.0
    beta: float = 0.5
    method: str = "dual-subgradient"
    max_iter: int | None = None
    tol: float | None = None
    out: str = "."
    seed: int | None = None
    literal_roads: bool = False
    repair: bool = False

    def to_dict(self) -> dict:
        doc = dataclasses.asdict(self)
        doc["horizon"] = list(self.horizon) if self.horizon else None
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> "RunConfig":
        fields = {f.name for f in dataclasses.fields(cls)}
        kw = {k: v for k, v in doc.items() if k in fields}
        if kw.get("horizon") is not None:
            kw["horizon"] = tuple(kw["horizon"])
        return cls(**kw)


def _read(path: str, what: str) -> str:
    p = Path(path)
    if not p.is_file():
        raise CliError(f"{what} file not found: {path}")
    return p.read_text(encoding="utf-8")


def _write(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8", newline="\n")


def build_graph(cfg: RunConfig):
    """Load, junction-expand and time-expand the instance described by *cfg*."""
    if cfg.network is None:
        if cfg.seed is None:
            raise CliError("give --network and --demands, or --seed for a random instance")
        graph, _ = random_instance(cfg.seed)
        return graph
    if cfg.demands is None:
        raise CliError("--demands is required with --network")
    if not cfg.dt > 0:
        raise CliError("--dt must be positive")
    net = expand_junctions(load_network(_read(cfg.network, "network")))
    table = load_demands(_read(cfg.demands, "demands"), ArrivalCostParams(cfg.alpha, cfg.beta), net)
    if cfg.horizon is None:
        raise CliError("--horizon START END is required")
    grid = TimeGrid(cfg.dt, *cfg.horizon)
    return build_time_expanded(net, table, grid, literal_roads=cfg.literal_roads)


def run_solver(graph, cfg: RunConfig):
    method = cfg.method
    if method == "dense-simplex":
        if build_link_lp(graph).n_cols > MAX_DENSE_COLUMNS:
            log.warning("link LP too large for the dense simplex; using column generation")
            method = "column-generation"
        else:
            return exact.solve(graph)
    if method == "column-generation":
        kw = {} if cfg.max_iter is None else {"max_iter": cfg.max_iter}
        return colgen.solve(graph, **kw)
    if method == "dual-subgradient":
        kw = {"repair": cfg.repair}
        if cfg.max_iter is not None:
            kw["max_iter"] = cfg.max_iter
        if cfg.tol is not None:
            kw["tol"] = cfg.tol
        return subgradient.solve(graph, **kw)
    raise CliError(f"unknown method {method!r}")


def _audit(sol, graph) -> audit_mod.AuditReport:
    approximate = sol.method == "dual-subgradient"
    try:
        return audit_mod.audit(sol, graph, approximate=approximate)
    except (audit_mod.AuditError, audit_mod.DecompositionError) as exc:
        rep = audit_mod.AuditReport()
        rep.totals = {"objective": float(graph.cost @ sol.flows), "error": str(exc)}
        rep.demand_violations.append((-1, math.nan))
        return rep


# ------------------------------------------------------------------ commands

def cmd_expand(args, cfg: RunConfig) -> int:
    graph = build_graph(cfg)
    text = json.dumps(graph.to_dict(), indent=1, sort_keys=True) + "\n"
    if args.output:
        _write(Path(args.output), text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_solve(args, cfg: RunConfig) -> int:
    graph = build_graph(cfg)
    sol = run_solver(graph, cfg)
    out = Path(cfg.out)
    _write(out / "solution.json", dumps(solution_to_dict(sol, graph, cfg.to_dict())))
    buf = io.StringIO()
    if sol.method == "dual-subgradient":
        subgradient.write_log(sol.log, buf)
    else:
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(subgradient.LOG_FIELDS)
        w.writerow([sol.iterations, repr(sol.dual_bound), repr(sol.objective), repr(sol.gap),
                    repr(sol.max_violation), "0.0"])
    _write(out / "iterations.csv", buf.getvalue())
    rep = _audit(sol, graph) if sol.status != "infeasible" else None
    if rep is not None:
        _write(out / "audit.json", rep.to_json())
    summary = {"method": sol.method, "status": sol.status, "objective": sol.objective,
               "gap": sol.gap, "max_violation": sol.max_violation, "iterations": sol.iterations,
               "audit": rep.verdict if rep else "skipped"}
    print(json.dumps(summary, sort_keys=True))
    return 0 if sol.converged and rep is not None and rep.passed else 1


def cmd_audit(args, cfg: RunConfig) -> int:
    doc = json.loads(_read(args.solution, "solution"))
    if cfg.network is None and cfg.seed is None and "config" in doc:
        saved = RunConfig.from_dict(doc["config"])
        cfg = dataclasses.replace(saved, out=cfg.out)
    graph = build_graph(cfg)
    try:
        sol = solution_from_dict(doc, graph)
    except (KeyError, TypeError, ValueError) as exc:
        raise CliError(f"malformed solution file {args.solution}: {exc}") from exc
    rep = _audit(sol, graph)
    text = rep.to_json()
    if args.output:
        _write(Path(args.output), text)
    else:
        sys.stdout.write(text)
    return 0 if rep.passed else 1


def cmd_toy(args, cfg: RunConfig) -> int:
    try:
        s = BottleneckScenario(args.n_cars, args.cap, args.t_free, args.t_desired,
                               ArrivalCostParams(args.alpha, args.beta))
    except (ValueError, DemandError) as exc:
        raise CliError(str(exc)) from exc
    eq = solve_analytic(s)
    so = system_optimum(s)
    doc = {"equilibrium": eq.as_dict(), "system_optimum": so.as_dict(),
           "identities": equilibrium_identities(s, eq),
           "equilibrium_total": s.n_cars * eq.cost_per_driver}
    if args.compare_discrete:
        horizon = tuple(args.horizon) if args.horizon else (440.0, 600.0)
        graph = toy_graph(s, args.dt, horizon)
        sol = run_solver(graph, dataclasses.replace(cfg, method=args.method))
        doc["discrete"] = {"method": sol.method, "status": sol.status, "lp_total": sol.objective,
                           "system_optimum_total": so.total_cost,
                           "equilibrium_total": s.n_cars * eq.cost_per_driver}
    print(json.dumps(doc, indent=1, sort_keys=True))
    if args.profile:
        lo = eq.t1 - 10.0
        hi = eq.t3 + 10.0
        rows = ["t,rate"] + [f"{t:g},{r:g}" for t, r in departure_profile(s, lo, hi, args.dt)]
        _write(Path(args.profile), "\n".join(rows) + "\n")
    return 0


def cmd_export_lp(args, cfg: RunConfig) -> int:
    graph = build_graph(cfg)
    lp = build_link_lp(graph)
    out = Path(args.output)
    _write(out, export_mps(lp, args.name))
    report = {**lp.report(), "nodes": graph.n_nodes, "arcs": graph.n_arcs,
              "capacitated_arcs": int(graph.capacitated.size)}
    rpath = Path(args.report) if args.report else out.with_suffix(".json")
    _write(rpath, json.dumps(report, indent=1, sort_keys=True) + "\n")
    print(json.dumps(report, sort_keys=True))
    return 0


def _profiles(doc: dict):
    dep: dict[tuple, float] = {}
    arr: dict[tuple, float] = {}
    if "paths" in doc:
        for p in doc["paths"]:
            if p["departure_time"] is not None:
                key = (p["departure_time"], p["origin"])
                dep[key] = dep.get(key, 0.0) + p["flow"]
            if p["arrival_time"] is not None:
                key = (p["arrival_time"], p["destination"])
                arr[key] = arr.get(key, 0.0) + p["flow"]
    else:
        for a in doc["arcs"]:
            if a["class"] == "origin-connector" and a.get("departure_time") is not None:
                key = (a["departure_time"], a["tail"])
                dep[key] = dep.get(key, 0.0) + a["flow"]
            elif a["class"] == "arrival-cost":
                key = (a["tail_time"], a["tail"].split("@")[0].split("'")[0])
                arr[key] = arr.get(key, 0.0) + a["flow"]
    return dep, arr


def cmd_report(args, cfg: RunConfig) -> int:
    try:
        doc = json.loads(_read(args.solution, "solution"))
        arcs = doc["arcs"]
        dep, arr = _profiles(doc)
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise CliError(f"malformed solution file {args.solution}: {exc}") from exc
    out = Path(args.out)

    def table(header, data):
        rows = [",".join(header)]
        for (t, where), v in sorted(data.items()):
            rows.append(f"{t!r},{where},{v!r}")
        return "\n".join(rows) + "\n"

    _write(out / "departures.csv", table(("t", "origin", "vehicles"), dep))
    _write(out / "arrivals.csv", table(("t", "destination", "vehicles"), arr))
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("arc", "tail", "head", "class", "tail_time", "head_time", "flow", "capacity",
                "utilization", "price"))
    for a in arcs:
        cap = a["capacity"]
        util = "" if cap in ("inf", None) or not cap else repr(a["flow"] / cap)
        w.writerow((a["arc"], a["tail"], a["head"], a["class"], a["tail_time"], a["head_time"],
                    repr(a["flow"]), cap, util, repr(a["price"])))
    _write(out / "arc_loading.csv", buf.getvalue())
    print(json.dumps({"departures": sum(dep.values()), "arrivals": sum(arr.values())}, sort_keys=True))
    return 0


# ------------------------------------------------------------------ parser

def _instance_flags(p: argparse.ArgumentParser):
    p.add_argument("--network", help="network JSON")
    p.add_argument("--demands", help="demands CSV")
    p.add_argument("--dt", type=float, default=1.0, help="time quantum in minutes (default 1)")
    p.add_argument("--horizon", type=float, nargs=2, metavar=("START", "END"), help="minutes")
    p.add_argument("--alpha", type=float, default=2.0, help="late arrival penalty per minute")
    p.add_argument("--beta", type=float, default=0.5, help="early arrival penalty per minute")
    p.add_argument("--seed", type=int, help="use a random test instance instead of files")
    p.add_argument("--literal-roads", action="store_true",
                   help="waiting arcs only where road links end, as in the quadratic construction")


def make_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="equidta", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("expand", help="write the time-expanded graph as JSON")
    _instance_flags(p)
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_expand)

    p = sub.add_parser("solve", help="solve and audit; writes solution, log and audit files")
    _instance_flags(p)
    p.add_argument("--method", choices=METHODS, default="dual-subgradient")
    p.add_argument("--exact", action="store_true",
                   help="dense simplex when the LP is small enough, column generation otherwise")
    p.add_argument("--max-iter", type=int)
    p.add_argument("--tol", type=float)
    p.add_argument("--repair", action="store_true", help="repair capacity excess of subgradient flows")
    p.add_argument("--out", default=".", help="output directory")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("audit", help="check a solution file for feasibility and equilibrium")
    _instance_flags(p)
    p.add_argument("--solution", required=True)
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_audit)

    p = sub.add_parser("toy", help="closed-form single-bottleneck commute")
    p.add_argument("--n-cars", type=float, default=1800.0)
    p.add_argument("--cap", type=float, default=30.0, help="vehicles per minute")
    p.add_argument("--t-free", type=float, default=20.0)
    p.add_argument("--t-desired", type=float, default=540.0)
    p.add_argument("--alpha", type=float, default=2.0)
    p.add_argument("--beta", type=float, default=0.5)
    p.add_argument("--profile", help="write the departure-rate profile CSV here")
    p.add_argument("--compare-discrete", action="store_true",
                   help="also solve the discretized instance and compare totals")
    p.add_argument("--method", choices=METHODS, default="dense-simplex")
    p.add_argument("--dt", type=float, default=1.0)
    p.add_argument("--horizon", type=float, nargs=2, metavar=("START", "END"))
    p.set_defaults(func=cmd_toy)

    p = sub.add_parser("export-lp", help="write the link LP in fixed MPS format")
    _instance_flags(p)
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--name", help="MPS model name")
    p.add_argument("--report", help="dimension report JSON (default: next to the MPS file)")
    p.set_defaults(func=cmd_export_lp)

    p = sub.add_parser("report", help="departure, arrival and arc loading CSVs from a solution")
    p.add_argument("--solution", required=True)
    p.add_argument("--out", default=".", help="output directory")
    p.set_defaults(func=cmd_report)
    return ap


def _config(args) -> RunConfig:
    method = getattr(args, "method", "dual-subgradient")
    if getattr(args, "exact", False):
        method = "dense-simplex"
    return RunConfig(
        network=getattr(args, "network", None), demands=getattr(args, "demands", None),
        dt=getattr(args, "dt", 1.0),
        horizon=tuple(args.horizon) if getattr(args, "horizon", None) else None,
        alpha=getattr(args, "alpha", 2.0), beta=getattr(args, "beta", 0.5), method=method,
        max_iter=getattr(args, "max_iter", None), tol=getattr(args, "tol", None),
        out=getattr(args, "out", "."), seed=getattr(args, "seed", None),
        literal_roads=getattr(args, "literal_roads", False), repair=getattr(args, "repair", False),
    )


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    logging.captureWarnings(True)
    try:
        return args.func(args, _config(args))
    except (CliError, NetworkError, DemandError, HorizonError, LPError, audit_mod.AuditError,
            audit_mod.DecompositionError, ValueError) as exc:
        print(f"equidta {args.command}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
