"""Dynamic traffic assignment as a capacitated min-cost multicommodity flow on a time-expanded network."""
from .audit import AuditReport, check_feasibility, check_wardrop, flow_decompose, total_cost
from .demand import ArrivalCostParams, Demand, DemandTable, load_demands
from .expansion import TimeExpandedGraph, TimeGrid, build_time_expanded
from .lp import StandardFormLP, build_link_lp, dense_simplex, export_mps, read_mps
from .network import TransportNetwork, expand_junctions, load_network, network_from_dict
from .shortest_path import extract_path, shortest_tree
from .solution import PathFlow, Solution
from .vickrey import BottleneckScenario, solve_analytic, system_optimum

__version__ = "0.1.0"

__all__ = [
    "ArrivalCostParams", "AuditReport", "BottleneckScenario", "Demand", "DemandTable", "PathFlow",
    "Solution", "StandardFormLP", "TimeExpandedGraph", "TimeGrid", "TransportNetwork",
    "build_link_lp", "build_time_expanded", "check_feasibility", "check_wardrop", "dense_simplex",
    "expand_junctions", "export_mps", "extract_path", "flow_decompose", "load_demands",
    "load_network", "network_from_dict", "read_mps", "shortest_tree", "solve_analytic",
    "system_optimum", "total_cost",
]
