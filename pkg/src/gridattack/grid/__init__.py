"""Per-unit network model and power-flow solvers."""
from .case import Bus, GridCase, Generator, Line, Storage, case_from_dict, load_case, save_case
from .powerflow import (
    InjectionVector,
    PowerFlowSolution,
    ViolationReport,
    ac_power_flow,
    ac_power_flow_batch,
    build_admittance,
    check_violations,
    dc_power_flow,
)

__all__ = [
    "Bus", "GridCase", "Generator", "Line", "Storage", "case_from_dict", "load_case", "save_case",
    "InjectionVector", "PowerFlowSolution", "ViolationReport", "ac_power_flow", "ac_power_flow_batch", "build_admittance",
    "check_violations", "dc_power_flow",
]
