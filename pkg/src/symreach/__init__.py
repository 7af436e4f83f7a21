"""Symmetry-accelerated reachtube caching for multi-agent safety verification."""

from .caches import SafetyCache, TubeCache, Verdict, quantize
from .dynamics import ModelSpec, eval_dynamics, make_model, simulate
from .geometry import HyperRect, Reachtube
from .reach import ReachEngine, compute_reachtube, estimate_discrepancy
from .scenario import Scenario, load_scenario, parse_scenario
from .symmetry import SymmetryMap, build_map, check_equivariance
from .verifier import (check_dynamic_safety, detect_fixed_point, guard_intersect, sym_compute,
                       sym_multi_verif, sym_safety_verif)

__version__ = "0.1.0"

__all__ = [
    "HyperRect", "Reachtube", "ModelSpec", "make_model", "eval_dynamics", "simulate",
    "compute_reachtube", "estimate_discrepancy", "ReachEngine", "SymmetryMap", "build_map",
    "check_equivariance", "TubeCache", "SafetyCache", "Verdict", "quantize", "Scenario",
    "load_scenario", "parse_scenario", "sym_compute", "sym_safety_verif", "guard_intersect",
    "check_dynamic_safety", "sym_multi_verif", "detect_fixed_point",
]
