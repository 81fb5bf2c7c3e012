"""Simulation and statistics toolkit for knowledge built from generation, measurement and coding.

Hidden micro-worlds are reachable only through generation operations and
measurement interactions that leave marks; coding rules map marks to
spectrum values, repeated successions give frequency tables, and those are
assembled into probability trees, Bell-type tests and locality scans.
"""

from __future__ import annotations

from .bell import CHSH_ANGLES, LHVModel, bell1964_check, chsh_value, lhv_max_bruteforce, world_chsh, world_correlation
from .coding import CodingRule, SpectrumValue, code, tof_momentum, validate_rule
from .errors import IqmError
from .marks import Mark, MarkSet
from .ops import EnvironmentSpec, GenerationOp, MeasurementSpec, SpacetimeSupport
from .protocol import FrequencyTable, accumulate_statistics, convergence_report, dispersion, evolve_generation, run_succession
from .scan import ScanConfig, run_scan, scan_verdict
from .tree import build_space, build_tree, independence_verdict, joint_marginal_report, meta_dependence_report
from .worlds import WorldSpec, build_world, generate_exemplar, measure_exemplar, register_world, view_catalog

__version__ = "0.1.0"

__all__ = [
    "CHSH_ANGLES",
    "CodingRule",
    "EnvironmentSpec",
    "FrequencyTable",
    "GenerationOp",
    "IqmError",
    "LHVModel",
    "Mark",
    "MarkSet",
    "MeasurementSpec",
    "ScanConfig",
    "SpacetimeSupport",
    "SpectrumValue",
    "WorldSpec",
    "accumulate_statistics",
    "bell1964_check",
    "build_space",
    "build_tree",
    "build_world",
    "chsh_value",
    "code",
    "convergence_report",
    "dispersion",
    "evolve_generation",
    "generate_exemplar",
    "independence_verdict",
    "joint_marginal_report",
    "lhv_max_bruteforce",
    "measure_exemplar",
    "meta_dependence_report",
    "register_world",
    "run_scan",
    "run_succession",
    "scan_verdict",
    "tof_momentum",
    "validate_rule",
    "view_catalog",
    "world_chsh",
    "world_correlation",
]
