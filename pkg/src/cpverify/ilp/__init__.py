"""Integer programs for hedge min-cut and longest path, plus a bundled solver."""

from .formulations import (
    build_longest_path_ilp,
    build_mincut_ilp,
    longest_path,
    min_cut,
    verify_p3_reachable_k,
    verify_p4_bounded_length,
    verify_p7_equal_bound,
)
from .lpformat import export_lp, parse_lp
from .model import Constraint, IlpModel, IlpSolution
from .solver import solve

__all__ = [
    "Constraint",
    "IlpModel",
    "IlpSolution",
    "build_longest_path_ilp",
    "build_mincut_ilp",
    "export_lp",
    "longest_path",
    "min_cut",
    "parse_lp",
    "solve",
    "verify_p3_reachable_k",
    "verify_p4_bounded_length",
    "verify_p7_equal_bound",
]
