"""Discrete ergodic HJB equations, occupation-measure LPs and the vanishing-discount limit."""

from .grid import GridFunction, TorusGrid
from .problem import GALLERY_IDS, ControlSet, EllipticProblem, SpecError, build_gallery, parse_spec, two_basins
from .generator import build_generator
from .hjb import solve_discounted, solve_ergodic_howard
from .lp import StandardFormLP, check_certificate, simplex_solve
from .mather import ERGODIC, discounted, solve_mather
from .vanish import (
    geometric_schedule, harmonic_schedule, mather_vertices, run_schedule, selection_check, subsequence_probe,
)

__all__ = [
    "TorusGrid", "GridFunction", "GALLERY_IDS", "ControlSet", "EllipticProblem", "SpecError", "build_gallery",
    "parse_spec", "two_basins", "build_generator", "solve_discounted", "solve_ergodic_howard",
    "StandardFormLP", "check_certificate", "simplex_solve", "ERGODIC", "discounted", "solve_mather",
    "geometric_schedule", "harmonic_schedule", "mather_vertices", "run_schedule", "selection_check",
    "subsequence_probe",
]
