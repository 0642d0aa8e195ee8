"""Quantization of rational polygon billiards with holes by elementary polygon patterns."""
from . import errors
from .diophantine import dirichlet_approx, rationalize_angles, rationalize_period_coefficients
from .dynamics import (CurvedBilliard, Circle, approximate, approximate_billiard, envelope_polygon,
                       find_periodic_orbits, radial_orbits, sinai_curved, trace)
from .epp import (build_full, build_sector, compute_genus, enumerate_periods, integer_rank, reglue,
                  same_period_span)
from .families import builtin_family, rect_holes, rect_rotated_holes, rectangle, sinai_polygon
from .geometry import BilliardSpec, build_billiard, make_billiard
from .spectrum import quantize_aperiodic, quantize_periodic, spectrum_table
from .wavefunction import boundary_residual, closed_form, evaluate, grid_field, prepare

__all__ = [
    "errors", "dirichlet_approx", "rationalize_angles", "rationalize_period_coefficients",
    "CurvedBilliard", "Circle", "approximate", "approximate_billiard", "envelope_polygon",
    "find_periodic_orbits", "radial_orbits", "sinai_curved", "trace",
    "build_full", "build_sector", "compute_genus", "enumerate_periods", "integer_rank", "reglue",
    "same_period_span", "builtin_family", "rect_holes", "rect_rotated_holes", "rectangle",
    "sinai_polygon", "BilliardSpec", "build_billiard", "make_billiard",
    "quantize_aperiodic", "quantize_periodic", "spectrum_table",
    "boundary_residual", "closed_form", "evaluate", "grid_field", "prepare",
]
