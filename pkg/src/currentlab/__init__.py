"""Numerical laboratory for de Rham currents on R^m: smoothing, densities and regularised intersections."""

from .currents import Current, Dirac, SmoothFormCurrent, cube_chain, segment, simplex_chain
from .forms import DifferentialForm, exterior_derivative, form_from_terms, pullback, wedge
from .intersection import EpsSchedule, IntersectionResult, i_eps, intersect
from .lebesgue import Plane, atom_diagnostic, density, polar
from .mollifier import Kernel, a_eps, homotopy_residual, r_eps
from .quadrature import QuadratureConfig

__version__ = "0.1.0"

__all__ = [
    "Current", "Dirac", "SmoothFormCurrent", "cube_chain", "segment", "simplex_chain",
    "DifferentialForm", "exterior_derivative", "form_from_terms", "pullback", "wedge",
    "EpsSchedule", "IntersectionResult", "i_eps", "intersect",
    "Plane", "atom_diagnostic", "density", "polar",
    "Kernel", "a_eps", "homotopy_residual", "r_eps", "QuadratureConfig",
]
