"""Built-in fixtures: currents, test forms and intersection problems with known answers."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

from .currents import Current, Dirac, SmoothFormCurrent, cube_chain, segment, simplex_chain
from .forms import DifferentialForm, form_from_terms
from .lebesgue import Plane

__all__ = ["Fixture", "FIXTURES", "GROUPS", "get", "catalog",
           "IntersectionProblem", "HomotopyProblem", "DensityProblem"]


@dataclass(frozen=True)
class IntersectionProblem:
    T1: Current
    T2: Current
    phi: DifferentialForm


@dataclass(frozen=True)
class HomotopyProblem:
    T: Current
    phi: DifferentialForm


@dataclass(frozen=True)
class DensityProblem:
    T: Current
    plane: Plane


@dataclass(frozen=True)
class Fixture:
    name: str
    group: str
    kind: str      # current | form | intersection | homotopy | density
    summary: str
    build: Callable[[], object]

    def to_dict(self) -> dict:
        return {"name": self.name, "group": self.group, "kind": self.kind, "summary": self.summary}


GROUPS = {
    "cells": "oriented affine cells; projected densities are indicator functions",
    "smooth": "currents given by smooth compactly supported forms",
    "dirac": "a Dirac mass, the standard non-absolutely-continuous current",
    "divergence": "Dirac against a coordinate plane: I_eps blows up like eps^-(m-p)",
    "kronecker": "transverse axes: the signed intersection count",
    "homotopy": "test problems for r_eps T - T = b a_eps T + a_eps b T",
    "pairs": "intersection problems with classical answers",
}


# ---------------------------------------------------------------- building blocks


def unit_square() -> Current:
    return cube_chain([0, 0], [[1, 0], [0, 1]])


def triangle() -> Current:
    return simplex_chain([[0, 0], [1, 0], [0, 1]])


def diagonal_segment() -> Current:
    return segment([0, 0], [1, 1])


def smooth_band() -> Current:
    # omega = h dx2; pushed to the x1-axis its density is -int h(a, y) dy
    return SmoothFormCurrent(form_from_terms(2, 1, [((2,), "(1 + x1)*exp(x2)*bump(1.5)")], support=1.5))


SMOOTH_BAND_H = "(1 + x1)*exp(x2)*bump(1.5)"

SMOOTH_OMEGAS = {
    "omega-a": [((1,), "bump(1.5)"), ((2,), "x1*bump(1.5)")],
    "omega-b": [((2,), "cos(x1)*bump(1.2)")],
    "omega-c": [((1,), "exp(-x2)*bump(1.6)"), ((2,), "sin(x1*x2)*bump(1.6)")],
}
OMEGA_SUPPORT = {"omega-a": 1.5, "omega-b": 1.2, "omega-c": 1.6}


def smooth_omega(name: str) -> DifferentialForm:
    return form_from_terms(2, 1, SMOOTH_OMEGAS[name], support=OMEGA_SUPPORT[name])


def classical_test_form(dim: int) -> DifferentialForm:
    """Test form pairing T ^ (1-form current) for a polyhedral T of the given dimension in R^2."""
    if dim == 2:
        return form_from_terms(2, 1, [((1,), "exp(x1)*bump(2)"), ((2,), "x2*bump(2)")], support=2.0)
    return form_from_terms(2, 0, [((), "cos(x1 + x2)*bump(2)")], support=2.0)


def kronecker(weight: float = 1.0) -> IntersectionProblem:
    phi = form_from_terms(2, 0, [((), "exp(1)*bump(1)")], support=1.0)  # phi(0) = 1
    return IntersectionProblem(segment([-1, 0], [1, 0]), segment([0, -1], [0, 1], weight), phi)


def divergence(m: int, p: int, half_width: float = 2.0) -> IntersectionProblem:
    """Dirac(0, dx_1..dx_p) against the p-plane spanned by x_1..x_p (a patch of half-width 2)."""
    if not 1 <= p < m:
        raise ValueError("need 1 <= p < m")
    origin = [-half_width] * p + [0.0] * (m - p)
    edges = [[2 * half_width if r == k else 0.0 for r in range(m)] for k in range(p)]
    plane = cube_chain(origin, edges)
    dirac = Dirac([0.0] * m, tuple(range(1, p + 1)))
    return IntersectionProblem(dirac, plane, DifferentialForm.constant(m, (), 1.0))


def square_segment() -> IntersectionProblem:
    phi = form_from_terms(2, 1, [((1,), "exp(x2)*bump(2)"), ((2,), "x1*bump(2)")], support=2.0)
    return IntersectionProblem(cube_chain([-0.5, -0.5], [[1, 0], [0, 1]]), segment([-1, 0.1], [1, 0.1]), phi)


OSCILLATORY = "cos(12*x1)*exp(x1)*bump(2)"


def homotopy_segment() -> HomotopyProblem:
    phi = form_from_terms(2, 1, [((1,), OSCILLATORY), ((2,), "sin(5*x2)*bump(2)")], support=2.0)
    return HomotopyProblem(segment([-0.5, -0.3], [0.7, 0.4]), phi)


def homotopy_dirac() -> HomotopyProblem:
    phi = form_from_terms(2, 0, [((), OSCILLATORY)], support=2.0)
    return HomotopyProblem(Dirac([0.1, -0.2], (1, 2)), phi)


# ---------------------------------------------------------------- catalog


def _fx(name, group, kind, summary, build):
    return name, Fixture(name, group, kind, summary, build)


FIXTURES: dict[str, Fixture] = dict([
    _fx("unit-square", "cells", "current", "unit square [0,1]^2, 2-dimensional, degree 0", unit_square),
    _fx("triangle", "cells", "current", "standard triangle (0,0),(1,0),(0,1)", triangle),
    _fx("diagonal-segment", "cells", "current", "segment (0,0) -> (1,1)", diagonal_segment),
    _fx("unit-segment", "cells", "density", "segment [0,1] x {0}, projected to the x1-axis",
        lambda: DensityProblem(segment([0, 0], [1, 0]), Plane((1,), 2))),
    _fx("long-segment", "cells", "density", "segment [0,2] x {0}, projected to the x1-axis",
        lambda: DensityProblem(segment([0, 0], [2, 0]), Plane((1,), 2))),
    _fx("square-boundary", "cells", "density", "boundary of the unit square, projected to the x1-axis",
        lambda: DensityProblem(unit_square().boundary(), Plane((1,), 2))),
    _fx("smooth-band", "smooth", "density", f"omega = {SMOOTH_BAND_H} dx2, projected to the x1-axis",
        lambda: DensityProblem(smooth_band(), Plane((1,), 2))),
    _fx("omega-a", "smooth", "form", "bump(1.5) dx1 + x1 bump(1.5) dx2", lambda: smooth_omega("omega-a")),
    _fx("omega-b", "smooth", "form", "cos(x1) bump(1.2) dx2", lambda: smooth_omega("omega-b")),
    _fx("omega-c", "smooth", "form", "exp(-x2) bump(1.6) dx1 + sin(x1 x2) bump(1.6) dx2",
        lambda: smooth_omega("omega-c")),
    _fx("dirac-origin", "dirac", "density", "delta_0 dx1 in R^2, projected to the x2-axis (an atom)",
        lambda: DensityProblem(Dirac([0, 0], (1,)), Plane((2,), 2))),
    _fx("divergence-2-1", "divergence", "intersection", "Dirac(0, dx1) against the x1-axis in R^2; |I| = f1(0)/eps",
        lambda: divergence(2, 1)),
    _fx("divergence-3-1", "divergence", "intersection", "Dirac(0, dx1) against the x1-axis in R^3; |I| ~ eps^-2",
        lambda: divergence(3, 1)),
    _fx("divergence-3-2", "divergence", "intersection", "Dirac(0, dx1^dx2) against the x1x2-plane in R^3; |I| ~ eps^-1",
        lambda: divergence(3, 2)),
    _fx("kronecker", "kronecker", "intersection", "x-axis against y-axis in R^2, phi(0) = 1; limit +-1",
        lambda: kronecker(1.0)),
    _fx("kronecker-weighted", "kronecker", "intersection", "as kronecker with the y-axis weighted by 2; limit +-2",
        lambda: kronecker(2.0)),
    _fx("square-segment", "pairs", "intersection", "square [-1/2,1/2]^2 against a horizontal segment",
        square_segment),
    _fx("homotopy-segment", "homotopy", "homotopy", "slanted segment with an oscillatory 1-form",
        homotopy_segment),
    _fx("homotopy-dirac", "homotopy", "homotopy", "Dirac mass with an oscillatory 0-form", homotopy_dirac),
])


def get(name: str):
    """Build the named fixture."""
    if name not in FIXTURES:
        raise KeyError(f"unknown fixture {name!r}; see list-fixtures")
    return FIXTURES[name].build()


def catalog(group: str | None = None) -> list[Fixture]:
    if group is not None and group not in GROUPS:
        raise KeyError(f"unknown fixture group {group!r}; choose from {sorted(GROUPS)}")
    return [f for f in FIXTURES.values() if group is None or f.group == group]
