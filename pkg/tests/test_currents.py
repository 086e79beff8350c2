import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate

from currentlab.currents import (BoundaryCurrent, Cell, DegreeMismatch, Dirac, NonCompactPairing, PolyChain,
                                 SmoothFormCurrent, SumCurrent, cube_chain, product, segment, simplex_chain,
                                 wedge_smooth, zero_chain)
from currentlab.forms import AffineMap, DifferentialForm, exterior_derivative, form_from_terms, pullback, wedge
from currentlab.quadrature import QuadratureConfig

from strategies import poly_form

Q = QuadratureConfig()


def square():
    return cube_chain([0, 0], [[1, 0], [0, 1]])


def triangle():
    return simplex_chain([[0, 0], [1, 0], [0, 1]])


CHAINS = {
    "square": square,
    "triangle": triangle,
    "diagonal": lambda: segment([0, 0], [1, 1]),
    "two-cells": lambda: PolyChain([(1.0, Cell.simplex([[0, 0], [1, 0], [1, 1]])),
                                    (-2.0, Cell.cube([0.5, -0.5], [[0.5, 0.2], [0.1, 0.7]]))]),
    "tetrahedron": lambda: simplex_chain([[0, 0, 0], [1, 0, 0], [0, 1, 0], [0.2, 0.1, 1]]),
    "slab": lambda: cube_chain([0, 0, 0], [[1, 0, 0], [0, 2, 0], [0.3, 0, 1]]),
    "triangle-in-3d": lambda: simplex_chain([[0, 0, 0], [1, 0, 0.5], [0, 1, -0.5]]),
}


def test_area_examples():
    area = DifferentialForm.constant(2, (1, 2))
    assert square().evaluate(area, Q) == pytest.approx(1.0, abs=1e-12)
    assert triangle().evaluate(area, Q) == pytest.approx(0.5, abs=1e-12)


def test_segment_parametrisation():
    # int_0^1 t dt
    assert segment([0, 0], [1, 1]).evaluate(form_from_terms(2, 1, [((2,), "x1")]), Q) == pytest.approx(0.5)


def test_dirac_extracts_the_complementary_coefficient():
    g = form_from_terms(2, 1, [((2,), "cos(x1) + 3*exp(x2)")])
    assert Dirac([0, 0], (1,)).evaluate(g, Q) == pytest.approx(4.0)
    # delta dx2 pairs with dx1 through the sign of (2, 1)
    g1 = form_from_terms(2, 1, [((1,), "2 + x1")])
    assert Dirac([1, 0], (2,)).evaluate(g1, Q) == pytest.approx(-3.0)
    assert Dirac([0.5, 0.5], (), weight=2.0).evaluate(DifferentialForm.constant(2, (1, 2)), Q) == 2.0


def test_boundary_examples():
    g = form_from_terms(1, 0, [((), "exp(x1)")])
    assert segment([0], [1]).boundary().evaluate(g, Q) == pytest.approx(math.e - 1.0, abs=1e-13)
    assert square().boundary().evaluate(form_from_terms(2, 1, [((2,), "x1")]), Q) == pytest.approx(1.0)


def test_wedge_smooth_examples():
    v = wedge_smooth(square(), form_from_terms(2, 1, [((2,), "x1")]))
    assert v.evaluate(DifferentialForm.constant(2, (1,)), Q) == pytest.approx(-0.5)
    seg = segment([0, 0], [1, 0])
    assert wedge_smooth(seg, form_from_terms(2, 0, [((), "x1")])).evaluate(DifferentialForm.constant(2, (1,)),
                                                                          Q) == pytest.approx(0.5)
    one = DifferentialForm.constant(2, (), 1.0)
    phi = form_from_terms(2, 2, [((1, 2), "exp(x1)*x2")])
    assert wedge_smooth(square(), one).evaluate(phi, Q) == pytest.approx(square().evaluate(phi, Q), rel=1e-13)


def test_product_examples():
    s = segment([0], [1])
    assert product(s, s).evaluate(DifferentialForm.constant(2, (1, 2)), Q) == pytest.approx(1.0)
    g = form_from_terms(2, 1, [((2,), "exp(x1 + x2) + x2^2")])
    expected, _ = integrate.quad(lambda t: math.exp(t) + t * t, 0, 1)
    assert product(Dirac([0.0], (1,)), s).evaluate(g, Q) == pytest.approx(expected, rel=1e-12)


@pytest.mark.parametrize("d1, d2", [(1, 1), (1, 2), (2, 2)])
def test_swapping_product_factors(d1, d2):
    cells = {1: segment([0], [1.5]), 2: cube_chain([0, 0], [[1, 0.2], [0, 1]])}
    T1, T2 = cells[d1], cells[d2]
    m1, m2 = T1.m, T2.m
    m = m1 + m2
    # a form on R^{m2} x R^{m1}; the swap map sends (x, y) in R^{m1} x R^{m2} to (y, x)
    psi = form_from_terms(m, d1 + d2, [(tuple(range(1, m + 1)), "exp(0.3*x1)*(1 + x2*x" + str(m) + ")")])
    P = np.zeros((m, m))
    P[:m2, m1:] = np.eye(m2)
    P[m2:, :m1] = np.eye(m1)
    swapped = pullback(AffineMap(P, np.zeros(m)), psi)
    lhs = product(T2, T1).evaluate(psi, Q)
    rhs = product(T1, T2).evaluate(swapped, Q)
    assert lhs == pytest.approx((-1) ** (d1 * d2) * rhs, rel=1e-10)


def test_degree_gate():
    with pytest.raises(DegreeMismatch):
        square().evaluate(DifferentialForm.constant(2, (1,)), Q)
    with pytest.raises(DegreeMismatch):
        Dirac([0, 0]).evaluate(DifferentialForm.constant(2, ()), Q)


def test_noncompact_pairing_is_rejected():
    omega = SmoothFormCurrent(form_from_terms(2, 0, [((), "exp(-x1*x1)")]))
    with pytest.raises(NonCompactPairing):
        omega.evaluate(form_from_terms(2, 2, [((1, 2), "1")]), Q)


def test_smooth_form_current_against_scipy():
    omega = form_from_terms(2, 1, [((1,), "x2*bump(1)"), ((2,), "x1^2*bump(1)")], support=1.0)
    phi = form_from_terms(2, 1, [((1,), "1 + x1"), ((2,), "x2")])
    # omega ^ phi = (x2*x2 - x1^2*(1 + x1)) bump dx1^dx2
    bump = lambda x, y: math.exp(-1.0 / (1 - x * x - y * y)) if x * x + y * y < 1 else 0.0
    exact, _ = integrate.dblquad(lambda y, x: (y * y - x * x * (1 + x)) * bump(x, y), -1, 1,
                                 lambda x: -math.sqrt(1 - x * x), lambda x: math.sqrt(1 - x * x), epsabs=1e-12)
    assert SmoothFormCurrent(omega).evaluate(phi, Q) == pytest.approx(exact, abs=1e-9)


@pytest.mark.parametrize("name", sorted(CHAINS))
def test_stokes_geometric_boundary_matches_duality(name):
    T = CHAINS[name]()
    m, k = T.m, T.dim - 1
    rng = np.random.default_rng(len(name))
    terms = []
    from currentlab.forms import multiindices
    for I in multiindices(m, k):
        a, b, c = rng.integers(-3, 4, size=3)
        terms.append((I, f"{a}*x1^2*x{m} + {b}*exp(0.5*x2) + {c}*x1*x2"))
    phi = form_from_terms(m, k, terms)
    geometric = T.boundary().evaluate(phi, Q)
    duality = BoundaryCurrent(T).evaluate(phi, Q)
    stokes = T.evaluate(exterior_derivative(phi), Q)
    assert geometric == pytest.approx(stokes, rel=1e-9, abs=1e-10)
    assert duality == pytest.approx(stokes, rel=1e-12, abs=1e-12)


@pytest.mark.parametrize("name", sorted(CHAINS))
def test_boundary_of_boundary_vanishes(name):
    T = CHAINS[name]()
    bb = T.boundary().boundary()
    if bb.dim < 0:
        return
    rng = np.random.default_rng(3)
    from currentlab.forms import multiindices
    phi = form_from_terms(T.m, bb.dim, [(I, f"{rng.integers(1, 4)}*exp(x1)*x{T.m}^2 + x1*x2")
                                        for I in multiindices(T.m, bb.dim)])
    assert abs(bb.evaluate(phi, Q)) <= 1e-11
    assert abs(BoundaryCurrent(BoundaryCurrent(T)).evaluate(phi, Q)) <= 1e-11


@given(st.floats(-3, 3), st.floats(-3, 3), st.data())
def test_linearity_in_the_current(a, b, data):
    phi = data.draw(poly_form(2, 2))
    T1, T2 = square(), triangle()
    lhs = SumCurrent([(a, T1), (b, T2)]).evaluate(phi, Q)
    rhs = a * T1.evaluate(phi, Q) + b * T2.evaluate(phi, Q)
    assert lhs == pytest.approx(rhs, rel=1e-12, abs=1e-12)


@given(st.data())
def test_linearity_in_the_form(data):
    a, b = data.draw(poly_form(2, 1)), data.draw(poly_form(2, 1))
    T = segment([0.2, -0.4], [1.0, 0.7])
    assert T.evaluate(a + b, Q) == pytest.approx(T.evaluate(a, Q) + T.evaluate(b, Q), rel=1e-12, abs=1e-12)


def test_orientation_and_weight():
    T = PolyChain([(2.5, Cell.simplex([[0, 0], [1, 0], [0, 1]], orientation=-1))])
    assert T.evaluate(DifferentialForm.constant(2, (1, 2)), Q) == pytest.approx(-1.25)


def test_zero_chain_pairs_to_zero():
    assert zero_chain(2, 1).evaluate(DifferentialForm.constant(2, (1,)), Q) == 0.0


def test_degenerate_cells_are_rejected():
    with pytest.raises(ValueError):
        Cell.simplex([[0, 0], [1, 1], [2, 2]])
