import numpy as np
import pytest
from hypothesis import given, strategies as st

from currentlab.forms import (AffineMap, DifferentialForm, DimensionMismatch, eval_form, exterior_derivative,
                              form_from_terms, pullback, wedge)

from strategies import poly_form


def coeffs(alpha, point):
    return {k: v for k, v in eval_form(alpha, point).items() if v != 0.0}


def same(a, b, points, tol=1e-12):
    for p in points:
        ca, cb = eval_form(a, p), eval_form(b, p)
        for k in set(ca) | set(cb):
            assert ca.get(k, 0.0) == pytest.approx(cb.get(k, 0.0), abs=tol)


def test_wedge_examples():
    dx, dy = DifferentialForm.constant(2, (1,)), DifferentialForm.constant(2, (2,))
    assert coeffs(wedge(dx, dy), [0.3, 0.1]) == {(1, 2): 1.0}
    assert coeffs(wedge(dy, dx), [0.3, 0.1]) == {(1, 2): -1.0}
    assert coeffs(wedge(form_from_terms(2, 1, [((1,), "x1")]), dx), [2.0, 1.0]) == {}
    v = wedge(form_from_terms(2, 1, [((2,), "x1")]), form_from_terms(2, 1, [((1,), "x2")]))
    assert coeffs(v, [2.0, 3.0]) == {(1, 2): -6.0}


def test_exterior_derivative_examples():
    assert coeffs(exterior_derivative(form_from_terms(2, 1, [((2,), "x1^2")])), [1.5, 0.2]) == {(1, 2): 3.0}
    assert exterior_derivative(exterior_derivative(form_from_terms(2, 0, [((), "x1*x2")]))).is_zero()
    assert exterior_derivative(form_from_terms(2, 1, [((1,), "x1")])).is_zero()


def test_pullback_examples():
    A = AffineMap(np.array([[1.0], [2.0]]), np.zeros(2))
    assert coeffs(pullback(A, DifferentialForm.constant(2, (2,))), [0.7]) == {(1,): 2.0}
    # x dy under t -> (t, 2t) is 2t dt
    assert coeffs(pullback(A, form_from_terms(2, 1, [((2,), "x1")])), [0.7]) == {(1,): pytest.approx(1.4)}
    alpha = form_from_terms(2, 1, [((1,), "x1*x2"), ((2,), "sin(x1)")])
    same(pullback(AffineMap.identity(2), alpha), alpha, [[0.1, 0.2], [-1.0, 3.0]])


def test_eval_form_examples():
    assert eval_form(form_from_terms(2, 1, [((2,), "x1")]), [3.0, 0.0]) == {(2,): 3.0}
    assert eval_form(DifferentialForm.zero(2, 1), [1.0, 2.0]) == {}
    assert eval_form(form_from_terms(2, 2, [((1, 2), "x1^2")]), [2.0, 5.0]) == {(1, 2): 4.0}


def test_terms_with_unsorted_indices_pick_up_the_sign():
    a = form_from_terms(3, 2, [((2, 1), "1")])
    assert coeffs(a, [0, 0, 0]) == {(1, 2): -1.0}


def test_mismatched_dimensions_are_rejected():
    with pytest.raises(DimensionMismatch):
        wedge(DifferentialForm.constant(2, (1,)), DifferentialForm.constant(3, (1,)))


def test_degree_overflow_gives_zero():
    top = form_from_terms(2, 2, [((1, 2), "x1")])
    assert wedge(top, DifferentialForm.constant(2, (1,))).is_zero()


@given(st.integers(0, 3), st.integers(0, 3), st.data())
def test_wedge_is_graded_antisymmetric(k, l, data):
    a = data.draw(poly_form(3, k))
    b = data.draw(poly_form(3, l))
    pts = np.random.default_rng(k * 7 + l).uniform(-1.5, 1.5, size=(100, 3))
    ab, ba = wedge(a, b), wedge(b, a)
    sign = (-1) ** (k * l)
    for K in set(ab.terms) | set(ba.terms):
        lhs = ab.coefficients(pts).get(K, np.zeros(len(pts)))
        rhs = ba.coefficients(pts).get(K, np.zeros(len(pts)))
        assert np.allclose(lhs, sign * rhs, rtol=1e-12, atol=1e-12)


@given(st.integers(0, 2), st.data())
def test_d_squared_is_exactly_zero(k, data):
    a = data.draw(poly_form(3, k))
    dd = exterior_derivative(exterior_derivative(a))
    assert dd.is_zero()
    pts = np.random.default_rng(k).uniform(-2, 2, size=(20, 3))
    for v in dd.coefficients(pts).values():
        assert np.all(v == 0.0)


@given(st.integers(0, 2), st.integers(0, 1), st.data())
def test_pullback_commutes_with_wedge_and_d(k, l, data):
    a = data.draw(poly_form(3, k))
    b = data.draw(poly_form(3, l))
    rng = np.random.default_rng(k + 3 * l)
    A = AffineMap(rng.normal(size=(3, 2)), rng.normal(size=3))
    pts = rng.uniform(-1, 1, size=(25, 2))
    same(pullback(A, wedge(a, b)), wedge(pullback(A, a), pullback(A, b)), pts, tol=1e-9)
    same(pullback(A, exterior_derivative(a)), exterior_derivative(pullback(A, a)), pts, tol=1e-9)


@given(st.integers(0, 1), st.data())
def test_leibniz_rule(k, data):
    a = data.draw(poly_form(2, k))
    b = data.draw(poly_form(2, 1 - k if k else 1))
    l = b.degree
    lhs = exterior_derivative(wedge(a, b))
    rhs = wedge(exterior_derivative(a), b) + wedge(a, exterior_derivative(b)).scale((-1.0) ** k)
    same(lhs, rhs, np.random.default_rng(l).uniform(-1, 1, size=(20, 2)), tol=1e-9)
