import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from currentlab import expr as E
from currentlab.parser import ParseError, UnknownVariableError, parse_expr, parse_scalar_expr

from strategies import polynomial


@pytest.mark.parametrize("text, point, expected", [
    ("exp(-x1)*x2", (0.0, 1.0), 1.0),
    ("x1*x1 - x2", (2.0, 1.0), 3.0),
    ("-x1^2", (2.0, 0.0), -4.0),
    ("2^3^2", (0.0, 0.0), 512.0),
    ("x1/x2/2", (8.0, 2.0), 2.0),
    ("pow(x1, 3) + 2**x2", (2.0, 3.0), 16.0),
    ("sin(pi/2) + cos(0)", (0.0, 0.0), 2.0),
    ("bump(1)", (0.0, 0.0), math.exp(-1.0)),
    ("1.5e1 * .5", (0.0, 0.0), 7.5),
])
def test_evaluates_like_arithmetic(text, point, expected):
    assert parse_scalar_expr(text, 2)(*point) == pytest.approx(expected, rel=1e-14)


@pytest.mark.parametrize("point", [(1.0, 0.0), (0.6, 0.8), (-2.0, 3.0), (0.0, -1.0)])
def test_bump_vanishes_outside_its_radius(point):
    assert parse_scalar_expr("bump(1)", 2)(*point) == 0.0


def test_declared_support_masks_values():
    f = parse_scalar_expr("1 + x1", 2, support=1.0)
    assert f(0.5, 0.0) == 1.5
    assert f(1.0, 0.5) == 0.0


def test_vectorised_evaluation_matches_pointwise():
    f = parse_scalar_expr("exp(x1)*sin(x2) + x1*x2", 2)
    X = np.array([[0.1, 0.2], [1.0, -1.0], [-0.3, 2.0]])
    assert np.allclose(f(X), [f(*p) for p in X], rtol=0, atol=1e-15)


@pytest.mark.parametrize("text, position", [
    ("x1 +* 2", 4),
    ("exp(x1", 6),
    ("(x1 + 1))", 8),
    ("2 $ x1", 2),
    ("", 0),
])
def test_parse_errors_carry_the_character_position(text, position):
    with pytest.raises(ParseError) as info:
        parse_expr(text, 2)
    assert info.value.position == position


def test_unknown_variable_is_reported():
    with pytest.raises(UnknownVariableError) as info:
        parse_expr("x1 + x3", 2)
    assert info.value.position == 5
    with pytest.raises(UnknownVariableError):
        parse_expr("log(x1)", 2)


def test_mixed_partials_are_the_same_node():
    e = parse_expr("exp(x1*x2)*sin(x2)", 2)
    assert E.diff(E.diff(e, 0), 1) == E.diff(E.diff(e, 1), 0)


@given(polynomial(3), st.integers(0, 2))
def test_symbolic_derivative_matches_finite_difference(text, i):
    e = parse_expr(text, 3)
    p = np.array([0.3, -0.7, 1.1])
    h = 1e-5
    up, dn = p.copy(), p.copy()
    up[i] += h
    dn[i] -= h
    fd = (E.evaluate(e, list(up)) - E.evaluate(e, list(dn))) / (2 * h)
    assert float(E.evaluate(E.diff(e, i), list(p))) == pytest.approx(float(fd), rel=1e-6, abs=1e-6)


@given(polynomial(2), polynomial(2))
def test_sum_and_product_of_parsed_texts(a, b):
    p = [0.4, -1.3]
    va, vb = float(E.evaluate(parse_expr(a, 2), p)), float(E.evaluate(parse_expr(b, 2), p))
    assert float(E.evaluate(parse_expr(f"({a}) + ({b})", 2), p)) == pytest.approx(va + vb, abs=1e-12)
    assert float(E.evaluate(parse_expr(f"({a}) * ({b})", 2), p)) == pytest.approx(va * vb, abs=1e-11)
