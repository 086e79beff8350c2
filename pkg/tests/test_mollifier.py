import math

import numpy as np
import pytest
from scipy import integrate

from currentlab import fixtures as F
from currentlab.currents import Dirac, cube_chain, segment, simplex_chain
from currentlab.forms import DifferentialForm, form_from_terms
from currentlab.mollifier import (Kernel, a_eps_dual, homotopy_residual, kernel_constants, r_eps, r_eps_dual,
                                  r_eps_form)
from currentlab.quadrature import QuadratureConfig

Q = QuadratureConfig()


def bump(u):
    return math.exp(-1.0 / (1.0 - u * u)) if abs(u) < 1 else 0.0


C_ORACLE = integrate.quad(bump, -1, 1, epsabs=1e-15, epsrel=1e-13)[0]
M2_ORACLE = integrate.quad(lambda u: u * u * bump(u), -1, 1, epsabs=1e-15, epsrel=1e-13)[0] / C_ORACLE


def f1(u):
    return bump(u) / C_ORACLE


def test_kernel_constants_against_independent_quadrature():
    k = kernel_constants()
    assert k.c == pytest.approx(C_ORACLE, rel=1e-10)
    assert 1.0 / k.c == pytest.approx(2.25228, abs=1e-5)
    assert k.m2 == pytest.approx(M2_ORACLE, rel=1e-10)
    assert k.f1_zero == pytest.approx(0.82857, abs=1e-5)


@pytest.mark.parametrize("m", [1, 2, 3])
@pytest.mark.parametrize("eps", [1.0, 0.5, 0.1])
def test_scaled_kernel_integrates_to_one(m, eps):
    kern = Kernel(m)
    if m == 1:
        total = integrate.quad(lambda x: kern.scaled([[x]], eps)[0], -eps, eps, epsabs=1e-13)[0]
    elif m == 2:
        total = integrate.dblquad(lambda y, x: kern.scaled([[x, y]], eps)[0], -eps, eps, -eps, eps,
                                  epsabs=1e-12)[0]
    else:
        total = kern.normalization(eps)
    assert total == pytest.approx(1.0, abs=1e-6)


def test_kernel_is_even(rng):
    kern = Kernel(3)
    X = rng.uniform(-1.2, 1.2, size=(1000, 3))
    assert np.array_equal(kern(X), kern(-X))


def test_kernel_cdf_against_quadrature():
    kern = Kernel(1)
    for t in (-0.9, -0.3, 0.0, 0.45, 0.99):
        exact = integrate.quad(f1, -1, t, epsabs=1e-15)[0]
        assert float(kern.cdf(t)) == pytest.approx(exact, abs=1e-12)
    assert kern.cdf(-2.0) == 0.0 and kern.cdf(2.0) == 1.0


def test_wide_profile_is_normalised():
    assert Kernel(2, "bump-product-wide").normalization() == pytest.approx(1.0, abs=1e-9)
    with pytest.raises(ValueError):
        Kernel(2, "gaussian")


@pytest.mark.parametrize("y", [0.0, 0.03, -0.05, 0.08])
def test_fiber_integral_of_an_axis_segment(y):
    eps = 0.1
    T = segment([-2, 0], [2, 0])
    C = r_eps_form(T, eps, np.array([[0.0, y]]), Kernel(2), Q)
    mag = abs(sum(v[0] for v in C.values()))
    assert mag == pytest.approx(f1(y / eps) / eps, rel=1e-9)


def test_fiber_integral_at_the_axis_is_f1_zero_over_eps():
    C = r_eps_form(segment([-2, 0], [2, 0]), 0.1, np.array([[0.0, 0.0]]), Kernel(2), Q)
    assert abs(C[(2,)][0]) == pytest.approx(8.2857, abs=1e-3)


@pytest.mark.parametrize("T", [segment([0, 0], [1, 1]), cube_chain([0, 0], [[1, 0], [0, 1]]), Dirac([0.2, 0.1], (1,))],
                         ids=["segment", "square", "dirac"])
def test_fiber_integral_vanishes_far_away(T):
    eps = 0.2
    lo, hi = T.support_box()
    far = hi + eps * math.sqrt(2) + 0.01
    C = r_eps_form(T, eps, np.array([far, lo - eps * 1.5]), Kernel(2), Q)
    assert all(np.all(v == 0.0) for v in C.values())


def test_fiber_integral_of_the_square_matches_a_product_of_cdfs():
    eps, kern = 0.3, Kernel(2)
    T = cube_chain([0, 0], [[1, 0], [0, 1]])
    P = np.array([[0.1, 0.95], [0.5, 0.5], [-0.2, 1.1]])
    C = r_eps_form(T, eps, P, kern, Q)[()]
    cdf = lambda t: integrate.quad(f1, -1, max(-1.0, min(1.0, t)))[0]
    for p, v in zip(P, C):
        expected = np.prod([cdf(p[k] / eps) - cdf((p[k] - 1) / eps) for k in range(2)]) / 1.0
        assert v == pytest.approx(expected, abs=1e-10)


def test_fiber_integral_of_a_triangle_against_dblquad():
    eps, kern = 0.25, Kernel(2)
    T = simplex_chain([[0, 0], [1, 0], [0, 1]])
    p = np.array([0.45, 0.5])
    exact = integrate.dblquad(lambda y, x: f1((p[0] - x) / eps) * f1((p[1] - y) / eps) / eps ** 2,
                              0, 1, 0, lambda x: 1 - x, epsabs=1e-12)[0]
    assert r_eps_form(T, eps, p[None, :], kern, Q)[()][0] == pytest.approx(exact, abs=1e-8)


def test_dual_of_a_constant_form_is_unchanged():
    phi = DifferentialForm.constant(2, (1,), 3.5)
    v = r_eps_dual(phi, 0.3).coefficients(np.array([[0.1, -0.4], [2.0, 1.0]]))[(1,)]
    assert np.allclose(v, 3.5, rtol=1e-13)


def test_dual_preserves_linear_coefficients():
    v = r_eps_dual(form_from_terms(1, 1, [((1,), "x1")]), 0.3).coefficients(np.array([[0.7], [-1.2]]))[(1,)]
    assert np.allclose(v, [0.7, -1.2], atol=1e-14)


@pytest.mark.parametrize("eps", [0.4, 0.1])
def test_dual_of_a_square_adds_the_second_moment(eps):
    y = np.array([[0.7], [-1.2]])
    v = r_eps_dual(form_from_terms(1, 1, [((1,), "x1^2")]), eps).coefficients(y)[(1,)]
    assert np.allclose(v, y[:, 0] ** 2 + eps ** 2 * M2_ORACLE, rtol=1e-12)


def test_homotopy_dual_examples():
    y = np.array([[0.3], [-2.0]])
    assert a_eps_dual(DifferentialForm.constant(1, (1,)), 0.3).coefficients(y).get((), np.zeros(2)) == \
        pytest.approx([0.0, 0.0], abs=1e-15)
    eps = 0.3
    v = a_eps_dual(form_from_terms(1, 1, [((1,), "x1")]), eps).coefficients(y)[()]
    assert np.allclose(np.abs(v), eps ** 2 / 2 * M2_ORACLE, rtol=1e-12)
    assert a_eps_dual(form_from_terms(1, 0, [((), "x1")]), eps).is_zero()


def test_homotopy_residual_examples():
    g1 = form_from_terms(1, 1, [((1,), "exp(x1)*bump(2)")], support=2.0)
    assert homotopy_residual(segment([0], [1]), g1, 0.25) < 1e-3
    g0 = form_from_terms(1, 0, [((), "cos(3*x1)*bump(2)")], support=2.0)
    assert homotopy_residual(Dirac([0.3], (1,)), g0, 0.25) < 1e-3
    far = form_from_terms(2, 1, [((1,), "bump(0.5)")], support=0.5).with_support(None)
    shifted = form_from_terms(2, 1, [((1,), "exp(-1/(1 - ((x1 - 5)^2 + x2^2)/0.25))")])
    T = segment([0, 0], [1, 0])
    # the test form vanishes on the eps-neighbourhood of T: both sides are 0
    from currentlab.polytope import Halfspaces
    phi = shifted.with_support(Halfspaces.box([4.5, -0.5], [5.5, 0.5]))
    assert homotopy_residual(T, phi, 0.2) == 0.0
    assert far.degree == 1


@pytest.mark.parametrize("name", ["homotopy-segment", "homotopy-dirac"])
def test_homotopy_residual_falls_with_the_grid(name):
    P = F.get(name)
    for eps in (0.4, 0.2, 0.1):
        coarse = homotopy_residual(P.T, P.phi, eps, Q)
        fine = homotopy_residual(P.T, P.phi, eps, Q.refined())
        assert coarse < 1e-3
        assert fine <= coarse / 4 or fine < 1e-14


@pytest.mark.parametrize("T", [cube_chain([0, 0], [[1, 0], [0, 1]]), segment([0, 0], [1, 1]),
                               simplex_chain([[0, 0], [1, 0], [0, 1]]), Dirac([0.1, 0.2], (1,))],
                         ids=["square", "segment", "triangle", "dirac"])
def test_transposition(T):
    eps, kern = 0.2, Kernel(2)
    coefs = {0: "exp(x1)*x2^2", 1: "sin(x1 + x2)"}
    from currentlab.forms import multiindices
    phi = form_from_terms(2, T.dim, [(I, coefs[T.dim % 2]) for I in multiindices(2, T.dim)])
    direct = r_eps(T, eps, kern, Q).evaluate(phi, Q)
    dual = T.evaluate(r_eps_dual(phi, eps, kern, Q), Q)
    assert direct == pytest.approx(dual, rel=1e-6, abs=1e-8)


@pytest.mark.parametrize("T", [simplex_chain([[0, 0], [1, 0], [0, 1]]), segment([0, 0], [1, 1]),
                               Dirac([0.0, 0.0], (1,))], ids=["triangle", "segment", "dirac"])
def test_coefficients_are_smooth(T, rng):
    eps, kern = 0.3, Kernel(2)
    P = rng.uniform(-0.2, 1.0, size=(6, 2))
    grads = []
    for h in (1e-3, 1e-4):
        row = []
        for k in range(2):
            e = np.zeros(2)
            e[k] = h
            up, dn = r_eps_form(T, eps, P + e, kern, Q), r_eps_form(T, eps, P - e, kern, Q)
            row.append(np.concatenate([(up[K] - dn[K]) / (2 * h) for K in sorted(up)]))
        grads.append(np.concatenate(row))
    assert np.all(np.isfinite(grads[1]))
    assert np.max(np.abs(grads[1])) < 50.0 / eps ** 2
    # differences shrink relative to the natural gradient scale 1/eps^3
    assert np.allclose(grads[0], grads[1], rtol=0.05, atol=1e-4 / eps ** 3)


def test_eps_must_be_positive():
    with pytest.raises(ValueError):
        r_eps(segment([0, 0], [1, 0]), 0.0)
