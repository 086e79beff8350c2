import math

import numpy as np
import pytest
from scipy import integrate

from currentlab import fixtures as F
from currentlab.currents import SmoothFormCurrent, cube_chain, segment, simplex_chain, zero_chain, wedge_smooth
from currentlab.forms import DifferentialForm, form_from_terms, wedge
from currentlab.intersection import (CONVERGED, DIVERGED, INCONCLUSIVE, EpsSchedule, classify,
                                     commutativity_residual, i_eps, intersect, loglog_slope)
from currentlab.mollifier import Kernel, kernel_constants
from currentlab.quadrature import QuadratureConfig


def bump(u):
    return math.exp(-1.0 / (1.0 - u * u)) if abs(u) < 1 else 0.0


C = integrate.quad(bump, -1, 1, epsabs=1e-15)[0]


def f1(u):
    return bump(u) / C


def kronecker_oracle(eps):
    # phi(x, 0) = e * bump(x); the y-axis smoothed at (x, 0) is f1(x / eps) / eps
    return integrate.quad(lambda u: f1(u) * math.e * bump(eps * u), -1, 1, epsabs=1e-14)[0]


@pytest.mark.parametrize("eps", [0.5, 0.2, 0.05])
def test_kronecker_pairing_is_a_convolution(eps):
    P = F.kronecker()
    assert i_eps(P.T1, P.T2, P.phi, eps) == pytest.approx(kronecker_oracle(eps), rel=1e-7)


def test_weight_scales_the_pairing_exactly():
    a, b = F.kronecker(1.0), F.kronecker(2.0)
    assert i_eps(b.T1, b.T2, b.phi, 0.1) == pytest.approx(2 * i_eps(a.T1, a.T2, a.phi, 0.1), rel=1e-14)


@pytest.mark.parametrize("eps", [0.4, 0.1, 0.01])
def test_dirac_against_a_line_is_f1_zero_over_eps(eps):
    P = F.divergence(2, 1)
    v = i_eps(P.T1, P.T2, P.phi, eps)
    assert v < 0
    assert abs(v) == pytest.approx(kernel_constants().f1_zero / eps, rel=1e-9)


def test_kronecker_converges_to_one():
    P = F.kronecker()
    res = intersect(P.T1, P.T2, P.phi)
    assert res.verdict == CONVERGED
    assert abs(res.limit) == pytest.approx(1.0, abs=0.01)


def test_dirac_against_a_line_diverges():
    P = F.divergence(2, 1)
    res = intersect(P.T1, P.T2, P.phi)
    assert res.verdict == DIVERGED and res.limit is None
    assert res.slope == pytest.approx(-1.0, abs=0.1)


@pytest.mark.parametrize("m, p", [(2, 1), (3, 1), (3, 2)])
def test_divergence_rate(m, p):
    P = F.divergence(m, p)
    res = intersect(P.T1, P.T2, P.phi, EpsSchedule(0.5, 0.5, 6))
    assert res.verdict == DIVERGED
    assert res.slope == pytest.approx(-(m - p), abs=0.1)


def test_square_against_a_smooth_form_recovers_the_wedge():
    T = cube_chain([0, 0], [[1, 0], [0, 1]])
    omega = F.smooth_omega("omega-b")
    phi = F.classical_test_form(2)
    res = intersect(T, SmoothFormCurrent(omega), phi)
    oracle = wedge_smooth(T, omega).evaluate(phi)
    assert res.verdict == CONVERGED
    assert res.limit == pytest.approx(oracle, abs=1e-3)
    assert T.evaluate(wedge(omega, phi)) == pytest.approx(oracle, rel=1e-12)


def test_commutativity_examples():
    P = F.kronecker()
    assert commutativity_residual(P.T1, P.T2, P.phi, 0.05) < 0.02
    S = F.square_segment()
    assert commutativity_residual(S.T1, S.T2, S.phi, 0.05) < 0.02
    Z = zero_chain(2, 1)
    assert commutativity_residual(Z, P.T2, P.phi, 0.1) == 0.0


def test_commutativity_residual_decreases():
    S = F.square_segment()
    res = [commutativity_residual(S.T1, S.T2, S.phi, e) for e in EpsSchedule(0.5, 0.5, 6).values()]
    for a, b in zip(res, res[1:]):
        assert b <= 1.2 * a + 1e-12


PRODUCT_CASES = {
    "kronecker": lambda: F.kronecker(),
    "kronecker-weighted": lambda: F.kronecker(2.0),
    "square-segment": F.square_segment,
    "divergence-2-1": lambda: F.divergence(2, 1),
    "divergence-3-2": lambda: F.divergence(3, 2),
    "segment-omega": lambda: F.IntersectionProblem(segment([0, 0], [1, 1]), SmoothFormCurrent(F.smooth_omega("omega-a")),
                                                 F.classical_test_form(1)),
    "triangle-segment": lambda: F.IntersectionProblem(simplex_chain([[0, 0], [1, 0], [0, 1]]),
                                                    segment([-0.5, 0.3], [1.0, 0.2]),
                                                    form_from_terms(2, 1, [((1,), "cos(x2)*bump(2)"),
                                                                           ((2,), "x1*bump(2)")], support=2.0)),
}


@pytest.mark.parametrize("name", sorted(PRODUCT_CASES))
def test_product_route_agrees_with_composition(name):
    P = PRODUCT_CASES[name]()
    eps = 0.25
    a = i_eps(P.T1, P.T2, P.phi, eps, method="composition")
    b = i_eps(P.T1, P.T2, P.phi, eps, method="product")
    assert b == pytest.approx(a, rel=1e-5, abs=1e-7)


def test_limit_is_linear():
    P = F.square_segment()
    base = intersect(P.T1, P.T2, P.phi).limit
    doubled = intersect(P.T1, P.T2, P.phi.scale(2.0)).limit
    assert doubled == pytest.approx(2 * base, rel=0.02)
    other = segment([-1, -0.2], [1, -0.1])
    a = intersect(P.T1, other, P.phi).limit
    both = intersect(P.T1, P.T2 + other, P.phi).limit
    assert both == pytest.approx(base + a, rel=0.02)


def test_product_route_handles_a_non_compact_second_factor():
    P = F.kronecker()
    omega = SmoothFormCurrent(form_from_terms(2, 1, [((1,), "1")]))
    with pytest.raises(Exception):
        i_eps(omega, omega, form_from_terms(2, 0, [((), "1")]), 0.1)


def test_classify_synthetic_sequences():
    eps = EpsSchedule().values()
    conv = classify(eps, [2.0 + 0.3 * e * e for e in eps], 0.5)
    assert conv.verdict == CONVERGED and conv.extrapolated
    assert conv.limit == pytest.approx(2.0, abs=1e-12)
    div = classify(eps, [0.8 / e for e in eps], 0.5)
    assert div.verdict == DIVERGED and div.slope == pytest.approx(-1.0, abs=1e-12)
    osc = classify(eps, [(-1) ** k * 0.5 + 1 for k in range(len(eps))], 0.5)
    assert osc.verdict == INCONCLUSIVE and osc.limit is None
    slow = classify(eps, [1.0 + 0.2 * e for e in eps], 0.5)
    assert slow.verdict == CONVERGED and not slow.extrapolated
    assert slow.limit == pytest.approx(1.0 + 0.2 * eps[-1])


def test_loglog_slope():
    eps = [0.5, 0.25, 0.125, 0.0625]
    s, r = loglog_slope(eps, [3 * e ** -2 for e in eps])
    assert s == pytest.approx(-2.0) and r == pytest.approx(0.0, abs=1e-12)


def test_schedule_validation():
    assert EpsSchedule(1.0, 0.5, 4).values() == [1.0, 0.5, 0.25, 0.125]
    for bad in ((0.0, 0.5, 8), (0.5, 1.0, 8), (0.5, 0.5, 2)):
        with pytest.raises(ValueError):
            EpsSchedule(*bad)


def test_degree_checks():
    P = F.kronecker()
    with pytest.raises(ValueError):
        i_eps(P.T1, P.T2, DifferentialForm.constant(2, (1,)), 0.1)
    with pytest.raises(ValueError):
        i_eps(P.T1, P.T2, P.phi, -0.1)


def test_threads_do_not_change_results():
    P = F.square_segment()
    a = intersect(P.T1, P.T2, P.phi, EpsSchedule(0.5, 0.5, 5))
    b = intersect(P.T1, P.T2, P.phi, EpsSchedule(0.5, 0.5, 5), threads=4)
    assert a.values == b.values


def test_wide_kernel_gives_the_same_kronecker_limit():
    P = F.kronecker()
    res = intersect(P.T1, P.T2, P.phi, kernel=Kernel(2, "bump-product-wide"))
    assert res.verdict == CONVERGED and res.limit == pytest.approx(1.0, abs=0.01)
