"""Hypothesis strategies for random polynomial forms."""

from hypothesis import strategies as st

from currentlab.forms import form_from_terms, multiindices

coef = st.integers(-3, 3).filter(lambda c: c != 0)


@st.composite
def monomial(draw, m: int) -> str:
    c = draw(coef)
    powers = [draw(st.integers(0, 2)) for _ in range(m)]
    factors = [f"x{i + 1}^{p}" for i, p in enumerate(powers) if p]
    return "*".join([str(c)] + factors)


@st.composite
def polynomial(draw, m: int) -> str:
    return " + ".join(draw(st.lists(monomial(m), min_size=1, max_size=3)))


@st.composite
def poly_form(draw, m: int, degree: int):
    idx = multiindices(m, degree)
    chosen = draw(st.lists(st.sampled_from(idx), min_size=1, max_size=len(idx), unique=True))
    return form_from_terms(m, degree, [(I, draw(polynomial(m))) for I in chosen])
