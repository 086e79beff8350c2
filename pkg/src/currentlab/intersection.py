"""Regularised intersection I_eps = int_{T1} r_eps T2 ^ phi and its eps -> 0 limit.

Two independent evaluation routes are provided:

* composition: evaluate T1 on the wedge of the smooth form r_eps T2 (fiber
  integrals over T2) with phi;
* product: evaluate T1 x T2 on f_eps(x - y) ^_k (dx_k - dy_k) ^ phi(x) over
  R^{2m}, with the sign (-1)^{j (i + j - m + 1)} that makes both routes agree
  (i, j are the dimensions of T1, T2).
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from . import expr as E
from .currents import Current, DegreeMismatch, NonCompactPairing, ProductCurrent
from .forms import DifferentialForm, DimensionMismatch, FormLike, WedgeForm, complement, perm_sign, wedge
from .mollifier import Kernel, MollifiedForm
from .polytope import Halfspaces
from .quadrature import QuadratureConfig

__all__ = [
    "EpsSchedule", "IntersectionResult", "INTERSECTION_QUADRATURE", "i_eps", "intersect",
    "commutativity_residual", "classify", "loglog_slope", "product_route_sign",
]

# Intersections only need 1e-3..1e-2 accuracy; the composition route nests a
# fixed-order fiber rule inside the adaptive outer rule, so refining the outer
# rule far below the inner rule's accuracy only chases noise.
INTERSECTION_QUADRATURE = QuadratureConfig(n=16, tol=1e-9, rtol=1e-6, max_cells=256)

CONVERGED, DIVERGED, INCONCLUSIVE = "CONVERGED", "DIVERGED", "INCONCLUSIVE"


@dataclass(frozen=True)
class EpsSchedule:
    eps0: float = 0.5
    rho: float = 0.5
    levels: int = 8

    def __post_init__(self):
        if not self.eps0 > 0:
            raise ValueError("eps0 must be positive")
        if not 0 < self.rho < 1:
            raise ValueError("rho must lie in (0, 1)")
        if self.levels < 4:
            raise ValueError("at least 4 levels are needed")

    def values(self) -> list[float]:
        return [self.eps0 * self.rho ** k for k in range(self.levels)]


@dataclass
class IntersectionResult:
    eps: list[float]
    values: list[float]
    verdict: str
    limit: float | None = None
    error: float | None = None
    raw_final: float | None = None
    extrapolated: bool = False
    slope: float | None = None
    fit_residual: float | None = None
    method: str = "composition"
    diffs: list[float] = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)


def _dims(T1: Current, T2: Current, phi: FormLike) -> tuple[int, int]:
    if not (T1.m == T2.m == phi.m):
        raise DimensionMismatch("currents and test form must live on the same R^m")
    i, j, m = T1.dim, T2.dim, T1.m
    if i + j < m:
        raise DegreeMismatch(f"dimensions {i} + {j} < {m}: the intersection is empty")
    if phi.degree != i + j - m:
        raise DegreeMismatch(f"test form must have degree {i + j - m}, got {phi.degree}")
    return i, j


def product_route_sign(i: int, j: int, m: int) -> int:
    return -1 if (j * (i + j - m + 1)) % 2 else 1


def _product_test_form(phi: DifferentialForm, j: int, eps: float, kernel: Kernel) -> DifferentialForm:
    m = phi.m
    z = [E.add(E.Var(k), E.neg(E.Var(m + k))) for k in range(m)]
    coef = kernel.expression(z, eps)
    terms = {}
    # only the dx_K ^ dy_{K^c} with |K^c| = j pair with T1 x T2
    from itertools import combinations
    for K in combinations(range(1, m + 1), m - j):
        Kc = complement(K, m)
        s = (-1) ** (m - len(K)) * perm_sign(K, Kc)
        terms[K + tuple(k + m for k in Kc)] = coef if s > 0 else E.neg(coef)
    theta = DifferentialForm(2 * m, m, terms)
    lifted = DifferentialForm(2 * m, phi.degree, dict(phi.terms))
    H = np.hstack([np.eye(m), -np.eye(m)])
    support = Halfspaces(np.vstack([H, -H]), np.full(2 * m, eps))
    if phi.support is not None:
        support = support.intersect(Halfspaces(np.hstack([phi.support.H, np.zeros_like(phi.support.H)]),
                                               phi.support.h))
    return wedge(theta, lifted).with_support(support)


def i_eps(T1: Current, T2: Current, phi: FormLike, eps: float, q: QuadratureConfig | None = None,
          kernel: Kernel | None = None, method: str = "composition") -> float:
    """int_{T1} r_eps T2 ^ phi."""
    if not eps > 0:
        raise ValueError("eps must be positive")
    q = q or INTERSECTION_QUADRATURE
    i, j = _dims(T1, T2, phi)
    if not T1.compact and not T2.compact:
        raise NonCompactPairing("both currents have non-compact support")
    kernel = kernel or Kernel(T1.m)
    if method == "composition" and not T2.compact:
        method = "product"
    if method == "composition":
        rho = MollifiedForm(T2, eps, kernel, q)
        return T1.evaluate(WedgeForm(rho, phi), q)
    if method == "product":
        if not isinstance(phi, DifferentialForm):
            raise TypeError("the product route needs a symbolic test form")
        s = product_route_sign(i, j, T1.m)
        return s * ProductCurrent(T1, T2).evaluate(_product_test_form(phi, j, eps, kernel), q)
    raise ValueError(f"unknown method {method!r}")


def loglog_slope(eps, values) -> tuple[float, float]:
    """Least-squares slope of log|I| against log eps and the RMS residual."""
    e = np.asarray(eps, dtype=float)
    v = np.abs(np.asarray(values, dtype=float))
    ok = v > 0
    if ok.sum() < 3:
        return float("nan"), float("inf")
    x, y = np.log(e[ok]), np.log(v[ok])
    A = np.vstack([x, np.ones_like(x)]).T
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - A @ coef
    return float(coef[0]), float(np.sqrt(np.mean(resid ** 2)))


def classify(eps, values, rho: float, noise: float = 0.2) -> IntersectionResult:
    """Verdict per the convergence / divergence rules documented in the README."""
    eps = [float(e) for e in eps]
    values = [float(v) for v in values]
    diffs = [values[k + 1] - values[k] for k in range(len(values) - 1)]
    slope, resid = loglog_slope(eps, values)
    res = IntersectionResult(eps, values, INCONCLUSIVE, raw_final=values[-1], slope=slope,
                             fit_residual=resid, diffs=diffs)
    if math.isfinite(slope) and slope < -0.5 and resid < 0.1:
        res.verdict = DIVERGED
        return res
    last = values[-1]
    ad = [abs(d) for d in diffs[-3:]]
    floor = 1e-12 * max(1.0, abs(last))
    monotone = all(ad[k + 1] <= ad[k] * (1 + noise) + floor for k in range(len(ad) - 1))
    small = ad[-1] < max(1e-3, 0.01 * abs(last))
    if monotone and small:
        res.verdict = CONVERGED
        r2 = rho * rho
        ratio = diffs[-1] / diffs[-2] if diffs[-2] != 0 else float("nan")
        if math.isfinite(ratio) and abs(ratio - r2) <= 0.3 * r2:
            tail = diffs[-1] * r2 / (1 - r2)
            res.limit = last + tail
            res.error = abs(tail)
            res.extrapolated = True
        else:
            res.limit = last
            res.error = ad[-1]
    return res


def intersect(T1: Current, T2: Current, phi: FormLike, schedule: EpsSchedule = EpsSchedule(),
              q: QuadratureConfig | None = None, kernel: Kernel | None = None, threads: int = 1,
              method: str = "composition") -> IntersectionResult:
    """Run i_eps along the schedule (levels in parallel) and classify the sequence."""
    q = q or INTERSECTION_QUADRATURE
    _dims(T1, T2, phi)
    kernel = kernel or Kernel(T1.m)
    eps = schedule.values()
    run = lambda e: i_eps(T1, T2, phi, e, q, kernel, method)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            values = list(pool.map(run, eps))
    else:
        values = [run(e) for e in eps]
    res = classify(eps, values, schedule.rho)
    res.method = method
    return res


def commutativity_residual(T1: Current, T2: Current, phi: FormLike, eps: float,
                           q: QuadratureConfig | None = None, kernel: Kernel | None = None,
                           method: str = "composition") -> float:
    """|I_eps(T1, T2) - (-1)^{ij} I_eps(T2, T1)|."""
    i, j = _dims(T1, T2, phi)
    a = i_eps(T1, T2, phi, eps, q, kernel, method)
    b = i_eps(T2, T1, phi, eps, q, kernel, method)
    return abs(a - (-1) ** (i * j) * b)
