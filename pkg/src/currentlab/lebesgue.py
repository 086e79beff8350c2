"""Densities of currents projected to coordinate planes.

For a current T of degree p on R^m, a cutoff xi and a coordinate plane V of
dimension m - p, the pushforward pi_*(xi T) is a top-degree current on V.
Its density at a point a is estimated from the ball ratios
pi_*(xi T)(B_r) / vol(B_r) as r -> 0, the polar function from densities
along a ray a + lambda x, and atoms from the growth rate of r -> mass(B_r).

Balls are smoothed indicators (a C-infinity shoulder of width r/8) because
currents only pair with smooth forms; ratios are normalised by the exact
integral of the smoothed indicator, which removes the shoulder bias to first
order.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np
from scipy.integrate import quad

from . import expr as E
from .currents import Current, DegreeMismatch, WedgeSmoothCurrent
from .forms import AffineMap, DifferentialForm, DimensionMismatch, pullback
from .parser import ScalarField
from .polytope import Halfspaces
from .quadrature import QuadratureConfig

__all__ = [
    "Plane", "DensityEstimate", "PolarEstimate", "AtomVerdict", "default_cutoff", "pushforward_eval",
    "density", "polar", "atom_diagnostic", "density_profile", "ball_indicator", "cauchy_converged",
    "AC_CONSISTENT", "ATOM_DETECTED", "INCONCLUSIVE", "LEBESGUE_QUADRATURE",
]

AC_CONSISTENT, ATOM_DETECTED, INCONCLUSIVE = "AC_CONSISTENT", "ATOM_DETECTED", "INCONCLUSIVE"

LEBESGUE_QUADRATURE = QuadratureConfig(n=16, tol=1e-12, rtol=1e-8, max_cells=1024)

SHOULDER = 1.0 / 8.0
MASS_FLOOR = 1e-10


@dataclass(frozen=True)
class Plane:
    """Coordinate plane spanned by the retained (1-based, increasing) axes."""

    coords: tuple[int, ...]
    m: int

    def __post_init__(self):
        c = tuple(int(i) for i in self.coords)
        if any(i < 1 or i > self.m for i in c):
            raise ValueError(f"plane coordinates must lie in 1..{self.m}")
        if list(c) != sorted(set(c)):
            raise ValueError("plane coordinates must be strictly increasing")
        object.__setattr__(self, "coords", c)

    @property
    def dim(self) -> int:
        return len(self.coords)

    def projection(self) -> AffineMap:
        P = np.zeros((self.dim, self.m))
        for r, i in enumerate(self.coords):
            P[r, i - 1] = 1.0
        return AffineMap(P, np.zeros(self.dim))


@dataclass
class DensityEstimate:
    anchor: list[float]
    radii: list[float]
    ratios: list[float]
    value: float | None
    converged: bool
    cutoff: str

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class PolarEstimate:
    anchor: list[float]
    direction: list[float]
    lambdas: list[float]
    values: list[float]
    limit: float | None
    converged: bool

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class AtomVerdict:
    verdict: str
    exponent: float | None
    radii: list[float]
    masses: list[float]
    fit_residual: float | None = None

    def to_dict(self) -> dict:
        return asdict(self)


def cauchy_converged(a: float, b: float) -> bool:
    return abs(a - b) < max(1e-3, 0.01 * abs(b))


def _check_radii(radii: Sequence[float]) -> list[float]:
    r = [float(x) for x in radii]
    if not r or any(x <= 0 for x in r):
        raise ValueError("radii must be positive")
    if any(b >= a for a, b in zip(r, r[1:])):
        raise ValueError("radii must be strictly decreasing")
    return r


# ---------------------------------------------------------------- cutoffs


def default_cutoff(T: Current, margin: float = 0.5) -> DifferentialForm:
    """Smooth cutoff equal to 1 on the support box of T inflated by margin, 0 beyond 2*margin."""
    box = T.support_box()
    if box is None:
        raise ValueError("a cutoff must be supplied for currents without compact support")
    lo, hi = box[0] - margin, box[1] + margin
    factors = []
    for k in range(T.m):
        x = E.Var(k)
        left = E.div(E.add(x, E.Const(-(lo[k] - margin))), E.Const(margin))
        right = E.div(E.add(E.Const(hi[k] + margin), E.neg(x)), E.Const(margin))
        factors += [E.smooth_step(left), E.smooth_step(right)]
    return DifferentialForm.scalar(T.m, E.mul(*factors), Halfspaces.box(lo - margin, hi + margin))


def _as_cutoff(T: Current, xi) -> tuple[DifferentialForm, str]:
    if xi is None:
        return default_cutoff(T), "default: 1 on support box + 0.5"
    if isinstance(xi, ScalarField):
        if xi.m != T.m:
            raise DimensionMismatch("cutoff and current live on different spaces")
        if xi.support_radius is None:
            raise ValueError("the cutoff must be compactly supported")
        R = xi.support_radius
        return DifferentialForm.scalar(T.m, xi.masked, Halfspaces.box([-R] * T.m, [R] * T.m)), xi.text
    if isinstance(xi, DifferentialForm):
        if xi.degree != 0 or xi.m != T.m:
            raise DimensionMismatch("cutoff must be a 0-form on the ambient space")
        if xi.support is None:
            raise ValueError("the cutoff must be compactly supported")
        return xi, str(xi)
    raise TypeError("cutoff must be a ScalarField, a 0-form or None")


def _check_plane(T: Current, plane: Plane):
    if plane.m != T.m:
        raise DimensionMismatch("plane and current live on different spaces")
    if plane.dim != T.dim:
        raise DegreeMismatch(f"plane must have dimension {T.dim} = m - deg T, got {plane.dim}")


# ---------------------------------------------------------------- pushforward


def pushforward_eval(T: Current, xi, plane: Plane, phi: DifferentialForm,
                     q: QuadratureConfig | None = None) -> float:
    """(pi_*(xi T))(phi) = (xi T)(pi^* phi) for a top-degree form phi on the plane."""
    _check_plane(T, plane)
    if phi.m != plane.dim or phi.degree != plane.dim:
        raise DegreeMismatch(f"phi must be a {plane.dim}-form on the {plane.dim}-dimensional plane")
    cutoff, _ = _as_cutoff(T, xi)
    q = q or LEBESGUE_QUADRATURE
    lifted = pullback(plane.projection(), phi)
    return WedgeSmoothCurrent(T, cutoff).evaluate(lifted, q)


def ball_indicator(center: Sequence[float], r: float) -> tuple[DifferentialForm, float]:
    """Smoothed indicator of B_r(center) as a top form on R^k, and its exact integral."""
    a = np.asarray(center, dtype=float)
    k = a.size
    r_in, r_out = r * (1 - SHOULDER / 2), r * (1 + SHOULDER / 2)
    rr = E.add(*[E.power(E.add(E.Var(i), E.Const(-a[i])), E.Const(2.0)) for i in range(k)])
    t = E.div(E.add(E.Const(r_out ** 2), E.neg(rr)), E.Const(r_out ** 2 - r_in ** 2))
    chi = E.smooth_step(t)
    form = DifferentialForm(k, k, {tuple(range(1, k + 1)): chi}, Halfspaces.box(a - r_out, a + r_out))
    return form, _indicator_integral(k, r_in, r_out)


def _indicator_integral(k: int, r_in: float, r_out: float) -> float:
    sphere = 2 * math.pi ** (k / 2) / math.gamma(k / 2)
    step = lambda s: float(E.flat_value(s) / (E.flat_value(s) + E.flat_value(1 - s)))
    shoulder, _ = quad(lambda rho: step((r_out ** 2 - rho ** 2) / (r_out ** 2 - r_in ** 2)) * rho ** (k - 1),
                       r_in, r_out, epsabs=1e-15, epsrel=1e-13)
    return sphere * (r_in ** k / k + shoulder)


def _ball_mass(T: Current, cutoff: DifferentialForm, plane: Plane, a, r: float,
               q: QuadratureConfig) -> tuple[float, float]:
    chi, vol = ball_indicator(a, r)
    lifted = pullback(plane.projection(), chi)
    return WedgeSmoothCurrent(T, cutoff).evaluate(lifted, q), vol


# ---------------------------------------------------------------- estimators


DEFAULT_RADII = tuple(0.2 * 0.5 ** k for k in range(6))
DEFAULT_LAMBDAS = tuple(0.4 * 0.5 ** k for k in range(5))
ATOM_RADII = tuple(0.1 * 0.5 ** k for k in range(6))


def density(T: Current, xi, plane: Plane, a: Sequence[float], radii: Sequence[float] = DEFAULT_RADII,
            q: QuadratureConfig | None = None) -> DensityEstimate:
    """Ball-ratio estimate of the density of pi_*(xi T) at a."""
    _check_plane(T, plane)
    radii = _check_radii(radii)
    a = np.asarray(a, dtype=float).reshape(-1)
    if a.size != plane.dim:
        raise DimensionMismatch(f"anchor must have {plane.dim} coordinates")
    cutoff, label = _as_cutoff(T, xi)
    q = q or LEBESGUE_QUADRATURE
    ratios = []
    for r in radii:
        mass, vol = _ball_mass(T, cutoff, plane, a, r, q)
        ratios.append(mass / vol)
    conv = len(ratios) >= 2 and cauchy_converged(ratios[-2], ratios[-1])
    return DensityEstimate(a.tolist(), radii, ratios, ratios[-1] if conv else None, conv, label)


def density_profile(T: Current, xi, plane: Plane, anchors, radii: Sequence[float] = DEFAULT_RADII,
                    q: QuadratureConfig | None = None, threads: int = 1) -> list[DensityEstimate]:
    """Densities at several anchors; independent, so optionally threaded. Order follows anchors."""
    run = lambda a: density(T, xi, plane, a, radii, q)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(run, anchors))
    return [run(a) for a in anchors]


def polar(T: Current, xi, plane: Plane, a: Sequence[float], x: Sequence[float],
          lambdas: Sequence[float] = DEFAULT_LAMBDAS, radii: Sequence[float] | None = None,
          q: QuadratureConfig | None = None, threads: int = 1) -> PolarEstimate:
    """Densities along lambda -> a + lambda x.

    Unless radii are given, the balls at a + lambda x have radii
    lambda |x| (1/2, 1/4, 1/8) so they never reach back to a.
    """
    lambdas = _check_radii(lambdas)
    a = np.asarray(a, dtype=float).reshape(-1)
    x = np.asarray(x, dtype=float).reshape(-1)
    if a.shape != x.shape:
        raise DimensionMismatch("anchor and direction must have the same length")
    norm = float(np.linalg.norm(x))
    if norm == 0.0:
        raise ValueError("direction must be nonzero")
    points = [a + lam * x for lam in lambdas]
    radii_of = (lambda lam: radii) if radii is not None else \
        (lambda lam: [lam * norm * 0.5 ** k for k in range(1, 4)])

    def run(i):
        est = density(T, xi, plane, points[i], radii_of(lambdas[i]), q)
        return est.ratios[-1]

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            values = list(pool.map(run, range(len(lambdas))))
    else:
        values = [run(i) for i in range(len(lambdas))]
    conv = len(values) >= 2 and cauchy_converged(values[-2], values[-1])
    return PolarEstimate(a.tolist(), x.tolist(), lambdas, values, values[-1] if conv else None, conv)


def atom_diagnostic(T: Current, xi, plane: Plane, a: Sequence[float], radii: Sequence[float] = ATOM_RADII,
                    q: QuadratureConfig | None = None) -> AtomVerdict:
    """Fit log |mass(B_r)| against log r.

    An exponent below dim - 0.5 means the mass does not vanish like the
    volume (an atom). A vanishing mass at the smallest radius puts a outside
    the projected support at that scale, which counts as absolutely continuous.
    """
    _check_plane(T, plane)
    radii = _check_radii(radii)
    if len(radii) < 3:
        raise ValueError("the growth fit needs at least 3 radii")
    a = np.asarray(a, dtype=float).reshape(-1)
    cutoff, _ = _as_cutoff(T, xi)
    q = q or LEBESGUE_QUADRATURE
    masses = [_ball_mass(T, cutoff, plane, a, r, q)[0] for r in radii]
    mags = np.abs(masses)
    if mags[-1] <= MASS_FLOOR:
        return AtomVerdict(AC_CONSISTENT, None, radii, masses)
    ok = mags > MASS_FLOOR
    if ok.sum() < 3:
        return AtomVerdict(INCONCLUSIVE, None, radii, masses)
    lx, ly = np.log(np.asarray(radii)[ok]), np.log(mags[ok])
    A = np.vstack([lx, np.ones_like(lx)]).T
    coef, *_ = np.linalg.lstsq(A, ly, rcond=None)
    resid = float(np.sqrt(np.mean((ly - A @ coef) ** 2)))
    slope = float(coef[0])
    if slope < plane.dim - 0.5:
        verdict = ATOM_DETECTED
    else:
        verdict = AC_CONSISTENT
    return AtomVerdict(verdict, slope, radii, masses, resid)
