"""Currents on R^m and their evaluation on test forms.

A current of degree p has dimension m - p and pairs with (m - p)-forms.
Integrable currents (chains, smooth forms, Dirac masses and anything built
from them by sums, products and wedges with smooth forms) expose *pieces*:
a convex parameter domain, an affine map into R^m and weight functions
W_L so that

    T(phi) = sum over pieces of  int_base  sum_L W_L(u) phi_L(A u) du.

Evaluation clips every base to the support of the test form before
integrating, so thin supports are resolved by construction.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, replace
from typing import Callable, Sequence

import numpy as np

from . import expr as E
from .forms import (AffineMap, DifferentialForm, DimensionMismatch, FormLike, WedgeForm, accuracy_floor,
                    complement, multiindices, perm_sign, sort_sign, wedge)
from .polytope import Halfspaces, NonCompactError, Region, decompose
from .quadrature import QuadratureConfig, integrate_region

__all__ = [
    "Piece", "Cell", "Current", "PolyChain", "SmoothFormCurrent", "Dirac", "SumCurrent",
    "ProductCurrent", "WedgeSmoothCurrent", "BoundaryCurrent", "DegreeMismatch",
    "NonCompactPairing", "DiracDomainError", "evaluate", "boundary", "wedge_smooth", "product",
    "segment", "simplex_chain", "cube_chain", "zero_chain", "DEFAULT_QUADRATURE",
]

DEFAULT_QUADRATURE = QuadratureConfig()

Weights = Callable[[np.ndarray, np.ndarray], dict]


class DegreeMismatch(ValueError):
    """Test form degree does not match the dimension of the current."""


class NonCompactPairing(NonCompactError):
    """Neither the current nor the test form has compact support."""


class DiracDomainError(ValueError):
    """A Dirac mass sits where the test form cannot be evaluated."""


@dataclass(frozen=True, eq=False)
class Piece:
    """``constant`` repeats the weight table when it does not depend on u;
    ``rtol_floor`` is the relative accuracy of numerically computed weights."""

    base: Halfspaces
    amap: AffineMap
    weights: Weights
    hint: np.ndarray | None = None
    constant: dict | None = None
    rtol_floor: float = 0.0
    knots: tuple | None = None

    @property
    def dim(self) -> int:
        return self.base.dim


def _const_weights(table: dict) -> Weights:
    table = {k: float(v) for k, v in table.items() if v != 0.0}

    def weights(U, X):
        return {k: np.full(len(U), v) for k, v in table.items()}

    return weights


def _scaled(piece: Piece, c: float) -> Piece:
    w = piece.weights
    const = None if piece.constant is None else {k: c * v for k, v in piece.constant.items()}
    return replace(piece, weights=lambda U, X: {k: c * v for k, v in w(U, X).items()}, constant=const)


def _split_at_knots(region: Region, knots) -> Region:
    """Cut a box into the tensor grid of sub-boxes given by per-axis knots."""
    lo, hi = region.data
    edges = []
    for k, (a, b) in enumerate(zip(lo, hi)):
        inner = [t for t in knots[k] if a < t < b]
        edges.append(np.unique([a, *inner, b]))
    los = np.array(list(itertools.product(*[e[:-1] for e in edges])), dtype=float)
    his = np.array(list(itertools.product(*[e[1:] for e in edges])), dtype=float)
    return Region("box", region.dim, (los, his))


def integrate_piece(piece: Piece, phi: FormLike, q: QuadratureConfig) -> float:
    floor = max(piece.rtol_floor, accuracy_floor(phi))
    if floor > q.rtol:
        q = replace(q, rtol=floor)
    base = piece.base
    if phi.support is not None:
        base = base.intersect(phi.support.pullback(piece.amap.matrix, piece.amap.translation))
    region = decompose(base, piece.hint)
    if piece.knots is not None and region.kind == "box":
        region = _split_at_knots(region, piece.knots)

    def integrand(U):
        X = piece.amap(U)
        W = piece.weights(U, X)
        if not W:
            return np.zeros(len(U))
        C = phi.coefficients(X, W.keys())
        total = np.zeros(len(U))
        for L, w in W.items():
            if L in C:
                total += w * C[L]
        return total

    return integrate_region(region, integrand, q)


class Current:
    """Base class; subclasses set ``m`` and ``degree``."""

    m: int
    degree: int

    @property
    def dim(self) -> int:
        return self.m - self.degree

    @property
    def compact(self) -> bool:
        return self.support_box() is not None

    def support_box(self) -> tuple[np.ndarray, np.ndarray] | None:
        return None

    def pieces(self) -> list[Piece] | None:
        return None

    def evaluate(self, phi: FormLike, q: QuadratureConfig | None = None) -> float:
        q = q or DEFAULT_QUADRATURE
        if phi.m != self.m:
            raise DimensionMismatch(f"test form lives on R^{phi.m}, current on R^{self.m}")
        if phi.degree != self.dim:
            raise DegreeMismatch(
                f"current of degree {self.degree} on R^{self.m} needs a {self.dim}-form, got degree {phi.degree}")
        if phi.support is None and not self.compact:
            raise NonCompactPairing("pairing a non-compact current with a non-compact test form")
        return self._evaluate(phi, q)

    def _evaluate(self, phi: FormLike, q: QuadratureConfig) -> float:
        pieces = self.pieces()
        if pieces is None:
            raise NotImplementedError(f"{type(self).__name__} cannot be integrated directly")
        return float(sum(integrate_piece(p, phi, q) for p in pieces))

    def boundary(self) -> "Current":
        if self.dim <= 0:
            return zero_chain(self.m, -1)
        return BoundaryCurrent(self)

    # linear structure
    def __add__(self, other: "Current") -> "Current":
        return SumCurrent([(1.0, self), (1.0, other)])

    def __sub__(self, other: "Current") -> "Current":
        return SumCurrent([(1.0, self), (-1.0, other)])

    def __rmul__(self, c: float) -> "Current":
        return SumCurrent([(float(c), self)])

    def __neg__(self) -> "Current":
        return SumCurrent([(-1.0, self)])


# ---------------------------------------------------------------- chains


@dataclass(frozen=True, eq=False)
class Cell:
    """Affine image of the standard d-simplex or the unit d-cube."""

    kind: str
    amap: AffineMap
    orientation: int = 1

    def __post_init__(self):
        if self.kind not in ("simplex", "cube"):
            raise ValueError(f"unknown cell kind {self.kind!r}")
        if self.orientation not in (1, -1):
            raise ValueError("orientation must be +1 or -1")
        M = self.amap.matrix
        if M.shape[1] > M.shape[0]:
            raise ValueError("cell dimension exceeds ambient dimension")
        if M.shape[1]:
            sv = np.linalg.svd(M, compute_uv=False)
            if sv[-1] <= 1e-12 * sv[0]:
                raise ValueError("degenerate cell: parametrization does not have full rank")

    @property
    def dim(self) -> int:
        return self.amap.n_in

    @classmethod
    def simplex(cls, vertices: Sequence[Sequence[float]], orientation: int = 1) -> "Cell":
        V = np.atleast_2d(np.asarray(vertices, dtype=float))
        return cls("simplex", AffineMap((V[1:] - V[0]).T.reshape(V.shape[1], V.shape[0] - 1), V[0]), orientation)

    @classmethod
    def cube(cls, origin: Sequence[float], edges: Sequence[Sequence[float]], orientation: int = 1) -> "Cell":
        o = np.asarray(origin, dtype=float)
        E_ = np.asarray(edges, dtype=float).reshape(len(edges), o.size)
        return cls("cube", AffineMap(E_.T, o), orientation)

    def vertices(self) -> np.ndarray:
        d = self.dim
        if self.kind == "simplex":
            U = np.vstack([np.zeros(d), np.eye(d)]) if d else np.zeros((1, 0))
        else:
            U = np.array(list(itertools.product([0.0, 1.0], repeat=d)), dtype=float).reshape(2 ** d, d)
        return self.amap(U)

    def base(self) -> Halfspaces:
        d = self.dim
        if self.kind == "simplex":
            return Halfspaces.standard_simplex(d) if d else Halfspaces.whole(0)
        return Halfspaces.box(np.zeros(d), np.ones(d))

    def hint(self) -> np.ndarray | None:
        if self.dim != 2:
            return None
        if self.kind == "simplex":
            return np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
        return np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])

    def faces(self) -> list[tuple[int, "Cell"]]:
        """Oriented codimension-one faces as (sign, cell)."""
        d = self.dim
        if d == 0:
            return []
        M, c = self.amap.matrix, self.amap.translation
        out = []
        if self.kind == "simplex":
            V = self.vertices()
            for i in range(d + 1):
                rest = np.delete(V, i, axis=0)
                out.append(((-1) ** i, Cell.simplex(rest, self.orientation)))
        else:
            for i in range(d):
                others = [j for j in range(d) if j != i]
                for a in (0, 1):
                    origin = c + a * M[:, i]
                    face = Cell("cube", AffineMap(M[:, others], origin), self.orientation)
                    out.append(((-1) ** (i + 1 + a), face))
        return out


class PolyChain(Current):
    """Finite weighted sum of oriented affine cells of one dimension."""

    def __init__(self, cells: Sequence[tuple[float, Cell]], m: int | None = None, dim: int | None = None):
        cells = [(float(w), c) for w, c in cells]
        if cells:
            m0, d0 = cells[0][1].amap.n_out, cells[0][1].dim
            if any(c.amap.n_out != m0 or c.dim != d0 for _, c in cells):
                raise DimensionMismatch("all cells of a chain must share ambient and cell dimension")
            if m is not None and m != m0 or dim is not None and dim != d0:
                raise DimensionMismatch("declared dimensions disagree with the cells")
            m, dim = m0, d0
        elif m is None or dim is None:
            raise ValueError("an empty chain needs explicit m and dim")
        self.cells = cells
        self.m = m
        self.degree = m - dim

    def support_box(self):
        if not self.cells:
            return np.zeros(self.m), np.zeros(self.m)
        V = np.vstack([c.vertices() for _, c in self.cells])
        return V.min(axis=0), V.max(axis=0)

    def pieces(self):
        out = []
        d = self.dim
        for w, cell in self.cells:
            M = cell.amap.matrix
            table = {}
            for L in multiindices(self.m, d):
                det = np.linalg.det(M[[i - 1 for i in L], :]) if d else 1.0
                if abs(det) > 1e-300:
                    table[L] = w * cell.orientation * det
            out.append(Piece(cell.base(), cell.amap, _const_weights(table), cell.hint(), constant=table))
        return out

    def boundary(self) -> "PolyChain":
        if self.dim <= 0:
            return zero_chain(self.m, self.dim - 1)
        faces = []
        for w, cell in self.cells:
            faces.extend((w * s, f) for s, f in cell.faces())
        return PolyChain(faces, self.m, self.dim - 1)

    def _evaluate(self, phi, q):
        if not self.cells:
            return 0.0
        return super()._evaluate(phi, q)


def zero_chain(m: int, dim: int) -> PolyChain:
    return PolyChain([], m, dim)


def segment(a: Sequence[float], b: Sequence[float], weight: float = 1.0) -> PolyChain:
    return PolyChain([(weight, Cell.simplex([a, b]))])


def simplex_chain(vertices: Sequence[Sequence[float]], weight: float = 1.0) -> PolyChain:
    return PolyChain([(weight, Cell.simplex(vertices))])


def cube_chain(origin: Sequence[float], edges: Sequence[Sequence[float]], weight: float = 1.0) -> PolyChain:
    return PolyChain([(weight, Cell.cube(origin, edges))])


# ---------------------------------------------------------------- smooth forms and Dirac masses


class SmoothFormCurrent(Current):
    """T(phi) = int_{R^m} omega ^ phi."""

    def __init__(self, omega: FormLike):
        self.omega = omega
        self.m = omega.m
        self.degree = omega.degree

    def support_box(self):
        s = self.omega.support
        if s is None:
            return None
        try:
            return s.bounding_box()
        except NonCompactError:
            return None

    def pieces(self):
        m, k = self.m, self.degree
        omega = self.omega
        table = {L: (complement(L, m), perm_sign(complement(L, m), L)) for L in multiindices(m, m - k)}

        def weights(U, X):
            C = omega.coefficients(X, [K for K, _ in table.values()])
            return {L: s * C[K] for L, (K, s) in table.items() if K in C}

        base = omega.support if omega.support is not None else Halfspaces.whole(m)
        hint = None
        if m == 2 and omega.support is not None:
            bb = omega.support.box_bounds()
            if bb is not None and np.all(np.isfinite(bb[0])) and np.all(np.isfinite(bb[1])):
                (x0, y0), (x1, y1) = bb
                hint = np.array([[x0, y0], [x1, y0], [x1, y1], [x0, y1]])
        return [Piece(base, AffineMap.identity(m), weights, hint, rtol_floor=accuracy_floor(omega),
                      knots=getattr(omega, "knots", None))]


class Dirac(Current):
    """weight * delta_point dx_I: pairs with the coefficient of dx_{I^c}."""

    def __init__(self, point: Sequence[float], covector: Sequence[int] = (), weight: float = 1.0):
        self.point = np.asarray(point, dtype=float).reshape(-1)
        self.m = self.point.size
        sign, idx = sort_sign(covector)
        if sign == 0 and len(covector):
            raise ValueError("covector has repeated indices")
        if any(i < 1 or i > self.m for i in idx):
            raise ValueError(f"covector index out of range 1..{self.m}")
        self.covector = tuple(covector)
        self.weight = float(weight)
        self.degree = len(idx)
        self._index = idx
        self._sign = sign if len(covector) else 1

    def support_box(self):
        return self.point.copy(), self.point.copy()

    def pieces(self):
        L = complement(self._index, self.m)
        w = self.weight * self._sign * perm_sign(self._index, L)
        return [Piece(Halfspaces.whole(0), AffineMap(np.zeros((self.m, 0)), self.point), _const_weights({L: w}),
                      constant={L: w})]

    def _evaluate(self, phi, q):
        try:
            return super()._evaluate(phi, q)
        except E.EvaluationError as exc:
            raise DiracDomainError(f"test form undefined at Dirac point {self.point.tolist()}: {exc}") from exc


# ---------------------------------------------------------------- constructions


class SumCurrent(Current):
    def __init__(self, parts: Sequence[tuple[float, Current]]):
        parts = [(float(c), T) for c, T in parts]
        if not parts:
            raise ValueError("empty sum; use zero_chain")
        m, deg = parts[0][1].m, parts[0][1].degree
        if any((T.m, T.degree) != (m, deg) for _, T in parts):
            raise DimensionMismatch("summands differ in dimension or degree")
        self.parts = parts
        self.m, self.degree = m, deg

    def support_box(self):
        boxes = [T.support_box() for _, T in self.parts]
        if any(b is None for b in boxes):
            return None
        return np.min([b[0] for b in boxes], axis=0), np.max([b[1] for b in boxes], axis=0)

    def pieces(self):
        out = []
        for c, T in self.parts:
            ps = T.pieces()
            if ps is None:
                return None
            out.extend(_scaled(p, c) for p in ps)
        return out

    def _evaluate(self, phi, q):
        return float(sum(c * T._evaluate(phi, q) for c, T in self.parts if c != 0.0))

    def boundary(self):
        if self.dim <= 0:
            return zero_chain(self.m, -1)
        return SumCurrent([(c, T.boundary()) for c, T in self.parts])


class ProductCurrent(Current):
    """[T1 x T2](a(x) dx_K ^ b(y) dy_L) = T1(a dx_K) * T2(b dy_L) on R^{m1+m2}."""

    def __init__(self, T1: Current, T2: Current):
        self.T1, self.T2 = T1, T2
        self.m = T1.m + T2.m
        self.degree = T1.degree + T2.degree

    def support_box(self):
        b1, b2 = self.T1.support_box(), self.T2.support_box()
        if b1 is None or b2 is None:
            return None
        return np.concatenate([b1[0], b2[0]]), np.concatenate([b1[1], b2[1]])

    def pieces(self):
        P1, P2 = self.T1.pieces(), self.T2.pieces()
        if P1 is None or P2 is None:
            return None
        m1 = self.T1.m
        out = []
        for p1, p2 in itertools.product(P1, P2):
            d1 = p1.dim
            H = np.block([[p1.base.H, np.zeros((len(p1.base.h), p2.dim))],
                          [np.zeros((len(p2.base.h), d1)), p2.base.H]])
            base = Halfspaces(H, np.concatenate([p1.base.h, p2.base.h]))
            M = np.block([[p1.amap.matrix, np.zeros((m1, p2.dim))],
                          [np.zeros((self.T2.m, d1)), p2.amap.matrix]])
            amap = AffineMap(M, np.concatenate([p1.amap.translation, p2.amap.translation]))
            out.append(Piece(base, amap, _product_weights(p1.weights, p2.weights, d1, m1), _product_hint(p1, p2),
                             rtol_floor=max(p1.rtol_floor, p2.rtol_floor)))
        return out

    def _evaluate(self, phi, q):
        pieces = self.pieces()
        if pieces is None:
            raise NotImplementedError("product of currents without integrable pieces")
        return float(sum(integrate_piece(p, phi, q) for p in pieces))


def _product_weights(w1: Weights, w2: Weights, d1: int, m1: int) -> Weights:
    def weights(U, X):
        A = w1(U[:, :d1], X[:, :m1])
        B = w2(U[:, d1:], X[:, m1:])
        return {K + tuple(i + m1 for i in L): a * b for K, a in A.items() for L, b in B.items()}

    return weights


def _product_hint(p1: Piece, p2: Piece) -> np.ndarray | None:
    if p1.dim + p2.dim != 2:
        return None
    if p1.dim == 2:
        return p1.hint
    if p2.dim == 2:
        return p2.hint
    b1, b2 = decompose(p1.base), decompose(p2.base)
    if b1.kind != "box" or b2.kind != "box":
        return None
    (x0,), (x1,) = b1.data
    (y0,), (y1,) = b2.data
    return np.array([[x0, y0], [x1, y0], [x1, y1], [x0, y1]])


class WedgeSmoothCurrent(Current):
    """(T ^ omega)(phi) = T(omega ^ phi)."""

    def __init__(self, T: Current, omega: FormLike):
        if omega.m != T.m:
            raise DimensionMismatch("current and form live on different spaces")
        if T.degree + omega.degree > T.m:
            raise DimensionMismatch(f"degree overflow: {T.degree} + {omega.degree} > {T.m}")
        self.T, self.omega = T, omega
        self.m = T.m
        self.degree = T.degree + omega.degree

    def support_box(self):
        b = self.T.support_box()
        s = self.omega.support
        if s is not None:
            try:
                bs = s.bounding_box()
            except NonCompactError:
                bs = None
            if bs is not None:
                if b is None:
                    return bs
                return np.maximum(b[0], bs[0]), np.minimum(b[1], bs[1])
        return b

    def _test_form(self, phi):
        if isinstance(self.omega, DifferentialForm) and isinstance(phi, DifferentialForm):
            return wedge(self.omega, phi)
        return WedgeForm(self.omega, phi)

    def _evaluate(self, phi, q):
        return self.T._evaluate(self._test_form(phi), q)

    def pieces(self):
        inner = self.T.pieces()
        if inner is None:
            return None
        m, k, d = self.m, self.omega.degree, self.T.dim
        omega = self.omega
        plan = {}
        for L in multiindices(m, d - k):
            for A in multiindices(m, k):
                if set(A) & set(L):
                    continue
                plan.setdefault(L, []).append((A, tuple(sorted(A + L)), perm_sign(A, L)))
        out = []
        for p in inner:
            def weights(U, X, w=p.weights):
                W = w(U, X)
                C = omega.coefficients(X)
                res = {}
                for L, items in plan.items():
                    acc = None
                    for A, B, s in items:
                        if A in C and B in W:
                            t = s * W[B] * C[A]
                            acc = t if acc is None else acc + t
                    if acc is not None:
                        res[L] = acc
                return res

            base = p.base
            if omega.support is not None:
                base = base.intersect(omega.support.pullback(p.amap.matrix, p.amap.translation))
            out.append(Piece(base, p.amap, weights, p.hint,
                             rtol_floor=max(p.rtol_floor, accuracy_floor(omega))))
        return out


class BoundaryCurrent(Current):
    """bT(phi) = T(d phi), by duality."""

    def __init__(self, T: Current):
        if T.degree + 1 > T.m:
            raise DimensionMismatch("boundary of a current of dimension 0")
        self.T = T
        self.m = T.m
        self.degree = T.degree + 1

    def support_box(self):
        return self.T.support_box()

    def _evaluate(self, phi, q):
        return self.T._evaluate(phi.d(), q)


# ---------------------------------------------------------------- functional interface


def evaluate(T: Current, phi: FormLike, q: QuadratureConfig | None = None) -> float:
    return T.evaluate(phi, q)


def boundary(T: Current) -> Current:
    return T.boundary()


def wedge_smooth(T: Current, omega: FormLike) -> Current:
    return WedgeSmoothCurrent(T, omega)


def product(T1: Current, T2: Current) -> Current:
    return ProductCurrent(T1, T2)
