"""Exterior algebra on R^m with expression-tree coefficients.

Multiindices are strictly increasing tuples of 1-based coordinate indices,
so ``(1, 3)`` stands for dx1^dx3. Besides the symbolic ``DifferentialForm``
there are lazy numeric forms (wedges and sums of anything exposing
``coefficients``); currents only need that small protocol.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations
from typing import Iterable, Mapping, Protocol, Sequence

import numpy as np

from . import expr as E
from .parser import parse_expr
from .polytope import Halfspaces

__all__ = [
    "Multiindex", "sort_sign", "perm_sign", "complement", "multiindices",
    "AffineMap", "DifferentialForm", "FormLike", "WedgeForm", "SumForm",
    "wedge", "exterior_derivative", "pullback", "eval_form", "form_from_terms",
    "volume_form", "merge_supports", "intersect_supports", "DimensionMismatch",
]

Multiindex = tuple


class DimensionMismatch(ValueError):
    """Operands live on different ambient spaces or degrees overflow."""


def sort_sign(seq: Sequence[int]) -> tuple[int, tuple]:
    """Sign of the permutation sorting ``seq`` and the sorted tuple; sign 0 on repeats."""
    seq = list(seq)
    if len(set(seq)) != len(seq):
        return 0, ()
    sign = 1
    # count inversions; multiindices are short
    for i in range(len(seq)):
        for j in range(i + 1, len(seq)):
            if seq[i] > seq[j]:
                sign = -sign
    return sign, tuple(sorted(seq))


def perm_sign(first: Sequence[int], second: Sequence[int]) -> int:
    """Sign of dx_first ^ dx_second relative to dx_(sorted union)."""
    return sort_sign(tuple(first) + tuple(second))[0]


def complement(index: Sequence[int], m: int) -> tuple:
    s = set(index)
    return tuple(i for i in range(1, m + 1) if i not in s)


def multiindices(m: int, k: int) -> list[tuple]:
    return list(combinations(range(1, m + 1), k))


@dataclass(frozen=True, eq=False)
class AffineMap:
    """x -> matrix @ x + translation, from R^n_in to R^n_out."""

    matrix: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        M = np.asarray(self.matrix, dtype=float)
        if M.ndim != 2:
            raise ValueError("affine map matrix must be 2-D")
        c = np.asarray(self.translation, dtype=float).reshape(-1)
        if c.shape[0] != M.shape[0]:
            raise DimensionMismatch(f"translation has length {c.shape[0]}, expected {M.shape[0]}")
        object.__setattr__(self, "matrix", M)
        object.__setattr__(self, "translation", c)

    @property
    def n_in(self) -> int:
        return self.matrix.shape[1]

    @property
    def n_out(self) -> int:
        return self.matrix.shape[0]

    @classmethod
    def identity(cls, n: int) -> "AffineMap":
        return cls(np.eye(n), np.zeros(n))

    @classmethod
    def translation_by(cls, y: Sequence[float]) -> "AffineMap":
        y = np.asarray(y, dtype=float)
        return cls(np.eye(y.size), y)

    def __call__(self, U: np.ndarray) -> np.ndarray:
        U = np.asarray(U, dtype=float)
        return U @ self.matrix.T + self.translation

    def compose(self, inner: "AffineMap") -> "AffineMap":
        """self o inner."""
        if inner.n_out != self.n_in:
            raise DimensionMismatch("cannot compose affine maps of incompatible sizes")
        return AffineMap(self.matrix @ inner.matrix, self.matrix @ inner.translation + self.translation)


class FormLike(Protocol):
    m: int
    degree: int

    def coefficients(self, X: np.ndarray, indices: Iterable[tuple] | None = None) -> dict[tuple, np.ndarray]:
        ...

    @property
    def support(self) -> Halfspaces | None:
        ...

    def d(self) -> "FormLike":
        ...


def merge_supports(a: Halfspaces | None, b: Halfspaces | None) -> Halfspaces | None:
    """A convex set containing both supports (None stands for everything)."""
    if a is None or b is None:
        return None
    if a is b:
        return a
    ba, bb = a.box_bounds(), b.box_bounds()
    if ba is None or bb is None:
        try:
            ba, bb = a.bounding_box(), b.bounding_box()
        except ValueError:
            return None
        if ba is None:
            return b
        if bb is None:
            return a
    return Halfspaces.box(np.minimum(ba[0], bb[0]), np.maximum(ba[1], bb[1]))


def intersect_supports(a: Halfspaces | None, b: Halfspaces | None) -> Halfspaces | None:
    if a is None:
        return b
    if b is None or a is b:
        return a
    return a.intersect(b)


def _check_index(index: Sequence[int], m: int) -> tuple:
    index = tuple(int(i) for i in index)
    if any(i < 1 or i > m for i in index):
        raise ValueError(f"multiindex {index} out of range 1..{m}")
    if any(index[k] >= index[k + 1] for k in range(len(index) - 1)):
        raise ValueError(f"multiindex {index} is not strictly increasing")
    return index


def _env(X: np.ndarray, m: int) -> list[np.ndarray]:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X.reshape(1, -1)
    if X.shape[1] != m:
        raise DimensionMismatch(f"points have {X.shape[1]} coordinates, expected {m}")
    return [X[:, i] for i in range(m)]


@dataclass(frozen=True, eq=False)
class DifferentialForm:
    """Sum of coefficient * dx_I over multiindices I of a fixed degree."""

    m: int
    degree: int
    terms: Mapping[tuple, E.Expr] = field(default_factory=dict)
    support: Halfspaces | None = None

    def __post_init__(self):
        if not 0 <= self.degree <= self.m:
            raise ValueError(f"degree {self.degree} outside 0..{self.m}")
        clean = {}
        for idx, coef in self.terms.items():
            idx = _check_index(idx, self.m)
            if len(idx) != self.degree:
                raise ValueError(f"multiindex {idx} does not have degree {self.degree}")
            if idx in clean:
                raise ValueError(f"duplicate multiindex {idx}")
            if not isinstance(coef, E.Expr):
                coef = E.Const(float(coef))
            if not E.is_zero(coef):
                clean[idx] = coef
        object.__setattr__(self, "terms", dict(sorted(clean.items())))
        if self.support is not None and self.support.dim != self.m:
            raise DimensionMismatch("support lives in the wrong dimension")

    @classmethod
    def zero(cls, m: int, degree: int) -> "DifferentialForm":
        return cls(m, degree, {})

    @classmethod
    def constant(cls, m: int, index: Sequence[int] = (), value: float = 1.0) -> "DifferentialForm":
        return cls(m, len(index), {tuple(index): E.Const(value)})

    @classmethod
    def scalar(cls, m: int, coef: E.Expr, support: Halfspaces | None = None) -> "DifferentialForm":
        return cls(m, 0, {(): coef}, support)

    def is_zero(self) -> bool:
        return not self.terms

    def with_support(self, support: Halfspaces | None) -> "DifferentialForm":
        return DifferentialForm(self.m, self.degree, self.terms, support)

    def coefficients(self, X: np.ndarray, indices: Iterable[tuple] | None = None) -> dict[tuple, np.ndarray]:
        env = _env(X, self.m)
        n = len(env[0]) if env else np.asarray(X).reshape(-1, 0).shape[0]
        memo: dict = {}
        out = {}
        wanted = self.terms.keys() if indices is None else [i for i in indices if i in self.terms]
        for idx in wanted:
            val = np.broadcast_to(np.asarray(E.evaluate(self.terms[idx], env, memo), dtype=float), (n,))
            if not np.all(np.isfinite(val)):
                raise E.EvaluationError(f"coefficient of dx{idx} is not finite at some points")
            out[idx] = val
        return out

    def d(self) -> "DifferentialForm":
        return exterior_derivative(self)

    def __add__(self, other: "DifferentialForm") -> "DifferentialForm":
        if not isinstance(other, DifferentialForm):
            return NotImplemented
        if (self.m, self.degree) != (other.m, other.degree):
            raise DimensionMismatch("cannot add forms of different dimension or degree")
        terms = dict(self.terms)
        for idx, c in other.terms.items():
            terms[idx] = E.add(terms[idx], c) if idx in terms else c
        if self.is_zero():
            support = other.support
        elif other.is_zero():
            support = self.support
        else:
            support = merge_supports(self.support, other.support)
        return DifferentialForm(self.m, self.degree, terms, support)

    def scale(self, c: float | E.Expr) -> "DifferentialForm":
        c = c if isinstance(c, E.Expr) else E.Const(float(c))
        return DifferentialForm(self.m, self.degree, {i: E.mul(c, b) for i, b in self.terms.items()}, self.support)

    def __neg__(self):
        return self.scale(-1.0)

    def __sub__(self, other):
        return self + (-other)

    def __str__(self):
        if not self.terms:
            return "0"
        parts = []
        for idx, c in self.terms.items():
            basis = "^".join(f"dx{i}" for i in idx)
            parts.append(f"({c})" + (f" {basis}" if basis else ""))
        return " + ".join(parts)


def form_from_terms(m: int, degree: int, terms: Sequence[tuple[Sequence[int], str]],
                    support: float | None = None) -> DifferentialForm:
    """Build a form from ``[(indices, expression text), ...]``.

    ``support`` declares a ball radius: coefficients are forced to 0 outside
    it and the form's integration support becomes the enclosing cube.
    """
    coefs: dict[tuple, E.Expr] = {}
    for idx, text in terms:
        sign, key = sort_sign(idx)
        if sign == 0:
            continue
        e = parse_expr(text, m) if isinstance(text, str) else E.Const(float(text))
        if support is not None:
            e = E.mask(e, [E.Var(i) for i in range(m)], support)
        e = e if sign > 0 else E.neg(e)
        coefs[key] = E.add(coefs[key], e) if key in coefs else e
    hs = None if support is None else Halfspaces.box([-support] * m, [support] * m)
    return DifferentialForm(m, degree, coefs, hs)


def volume_form(m: int) -> DifferentialForm:
    return DifferentialForm.constant(m, tuple(range(1, m + 1)))


def wedge(alpha: DifferentialForm, beta: DifferentialForm) -> DifferentialForm:
    if alpha.m != beta.m:
        raise DimensionMismatch(f"cannot wedge forms on R^{alpha.m} and R^{beta.m}")
    m, k = alpha.m, alpha.degree + beta.degree
    support = intersect_supports(alpha.support, beta.support)
    if k > m:
        return _ZeroOverflow(m)
    acc: dict[tuple, list] = {}
    for ia, ca in alpha.terms.items():
        for ib, cb in beta.terms.items():
            sign, key = sort_sign(ia + ib)
            if sign == 0:
                continue
            term = E.mul(ca, cb)
            acc.setdefault(key, []).append(term if sign > 0 else E.neg(term))
    return DifferentialForm(m, k, {key: E.add(*ts) for key, ts in acc.items()}, support)


class _ZeroOverflow(DifferentialForm):
    """The zero form returned when degrees overflow m (it has no natural degree)."""

    def __init__(self, m: int):
        object.__setattr__(self, "m", m)
        object.__setattr__(self, "degree", m)
        object.__setattr__(self, "terms", {})
        object.__setattr__(self, "support", None)

    def __post_init__(self):
        pass


def _collect(exprs: list[E.Expr]) -> E.Expr:
    # like-term collection makes mixed partials cancel exactly
    acc: dict[E.Expr, float] = {}
    for e in exprs:
        for atom, c in E.linear_terms(e).items():
            acc[atom] = acc.get(atom, 0.0) + c
    return E.from_linear_terms(acc)


def exterior_derivative(alpha: DifferentialForm) -> DifferentialForm:
    m = alpha.m
    if alpha.degree == m:
        return _ZeroOverflow(m)
    acc: dict[tuple, list] = {}
    for idx, c in alpha.terms.items():
        for j in range(1, m + 1):
            if j in idx:
                continue
            dc = E.diff(c, j - 1)
            if E.is_zero(dc):
                continue
            sign, key = sort_sign((j,) + idx)
            acc.setdefault(key, []).append(dc if sign > 0 else E.neg(dc))
    terms = {key: _collect(ts) for key, ts in acc.items()}
    return DifferentialForm(m, alpha.degree + 1, terms, alpha.support)


def pullback(A: AffineMap, alpha: DifferentialForm) -> DifferentialForm:
    """A^* alpha, a form on R^{A.n_in}."""
    if A.n_out != alpha.m:
        raise DimensionMismatch(f"map lands in R^{A.n_out} but form lives on R^{alpha.m}")
    n, k = A.n_in, alpha.degree
    if k > n:
        return _ZeroOverflow(n)
    M = A.matrix
    subs = {
        i: E.add(*[E.mul(E.Const(M[i, j]), E.Var(j)) for j in range(n) if M[i, j] != 0.0],
                 E.Const(A.translation[i]))
        for i in range(alpha.m)
    }
    acc: dict[tuple, list] = {}
    targets = multiindices(n, k)
    for idx, c in alpha.terms.items():
        cs = E.substitute(c, subs)
        rows = [i - 1 for i in idx]
        for J in targets:
            det = np.linalg.det(M[np.ix_(rows, [j - 1 for j in J])]) if k else 1.0
            if abs(det) < 1e-15:
                continue
            acc.setdefault(J, []).append(E.mul(E.Const(det), cs))
    terms = {J: E.add(*ts) for J, ts in acc.items()}
    support = None if alpha.support is None else alpha.support.pullback(M, A.translation)
    return DifferentialForm(n, k, terms, support)


def eval_form(alpha: FormLike, point: Sequence[float]) -> dict[tuple, float]:
    """Coefficient table at one point, zero coefficients dropped."""
    coefs = alpha.coefficients(np.asarray(point, dtype=float).reshape(1, -1))
    return {idx: float(v[0]) for idx, v in coefs.items() if v[0] != 0.0}


def accuracy_floor(alpha) -> float:
    """Relative accuracy of a form's coefficients (0 for symbolic forms).

    Numerically evaluated forms (e.g. fiber integrals) set ``rtol_floor``;
    adaptive integration never asks for more than this.
    """
    if isinstance(alpha, WedgeForm):
        return max(accuracy_floor(alpha.alpha), accuracy_floor(alpha.beta))
    if isinstance(alpha, SumForm):
        return max((accuracy_floor(f) for _, f in alpha.parts), default=0.0)
    return float(getattr(alpha, "rtol_floor", 0.0))


class WedgeForm:
    """Lazy numeric alpha ^ beta for arbitrary form-likes."""

    def __init__(self, alpha: FormLike, beta: FormLike):
        if alpha.m != beta.m:
            raise DimensionMismatch(f"cannot wedge forms on R^{alpha.m} and R^{beta.m}")
        self.alpha, self.beta = alpha, beta
        self.m = alpha.m
        self.degree = alpha.degree + beta.degree
        if self.degree > self.m:
            raise DimensionMismatch("wedge degree exceeds ambient dimension")
        self.support = intersect_supports(alpha.support, beta.support)

    def coefficients(self, X, indices=None):
        wanted = None if indices is None else set(indices)
        pairs = []
        need_a, need_b = set(), set()
        for ia in multiindices(self.m, self.alpha.degree):
            for ib in multiindices(self.m, self.beta.degree):
                sign, key = sort_sign(ia + ib)
                if sign == 0 or (wanted is not None and key not in wanted):
                    continue
                pairs.append((ia, ib, sign, key))
                need_a.add(ia)
                need_b.add(ib)
        if not pairs:
            return {}
        ca = self.alpha.coefficients(X, need_a)
        cb = self.beta.coefficients(X, need_b) if ca else {}
        out: dict[tuple, np.ndarray] = {}
        for ia, ib, sign, key in pairs:
            if ia in ca and ib in cb:
                term = sign * ca[ia] * cb[ib]
                out[key] = out[key] + term if key in out else term
        return out

    def d(self):
        k = self.alpha.degree
        parts = []
        if self.degree < self.m:
            parts.append((1.0, WedgeForm(self.alpha.d(), self.beta)) if self.alpha.degree < self.m else None)
            parts.append(((-1.0) ** k, WedgeForm(self.alpha, self.beta.d())) if self.beta.degree < self.m else None)
        return SumForm(self.m, self.degree + 1, [p for p in parts if p is not None])


class SumForm:
    """Lazy numeric linear combination of form-likes of one degree."""

    def __init__(self, m: int, degree: int, parts: Sequence[tuple[float, FormLike]]):
        self.m, self.degree = m, degree
        self.parts = [(float(c), f) for c, f in parts]
        for _, f in self.parts:
            if (f.m, f.degree) != (m, degree):
                raise DimensionMismatch("summands differ in dimension or degree")
        support = None
        for i, (_, f) in enumerate(self.parts):
            support = f.support if i == 0 else merge_supports(support, f.support)
        self.support = support

    def coefficients(self, X, indices=None):
        out: dict[tuple, np.ndarray] = {}
        for c, f in self.parts:
            for idx, v in f.coefficients(X, indices).items():
                out[idx] = out[idx] + c * v if idx in out else c * v
        return out

    def d(self):
        if self.degree >= self.m:
            return SumForm(self.m, self.m, [])
        return SumForm(self.m, self.degree + 1, [(c, f.d()) for c, f in self.parts])
