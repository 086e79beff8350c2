"""Immutable expression trees for scalar coefficient functions.

Nodes are hashable and compare structurally, which lets the form algebra
collect like terms exactly. Partial derivatives are wrapped in a canonical
``Deriv`` node (sorted index multiset), so mixed partials taken in different
orders are the *same* node and cancel without rounding.

Evaluation is vectorised: the environment is a sequence of numpy arrays
(one per variable) that broadcast against each other.
"""

from __future__ import annotations

import math
from functools import lru_cache
from typing import Mapping, Sequence

import numpy as np

__all__ = [
    "Expr", "Const", "Var", "Add", "Mul", "Div", "Pow", "Neg", "Func", "Flat",
    "Mask", "Deriv", "EvaluationError", "const", "var", "add", "mul", "div",
    "neg", "power", "func", "flat", "mask", "diff", "substitute",
    "linear_terms", "from_linear_terms", "evaluate", "is_zero", "ZERO", "ONE",
]

# Below this argument psi(u) = exp(-1/u) and its derivatives are < 1e-280.
_FLAT_CUTOFF = 1.0 / 700.0


class EvaluationError(ValueError):
    """Raised when an expression is evaluated outside its domain."""


class Expr:
    __slots__ = ("_hash",)

    def _key(self) -> tuple:
        raise NotImplementedError

    def __hash__(self) -> int:
        try:
            return self._hash
        except AttributeError:
            h = hash(self._key())
            object.__setattr__(self, "_hash", h)
            return h

    def __eq__(self, other: object) -> bool:
        if self is other:
            return True
        if not isinstance(other, Expr) or type(self) is not type(other):
            return False
        return hash(self) == hash(other) and self._key() == other._key()

    def __setattr__(self, name, value):
        raise AttributeError("expression nodes are immutable")

    def __repr__(self):
        return str(self)

    def _init(self, **kwargs):
        for k, v in kwargs.items():
            object.__setattr__(self, k, v)

    # operator sugar, used when building trees in code
    def __add__(self, other):
        return add(self, _coerce(other))

    def __radd__(self, other):
        return add(_coerce(other), self)

    def __sub__(self, other):
        return add(self, neg(_coerce(other)))

    def __rsub__(self, other):
        return add(_coerce(other), neg(self))

    def __mul__(self, other):
        return mul(self, _coerce(other))

    def __rmul__(self, other):
        return mul(_coerce(other), self)

    def __truediv__(self, other):
        return div(self, _coerce(other))

    def __rtruediv__(self, other):
        return div(_coerce(other), self)

    def __neg__(self):
        return neg(self)

    def __pow__(self, other):
        return power(self, _coerce(other))

    def _eval(self, env, memo):
        raise NotImplementedError

    def _raw_diff(self, i: int) -> "Expr":
        raise NotImplementedError

    def _subs(self, mapping, memo) -> "Expr":
        raise NotImplementedError

    def max_var(self) -> int:
        """Largest variable index referenced, or -1."""
        return -1


def _coerce(x) -> Expr:
    if isinstance(x, Expr):
        return x
    return Const(float(x))


class Const(Expr):
    __slots__ = ("value",)

    def __init__(self, value: float):
        self._init(value=float(value))

    def _key(self):
        return ("c", self.value)

    def _eval(self, env, memo):
        return self.value

    def _raw_diff(self, i):
        return ZERO

    def _subs(self, mapping, memo):
        return self

    def __repr__(self):
        return repr(self.value)

    def __str__(self):
        v = self.value
        return str(int(v)) if v.is_integer() and abs(v) < 1e15 else repr(v)


ZERO = Const(0.0)
ONE = Const(1.0)


class Var(Expr):
    __slots__ = ("index",)

    def __init__(self, index: int):
        self._init(index=int(index))

    def _key(self):
        return ("v", self.index)

    def _eval(self, env, memo):
        return env[self.index]

    def _raw_diff(self, i):
        return ONE if i == self.index else ZERO

    def _subs(self, mapping, memo):
        return mapping.get(self.index, self)

    def max_var(self):
        return self.index

    def __str__(self):
        return f"x{self.index + 1}"

    __repr__ = __str__


class _Nary(Expr):
    __slots__ = ("args",)
    _tag = ""

    def __init__(self, args: Sequence[Expr]):
        self._init(args=tuple(args))

    def _key(self):
        return (self._tag, self.args)

    def max_var(self):
        return max(a.max_var() for a in self.args)


class Add(_Nary):
    __slots__ = ()
    _tag = "+"

    def _eval(self, env, memo):
        total = _ev(self.args[0], env, memo)
        for a in self.args[1:]:
            total = total + _ev(a, env, memo)
        return total

    def _raw_diff(self, i):
        return add(*[_rd(a, i) for a in self.args])

    def _subs(self, mapping, memo):
        return add(*[_sb(a, mapping, memo) for a in self.args])

    def __str__(self):
        out = str(self.args[0])
        for a in self.args[1:]:
            s = str(a)
            out += f" - {s[1:]}" if s.startswith("-") else f" + {s}"
        return out


class Mul(_Nary):
    __slots__ = ()
    _tag = "*"

    def _eval(self, env, memo):
        total = _ev(self.args[0], env, memo)
        for a in self.args[1:]:
            total = total * _ev(a, env, memo)
        return total

    def _raw_diff(self, i):
        terms = []
        for k, a in enumerate(self.args):
            da = _rd(a, i)
            if is_zero(da):
                continue
            terms.append(mul(*self.args[:k], da, *self.args[k + 1:]))
        return add(*terms)

    def _subs(self, mapping, memo):
        return mul(*[_sb(a, mapping, memo) for a in self.args])

    def __str__(self):
        return "*".join(_paren(a, (Add,)) for a in self.args)


class Div(Expr):
    __slots__ = ("num", "den")

    def __init__(self, num: Expr, den: Expr):
        self._init(num=num, den=den)

    def _key(self):
        return ("/", self.num, self.den)

    def max_var(self):
        return max(self.num.max_var(), self.den.max_var())

    def _eval(self, env, memo):
        n = _ev(self.num, env, memo)
        d = _ev(self.den, env, memo)
        if np.any(np.asarray(d) == 0):
            raise EvaluationError(f"division by zero in {self}")
        return n / d

    def _raw_diff(self, i):
        dn, dd = _rd(self.num, i), _rd(self.den, i)
        top = add(mul(dn, self.den), neg(mul(self.num, dd)))
        return div(top, power(self.den, Const(2.0)))

    def _subs(self, mapping, memo):
        return div(_sb(self.num, mapping, memo), _sb(self.den, mapping, memo))

    def __str__(self):
        return f"{_paren(self.num, (Add,))}/{_paren(self.den, (Add, Mul, Div))}"


class Pow(Expr):
    __slots__ = ("base", "exponent")

    def __init__(self, base: Expr, exponent: Expr):
        self._init(base=base, exponent=exponent)

    def _key(self):
        return ("^", self.base, self.exponent)

    def max_var(self):
        return max(self.base.max_var(), self.exponent.max_var())

    def _eval(self, env, memo):
        b = _ev(self.base, env, memo)
        e = _ev(self.exponent, env, memo)
        if isinstance(self.exponent, Const) and float(e).is_integer():
            k = int(e)
            if k < 0 and np.any(np.asarray(b) == 0):
                raise EvaluationError(f"division by zero in {self}")
            return b ** k if k >= 0 else 1.0 / (b ** (-k))
        with np.errstate(all="ignore"):
            out = np.power(b, e)
        if not np.all(np.isfinite(out)):
            raise EvaluationError(f"{self} undefined at some evaluation points")
        return out

    def _raw_diff(self, i):
        db = _rd(self.base, i)
        if isinstance(self.exponent, Const):
            c = self.exponent.value
            if c == 0:
                return ZERO
            return mul(Const(c), power(self.base, Const(c - 1.0)), db)
        de = _rd(self.exponent, i)
        t1 = mul(de, func("log", self.base))
        t2 = mul(self.exponent, div(db, self.base))
        return mul(self, add(t1, t2))

    def _subs(self, mapping, memo):
        return power(_sb(self.base, mapping, memo), _sb(self.exponent, mapping, memo))

    def __str__(self):
        return f"{_paren(self.base, (Add, Mul, Div, Neg, Pow))}^{_paren(self.exponent, (Add, Mul, Div, Neg, Pow))}"


class Neg(Expr):
    __slots__ = ("arg",)

    def __init__(self, arg: Expr):
        self._init(arg=arg)

    def _key(self):
        return ("neg", self.arg)

    def max_var(self):
        return self.arg.max_var()

    def _eval(self, env, memo):
        return -_ev(self.arg, env, memo)

    def _raw_diff(self, i):
        return neg(_rd(self.arg, i))

    def _subs(self, mapping, memo):
        return neg(_sb(self.arg, mapping, memo))

    def __str__(self):
        return f"-{_paren(self.arg, (Add,))}"


_FUNCS = {"exp": np.exp, "sin": np.sin, "cos": np.cos, "log": np.log}


class Func(Expr):
    __slots__ = ("name", "arg")

    def __init__(self, name: str, arg: Expr):
        if name not in _FUNCS:
            raise ValueError(f"unknown function {name!r}")
        self._init(name=name, arg=arg)

    def _key(self):
        return ("f", self.name, self.arg)

    def max_var(self):
        return self.arg.max_var()

    def _eval(self, env, memo):
        a = _ev(self.arg, env, memo)
        if self.name == "log":
            if np.any(np.asarray(a) <= 0):
                raise EvaluationError(f"log of non-positive value in {self}")
        return _FUNCS[self.name](a)

    def _raw_diff(self, i):
        da = _rd(self.arg, i)
        if is_zero(da):
            return ZERO
        if self.name == "exp":
            return mul(self, da)
        if self.name == "sin":
            return mul(func("cos", self.arg), da)
        if self.name == "cos":
            return neg(mul(func("sin", self.arg), da))
        return div(da, self.arg)

    def _subs(self, mapping, memo):
        return func(self.name, _sb(self.arg, mapping, memo))

    def __str__(self):
        return f"{self.name}({self.arg})"


@lru_cache(maxsize=None)
def _flat_poly(order: int) -> np.polynomial.Polynomial:
    # d^k/du^k exp(-1/u) = P_k(1/u) exp(-1/u),  P_{k+1}(w) = w^2 (P_k(w) - P_k'(w))
    p = np.polynomial.Polynomial([1.0])
    w2 = np.polynomial.Polynomial([0.0, 0.0, 1.0])
    for _ in range(order):
        p = w2 * (p - p.deriv())
    return p


class Flat(Expr):
    """k-th derivative of the flat function psi(u) = exp(-1/u) for u > 0, else 0.

    Building block for bumps and smooth steps; C-infinity, identically zero
    for u <= 0.
    """

    __slots__ = ("arg", "order")

    def __init__(self, arg: Expr, order: int = 0):
        self._init(arg=arg, order=int(order))

    def _key(self):
        return ("flat", self.order, self.arg)

    def max_var(self):
        return self.arg.max_var()

    def _eval(self, env, memo):
        u = np.asarray(_ev(self.arg, env, memo), dtype=float)
        live = u > _FLAT_CUTOFF
        w = 1.0 / np.where(live, u, 1.0)
        val = np.exp(-w)
        if self.order:
            val = val * _flat_poly(self.order)(w)
        out = np.where(live, val, 0.0)
        return out if out.ndim else float(out)

    def _raw_diff(self, i):
        da = _rd(self.arg, i)
        if is_zero(da):
            return ZERO
        return mul(Flat(self.arg, self.order + 1), da)

    def _subs(self, mapping, memo):
        return flat(_sb(self.arg, mapping, memo), self.order)

    def __str__(self):
        tag = "psi" if self.order == 0 else f"psi{self.order}"
        return f"{tag}({self.arg})"


class Mask(Expr):
    """``arg`` where |coords|_2 <= radius, exactly 0 elsewhere.

    Realises a declared support radius. Differentiation passes through the
    mask: declared supports promise the coefficient is smooth and vanishes
    at the boundary.
    """

    __slots__ = ("arg", "coords", "radius")

    def __init__(self, arg: Expr, coords: Sequence[Expr], radius: float):
        self._init(arg=arg, coords=tuple(coords), radius=float(radius))

    def _key(self):
        return ("mask", self.radius, self.coords, self.arg)

    def max_var(self):
        return max([self.arg.max_var()] + [c.max_var() for c in self.coords])

    def _eval(self, env, memo):
        r2 = 0.0
        for c in self.coords:
            v = _ev(c, env, memo)
            r2 = r2 + v * v
        inside = np.asarray(r2) <= self.radius ** 2
        a = _ev(self.arg, env, memo)
        out = np.where(inside, a, 0.0)
        return out if out.ndim else float(out)

    def _raw_diff(self, i):
        da = _rd(self.arg, i)
        if is_zero(da):
            return ZERO
        return Mask(da, self.coords, self.radius)

    def _subs(self, mapping, memo):
        return mask(_sb(self.arg, mapping, memo),
                    [_sb(c, mapping, memo) for c in self.coords], self.radius)

    def __str__(self):
        return f"mask[{self.radius:g}]({self.arg})"


class Deriv(Expr):
    """Canonical partial derivative of ``base`` w.r.t. a sorted index multiset."""

    __slots__ = ("base", "indices", "_expanded")

    def __init__(self, base: Expr, indices: Sequence[int], expanded: Expr):
        self._init(base=base, indices=tuple(sorted(indices)), _expanded=expanded)

    def _key(self):
        return ("D", self.indices, self.base)

    def max_var(self):
        return self.base.max_var()

    def _eval(self, env, memo):
        return _ev(self._expanded, env, memo)

    def _raw_diff(self, i):
        return diff(self, i)

    def _subs(self, mapping, memo):
        return _sb(self._expanded, mapping, memo)

    def __str__(self):
        idx = ",".join(f"x{i + 1}" for i in self.indices)
        return f"D[{idx}]({self.base})"


@lru_cache(maxsize=65536)
def _expand_derivative(base: Expr, indices: tuple) -> Expr:
    e = base
    for i in indices:
        e = _rd(e, i)
    return e


def _paren(e: Expr, kinds) -> str:
    s = str(e)
    if isinstance(e, kinds) or (isinstance(e, Const) and e.value < 0):
        return f"({s})"
    return s


def _ev(e: Expr, env, memo):
    k = id(e)
    if k in memo:
        return memo[k][1]
    v = e._eval(env, memo)
    memo[k] = (e, v)  # keep e alive so its id cannot be reused mid-evaluation
    return v


def _rd(e: Expr, i: int) -> Expr:
    if isinstance(e, Deriv):
        return diff(e, i)
    return e._raw_diff(i)


def _sb(e: Expr, mapping, memo) -> Expr:
    k = id(e)
    if k in memo:
        return memo[k][1]
    out = e._subs(mapping, memo)
    memo[k] = (e, out)
    return out


# ---------------------------------------------------------------- smart constructors


def const(v: float) -> Const:
    return Const(v)


def var(i: int) -> Var:
    return Var(i)


def is_zero(e: Expr) -> bool:
    return isinstance(e, Const) and e.value == 0.0


def add(*args: Expr) -> Expr:
    flat_args: list[Expr] = []
    c = 0.0
    for a in args:
        a = _coerce(a)
        parts = a.args if isinstance(a, Add) else (a,)
        for p in parts:
            if isinstance(p, Const):
                c += p.value
            else:
                flat_args.append(p)
    if c != 0.0:
        flat_args.append(Const(c))
    if not flat_args:
        return ZERO
    if len(flat_args) == 1:
        return flat_args[0]
    return Add(flat_args)


def mul(*args: Expr) -> Expr:
    flat_args: list[Expr] = []
    c = 1.0
    for a in args:
        a = _coerce(a)
        parts = a.args if isinstance(a, Mul) else (a,)
        for p in parts:
            if isinstance(p, Const):
                c *= p.value
            elif isinstance(p, Neg):
                c = -c
                flat_args.append(p.arg)
            else:
                flat_args.append(p)
    if c == 0.0:
        return ZERO
    if not flat_args:
        return Const(c)
    if c != 1.0:
        flat_args.insert(0, Const(c))
    if len(flat_args) == 1:
        return flat_args[0]
    return Mul(flat_args)


def neg(a: Expr) -> Expr:
    if isinstance(a, Const):
        return Const(-a.value)
    if isinstance(a, Neg):
        return a.arg
    if isinstance(a, Mul) and isinstance(a.args[0], Const):
        return mul(Const(-a.args[0].value), *a.args[1:])
    return Neg(a)


def div(n: Expr, d: Expr) -> Expr:
    if is_zero(n):
        return ZERO
    if isinstance(d, Const):
        if d.value == 0.0:
            return Div(n, d)  # rejected when evaluated
        return mul(Const(1.0 / d.value), n)
    return Div(n, d)


def power(b: Expr, e: Expr) -> Expr:
    if isinstance(e, Const):
        if e.value == 0.0:
            return ONE
        if e.value == 1.0:
            return b
        if isinstance(b, Const) and (e.value.is_integer() or b.value > 0):
            return Const(b.value ** e.value)
    return Pow(b, e)


def func(name: str, a: Expr) -> Expr:
    if isinstance(a, Const) and name != "log":
        return Const(float(_FUNCS[name](a.value)))
    return Func(name, a)


def flat(a: Expr, order: int = 0) -> Expr:
    if isinstance(a, Const):
        return Const(float(Flat(a, order)._eval((), {})))
    return Flat(a, order)


def mask(a: Expr, coords: Sequence[Expr], radius: float) -> Expr:
    if is_zero(a):
        return ZERO
    return Mask(a, coords, radius)


# ---------------------------------------------------------------- public operations


def diff(e: Expr, i: int) -> Expr:
    """Partial derivative d e / d x_{i+1} (``i`` is the 0-based variable index).

    Linear in ``e``: each atom of a sum or scaled term is differentiated
    canonically, so -D[x3](f) and D[x3](f) lead to the same mixed partial.
    """
    terms = linear_terms(e)
    if len(terms) == 1 and terms.get(e) == 1.0:
        return _diff_atom(e, i)
    acc: dict[Expr, float] = {}
    for atom, c in terms.items():
        if atom == ONE:
            continue
        for a2, c2 in linear_terms(_diff_atom(atom, i)).items():
            acc[a2] = acc.get(a2, 0.0) + c * c2
    return from_linear_terms(acc)


def _diff_atom(e: Expr, i: int) -> Expr:
    if isinstance(e, Deriv):
        base, idx = e.base, e.indices + (i,)
    else:
        base, idx = e, (i,)
    idx = tuple(sorted(idx))
    expanded = _expand_derivative(base, idx)
    if isinstance(expanded, Const):
        return expanded
    return Deriv(base, idx, expanded)


def substitute(e: Expr, mapping: Mapping[int, Expr]) -> Expr:
    """Replace variables by expressions (simultaneously)."""
    return _sb(e, dict(mapping), {})


def evaluate(e: Expr, env: Sequence, memo: dict | None = None):
    """Evaluate with ``env[i]`` bound to variable ``i``."""
    return _ev(e, env, {} if memo is None else memo)


def linear_terms(e: Expr) -> dict[Expr, float]:
    """Split ``e`` into ``{atom: coefficient}``; constants are keyed by ONE."""
    out: dict[Expr, float] = {}

    def visit(x: Expr, scale: float):
        if isinstance(x, Add):
            for a in x.args:
                visit(a, scale)
        elif isinstance(x, Neg):
            visit(x.arg, -scale)
        elif isinstance(x, Const):
            out[ONE] = out.get(ONE, 0.0) + scale * x.value
        elif isinstance(x, Mul) and isinstance(x.args[0], Const):
            rest = x.args[1:]
            visit(rest[0] if len(rest) == 1 else Mul(rest), scale * x.args[0].value)
        else:
            out[x] = out.get(x, 0.0) + scale

    visit(e, 1.0)
    return out


def from_linear_terms(terms: Mapping[Expr, float]) -> Expr:
    parts = []
    for atom, c in terms.items():
        if c == 0.0:
            continue
        parts.append(Const(c) if atom is ONE or atom == ONE else mul(Const(c), atom))
    return add(*parts)


def flat_value(u) -> np.ndarray:
    """Numeric psi(u) = exp(-1/u) for u > 0, else 0."""
    return Flat(Var(0))._eval((np.asarray(u, dtype=float),), {})


def smooth_step(t: Expr) -> Expr:
    """C-infinity step: 0 for t <= 0, 1 for t >= 1."""
    a = flat(t)
    return div(a, add(a, flat(add(ONE, neg(t)))))


def pi() -> Const:
    return Const(math.pi)
