"""Recursive-descent parser for the coefficient expression language.

Grammar (EBNF)::

    expr    = term { ("+" | "-") term } ;
    term    = unary { ("*" | "/") unary } ;
    unary   = ("+" | "-") unary | power ;
    power   = primary [ ("^" | "**") unary ] ;
    primary = number | variable | "pi"
            | ("exp" | "sin" | "cos") "(" expr ")"
            | "pow" "(" expr "," expr ")"
            | "bump" "(" expr ")"
            | "(" expr ")" ;
    variable = "x" digit { digit } ;          (* x1 .. xm *)

``bump(r)`` is the unnormalised bump psi(1 - |x|^2/r^2) with
psi(u) = exp(-1/u); it equals exp(-1) at the origin and vanishes for |x| >= r.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import expr as E

__all__ = ["ParseError", "UnknownVariableError", "ScalarField", "parse_expr", "parse_scalar_expr"]


class ParseError(ValueError):
    """Malformed expression; ``position`` is the 0-based character offset."""

    def __init__(self, message: str, position: int, text: str = ""):
        self.position = position
        self.text = text
        super().__init__(f"{message} at position {position}")


class UnknownVariableError(ParseError):
    pass


_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>\*\*|[-+*/^(),]))"
)


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            start = pos + (len(text[pos:]) - len(text[pos:].lstrip()))
            raise ParseError(f"unexpected character {text[start]!r}", start, text)
        kind = m.lastgroup
        tokens.append((kind, m.group(kind), m.start(kind)))
        pos = m.end()
    tokens.append(("end", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str, m: int):
        self.text = text
        self.m = m
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, value: str):
        kind, val, pos = self.take()
        if val != value or kind == "end":
            found = "end of input" if kind == "end" else repr(val)
            raise ParseError(f"expected {value!r}, found {found}", pos, self.text)

    def parse(self) -> E.Expr:
        e = self.expr()
        kind, val, pos = self.peek()
        if kind != "end":
            raise ParseError(f"unexpected token {val!r}", pos, self.text)
        return e

    def expr(self):
        e = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            rhs = self.term()
            e = E.add(e, rhs) if op == "+" else E.add(e, E.neg(rhs))
        return e

    def term(self):
        e = self.unary()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.take()[1]
            rhs = self.unary()
            e = E.mul(e, rhs) if op == "*" else E.div(e, rhs)
        return e

    def unary(self):
        kind, val, _ = self.peek()
        if kind == "op" and val in ("+", "-"):
            self.take()
            inner = self.unary()
            return inner if val == "+" else E.neg(inner)
        return self.power()

    def power(self):
        base = self.primary()
        kind, val, _ = self.peek()
        if kind == "op" and val in ("^", "**"):
            self.take()
            return E.power(base, self.unary())
        return base

    def primary(self):
        kind, val, pos = self.take()
        if kind == "num":
            return E.Const(float(val))
        if kind == "op" and val == "(":
            e = self.expr()
            self.expect(")")
            return e
        if kind == "name":
            if val == "pi":
                return E.Const(math.pi)
            if val in ("exp", "sin", "cos"):
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return E.func(val, arg)
            if val == "pow":
                self.expect("(")
                a = self.expr()
                self.expect(",")
                b = self.expr()
                self.expect(")")
                return E.power(a, b)
            if val == "bump":
                self.expect("(")
                r = self.expr()
                self.expect(")")
                return bump_expr(r, self.m)
            mv = re.fullmatch(r"x(\d+)", val)
            if mv:
                k = int(mv.group(1))
                if 1 <= k <= self.m:
                    return E.Var(k - 1)
            raise UnknownVariableError(f"unknown identifier {val!r} (variables are x1..x{self.m})", pos, self.text)
        found = "end of input" if kind == "end" else repr(val)
        raise ParseError(f"unexpected {found}", pos, self.text)


def bump_expr(radius: E.Expr, m: int, center: Sequence[float] | None = None) -> E.Expr:
    """psi(1 - |x - center|^2 / r^2) over the first ``m`` variables."""
    sq = []
    for i in range(m):
        xi = E.Var(i) if center is None else E.add(E.Var(i), E.Const(-center[i]))
        sq.append(E.mul(xi, xi))
    r2 = E.mul(radius, radius)
    return E.flat(E.add(E.ONE, E.neg(E.div(E.add(*sq), r2))))


def parse_expr(text: str, m: int) -> E.Expr:
    """Parse ``text`` into an expression over x1..xm."""
    if m < 0:
        raise ValueError("ambient dimension must be nonnegative")
    return _Parser(text, m).parse()


@dataclass(frozen=True)
class ScalarField:
    """A parsed coefficient function with an optional declared support radius."""

    expr: E.Expr
    m: int
    text: str = ""
    support_radius: float | None = None
    _masked: E.Expr = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.support_radius is not None and self.support_radius < 0:
            raise ValueError("support radius must be nonnegative")
        e = self.expr
        if self.support_radius is not None:
            e = E.mask(e, [E.Var(i) for i in range(self.m)], self.support_radius)
        object.__setattr__(self, "_masked", e)

    @property
    def masked(self) -> E.Expr:
        """Expression with the declared support enforced exactly."""
        return self._masked

    def __call__(self, *coords):
        """Evaluate at a point given as m scalars or m broadcastable arrays."""
        if len(coords) == 1 and self.m != 1:
            coords = tuple(np.asarray(coords[0], dtype=float).T)
        if len(coords) != self.m:
            raise ValueError(f"expected {self.m} coordinates, got {len(coords)}")
        env = [np.asarray(c, dtype=float) for c in coords]
        out = E.evaluate(self._masked, env)
        out = np.broadcast_to(np.asarray(out, dtype=float), np.broadcast(*env).shape if env else ())
        if not np.all(np.isfinite(out)):
            raise E.EvaluationError(f"non-finite value of {self.text or self.expr}")
        return float(out) if out.ndim == 0 else np.array(out)


def parse_scalar_expr(text: str, m: int, support: float | None = None) -> ScalarField:
    """Parse ``text`` into a ScalarField; ``support`` declares a ball radius."""
    return ScalarField(parse_expr(text, m), m, text, support)
