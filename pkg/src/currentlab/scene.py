"""Scene files: named currents, forms, kernels, defaults and experiments in JSON (schema version 1).

Validation collects every problem before failing; each message carries the
JSON path of the offending entry.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any

import numpy as np

from .currents import (BoundaryCurrent, Cell, Current, Dirac, PolyChain, SmoothFormCurrent, SumCurrent,
                       WedgeSmoothCurrent)
from .forms import DifferentialForm, form_from_terms
from .intersection import EpsSchedule
from .lebesgue import Plane
from .mollifier import PROFILES
from .parser import ParseError
from .quadrature import QuadratureConfig

__all__ = ["SceneError", "Scene", "ExperimentSpec", "EXPERIMENT_KINDS", "load_scene", "parse_scene",
           "SCHEMA_VERSION", "quadrature_from", "schedule_from"]

SCHEMA_VERSION = 1

# kind -> (required operands, optional operands)
EXPERIMENT_KINDS: dict[str, tuple[tuple[str, ...], tuple[str, ...]]] = {
    "evaluate": (("T", "phi"), ()),
    "mollify": (("T", "phi"), ("eps",)),
    "homotopy": (("T", "phi"), ("eps",)),
    "density": (("T", "plane", "anchors"), ("xi", "radii")),
    "polar": (("T", "plane", "anchor", "direction"), ("xi", "lambdas", "radii")),
    "atom": (("T", "plane", "anchor"), ("xi", "radii")),
    "intersect": (("T1", "T2", "phi"), ("method",)),
    "commutativity": (("T1", "T2", "phi"), ("method",)),
    "reproduce-ex46": ((), ("m", "p")),
    "reproduce-kronecker": ((), ("weight",)),
}
CURRENT_OPERANDS = ("T", "T1", "T2")
FORM_OPERANDS = ("phi", "xi")
OVERRIDES = ("eps0", "rho", "levels", "grid", "tol", "kernel", "expect")


class SceneError(ValueError):
    """Invalid scene; ``problems`` lists every violation found."""

    def __init__(self, problems: list[str]):
        self.problems = list(problems)
        super().__init__("invalid scene:\n" + "\n".join(f"  - {p}" for p in self.problems))


@dataclass
class ExperimentSpec:
    id: str
    kind: str
    operands: dict[str, Any] = field(default_factory=dict)
    overrides: dict[str, Any] = field(default_factory=dict)


@dataclass
class Scene:
    version: int
    m: int
    currents: dict[str, Current]
    forms: dict[str, DifferentialForm]
    kernels: dict[str, str]
    quadrature: QuadratureConfig
    schedule: EpsSchedule
    kernel: str
    experiments: dict[str, ExperimentSpec]


def quadrature_from(base: QuadratureConfig, grid: int | None = None, tol: float | None = None) -> QuadratureConfig:
    """``grid`` sets the Gauss order; ``tol`` sets the relative tolerance (absolute is tol/10)."""
    q = base
    if grid is not None:
        q = replace(q, n=int(grid))
    if tol is not None:
        q = replace(q, rtol=float(tol), tol=float(tol) / 10)
    return q


def schedule_from(base: EpsSchedule, eps0=None, rho=None, levels=None) -> EpsSchedule:
    return EpsSchedule(base.eps0 if eps0 is None else float(eps0), base.rho if rho is None else float(rho),
                       base.levels if levels is None else int(levels))


def load_scene(path: str | Path) -> Scene:
    text = Path(path).read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SceneError([f"{path}: JSON parse error at line {exc.lineno}, column {exc.colno}: {exc.msg}"]) from exc
    return parse_scene(data)


class _Checker:
    def __init__(self):
        self.problems: list[str] = []

    def fail(self, where: str, msg: str):
        self.problems.append(f"{where}: {msg}")

    def number(self, where, v, positive=False):
        if isinstance(v, bool) or not isinstance(v, (int, float)) or not np.isfinite(v):
            self.fail(where, f"expected a number, got {v!r}")
            return None
        if positive and v <= 0:
            self.fail(where, f"must be positive, got {v!r}")
            return None
        return float(v)

    def points(self, where, v, m, count=None):
        arr = None
        try:
            arr = np.asarray(v, dtype=float)
        except (TypeError, ValueError):
            pass
        if arr is None or arr.ndim != 2 or not np.all(np.isfinite(arr)):
            self.fail(where, "expected a list of coordinate lists")
            return None
        if arr.shape[1] != m:
            self.fail(where, f"dimension mismatch: points have {arr.shape[1]} coordinates but the scene has m = {m}")
            return None
        if count is not None and arr.shape[0] != count:
            self.fail(where, f"expected {count} points, got {arr.shape[0]}")
            return None
        return arr

    def point(self, where, v, m):
        arr = self.points(where, [v], m) if isinstance(v, list) else None
        if arr is None:
            if not isinstance(v, list):
                self.fail(where, "expected a coordinate list")
            return None
        return arr[0]


def parse_scene(data: Any) -> Scene:
    ck = _Checker()
    if not isinstance(data, dict):
        raise SceneError(["$: top level must be a JSON object"])
    allowed = {"version", "m", "currents", "forms", "kernels", "defaults", "experiments"}
    for k in data:
        if k not in allowed:
            ck.fail(f"$.{k}", "unknown key")
    version = data.get("version")
    if version != SCHEMA_VERSION:
        ck.fail("$.version", f"unsupported schema version {version!r}; expected {SCHEMA_VERSION}")
    m = data.get("m")
    if isinstance(m, bool) or not isinstance(m, int) or m < 1:
        ck.fail("$.m", f"ambient dimension must be a positive integer, got {m!r}")
        raise SceneError(ck.problems)

    forms = _parse_forms(ck, data.get("forms", {}), m)
    kernels = _parse_kernels(ck, data.get("kernels", {}))
    currents = _parse_currents(ck, data.get("currents", {}), m, forms)
    q, sched, kernel = _parse_defaults(ck, data.get("defaults", {}), kernels)
    experiments = _parse_experiments(ck, data.get("experiments", []), m, currents, forms, kernels)
    if ck.problems:
        raise SceneError(ck.problems)
    return Scene(SCHEMA_VERSION, m, currents, forms, kernels, q, sched, kernel, experiments)


def _parse_forms(ck: _Checker, raw, m) -> dict[str, DifferentialForm]:
    out = {}
    if not isinstance(raw, dict):
        ck.fail("$.forms", "must be an object mapping names to forms")
        return out
    for name, spec in raw.items():
        where = f"$.forms.{name}"
        if not isinstance(spec, dict):
            ck.fail(where, "must be an object")
            continue
        fm = spec.get("m", m)
        if fm != m:
            ck.fail(where, f"dimension mismatch: form declares m = {fm} but the scene has m = {m}")
            continue
        degree = spec.get("degree")
        if isinstance(degree, bool) or not isinstance(degree, int) or not 0 <= degree <= m:
            ck.fail(where + ".degree", f"degree must be an integer in 0..{m}, got {degree!r}")
            continue
        terms = spec.get("terms")
        if not isinstance(terms, list):
            ck.fail(where + ".terms", "must be a list of {index, expr}")
            continue
        support = spec.get("support")
        if support is not None:
            support = ck.number(where + ".support", support, positive=True)
            if support is None:
                continue
        pairs, ok = [], True
        for i, t in enumerate(terms):
            tw = f"{where}.terms[{i}]"
            if not isinstance(t, dict) or "expr" not in t:
                ck.fail(tw, "must be an object with 'index' and 'expr'")
                ok = False
                continue
            idx = t.get("index", [])
            if not isinstance(idx, list) or len(idx) != degree or \
                    any(isinstance(j, bool) or not isinstance(j, int) or not 1 <= j <= m for j in idx):
                ck.fail(tw + ".index", f"must list {degree} coordinate indices in 1..{m}, got {idx!r}")
                ok = False
                continue
            expr = t["expr"]
            if not isinstance(expr, (str, int, float)) or isinstance(expr, bool):
                ck.fail(tw + ".expr", "must be an expression string or a number")
                ok = False
                continue
            pairs.append((tuple(idx), expr))
        if not ok:
            continue
        try:
            out[name] = form_from_terms(m, degree, pairs, support=support)
        except ParseError as exc:
            ck.fail(where, f"expression error at character {exc.position}: {exc}")
        except ValueError as exc:
            ck.fail(where, str(exc))
    return out


def _parse_kernels(ck: _Checker, raw) -> dict[str, str]:
    out = {}
    if not isinstance(raw, dict):
        ck.fail("$.kernels", "must be an object mapping names to kernels")
        return out
    for name, spec in raw.items():
        prof = spec.get("profile") if isinstance(spec, dict) else None
        if prof not in PROFILES:
            ck.fail(f"$.kernels.{name}.profile", f"unknown profile {prof!r}; choose from {sorted(PROFILES)}")
            continue
        out[name] = prof
    return out


def _parse_defaults(ck: _Checker, raw, kernels):
    q, sched, kernel = QuadratureConfig(), EpsSchedule(), "bump-product"
    if not isinstance(raw, dict):
        ck.fail("$.defaults", "must be an object")
        return q, sched, kernel
    qd = raw.get("quadrature", {})
    if isinstance(qd, dict):
        try:
            q = QuadratureConfig(**{k: v for k, v in qd.items()})
        except (TypeError, ValueError) as exc:
            ck.fail("$.defaults.quadrature", str(exc))
    else:
        ck.fail("$.defaults.quadrature", "must be an object")
    sd = raw.get("schedule", {})
    if isinstance(sd, dict):
        try:
            sched = EpsSchedule(**{k: v for k, v in sd.items()})
        except (TypeError, ValueError) as exc:
            ck.fail("$.defaults.schedule", str(exc))
    else:
        ck.fail("$.defaults.schedule", "must be an object")
    if "kernel" in raw:
        kernel = _kernel_name(ck, "$.defaults.kernel", raw["kernel"], kernels) or kernel
    return q, sched, kernel


def _kernel_name(ck, where, v, kernels):
    if v in kernels:
        return kernels[v]
    if v in PROFILES:
        return v
    ck.fail(where, f"unresolved kernel {v!r}")
    return None


_CURRENT_KEYS = {
    "simplex": {"type", "vertices", "weight", "orientation"},
    "cube": {"type", "origin", "edges", "weight", "orientation"},
    "chain": {"type", "cells"},
    "dirac": {"type", "point", "covector", "weight"},
    "smooth": {"type", "form"},
    "boundary": {"type", "of"},
    "sum": {"type", "terms"},
    "wedge": {"type", "current", "form"},
}


def _refs(spec) -> list[str]:
    t = spec.get("type")
    if t == "boundary":
        return [spec.get("of")]
    if t == "wedge":
        return [spec.get("current")]
    if t == "sum" and isinstance(spec.get("terms"), list):
        return [s.get("current") for s in spec["terms"] if isinstance(s, dict)]
    return []


def _parse_currents(ck: _Checker, raw, m, forms) -> dict[str, Current]:
    out: dict[str, Current] = {}
    if not isinstance(raw, dict):
        ck.fail("$.currents", "must be an object mapping names to currents")
        return out
    state: dict[str, str] = {}

    def build(name, stack):
        if name in out:
            return out[name]
        if state.get(name) == "failed":
            return None
        if name in stack:
            ck.fail(f"$.currents.{name}", "circular reference: " + " -> ".join(stack + [name]))
            state[name] = "failed"
            return None
        spec = raw[name]
        where = f"$.currents.{name}"
        deps = {}
        for ref in _refs(spec) if isinstance(spec, dict) else []:
            if ref not in raw:
                ck.fail(where, f"unresolved current reference {ref!r}")
                state[name] = "failed"
                return None
            deps[ref] = build(ref, stack + [name])
            if deps[ref] is None:
                state[name] = "failed"
                return None
        try:
            T = _make_current(ck, where, spec, m, forms, deps)
        except (ValueError, TypeError) as exc:
            ck.fail(where, str(exc))
            T = None
        if T is None:
            state[name] = "failed"
        else:
            out[name] = T
        return T

    for name in raw:
        build(name, [])
    return out


def _make_current(ck: _Checker, where, spec, m, forms, deps) -> Current | None:
    if not isinstance(spec, dict):
        ck.fail(where, "must be an object")
        return None
    t = spec.get("type")
    if t not in _CURRENT_KEYS:
        ck.fail(where + ".type", f"unknown current type {t!r}; choose from {sorted(_CURRENT_KEYS)}")
        return None
    extra = set(spec) - _CURRENT_KEYS[t]
    if extra:
        ck.fail(where, f"unknown keys {sorted(extra)}")
        return None
    weight = ck.number(where + ".weight", spec.get("weight", 1.0))
    if weight is None:
        return None
    orient = spec.get("orientation", 1)
    if orient not in (1, -1):
        ck.fail(where + ".orientation", "must be 1 or -1")
        return None
    if t == "simplex":
        V = ck.points(where + ".vertices", spec.get("vertices"), m)
        return None if V is None else PolyChain([(weight, Cell.simplex(V, orient))])
    if t == "cube":
        o = ck.point(where + ".origin", spec.get("origin"), m)
        edges = spec.get("edges")
        Ed = ck.points(where + ".edges", edges, m) if edges else np.zeros((0, m))
        if o is None or Ed is None:
            return None
        return PolyChain([(weight, Cell.cube(o, Ed, orient))])
    if t == "chain":
        cells = spec.get("cells")
        if not isinstance(cells, list) or not cells:
            ck.fail(where + ".cells", "must be a non-empty list of simplex/cube entries")
            return None
        parts = []
        for i, c in enumerate(cells):
            if not isinstance(c, dict) or c.get("type") not in ("simplex", "cube"):
                ck.fail(f"{where}.cells[{i}]", "each cell must be a simplex or cube entry")
                return None
            sub = _make_current(ck, f"{where}.cells[{i}]", c, m, forms, {})
            if sub is None:
                return None
            parts.extend(sub.cells)
        return PolyChain(parts)
    if t == "dirac":
        p = ck.point(where + ".point", spec.get("point"), m)
        cov = spec.get("covector", [])
        if not isinstance(cov, list) or any(isinstance(j, bool) or not isinstance(j, int) or not 1 <= j <= m
                                            for j in cov):
            ck.fail(where + ".covector", f"must list indices in 1..{m}")
            return None
        return None if p is None else Dirac(p, tuple(cov), weight)
    if t == "smooth":
        f = spec.get("form")
        if f not in forms:
            ck.fail(where + ".form", f"unresolved form reference {f!r}")
            return None
        return SmoothFormCurrent(forms[f])
    if t == "boundary":
        return BoundaryCurrent(deps[spec["of"]]) if not isinstance(deps[spec["of"]], PolyChain) \
            else deps[spec["of"]].boundary()
    if t == "wedge":
        f = spec.get("form")
        if f not in forms:
            ck.fail(where + ".form", f"unresolved form reference {f!r}")
            return None
        return WedgeSmoothCurrent(deps[spec["current"]], forms[f])
    if t == "sum":
        terms = spec.get("terms")
        if not isinstance(terms, list) or not terms:
            ck.fail(where + ".terms", "must be a non-empty list of {current, coef}")
            return None
        parts = []
        for i, s in enumerate(terms):
            c = ck.number(f"{where}.terms[{i}].coef", s.get("coef", 1.0))
            if c is None:
                return None
            parts.append((c, deps[s["current"]]))
        return SumCurrent(parts)
    return None


def _parse_experiments(ck: _Checker, raw, m, currents, forms, kernels) -> dict[str, ExperimentSpec]:
    out: dict[str, ExperimentSpec] = {}
    if not isinstance(raw, list):
        ck.fail("$.experiments", "must be a list")
        return out
    for i, spec in enumerate(raw):
        where = f"$.experiments[{i}]"
        if not isinstance(spec, dict):
            ck.fail(where, "must be an object")
            continue
        eid, kind = spec.get("id"), spec.get("kind")
        if not isinstance(eid, str) or not eid:
            ck.fail(where + ".id", "missing experiment id")
            continue
        if eid in out:
            ck.fail(where + ".id", f"duplicate experiment id {eid!r}")
            continue
        if kind not in EXPERIMENT_KINDS:
            ck.fail(where + ".kind", f"unknown experiment kind {kind!r}; choose from {sorted(EXPERIMENT_KINDS)}")
            continue
        required, optional = EXPERIMENT_KINDS[kind]
        operands, overrides, ok = {}, {}, True
        for key, val in spec.items():
            if key in ("id", "kind"):
                continue
            if key in OVERRIDES:
                overrides[key] = val
            elif key in required or key in optional:
                operands[key] = val
            else:
                ck.fail(f"{where}.{key}", f"not an operand of {kind!r} experiments")
                ok = False
        for key in required:
            if key not in operands:
                ck.fail(where, f"{kind!r} experiment needs operand {key!r}")
                ok = False
        for key in CURRENT_OPERANDS:
            if key in operands and operands[key] not in currents:
                ck.fail(f"{where}.{key}", f"unresolved current reference {operands[key]!r}")
                ok = False
        for key in FORM_OPERANDS:
            if key in operands and operands[key] not in forms:
                ck.fail(f"{where}.{key}", f"unresolved form reference {operands[key]!r}")
                ok = False
        if "plane" in operands:
            try:
                Plane(tuple(operands["plane"]), m)
            except (TypeError, ValueError) as exc:
                ck.fail(f"{where}.plane", str(exc))
                ok = False
        if "kernel" in overrides and _kernel_name(ck, f"{where}.kernel", overrides["kernel"], kernels) is None:
            ok = False
        if "expect" in overrides and overrides["expect"] not in ("converged", "diverged", None):
            ck.fail(f"{where}.expect", "must be 'converged' or 'diverged'")
            ok = False
        if ok:
            out[eid] = ExperimentSpec(eid, kind, operands, overrides)
    return out
