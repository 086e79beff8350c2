"""Experiment runners producing CSV-ready rows and a JSON-ready summary.

Every runner is deterministic: rows come out in parameter order and numbers
are formatted with 17 significant digits, so identical inputs give
byte-identical files regardless of the thread count.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable

import numpy as np

from . import fixtures as F
from .currents import Current, SmoothFormCurrent
from .forms import DifferentialForm, wedge
from .intersection import (CONVERGED, DIVERGED, EpsSchedule, IntersectionResult, INTERSECTION_QUADRATURE,
                           commutativity_residual, i_eps, intersect, loglog_slope)
from .lebesgue import Plane, atom_diagnostic, density, polar
from .mollifier import Kernel, homotopy_residual, kernel_constants, r_eps, PROFILES
from .quadrature import QuadratureConfig

__all__ = ["RunConfig", "ExperimentResult", "format_value", "write_outputs", "run_spec", "reproduction_suite",
           "run_suite", "MOLLIFY_EPS", "HOMOTOPY_EPS"]

MOLLIFY_EPS = (0.4, 0.2, 0.1, 0.05)
HOMOTOPY_EPS = (0.4, 0.2, 0.1)


@dataclass(frozen=True)
class RunConfig:
    q: QuadratureConfig = QuadratureConfig()
    schedule: EpsSchedule = EpsSchedule()
    kernel: str = "bump-product"
    threads: int = 1
    method: str = "composition"
    # intersections get a looser outer tolerance unless the user asks otherwise
    intersection_q: QuadratureConfig | None = None

    def kernel_for(self, m: int) -> Kernel:
        return Kernel(m, self.kernel)

    @property
    def iq(self) -> QuadratureConfig:
        return self.intersection_q or INTERSECTION_QUADRATURE


@dataclass
class ExperimentResult:
    id: str
    kind: str
    header: list[str]
    rows: list[list[Any]]
    summary: dict[str, Any] = field(default_factory=dict)

    def csv_text(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.header)
        for row in self.rows:
            w.writerow([format_value(v) for v in row])
        return buf.getvalue()

    def json_text(self) -> str:
        body = {"id": self.id, "kind": self.kind, **_jsonable(self.summary)}
        return json.dumps(body, indent=2, sort_keys=True, allow_nan=True) + "\n"


def format_value(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    return obj


def write_outputs(result: ExperimentResult, out_dir: str | Path) -> tuple[Path, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    c, j = out / f"{result.id}.csv", out / f"{result.id}.json"
    c.write_text(result.csv_text())
    j.write_text(result.json_text())
    return c, j


# ---------------------------------------------------------------- runners


def run_evaluate(eid, T: Current, phi, cfg: RunConfig) -> ExperimentResult:
    v = T.evaluate(phi, cfg.q)
    return ExperimentResult(eid, "evaluate", ["experiment", "value"], [[eid, v]], {"value": v})


def run_mollify(eid, T: Current, phi, cfg: RunConfig, eps=MOLLIFY_EPS) -> ExperimentResult:
    """|r_eps T(phi) - T(phi)| along eps and the ratios between consecutive levels."""
    kernel = cfg.kernel_for(T.m)
    base = T.evaluate(phi, cfg.q)
    rows, errs = [], []
    for e in eps:
        v = r_eps(T, e, kernel, cfg.q).evaluate(phi, cfg.q)
        errs.append(abs(v - base))
        rows.append([eid, e, v, base, errs[-1]])
    ratios = [errs[k] / errs[k + 1] if errs[k + 1] > 0 else None for k in range(len(errs) - 1)]
    return ExperimentResult(eid, "mollify", ["experiment", "eps", "r_eps_T_phi", "T_phi", "error"], rows,
                            {"errors": errs, "ratios": ratios, "T_phi": base})


def run_homotopy(eid, T: Current, phi, cfg: RunConfig, eps=HOMOTOPY_EPS) -> ExperimentResult:
    kernel = cfg.kernel_for(T.m)
    res = [homotopy_residual(T, phi, e, cfg.q, kernel) for e in eps]
    rows = [[eid, e, r] for e, r in zip(eps, res)]
    return ExperimentResult(eid, "homotopy", ["experiment", "eps", "residual"], rows,
                            {"residuals": res, "grid": cfg.q.n})


def run_density(eid, T, xi, plane: Plane, anchors, cfg: RunConfig, radii=None) -> ExperimentResult:
    rows, values = [], []
    kw = {} if radii is None else {"radii": radii}
    for a in anchors:
        est = density(T, xi, plane, a, q=_lebesgue_q(cfg), **kw)
        for r, ratio in zip(est.radii, est.ratios):
            rows.append([eid, *est.anchor, r, ratio])
        values.append({"anchor": est.anchor, "value": est.value, "converged": est.converged, "cutoff": est.cutoff})
    header = ["experiment"] + [f"a{k}" for k in plane.coords] + ["r", "ratio"]
    return ExperimentResult(eid, "density", header, rows, {"densities": values})


def run_polar(eid, T, xi, plane, anchor, direction, cfg: RunConfig, lambdas=None, radii=None) -> ExperimentResult:
    kw = {}
    if lambdas is not None:
        kw["lambdas"] = lambdas
    if radii is not None:
        kw["radii"] = radii
    est = polar(T, xi, plane, anchor, direction, q=_lebesgue_q(cfg), threads=cfg.threads, **kw)
    rows = [[eid, lam, v] for lam, v in zip(est.lambdas, est.values)]
    return ExperimentResult(eid, "polar", ["experiment", "lambda", "value"], rows, est.to_dict())


def run_atom(eid, T, xi, plane, anchor, cfg: RunConfig, radii=None) -> ExperimentResult:
    kw = {} if radii is None else {"radii": radii}
    v = atom_diagnostic(T, xi, plane, anchor, q=_lebesgue_q(cfg), **kw)
    rows = [[eid, r, mass] for r, mass in zip(v.radii, v.masses)]
    return ExperimentResult(eid, "atom", ["experiment", "r", "mass"], rows, v.to_dict())


def _lebesgue_q(cfg: RunConfig):
    from .lebesgue import LEBESGUE_QUADRATURE
    return LEBESGUE_QUADRATURE if cfg.q == QuadratureConfig() else cfg.q


def _intersection_rows(eid, res: IntersectionResult) -> list[list[Any]]:
    rows = []
    for k, (e, v) in enumerate(zip(res.eps, res.values)):
        diff = None if k == 0 else v - res.values[k - 1]
        slope = loglog_slope(res.eps[:k + 1], res.values[:k + 1])[0] if k >= 2 else None
        if slope is not None and not math.isfinite(slope):
            slope = None
        rows.append([eid, e, v, diff, slope, res.verdict])
    return rows


INTERSECT_HEADER = ["experiment", "eps", "I_eps", "diff", "slope_so_far", "verdict"]


def run_intersect(eid, T1, T2, phi, cfg: RunConfig, kind="intersect", extra: dict | None = None) -> ExperimentResult:
    kernel = cfg.kernel_for(T1.m)
    res = intersect(T1, T2, phi, cfg.schedule, cfg.iq, kernel, cfg.threads, cfg.method)
    summary = res.to_dict()
    summary["kernel"] = cfg.kernel
    if extra:
        summary.update(extra)
    return ExperimentResult(eid, kind, INTERSECT_HEADER, _intersection_rows(eid, res), summary)


def run_commutativity(eid, T1, T2, phi, cfg: RunConfig) -> ExperimentResult:
    kernel = cfg.kernel_for(T1.m)
    eps = cfg.schedule.values()
    i, j = T1.dim, T2.dim
    sign = (-1) ** (i * j)
    ab = _levels(lambda e: i_eps(T1, T2, phi, e, cfg.iq, kernel, cfg.method), eps, cfg.threads)
    ba = _levels(lambda e: i_eps(T2, T1, phi, e, cfg.iq, kernel, cfg.method), eps, cfg.threads)
    res = [abs(a - sign * b) for a, b in zip(ab, ba)]
    rows = [[eid, e, a, b, r] for e, a, b, r in zip(eps, ab, ba, res)]
    return ExperimentResult(eid, "commutativity", ["experiment", "eps", "I_12", "I_21", "residual"], rows,
                            {"residuals": res, "sign": sign, "finest": res[-1]})


def _levels(fn, eps, threads):
    if threads > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(fn, eps))
    return [fn(e) for e in eps]


def run_divergence(eid, cfg: RunConfig, m: int = 2, p: int = 1) -> ExperimentResult:
    P = F.divergence(int(m), int(p))
    f0 = kernel_constants(PROFILES[cfg.kernel]).f1_zero
    out = run_intersect(eid, P.T1, P.T2, P.phi, cfg, kind="reproduce-ex46",
                        extra={"m": int(m), "p": int(p), "f1_zero": f0, "expected_slope": -(int(m) - int(p))})
    eps, vals = out.summary["eps"], out.summary["values"]
    out.summary["scaled_finest"] = abs(vals[-1]) * eps[-1] ** (int(m) - int(p))
    return out


def run_kronecker(eid, cfg: RunConfig, weight: float = 1.0) -> ExperimentResult:
    P = F.kronecker(float(weight))
    return run_intersect(eid, P.T1, P.T2, P.phi, cfg, kind="reproduce-kronecker", extra={"weight": float(weight)})


# ---------------------------------------------------------------- scene dispatch


def run_spec(scene, spec, cfg: RunConfig) -> ExperimentResult:
    """Run one ExperimentSpec against a loaded Scene."""
    ops = spec.operands
    cur = lambda k: scene.currents[ops[k]]
    form = lambda k: scene.forms[ops[k]] if k in ops else None
    plane = lambda: Plane(tuple(ops["plane"]), scene.m)
    kind = spec.kind
    if kind == "evaluate":
        return run_evaluate(spec.id, cur("T"), form("phi"), cfg)
    if kind == "mollify":
        return run_mollify(spec.id, cur("T"), form("phi"), cfg, tuple(ops.get("eps", MOLLIFY_EPS)))
    if kind == "homotopy":
        return run_homotopy(spec.id, cur("T"), form("phi"), cfg, tuple(ops.get("eps", HOMOTOPY_EPS)))
    if kind == "density":
        return run_density(spec.id, cur("T"), form("xi"), plane(), ops["anchors"], cfg, ops.get("radii"))
    if kind == "polar":
        return run_polar(spec.id, cur("T"), form("xi"), plane(), ops["anchor"], ops["direction"], cfg,
                         ops.get("lambdas"), ops.get("radii"))
    if kind == "atom":
        return run_atom(spec.id, cur("T"), form("xi"), plane(), ops["anchor"], cfg, ops.get("radii"))
    if kind == "intersect":
        return run_intersect(spec.id, cur("T1"), cur("T2"), form("phi"), _with_method(cfg, ops))
    if kind == "commutativity":
        return run_commutativity(spec.id, cur("T1"), cur("T2"), form("phi"), _with_method(cfg, ops))
    if kind == "reproduce-ex46":
        return run_divergence(spec.id, cfg, ops.get("m", 2), ops.get("p", 1))
    if kind == "reproduce-kronecker":
        return run_kronecker(spec.id, cfg, ops.get("weight", 1.0))
    raise ValueError(f"unknown experiment kind {kind!r}")


def _with_method(cfg: RunConfig, ops) -> RunConfig:
    from dataclasses import replace
    return replace(cfg, method=ops["method"]) if "method" in ops else cfg


# ---------------------------------------------------------------- reproduction suite


def reproduction_suite() -> list[tuple[str, Callable[[RunConfig], ExperimentResult]]]:
    """The built-in reproduction experiments, in a fixed order."""
    suite: list[tuple[str, Callable[[RunConfig], ExperimentResult]]] = []
    for m, p in ((2, 1), (3, 1), (3, 2)):
        suite.append((f"divergence-{m}-{p}", lambda cfg, m=m, p=p: run_divergence(f"divergence-{m}-{p}", cfg, m, p)))
    suite.append(("kronecker", lambda cfg: run_kronecker("kronecker", cfg, 1.0)))
    suite.append(("kronecker-weighted", lambda cfg: run_kronecker("kronecker-weighted", cfg, 2.0)))

    def sq_seg(cfg, kind):
        P = F.square_segment()
        if kind == "commutativity":
            return run_commutativity("square-segment-commutativity", P.T1, P.T2, P.phi, cfg)
        return run_intersect("square-segment", P.T1, P.T2, P.phi, cfg)

    suite.append(("square-segment", lambda cfg: sq_seg(cfg, "intersect")))
    suite.append(("square-segment-commutativity", lambda cfg: sq_seg(cfg, "commutativity")))

    def kron_comm(cfg):
        P = F.kronecker()
        return run_commutativity("kronecker-commutativity", P.T1, P.T2, P.phi, cfg)

    suite.append(("kronecker-commutativity", kron_comm))

    for tname in ("unit-square", "triangle", "diagonal-segment"):
        for oname in F.SMOOTH_OMEGAS:
            eid = f"classical-{tname}-{oname}"

            def classical(cfg, tname=tname, oname=oname, eid=eid):
                T, om = F.get(tname), F.get(oname)
                phi = F.classical_test_form(T.dim)
                oracle = T.evaluate(wedge(om, phi), cfg.q)
                return run_intersect(eid, T, SmoothFormCurrent(om), phi, cfg, extra={"oracle": oracle})

            suite.append((eid, classical))

    for name in ("homotopy-segment", "homotopy-dirac"):
        suite.append((name, lambda cfg, name=name: run_homotopy(name, F.get(name).T, F.get(name).phi, cfg)))

    for tname, phi in MOLLIFY_FIXTURES.items():
        eid = f"mollify-{tname}"
        suite.append((eid, lambda cfg, tname=tname, eid=eid: run_mollify(eid, F.get(tname), MOLLIFY_FIXTURES[tname](), cfg)))

    for name, anchors in (("long-segment", [[1.0], [3.0]]), ("smooth-band", [[0.4]])):
        eid = f"density-{name}"
        suite.append((eid, lambda cfg, name=name, anchors=anchors, eid=eid:
                      run_density(eid, F.get(name).T, None, F.get(name).plane, anchors, cfg)))
    for a, x in (([0.5], [1.0]), ([-1.0], [1.0]), ([0.0], [1.0]), ([0.0], [-1.0])):
        eid = f"polar-unit-segment-a{a[0]:g}-x{x[0]:g}"
        suite.append((eid, lambda cfg, a=a, x=x, eid=eid:
                      run_polar(eid, F.get("unit-segment").T, None, F.get("unit-segment").plane, a, x, cfg)))
    suite.append(("atom-dirac-origin", lambda cfg: run_atom("atom-dirac-origin", F.get("dirac-origin").T, None,
                                                            F.get("dirac-origin").plane, [0.0], cfg)))
    return suite


def _mollify_form_2() -> DifferentialForm:
    from .forms import form_from_terms
    return form_from_terms(2, 2, [((1, 2), "exp(x1)*x2^2")])


def _mollify_form_1() -> DifferentialForm:
    from .forms import form_from_terms
    return form_from_terms(2, 1, [((1,), "exp(x1)*x2"), ((2,), "sin(x1 + x2)")])


# non-harmonic test forms, so the O(eps^2) term of r_eps T(phi) - T(phi) is present
MOLLIFY_FIXTURES = {
    "unit-square": _mollify_form_2,
    "triangle": _mollify_form_2,
    "diagonal-segment": _mollify_form_1,
}


def run_suite(cfg: RunConfig, out_dir: str | Path | None = None, only: list[str] | None = None,
              progress: Callable[[str], None] | None = None) -> list[ExperimentResult]:
    results = []
    for eid, fn in reproduction_suite():
        if only is not None and eid not in only:
            continue
        if progress:
            progress(eid)
        res = fn(cfg)
        results.append(res)
        if out_dir is not None:
            write_outputs(res, out_dir)
    return results
