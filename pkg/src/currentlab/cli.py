"""Command-line front end: run scene experiments or the built-in reproduction suite."""

from __future__ import annotations

import argparse
import json
import sys

from . import fixtures as F
from .experiments import ExperimentResult, RunConfig, reproduction_suite, run_spec, write_outputs
from .intersection import DIVERGED, EpsSchedule, INTERSECTION_QUADRATURE
from .mollifier import PROFILES
from .quadrature import QuadratureConfig
from .scene import SceneError, load_scene, quadrature_from, schedule_from

EXIT_OK, EXIT_ERROR, EXIT_DIVERGED = 0, 1, 2


def _add_numeric_flags(p: argparse.ArgumentParser):
    g = p.add_argument_group("numerics (override scene defaults)")
    g.add_argument("--eps0", type=float, help="largest eps of the schedule")
    g.add_argument("--rho", type=float, help="ratio between consecutive eps levels, in (0, 1)")
    g.add_argument("--levels", type=int, help="number of eps levels")
    g.add_argument("--grid", type=int, help="Gauss points per axis per cell")
    g.add_argument("--tol", type=float, help="relative quadrature tolerance (absolute is tol/10)")
    g.add_argument("--threads", type=int, default=1, help="worker threads for eps levels and sweeps")
    g.add_argument("--kernel", choices=sorted(PROFILES), help="mollifier profile")
    g.add_argument("--method", choices=("composition", "product"), help="route used for I_eps")
    g.add_argument("--expect-convergence", action="store_true",
                   help="exit with status 2 if an intersection verdict is DIVERGED")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="currentlab", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run experiments from a scene file")
    run.add_argument("--scene", required=True, help="scene JSON file")
    run.add_argument("--experiment", action="append", help="experiment id (repeatable; default: all)")
    run.add_argument("--out", required=True, help="directory receiving <id>.csv and <id>.json")
    _add_numeric_flags(run)

    rep = sub.add_parser("reproduce", help="run the built-in reproduction suite")
    rep.add_argument("--experiment", action="append", help="suite entry (repeatable; default: all)")
    rep.add_argument("--out", required=True, help="directory receiving <id>.csv and <id>.json")
    rep.add_argument("--list", action="store_true", help="print the suite entries and exit")
    _add_numeric_flags(rep)

    lf = sub.add_parser("list-fixtures", help="print the built-in fixtures")
    lf.add_argument("--group", choices=sorted(F.GROUPS), help="only fixtures of this group")
    lf.add_argument("--json", action="store_true", help="machine-readable output")
    return parser


def _config(args, q: QuadratureConfig, schedule: EpsSchedule, kernel: str, overrides: dict | None = None,
            kernels: dict | None = None) -> RunConfig:
    """Scene defaults, then experiment overrides, then command-line flags."""
    ov = overrides or {}
    grid = args.grid if args.grid is not None else ov.get("grid")
    tol = args.tol if args.tol is not None else ov.get("tol")
    sched = schedule_from(schedule, ov.get("eps0"), ov.get("rho"), ov.get("levels"))
    sched = schedule_from(sched, args.eps0, args.rho, args.levels)
    if "kernel" in ov:
        kernel = (kernels or {}).get(ov["kernel"], ov["kernel"])
    if args.kernel is not None:
        kernel = args.kernel
    iq = None
    if grid is not None or tol is not None:
        iq = quadrature_from(INTERSECTION_QUADRATURE, grid, tol)
    return RunConfig(q=quadrature_from(q, grid, tol), schedule=sched, kernel=kernel,
                     threads=max(1, args.threads), method=args.method or "composition", intersection_q=iq)


def _report(res: ExperimentResult, out) -> str:
    verdict = res.summary.get("verdict")
    tail = f" verdict={verdict}" if verdict else ""
    if res.summary.get("limit") is not None:
        tail += f" limit={res.summary['limit']:.10g}"
    if verdict == DIVERGED and res.summary.get("slope") is not None:
        tail += f" slope={res.summary['slope']:.4f}"
    return f"{res.id}: {res.kind} rows={len(res.rows)}{tail} -> {out}"


def _expects(args, ov: dict) -> bool:
    return args.expect_convergence or ov.get("expect") == "converged"


def cmd_run(args) -> int:
    scene = load_scene(args.scene)
    ids = args.experiment or list(scene.experiments)
    missing = [e for e in ids if e not in scene.experiments]
    if missing:
        raise SceneError([f"unknown experiment id {e!r}" for e in missing])
    status = EXIT_OK
    for eid in ids:
        spec = scene.experiments[eid]
        cfg = _config(args, scene.quadrature, scene.schedule, scene.kernel, spec.overrides, scene.kernels)
        res = run_spec(scene, spec, cfg)
        write_outputs(res, args.out)
        print(_report(res, args.out))
        if res.summary.get("verdict") == DIVERGED and _expects(args, spec.overrides):
            status = EXIT_DIVERGED
    return status


def cmd_reproduce(args) -> int:
    suite = reproduction_suite()
    if args.list:
        for eid, _ in suite:
            print(eid)
        return EXIT_OK
    names = [eid for eid, _ in suite]
    if args.experiment:
        unknown = [e for e in args.experiment if e not in names]
        if unknown:
            raise KeyError(f"unknown suite entries {unknown}; see reproduce --list")
    cfg = _config(args, QuadratureConfig(), EpsSchedule(), "bump-product")
    status = EXIT_OK
    for eid, fn in suite:
        if args.experiment and eid not in args.experiment:
            continue
        res = fn(cfg)
        write_outputs(res, args.out)
        print(_report(res, args.out))
        # the divergence reproductions are expected to diverge
        if args.expect_convergence and res.summary.get("verdict") == DIVERGED and not eid.startswith("divergence"):
            status = EXIT_DIVERGED
    return status


def cmd_list_fixtures(args) -> int:
    items = F.catalog(args.group)
    if args.json:
        body = {"groups": F.GROUPS if args.group is None else {args.group: F.GROUPS[args.group]},
                "fixtures": [f.to_dict() for f in items]}
        print(json.dumps(body, indent=2))
        return EXIT_OK
    width = max(len(f.name) for f in items)
    for f in items:
        print(f"{f.name:<{width}}  {f.group:<10}  {f.kind:<12}  {f.summary}")
    return EXIT_OK


COMMANDS = {"run": cmd_run, "reproduce": cmd_reproduce, "list-fixtures": cmd_list_fixtures}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except SceneError as exc:
        print(f"error: {exc}", file=sys.stderr)
    except (OSError, KeyError, ValueError, ArithmeticError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"error: {msg}", file=sys.stderr)
    return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
