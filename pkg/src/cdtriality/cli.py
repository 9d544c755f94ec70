"""Command-line frontend: solve, examples, grid, sensors, perturb."""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .applications import (CATALOG_IDS, NetworkError, SensorNetwork, build_sensor_instance,
                           ex4_schedule, example_catalog)
from .grid import GridSpecError, contour_svg, coordinate_names, evaluate_grid, parse_fix, parse_range
from .perturbation import PerturbationSchedule, ScheduleError, homotopy_solve
from .problem import InstanceFormatError, ProblemInstance
from .report import (EXIT_CERTIFIED, EXIT_INPUT_ERROR, EXIT_NO_CERTIFICATE, clean_json, dumps,
                     solve_instance)
from .solver import InvalidInstanceError, SolverOptions, solve_plus


EXIT_REGRESSION_FAIL = 4


class InputError(Exception):
    pass


def load_instance_file(path: str) -> tuple[ProblemInstance, dict, dict | None]:
    """Instance plus the optional "solver" and "perturbation" objects of the same document."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: invalid JSON ({exc})") from exc
    if not isinstance(doc, dict):
        raise InputError(f"{path}: instance document must be a JSON object")
    try:
        instance = ProblemInstance.from_dict(doc)
    except InstanceFormatError as exc:
        raise InputError(f"{path}: {exc}") from exc
    return instance, doc.get("solver") or {}, doc.get("perturbation")


def instance_document(instance: ProblemInstance, schedule: PerturbationSchedule | None = None) -> dict:
    doc = instance.to_dict()
    if schedule is not None:
        doc["perturbation"] = schedule.to_dict()
    return doc


def _write(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _options(args, solver_doc: dict) -> SolverOptions:
    doc = dict(solver_doc)
    for flag, key in (("seed", "seed"), ("starts", "starts"), ("tol", "stat_tol"),
                      ("max_iter", "max_iter"), ("enum_cap", "enum_cap")):
        value = getattr(args, flag, None)
        if value is not None:
            doc[key] = value
    try:
        return SolverOptions.from_dict(doc)
    except (TypeError, ValueError) as exc:
        raise InputError(f"bad solver options: {exc}") from exc


def _schedule(args, instance: ProblemInstance, doc: dict | None) -> PerturbationSchedule:
    try:
        if getattr(args, "mode", None) is None and getattr(args, "E", None) is None \
                and getattr(args, "e", None) is None and doc is not None \
                and args.perturb_start is None and args.perturb_stages is None:
            return PerturbationSchedule.from_dict(doc)
        kwargs = {}
        if getattr(args, "mode", None):
            kwargs["mode"] = args.mode
        if getattr(args, "E", None):
            kwargs["E"] = np.array(json.loads(args.E), dtype=float)
        if getattr(args, "e", None):
            kwargs["e"] = np.array(json.loads(args.e), dtype=float)
        if args.perturb_start is not None:
            kwargs["start"] = args.perturb_start
        if args.perturb_stages is not None:
            kwargs["stages"] = args.perturb_stages
        return PerturbationSchedule.default(instance, **kwargs)
    except (ScheduleError, KeyError, TypeError, ValueError) as exc:
        raise InputError(f"bad perturbation schedule: {exc}") from exc


def cmd_solve(args) -> int:
    instance, solver_doc, pert_doc = load_instance_file(args.instance)
    opts = _options(args, solver_doc)
    schedule = _schedule(args, instance, pert_doc) if args.perturb else None
    try:
        report = solve_instance(instance, opts, perturb=args.perturb, schedule=schedule)
    except InvalidInstanceError as exc:
        raise InputError(f"invalid instance: {exc}") from exc
    _write(report.to_json(), args.out)
    return report.exit_code


def _match_pair(expected, pairs, verdicts, tol):
    for pair, verdict in zip(pairs, verdicts):
        if (np.abs(pair.sigma_bar.vector - expected.sigma_bar).max() <= tol
                and np.abs(pair.x_bar - expected.x_bar).max() <= tol):
            return verdict.label if verdict is not None else None
    return "missing"


def check_example(id: str, opts: SolverOptions | None = None) -> tuple[bool, str]:
    """Run one catalog entry end to end and compare with its expected values."""
    entry = example_catalog(id)
    if id == "ex4":
        plus = solve_plus(entry.instance, opts)
        target = np.array(entry.extras["boundary_point"])
        on_edge = plus.boundary is not None and np.abs(plus.boundary.point.vector - target).max() <= 1e-8
        trace = homotopy_solve(entry.instance, ex4_schedule(), opts)
        limit = trace.limit_estimate
        near = limit is not None and np.abs(limit - np.array(entry.extras["homotopy_limit"])).max() <= 1e-4
        last = trace.stages[-1]
        n_sigma = last.value * last.sigma_bar[1] if last.sigma_bar is not None else float("nan")
        ok = bool(on_edge and near and 4.98 <= n_sigma <= 5.02)
        shown = "none" if limit is None else f"({limit[0]:.6f}, {limit[1]:.6f})"
        return ok, (f"boundary point {'ok' if on_edge else 'wrong'}; homotopy limit {shown}; "
                    f"n*sigma = {n_sigma:.5f}")
    report = solve_instance(entry.instance, opts)
    labels = [_match_pair(e, report.critical.pairs, report.verdicts, 1e-8) for e in entry.expected]
    good = sum(lab == e.verdict for lab, e in zip(labels, entry.expected))
    detail = (f"{good}/{len(entry.expected)} pairs matched with verdicts "
              f"({', '.join(str(lab) for lab in labels)}); "
              f"{len(report.critical.pairs)} critical points found")
    return good == len(entry.expected), detail


def cmd_examples(args) -> int:
    ids = CATALOG_IDS if args.id == "all" else (args.id,)
    if args.id != "all" and args.id not in CATALOG_IDS:
        raise InputError(f"unknown example id {args.id!r}; choose from {', '.join(CATALOG_IDS)} or all")
    if args.export:
        out = Path(args.export)
        out.mkdir(parents=True, exist_ok=True)
        for id in ids:
            sched = ex4_schedule() if id == "ex4" else None
            (out / f"{id}.json").write_text(dumps(instance_document(example_catalog(id).instance, sched)),
                                            encoding="utf-8")
    all_ok = True
    print(f"{'id':<5} {'result':<6} detail")
    for id in ids:
        try:
            ok, detail = check_example(id)
        except Exception as exc:  # surface solver errors as FAIL rows
            ok, detail = False, f"error: {exc}"
        all_ok &= ok
        print(f"{id:<5} {'PASS' if ok else 'FAIL':<6} {detail}")
    return EXIT_CERTIFIED if all_ok else EXIT_REGRESSION_FAIL


def cmd_grid(args) -> int:
    instance, _, _ = load_instance_file(args.instance)
    try:
        names = coordinate_names(instance, args.function)
        axes = parse_range(args.range, names)
        dump = evaluate_grid(instance, args.function, axes, args.res, parse_fix(args.fix, names))
    except GridSpecError as exc:
        raise InputError(str(exc)) from exc
    _write(dumps(dump.to_dict()), args.out)
    if args.svg:
        Path(args.svg).write_text(contour_svg(dump), encoding="utf-8")
    return 0


def cmd_sensors(args) -> int:
    try:
        text = Path(args.network).read_text(encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot read {args.network}: {exc.strerror}") from exc
    try:
        instance = build_sensor_instance(SensorNetwork.from_json(text))
    except NetworkError as exc:
        raise InputError(f"invalid network: {exc}") from exc
    _write(dumps(instance.to_dict()), args.out)
    return 0


def cmd_perturb(args) -> int:
    instance, solver_doc, pert_doc = load_instance_file(args.instance)
    opts = _options(args, solver_doc)
    trace = homotopy_solve(instance, _schedule(args, instance, pert_doc), opts)
    _write(dumps(clean_json(trace.to_dict())), args.out)
    return 0 if trace.limit_stationary else EXIT_NO_CERTIFICATE


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cdtriality", description=__doc__)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def solver_flags(p):
        p.add_argument("--seed", type=int)
        p.add_argument("--starts", type=int)
        p.add_argument("--tol", type=float, help="dual gradient tolerance (infinity norm)")
        p.add_argument("--max-iter", type=int, dest="max_iter")
        p.add_argument("--enum-cap", type=int, dest="enum_cap")

    def schedule_flags(p):
        p.add_argument("--mode", choices=["instance_homotopy", "g_shift"])
        p.add_argument("--E", help="perturbation matrix as JSON, e.g. [[16,0],[0,4]]")
        p.add_argument("--e", help="perturbation vector as JSON, e.g. [2,2]")
        p.add_argument("--perturb-start", type=int, dest="perturb_start")
        p.add_argument("--perturb-stages", type=int, dest="perturb_stages")

    p = sub.add_parser("solve", help="find, classify and certify critical points")
    p.add_argument("--instance", required=True)
    p.add_argument("--out")
    p.add_argument("--perturb", action="store_true", help="fall back to the homotopy when uncertified")
    solver_flags(p)
    schedule_flags(p)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("examples", help="regression run over the built-in catalog")
    p.add_argument("--id", default="all")
    p.add_argument("--export", metavar="DIR", help="also write the catalog instances as JSON")
    p.set_defaults(func=cmd_examples)

    p = sub.add_parser("grid", help="evaluate the primal or dual function on a 2-D grid")
    p.add_argument("--instance", required=True)
    p.add_argument("--function", choices=["primal", "dual"], required=True)
    p.add_argument("--range", required=True, help='"x:lo:hi,y:lo:hi"')
    p.add_argument("--res", type=int, required=True)
    p.add_argument("--fix", action="append", metavar="K=V")
    p.add_argument("--out")
    p.add_argument("--svg", metavar="FILE")
    p.set_defaults(func=cmd_grid)

    p = sub.add_parser("sensors", help="reduce a sensor network to an instance")
    p.add_argument("--network", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_sensors)

    p = sub.add_parser("perturb", help="run the vanishing-shift homotopy alone")
    p.add_argument("--instance", required=True)
    p.add_argument("--out")
    solver_flags(p)
    schedule_flags(p)
    p.set_defaults(func=cmd_perturb)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT_ERROR


if __name__ == "__main__":
    sys.exit(main())
