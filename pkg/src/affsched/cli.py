"""Batch command-line front end: solve, validate, report."""

from __future__ import annotations

import argparse
import json
import os
import sys
from fractions import Fraction

from .comm import comm_report
from .nest import EnumerationError, NestError, load_nest
from .procedure import (
    ProcedureError,
    WeightConfig,
    plan_from_doc,
    plan_to_doc,
    run_procedure,
)
from .solver import SolverConfig
from .validation import validate

EXIT_OK = 0
EXIT_VIOLATION = 1
EXIT_INPUT = 2


class InputError(Exception):
    pass


def _thread_cap() -> int:
    """Parallelism cap from AFFSCHED_THREADS (the engine runs sequentially,
    which honors any cap)."""
    try:
        return max(1, int(os.environ.get("AFFSCHED_THREADS", "1")))
    except ValueError:
        return 1


def _load_nest_file(path: str):
    if not os.path.exists(path):
        raise InputError(f"input file not found: {path}")
    with open(path) as fh:
        return load_nest(fh.read())


def _load_plan_file(path: str):
    if not os.path.exists(path):
        raise InputError(f"plan file not found: {path}")
    with open(path) as fh:
        return plan_from_doc(json.load(fh))


def _parse_weights(items) -> WeightConfig:
    overrides = {}
    for item in items or []:
        if "=" not in item:
            raise InputError(f"bad weight override {item!r}; expected family=value")
        fam, val = item.split("=", 1)
        try:
            overrides[fam] = Fraction(val)
        except (ValueError, ZeroDivisionError):
            raise InputError(f"bad weight value {val!r}")
    try:
        return WeightConfig.with_overrides(overrides)
    except ValueError as exc:
        raise InputError(str(exc))


def _parse_params(nest, items) -> list[tuple[int, ...]]:
    """Parameter settings to validate at; defaults to N^(0)+2 and N^(0)+4."""
    names = nest.outer_vars.names
    minima = tuple(nest.outer_vars.minima)
    if not items:
        return [tuple(m + 2 for m in minima), tuple(m + 4 for m in minima)]
    settings = []
    for item in items:
        vals = dict()
        for piece in item.split(","):
            if "=" not in piece:
                raise InputError(f"bad parameter setting {piece!r}; expected name=value")
            name, val = piece.split("=", 1)
            if name not in names:
                raise InputError(f"unknown outer variable {name!r}")
            vals[name] = int(val)
        missing = [n for n in names if n not in vals]
        if missing:
            raise InputError(f"parameter setting {item!r} misses {missing}")
        settings.append(tuple(vals[n] for n in names))
    return settings


def _write_json(doc, path):
    text = json.dumps(doc, indent=2) + "\n"
    if path:
        with open(path, "w") as fh:
            fh.write(text)
    else:
        print(text, end="")


def _print_plan_summary(nest, plan, report):
    print(f"spatial dimensions: {plan.r_space}")
    for sid, st in plan.statements.items():
        print(f"statement {sid}:")
        for xi in range(st.schedule.nrows):
            kind = "space" if xi < plan.r_space else "time"
            print(
                f"  level {xi + 1} ({kind}): tau={list(st.schedule.rows[xi])} "
                f"b={list(st.param.rows[xi])} a={st.const[xi]}"
            )
    for aid, al in plan.arrays.items():
        if al.placement.nrows:
            for xi in range(al.placement.nrows):
                print(
                    f"array {aid}: eta={list(al.placement.rows[xi])} "
                    f"z={list(al.param.rows[xi])} y={al.const[xi]}"
                )
    if plan.warnings:
        for w in plan.warnings:
            print(f"warning: {w}")
    if not report["exchanges"]:
        print("communication-free: all accesses aligned with their operands")
    else:
        for ex in report["exchanges"]:
            print(f"exchange needed for access {tuple(ex['access'])}: slack in {ex['reasons']}")
        for bc in report["broadcasts"]:
            if bc["eligible"]:
                print(f"broadcast eligible: access {tuple(bc['access'])}")
            else:
                print(
                    f"point-to-point (unclassified): access {tuple(bc['access'])} "
                    f"[{bc['failed_condition']}]"
                )


def cmd_solve(args) -> int:
    nest = _load_nest_file(args.input)
    if not 0 <= args.spatial_dims < nest.max_depth:
        raise InputError(f"r must be < n: got r={args.spatial_dims}, n={nest.max_depth}")
    weights = _parse_weights(args.weight)
    cfg = SolverConfig(
        coeff_bound=args.bound,
        time_limit=args.time_limit,
        strategy=args.strategy,
    )
    try:
        plan = run_procedure(
            nest,
            r_space=args.spatial_dims,
            weights=weights,
            solver_cfg=cfg,
            guard_indep_drop=args.guard_indep_drop,
            last_index_contiguous=not args.first_index_contiguous,
        )
    except ProcedureError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VIOLATION
    report = comm_report(plan, nest)
    doc = plan_to_doc(plan)
    doc["comm_report"] = report
    _write_json(doc, args.out)
    _print_plan_summary(nest, plan, report)
    return EXIT_OK


def cmd_validate(args) -> int:
    nest = _load_nest_file(args.input)
    plan = _load_plan_file(args.plan)
    settings = _parse_params(nest, args.params)
    minima = tuple(nest.outer_vars.minima)
    reports = []
    for setting in settings:
        if any(v < m for v, m in zip(setting, minima)):
            raise InputError(f"parameters {setting} below declared minima {minima}")
        try:
            reports.append(validate(nest, plan, setting, cap=args.cap))
        except EnumerationError as exc:
            raise InputError(str(exc))
    doc = {"reports": [r.to_doc() for r in reports]}
    _write_json(doc, args.out)
    ok = all(r.passed for r in reports)
    for r in reports:
        status = "pass" if r.passed else "FAIL"
        print(
            f"N={tuple(r.n_vals)}: {status} "
            f"(violations={len(r.legality_violations)}, comm={r.comm_count})",
            file=sys.stderr,
        )
    return EXIT_OK if ok else EXIT_VIOLATION


def cmd_report(args) -> int:
    nest = _load_nest_file(args.input)
    plan = _load_plan_file(args.plan)
    report = comm_report(plan, nest)
    _write_json(report, args.out)
    _print_plan_summary(nest, plan, report)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="affsched",
        description="Affine loop-nest scheduling and data allocation",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_solve = sub.add_parser("solve", help="compute a transform plan")
    p_solve.add_argument("--input", required=True)
    p_solve.add_argument("--spatial-dims", type=int, default=1)
    p_solve.add_argument("--bound", type=int, default=2)
    p_solve.add_argument("--time-limit", type=float, default=None)
    p_solve.add_argument(
        "--strategy", choices=("branch-and-bound", "exhaustive"), default="branch-and-bound"
    )
    p_solve.add_argument("--weight", action="append", metavar="FAMILY=VALUE")
    p_solve.add_argument("--guard-indep-drop", action="store_true")
    p_solve.add_argument("--first-index-contiguous", action="store_true")
    p_solve.add_argument("--out", default=None)
    p_solve.set_defaults(func=cmd_solve)

    p_val = sub.add_parser("validate", help="brute-force check a plan")
    p_val.add_argument("--input", required=True)
    p_val.add_argument("--plan", required=True)
    p_val.add_argument("--params", action="append", metavar="NAME=VALUE[,...]")
    p_val.add_argument("--cap", type=int, default=10**6)
    p_val.add_argument("--out", default=None)
    p_val.set_defaults(func=cmd_validate)

    p_rep = sub.add_parser("report", help="communication and broadcast report")
    p_rep.add_argument("--input", required=True)
    p_rep.add_argument("--plan", required=True)
    p_rep.add_argument("--out", default=None)
    p_rep.set_defaults(func=cmd_report)

    return parser


def main(argv=None) -> int:
    _thread_cap()
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (InputError, NestError, ValueError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
