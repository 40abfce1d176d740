"""Command line entry point: gen, run, verify, bench, duel, fit."""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Optional, Sequence

from . import harness
from .adversaries import duel_nm2, duel_restart_lb, duel_unknown_n
from .core import (Model, StructuralError, instance_from_json, instance_to_json,
                   schedule_from_jsonl, schedule_to_jsonl, total_flow, validate_schedule)

EXIT_OK, EXIT_INVALID, EXIT_USAGE = 0, 1, 2


def _write(path: Optional[str], text: str) -> None:
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def _witness_path(out: str) -> str:
    return str(Path(out).with_suffix("")) + ".witness.jsonl"


def cmd_gen(args: argparse.Namespace) -> int:
    family = harness.generate(args.family, args.n, args.m, args.seed)
    instance = family.instance if family else harness.random_instance(args.n, args.m, args.seed)
    _write(args.out, instance_to_json(instance) + "\n")
    if family and args.out not in (None, "-"):
        Path(_witness_path(args.out)).write_text(schedule_to_jsonl(family.witness))
    print(json.dumps({"family": args.family, "jobs": instance.n, "m": instance.m,
                      "witness_flow": str(family.witness_flow) if family else None}),
          file=sys.stderr if args.out in (None, "-") else sys.stdout)
    return EXIT_OK


def cmd_run(args: argparse.Namespace) -> int:
    instance = instance_from_json(Path(args.instance).read_text())
    schedule = harness.ALGORITHMS[args.alg](instance, args.seed)
    report = validate_schedule(instance, schedule)
    summary = {"alg": args.alg, "model": schedule.model.value, "valid": report.ok,
               "flow": str(total_flow(instance, schedule).total) if report.ok else None}
    _write(args.out, schedule_to_jsonl(schedule))
    print(json.dumps(summary), file=sys.stderr if args.out in (None, "-") else sys.stdout)
    return EXIT_OK if report.ok else EXIT_INVALID


def cmd_verify(args: argparse.Namespace) -> int:
    instance = instance_from_json(Path(args.instance).read_text())
    model = Model(args.model) if args.model else None
    schedule = schedule_from_jsonl(Path(args.schedule).read_text(), model)
    try:
        report = validate_schedule(instance, schedule)
    except StructuralError as err:
        print(f"structural error: {err}")
        return EXIT_INVALID
    if report.ok:
        print(f"ok ({schedule.model.value}); flow {total_flow(instance, schedule).total}")
        return EXIT_OK
    for v in report.violations:
        print(v)
    return EXIT_INVALID


def cmd_bench(args: argparse.Namespace) -> int:
    ns = [int(x) for x in args.n.split(",") if x]
    rows = harness.bench(args.alg, args.family, ns, args.m, args.reps, args.seed, exact=args.exact)
    _write(args.csv, harness.rows_to_csv(rows))
    return EXIT_OK


def cmd_duel(args: argparse.Namespace) -> int:
    if args.adversary == "unknown-n":
        result = duel_unknown_n(harness.ALGORITHMS[args.alg], args.n, args.trials, args.m,
                                seed=args.seed)
        print(json.dumps({"adversary": "unknown-n", "type": result.kind, "t": result.t,
                          "jobs": result.family.instance.n,
                          "witness_flow": str(result.family.witness_flow), "note": result.note}))
        return EXIT_OK
    policy = harness.POLICIES[args.alg](args.n, args.m)
    if args.adversary == "restart-lb":
        if args.m != 1:
            raise ValueError("restart-lb duels are single-machine")
        result = duel_restart_lb(policy, args.n)
    else:
        result = duel_nm2(policy, args.n, args.m)
    if args.transcript:
        Path(args.transcript).write_text(result.transcript.to_jsonl())
    info = {k: (str(v) if not isinstance(v, (int, bool, list, type(None))) else v)
            for k, v in result.info.items() if k != "phase2_jobs"}
    print(json.dumps({"adversary": args.adversary, "alg": args.alg, "n": args.n, "m": args.m,
                      "released": result.instance.n,
                      "flow": str(result.flow.total) if result.flow else None,
                      "witness_flow": str(result.witness_flow), "info": info}))
    return EXIT_OK


def cmd_fit(args: argparse.Namespace) -> int:
    fit = harness.fit_csv(Path(args.csv).read_text(), args.x, args.y)
    print(f"slope {fit.slope:.6f} intercept {fit.intercept:.6f} r2 {fit.r2:.6f}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="flowlab", description="online flow-time scheduling lab")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate an instance (and witness schedule)")
    p.add_argument("--family", required=True, choices=sorted(harness.FAMILIES))
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--m", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("run", help="run an algorithm on an instance file")
    p.add_argument("--alg", required=True, choices=sorted(harness.ALGORITHMS))
    p.add_argument("--instance", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("verify", help="validate a schedule file against an instance")
    p.add_argument("--instance", required=True)
    p.add_argument("--schedule", required=True)
    p.add_argument("--model", choices=[m.value for m in Model])
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("bench", help="sweep sizes and repetitions, emit CSV")
    p.add_argument("--alg", required=True, choices=sorted(harness.ALGORITHMS))
    p.add_argument("--family", required=True, choices=sorted(harness.FAMILIES))
    p.add_argument("--n", required=True, help="comma separated sizes")
    p.add_argument("--m", type=int, default=1)
    p.add_argument("--reps", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--csv")
    p.add_argument("--exact", action="store_true", help="write exact rationals")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("duel", help="run an adaptive adversary against a policy")
    p.add_argument("--adversary", required=True, choices=["restart-lb", "nm2", "unknown-n"])
    p.add_argument("--alg", required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--m", type=int, default=1)
    p.add_argument("--trials", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--transcript")
    p.set_defaults(func=cmd_duel)

    p = sub.add_parser("fit", help="log-log least squares over CSV columns")
    p.add_argument("--csv", required=True)
    p.add_argument("--x", default="n")
    p.add_argument("--y", default="ratio")
    p.set_defaults(func=cmd_fit)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "duel":
        table = harness.ALGORITHMS if args.adversary == "unknown-n" else harness.POLICIES
        if args.alg not in table:
            parser.error(f"unknown algorithm {args.alg!r} for this adversary")
    try:
        return args.func(args)
    except (ValueError, FileNotFoundError) as err:
        print(f"flowlab: error: {err}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
