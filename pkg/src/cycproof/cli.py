"""Batch front end: check scripts, search goals, run programs.

Exit status is 0 for Proved/ProvedBounded, 1 for Rejected/Stuck, 2 for
usage or parse errors.  Every verdict is printed together with its oracle
obligation ledger.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import parser, script as script_mod, search as search_mod
from .oracle import BoundedOracle, SmtOracle
from .whilelang import State, run


def _make_oracle(spec: str):
    if spec.startswith("bounded"):
        lo, hi = -50, 50
        if ":" in spec:
            rng = spec.split(":", 1)[1]
            lo_txt, hi_txt = rng.split("..", 1)
            lo, hi = int(lo_txt), int(hi_txt)
        return BoundedOracle(lo, hi)
    if spec.startswith("smt:"):
        return SmtOracle(spec.split(":", 1)[1])
    raise ValueError(f"unknown oracle spec {spec!r}; use bounded:<lo>..<hi> or smt:<command>")


def _add_common(sub):
    sub.add_argument("--oracle", default="bounded:-50..50",
                     help="bounded:<lo>..<hi> or smt:<command>")
    sub.add_argument("--path-bound", type=int, default=10_000)
    sub.add_argument("--dump", help="write the proof-graph s-expression to a file")


def cmd_check(args) -> int:
    try:
        text = Path(args.script).read_text()
    except OSError as exc:
        print(f"cannot read script: {exc}", file=sys.stderr)
        return 2
    try:
        oracle = _make_oracle(args.oracle)
    except ValueError as exc:
        print(exc, file=sys.stderr)
        return 2
    replayer, report = script_mod.replay(
        text, oracle, args.path_bound, base_dir=Path(args.script).parent
    )
    print(report.render())
    if args.dump and report.dump:
        Path(args.dump).write_text(report.dump + "\n")
    return 0 if report.succeeded else 1


def cmd_search(args) -> int:
    try:
        goal = parser.parse_sequent(Path(args.goal).read_text().strip())
    except (OSError, parser.ParseError) as exc:
        print(f"cannot load goal: {exc}", file=sys.stderr)
        return 2
    try:
        oracle = _make_oracle(args.oracle)
    except ValueError as exc:
        print(exc, file=sys.stderr)
        return 2
    if args.depth < 1:
        print("depth must be at least 1", file=sys.stderr)
        return 2
    result = search_mod.search(goal, oracle, args.depth, args.path_bound)
    print(f"verdict: {result.verdict}")
    if result.message:
        print(f"note: {result.message}")
    print("oracle obligations:")
    obligations = result.graph.obligations()
    for ob in obligations:
        print(f"  {ob.describe()}")
    if not obligations:
        print("  none")
    if args.emit:
        Path(args.emit).write_text(result.script + "\n")
        print(f"script written to {args.emit}")
    else:
        print("script:")
        for line in result.script.splitlines():
            print(f"  {line}")
    if args.dump:
        Path(args.dump).write_text(result.graph.dump() + "\n")
    return 0 if result.proved else 1


def cmd_eval(args) -> int:
    try:
        prog = parser.parse_prog(Path(args.program).read_text().strip())
        config = parser.parse_config(args.config)
    except (OSError, parser.ParseError) as exc:
        print(f"cannot load program: {exc}", file=sys.stderr)
        return 2
    state = State(prog, config)
    try:
        states, done = run(state, args.bound)
    except Exception as exc:  # division by zero, open guards, ...
        print(f"evaluation error: {exc}", file=sys.stderr)
        return 1
    for i, s in enumerate(states):
        print(f"{i}: {s}")
    if not done:
        print("exit flag: bound")
    return 0


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(
        prog="cycproof",
        description="cyclic sequent proofs over symbolically executed programs",
    )
    subs = ap.add_subparsers(dest="command", required=True)

    p_check = subs.add_parser("check", help="replay a proof script")
    p_check.add_argument("script")
    _add_common(p_check)
    p_check.set_defaults(func=cmd_check)

    p_search = subs.add_parser("search", help="bounded backward search for a goal")
    p_search.add_argument("goal", help="file holding one sequent")
    p_search.add_argument("--depth", type=int, required=True)
    p_search.add_argument("--emit", help="write the found script to a file")
    _add_common(p_search)
    p_search.set_defaults(func=cmd_search)

    p_eval = subs.add_parser("eval", help="print a program's step sequence")
    p_eval.add_argument("program", help="file holding one program")
    p_eval.add_argument("--config", required=True, help="initial configuration, e.g. '{n -> 3}'")
    p_eval.add_argument("--bound", type=int, default=10_000)
    p_eval.set_defaults(func=cmd_eval)

    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code not in (0, None) else 0
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
