"""Command-line interface.

Exit status of ``check``: 0 no violation within the bound, 1 violation found,
3 the specification turned out nondeterministic during the search, 2 usage,
file or parse errors. Diagnostics go to stderr; results go to stdout.
"""

from __future__ import annotations

import argparse
import json
import sys
from typing import Callable, List, Optional, Sequence

from .consistency import check_consistency
from .diagnostics import Diagnostic, ParseError, has_errors
from .engine import (DEFAULT_BOUND, ConsistencyError, NoViolationWithinBound, SimulationError,
                     Violation, analyze, format_trace, simulate, trace_to_json, verdict_to_json)
from .model import InputEvent, MONITORED, SpecModel, Value
from .parser import parse_spec_diagnostics
from .promela import EmissionError, emit_promela
from .scenario import Scenario, parse_scenario

EXIT_OK = 0
EXIT_VIOLATION = 1
EXIT_USAGE = 2
EXIT_INCONSISTENT = 3

VERDICT_EXIT = {
    NoViolationWithinBound: EXIT_OK,
    Violation: EXIT_VIOLATION,
    ConsistencyError: EXIT_INCONSISTENT,
}


class _Failed(Exception):
    """Abort a command with an exit status after reporting diagnostics."""

    def __init__(self, status: int = EXIT_USAGE):
        self.status = status


def _report(diags: Sequence[Diagnostic]) -> None:
    for d in diags:
        print(d, file=sys.stderr)


def _read(path: str) -> str:
    try:
        with open(path, encoding="utf-8") as fh:
            return fh.read()
    except OSError as exc:
        print(f"error: cannot read {path}: {exc.strerror or exc}", file=sys.stderr)
        raise _Failed() from None


def _load_spec(path: str) -> SpecModel:
    spec, diags = parse_spec_diagnostics(_read(path), path)
    _report(diags)
    if spec is None:
        raise _Failed()
    return spec


def _load_scenario(path: str, spec: SpecModel) -> Scenario:
    text = _read(path)
    try:
        return parse_scenario(text, spec, path)
    except ParseError as exc:
        _report(exc.diagnostics)
        raise _Failed() from None


def _emit_json(doc) -> None:
    print(json.dumps(doc, indent=2))


def _positive(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be at least 1, got {value}")
    return value


def _non_negative(text: str) -> int:
    value = int(text)
    if value < 0:
        raise argparse.ArgumentTypeError(f"must be at least 0, got {value}")
    return value


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="scrscen",
                                 description="Analyze SCR specifications against scenarios.")
    sub = ap.add_subparsers(dest="command", required=True)

    def add(name: str, help: str) -> argparse.ArgumentParser:
        p = sub.add_parser(name, help=help)
        p.add_argument("--output", choices=("text", "structured"), default="text")
        return p

    p = add("typecheck", "parse and type check a specification")
    p.add_argument("spec")

    p = add("consistency", "check tables for overlapping rows and missing cases")
    p.add_argument("spec")

    p = add("check", "search for a run of the scenario that violates its check")
    p.add_argument("spec")
    p.add_argument("scenario")
    p.add_argument("--depth", type=_positive, default=DEFAULT_BOUND,
                   help=f"maximum run length in transitions (default {DEFAULT_BOUND})")
    p.add_argument("--workers", type=_positive, default=1)
    p.add_argument("--seed", type=int, default=None,
                   help="shuffle successor order with this seed")

    p = add("simulate", "apply a list of inputs from the initial state")
    p.add_argument("spec")
    p.add_argument("--inputs", required=True,
                   help="file with one 'variable = value' per line")

    p = add("emit-promela", "write a Promela model of the spec and scenario")
    p.add_argument("spec")
    p.add_argument("scenario")
    p.add_argument("-o", "--out", required=True)
    p.add_argument("--unroll", type=_non_negative, default=None,
                   help="unroll each repetition at most K times instead of looping")
    return ap


def cmd_typecheck(args) -> int:
    spec, diags = parse_spec_diagnostics(_read(args.spec), args.spec)
    if args.output == "structured":
        _emit_json({"ok": spec is not None, "diagnostics": [d.to_json() for d in diags]})
    else:
        _report(diags)
        if spec is not None:
            print(f"{args.spec}: ok ({len(spec.variables)} variables, "
                  f"{len(spec.tables_by_target)} tables)")
    return EXIT_OK if spec is not None else EXIT_USAGE


def cmd_consistency(args) -> int:
    spec = _load_spec(args.spec)
    diags = check_consistency(spec)
    if args.output == "structured":
        _emit_json({"ok": not has_errors(diags), "diagnostics": [d.to_json() for d in diags]})
    else:
        _report(diags)
        errors = sum(d.is_error for d in diags)
        print(f"{args.spec}: {errors} error(s), {len(diags) - errors} warning(s)")
    return EXIT_VIOLATION if has_errors(diags) else EXIT_OK


def cmd_check(args) -> int:
    spec = _load_spec(args.spec)
    scenario = _load_scenario(args.scenario, spec)
    verdict = analyze(spec, scenario, args.depth, workers=args.workers, shuffle_seed=args.seed)
    if args.output == "structured":
        _emit_json(verdict_to_json(spec, verdict, bound=args.depth, scenario=scenario.name))
    elif isinstance(verdict, Violation):
        print(f"VIOLATION: {scenario.name} on {spec.name}, "
              f"counterexample of {len(verdict.trace)} step(s)")
        print(format_trace(spec, verdict.trace))
    elif isinstance(verdict, NoViolationWithinBound):
        s = verdict.stats
        note = "state space exhausted" if verdict.exhausted else f"bound {verdict.depth} reached"
        print(f"NO VIOLATION: {scenario.name} on {spec.name} within depth {verdict.depth} "
              f"({verdict.states_explored} states, {s.transitions} transitions, {note})")
    else:
        print(f"CONSISTENCY ERROR: {scenario.name} on {spec.name}")
        _report(verdict.diagnostics)
    return VERDICT_EXIT[type(verdict)]


def parse_inputs(text: str, spec: SpecModel, filename: str = "<inputs>") -> List[InputEvent]:
    """Read ``variable = value`` lines (``:=`` also accepted, ``#`` comments)."""
    events = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        sep = ":=" if ":=" in line else "="
        name, found, value = (part.strip() for part in line.partition(sep))
        if not found or not name or not value:
            raise ValueError(f"{filename}:{lineno}: expected 'variable = value'")
        decl = spec.decls.get(name)
        if decl is None or decl.role != MONITORED:
            raise ValueError(f"{filename}:{lineno}: {name} is not a monitored variable")
        events.append(InputEvent(name, _input_value(value, spec)))
    return events


def _input_value(word: str, spec: SpecModel) -> Value:
    if word in ("true", "false"):
        return word == "true"
    if word in spec.constant_map:
        return spec.constant_map[word]
    try:
        return int(word)
    except ValueError:
        return word


def cmd_simulate(args) -> int:
    spec = _load_spec(args.spec)
    text = _read(args.inputs)
    try:
        inputs = parse_inputs(text, spec, args.inputs)
        trace = simulate(spec, inputs)
    except SimulationError as exc:
        print(f"error: {args.inputs}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if args.output == "structured":
        _emit_json(trace_to_json(spec, trace))
    else:
        print(format_trace(spec, trace))
    return EXIT_OK


def cmd_emit_promela(args) -> int:
    spec = _load_spec(args.spec)
    scenario = _load_scenario(args.scenario, spec)
    try:
        model = emit_promela(spec, scenario, unroll=args.unroll)
    except EmissionError as exc:
        _report(exc.diagnostics)
        return EXIT_INCONSISTENT
    try:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(model.text)
    except OSError as exc:
        print(f"error: cannot write {args.out}: {exc.strerror or exc}", file=sys.stderr)
        return EXIT_USAGE
    if args.output == "structured":
        _emit_json({"file": args.out, "pc_count": model.pc_count,
                    "assertion_line": model.assertion_line})
    else:
        print(f"wrote {args.out} (assertion at line {model.assertion_line}, "
              f"pc 1..{model.pc_count})")
    return EXIT_OK


COMMANDS: dict = {
    "typecheck": cmd_typecheck,
    "consistency": cmd_consistency,
    "check": cmd_check,
    "simulate": cmd_simulate,
    "emit-promela": cmd_emit_promela,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    handler: Callable = COMMANDS[args.command]
    try:
        return handler(args)
    except _Failed as exc:
        return exc.status


if __name__ == "__main__":
    sys.exit(main())
