"""Bounded breadth-first exploration of a specification guided by a scenario.

The search runs over pairs of a system state and a scenario pc. Every time
the search reaches the final pc it evaluates the scenario's check; the first
failure found is reported with a shortest trace. Among shortest traces the
one returned is the first in exploration order: automaton edges by sentence
number, then inputs by monitored-variable declaration order and value order.
"""

from __future__ import annotations

import random
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Dict, List, NamedTuple, Optional, Sequence, Tuple, Union

from .diagnostics import Diagnostic, error
from .model import (Expr, IllegalInput, InputEvent,
                    NondeterministicTransition, SpecModel, SystemState,
                    format_value, step, successors)
from .parser import render_expr
from .scenario import Edge, GuardedChange, PcAutomaton, Scenario, Test

DEFAULT_BOUND = 10_000


class ProductState(NamedTuple):
    sys: SystemState
    pc: int


class Label(NamedTuple):
    edge: Edge
    input: Optional[InputEvent]


@dataclass(frozen=True)
class TraceStep:
    index: int
    kind: str                      # "test" or "change"
    input: Optional[InputEvent]
    state: SystemState
    pc: Optional[int] = None
    sentence_index: Optional[int] = None
    sentence: Optional[str] = None


@dataclass(frozen=True)
class Trace:
    initial: SystemState
    steps: Tuple[TraceStep, ...] = ()
    initial_pc: Optional[int] = None
    violated: Optional[Expr] = None

    @property
    def final_state(self) -> SystemState:
        return self.steps[-1].state if self.steps else self.initial

    @property
    def final_pc(self) -> Optional[int]:
        return self.steps[-1].pc if self.steps else self.initial_pc

    @property
    def inputs(self) -> List[InputEvent]:
        return [s.input for s in self.steps if s.input is not None]

    def states(self) -> List[SystemState]:
        return [self.initial] + [s.state for s in self.steps]

    def __len__(self) -> int:
        return len(self.steps)


@dataclass(frozen=True)
class SearchStats:
    states: int
    transitions: int
    depth: int
    exhausted: bool


@dataclass(frozen=True)
class Violation:
    trace: Trace
    stats: SearchStats
    kind = "violation"


@dataclass(frozen=True)
class NoViolationWithinBound:
    depth: int
    states_explored: int
    stats: SearchStats
    kind = "no-violation"

    @property
    def exhausted(self) -> bool:
        """The whole reachable space was searched before hitting the bound."""
        return self.stats.exhausted


@dataclass(frozen=True)
class ConsistencyError:
    diagnostics: Tuple[Diagnostic, ...]
    stats: Optional[SearchStats] = None
    kind = "consistency-error"


Verdict = Union[Violation, NoViolationWithinBound, ConsistencyError]


def _nondet_diagnostic(exc: NondeterministicTransition, state: SystemState) -> Diagnostic:
    inp = getattr(exc, "input", None)
    where = f" on input {inp}" if inp is not None else ""
    return error("nondeterministic", f"{exc}{where} from state {state!r}")


class _Expander:
    def __init__(self, spec: SpecModel, aut: PcAutomaton):
        self.spec = spec
        self.aut = aut
        self.cache: Dict[SystemState, list] = {}

    def steps_from(self, s: SystemState):
        out = self.cache.get(s)
        if out is None:
            out = successors(self.spec, s)
            self.cache[s] = out
        return out

    def __call__(self, ps: ProductState) -> List[Tuple[Label, ProductState]]:
        return product_successors(self.spec, self.aut, ps, self.steps_from)


def product_successors(spec: SpecModel, aut: PcAutomaton, ps: ProductState,
                       steps_from=None) -> List[Tuple[Label, ProductState]]:
    """Labelled successors of ``ps`` in the product of spec and automaton.

    Raises :class:`NondeterministicTransition` if a table is inconsistent in
    some step from ``ps.sys``.
    """
    if steps_from is None:
        def steps_from(s):
            return successors(spec, s)
    out: List[Tuple[Label, ProductState]] = []
    for edge in aut.out(ps.pc):
        targets = aut.closure(edge.dst)
        sentence = edge.sentence
        if isinstance(sentence, Test):
            if sentence.cond.eval(ps.sys):
                out.extend((Label(edge, None), ProductState(ps.sys, pc)) for pc in targets)
            continue
        for inp, nxt in steps_from(ps.sys):
            if isinstance(sentence, GuardedChange) and not sentence.admits(ps.sys, nxt):
                continue
            out.extend((Label(edge, inp), ProductState(nxt, pc)) for pc in targets)
    return out


def analyze(spec: SpecModel, scenario: Scenario, bound: int = DEFAULT_BOUND, *,
            workers: int = 1, shuffle_seed: Optional[int] = None) -> Verdict:
    """Search for a run of ``scenario`` that ends in a state falsifying its check.

    ``bound`` limits the number of transitions (sentences executed) along any
    explored run. ``workers > 1`` expands each BFS layer concurrently; the
    verdict and trace are identical to the sequential search. ``shuffle_seed``
    permutes successor order (for testing order independence); the verdict
    and counterexample length do not change, the specific trace may.
    """
    if bound < 1:
        raise ValueError(f"depth bound must be at least 1, got {bound}")
    aut = scenario.automaton
    check = scenario.check
    accept = aut.accept
    expand = _Expander(spec, aut)
    rng = random.Random(shuffle_seed) if shuffle_seed is not None else None

    init = spec.initial_state()
    parent: Dict[ProductState, Optional[Tuple[ProductState, Label]]] = {}
    frontier: List[ProductState] = []
    transitions = 0

    def stats(depth: int, exhausted: bool) -> SearchStats:
        return SearchStats(len(parent), transitions, depth, exhausted)

    for pc in aut.closure(aut.initial):
        ps = ProductState(init, pc)
        parent[ps] = None
        if pc == accept and not check.eval(init):
            return Violation(_trace(parent, ps, check), stats(0, False))
        frontier.append(ps)

    pool = ThreadPoolExecutor(max_workers=workers) if workers > 1 else None
    try:
        depth = 0
        while frontier and depth < bound:
            if pool is not None:
                chunk = max(1, len(frontier) // (workers * 4))
                expansions = pool.map(expand, frontier, chunksize=chunk)
            else:
                expansions = map(expand, frontier)
            nxt: List[ProductState] = []
            it = iter(frontier)
            while True:
                try:
                    succs = next(expansions)
                except StopIteration:
                    break
                except NondeterministicTransition as exc:
                    failing = next(it)
                    return ConsistencyError((_nondet_diagnostic(exc, failing.sys),),
                                            stats(depth, False))
                ps = next(it)
                if rng is not None:
                    succs = list(succs)
                    rng.shuffle(succs)
                for label, child in succs:
                    transitions += 1
                    if child in parent:
                        continue
                    parent[child] = (ps, label)
                    if child.pc == accept and not check.eval(child.sys):
                        return Violation(_trace(parent, child, check), stats(depth + 1, False))
                    nxt.append(child)
            frontier = nxt
            depth += 1
    finally:
        if pool is not None:
            pool.shutdown(wait=False, cancel_futures=True)
    exhausted = not frontier
    return NoViolationWithinBound(bound, len(parent), stats(depth, exhausted))


def _trace(parent, last: ProductState, check: Expr) -> Trace:
    chain: List[Tuple[ProductState, Label]] = []
    ps = last
    while parent[ps] is not None:
        prev, label = parent[ps]
        chain.append((ps, label))
        ps = prev
    chain.reverse()
    steps = []
    for k, (node, label) in enumerate(chain, start=1):
        kind = "test" if isinstance(label.edge.sentence, Test) else "change"
        steps.append(TraceStep(k, kind, label.input, node.sys, node.pc,
                               label.edge.index, str(label.edge.sentence)))
    return Trace(ps.sys, tuple(steps), ps.pc, check)


def simulate(spec: SpecModel, inputs: Sequence[InputEvent]) -> Trace:
    """Apply ``inputs`` in order from the initial state.

    Raises :class:`SimulationError` naming the 1-based position of the first
    illegal input.
    """
    state = spec.initial_state()
    steps = []
    for k, inp in enumerate(inputs, start=1):
        try:
            state = step(spec, state, inp)
        except (IllegalInput, NondeterministicTransition) as exc:
            raise SimulationError(k, inp, str(exc)) from exc
        steps.append(TraceStep(k, "change", inp, state))
    return Trace(spec.initial_state(), tuple(steps))


class SimulationError(ValueError):
    def __init__(self, position: int, inp: InputEvent, reason: str):
        self.position = position
        self.input = inp
        super().__init__(f"input {position} ({inp}): {reason}")


def replay(spec: SpecModel, trace: Trace) -> Trace:
    """Re-run a trace's inputs; test steps are carried over unchanged."""
    state = spec.initial_state()
    steps = []
    for s in trace.steps:
        if s.input is not None:
            state = step(spec, state, s.input)
        steps.append(TraceStep(s.index, s.kind, s.input, state, s.pc,
                               s.sentence_index, s.sentence))
    return Trace(spec.initial_state(), tuple(steps), trace.initial_pc, trace.violated)


# ---------------------------------------------------------------------------
# explaining and serializing traces

def fired_mode_rows(spec: SpecModel, old: SystemState, new: SystemState) -> List[Tuple[str, str]]:
    """(mode class, row text) for every mode table row that fired in a step."""
    out = []
    for table in spec.mode_tables:
        for _, row in table.rows_from(old[table.mode_class]):
            if row.event.holds(old, new):
                out.append((table.mode_class,
                            f"{row.old} -- {render_expr(row.event)} --> {row.new}"))
    return out


def _assign(d: Dict[str, object]) -> str:
    return " ".join(f"{k}={format_value(v)}" for k, v in d.items())


def format_trace(spec: SpecModel, trace: Trace) -> str:
    def pc_note(pc):
        return f"  [pc={pc}]" if pc is not None else ""

    lines = [f"#0  init  =>  {_assign(dict(trace.initial))}{pc_note(trace.initial_pc)}"]
    prev = trace.initial
    for s in trace.steps:
        if s.kind == "test":
            what = f"test {s.sentence}"
        else:
            what = str(s.input)
            if s.sentence is not None:
                what += f"  ({s.sentence})"
        changes = _assign(prev.diff(s.state)) or "(no change)"
        lines.append(f"#{s.index}  {what}  =>  {changes}{pc_note(s.pc)}")
        if s.kind == "change":
            for mc, row in fired_mode_rows(spec, prev, s.state):
                lines.append(f"      {mc}: {row}")
        prev = s.state
    if trace.violated is not None:
        lines.append(f"violated: {render_expr(trace.violated)}")
    return "\n".join(lines)


def trace_to_json(spec: SpecModel, trace: Trace) -> dict:
    steps = []
    prev = trace.initial
    for s in trace.steps:
        steps.append({
            "index": s.index,
            "kind": s.kind,
            "sentence_index": s.sentence_index,
            "sentence": s.sentence,
            "input": None if s.input is None else
            {"variable": s.input.variable, "value": s.input.value},
            "changes": prev.diff(s.state),
            "fired": [{"table": mc, "row": row} for mc, row in fired_mode_rows(spec, prev, s.state)]
            if s.kind == "change" else [],
            "pc": s.pc,
        })
        prev = s.state
    return {
        "initial": dict(trace.initial),
        "initial_pc": trace.initial_pc,
        "steps": steps,
        "final": dict(trace.final_state),
        "violated": None if trace.violated is None else render_expr(trace.violated),
    }


def verdict_to_json(spec: SpecModel, verdict: Verdict, *, bound: int,
                    scenario: Optional[str] = None) -> dict:
    stats = verdict.stats
    doc = {
        "verdict": verdict.kind,
        "spec": spec.name,
        "scenario": scenario,
        "bound": bound,
        "stats": None if stats is None else {
            "states": stats.states, "transitions": stats.transitions,
            "depth": stats.depth, "exhausted": stats.exhausted},
        "trace": None,
        "diagnostics": [],
    }
    if isinstance(verdict, Violation):
        doc["trace"] = trace_to_json(spec, verdict.trace)
    elif isinstance(verdict, ConsistencyError):
        doc["diagnostics"] = [d.to_json() for d in verdict.diagnostics]
    return doc


_VALUE = {"type": ["boolean", "integer", "string"]}
_ASSIGNMENT = {"type": "object", "additionalProperties": _VALUE}

TRACE_SCHEMA = {
    "type": "object",
    "required": ["initial", "initial_pc", "steps", "final", "violated"],
    "additionalProperties": False,
    "properties": {
        "initial": _ASSIGNMENT,
        "initial_pc": {"type": ["integer", "null"]},
        "final": _ASSIGNMENT,
        "violated": {"type": ["string", "null"]},
        "steps": {"type": "array", "items": {
            "type": "object",
            "required": ["index", "kind", "input", "changes", "pc"],
            "additionalProperties": False,
            "properties": {
                "index": {"type": "integer", "minimum": 1},
                "kind": {"enum": ["test", "change"]},
                "sentence_index": {"type": ["integer", "null"]},
                "sentence": {"type": ["string", "null"]},
                "input": {"oneOf": [
                    {"type": "null"},
                    {"type": "object", "required": ["variable", "value"],
                     "additionalProperties": False,
                     "properties": {"variable": {"type": "string"}, "value": _VALUE}}]},
                "changes": _ASSIGNMENT,
                "fired": {"type": "array", "items": {
                    "type": "object", "required": ["table", "row"],
                    "properties": {"table": {"type": "string"}, "row": {"type": "string"}}}},
                "pc": {"type": ["integer", "null"]},
            }}},
    },
}

DIAGNOSTIC_SCHEMA = {
    "type": "object",
    "required": ["severity", "code", "message", "span"],
    "properties": {
        "severity": {"enum": ["error", "warning"]},
        "code": {"type": "string"},
        "message": {"type": "string"},
        "span": {"oneOf": [{"type": "null"}, {
            "type": "object", "required": ["file", "start", "end"],
            "properties": {"file": {"type": "string"},
                           "start": {"type": "array", "items": {"type": "integer"}},
                           "end": {"type": "array", "items": {"type": "integer"}}}}]},
    },
}

VERDICT_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["verdict", "spec", "scenario", "bound", "stats", "trace", "diagnostics"],
    "additionalProperties": False,
    "properties": {
        "verdict": {"enum": ["violation", "no-violation", "consistency-error"]},
        "spec": {"type": "string"},
        "scenario": {"type": ["string", "null"]},
        "bound": {"type": "integer", "minimum": 1},
        "stats": {"oneOf": [{"type": "null"}, {
            "type": "object", "required": ["states", "transitions", "depth", "exhausted"],
            "properties": {"states": {"type": "integer"}, "transitions": {"type": "integer"},
                           "depth": {"type": "integer"}, "exhausted": {"type": "boolean"}}}]},
        "trace": {"oneOf": [{"type": "null"}, TRACE_SCHEMA]},
        "diagnostics": {"type": "array", "items": DIAGNOSTIC_SCHEMA},
    },
}
