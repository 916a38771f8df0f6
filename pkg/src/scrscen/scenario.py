"""Scenario programs over SCR specifications.

A scenario is a program built from three kinds of sentences::

    [ f ]               test: no state change, blocks unless f holds
    stateChange         any one-input step of the specification
    stateChange[ g ]    a step that satisfies g

combined with ``;`` (sequence), postfix ``*`` (zero or more repetitions) and
``( ... )`` grouping, plus a condition that must hold whenever the program
has run to completion::

    program : { stateChange*; [ mc = MAGnormal ]; stateChange[@F(tMagnetON)] }
    check : { mc = Normal }

A guard ``g`` is either an event formula, judged on the step's old/new pair,
or a condition, which must hold in the new state.

Programs compile into a program-counter automaton. Sentence ``i`` (counting
from 1, left to right) is taken from pc ``i`` in straight-line code, and the
program has finished at pc ``n + 1``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Dict, FrozenSet, List, Optional, Tuple, Union

from .diagnostics import Diagnostic, ParseError, SourceSpan, error
from .lexer import EOF
from .model import Expr, SpecModel
from .parser import TokenParser, _Syntax, render_expr
from .typecheck import checker_for


@dataclass(frozen=True)
class Test:
    cond: Expr
    __test__ = False  # not a pytest test class
    span: Optional[SourceSpan] = field(default=None, compare=False, repr=False)

    def __str__(self) -> str:
        return f"[{render_expr(self.cond)}]"


@dataclass(frozen=True)
class StateChange:
    span: Optional[SourceSpan] = field(default=None, compare=False, repr=False)

    def __str__(self) -> str:
        return "stateChange"


@dataclass(frozen=True)
class GuardedChange:
    guard: Expr
    span: Optional[SourceSpan] = field(default=None, compare=False, repr=False)

    def __str__(self) -> str:
        return f"stateChange[{render_expr(self.guard)}]"

    def admits(self, old, new) -> bool:
        if self.guard.is_event:
            return self.guard.holds(old, new)
        return bool(self.guard.eval(new))


Sentence = Union[Test, StateChange, GuardedChange]


@dataclass(frozen=True)
class Seq:
    items: Tuple["Program", ...]

    def __str__(self) -> str:
        return "; ".join(_render_item(p) for p in self.items)


@dataclass(frozen=True)
class Star:
    body: "Program"

    def __str__(self) -> str:
        return f"{_render_item(self.body)}*"


Program = Union[Test, StateChange, GuardedChange, Seq, Star]


def _render_item(p: Program) -> str:
    return f"({p})" if isinstance(p, Seq) else str(p)


def sentences(p: Program) -> List[Sentence]:
    """Sentence occurrences, left to right."""
    if isinstance(p, Seq):
        return [s for item in p.items for s in sentences(item)]
    if isinstance(p, Star):
        return sentences(p.body)
    return [p]


@dataclass(frozen=True)
class Scenario:
    program: Program
    check: Expr
    name: str = field(default="scenario", compare=False)

    @cached_property
    def automaton(self) -> "PcAutomaton":
        return compile_to_automaton(self.program)

    def __str__(self) -> str:
        return f"program : {{ {self.program} }} check : {{ {render_expr(self.check)} }}"


# ---------------------------------------------------------------------------
# parsing

class ScenarioParser(TokenParser):
    def parse(self) -> Tuple[Program, Expr]:
        if not self.tok.is_word("program"):
            raise self.fail("expected 'program'")
        self.advance()
        self.expect_op(":")
        self.expect_op("{")
        if self.tok.is_op("}"):
            raise self.fail("empty program")
        prog = self.program()
        self.expect_op("}")
        self.expect_word("check")
        self.expect_op(":")
        if self.accept_op("{"):
            prop = self.expr()
            self.expect_op("}")
        else:
            prop = self.expr()
        if self.tok.kind != EOF:
            raise self.fail("expected end of scenario")
        return prog, prop

    def program(self) -> Program:
        items = [self.item()]
        while self.accept_op(";"):
            items.append(self.item())
        return items[0] if len(items) == 1 else Seq(tuple(items))

    def item(self) -> Program:
        if self.accept_op("("):
            p = self.program()
            self.expect_op(")")
        else:
            p = self.sentence()
        while self.accept_op("*"):
            p = Star(p)
        return p

    def sentence(self) -> Sentence:
        t = self.tok
        if t.is_op("["):
            self.advance()
            cond = self.expr()
            close = self.expect_op("]")
            return Test(cond, t.span.to(close.span))
        if t.is_word("stateChange"):
            self.advance()
            if self.tok.is_op("["):
                self.advance()
                guard = self.expr()
                close = self.expect_op("]")
                return GuardedChange(guard, t.span.to(close.span))
            return StateChange(t.span)
        raise self.fail("expected a sentence ('[ f ]', 'stateChange' or 'stateChange[ f ]')")


def parse_scenario(text: str, spec: SpecModel, filename: str = "<scenario>",
                   name: Optional[str] = None) -> Scenario:
    """Parse a scenario and resolve it against ``spec``; raises :class:`ParseError`."""
    try:
        prog, prop = ScenarioParser(text, filename).parse()
    except _Syntax as exc:
        raise ParseError([exc.diag]) from None
    diags: List[Diagnostic] = []
    checker = checker_for(spec, diags)

    def resolve(p: Program) -> Program:
        if isinstance(p, Seq):
            return Seq(tuple(resolve(i) for i in p.items))
        if isinstance(p, Star):
            if all(isinstance(s, Test) for s in sentences(p.body)):
                diags.append(error("test-loop", "a repeated block must contain a state change",
                                   _first_span(p)))
            return Star(resolve(p.body))
        if isinstance(p, Test):
            return Test(checker.condition(p.cond, "test"), p.span)
        if isinstance(p, GuardedChange):
            return GuardedChange(checker.guard(p.guard), p.span)
        return p

    prog = resolve(prog)
    check = checker.condition(prop, "check property")
    if diags:
        raise ParseError(diags)
    if name is None:
        name = filename.rsplit("/", 1)[-1].rsplit(".", 1)[0]
    return Scenario(prog, check, name)


def _first_span(p: Program) -> Optional[SourceSpan]:
    for s in sentences(p):
        if s.span is not None:
            return s.span
    return None


# ---------------------------------------------------------------------------
# program-counter automaton

@dataclass(frozen=True)
class Edge:
    src: int
    index: int
    sentence: Sentence
    dst: int


@dataclass(frozen=True)
class PcAutomaton:
    """Sentence-labelled automaton over pcs ``1..n+1``.

    ``skips`` are unlabelled moves that leave or bypass a repetition.
    ``heads`` gives the loop pc of each repetition in preorder; it is the
    repetition's entry pc except when that pc already heads an enclosing
    repetition, in which case a fresh pc above ``n + 1`` is used.
    """

    n: int
    edges: Tuple[Edge, ...]
    skips: Tuple[Tuple[int, int], ...]
    heads: Tuple[int, ...] = ()

    initial = 1

    @property
    def accept(self) -> int:
        return self.n + 1

    @cached_property
    def states(self) -> FrozenSet[int]:
        pcs = {self.initial, self.accept}
        for e in self.edges:
            pcs.update((e.src, e.dst))
        for a, b in self.skips:
            pcs.update((a, b))
        return frozenset(pcs)

    @cached_property
    def _out(self) -> Dict[int, Tuple[Edge, ...]]:
        out: Dict[int, List[Edge]] = {}
        for e in self.edges:
            out.setdefault(e.src, []).append(e)
        return {k: tuple(v) for k, v in out.items()}

    def out(self, pc: int) -> Tuple[Edge, ...]:
        return self._out.get(pc, ())

    @cached_property
    def _closures(self) -> Dict[int, Tuple[int, ...]]:
        nxt: Dict[int, List[int]] = {}
        for a, b in self.skips:
            nxt.setdefault(a, []).append(b)
        result = {}
        for pc in self.states:
            seen = [pc]
            i = 0
            while i < len(seen):
                for b in nxt.get(seen[i], ()):
                    if b not in seen:
                        seen.append(b)
                i += 1
            result[pc] = tuple(sorted(seen))
        return result

    def closure(self, pc: int) -> Tuple[int, ...]:
        """``pc`` and every pc reachable from it through skips, ascending."""
        return self._closures[pc]

    def accepts(self, word) -> bool:
        """Whether a sequence of sentence indices is a complete run."""
        current = set(self.closure(self.initial))
        for idx in word:
            current = {q for e in self.edges if e.src in current and e.index == idx
                       for q in self.closure(e.dst)}
            if not current:
                return False
        return self.accept in current


def compile_to_automaton(program: Program) -> PcAutomaton:
    edges: List[Edge] = []
    skips: List[Tuple[int, int]] = []
    heads: List[int] = []
    n = len(sentences(program))
    spare = [n + 1]

    def build(p: Program, entry: int, exit: int, pos: int, loops: FrozenSet[int]) -> None:
        # ``pos`` is the index of p's first sentence; ``loops`` holds the
        # heads of the enclosing repetitions
        if isinstance(p, Seq):
            for k, item in enumerate(p.items):
                width = len(sentences(item))
                out = exit if k == len(p.items) - 1 else pos + width
                build(item, entry, out, pos, loops)
                entry, pos = out, pos + width
        elif isinstance(p, Star):
            if all(isinstance(s, Test) for s in sentences(p.body)):
                raise ValueError("a repeated block must contain a state change")
            head = entry
            if entry in loops:
                # a repetition opening another one needs its own loop pc,
                # or a run could leave the outer loop halfway through an iteration
                spare[0] += 1
                head = spare[0]
                skips.append((entry, head))
            heads.append(head)
            skips.append((head, exit))
            build(p.body, head, head, pos, loops | {head})
        else:
            edges.append(Edge(entry, pos, p, exit))

    build(program, 1, n + 1, 1, frozenset())
    return PcAutomaton(n, tuple(sorted(edges, key=lambda e: (e.src, e.index))), tuple(skips),
                       tuple(heads))
