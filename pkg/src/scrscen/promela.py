"""Promela emission for a (specification, scenario) pair.

The SCR step follows the usual encoding of SCR tables in Promela: inside one
``atomic`` block the current values are copied to ``<name>_old``, a single
monitored variable is changed nondeterministically, and every table then
updates its variable in dependency order. Events compare ``_old`` copies with
current values, so an event ``@T(c) when d`` becomes
``(d_old && !c_old && c)``.

The scenario runs in one process with a ``pc`` variable that follows the
program-counter automaton of :mod:`scrscen.scenario`. Blocking guards are
labelled ``end_k`` so a run that cannot continue is a valid end state rather
than a deadlock. The last statement is the property assertion, written with
Promela's conditional expression because ``->`` is a statement separator in
Promela and cannot appear bare inside ``assert``::

    assert(pc==4 -> (mc == POR) : true)
"""

from __future__ import annotations

import os
import re
import shutil
import subprocess
import tempfile
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence

from .consistency import check_consistency
from .diagnostics import Diagnostic, has_errors
from .model import (BOOLEAN, ENUMERATION, And, Cmp,
                    ConstRef, Event, EventTable, Expr, Lit, ModeTransitionTable, Not, Or,
                    SpecModel, TypeDef, Value, VarRef)
from .scenario import (GuardedChange, Program, Scenario, Seq, Star, Test,
                       sentences)

PROMELA_KEYWORDS = frozenset("""
    active assert atomic bit bool break byte c_code c_decl c_expr c_state c_track chan
    d_proctype d_step do else empty enabled eval false fi for full get_priority goto
    hidden if in init inline int len local mtype nempty never nfull np_ od of pc_value
    print printf printm priority proctype provided run select set_priority short show
    skip timeout trace notrace true typedef unless unsigned xr xs STDIN
""".split())

# names a spec identifier would shadow in the generated C verifier
C_KEYWORDS = frozenset("""
    auto case char const continue default double enum extern float long main now
    register return signed sizeof static struct switch union void volatile while
""".split())

# identifiers the emitter itself introduces
EMITTED_NAMES = frozenset({"pc", "scr_step", "scenario"})

RESERVED = PROMELA_KEYWORDS | C_KEYWORDS | EMITTED_NAMES


def mangle(name: str) -> str:
    """Map a spec identifier to a Promela identifier.

    Identifiers that are reserved, or that end in ``_v`` or ``_old``, get a
    ``_v`` suffix. Unchanged names never end in ``_v`` and mangled ones always
    do, so the map is injective, and no result ends in ``_old``, the suffix
    used for pre-state copies.
    """
    if name in RESERVED or name.startswith("_") or name.endswith(("_v", "_old")):
        return name + "_v"
    return name


class EmissionError(Exception):
    def __init__(self, diagnostics: Sequence[Diagnostic]):
        self.diagnostics = list(diagnostics)
        super().__init__("; ".join(str(d) for d in self.diagnostics))


@dataclass(frozen=True)
class EmittedModel:
    text: str
    pc_count: int
    assertion_line: int
    names: Dict[str, str]


def _ctype(t: TypeDef) -> str:
    if t.kind == BOOLEAN:
        return "bool"
    if t.kind == ENUMERATION:
        return "mtype"
    if 0 <= t.lo and t.hi <= 255:
        return "byte"
    if -32768 <= t.lo and t.hi <= 32767:
        return "short"
    return "int"


class _Writer:
    def __init__(self, spec: SpecModel, names: Dict[str, str]):
        self.spec = spec
        self.names = names
        self.lines: List[str] = []
        self.labels = 0

    def emit(self, depth: int, text: str) -> None:
        self.lines.append("    " * depth + text)

    def label(self) -> str:
        self.labels += 1
        return f"end_{self.labels}"

    def value(self, v: Value) -> str:
        if isinstance(v, bool):
            return "true" if v else "false"
        if isinstance(v, int):
            return str(v)
        return self.names[v]

    def cond(self, e: Expr, old: bool = False) -> str:
        if isinstance(e, VarRef):
            return self.names[e.name] + ("_old" if old else "")
        if isinstance(e, ConstRef):
            return self.names[e.name]
        if isinstance(e, Lit):
            return self.value(e.value)
        if isinstance(e, Cmp):
            op = "==" if e.op == "=" else e.op
            return f"{self.cond(e.left, old)} {op} {self.cond(e.right, old)}"
        if isinstance(e, Not):
            return f"!({self.cond(e.arg, old)})"
        if isinstance(e, (And, Or)):
            glue = " || " if isinstance(e, Or) else " && "
            return f"({self.cond(e.left, old)}){glue}({self.cond(e.right, old)})"
        raise TypeError(f"not a condition: {e!r}")

    def event(self, e: Expr) -> str:
        if isinstance(e, Event):
            before, after = self.cond(e.arg, old=True), self.cond(e.arg)
            if e.kind == "T":
                text = f"!({before}) && ({after})"
            elif e.kind == "F":
                text = f"({before}) && !({after})"
            else:
                text = f"({before}) != ({after})"
            if e.when is not None:
                text = f"({self.cond(e.when, old=True)}) && {text}"
            return text
        if isinstance(e, Not):
            return f"!({self.event(e.arg)})"
        if isinstance(e, (And, Or)):
            glue = " || " if isinstance(e, Or) else " && "
            return f"({self.guard(e.left)}){glue}({self.guard(e.right)})"
        raise TypeError(f"not an event: {e!r}")

    def guard(self, e: Expr) -> str:
        return self.event(e) if e.is_event else self.cond(e)


def _names_for(spec: SpecModel) -> Dict[str, str]:
    names: Dict[str, str] = {}
    for c, _ in spec.constants:
        names[c] = mangle(c)
    for t in spec.types:
        for lit in t.values:
            names.setdefault(lit, mangle(lit))
    for v in spec.variables:
        names[v.name] = mangle(v.name)
        for lit in v.type.values:
            names.setdefault(lit, mangle(lit))
    return names


def emit_promela(spec: SpecModel, scenario: Scenario, unroll: Optional[int] = None) -> EmittedModel:
    """Emit a self-contained Promela model; raises :class:`EmissionError`
    when the specification has consistency errors."""
    if unroll is not None and unroll < 0:
        raise ValueError("unroll must be >= 0")
    diags = check_consistency(spec)
    if has_errors(diags):
        raise EmissionError([d for d in diags if d.is_error])

    names = _names_for(spec)
    w = _Writer(spec, names)
    aut = scenario.automaton

    w.emit(0, f"/* SCR specification {spec.name}, scenario {scenario.name} */")
    w.emit(0, f"/* program: {scenario.program} */")
    renamed = sorted((k, v) for k, v in names.items() if k != v)
    if renamed:
        w.emit(0, "/* renamed identifiers: "
               + ", ".join(f"{k} -> {v}" for k, v in renamed) + " */")
    w.emit(0, "")
    for c, v in spec.constants:
        w.emit(0, f"#define {names[c]} {w.value(v)}")
    literals = list(dict.fromkeys(names[lit] for v in spec.variables for lit in v.type.values))
    if literals:
        w.emit(0, "mtype = { " + ", ".join(literals) + " };")
    w.emit(0, "")
    for v in spec.variables:
        ty = _ctype(v.type)
        init = w.value(v.initial)
        w.emit(0, f"{ty} {names[v.name]} = {init};")
        w.emit(0, f"{ty} {names[v.name]}_old = {init};")
    w.emit(0, f"{'byte' if max(aut.states) <= 255 else 'short'} pc = {aut.initial};")
    w.emit(0, "")

    _emit_step(w, spec)
    w.emit(0, "")

    w.emit(0, "active proctype scenario() {")
    _emit_program(w, scenario.program, 1, aut.initial, aut.accept, 1, unroll, list(aut.heads))
    w.emit(1, f"assert(pc=={aut.accept} -> ({w.cond(scenario.check)}) : true)")
    assertion_line = len(w.lines)
    w.emit(0, "}")
    text = "\n".join(w.lines) + "\n"
    return EmittedModel(text, aut.accept, assertion_line, names)


def _emit_step(w: _Writer, spec: SpecModel) -> None:
    names = w.names
    w.emit(0, "inline scr_step() {")
    w.emit(1, "atomic {")
    for v in spec.variables:
        w.emit(2, f"{names[v.name]}_old = {names[v.name]};")
    choices = [(m, val) for m in spec.monitored for val in m.type.domain
               if len(m.type.domain) > 1]
    if not choices:
        w.emit(2, "false;")
    else:
        w.emit(2, "if")
        for m, val in choices:
            var = names[m.name]
            w.emit(2, f":: {var} != {w.value(val)} -> {var} = {w.value(val)}")
        w.emit(2, "fi;")
    for _, table in spec.update_plan:
        _emit_table(w, table)
    w.emit(1, "}")
    w.emit(0, "}")


def _emit_table(w: _Writer, table) -> None:
    names = w.names
    if isinstance(table, ModeTransitionTable):
        var = names[table.mode_class]
        w.emit(2, f"/* mode transitions of {table.mode_class} */")
        w.emit(2, "if")
        for r in table.rows:
            w.emit(2, f":: ({var}_old == {names[r.old]}) && ({w.event(r.event)}) -> "
                      f"{var} = {names[r.new]}")
        w.emit(2, ":: else -> skip")
        w.emit(2, "fi;")
        return
    var = names[table.dependent]
    event = isinstance(table, EventTable)
    w.emit(2, f"/* {'event' if event else 'condition'} table of {table.dependent} */")
    w.emit(2, "if")
    seen = set()
    for g in table.groups:
        modes = [m for m in g.modes if m not in seen]
        seen.update(g.modes)
        if table.mode_class and not modes:
            continue
        if table.mode_class:
            mc = names[table.mode_class] + ("_old" if event else "")
            sel = " || ".join(f"{mc} == {names[m]}" for m in modes)
            sel = f"({sel}) && "
        else:
            sel = ""
        for r in g.rows:
            guard = w.event(r.guard) if event else w.cond(r.guard)
            w.emit(2, f":: {sel}({guard}) -> {var} = {w.value(r.value)}")
        if not table.mode_class:
            break
    w.emit(2, ":: else -> skip")
    w.emit(2, "fi;")


def _emit_program(w: _Writer, p: Program, depth: int, entry: int, exit: int,
                  first: int, unroll: Optional[int], heads: List[int]) -> None:
    """Emit ``p`` running from pc ``entry`` to pc ``exit``; ``first`` is the
    index of its first sentence and ``heads`` the loop pcs of the remaining
    repetitions in preorder. Numbering matches :func:`compile_to_automaton`."""
    if isinstance(p, Seq):
        for k, item in enumerate(p.items):
            width = len(sentences(item))
            out = exit if k == len(p.items) - 1 else first + width
            _emit_program(w, item, depth, entry, out, first, unroll, heads)
            entry, first = out, first + width
        return
    if isinstance(p, Star):
        head = heads.pop(0)
        if head != entry:
            w.emit(depth, f"pc = {head};")
        if unroll is None:
            w.emit(depth, "do")
            w.emit(depth, ":: true ->")
            _emit_program(w, p.body, depth + 1, head, head, first, unroll, heads)
            w.emit(depth, ":: break")
            w.emit(depth, "od;")
        else:
            _emit_unrolled(w, p.body, depth, head, first, unroll, unroll, heads)
        w.emit(depth, f"pc = {exit};")
        return
    w.emit(depth, f"/* {first}: {p} */")
    if isinstance(p, Test):
        w.emit(depth, f"{w.label()}: ({w.cond(p.cond)});")
    elif isinstance(p, GuardedChange):
        w.emit(depth, "scr_step();")
        w.emit(depth, f"{w.label()}: ({w.guard(p.guard)});")
    else:
        w.emit(depth, "scr_step();")
    w.emit(depth, f"pc = {exit};")


def _emit_unrolled(w: _Writer, body: Program, depth: int, head: int, first: int,
                   levels: int, unroll: int, heads: List[int]) -> None:
    """``levels`` nested optional passes through ``body``."""
    inner = sum(1 for _ in _stars(body))
    if levels == 0:
        del heads[:inner]
        return
    w.emit(depth, "if")
    w.emit(depth, ":: true ->")
    copy = list(heads[:inner])
    _emit_program(w, body, depth + 1, head, head, first, unroll, copy)
    _emit_unrolled(w, body, depth + 1, head, first, levels - 1, unroll, heads)
    w.emit(depth, ":: true -> skip")
    w.emit(depth, "fi;")


def _stars(p: Program):
    if isinstance(p, Seq):
        for item in p.items:
            yield from _stars(item)
    elif isinstance(p, Star):
        yield p
        yield from _stars(p.body)


# ---------------------------------------------------------------------------
# structural checks

_IDENT = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")
_PAIRS = {"if": "fi", "do": "od"}


def validate_promela(text: str) -> List[str]:
    """Cheap well-formedness checks for emitted models; returns problems found."""
    problems: List[str] = []
    body = re.sub(r"/\*.*?\*/", " ", text, flags=re.S)
    stack: List[str] = []
    for ch in body:
        if ch in "({[":
            stack.append(ch)
        elif ch in ")}]":
            want = {"(": ")", "{": "}", "[": "]"}[stack.pop()] if stack else None
            if want != ch:
                problems.append(f"unbalanced {ch!r}")
                break
    if stack:
        problems.append(f"unclosed {stack[-1]!r}")
    words = _IDENT.findall(re.sub(r"^#define.*$", "", body, flags=re.M))
    blocks: List[str] = []
    for word in words:
        if word in _PAIRS:
            blocks.append(_PAIRS[word])
        elif word in ("fi", "od"):
            if not blocks or blocks.pop() != word:
                problems.append(f"unmatched {word!r}")
    if blocks:
        problems.append(f"missing {blocks[-1]!r}")
    declared = set(re.findall(r"^(?:bool|byte|short|int|mtype)\s+(\w+)", body, flags=re.M))
    declared |= set(re.findall(r"^#define\s+(\w+)", body, flags=re.M))
    mt = re.search(r"^mtype\s*=\s*\{([^}]*)\}", body, flags=re.M)
    if mt:
        declared |= {s.strip() for s in mt.group(1).split(",")}
    labels = re.findall(r"(\w+)\s*:(?!:)", body)
    if len(labels) != len(set(labels)):
        problems.append("duplicate labels")
    declared |= set(labels) | {"scr_step", "scenario"}
    for word in set(words):
        if word not in declared and word not in PROMELA_KEYWORDS:
            problems.append(f"undeclared identifier {word!r}")
    if len(re.findall(r"\bassert\s*\(", body)) != 1:
        problems.append("expected exactly one assertion")
    return sorted(set(problems))


# ---------------------------------------------------------------------------
# optional cross-check with an installed spin

SPIN_ENV = "SCRSCEN_SPIN"


def find_spin() -> Optional[str]:
    """Path of the Spin model checker, or ``None``.

    ``$SCRSCEN_SPIN`` takes precedence over ``spin`` on PATH. Other programs
    named ``spin`` exist, so the candidate must identify itself as Spin.
    """
    configured = os.environ.get(SPIN_ENV)
    candidate = shutil.which(configured) if configured else shutil.which("spin")
    if candidate is None:
        return None
    try:
        out = subprocess.run([candidate, "-V"], capture_output=True, text=True, timeout=10)
    except (OSError, subprocess.SubprocessError):
        return None
    return candidate if "Spin Version" in out.stdout + out.stderr else None


def run_spin(model: EmittedModel, spin: Optional[str] = None, depth: int = 1_000_000,
             timeout: float = 600) -> bool:
    """Verify ``model`` with spin; True when spin reports an assertion violation."""
    spin = spin or find_spin()
    if spin is None:
        raise FileNotFoundError(f"spin not found (set {SPIN_ENV})")
    cc = shutil.which("gcc") or shutil.which("cc")
    if cc is None:
        raise FileNotFoundError("no C compiler for the spin verifier")
    with tempfile.TemporaryDirectory() as tmp:
        path = os.path.join(tmp, "model.pml")
        with open(path, "w") as fh:
            fh.write(model.text)
        subprocess.run([spin, "-a", "model.pml"], cwd=tmp, check=True,
                       capture_output=True, timeout=timeout)
        subprocess.run([cc, "-O2", "-DSAFETY", "-o", "pan", "pan.c"], cwd=tmp, check=True,
                       capture_output=True, timeout=timeout)
        out = subprocess.run(["./pan", f"-m{depth}"], cwd=tmp, capture_output=True,
                             text=True, timeout=timeout).stdout
    m = re.search(r"errors:\s*(\d+)", out)
    if m is None:
        raise RuntimeError(f"unexpected verifier output:\n{out}")
    return int(m.group(1)) > 0 or "assertion violated" in out
