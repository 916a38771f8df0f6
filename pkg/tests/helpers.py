"""Test support: corpus access, random small specifications with an
independent reference interpreter, and run-enumeration oracles.

The reference interpreter works on plain tuples and dicts and shares no code
with the package, so agreement between the two is meaningful evidence.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from functools import lru_cache
from itertools import product
from typing import Dict, FrozenSet, List, Optional, Set, Tuple

from scrscen.corpus import corpus_dir
from scrscen.parser import parse_spec
from scrscen.scenario import parse_scenario

CORPUS = corpus_dir()


@lru_cache(maxsize=None)
def corpus_spec(variant: str):
    path = CORPUS / f"pacemaker_{variant}.scr"
    return parse_spec(path.read_text(), str(path))


def corpus_scenario(variant: str, name: str):
    path = CORPUS / f"{name}.scn"
    return parse_scenario(path.read_text(), corpus_spec(variant), str(path))


# ---------------------------------------------------------------------------
# tiny formula language for the reference interpreter
#
# conditions: ("lit", b) ("var", x) ("mode", M) ("not", c) ("and", c, d) ("or", c, d)
# events:     ("ev", kind, c, when|None) ("enot", e) ("eand", e, f) ("eor", e, f)

MC = "mc"


def c_text(c) -> str:
    tag = c[0]
    if tag == "lit":
        return "true" if c[1] else "false"
    if tag == "var":
        return c[1]
    if tag == "mode":
        return f"{MC} = {c[1]}"
    if tag == "not":
        return f"NOT ({c_text(c[1])})"
    glue = " AND " if tag == "and" else " OR "
    return f"({c_text(c[1])}){glue}({c_text(c[2])})"


def c_eval(c, st) -> bool:
    tag = c[0]
    if tag == "lit":
        return c[1]
    if tag == "var":
        return st[c[1]]
    if tag == "mode":
        return st[MC] == c[1]
    if tag == "not":
        return not c_eval(c[1], st)
    if tag == "and":
        return c_eval(c[1], st) and c_eval(c[2], st)
    return c_eval(c[1], st) or c_eval(c[2], st)


def e_text(e) -> str:
    tag = e[0]
    if tag == "ev":
        _, kind, c, when = e
        text = f"@{kind}({c_text(c)})"
        return text if when is None else f"({text} when ({c_text(when)}))"
    if tag == "enot":
        return f"NOT ({e_text(e[1])})"
    glue = " AND " if tag == "eand" else " OR "
    return f"({e_text(e[1])}){glue}({e_text(e[2])})"


def e_holds(e, old, new) -> bool:
    tag = e[0]
    if tag == "ev":
        _, kind, c, when = e
        if when is not None and not c_eval(when, old):
            return False
        a, b = c_eval(c, old), c_eval(c, new)
        if kind == "T":
            return (not a) and b
        if kind == "F":
            return a and not b
        return a != b
    if tag == "enot":
        return not e_holds(e[1], old, new)
    if tag == "eand":
        return e_holds(e[1], old, new) and e_holds(e[2], old, new)
    return e_holds(e[1], old, new) or e_holds(e[2], old, new)


def random_cond(rng: random.Random, names: List[str], modes: List[str], depth: int = 2):
    roll = rng.random()
    if depth == 0 or roll < 0.45:
        pick = rng.random()
        if pick < 0.08:
            return ("lit", rng.random() < 0.5)
        if modes and pick < 0.35:
            return ("mode", rng.choice(modes))
        return ("var", rng.choice(names))
    if roll < 0.6:
        return ("not", random_cond(rng, names, modes, depth - 1))
    tag = "and" if roll < 0.8 else "or"
    return (tag, random_cond(rng, names, modes, depth - 1), random_cond(rng, names, modes, depth - 1))


def random_event(rng: random.Random, names: List[str], when_modes: List[str], depth: int = 1):
    """An event whose argument reads only ``names``; the when-clause may read modes."""
    if depth > 0 and rng.random() < 0.2:
        roll = rng.random()
        if roll < 0.3:
            return ("enot", random_event(rng, names, when_modes, depth - 1))
        tag = "eand" if roll < 0.65 else "eor"
        return (tag, random_event(rng, names, when_modes, depth - 1),
                random_event(rng, names, when_modes, depth - 1))
    kind = rng.choice("TTFFC")
    arg = random_cond(rng, names, [], 1)
    if kind == "C" and arg[0] == "lit":
        arg = ("var", rng.choice(names))
    when = random_cond(rng, names, when_modes, 1) if rng.random() < 0.4 else None
    return ("ev", kind, arg, when)


# ---------------------------------------------------------------------------
# random small specifications

class Nondeterministic(Exception):
    pass


@dataclass(frozen=True)
class SmallSpec:
    """Boolean monitored variables plus one mode class ``mc``."""

    monitored: Tuple[str, ...]
    init: Tuple[bool, ...]
    modes: Tuple[str, ...]
    init_mode: str
    rows: Tuple[Tuple[str, tuple, str], ...]

    def text(self) -> str:
        lines = ["spec Small", "monitored"]
        for name, v in zip(self.monitored, self.init):
            lines.append(f"  {name} : bool = {'true' if v else 'false'}")
        lines.append(f"modeclass {MC} {{")
        lines.append("  modes " + ", ".join(self.modes))
        lines.append(f"  initial {self.init_mode}")
        for old, ev, new in self.rows:
            lines.append(f"  {old} -- {e_text(ev)} --> {new}")
        lines.append("}")
        return "\n".join(lines) + "\n"

    def initial(self) -> Dict[str, object]:
        st = dict(zip(self.monitored, self.init))
        st[MC] = self.init_mode
        return st

    def step(self, st, var) -> Dict[str, object]:
        new = dict(st)
        new[var] = not st[var]
        fired = [r for r in self.rows if r[0] == st[MC] and e_holds(r[1], st, new)]
        if len(fired) > 1:
            raise Nondeterministic(fired)
        if fired:
            new[MC] = fired[0][2]
        return new

    def all_states(self):
        for vals in product((False, True), repeat=len(self.monitored)):
            for m in self.modes:
                st = dict(zip(self.monitored, vals))
                st[MC] = m
                yield st

    def deterministic(self) -> bool:
        try:
            for st in self.all_states():
                for var in self.monitored:
                    self.step(st, var)
        except Nondeterministic:
            return False
        return True


def random_small_spec(rng: random.Random, max_rows: int = 5) -> SmallSpec:
    names = ["a", "b"][: rng.randint(1, 2)]
    modes = ["M0", "M1", "M2"][: rng.randint(1, 3)]
    rows = []
    for _ in range(rng.randint(0, max_rows)):
        rows.append((rng.choice(modes), random_event(rng, names, modes), rng.choice(modes)))
    return SmallSpec(tuple(names), tuple(rng.random() < 0.5 for _ in names), tuple(modes),
                     rng.choice(modes), tuple(rows))


def random_deterministic_spec(rng: random.Random) -> SmallSpec:
    while True:
        spec = random_small_spec(rng)
        if spec.deterministic():
            return spec


# ---------------------------------------------------------------------------
# random scenario programs
#
# ("test", c) ("change",) ("guard", g) where g is ("cond", c) or ("event", e)
# ("seq", [items]) ("star", body)

def p_sentences(p) -> List[tuple]:
    if p[0] == "seq":
        return [s for q in p[1] for s in p_sentences(q)]
    if p[0] == "star":
        return p_sentences(p[1])
    return [p]


def p_text(p) -> str:
    tag = p[0]
    if tag == "test":
        return f"[ {c_text(p[1])} ]"
    if tag == "change":
        return "stateChange"
    if tag == "guard":
        kind, f = p[1]
        return f"stateChange[ {c_text(f) if kind == 'cond' else e_text(f)} ]"
    if tag == "seq":
        return "; ".join(f"({p_text(q)})" if q[0] == "seq" else p_text(q) for q in p[1])
    body = p[1]
    return f"({p_text(body)})*" if body[0] == "seq" else f"{p_text(body)}*"


def random_sentence(rng: random.Random, names, modes):
    roll = rng.random()
    if roll < 0.3:
        return ("change",)
    if roll < 0.55:
        return ("test", random_cond(rng, names, modes, 1))
    if rng.random() < 0.5:
        return ("guard", ("cond", random_cond(rng, names, modes, 1)))
    return ("guard", ("event", random_event(rng, names, modes)))


def random_program(rng: random.Random, names, modes, max_sentences: int = 3,
                   nest: bool = True):
    """A program of at most ``max_sentences`` sentences with random repetition."""
    n = rng.randint(1, max_sentences)
    sents = [random_sentence(rng, names, modes) for _ in range(n)]
    items: List[tuple] = []
    i = 0
    while i < n:
        width = rng.randint(1, n - i)
        chunk = sents[i:i + width]
        block = chunk[0] if width == 1 else ("seq", chunk)
        if rng.random() < 0.35 and any(s[0] != "test" for s in chunk):
            block = ("star", block)
        elif width > 1:
            items.extend(chunk)
            i += width
            continue
        items.append(block)
        i += width
    program = items[0] if len(items) == 1 else ("seq", items)
    body = p_sentences(program)
    if (nest and len(body) < max_sentences and rng.random() < 0.25
            and any(s[0] != "test" for s in body)):
        # a repetition whose body opens with the program so far
        program = ("star", ("seq", [program, random_sentence(rng, names, modes)]))
    return program


def scenario_text(program, check) -> str:
    return f"program : {{ {p_text(program)} }} check : {{ {c_text(check)} }}"


# ---------------------------------------------------------------------------
# run enumeration oracle

def _key(st) -> tuple:
    return tuple(sorted(st.items()))


def runs(spec: SmallSpec, program, start, budget: int) -> Set[Tuple[tuple, int]]:
    """Every (final state, sentences executed) of complete executions of
    ``program`` from ``start`` using at most ``budget`` sentences."""
    tag = program[0]
    if budget <= 0 and tag in ("test", "change", "guard"):
        return set()
    if tag == "test":
        return {(_key(start), 1)} if c_eval(program[1], start) else set()
    if tag in ("change", "guard"):
        out = set()
        for var in spec.monitored:
            new = spec.step(start, var)
            if tag == "guard":
                kind, f = program[1]
                ok = c_eval(f, new) if kind == "cond" else e_holds(f, start, new)
                if not ok:
                    continue
            out.add((_key(new), 1))
        return out
    if tag == "seq":
        current = {(_key(start), 0)}
        for item in program[1]:
            nxt = set()
            for st, used in current:
                for st2, more in runs(spec, item, dict(st), budget - used):
                    nxt.add((st2, used + more))
            current = nxt
        return current
    # star: zero or more passes through the body
    seen = {(_key(start), 0)}
    frontier = list(seen)
    while frontier:
        st, used = frontier.pop()
        for st2, more in runs(spec, program[1], dict(st), budget - used):
            item = (st2, used + more)
            if more > 0 and item not in seen:
                seen.add(item)
                frontier.append(item)
    return seen


def oracle_verdict(spec: SmallSpec, program, check, bound: int) -> Optional[int]:
    """Length of the shortest violating run within ``bound``, or None."""
    lengths = [used for st, used in runs(spec, program, spec.initial(), bound)
               if not c_eval(check, dict(st))]
    return min(lengths) if lengths else None


# ---------------------------------------------------------------------------
# regular-language oracle for scenario programs over abstract sentences

def denotation(p, max_len: int) -> FrozenSet[Tuple[int, ...]]:
    """Words of sentence indices denoted by ``p`` (sentences numbered by
    position, as ``("s", k)`` leaves), truncated to ``max_len``."""
    tag = p[0]
    if tag == "s":
        return frozenset({(p[1],)}) if max_len >= 1 else frozenset()
    if tag == "seq":
        words = {()}
        for q in p[1]:
            words = {w + v for w in words for v in denotation(q, max_len)
                     if len(w) + len(v) <= max_len}
        return frozenset(words)
    body = denotation(p[1], max_len)
    words = {()}
    frontier = {()}
    while frontier:
        frontier = {w + v for w in frontier for v in body
                    if v and len(w) + len(v) <= max_len} - words
        words |= frontier
    return frozenset(words)
