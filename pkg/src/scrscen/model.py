"""SCR domain types and the operational semantics of tables.

Values are plain Python objects: ``bool`` for booleans, ``int`` for bounded
integers and ``str`` for enumeration literals (mode names included).
Conditions are evaluated against anything indexable by variable name, which
lets a single step read old values from one state and already-updated new
values from the successor under construction.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import (Any, Dict, Iterator, List, Mapping, Optional,
                    Sequence, Tuple, Union)

from .diagnostics import SourceSpan

Value = Union[bool, int, str]

BOOLEAN = "boolean"
INTEGER = "integer"
ENUMERATION = "enumeration"

MONITORED = "monitored"
CONTROLLED = "controlled"
TERM = "term"
MODE_CLASS = "mode-class"


class ModelError(Exception):
    """A model was constructed that violates one of its invariants."""


class NondeterministicTransition(Exception):
    """Two or more rows of one table fired in the same step."""

    def __init__(self, table: str, mode: Optional[Value], rows: Sequence[int]):
        self.table = table
        self.mode = mode
        self.rows = tuple(rows)
        where = f" in mode {mode}" if mode is not None else ""
        super().__init__(f"table {table}{where}: rows {', '.join(map(str, self.rows))} "
                         "fire simultaneously")


def format_value(v: Value) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    return str(v)


# ---------------------------------------------------------------------------
# types and declarations

@dataclass(frozen=True)
class TypeDef:
    """A finite type. ``name`` is ``None`` for types written inline."""

    name: Optional[str]
    kind: str
    lo: int = 0
    hi: int = 0
    values: Tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if self.kind == INTEGER and self.lo > self.hi:
            raise ModelError(f"empty integer range {self.lo}..{self.hi}")
        if self.kind == ENUMERATION:
            if not self.values:
                raise ModelError("enumeration needs at least one value")
            if len(set(self.values)) != len(self.values):
                raise ModelError(f"duplicate enumeration values in {self.values}")
        if self.kind not in (BOOLEAN, INTEGER, ENUMERATION):
            raise ModelError(f"unknown type kind {self.kind!r}")

    @cached_property
    def domain(self) -> Tuple[Value, ...]:
        """All values in canonical order (the order used for tie-breaking)."""
        if self.kind == BOOLEAN:
            return (False, True)
        if self.kind == INTEGER:
            return tuple(range(self.lo, self.hi + 1))
        return self.values

    def contains(self, v: Any) -> bool:
        if self.kind == BOOLEAN:
            return isinstance(v, bool)
        if self.kind == INTEGER:
            return isinstance(v, int) and not isinstance(v, bool) and self.lo <= v <= self.hi
        return isinstance(v, str) and v in self.values

    def rank(self, v: Value) -> int:
        return self.domain.index(v)

    def text(self) -> str:
        if self.kind == BOOLEAN:
            return "bool"
        if self.kind == INTEGER:
            return f"{self.lo}..{self.hi}"
        return "{" + ", ".join(self.values) + "}"


BOOL_TYPE = TypeDef(None, BOOLEAN)


@dataclass(frozen=True)
class VariableDecl:
    name: str
    role: str
    type: TypeDef
    initial: Value
    span: Optional[SourceSpan] = field(default=None, compare=False, repr=False)


# ---------------------------------------------------------------------------
# expressions

@dataclass(frozen=True)
class Expr:
    def eval(self, state) -> Value:
        raise NotImplementedError

    def variables(self) -> Iterator[str]:
        """Every variable the expression reads."""
        return iter(())

    def new_reads(self) -> Iterator[str]:
        """Variables whose value in the successor state matters."""
        return self.variables()

    @property
    def is_event(self) -> bool:
        return False


@dataclass(frozen=True)
class Name(Expr):
    """Unresolved identifier, produced by the parser and replaced on type check."""

    ident: str
    span: Optional[SourceSpan] = field(default=None, compare=False, repr=False)

    def eval(self, state) -> Value:
        raise ModelError(f"unresolved name {self.ident!r}")


@dataclass(frozen=True)
class Lit(Expr):
    value: Value
    span: Optional[SourceSpan] = field(default=None, compare=False, repr=False)

    def eval(self, state) -> Value:
        return self.value


@dataclass(frozen=True)
class ConstRef(Expr):
    name: str
    value: Value
    span: Optional[SourceSpan] = field(default=None, compare=False, repr=False)

    def eval(self, state) -> Value:
        return self.value


@dataclass(frozen=True)
class VarRef(Expr):
    name: str
    span: Optional[SourceSpan] = field(default=None, compare=False, repr=False)

    def eval(self, state) -> Value:
        return state[self.name]

    def variables(self) -> Iterator[str]:
        yield self.name


_CMP = {
    "=": lambda a, b: a == b,
    "!=": lambda a, b: a != b,
    "<": lambda a, b: a < b,
    "<=": lambda a, b: a <= b,
    ">": lambda a, b: a > b,
    ">=": lambda a, b: a >= b,
}
COMPARISONS = tuple(_CMP)


@dataclass(frozen=True)
class Cmp(Expr):
    op: str
    left: Expr
    right: Expr
    span: Optional[SourceSpan] = field(default=None, compare=False, repr=False)

    def eval(self, state) -> Value:
        return _CMP[self.op](self.left.eval(state), self.right.eval(state))

    def variables(self) -> Iterator[str]:
        yield from self.left.variables()
        yield from self.right.variables()


@dataclass(frozen=True)
class Not(Expr):
    arg: Expr
    span: Optional[SourceSpan] = field(default=None, compare=False, repr=False)

    def eval(self, state) -> Value:
        return not self.arg.eval(state)

    def holds(self, old, new) -> bool:
        return not self.arg.holds(old, new)

    def variables(self) -> Iterator[str]:
        return self.arg.variables()

    def new_reads(self) -> Iterator[str]:
        return self.arg.new_reads()

    @property
    def is_event(self) -> bool:
        return self.arg.is_event


@dataclass(frozen=True)
class And(Expr):
    left: Expr
    right: Expr
    span: Optional[SourceSpan] = field(default=None, compare=False, repr=False)

    def eval(self, state) -> Value:
        return self.left.eval(state) and self.right.eval(state)

    def holds(self, old, new) -> bool:
        return self.left.holds(old, new) and self.right.holds(old, new)

    def variables(self) -> Iterator[str]:
        yield from self.left.variables()
        yield from self.right.variables()

    def new_reads(self) -> Iterator[str]:
        yield from self.left.new_reads()
        yield from self.right.new_reads()

    @property
    def is_event(self) -> bool:
        return self.left.is_event or self.right.is_event


@dataclass(frozen=True)
class Or(And):
    def eval(self, state) -> Value:
        return self.left.eval(state) or self.right.eval(state)

    def holds(self, old, new) -> bool:
        return self.left.holds(old, new) or self.right.holds(old, new)


@dataclass(frozen=True)
class Event(Expr):
    """``@T(c)``, ``@F(c)`` or ``@C(c)``, optionally ``when d``.

    The when-clause is evaluated in the old state. ``@C`` accepts any
    expression and fires when its value differs between the two states.
    """

    kind: str
    arg: Expr
    when: Optional[Expr] = None
    span: Optional[SourceSpan] = field(default=None, compare=False, repr=False)

    def holds(self, old, new) -> bool:
        if self.when is not None and not self.when.eval(old):
            return False
        before = self.arg.eval(old)
        after = self.arg.eval(new)
        if self.kind == "T":
            return not before and bool(after)
        if self.kind == "F":
            return bool(before) and not after
        return before != after

    def eval(self, state) -> Value:
        raise ModelError("an event has no value in a single state")

    def variables(self) -> Iterator[str]:
        yield from self.arg.variables()
        if self.when is not None:
            yield from self.when.variables()

    def new_reads(self) -> Iterator[str]:
        return self.arg.variables()

    @property
    def is_event(self) -> bool:
        return True


def eval_cond(expr: Expr, state) -> bool:
    return bool(expr.eval(state))


def eval_event(expr: Expr, old, new) -> bool:
    return expr.holds(old, new)


# ---------------------------------------------------------------------------
# tables

@dataclass(frozen=True)
class ModeRow:
    old: str
    event: Expr
    new: str
    span: Optional[SourceSpan] = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class ModeTransitionTable:
    mode_class: str
    rows: Tuple[ModeRow, ...]
    span: Optional[SourceSpan] = field(default=None, compare=False, repr=False)

    def rows_from(self, mode: Value) -> List[Tuple[int, ModeRow]]:
        return [(i, r) for i, r in enumerate(self.rows) if r.old == mode]


@dataclass(frozen=True)
class TableRow:
    """One row of an event table (``guard`` is an event) or condition table."""

    guard: Expr
    value: Value
    span: Optional[SourceSpan] = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class RowGroup:
    """Rows that apply while the governing mode class is in one of ``modes``.

    ``modes`` is empty for tables that do not depend on a mode class.
    """

    modes: Tuple[str, ...]
    rows: Tuple[TableRow, ...]
    span: Optional[SourceSpan] = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class _DependentTable:
    dependent: str
    mode_class: Optional[str]
    groups: Tuple[RowGroup, ...]
    keep_default: bool = False
    span: Optional[SourceSpan] = field(default=None, compare=False, repr=False)

    def group_for(self, mode: Optional[Value]) -> Optional[RowGroup]:
        for g in self.groups:
            if self.mode_class is None or mode in g.modes:
                return g
        return None


class EventTable(_DependentTable):
    """New value decided by events; groups select on the OLD mode."""


class ConditionTable(_DependentTable):
    """New value decided by conditions; groups select on the NEW mode."""


Table = Union[ModeTransitionTable, EventTable, ConditionTable]


def fire_mode_table(table: ModeTransitionTable, old, new) -> Value:
    mode = old[table.mode_class]
    fired = [(i, r) for i, r in table.rows_from(mode) if r.event.holds(old, new)]
    if len(fired) > 1:
        raise NondeterministicTransition(table.mode_class, mode, [i for i, _ in fired])
    return fired[0][1].new if fired else mode


def fire_event_table(table: EventTable, old, new) -> Value:
    mode = old[table.mode_class] if table.mode_class else None
    group = table.group_for(mode)
    if group is None:
        return old[table.dependent]
    fired = [(i, r) for i, r in enumerate(group.rows) if r.guard.holds(old, new)]
    if len(fired) > 1:
        raise NondeterministicTransition(table.dependent, mode, [i for i, _ in fired])
    return fired[0][1].value if fired else old[table.dependent]


def fire_condition_table(table: ConditionTable, old, new) -> Value:
    mode = new[table.mode_class] if table.mode_class else None
    group = table.group_for(mode)
    if group is None:
        return old[table.dependent]
    fired = [(i, r) for i, r in enumerate(group.rows) if r.guard.eval(new)]
    if len(fired) > 1:
        raise NondeterministicTransition(table.dependent, mode, [i for i, _ in fired])
    return fired[0][1].value if fired else old[table.dependent]


def fire_table(table: Table, old, new) -> Value:
    if isinstance(table, ModeTransitionTable):
        return fire_mode_table(table, old, new)
    if isinstance(table, EventTable):
        return fire_event_table(table, old, new)
    return fire_condition_table(table, old, new)


def table_target(table: Table) -> str:
    return table.mode_class if isinstance(table, ModeTransitionTable) else table.dependent


def table_new_reads(table: Table) -> List[str]:
    """Variables whose NEW value the table reads (its dependency edges)."""
    reads: List[str] = []
    if isinstance(table, ModeTransitionTable):
        for r in table.rows:
            reads.extend(r.event.new_reads())
    else:
        if isinstance(table, ConditionTable) and table.mode_class:
            reads.append(table.mode_class)
        for g in table.groups:
            for r in g.rows:
                reads.extend(r.guard.new_reads())
    return list(dict.fromkeys(reads))


# ---------------------------------------------------------------------------
# the specification and its states

@dataclass(frozen=True)
class SpecModel:
    """A type-checked SCR specification.

    Build instances through :func:`scrscen.typecheck.build_spec` or the
    parser; both establish the invariants and compute ``order``.
    """

    name: str
    constants: Tuple[Tuple[str, Value], ...]
    types: Tuple[TypeDef, ...]
    variables: Tuple[VariableDecl, ...]
    mode_tables: Tuple[ModeTransitionTable, ...] = ()
    event_tables: Tuple[EventTable, ...] = ()
    cond_tables: Tuple[ConditionTable, ...] = ()
    order: Tuple[str, ...] = field(default=(), compare=False)

    @cached_property
    def index(self) -> Dict[str, int]:
        return {v.name: i for i, v in enumerate(self.variables)}

    @cached_property
    def decls(self) -> Dict[str, VariableDecl]:
        return {v.name: v for v in self.variables}

    @cached_property
    def constant_map(self) -> Dict[str, Value]:
        return dict(self.constants)

    @cached_property
    def monitored(self) -> Tuple[VariableDecl, ...]:
        return tuple(v for v in self.variables if v.role == MONITORED)

    @cached_property
    def tables_by_target(self) -> Dict[str, Table]:
        out: Dict[str, Table] = {}
        for t in (*self.mode_tables, *self.event_tables, *self.cond_tables):
            out[table_target(t)] = t
        return out

    @cached_property
    def update_plan(self) -> Tuple[Tuple[int, Table], ...]:
        return tuple((self.index[name], self.tables_by_target[name]) for name in self.order)

    def initial_state(self) -> "SystemState":
        return SystemState(self.index, tuple(v.initial for v in self.variables))

    def state(self, values: Mapping[str, Value]) -> "SystemState":
        missing = set(self.index) - set(values)
        extra = set(values) - set(self.index)
        if missing or extra:
            raise ModelError(f"state must assign exactly the declared variables "
                             f"(missing {sorted(missing)}, extra {sorted(extra)})")
        for v in self.variables:
            if not v.type.contains(values[v.name]):
                raise ModelError(f"{values[v.name]!r} is not a value of {v.name}")
        return SystemState(self.index, tuple(values[v.name] for v in self.variables))


class SystemState(Mapping[str, Value]):
    """Immutable total assignment of values to the declared variables."""

    __slots__ = ("_index", "values", "_hash")

    def __init__(self, index: Mapping[str, int], values: Tuple[Value, ...]):
        self._index = index
        self.values = values
        self._hash = hash(values)

    def __getitem__(self, name: str) -> Value:
        return self.values[self._index[name]]

    def __iter__(self) -> Iterator[str]:
        return iter(self._index)

    def __len__(self) -> int:
        return len(self.values)

    def __hash__(self) -> int:
        return self._hash

    def __eq__(self, other: object) -> bool:
        if isinstance(other, SystemState):
            if self.values != other.values:
                return False
            return self._index is other._index or list(self._index) == list(other._index)
        return NotImplemented

    def __repr__(self) -> str:
        body = ", ".join(f"{k}={format_value(v)}" for k, v in self.items())
        return f"SystemState({body})"

    def replace(self, **changes: Value) -> "SystemState":
        vals = list(self.values)
        for k, v in changes.items():
            vals[self._index[k]] = v
        return SystemState(self._index, tuple(vals))

    def diff(self, other: "SystemState") -> Dict[str, Value]:
        """Variables whose value in ``other`` differs from ``self``."""
        return {k: b for k, a, b in zip(self._index, self.values, other.values) if a != b}


class _Successor:
    """Successor under construction; readable by name like a state."""

    __slots__ = ("_index", "vals")

    def __init__(self, index: Mapping[str, int], vals: List[Value]):
        self._index = index
        self.vals = vals

    def __getitem__(self, name: str) -> Value:
        return self.vals[self._index[name]]


@dataclass(frozen=True)
class InputEvent:
    variable: str
    value: Value

    def __str__(self) -> str:
        return f"{self.variable} := {format_value(self.value)}"


class IllegalInput(ValueError):
    pass


def step(spec: SpecModel, state: SystemState, inp: InputEvent) -> SystemState:
    decl = spec.decls.get(inp.variable)
    if decl is None or decl.role != MONITORED:
        raise IllegalInput(f"{inp.variable} is not a monitored variable")
    if not decl.type.contains(inp.value):
        raise IllegalInput(f"{format_value(inp.value)} is not a value of {inp.variable}")
    if state[inp.variable] == inp.value:
        raise IllegalInput(f"{inp.variable} already has value {format_value(inp.value)}")
    vals = list(state.values)
    vals[spec.index[inp.variable]] = inp.value
    new = _Successor(spec.index, vals)
    for idx, table in spec.update_plan:
        vals[idx] = fire_table(table, state, new)
    return SystemState(spec.index, tuple(vals))


def legal_inputs(spec: SpecModel, state: SystemState) -> Iterator[InputEvent]:
    """Every one-input change, by declaration order then value order."""
    for decl in spec.monitored:
        current = state[decl.name]
        for v in decl.type.domain:
            if v != current:
                yield InputEvent(decl.name, v)


def successors(spec: SpecModel, state: SystemState) -> List[Tuple[InputEvent, SystemState]]:
    out = []
    for inp in legal_inputs(spec, state):
        try:
            out.append((inp, step(spec, state, inp)))
        except NondeterministicTransition as exc:
            exc.input = inp
            raise
    return out
