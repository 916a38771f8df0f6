"""Name resolution, type checking and dependency ordering of specifications."""

from __future__ import annotations

from dataclasses import replace
from graphlib import CycleError, TopologicalSorter
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

from .diagnostics import Diagnostic, ParseError, SourceSpan, error, has_errors
from .model import (BOOLEAN, CONTROLLED, ENUMERATION, INTEGER, MODE_CLASS,
                    MONITORED, TERM, And, Cmp, ConditionTable, ConstRef, Event,
                    EventTable, Expr, Lit, ModeRow, ModeTransitionTable, Name,
                    Not, Or, RowGroup, SpecModel, TableRow, TypeDef, Value,
                    VariableDecl, VarRef, format_value, table_new_reads)

# expression types
BOOL = ("bool",)
INT = ("int",)
EVENT = ("event",)
ERROR = ("error",)


def _enum(t: TypeDef) -> tuple:
    return ("enum", t.values)


def _lit(name: str) -> tuple:
    return ("lit", name)


def _describe(ty: tuple) -> str:
    if ty[0] == "enum":
        return "{" + ", ".join(ty[1]) + "}"
    if ty[0] == "lit":
        return f"literal {ty[1]}"
    return ty[0]


def _span(expr: Expr) -> Optional[SourceSpan]:
    return getattr(expr, "span", None)


class ExprChecker:
    """Resolves identifiers and infers expression types against declarations."""

    def __init__(self, constants: Dict[str, Value], variables: Dict[str, VariableDecl],
                 literals: Iterable[str], diagnostics: List[Diagnostic]):
        self.constants = constants
        self.variables = variables
        self.literals = set(literals)
        self.diags = diagnostics

    def _err(self, code: str, msg: str, expr: Expr) -> None:
        self.diags.append(error(code, msg, _span(expr)))

    def _value_type(self, v: Value) -> tuple:
        if isinstance(v, bool):
            return BOOL
        if isinstance(v, int):
            return INT
        return _lit(v)

    def infer(self, expr: Expr) -> Tuple[Expr, tuple]:
        if isinstance(expr, Name):
            ident = expr.ident
            if ident in self.variables:
                return self.infer(VarRef(ident, expr.span))
            if ident in self.constants:
                return self.infer(ConstRef(ident, self.constants[ident], expr.span))
            if ident in self.literals:
                return Lit(ident, expr.span), _lit(ident)
            self._err("undeclared", f"undeclared identifier {ident}", expr)
            return expr, ERROR
        if isinstance(expr, Lit):
            if isinstance(expr.value, str) and expr.value not in self.literals:
                self._err("undeclared", f"unknown literal {expr.value}", expr)
                return expr, ERROR
            return expr, self._value_type(expr.value)
        if isinstance(expr, ConstRef):
            if expr.name not in self.constants:
                self._err("undeclared", f"undeclared constant {expr.name}", expr)
                return expr, ERROR
            return ConstRef(expr.name, self.constants[expr.name], expr.span), \
                self._value_type(self.constants[expr.name])
        if isinstance(expr, VarRef):
            decl = self.variables.get(expr.name)
            if decl is None:
                self._err("undeclared", f"undeclared variable {expr.name}", expr)
                return expr, ERROR
            t = decl.type
            if t.kind == BOOLEAN:
                return expr, BOOL
            if t.kind == INTEGER:
                return expr, INT
            return expr, _enum(t)
        if isinstance(expr, Cmp):
            return self._cmp(expr)
        if isinstance(expr, Not):
            arg, ty = self.infer(expr.arg)
            if ty not in (BOOL, EVENT, ERROR):
                self._err("type", f"NOT needs a boolean operand, got {_describe(ty)}", expr)
                ty = ERROR
            return Not(arg, expr.span), ty
        if isinstance(expr, (And, Or)):
            left, lt = self.infer(expr.left)
            right, rt = self.infer(expr.right)
            op = "OR" if isinstance(expr, Or) else "AND"
            rebuilt = type(expr)(left, right, expr.span)
            if ERROR in (lt, rt):
                return rebuilt, ERROR
            if lt == rt and lt in (BOOL, EVENT):
                return rebuilt, lt
            if {lt, rt} == {BOOL, EVENT}:
                self._err("type", f"{op} cannot combine an event with a condition; "
                          "use a when clause", expr)
            else:
                self._err("type", f"{op} needs boolean operands, got "
                          f"{_describe(lt)} and {_describe(rt)}", expr)
            return rebuilt, ERROR
        if isinstance(expr, Event):
            arg, at = self.infer(expr.arg)
            when = None
            ok = True
            if expr.when is not None:
                when, wt = self.infer(expr.when)
                if wt not in (BOOL, ERROR):
                    self._err("type", f"when clause must be a condition, got {_describe(wt)}",
                              expr.when)
                    ok = False
            if expr.kind in "TF" and at not in (BOOL, ERROR):
                self._err("type", f"@{expr.kind} needs a condition, got {_describe(at)}", expr)
                ok = False
            if expr.kind == "C" and at[0] in ("lit", "event"):
                self._err("type", f"@C needs a variable or formula, got {_describe(at)}", expr)
                ok = False
            if at == ERROR:
                ok = False
            return Event(expr.kind, arg, when, expr.span), EVENT if ok else ERROR
        self._err("type", f"unsupported expression {expr!r}", expr)
        return expr, ERROR

    def _cmp(self, expr: Cmp) -> Tuple[Expr, tuple]:
        left, lt = self.infer(expr.left)
        right, rt = self.infer(expr.right)
        rebuilt = Cmp(expr.op, left, right, expr.span)
        if ERROR in (lt, rt):
            return rebuilt, ERROR
        ordering = expr.op in ("<", "<=", ">", ">=")
        if lt == INT and rt == INT:
            return rebuilt, BOOL
        if ordering:
            self._err("type", f"{expr.op} needs integer operands, got "
                      f"{_describe(lt)} and {_describe(rt)}", expr)
            return rebuilt, ERROR
        if lt == rt and lt[0] in ("bool", "enum"):
            return rebuilt, BOOL
        for a, b in ((lt, rt), (rt, lt)):
            if a[0] == "enum" and b[0] == "lit":
                if b[1] in a[1]:
                    return rebuilt, BOOL
                self._err("type", f"{b[1]} is not a value of {_describe(a)}", expr)
                return rebuilt, ERROR
        self._err("type", f"cannot compare {_describe(lt)} with {_describe(rt)}", expr)
        return rebuilt, ERROR

    def condition(self, expr: Expr, what: str = "condition") -> Expr:
        resolved, ty = self.infer(expr)
        if ty not in (BOOL, ERROR):
            self._err("type", f"{what} must be a condition, got {_describe(ty)}", expr)
        return resolved

    def event(self, expr: Expr) -> Expr:
        resolved, ty = self.infer(expr)
        if ty not in (EVENT, ERROR):
            self._err("type", f"expected an event (@T, @F or @C), got {_describe(ty)}", expr)
        return resolved

    def guard(self, expr: Expr) -> Expr:
        resolved, ty = self.infer(expr)
        if ty not in (BOOL, EVENT, ERROR):
            self._err("type", f"guard must be an event or a condition, got {_describe(ty)}",
                      expr)
        return resolved


def _literals(types: Iterable[TypeDef], variables: Iterable[VariableDecl]) -> List[str]:
    lits: Dict[str, None] = {}
    for t in (*types, *(v.type for v in variables)):
        if t.kind == ENUMERATION:
            lits.update(dict.fromkeys(t.values))
    return list(lits)


def checker_for(spec: SpecModel, diagnostics: List[Diagnostic]) -> ExprChecker:
    return ExprChecker(spec.constant_map, spec.decls,
                       _literals(spec.types, spec.variables), diagnostics)


def check_spec(name: str,
               constants: Sequence[Tuple[str, Value]],
               types: Sequence[TypeDef],
               variables: Sequence[VariableDecl],
               mode_tables: Sequence[ModeTransitionTable] = (),
               event_tables: Sequence[EventTable] = (),
               cond_tables: Sequence[ConditionTable] = (),
               spans: Optional[Dict[str, SourceSpan]] = None,
               ) -> Tuple[Optional[SpecModel], List[Diagnostic]]:
    """Resolve and check a specification; returns the model when error-free.

    ``spans`` maps constant and type names to their declaration spans.
    """
    spans = spans or {}
    diags: List[Diagnostic] = []

    seen: Dict[str, str] = {}
    for cname, _ in constants:
        _claim(seen, cname, "constant", spans.get(cname), diags)
    for t in types:
        _claim(seen, t.name, "type", spans.get(t.name), diags)
    for v in variables:
        _claim(seen, v.name, "variable", v.span, diags)

    literals = _literals(types, variables)
    for lit in literals:
        if lit in seen and seen[lit] in ("variable", "constant"):
            span = next((v.span for v in variables if v.name == lit), spans.get(lit))
            diags.append(error("name-clash",
                               f"{lit} is both an enumeration value and a {seen[lit]}", span))

    const_map: Dict[str, Value] = {}
    for cname, value in constants:
        if isinstance(value, str) and value not in literals:
            diags.append(error("undeclared", f"constant {cname}: unknown literal {value}",
                               spans.get(cname)))
        const_map[cname] = value

    var_map: Dict[str, VariableDecl] = {}
    for v in variables:
        if v.role not in (MONITORED, CONTROLLED, TERM, MODE_CLASS):
            diags.append(error("role", f"{v.name}: unknown role {v.role}", v.span))
        if v.role == MODE_CLASS and v.type.kind != ENUMERATION:
            diags.append(error("type", f"mode class {v.name} must range over modes", v.span))
        if not v.type.contains(v.initial):
            diags.append(error("bad-value", f"initial value {format_value(v.initial)} is not "
                               f"a value of {v.name} : {v.type.text()}", v.span))
        var_map.setdefault(v.name, v)

    checker = ExprChecker(const_map, var_map, literals, diags)

    defined: Dict[str, object] = {}
    new_mode_tables = []
    for table in mode_tables:
        decl = var_map.get(table.mode_class)
        if decl is None or decl.role != MODE_CLASS:
            diags.append(error("undeclared", f"{table.mode_class} is not a declared mode class",
                               table.span))
            continue
        _define(defined, table.mode_class, table.span, diags)
        modes = decl.type.values
        rows = []
        for row in table.rows:
            for m in (row.old, row.new):
                if m not in modes:
                    diags.append(error("bad-value", f"{m} is not a mode of {table.mode_class}",
                                       row.span))
            rows.append(ModeRow(row.old, checker.event(row.event), row.new, row.span))
        new_mode_tables.append(ModeTransitionTable(table.mode_class, tuple(rows), table.span))

    new_event_tables = [_check_dependent(t, var_map, checker, defined, diags, events=True)
                        for t in event_tables]
    new_cond_tables = [_check_dependent(t, var_map, checker, defined, diags, events=False)
                       for t in cond_tables]

    for v in variables:
        if v.role != MONITORED and v.name not in defined:
            diags.append(error("missing-table", f"{v.role} {v.name} is not defined by any table",
                               v.span))

    if has_errors(diags):
        return None, diags

    position = {v.name: i for i, v in enumerate(variables)}
    new_mode_tables.sort(key=lambda t: position[t.mode_class])
    spec = SpecModel(name, tuple(constants), tuple(types), tuple(variables),
                     tuple(new_mode_tables), tuple(t for t in new_event_tables if t),
                     tuple(t for t in new_cond_tables if t))
    order = _dependency_order(spec, diags)
    if order is None:
        return None, diags
    return replace(spec, order=order), diags


def build_spec(*args, **kwargs) -> SpecModel:
    """Like :func:`check_spec` but raises :class:`ParseError` on errors."""
    spec, diags = check_spec(*args, **kwargs)
    if spec is None:
        raise ParseError(diags)
    return spec


def _claim(seen: Dict[str, str], name: Optional[str], what: str,
           span: Optional[SourceSpan], diags: List[Diagnostic]) -> None:
    if name is None:
        return
    if name in seen:
        diags.append(error("duplicate", f"{what} {name} already declared as a {seen[name]}",
                           span))
    else:
        seen[name] = what


def _define(defined: Dict[str, object], target: str, span, diags: List[Diagnostic]) -> None:
    if target in defined:
        diags.append(error("duplicate-table", f"{target} is defined by more than one table",
                           span))
    defined[target] = True


def _check_dependent(table, var_map, checker: ExprChecker, defined, diags, *, events: bool):
    kind = "eventtable" if events else "condtable"
    decl = var_map.get(table.dependent)
    if decl is None:
        diags.append(error("undeclared", f"{kind}: undeclared variable {table.dependent}",
                           table.span))
        return None
    if decl.role not in (TERM, CONTROLLED):
        diags.append(error("role", f"{kind} {table.dependent}: only terms and controlled "
                           f"variables are defined by tables", table.span))
        return None
    _define(defined, table.dependent, table.span, diags)
    modes: Tuple[str, ...] = ()
    if table.mode_class is not None:
        mdecl = var_map.get(table.mode_class)
        if mdecl is None or mdecl.role != MODE_CLASS:
            diags.append(error("undeclared", f"{table.mode_class} is not a declared mode class",
                               table.span))
            return None
        modes = mdecl.type.values
    elif len(table.groups) != 1 or table.groups[0].modes:
        diags.append(error("syntax", f"{kind} {table.dependent} has mode groups but no "
                           "governing mode class", table.span))
        return None
    covered: Dict[str, None] = {}
    groups = []
    for g in table.groups:
        for m in g.modes:
            if m not in modes:
                diags.append(error("bad-value", f"{m} is not a mode of {table.mode_class}",
                                   g.span))
            elif m in covered:
                diags.append(error("duplicate", f"mode {m} appears in two row groups of "
                                   f"{table.dependent}", g.span))
            covered[m] = None
        rows = []
        for r in g.rows:
            guard = checker.event(r.guard) if events else checker.condition(r.guard)
            if not decl.type.contains(r.value):
                diags.append(error("bad-value", f"{format_value(r.value)} is not a value of "
                                   f"{table.dependent} : {decl.type.text()}", r.span))
            rows.append(TableRow(guard, r.value, r.span))
        groups.append(RowGroup(g.modes, tuple(rows), g.span))
    return type(table)(table.dependent, table.mode_class, tuple(groups),
                       table.keep_default, table.span)


def _dependency_order(spec: SpecModel, diags: List[Diagnostic]) -> Optional[Tuple[str, ...]]:
    position = spec.index
    sorter: TopologicalSorter = TopologicalSorter()
    tables = spec.tables_by_target
    for name in sorted(tables, key=position.__getitem__):
        deps = [d for d in table_new_reads(tables[name]) if d in tables]
        sorter.add(name, *deps)
    try:
        sorter.prepare()
    except CycleError as exc:
        cycle = exc.args[1]
        first = tables[cycle[0]]
        diags.append(error("cycle", "dependency cycle: " + " -> ".join(cycle),
                           getattr(first, "span", None)))
        return None
    order: List[str] = []
    while sorter.is_active():
        ready = sorted(sorter.get_ready(), key=position.__getitem__)
        order.extend(ready)
        sorter.done(*ready)
    return tuple(order)
