"""Disjointness and completeness checks for SCR tables.

All checks are exhaustive searches over the finite domains of the variables a
pair of rows (or a row group) reads. Event rows are checked under the
one-input assumption: two events can only fire together if a single
monitored variable can trigger both, directly or through the terms and
modes that depend on it. A dependent variable is allowed to change in a step
only when the changing input is in its monitored support; that holds on
every step from a state whose condition-defined variables agree with their
tables, which is every reachable state once the initial state agrees (see the
``initial-mismatch`` warning). Within that frame the search is exact over
the values of the variables involved, reachable or not.
"""

from __future__ import annotations

import itertools
from typing import Dict, Iterable, Iterator, List, Optional, Sequence, Set, Tuple

from .diagnostics import Diagnostic, error, warning
from .model import (MONITORED, ConditionTable, EventTable, Expr,
                    ModeTransitionTable, SpecModel, Value, fire_condition_table,
                    format_value, table_new_reads)
from .parser import render_expr

# combinations beyond this are skipped with a warning
SEARCH_LIMIT = 2_000_000


def monitored_support(spec: SpecModel) -> Dict[str, Set[str]]:
    """For every variable, the monitored variables whose change can change it."""
    support: Dict[str, Set[str]] = {v.name: {v.name} for v in spec.monitored}
    tables = spec.tables_by_target
    for name in spec.order:
        acc: Set[str] = set()
        for dep in table_new_reads(tables[name]):
            acc |= support.get(dep, set())
        support[name] = acc
    return support


class _Dict(dict):
    """A dict that can stand in for a state during evaluation."""


def _assignments(spec: SpecModel, names: Sequence[str],
                 fixed: Dict[str, Value]) -> Iterator[Dict[str, Value]]:
    free = [n for n in names if n not in fixed]
    domains = [spec.decls[n].type.domain for n in free]
    for combo in itertools.product(*domains):
        env = _Dict(fixed)
        env.update(zip(free, combo))
        yield env


def _space(spec: SpecModel, names: Iterable[str]) -> int:
    size = 1
    for n in names:
        size *= len(spec.decls[n].type.domain)
    return size


def find_joint_step(spec: SpecModel, e1: Expr, e2: Expr,
                    old_fixed: Dict[str, Value],
                    support: Optional[Dict[str, Set[str]]] = None
                    ) -> Optional[Tuple[Dict[str, Value], Dict[str, Value]]]:
    """An (old, new) pair over the rows' variables on which both events fire.

    Returns ``None`` if no one-input step can fire both. Raises
    ``OverflowError`` if the search space exceeds :data:`SEARCH_LIMIT`.
    """
    support = support if support is not None else monitored_support(spec)
    reads = list(dict.fromkeys([*e1.variables(), *e2.variables()]))
    candidates = set()
    for r in reads:
        candidates |= support.get(r, set())
    for m in (v.name for v in spec.monitored if v.name in candidates):
        names = list(dict.fromkeys(reads + [m]))
        changing = [n for n in names if n == m or (spec.decls[n].role != MONITORED
                                                   and m in support.get(n, ()))]
        changing = [n for n in changing if n not in old_fixed or n == m]
        size = _space(spec, [n for n in names if n not in old_fixed]) * _space(spec, changing)
        if size > SEARCH_LIMIT:
            raise OverflowError(f"search space of {size} combinations")
        for old in _assignments(spec, names, old_fixed):
            for new_vals in itertools.product(*(spec.decls[n].type.domain for n in changing)):
                new = _Dict(old)
                new.update(zip(changing, new_vals))
                if new[m] == old[m]:
                    continue
                if e1.holds(old, new) and e2.holds(old, new):
                    return dict(old), dict(new)
    return None


def _find_joint_state(spec: SpecModel, conds: Sequence[Expr], fixed: Dict[str, Value],
                      want: Tuple[bool, ...]) -> Optional[Dict[str, Value]]:
    names = list(dict.fromkeys(v for c in conds for v in c.variables()))
    if _space(spec, [n for n in names if n not in fixed]) > SEARCH_LIMIT:
        raise OverflowError("search space too large")
    for env in _assignments(spec, names, fixed):
        if tuple(bool(c.eval(env)) for c in conds) == want:
            return dict(env)
    return None


def _show(env: Dict[str, Value]) -> str:
    return ", ".join(f"{k}={format_value(v)}" for k, v in env.items())


def check_consistency(spec: SpecModel) -> List[Diagnostic]:
    support = monitored_support(spec)
    diags: List[Diagnostic] = []
    for table in spec.mode_tables:
        diags.extend(_check_mode_table(spec, table, support))
    for table in spec.event_tables:
        diags.extend(_check_event_table(spec, table, support))
    for table in spec.cond_tables:
        diags.extend(_check_cond_table(spec, table))
    diags.extend(_check_initial_state(spec))
    return diags


def _pairs(rows):
    return itertools.combinations(rows, 2)


def _check_mode_table(spec, table: ModeTransitionTable, support) -> List[Diagnostic]:
    diags = []
    mc = table.mode_class
    for mode in spec.decls[mc].type.values:
        for (i, r1), (j, r2) in _pairs(table.rows_from(mode)):
            try:
                witness = find_joint_step(spec, r1.event, r2.event, {mc: mode}, support)
            except OverflowError as exc:
                diags.append(warning("search-limit", f"{mc}: rows {i + 1} and {j + 1} not "
                                     f"checked ({exc})", r2.span))
                continue
            if witness is not None:
                old, new = witness
                diags.append(error(
                    "mode-overlap",
                    f"{mc}: in mode {mode}, rows {i + 1} ({render_expr(r1.event)} --> {r1.new})"
                    f" and {j + 1} ({render_expr(r2.event)} --> {r2.new}) can fire together,"
                    f" e.g. old {_show(old)}; new {_show(new)}", r2.span))
    return diags


def _selected_groups(spec, table):
    """(group, modes it is selected for); ``[None]`` when there is no mode class."""
    if table.mode_class is None:
        return [(table.groups[0], [None])] if table.groups else []
    out = []
    for g in table.groups:
        modes = [m for m in spec.decls[table.mode_class].type.values if table.group_for(m) is g]
        if modes:
            out.append((g, modes))
    return out


def _uncovered(spec, table) -> List[str]:
    if table.mode_class is None:
        return []
    return [m for m in spec.decls[table.mode_class].type.values if table.group_for(m) is None]


def _check_event_table(spec, table: EventTable, support) -> List[Diagnostic]:
    diags = []
    mc = table.mode_class
    for g, modes in _selected_groups(spec, table):
        for (i, r1), (j, r2) in _pairs(list(enumerate(g.rows))):
            for mode in modes:
                fixed = {mc: mode} if mc else {}
                try:
                    witness = find_joint_step(spec, r1.guard, r2.guard, fixed, support)
                except OverflowError as exc:
                    diags.append(warning("search-limit", f"{table.dependent}: {exc}", r2.span))
                    break
                if witness is not None:
                    old, new = witness
                    where = f" in mode {mode}" if mode else ""
                    diags.append(error(
                        "event-overlap",
                        f"{table.dependent}{where}: events {render_expr(r1.guard)} and "
                        f"{render_expr(r2.guard)} can fire together, "
                        f"e.g. old {_show(old)}; new {_show(new)}", r2.span))
                    break
    for mode in _uncovered(spec, table):
        diags.append(warning("mode-uncovered", f"{table.dependent}: no rows for mode "
                             f"{mode}; value is unchanged there", table.span))
    return diags


def _check_cond_table(spec, table: ConditionTable) -> List[Diagnostic]:
    diags = []
    mc = table.mode_class
    for g, modes in _selected_groups(spec, table):
        rows = list(enumerate(g.rows))
        try:
            for (i, r1), (j, r2) in _pairs(rows):
                for mode in modes:
                    fixed = {mc: mode} if mc else {}
                    env = _find_joint_state(spec, [r1.guard, r2.guard], fixed, (True, True))
                    if env is not None:
                        where = f" in mode {mode}" if mc else ""
                        diags.append(error(
                            "cond-overlap",
                            f"{table.dependent}{where}: conditions {render_expr(r1.guard)} and "
                            f"{render_expr(r2.guard)} overlap, e.g. {_show(env)}", r2.span))
                        break
            if not table.keep_default:
                conds = [r.guard for _, r in rows]
                for mode in modes:
                    fixed = {mc: mode} if mc else {}
                    env = _find_joint_state(spec, conds, fixed, (False,) * len(conds))
                    if env is not None:
                        where = f" in mode {mode}" if mc else ""
                        diags.append(error(
                            "cond-incomplete",
                            f"{table.dependent}{where}: no condition holds when "
                            f"{_show(env) or 'always'}", g.span))
                        break
        except OverflowError as exc:
            diags.append(warning("search-limit", f"{table.dependent}: {exc}", g.span))
    if not table.keep_default:
        for mode in _uncovered(spec, table):
            diags.append(error("mode-uncovered", f"{table.dependent}: no rows for mode "
                               f"{mode} and no 'default keep'", table.span))
    if mc is None and not table.groups and not table.keep_default:
        diags.append(error("cond-incomplete", f"{table.dependent}: table has no rows",
                           table.span))
    return diags


def _check_initial_state(spec: SpecModel) -> List[Diagnostic]:
    """Warn when a condition-defined variable starts out of line with its table."""
    init = spec.initial_state()
    diags = []
    for table in spec.cond_tables:
        try:
            expected = fire_condition_table(table, init, init)
        except Exception:  # overlaps are already reported
            continue
        actual = init[table.dependent]
        if expected != actual:
            diags.append(warning("initial-mismatch",
                                 f"{table.dependent} starts as {format_value(actual)} but its "
                                 f"table gives {format_value(expected)} in the initial state",
                                 spec.decls[table.dependent].span))
    return diags
