"""Parser and renderer for the ``.scr`` specification format.

The format is line-oriented in spirit but whitespace-insensitive::

    spec Pacemaker

    constants
      BatteryLevel = 3
    types
      Battery = 0..7
    monitored
      mBATTERYvoltage : Battery = 5

    modeclass mcPulseCondition {
      modes Normal, POR
      initial Normal
      Normal -- @T(mBATTERYvoltage < BatteryLevel) --> POR
    }

    condtable cOut by mcPulseCondition {
      in Normal: mBATTERYvoltage >= BatteryLevel -> true
                 mBATTERYvoltage < BatteryLevel -> false
      in POR:    true -> false
    }

See ``docs/grammar.md`` for the full EBNF.
"""

from __future__ import annotations

from typing import Dict, List, Optional, Tuple

from .diagnostics import Diagnostic, ParseError, SourceSpan, error
from .lexer import EOF, EVENT, IDENT, INT, OP, Token, tokenize
from .model import (BOOL_TYPE, CONTROLLED, ENUMERATION, INTEGER, MODE_CLASS,
                    MONITORED, TERM, And, Cmp, ConditionTable, ConstRef, Event,
                    EventTable, Expr, Lit, ModeRow, ModeTransitionTable, Name,
                    Not, Or, RowGroup, SpecModel, TableRow, TypeDef, Value,
                    VariableDecl, VarRef, format_value)
from .typecheck import check_spec

KEYWORDS = frozenset({
    "spec", "constants", "types", "monitored", "terms", "controlled",
    "modeclass", "eventtable", "condtable", "modes", "initial", "by", "in",
    "default", "keep", "when", "NOT", "AND", "OR", "not", "and", "or",
    "true", "false", "bool", "program", "check", "stateChange",
})
_SECTIONS = {"constants", "types", "monitored", "terms", "controlled"}
_BLOCKS = {"modeclass", "eventtable", "condtable"}
_ROLE_OF_SECTION = {"monitored": MONITORED, "terms": TERM, "controlled": CONTROLLED}
_SECTION_OF_ROLE = {v: k for k, v in _ROLE_OF_SECTION.items()}
_RELOPS = ("=", "!=", "<", "<=", ">", ">=")


class _Syntax(Exception):
    def __init__(self, diag: Diagnostic):
        self.diag = diag


class TokenParser:
    """Token cursor plus the expression grammar shared by both file formats."""

    def __init__(self, text: str, filename: str):
        self.filename = filename
        self.toks = tokenize(text, filename)
        self.pos = 0

    @property
    def tok(self) -> Token:
        return self.toks[self.pos]

    def peek(self, k: int = 1) -> Token:
        return self.toks[min(self.pos + k, len(self.toks) - 1)]

    def advance(self) -> Token:
        t = self.tok
        if t.kind != EOF:
            self.pos += 1
        return t

    def fail(self, message: str, tok: Optional[Token] = None) -> "_Syntax":
        t = tok or self.tok
        found = "end of input" if t.kind == EOF else repr(t.text)
        return _Syntax(error("syntax", f"{message}, found {found}", t.span))

    def expect_op(self, text: str) -> Token:
        if not self.tok.is_op(text):
            raise self.fail(f"expected '{text}'")
        return self.advance()

    def expect_word(self, word: str, message: Optional[str] = None) -> Token:
        if not self.tok.is_word(word):
            raise self.fail(message or f"expected '{word}'")
        return self.advance()

    def expect_ident(self, what: str = "identifier") -> Token:
        t = self.tok
        if t.kind != IDENT or t.text in KEYWORDS:
            raise self.fail(f"expected {what}")
        return self.advance()

    def accept_op(self, text: str) -> bool:
        if self.tok.is_op(text):
            self.advance()
            return True
        return False

    def skip_semis(self) -> None:
        while self.accept_op(";"):
            pass

    def _word_in(self, *words: str) -> bool:
        return self.tok.kind == IDENT and self.tok.text in words

    # expressions -----------------------------------------------------------

    def expr(self) -> Expr:
        left = self.and_expr()
        while self._word_in("OR", "or"):
            self.advance()
            right = self.and_expr()
            left = Or(left, right, _join(left, right))
        return left

    def and_expr(self) -> Expr:
        left = self.unary()
        while self._word_in("AND", "and"):
            self.advance()
            right = self.unary()
            left = And(left, right, _join(left, right))
        return left

    def unary(self) -> Expr:
        if self._word_in("NOT", "not"):
            start = self.advance()
            arg = self.unary()
            return Not(arg, start.span.to(_end(arg)))
        return self.primary()

    def primary(self) -> Expr:
        t = self.tok
        if t.kind == EVENT:
            self.advance()
            self.expect_op("(")
            arg = self.expr()
            close = self.expect_op(")")
            span = t.span.to(close.span)
            when = None
            if self.tok.is_word("when"):
                self.advance()
                when = self.and_expr()
                span = span.to(_end(when))
            return Event(t.text[1], arg, when, span)
        if t.is_op("("):
            self.advance()
            inner = self.expr()
            self.expect_op(")")
            return inner
        left = self.operand()
        if self.tok.kind == OP and self.tok.text in _RELOPS:
            op = self.advance().text
            right = self.operand()
            return Cmp(op, left, right, _join(left, right))
        return left

    def operand(self) -> Expr:
        t = self.tok
        if t.kind == INT:
            self.advance()
            return Lit(int(t.text), t.span)
        if t.is_word("true") or t.is_word("false"):
            self.advance()
            return Lit(t.text == "true", t.span)
        if t.kind == IDENT and t.text not in KEYWORDS:
            self.advance()
            return Name(t.text, t.span)
        raise self.fail("expected an expression")


def _end(e: Expr) -> Optional[SourceSpan]:
    return getattr(e, "span", None)


def _join(a: Expr, b: Expr) -> Optional[SourceSpan]:
    sa, sb = _end(a), _end(b)
    if sa is None:
        return sb
    return sa.to(sb)


class SpecParser(TokenParser):
    def __init__(self, text: str, filename: str):
        super().__init__(text, filename)
        self.constants: List[Tuple[str, Value]] = []
        self.const_tokens: Dict[str, Token] = {}
        self.types: Dict[str, TypeDef] = {}
        self.type_spans: Dict[str, SourceSpan] = {}
        self.variables: List[VariableDecl] = []
        # initial values are resolved after all constants are known
        self.pending_initial: List[Tuple[int, Token]] = []
        self.mode_tables: List[ModeTransitionTable] = []
        self.event_tables: List[EventTable] = []
        self.cond_tables: List[ConditionTable] = []
        self.late: List[Diagnostic] = []

    def parse(self) -> str:
        if not self.tok.is_word("spec"):
            raise self.fail("expected spec header")
        self.advance()
        name = self.expect_ident("spec name").text
        self.skip_semis()
        while self.tok.kind != EOF:
            word = self.tok.text if self.tok.kind == IDENT else None
            if word in _SECTIONS:
                self.advance()
                self.section(word)
            elif word in _BLOCKS:
                getattr(self, word)()
            else:
                raise self.fail("expected a section or table")
            self.skip_semis()
        return name

    def _at_entry(self) -> bool:
        return self.tok.kind == IDENT and self.tok.text not in KEYWORDS

    def section(self, word: str) -> None:
        while True:
            self.skip_semis()
            if not self._at_entry():
                return
            name_tok = self.advance()
            if word == "constants":
                self.expect_op("=")
                self.constants.append((name_tok.text, self.raw_value()))
                self.const_tokens[name_tok.text] = name_tok
            elif word == "types":
                self.expect_op("=")
                t = self.type_expr(name_tok.text)
                if name_tok.text in self.types:
                    self.late.append(error("duplicate", f"type {name_tok.text} already declared",
                                           name_tok.span))
                self.types[name_tok.text] = t
                self.type_spans[name_tok.text] = name_tok.span
            else:
                self.expect_op(":")
                t = self.type_ref()
                self.expect_op("=")
                init_tok = self.value_token()
                self.pending_initial.append((len(self.variables), init_tok))
                self.variables.append(VariableDecl(name_tok.text, _ROLE_OF_SECTION[word], t,
                                                   None, name_tok.span.to(init_tok.span)))

    def raw_value(self) -> Value:
        t = self.value_token()
        if t.kind == INT:
            return int(t.text)
        if t.text in ("true", "false"):
            return t.text == "true"
        return t.text

    def value_token(self) -> Token:
        t = self.tok
        if t.kind == INT or t.is_word("true") or t.is_word("false") or \
                (t.kind == IDENT and t.text not in KEYWORDS):
            return self.advance()
        raise self.fail("expected a value")

    def type_expr(self, name: Optional[str]) -> TypeDef:
        t = self.tok
        if t.is_word("bool"):
            self.advance()
            return TypeDef(name, "boolean")
        if t.kind == INT:
            lo = int(self.advance().text)
            self.expect_op("..")
            hi_tok = self.tok
            if hi_tok.kind != INT:
                raise self.fail("expected integer upper bound")
            hi = int(self.advance().text)
            if lo > hi:
                raise _Syntax(error("type", f"empty range {lo}..{hi}", t.span.to(hi_tok.span)))
            return TypeDef(name, INTEGER, lo, hi)
        if t.is_op("{"):
            self.advance()
            values = self.ident_list("enumeration value")
            close = self.expect_op("}")
            if len(set(values)) != len(values):
                raise _Syntax(error("duplicate", "duplicate enumeration value",
                                    t.span.to(close.span)))
            return TypeDef(name, ENUMERATION, values=tuple(values))
        raise self.fail("expected a type")

    def type_ref(self) -> TypeDef:
        t = self.tok
        if t.kind == IDENT and t.text not in KEYWORDS:
            self.advance()
            if t.text not in self.types:
                raise _Syntax(error("undeclared", f"undeclared type {t.text}", t.span))
            return self.types[t.text]
        t = self.type_expr(None)
        return BOOL_TYPE if t.kind == "boolean" else t

    def ident_list(self, what: str) -> List[str]:
        out = [self.expect_ident(what).text]
        while self.accept_op(","):
            out.append(self.expect_ident(what).text)
        return out

    def modeclass(self) -> None:
        start = self.advance()
        name_tok = self.expect_ident("mode class name")
        self.expect_op("{")
        self.skip_semis()
        self.expect_word("modes")
        mode_tok = self.tok
        modes = self.ident_list("mode name")
        if len(set(modes)) != len(modes):
            raise _Syntax(error("duplicate", "duplicate mode name", mode_tok.span))
        self.skip_semis()
        self.expect_word("initial")
        init_tok = self.expect_ident("initial mode")
        mtype = TypeDef(None, ENUMERATION, values=tuple(modes))
        self.variables.append(VariableDecl(name_tok.text, MODE_CLASS, mtype, init_tok.text,
                                           name_tok.span))
        rows = []
        self.skip_semis()
        while not self.tok.is_op("}"):
            old = self.expect_ident("old mode")
            self.expect_op("--")
            ev = self.expr()
            self.expect_op("-->")
            new = self.expect_ident("new mode")
            rows.append(ModeRow(old.text, ev, new.text, old.span.to(new.span)))
            self.skip_semis()
        close = self.advance()
        self.mode_tables.append(ModeTransitionTable(name_tok.text, tuple(rows),
                                                    start.span.to(close.span)))

    def eventtable(self) -> None:
        self.event_tables.append(self._dependent_table(EventTable))

    def condtable(self) -> None:
        self.cond_tables.append(self._dependent_table(ConditionTable))

    def _dependent_table(self, cls):
        start = self.advance()
        dep = self.expect_ident("variable name").text
        mode_class = None
        if self.tok.is_word("by"):
            self.advance()
            mode_class = self.expect_ident("mode class name").text
        self.expect_op("{")
        keep = False
        groups: List[RowGroup] = []
        loose: List[TableRow] = []
        while True:
            self.skip_semis()
            t = self.tok
            if t.is_op("}"):
                break
            if t.is_word("default"):
                self.advance()
                self.expect_word("keep", "expected 'keep' after 'default'")
                keep = True
            elif t.is_word("in"):
                if mode_class is None:
                    raise self.fail("row groups need 'by <modeclass>'")
                self.advance()
                modes = self.ident_list("mode name")
                colon = self.expect_op(":")
                rows = self._rows()
                groups.append(RowGroup(tuple(modes), tuple(rows), t.span.to(colon.span)))
            else:
                if mode_class is not None:
                    raise self.fail("expected 'in <modes>:' row group")
                loose.extend(self._rows())
        close = self.advance()
        if mode_class is None:
            groups = [RowGroup((), tuple(loose), start.span)]
        return cls(dep, mode_class, tuple(groups), keep, start.span.to(close.span))

    def _rows(self) -> List[TableRow]:
        rows = []
        while True:
            self.skip_semis()
            t = self.tok
            if t.is_op("}") or t.is_word("in") or t.is_word("default") or t.kind == EOF:
                return rows
            guard = self.expr()
            self.expect_op("->")
            vtok = self.value_token()
            rows.append(TableRow(guard, vtok, t.span.to(vtok.span)))


def _resolve_value(tok: Token, constants: Dict[str, Value]) -> Value:
    if tok.kind == INT:
        return int(tok.text)
    if tok.text in ("true", "false"):
        return tok.text == "true"
    return constants.get(tok.text, tok.text)


def parse_spec(text: str, filename: str = "<spec>") -> SpecModel:
    """Parse and type-check a specification; raises :class:`ParseError`."""
    spec, diags = parse_spec_diagnostics(text, filename)
    if spec is None:
        raise ParseError(diags)
    return spec


def parse_spec_diagnostics(text: str, filename: str = "<spec>"
                           ) -> Tuple[Optional[SpecModel], List[Diagnostic]]:
    try:
        p = SpecParser(text, filename)
        name = p.parse()
    except _Syntax as exc:
        return None, [exc.diag]
    except ParseError as exc:
        return None, exc.diagnostics
    consts = dict(p.constants)
    variables = list(p.variables)
    for i, tok in p.pending_initial:
        variables[i] = VariableDecl(variables[i].name, variables[i].role, variables[i].type,
                                    _resolve_value(tok, consts), variables[i].span)

    def fix_rows(table):
        groups = tuple(RowGroup(g.modes, tuple(TableRow(r.guard, _resolve_value(r.value, consts),
                                                        r.span) for r in g.rows), g.span)
                       for g in table.groups)
        return type(table)(table.dependent, table.mode_class, groups, table.keep_default,
                           table.span)

    spans = dict(p.type_spans)
    spans.update({k: t.span for k, t in p.const_tokens.items()})
    spec, diags = check_spec(name, p.constants, tuple(p.types.values()), variables,
                             p.mode_tables, [fix_rows(t) for t in p.event_tables],
                             [fix_rows(t) for t in p.cond_tables], spans=spans)
    if p.late:
        return None, p.late + diags
    return spec, diags


# ---------------------------------------------------------------------------
# rendering

_PREC_OR, _PREC_AND, _PREC_NOT, _PREC_ATOM = 1, 2, 3, 4


def render_expr(e: Expr, ctx: int = 0) -> str:
    text, prec = _render(e, ctx)
    return text


def _render(e: Expr, ctx: int) -> Tuple[str, int]:
    if isinstance(e, Lit):
        return format_value(e.value), _PREC_ATOM
    if isinstance(e, (ConstRef, VarRef)):
        return e.name, _PREC_ATOM
    if isinstance(e, Name):
        return e.ident, _PREC_ATOM
    if isinstance(e, Cmp):
        return f"{render_expr(e.left)} {e.op} {render_expr(e.right)}", _PREC_ATOM
    if isinstance(e, Event):
        text = f"@{e.kind}({render_expr(e.arg)})"
        if e.when is not None:
            when = _wrap(e.when, _PREC_AND)
            text = f"{text} when {when}"
            if ctx > 0:
                return f"({text})", _PREC_ATOM
        return text, _PREC_ATOM
    if isinstance(e, Not):
        return f"NOT {_wrap(e.arg, _PREC_NOT)}", _PREC_NOT
    if isinstance(e, Or):
        return f"{_wrap(e.left, _PREC_OR)} OR {_wrap(e.right, _PREC_AND)}", _PREC_OR
    if isinstance(e, And):
        return f"{_wrap(e.left, _PREC_AND)} AND {_wrap(e.right, _PREC_NOT)}", _PREC_AND
    raise TypeError(f"cannot render {e!r}")


def _wrap(e: Expr, need: int) -> str:
    text, prec = _render(e, need)
    return text if prec >= need else f"({text})"


def render_spec(spec: SpecModel) -> str:
    out: List[str] = [f"spec {spec.name}", ""]
    if spec.constants:
        out.append("constants")
        out.extend(f"  {n} = {format_value(v)}" for n, v in spec.constants)
        out.append("")
    if spec.types:
        out.append("types")
        out.extend(f"  {t.name} = {t.text()}" for t in spec.types)
        out.append("")
    mode_tables = {t.mode_class: t for t in spec.mode_tables}
    section = None
    for v in spec.variables:
        if v.role == MODE_CLASS:
            if section is not None:
                out.append("")
            section = None
            out.extend(_render_mode_block(v, mode_tables.get(v.name)))
            out.append("")
            continue
        if section != v.role:
            if section is not None:
                out.append("")
            out.append(_SECTION_OF_ROLE[v.role])
            section = v.role
        tname = v.type.name if v.type.name is not None else v.type.text()
        out.append(f"  {v.name} : {tname} = {format_value(v.initial)}")
    if section is not None:
        out.append("")
    for kind, tables in (("eventtable", spec.event_tables), ("condtable", spec.cond_tables)):
        for t in tables:
            out.extend(_render_dependent(kind, t))
            out.append("")
    return "\n".join(out).rstrip() + "\n"


def _render_mode_block(decl: VariableDecl, table: Optional[ModeTransitionTable]) -> List[str]:
    lines = [f"modeclass {decl.name} {{",
             f"  modes {', '.join(decl.type.values)}",
             f"  initial {decl.initial}"]
    for r in table.rows if table else ():
        lines.append(f"  {r.old} -- {render_expr(r.event)} --> {r.new}")
    lines.append("}")
    return lines


def _render_dependent(kind: str, t) -> List[str]:
    head = f"{kind} {t.dependent}"
    if t.mode_class is not None:
        head += f" by {t.mode_class}"
    lines = [head + " {"]
    for g in t.groups:
        indent = "  "
        if t.mode_class is not None:
            lines.append(f"  in {', '.join(g.modes)}:")
            indent = "    "
        for r in g.rows:
            lines.append(f"{indent}{render_expr(r.guard)} -> {format_value(r.value)}")
    if t.keep_default:
        lines.append("  default keep")
    lines.append("}")
    return lines
