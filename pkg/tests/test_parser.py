import pytest
from hypothesis import given, settings, strategies as st

from helpers import CORPUS, corpus_spec
from scrscen.diagnostics import ParseError
from scrscen.lexer import tokenize
from scrscen.model import Cmp, ConstRef, Event, VarRef
from scrscen.parser import parse_spec, parse_spec_diagnostics, render_expr, render_spec


def errors_of(text):
    spec, diags = parse_spec_diagnostics(text, "t.scr")
    assert spec is None
    return diags


def test_published_row_is_parsed():
    table = corpus_spec("buggy").tables_by_target["mcPulseCondition"]
    row = table.rows[0]
    assert (row.old, row.new) == ("Normal", "POR")
    assert row.event == Event("T", Cmp("<", VarRef("mBATTERYvoltage"), ConstRef("BatteryLevel", 3)))
    assert render_expr(row.event) == "@T(mBATTERYvoltage < BatteryLevel)"


def test_empty_input():
    [d] = errors_of("")
    assert d.code == "syntax" and "expected spec header" in d.message


def test_undeclared_variable_is_named_with_span():
    text = "spec S\nmonitored\n  x : bool = false\nmodeclass m {\n  modes A, B\n  initial A\n" \
           "  A -- @T(mFoo) --> B\n}\n"
    [d] = errors_of(text)
    assert d.code == "undeclared" and "mFoo" in d.message
    assert (d.span.start_line, d.span.start_col, d.span.end_col) == (7, 11, 15)


@pytest.mark.parametrize("text, code", [
    ("spec S\nmonitored\n  x : bool = $\n", "lex"),
    ("spec S\nmonitored\n  x bool = false\n", "syntax"),
    ("spec S\nmonitored\n  x : 0..3 = true\n", "bad-value"),
    ("spec S\nmonitored\n  x : bool = false\n  x : bool = true\n", "duplicate"),
    ("spec S\nmonitored\n  x : 0..3 = 0\nterms\n  t : bool = false\n"
     "condtable t {\n  x -> true\n}\n", "type"),
    ("spec S\nmonitored\n  x : bool = false\nterms\n  t : bool = false\n  u : bool = false\n"
     "condtable t {\n  u -> true\n  NOT u -> false\n}\ncondtable u {\n  t -> true\n  NOT t -> false\n}\n",
     "cycle"),
    ("spec S\nmonitored\n  x : bool = false\nterms\n  t : bool = false\n", "missing-table"),
])
def test_error_codes(text, code):
    diags = errors_of(text)
    assert code in [d.code for d in diags], diags


def test_diagnostic_spans_are_inside_the_text():
    text = "spec S\nmonitored\n  x : bool = false\nterms\n  t : 0..3 = 0\n" \
           "condtable t {\n  x -> 7\n  y -> 1\n}\n"
    lines = text.splitlines()
    for d in errors_of(text):
        assert 1 <= d.span.start_line <= d.span.end_line <= len(lines)
        assert 1 <= d.span.start_col <= len(lines[d.span.start_line - 1]) + 1


def test_parse_spec_raises():
    with pytest.raises(ParseError) as info:
        parse_spec("spec")
    assert info.value.diagnostics


def test_whitespace_insensitive():
    a = parse_spec("spec S\nmonitored\n  x : bool = false\n")
    b = parse_spec("spec   S monitored x:bool=false")
    assert a == b


def test_unicode_comparisons():
    toks = tokenize("a ≤ b ≥ c ≠ d")
    assert [t.text for t in toks[:-1]] == ["a", "<=", "b", ">=", "c", "!=", "d"]


@pytest.mark.parametrize("variant", ["buggy", "fixed"])
def test_corpus_round_trip(variant):
    spec = corpus_spec(variant)
    text = render_spec(spec)
    again = parse_spec(text)
    assert again == spec
    assert again.order == spec.order
    assert render_spec(again) == text


def test_minimal_round_trip():
    spec = parse_spec("spec S\nmonitored\n  x : bool = false\n")
    assert parse_spec(render_spec(spec)) == spec


def test_constants_preserved():
    spec = parse_spec("spec S\nconstants\n  K = 3\n  L = -2\nmonitored\n  x : -3..3 = L\n")
    again = parse_spec(render_spec(spec))
    assert again.constants == (("K", 3), ("L", -2))
    assert again.initial_state()["x"] == -2


def test_fixed_variant_differs_only_in_refined_rows():
    buggy = corpus_spec("buggy").tables_by_target["mcPulseCondition"].rows
    fixed = corpus_spec("fixed").tables_by_target["mcPulseCondition"].rows
    differing = [(b, f) for b, f in zip(buggy, fixed) if b != f]
    assert len(buggy) == len(fixed) and len(differing) == 2
    for b, f in differing:
        assert b.old == f.old == "POR" and b.new == f.new
        assert b.event.when is None
        assert render_expr(f.event.when) == "mBATTERYvoltage >= BatteryLevel"
        assert f.event.arg == b.event.arg


def test_published_rows_present_in_both_variants():
    expected = [
        "Normal -- @T(mBATTERYvoltage < BatteryLevel) --> POR",
        "Normal -- @T(tMagnetON) when mMagnet = ON --> MAGnormal",
        "MAGpor -- @F(tMagnetON) --> POR",
    ]
    for variant in ("buggy", "fixed"):
        rows = {f"{r.old} -- {render_expr(r.event)} --> {r.new}"
                for r in corpus_spec(variant).tables_by_target["mcPulseCondition"].rows}
        assert set(expected) <= rows
    assert "POR -- @T(mCommand = NORMAL) --> Normal" in {
        f"{r.old} -- {render_expr(r.event)} --> {r.new}"
        for r in corpus_spec("buggy").tables_by_target["mcPulseCondition"].rows}


def test_corpus_rows_are_tagged():
    for variant in ("buggy", "fixed"):
        text = (CORPUS / f"pacemaker_{variant}.scr").read_text()
        body = text[text.index("modeclass"):text.index("condtable")]
        rows = [line for line in body.splitlines() if "-->" in line]
        assert rows and all("#" in line for line in rows)
        assert sum("# source" in line for line in rows) == 5


# -- generated specifications ----------------------------------------------------

OPS = ["=", "!=", "<", "<=", ">", ">="]


@st.composite
def cond_text(draw, env, depth=2):
    """A condition over ``env`` (name -> ('bool'|'int'|'enum', info))."""
    if depth == 0 or draw(st.integers(0, 2)) == 0:
        name = draw(st.sampled_from(sorted(env)))
        kind, info = env[name]
        if kind == "bool":
            return name
        if kind == "int":
            lo, hi, consts = info
            rhs = draw(st.one_of(st.integers(lo, hi).map(str), st.sampled_from(consts or ["0"])))
            return f"{name} {draw(st.sampled_from(OPS))} {rhs}"
        return f"{name} {draw(st.sampled_from(['=', '!=']))} {draw(st.sampled_from(info))}"
    op = draw(st.sampled_from(["NOT", "AND", "OR"]))
    if op == "NOT":
        return f"NOT ({draw(cond_text(env, depth - 1))})"
    return f"({draw(cond_text(env, depth - 1))}) {op} ({draw(cond_text(env, depth - 1))})"


@st.composite
def event_text(draw, env, when_env):
    kind = draw(st.sampled_from("TFC"))
    if kind == "C":
        arg = draw(st.sampled_from(sorted(env)))
    else:
        arg = draw(cond_text(env, 1))
    text = f"@{kind}({arg})"
    if draw(st.booleans()):
        text = f"({text} when ({draw(cond_text(when_env, 1))}))"
    return text


def value_text(kind, info, draw):
    if kind == "bool":
        return draw(st.sampled_from(["true", "false"]))
    if kind == "int":
        return str(draw(st.integers(info[0], info[1])))
    return draw(st.sampled_from(info))


@st.composite
def spec_texts(draw):
    lines = ["spec Gen"]
    consts = []
    if draw(st.booleans()):
        lines.append("constants")
        for i in range(draw(st.integers(1, 2))):
            lines.append(f"  K{i} = {draw(st.integers(0, 3))}")
            consts.append(f"K{i}")
    env = {}
    lines.append("monitored")
    for i in range(draw(st.integers(1, 3))):
        kind = draw(st.sampled_from(["bool", "int", "enum"]))
        if kind == "bool":
            info, ty = None, "bool"
        elif kind == "int":
            lo = draw(st.integers(-2, 1))
            hi = lo + draw(st.integers(1, 4))
            info, ty = (lo, hi, consts), f"{lo}..{hi}"
        else:
            info = [f"E{i}v{k}" for k in range(draw(st.integers(2, 3)))]
            ty = "{" + ", ".join(info) + "}"
        lines.append(f"  m{i} : {ty} = {value_text(kind, info, draw)}")
        env[f"m{i}"] = (kind, info)

    derived = []
    for i in range(draw(st.integers(0, 2))):
        lines.append(f"terms\n  t{i} : bool = {draw(st.sampled_from(['true', 'false']))}")
        derived.append((f"t{i}", "condtable", dict(env)))
        env[f"t{i}"] = ("bool", None)

    modes = []
    by_mode = set()
    if draw(st.booleans()):
        modes = [f"Q{k}" for k in range(draw(st.integers(1, 3)))]
        # terms keyed by the mode class must not be read by its rows, even
        # indirectly; terms read only earlier terms, so key a suffix
        cut = draw(st.integers(0, len(derived)))
        by_mode = {name for name, _, _ in derived[cut:]}
        row_env = {k: v for k, v in env.items() if k not in by_mode}
        lines.append("modeclass mc {")
        lines.append("  modes " + ", ".join(modes))
        lines.append(f"  initial {draw(st.sampled_from(modes))}")
        for _ in range(draw(st.integers(0, 3))):
            lines.append(f"  {draw(st.sampled_from(modes))} -- "
                         f"{draw(event_text(row_env, row_env))} --> {draw(st.sampled_from(modes))}")
        lines.append("}")
    if draw(st.booleans()):
        lines.append("controlled\n  c0 : {LO, HI} = LO")
        lines.append("eventtable c0 {")
        for _ in range(draw(st.integers(0, 2))):
            lines.append(f"  {draw(event_text(env, env))} -> {draw(st.sampled_from(['LO', 'HI']))}")
        if draw(st.booleans()):
            lines.append("  default keep")
        lines.append("}")
    for name, _, visible in derived:
        if name in by_mode:
            lines.append(f"condtable {name} by mc {{")
            lines.append(f"  in {', '.join(modes)}:")
        else:
            lines.append(f"condtable {name} {{")
        for _ in range(draw(st.integers(1, 2))):
            lines.append(f"    {draw(cond_text(visible, 2))} -> "
                         f"{draw(st.sampled_from(['true', 'false']))}")
        lines.append("}")
    return "\n".join(lines) + "\n"


@settings(max_examples=300)
@given(spec_texts())
def test_render_parse_round_trip(text):
    spec = parse_spec(text)
    rendered = render_spec(spec)
    again = parse_spec(rendered)
    assert again == spec
    assert again.order == spec.order
    assert render_spec(again) == rendered
