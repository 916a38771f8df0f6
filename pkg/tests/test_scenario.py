from itertools import product

import pytest
from hypothesis import given, settings, strategies as st

from helpers import corpus_scenario, corpus_spec, denotation
from scrscen.diagnostics import ParseError
from scrscen.model import Cmp, Event, Lit, VarRef
from scrscen.scenario import (GuardedChange, Seq, Star, StateChange, Test,
                              compile_to_automaton, parse_scenario, sentences)

SPEC = corpus_spec("buggy")


def parse(text):
    return parse_scenario(text, SPEC)


def test_s2_structure():
    scn = corpus_scenario("buggy", "s2")
    assert scn.program == Seq((
        Star(StateChange()),
        Test(Cmp("=", VarRef("mcPulseCondition"), Lit("MAGnormal"))),
        GuardedChange(Event("F", VarRef("tMagnetON"))),
    ))
    assert scn.check == Cmp("=", VarRef("mcPulseCondition"), Lit("Normal"))
    assert scn.name == "s2"


def test_single_sentence_program():
    scn = parse("program : { stateChange } check : { true }")
    aut = scn.automaton
    assert aut.n == 1 and aut.accept == 2
    assert [(e.src, e.dst) for e in aut.edges] == [(1, 2)]


def test_empty_program_is_an_error():
    with pytest.raises(ParseError) as info:
        parse("program : { } check : { true }")
    assert info.value.diagnostics[0].code == "syntax"


def test_loop_of_tests_is_rejected():
    with pytest.raises(ParseError) as info:
        parse("program : { [ mMagnet = ON ]*; stateChange } check : { true }")
    assert info.value.diagnostics[0].code == "test-loop"
    with pytest.raises(ValueError):
        compile_to_automaton(Star(Test(Lit(True))))


def test_guard_kinds():
    scn = parse("program : { stateChange[mMagnet = ON]; stateChange[@T(mMagnet = OFF)] }"
                " check : { true }")
    cond, event = sentences(scn.program)
    assert not cond.guard.is_event and event.guard.is_event


def test_bad_check_is_reported():
    with pytest.raises(ParseError) as info:
        parse("program : { stateChange } check : { mNope = 1 }")
    assert any(d.code == "undeclared" for d in info.value.diagnostics)


def test_rendering_round_trips():
    for name in ("s1", "s2", "s2_refined"):
        scn = corpus_scenario("buggy", name)
        assert parse(str(scn)) == scn


def test_s2_automaton():
    aut = corpus_scenario("buggy", "s2").automaton
    assert aut.n == 3
    assert [(e.src, e.index, e.dst) for e in aut.edges] == [(1, 1, 1), (2, 2, 3), (3, 3, 4)]
    assert aut.skips == ((1, 2),)
    assert aut.accepts([2, 3]) and aut.accepts([1, 1, 2, 3])
    assert not aut.accepts([1, 2]) and not aut.accepts([3])


def test_s1_automaton():
    aut = corpus_scenario("buggy", "s1").automaton
    assert aut.accept == 4
    assert aut.closure(1) == (1, 2) and aut.closure(3) == (3, 4)
    assert aut.accepts([2]) and aut.accepts([1, 2, 3, 3])


def test_straight_line_numbering():
    aut = parse("program : { stateChange; [ true ]; stateChange } check : { true }").automaton
    assert [(e.src, e.index, e.dst) for e in aut.edges] == [(1, 1, 2), (2, 2, 3), (3, 3, 4)]
    assert aut.skips == ()


def test_loop_opening_a_loop_gets_its_own_pc():
    # (a*; b)* must not finish right after an a
    aut = parse("program : { (stateChange*; stateChange)* } check : { true }").automaton
    assert aut.heads == (1, 4)
    assert aut.accepts([]) and aut.accepts([1, 2]) and aut.accepts([1, 1, 2, 2])
    assert not aut.accepts([1]) and not aut.accepts([2, 1])


def test_nested_star():
    aut = parse("program : { (stateChange; stateChange*)* } check : { true }").automaton
    assert aut.accepts([]) and aut.accepts([1]) and aut.accepts([1, 2, 2, 1])
    assert not aut.accepts([2])


# -- language equivalence against the regular-expression oracle ----------------

@st.composite
def shapes(draw, depth=3):
    """Abstract programs with ``("s",)`` leaves."""
    if depth == 0 or draw(st.integers(0, 2)) == 0:
        return ("s",)
    if draw(st.booleans()):
        return ("star", draw(shapes(depth - 1)))
    return ("seq", draw(st.lists(shapes(depth - 1), min_size=2, max_size=3)))


def number(shape, counter):
    if shape[0] == "s":
        counter[0] += 1
        return ("s", counter[0])
    if shape[0] == "star":
        return ("star", number(shape[1], counter))
    return ("seq", [number(q, counter) for q in shape[1]])


def to_program(shape):
    if shape[0] == "s":
        return StateChange()
    if shape[0] == "star":
        return Star(to_program(shape[1]))
    return Seq(tuple(to_program(q) for q in shape[1]))


def count(shape):
    return 1 if shape[0] == "s" else sum(count(q) for q in ([shape[1]] if shape[0] == "star"
                                                              else shape[1]))


MAX_LEN = 5


@settings(max_examples=300)
@given(shapes())
def test_automaton_accepts_the_program_language(shape):
    if count(shape) > 3:
        return
    numbered = number(shape, [0])
    aut = compile_to_automaton(to_program(shape))
    lang = denotation(numbered, MAX_LEN)
    alphabet = range(1, aut.n + 1)
    for length in range(MAX_LEN + 1):
        for word in product(alphabet, repeat=length):
            assert aut.accepts(word) == (word in lang), word


@settings(max_examples=300)
@given(shapes())
def test_automaton_size(shape):
    aut = compile_to_automaton(to_program(shape))
    n = count(shape)
    assert aut.n == n
    spare = set(aut.states) - set(range(1, n + 2))
    assert len(spare) <= len(aut.heads) == repr(shape).count("star")
    assert spare <= set(aut.heads)
    assert [e.index for e in sorted(aut.edges, key=lambda e: e.index)] == list(range(1, n + 1))
    if "star" not in repr(shape):
        # straight-line code: sentence i runs from pc i and the end has no exits
        assert all(e.src == e.index and e.dst == e.index + 1 for e in aut.edges)
        assert aut.out(aut.accept) == ()
