from __future__ import annotations

import pytest

from eqsmt import core, parser
from eqsmt.core import And, Eq, FApp, Implies, Num, Or, RelVarApp, validate
from eqsmt.parser import ParseError, alpha_equal, parse, print_problem, print_sentence

BASIC = """
(declare-sort FG :foreground)
(declare-sort Int :background lia)
(assert-eqsmt (exists ((a FG) (F (-> FG Int)))
  (forall ((y FG)) (= (F a) (F y)))))
"""


def test_parse_declarations():
    pf = parse(BASIC)
    names = [s.name for s in pf.signature.sorts]
    assert "FG" in names and "Int" in names and "bool" in names
    assert len(pf.sentences) == 1
    s = pf.sentences[0]
    assert len(s.exists_fo) == 1
    assert len(s.exists_fun) == 1
    assert len(s.forall_fo) == 1
    assert validate(s) == []


def test_parse_relation_binder_and_matrix():
    text = """
(declare-sort FG :foreground)
(assert-eqsmt (exists ((a FG) (R (Rel FG FG)))
  (forall ((y FG)) (or (R a y) (not (R y a))))))
"""
    s = parse(text).sentences[0]
    assert len(s.exists_rel) == 1
    assert isinstance(s.matrix, Or)
    assert validate(s) == []


def test_parse_syntax_error_position():
    text = "(declare-sort FG :foreground)\n(assert-eqsmt (exists ((a)) true))"
    with pytest.raises(ParseError) as err:
        parse(text)
    assert err.value.line == 2


def test_parse_unknown_sort():
    with pytest.raises(ParseError):
        parse("(assert-eqsmt (exists ((a FG)) true))")


def test_parse_duplicate_sort():
    with pytest.raises(ParseError):
        parse("(declare-sort A :foreground)\n(declare-sort A :foreground)")


def test_numeral_sort_inference():
    text = """
(declare-sort FG :foreground)
(declare-sort Int :background lia)
(assert-eqsmt (exists ((x Int)) (= x 5)))
"""
    s = parse(text).sentences[0]
    assert isinstance(s.matrix, Eq)
    assert isinstance(s.matrix.rhs, Num)
    assert s.matrix.rhs.value == 5


def test_numeral_ambiguity_needs_as():
    text = """
(declare-sort FG :foreground)
(declare-sort A :background lia)
(declare-sort B :background lia)
(assert-eqsmt (forall ((y A)) (= 1 1)))
"""
    with pytest.raises(ParseError):
        parse(text)
    ok = text.replace("(= 1 1)", "(= (as 1 A) (as 1 A))")
    assert parse(ok).sentences


def test_arith_operators_fold():
    text = """
(declare-sort FG :foreground)
(declare-sort Int :background lia)
(assert-eqsmt (exists ((x Int)) (< (+ x 1 2) (- x))))
"""
    s = parse(text).sentences[0]
    assert validate(s) == []


def test_set_option_values():
    text = """
(declare-sort FG :foreground)
(set-option :goal synth)
(set-option :timeout 30)
(set-option :backend "z3 -in")
(assert-eqsmt true)
"""
    pf = parse(text)
    assert pf.goal == "synth"
    assert pf.options["timeout"] == 30
    assert pf.options["backend"] == "z3 -in"


def test_declared_symbols_usable():
    text = """
(declare-sort FG :foreground)
(declare-sort Int :background lia)
(declare-const k Int)
(declare-fun h (Int) Int)
(assert-eqsmt (exists ((x Int)) (= (h x) k)))
"""
    s = parse(text).sentences[0]
    assert validate(s) == []


def test_roundtrip_basic():
    pf = parse(BASIC)
    text = print_problem(pf.signature, pf.sentences, pf.options)
    pf2 = parse(text)
    assert alpha_equal(pf.sentences[0], pf2.sentences[0])


def test_roundtrip_boolean_terms():
    text = """
(declare-sort FG :foreground)
(assert-eqsmt (exists ((a FG) (F (-> FG bool)))
  (forall ((y FG)) (=> (= (F y) true) (= (F a) false)))))
"""
    pf = parse(text)
    s = pf.sentences[0]
    assert isinstance(s.matrix, Implies)
    out = print_sentence(s)
    assert "true" in out and "false" in out
    pf2 = parse(print_problem(pf.signature, pf.sentences))
    assert alpha_equal(s, pf2.sentences[0])


def test_roundtrip_conjoined_shared_names():
    extra = "(assert-eqsmt (exists ((a FG) (F (-> FG Int))) (= (F a) (F a))))"
    pf = parse(BASIC + extra)
    merged = core.conjoin(pf.sentences)
    text = print_problem(pf.signature, [merged])
    back = parse(text).sentences[0]
    assert alpha_equal(merged, back)


def test_empty_forall_prints_without_wrapper():
    text = """
(declare-sort FG :foreground)
(assert-eqsmt (exists ((a FG)) (= a a)))
"""
    s = parse(text).sentences[0]
    assert "forall" not in print_sentence(s)


def test_print_is_deterministic():
    pf = parse(BASIC)
    assert print_sentence(pf.sentences[0]) == print_sentence(pf.sentences[0])
