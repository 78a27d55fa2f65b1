"""Model pullback and validation."""

from __future__ import annotations

import json
from fractions import Fraction

import pytest

from eqsmt.backends import BackendRegistry
from eqsmt.core import (
    And,
    Eq,
    FApp,
    FiniteModel,
    FunVar,
    Not,
    RelVar,
    RelVarApp,
    Sentence,
    Var,
    Verdict,
    background_sort,
    bool_true,
    boolean_sort,
    conj,
    foreground_sort,
    make_signature,
    neg,
    validate,
)
from eqsmt.oracle import brute_force_sat, holds_for_all
from eqsmt.pipeline import solve
from eqsmt.witness import (
    Witness,
    parse_backend_value,
    validate_witness,
    witness_to_json,
)
from gen import gen_sentence

FG = foreground_sort()
BOOL = boolean_sort()
SIG = make_signature([FG])


def _solved(s):
    report = solve(s)
    assert report.verdict == Verdict.SAT
    assert report.witness is not None
    return report.witness


def test_pullback_relation_from_characteristic_values():
    a, b = Var("a", FG), Var("b", FG)
    r = RelVar("R", (FG, FG))
    s = Sentence(
        signature=SIG, exists_fo=(a, b), exists_rel=(r,),
        matrix=conj(
            RelVarApp(r, (a, b)),
            Not(RelVarApp(r, (b, a))),
        ),
    )
    assert validate(s) == []
    w = _solved(s)
    va, vb = w.fo_values[a.vid], w.fo_values[b.vid]
    assert va != vb  # R(a,b) and not R(b,a) forces distinctness
    assert (va, vb) in w.rel_sets[r.vid]
    assert (vb, va) not in w.rel_sets[r.vid]


def test_pullback_collapsed_universe():
    # a = b in every model, so the universe has one element and the
    # function table a single entry
    a, b = Var("a", FG), Var("b", FG)
    f = FunVar("F", (FG,), BOOL)
    s = Sentence(
        signature=SIG, exists_fo=(a, b), exists_fun=(f,),
        matrix=conj(Eq(a, b), Eq(FApp(f, (a,)), bool_true(BOOL))),
    )
    w = _solved(s)
    assert w.fo_values[a.vid] == w.fo_values[b.vid]
    assert len(w.universe) == 1
    assert w.fun_tables[f.vid] == {(w.universe[0],): True}


def test_pullback_universe_bound():
    a, b, c = Var("a", FG), Var("b", FG), Var("c", FG)
    s = Sentence(signature=SIG, exists_fo=(a, b, c),
                 matrix=conj(Not(Eq(a, b)), Not(Eq(b, c)), Not(Eq(a, c))))
    w = _solved(s)
    assert len(w.universe) == 3
    assert len(set(w.fo_values[v.vid] for v in (a, b, c))) == 3


def test_pullback_defaults_for_trivial_sorts():
    # the single clause goes to the foreground sort, so the boolean
    # model is trivial and p falls back to a default
    a = Var("a", FG)
    p = Var("p", BOOL)
    s = Sentence(signature=SIG, exists_fo=(a, p), matrix=Eq(a, a))
    w = _solved(s)
    assert w.fo_values[p.vid] in (False, True)


def test_validate_passes_on_solved_instance():
    a, b = Var("a", FG), Var("b", FG)
    r = RelVar("R", (FG, FG))
    y = Var("y", FG)
    s = Sentence(
        signature=SIG, exists_fo=(a, b), exists_rel=(r,), forall_fo=(y,),
        matrix=conj(RelVarApp(r, (a, a)), Not(RelVarApp(r, (a, b)))),
    )
    w = _solved(s)
    report = validate_witness(w, s)
    assert report.ok()
    assert report.checks >= 1


def test_validate_rejects_corrupted_relation():
    a = Var("a", FG)
    r = RelVar("R", (FG,))
    s = Sentence(signature=SIG, exists_fo=(a,), exists_rel=(r,),
                 matrix=RelVarApp(r, (a,)))
    w = _solved(s)
    assert validate_witness(w, s).ok()
    # flip the single tuple out of R
    w.rel_sets[r.vid] = frozenset()
    bad = validate_witness(w, s)
    assert bad.status == "fail"
    assert bad.failures


def test_validate_rejects_wrong_fo_value():
    a, b = Var("a", FG), Var("b", FG)
    s = Sentence(signature=SIG, exists_fo=(a, b), matrix=Not(Eq(a, b)))
    w = _solved(s)
    w.fo_values[b.vid] = w.fo_values[a.vid]
    assert validate_witness(w, s).status == "fail"


def test_validate_covers_universal_relations():
    # forall R: R(a) = R(b) can only hold when a = b
    a, b = Var("a", FG), Var("b", FG)
    r = RelVar("R", (FG,))
    s = Sentence(
        signature=SIG, exists_fo=(a, b), forall_rel=(r,),
        matrix=Eq(a, b),
    )
    w = _solved(s)
    assert validate_witness(w, s).ok()
    # a witness with distinct values fails under some R instantiation
    s2 = Sentence(
        signature=SIG, exists_fo=(a, b), forall_rel=(r,),
        matrix=conj(
            # iff-shaped via two implications over R applications
            neg(conj(RelVarApp(r, (a,)), Not(RelVarApp(r, (b,))))),
        ),
    )
    w2 = Witness(universe=(0, 1), fo_values={a.vid: 0, b.vid: 1})
    bad = validate_witness(w2, s2)
    assert bad.status == "fail"


def test_validate_arith_inconclusive_without_backend():
    INT = background_sort("Int", "lia")
    sig = make_signature([FG, INT])
    a = Var("a", FG)
    n = Var("n", INT)
    from eqsmt.core import Num
    s = Sentence(signature=sig, exists_fo=(a, n),
                 matrix=conj(Eq(a, a), Eq(n, Num(5, INT))))
    w = Witness(universe=(0,), fo_values={a.vid: 0, n.vid: "5"})
    report = validate_witness(w, s, BackendRegistry())
    assert report.status == "inconclusive"


def test_validate_arith_with_stub_backend():
    INT = background_sort("Int", "lia")
    sig = make_signature([FG, INT])
    a = Var("a", FG)
    n = Var("n", INT)
    from eqsmt.core import Num
    s = Sentence(signature=sig, exists_fo=(a, n),
                 matrix=conj(Eq(a, a), Eq(n, Num(5, INT))))
    w = Witness(universe=(0,), fo_values={a.vid: 0, n.vid: "5"})
    unsat = BackendRegistry(
        external_command="python3 -c \"import sys; sys.stdin.read(); print('unsat')\"")
    assert validate_witness(w, s, unsat).ok()
    # a backend that finds the negation satisfiable refutes the witness
    sat = BackendRegistry(
        external_command="python3 -c \"import sys; sys.stdin.read(); print('sat')\"")
    assert validate_witness(w, s, sat).status == "fail"


@pytest.mark.parametrize("seed", range(0, 40))
def test_roundtrip_corpus(seed):
    s = gen_sentence(seed)
    report = solve(s)
    want, _ = brute_force_sat(s, guard=6_000_000)
    assert report.verdict == want
    if report.verdict != Verdict.SAT:
        return
    w = report.witness
    vr = validate_witness(w, s)
    assert vr.ok(), vr.failures
    # independent cross-check through the oracle evaluator
    model = FiniteModel(
        universes={FG.name: tuple(w.universe), BOOL.name: (False, True)},
        fo=dict(w.fo_values),
        funs={k: dict(v) for k, v in w.fun_tables.items()},
        rels=dict(w.rel_sets),
    )
    assert holds_for_all(s, model)


def test_parse_backend_value_forms():
    assert parse_backend_value("5") == 5
    assert parse_backend_value("-5") == -5
    assert parse_backend_value("(- 5)") == -5
    assert parse_backend_value("(/ 1 2)") == Fraction(1, 2)
    assert parse_backend_value("(- (/ 3 2))") == Fraction(-3, 2)
    assert parse_backend_value("3.25") == Fraction(13, 4)
    assert parse_backend_value(7) == 7
    assert parse_backend_value("unparseable!") is None


def test_witness_json_shape():
    a = Var("a", FG)
    r = RelVar("R", (FG,))
    f = FunVar("F", (FG,), BOOL)
    s = Sentence(signature=SIG, exists_fo=(a,), exists_rel=(r,), exists_fun=(f,),
                 matrix=conj(RelVarApp(r, (a,)), Eq(FApp(f, (a,)), bool_true(BOOL))))
    w = _solved(s)
    doc = witness_to_json(w, s)
    text = json.dumps(doc)  # must be serializable
    assert doc["schema"] == "eqsmt-witness/1"
    assert doc["universe"] == list(w.universe)
    assert doc["rels"][0]["name"] == "R"
    assert doc["funs"][0]["table"]
    assert "a" in text
