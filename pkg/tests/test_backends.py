"""Internal decider and SMT-LIB client tests.  The foreground decider
is checked against a second enumerator coded differently on purpose."""

from __future__ import annotations

import itertools
import random

import pytest

from eqsmt.core import (
    Eq,
    Num,
    RelSym,
    RelApp,
    Sort,
    Var,
    Verdict,
    background_sort,
    bool_false,
    bool_true,
    boolean_sort,
    foreground_sort,
)
from eqsmt.backends import (
    BackendDescriptor,
    BackendRegistry,
    TheoryQuery,
    render_script,
    solve_bool,
    solve_external,
    solve_foreground,
)
from eqsmt.transform import Literal

FG = foreground_sort("FG")
BOOL = boolean_sort()
INT = background_sort("Int", "lia")
REAL = background_sort("Real", "lra")


def lit(atom, neg=False):
    return Literal(neg, atom)


def fg_query(exists, forall, clauses):
    return TheoryQuery(sort=FG, exists=tuple(exists), forall=tuple(forall),
                       clauses=tuple(tuple(c) for c in clauses))


# ------------------------------------------------------------- foreground

def test_two_named_elements_cover_universe():
    a, b, y = Var("a", FG), Var("b", FG), Var("y", FG)
    q = fg_query([a, b], [y], [
        [lit(Eq(y, a)), lit(Eq(y, b))],
        [lit(Eq(a, b), neg=True)],
    ])
    res = solve_foreground(q)
    assert res.verdict == Verdict.SAT
    assert res.model.values[a.vid] != res.model.values[b.vid]


def test_nonempty_universe_instantiates_universal():
    a, y = Var("a", FG), Var("y", FG)
    q = fg_query([a], [y], [[lit(Eq(y, a), neg=True)]])
    assert solve_foreground(q).verdict == Verdict.UNSAT


def test_reflexivity_needs_one_element():
    a = Var("a", FG)
    q = fg_query([a], [], [[lit(Eq(a, a))]])
    res = solve_foreground(q)
    assert res.verdict == Verdict.SAT
    assert res.model.values[a.vid] == 0


def test_foreground_refuses_non_equality():
    a = Var("a", FG)
    num_rel = RelSym("<", (FG, FG))
    q = fg_query([a], [], [[lit(RelApp(num_rel, (a, a)))]])
    with pytest.raises(ValueError):
        solve_foreground(q)


def _reference_fg(q):
    """Independent enumerator: recursion over variables one at a time
    rather than itertools products over blocks."""
    n = max(1, len(q.exists))

    def clause_true(c, env):
        for l in c:
            val = (env[l.atom.lhs.vid] == env[l.atom.rhs.vid])
            if val != l.neg:
                return True
        return False

    def all_universals(vs, env, size):
        if not vs:
            return all(clause_true(c, env) for c in q.clauses)
        v, rest = vs[0], vs[1:]
        for x in range(size):
            env2 = dict(env)
            env2[v.vid] = x
            if not all_universals(rest, env2, size):
                return False
        return True

    def some_existential(vs, env, size):
        if not vs:
            return all_universals(list(q.forall), env, size)
        v, rest = vs[0], vs[1:]
        return any(
            some_existential(rest, {**env, v.vid: x}, size) for x in range(size))

    return any(
        some_existential(list(q.exists), {}, size) for size in range(1, n + 1))


@pytest.mark.parametrize("seed", range(60))
def test_foreground_agrees_with_reference(seed):
    rng = random.Random(seed)
    ex = [Var("a%d" % i, FG) for i in range(rng.randint(0, 3))]
    fa = [Var("y%d" % i, FG) for i in range(rng.randint(0, 2))]
    pool = ex + fa
    if not pool:
        ex = [Var("a0", FG)]
        pool = ex
    clauses = []
    for _ in range(rng.randint(1, 4)):
        clause = []
        for _ in range(rng.randint(1, 3)):
            clause.append(lit(
                Eq(rng.choice(pool), rng.choice(pool)), neg=rng.random() < 0.5))
        clauses.append(clause)
    q = fg_query(ex, fa, clauses)
    got = solve_foreground(q).verdict
    want = Verdict.SAT if _reference_fg(q) else Verdict.UNSAT
    assert got == want


def test_foreground_model_size_within_bound():
    for seed in range(20):
        rng = random.Random(seed + 400)
        ex = [Var("a%d" % i, FG) for i in range(rng.randint(1, 3))]
        clauses = [[lit(Eq(rng.choice(ex), rng.choice(ex)), neg=rng.random() < 0.4)]
                   for _ in range(2)]
        q = fg_query(ex, [], clauses)
        res = solve_foreground(q)
        if res.verdict == Verdict.SAT:
            assert all(0 <= v < max(1, len(ex)) for v in res.model.values.values())


# ------------------------------------------------------------------ bool

def test_bool_positive_assignment():
    x = Var("x", BOOL)
    q = TheoryQuery(BOOL, (x,), (), ((lit(Eq(x, bool_true(BOOL))),),))
    res = solve_bool(q)
    assert res.verdict == Verdict.SAT
    assert res.model.values[x.vid] is True


def test_bool_universal_takes_both_values():
    x, y = Var("x", BOOL), Var("y", BOOL)
    q = TheoryQuery(BOOL, (x,), (y,), ((lit(Eq(x, y)),),))
    assert solve_bool(q).verdict == Verdict.UNSAT


def test_bool_excluded_middle():
    y = Var("y", BOOL)
    q = TheoryQuery(BOOL, (), (y,), (
        (lit(Eq(y, bool_true(BOOL))), lit(Eq(y, bool_false(BOOL)))),))
    assert solve_bool(q).verdict == Verdict.SAT


def test_bool_truth_table_cross_check():
    # all 2^2 exists x exists y clause shapes against direct tables
    x, y = Var("x", BOOL), Var("y", BOOL)
    for n1, n2 in itertools.product([False, True], repeat=2):
        q = TheoryQuery(BOOL, (x, y), (), (
            (lit(Eq(x, y), neg=n1),),
            (lit(Eq(x, bool_true(BOOL)), neg=n2),),
        ))
        expect = any(
            ((vx == vy) != n1) and ((vx is True) != n2)
            for vx, vy in itertools.product([False, True], repeat=2))
        got = solve_bool(q).verdict
        assert got == (Verdict.SAT if expect else Verdict.UNSAT)


# -------------------------------------------------------------- external

LT = RelSym("<", (INT, INT))
LE = RelSym("<=", (INT, INT))


def int_query():
    x, y = Var("x", INT), Var("y", INT)
    return TheoryQuery(INT, (x,), (y,), (
        (lit(RelApp(LE, (x, y))), lit(RelApp(LT, (y, Num(0, INT))))),))


def test_script_rendering_golden():
    d = BackendDescriptor("lia", "external", command="true", logic="LIA")
    script, by_name = render_script(int_query(), d)
    assert script == (
        "(set-logic LIA)\n"
        "(declare-const e0 Int)\n"
        "(assert (forall ((u0 Int)) (or (<= e0 u0) (< u0 0))))\n"
        "(check-sat)\n"
        "(get-value (e0))\n"
    )
    assert set(by_name) == {"e0"}


def test_script_negative_and_rational_numerals():
    x = Var("x", REAL)
    from fractions import Fraction
    ge = RelSym(">=", (REAL, REAL))
    q = TheoryQuery(REAL, (x,), (), (
        (lit(RelApp(ge, (x, Num(Fraction(-1, 2), REAL)))),),))
    d = BackendDescriptor("lra", "external", command="true", logic="LRA")
    script, _ = render_script(q, d)
    assert "(>= e0 (- (/ 1 2)))" in script


def fake_backend(body):
    # a stand-in solver: consumes stdin, prints canned output
    return "python3 -c \"import sys; sys.stdin.read(); %s\"" % body


def test_external_sat_with_value():
    d = BackendDescriptor(
        "lia", "external", logic="LIA",
        command=fake_backend("print('sat'); print('((e0 5))')"))
    res = solve_external(int_query(), d)
    assert res.verdict == Verdict.SAT
    (x,) = int_query().exists
    assert res.model.values[list(res.model.values)[0]] == "5"


def test_external_unsat_ignores_trailing_error():
    d = BackendDescriptor(
        "lia", "external", logic="LIA",
        command=fake_backend("print('unsat'); print('(error \\\"no model\\\")')"))
    res = solve_external(int_query(), d)
    assert res.verdict == Verdict.UNSAT


def test_external_unknown_and_protocol_garbage():
    d1 = BackendDescriptor("lia", "external", logic="LIA",
                           command=fake_backend("print('unknown')"))
    assert solve_external(int_query(), d1).verdict == Verdict.UNKNOWN
    d2 = BackendDescriptor("lia", "external", logic="LIA",
                           command=fake_backend("print('flurble')"))
    res = solve_external(int_query(), d2)
    assert res.verdict == Verdict.UNKNOWN
    assert "no verdict" in res.reason


def test_external_timeout():
    d = BackendDescriptor(
        "lia", "external", logic="LIA", timeout=0.5,
        command=fake_backend("import time; time.sleep(5)"))
    res = solve_external(int_query(), d)
    assert res.verdict == Verdict.UNKNOWN
    assert "timeout" in res.reason


def test_external_missing_binary():
    d = BackendDescriptor("lia", "external", logic="LIA",
                          command="definitely-not-a-solver-binary")
    res = solve_external(int_query(), d)
    assert res.verdict == Verdict.UNKNOWN


def test_registry_internal_dispatch_and_missing_config():
    reg = BackendRegistry()
    a = Var("a", FG)
    q = fg_query([a], [], [[lit(Eq(a, a))]])
    assert reg.solve(q).verdict == Verdict.SAT
    res = reg.solve(int_query())
    assert res.verdict == Verdict.UNKNOWN
    assert "EQSMT_BACKEND_CMD" in res.reason


def test_registry_empty_theory_background_uses_finite_decider():
    lbl = background_sort("L", "empty")
    reg = BackendRegistry()
    a, y = Var("a", lbl), Var("y", lbl)
    q = TheoryQuery(lbl, (a,), (y,), ((lit(Eq(y, a)),),))
    assert reg.solve(q).verdict == Verdict.SAT
