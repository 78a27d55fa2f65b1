"""Lowering pipeline tests.

Hand-worked fixtures pin the fresh-symbol counts and guard shapes; the
corpus property tests check verdict invariance of every step against
the brute-force reference, which is the real correctness argument.
"""

from __future__ import annotations

import itertools

import pytest

from eqsmt.core import (
    And,
    Eq,
    FApp,
    FalseF,
    FunVar,
    Iff,
    Implies,
    Not,
    Or,
    RelVar,
    RelVarApp,
    Sentence,
    Var,
    Verdict,
    bool_true,
    boolean_sort,
    foreground_sort,
    make_signature,
    validate,
)
from eqsmt.oracle import OracleResourceError, brute_force_sat
from eqsmt.transform import (
    Literal,
    TransformOptions,
    TransformResourceError,
    TransformTrace,
    run_steps,
    step1_eliminate_relvars,
    step2_eliminate_existential_funs,
    step2_restrict_foreground,
    step3_ackermannize,
    to_cnf,
)

from gen import gen_sentence

FG = foreground_sort("FG")
BOOL = boolean_sort()
SIG = make_signature([FG, BOOL])


def sent(**kw):
    return Sentence(signature=SIG, **kw)


def verdict_of(s, guard=6_000_000):
    return brute_force_sat(s, guard=guard)[0]


# ---------------------------------------------------------------- step 1

def test_step1_replaces_both_blocks():
    a, y = Var("a", FG), Var("y", FG)
    r = RelVar("R", (FG, FG))
    u = RelVar("S", (FG,))
    s = sent(
        exists_fo=(a,), exists_rel=(r,), forall_fo=(y,), forall_rel=(u,),
        matrix=And((RelVarApp(r, (a, a)), RelVarApp(u, (y,)))))
    trace = TransformTrace()
    out = step1_eliminate_relvars(s, trace)
    assert out.exists_rel == () and out.forall_rel == ()
    assert len(out.exists_fun) == 1 and len(out.forall_fun) == 1
    assert out.exists_fun[0].arg_sorts == (FG, FG)
    assert out.exists_fun[0].result == BOOL
    assert validate(out) == []
    # R(a,a) became f_R(a,a) = true
    lhs = out.matrix.parts[0]
    assert isinstance(lhs, Eq) and isinstance(lhs.lhs, FApp)
    assert lhs.rhs == bool_true(BOOL)
    assert trace.step1[r.vid].arg_sorts == (FG, FG)


def test_step1_identity_without_relvars():
    x = Var("x", FG)
    s = sent(exists_fo=(x,), matrix=Eq(x, x))
    assert step1_eliminate_relvars(s) is s


# ---------------------------------------------------------------- step 2a

def test_restrict_collects_vars_and_applications():
    # terms of sort FG: a, b, y, H(y); each gets a two-way disjunction
    a, b, y = Var("a", FG), Var("b", FG), Var("y", FG)
    h = FunVar("H", (FG,), FG)
    s = sent(
        exists_fo=(a, b), forall_fo=(y,), forall_fun=(h,),
        matrix=Eq(FApp(h, (y,)), a))
    trace = TransformTrace()
    out = step2_restrict_foreground(s, trace)
    assert trace.restrict_terms == 4
    restrict = out.matrix.parts[0]
    assert len(restrict.parts) == 4
    for part in restrict.parts:
        assert isinstance(part, Or) and len(part.parts) == 2


def test_restrict_no_foreground_terms_is_identity():
    p = Var("p", BOOL)
    s = sent(exists_fo=(p,), matrix=Eq(p, bool_true(BOOL)))
    assert step2_restrict_foreground(s) is s


def test_restrict_without_existential_names_short_circuits():
    y1, y2 = Var("y1", FG), Var("y2", FG)
    s = sent(forall_fo=(y1, y2), matrix=Eq(y1, y2))
    trace = TransformTrace()
    out = step2_restrict_foreground(s, trace)
    assert isinstance(out.matrix, FalseF)
    assert trace.restrict_note is not None


# ---------------------------------------------------------------- step 2b

def test_eliminate_single_unary_function():
    a, b, y = Var("a", FG), Var("b", FG), Var("y", FG)
    f = FunVar("F", (FG,), BOOL)
    s = sent(
        exists_fo=(a, b), exists_fun=(f,), forall_fo=(y,),
        matrix=Eq(FApp(f, (y,)), bool_true(BOOL)))
    trace = TransformTrace()
    out = step2_eliminate_existential_funs(step2_restrict_foreground(s, trace), trace)
    assert out.exists_fun == ()
    rec = trace.step2[f.vid]
    assert len(rec.image) == 2  # n^m = 2^1
    assert rec.emulator is not None
    assert rec.emulator in out.forall_fun
    # two image vars joined the existential block
    assert len(out.exists_fo) == 4
    assert validate(out) == []


def test_eliminate_budget():
    xs = tuple(Var("x%d" % i, FG) for i in range(3))
    f = FunVar("F", (FG, FG), BOOL)
    s = sent(
        exists_fo=xs, exists_fun=(f,),
        matrix=Eq(FApp(f, (xs[0], xs[1])), bool_true(BOOL)))
    with pytest.raises(TransformResourceError) as e:
        step2_eliminate_existential_funs(
            step2_restrict_foreground(s), opts=TransformOptions(step2_budget=8))
    assert "3^2" in str(e.value) or "9" in str(e.value)


def test_image_count_is_n_to_the_m():
    for n, m in [(1, 1), (2, 1), (2, 2), (3, 2)]:
        xs = tuple(Var("x%d" % i, FG) for i in range(n))
        f = FunVar("F", (FG,) * m, BOOL)
        s = sent(
            exists_fo=xs, exists_fun=(f,),
            matrix=Eq(FApp(f, (xs[0],) * m), bool_true(BOOL)))
        trace = TransformTrace()
        step2_eliminate_existential_funs(step2_restrict_foreground(s, trace), trace)
        assert len(trace.step2[f.vid].image) == n ** m


def test_colliding_names_forced_to_equal_images():
    # a = b with F(a) true and F(b) false is unsatisfiable; the
    # consistency conjunct is what rules it out after elimination.
    a, b = Var("a", FG), Var("b", FG)
    f = FunVar("F", (FG,), BOOL)
    s = sent(
        exists_fo=(a, b), exists_fun=(f,),
        matrix=And((
            Eq(a, b),
            Eq(FApp(f, (a,)), bool_true(BOOL)),
            Not(Eq(FApp(f, (b,)), bool_true(BOOL))))))
    assert verdict_of(s) == Verdict.UNSAT
    out = step2_eliminate_existential_funs(step2_restrict_foreground(s))
    assert verdict_of(out) == Verdict.UNSAT


def test_nested_guards_for_two_functions():
    a, y = Var("a", FG), Var("y", FG)
    f1 = FunVar("F1", (FG,), BOOL)
    f2 = FunVar("F2", (FG,), BOOL)
    s = sent(
        exists_fo=(a,), exists_fun=(f1, f2), forall_fo=(y,),
        matrix=Eq(FApp(f1, (y,)), FApp(f2, (y,))))
    out = step2_eliminate_existential_funs(step2_restrict_foreground(s))
    # matrix: consistency-free here (single name), so shape is
    # em(F2) => (em(F1) => psi) possibly under a top-level conjunction
    m = out.matrix
    assert isinstance(m, Implies)
    assert isinstance(m.rhs, Implies)


def test_substitution_mode_on_pure_applications():
    a, b = Var("a", FG), Var("b", FG)
    f = FunVar("F", (FG,), BOOL)
    s = sent(
        exists_fo=(a, b), exists_fun=(f,),
        matrix=Eq(FApp(f, (a,)), FApp(f, (b,))))
    trace = TransformTrace()
    out = step2_eliminate_existential_funs(
        step2_restrict_foreground(s, trace), trace,
        TransformOptions(substitute_pure=True))
    assert trace.step2[f.vid].emulator is None
    assert out.forall_fun == ()
    assert verdict_of(out) == verdict_of(s) == Verdict.SAT


# ---------------------------------------------------------------- step 3

def test_ackermann_two_applications():
    a, b = Var("a", FG), Var("b", FG)
    g = FunVar("G", (FG,), BOOL)
    s = sent(
        exists_fo=(a, b), forall_fun=(g,),
        matrix=Eq(FApp(g, (a,)), FApp(g, (b,))))
    trace = TransformTrace()
    out = step3_ackermannize(s, trace)
    assert out.forall_fun == ()
    assert len(out.forall_fo) == 2
    assert trace.ack_implications[g.vid] == 1  # C(2,2 choose) = 1 pair
    m = out.matrix
    assert isinstance(m, Implies)  # psi_ack => matrix'


def test_ackermann_single_application_no_constraint():
    a = Var("a", FG)
    g = FunVar("G", (FG,), BOOL)
    s = sent(
        exists_fo=(a,), forall_fun=(g,),
        matrix=Eq(FApp(g, (a,)), bool_true(BOOL)))
    trace = TransformTrace()
    out = step3_ackermannize(s, trace)
    assert trace.ack_implications[g.vid] == 0
    assert not isinstance(out.matrix, Implies)


def test_ackermann_nested_two_rounds():
    a = Var("a", FG)
    g = FunVar("G", (FG,), FG)
    h = FunVar("H", (FG,), BOOL)
    s = sent(
        exists_fo=(a,), forall_fun=(g, h),
        matrix=Eq(FApp(h, (FApp(g, (a,)),)), bool_true(BOOL)))
    trace = TransformTrace()
    out = step3_ackermannize(s, trace)
    assert out.forall_fun == ()
    # one y for G(a), one for H(y_G)
    assert len(trace.step3[g.vid].apps) == 1
    assert len(trace.step3[h.vid].apps) == 1
    ((args, _),) = trace.step3[h.vid].apps
    assert isinstance(args[0], Var)  # argument is the inner fresh var
    assert validate(out) == []


def test_ackermann_count_is_pairs_of_applications():
    xs = tuple(Var("x%d" % i, FG) for i in range(3))
    g = FunVar("G", (FG,), BOOL)
    s = sent(
        exists_fo=xs, forall_fun=(g,),
        matrix=And(tuple(Eq(FApp(g, (x,)), bool_true(BOOL)) for x in xs)))
    trace = TransformTrace()
    step3_ackermannize(s, trace)
    assert trace.ack_implications[g.vid] == 3  # C(3,2)


# ---------------------------------------------------------------- cnf

def b(name):
    return Var(name, BOOL)


def atom(name):
    return Eq(b(name), bool_true(BOOL))


def test_cnf_implication():
    vp, vq = b("p"), b("q")
    p, q = Eq(vp, bool_true(BOOL)), Eq(vq, bool_true(BOOL))
    s = sent(exists_fo=(vp, vq), matrix=Implies(p, q))
    cnf = to_cnf(s)
    assert len(cnf.clauses) == 1
    (clause,) = cnf.clauses
    assert set(clause) == {Literal(True, p), Literal(False, q)}


def test_cnf_distribution():
    vs = [b(n) for n in "pqrs"]
    ats = [Eq(v, bool_true(BOOL)) for v in vs]
    s = sent(
        exists_fo=tuple(vs),
        matrix=Or((And((ats[0], ats[1])), And((ats[2], ats[3])))))
    cnf = to_cnf(s)
    assert len(cnf.clauses) == 4
    assert all(len(c) == 2 for c in cnf.clauses)


def test_cnf_tautology_and_duplicate_pruning():
    vp = b("p")
    p = Eq(vp, bool_true(BOOL))
    s = sent(exists_fo=(vp,), matrix=Or((p, Not(p))))
    assert to_cnf(s).clauses == []
    s2 = sent(exists_fo=(vp,), matrix=And((p, p)))
    assert len(to_cnf(s2).clauses) == 1


def test_cnf_absorption():
    vp, vq = b("p"), b("q")
    p, q = Eq(vp, bool_true(BOOL)), Eq(vq, bool_true(BOOL))
    s = sent(exists_fo=(vp, vq), matrix=And((p, Or((p, q)))))
    cnf = to_cnf(s)
    assert len(cnf.clauses) == 1
    assert cnf.clauses[0] == (Literal(False, p),)


def test_cnf_budget():
    vs = [b("p%d" % i) for i in range(12)]
    ats = [Eq(v, bool_true(BOOL)) for v in vs]
    # (a1&b1) | (a2&b2) | ... distributes to 2^6 clauses
    m = Or(tuple(And((ats[2 * i], ats[2 * i + 1])) for i in range(6)))
    s = sent(exists_fo=tuple(vs), matrix=m)
    with pytest.raises(TransformResourceError):
        to_cnf(s, opts=TransformOptions(cnf_budget=10))
    assert len(to_cnf(s).clauses) == 64


def _truth_table_equiv(f1, f2, variables):
    for bits in itertools.product([False, True], repeat=len(variables)):
        model_fo = {v.vid: val for v, val in zip(variables, bits)}
        from eqsmt.core import FiniteModel, eval_formula
        model = FiniteModel(
            universes={FG.name: (0,), BOOL.name: (False, True)}, fo=model_fo)
        if eval_formula(f1, model) != eval_formula(f2, model):
            return False
    return True


@pytest.mark.parametrize("seed", range(15))
def test_cnf_equivalent_by_truth_table(seed):
    import random
    rng = random.Random(seed)
    vs = [b("p%d" % i) for i in range(4)]
    ats = [Eq(v, bool_true(BOOL)) for v in vs]

    def rand_formula(d):
        if d == 0:
            a = rng.choice(ats)
            return Not(a) if rng.random() < 0.4 else a
        op = rng.choice(["and", "or", "implies", "iff", "not"])
        if op == "not":
            return Not(rand_formula(d - 1))
        lhs, rhs = rand_formula(d - 1), rand_formula(d - 1)
        if op == "and":
            return And((lhs, rhs))
        if op == "or":
            return Or((lhs, rhs))
        if op == "implies":
            return Implies(lhs, rhs)
        return Iff(lhs, rhs)

    m = rand_formula(3)
    s = sent(exists_fo=tuple(vs), matrix=m)
    cnf = to_cnf(s)
    assert _truth_table_equiv(m, cnf.matrix_formula(), vs)


# ----------------------------------------------- step-wise verdict invariance

def _oracle_or_none(s):
    try:
        return verdict_of(s)
    except OracleResourceError:
        return None


@pytest.mark.parametrize("seed", range(30))
def test_each_step_preserves_verdict(seed):
    s = gen_sentence(seed)
    base = _oracle_or_none(s)
    assert base is not None  # generator caps the cost of the original
    checked = 0
    trace = TransformTrace()
    s1 = step1_eliminate_relvars(s, trace)
    for stage in [s1]:
        v = _oracle_or_none(stage)
        if v is not None:
            assert v == base
            checked += 1
    s2a = step2_restrict_foreground(s1, trace)
    s2b = step2_eliminate_existential_funs(s2a, trace)
    s3 = step3_ackermannize(s2b, trace)
    cnf = to_cnf(s3, trace)
    for stage in [s2a, s2b, s3, cnf.to_sentence()]:
        v = _oracle_or_none(stage)
        if v is not None:
            assert v == base


@pytest.mark.parametrize("seed", range(30, 45))
def test_option_variants_preserve_verdict(seed):
    s = gen_sentence(seed)
    base = _oracle_or_none(s)
    assert base is not None
    for opts in [
        TransformOptions(collect_guards=True),
        TransformOptions(substitute_pure=True),
        TransformOptions(prune_by_units=True),
        TransformOptions(collect_guards=True, substitute_pure=True, prune_by_units=True),
    ]:
        try:
            cnf, _, _ = run_steps(s, opts)
        except TransformResourceError:
            continue  # generator only guarantees the default budgets
        v = _oracle_or_none(cnf.to_sentence())
        if v is not None:
            assert v == base


def test_structural_invariants_after_each_step():
    for seed in range(45, 60):
        s = gen_sentence(seed)
        cnf, trace, stages = run_steps(s)
        by_name = dict(stages)
        assert by_name["01-norel"].exists_rel == ()
        assert by_name["01-norel"].forall_rel == ()
        assert by_name["03-nofun"].exists_fun == ()
        assert by_name["04-ack"].forall_fun == ()
        expected_images = sum(
            len(rec.image) for rec in trace.step2.values())
        grown = len(by_name["03-nofun"].exists_fo) - len(by_name["02-restrict"].exists_fo)
        assert grown == expected_images
        for vid, rec in trace.step3.items():
            k = len(rec.apps)
            assert trace.ack_implications[vid] == k * (k - 1) // 2
        assert trace.clause_count == len(cnf.clauses)
