"""Contract search tests: enumeration bounds, pruning, caching, and
verdict agreement with the reference procedure on the corpus."""

from __future__ import annotations

import pytest

from eqsmt.backends import BackendRegistry
from eqsmt.core import (
    Eq,
    Num,
    RelSym,
    RelApp,
    Var,
    Verdict,
    background_sort,
    bool_true,
    boolean_sort,
    foreground_sort,
    make_signature,
)
from eqsmt.decompose import (
    Contract,
    SolveOptions,
    build_query,
    candidate_sorts,
    enumerate_contracts,
    solve_cnf,
    sort_of_atom,
    split_clause,
)
from eqsmt.oracle import OracleResourceError, brute_force_sat
from eqsmt.transform import CnfSentence, Literal, run_steps

from gen import gen_sentence

FG = foreground_sort("FG")
BOOL = boolean_sort()
INT = background_sort("Int", "lia")
SIG3 = make_signature([FG, INT])
SIG2 = make_signature([FG])
LT = RelSym("<", (INT, INT))


def lit(atom, neg=False):
    return Literal(neg, atom)


def test_sort_of_atom():
    a = Var("a", FG)
    x = Var("x", INT)
    p = Var("p", BOOL)
    assert sort_of_atom(Eq(a, a)) == FG
    assert sort_of_atom(RelApp(LT, (x, Num(0, INT)))) == INT
    assert sort_of_atom(Eq(p, bool_true(BOOL))) == BOOL


def test_split_clause_filters_by_sort():
    a = Var("a", FG)
    x = Var("x", INT)
    clause = (lit(Eq(a, a)), lit(RelApp(LT, (x, Num(0, INT)))))
    assert split_clause(clause, FG) == (clause[0],)
    assert split_clause(clause, INT) == (clause[1],)
    assert split_clause(clause, BOOL) == ()


def test_split_clause_partition_identity():
    a = Var("a", FG)
    x = Var("x", INT)
    p = Var("p", BOOL)
    clause = (lit(Eq(a, a)), lit(RelApp(LT, (x, x)), neg=True),
              lit(Eq(p, bool_true(BOOL))))
    pieces = [l for s in SIG3.sorts for l in split_clause(clause, s)]
    assert sorted(map(repr, pieces)) == sorted(map(repr, clause))


def mixed_cnf():
    a = Var("a", FG)
    x = Var("x", INT)
    c1 = (lit(Eq(a, a)), lit(RelApp(LT, (x, Num(0, INT)))))
    c2 = (lit(Eq(a, a), neg=True), lit(RelApp(LT, (Num(0, INT), x))))
    return CnfSentence(signature=SIG3, exists_fo=(a, x), forall_fo=(),
                       clauses=[c1, c2]), a, x


def test_enumerate_contracts_pruned_and_bound():
    cnf, a, x = mixed_cnf()
    pruned = list(enumerate_contracts(cnf, pruned=True))
    unpruned = list(enumerate_contracts(cnf, pruned=False))
    # two clauses, both with atoms in exactly {FG, Int}
    assert len(pruned) == 4
    # |S|^r with the implicit boolean sort counted
    assert len(unpruned) == len(SIG3.sorts) ** 2
    assert len(pruned) <= len(unpruned)
    for c in pruned:
        assert isinstance(c, Contract) and len(c.sorts) == 2


def test_candidate_sorts_single_sort_clause():
    x = Var("x", INT)
    clause = (lit(RelApp(LT, (x, Num(0, INT)))),)
    assert candidate_sorts(clause, SIG3.sorts, pruned=True) == (INT,)


def test_build_query_single_sortedness():
    cnf, a, x = mixed_cnf()
    q = build_query(cnf, FG, frozenset({0, 1}))
    assert q.exists == (a,)
    assert all(sort_of_atom(l.atom) == FG for c in q.clauses for l in c)


def test_solve_trivial_reflexivity_contract():
    # clause (a=a | x<0): the FG assignment alone already succeeds
    cnf, a, x = mixed_cnf()
    cnf = CnfSentence(cnf.signature, cnf.exists_fo, cnf.forall_fo, [cnf.clauses[0]])
    out = solve_cnf(cnf, BackendRegistry())
    assert out.verdict == Verdict.SAT
    assert out.contract.sorts == (FG,)
    assert FG.name in out.models


def test_solve_empty_clause_is_unsat():
    a = Var("a", FG)
    cnf = CnfSentence(SIG2, (a,), (), [()])
    out = solve_cnf(cnf, BackendRegistry())
    assert out.verdict == Verdict.UNSAT


def test_solve_no_clauses_is_sat():
    cnf = CnfSentence(SIG2, (), (), [])
    out = solve_cnf(cnf, BackendRegistry())
    assert out.verdict == Verdict.SAT


def test_unknown_backend_never_reported_unsat():
    # the only candidate sort is Int and no backend is configured:
    # the honest answer is UNKNOWN, not UNSAT
    x = Var("x", INT)
    cnf = CnfSentence(SIG3, (x,), (), [(lit(RelApp(LT, (x, Num(0, INT)))),)])
    out = solve_cnf(cnf, BackendRegistry())
    assert out.verdict == Verdict.UNKNOWN
    assert out.reason


def test_max_contracts_budget():
    cnf, a, x = mixed_cnf()
    out = solve_cnf(cnf, BackendRegistry(),
                    SolveOptions(max_contracts=1))
    # first contract fails only if its Int query is issued; with no
    # backend the FG-only contract may still succeed first
    assert out.verdict in (Verdict.SAT, Verdict.UNKNOWN)


def test_contracts_log_written():
    cnf, a, x = mixed_cnf()
    cnf = CnfSentence(cnf.signature, cnf.exists_fo, cnf.forall_fo, [cnf.clauses[0]])
    log: list[str] = []
    out = solve_cnf(cnf, BackendRegistry(), SolveOptions(log=log))
    assert any(line.startswith("contract ") for line in log)
    assert any("L(0)=" in line for line in log)


def _pipeline_verdict(s, **kw):
    cnf, _, _ = run_steps(s)
    return solve_cnf(cnf, BackendRegistry(), SolveOptions(**kw)).verdict


@pytest.mark.parametrize("seed", range(60, 100))
def test_pipeline_matches_oracle(seed):
    s = gen_sentence(seed)
    want, _ = brute_force_sat(s, guard=6_000_000)
    assert _pipeline_verdict(s) == want


@pytest.mark.parametrize("seed", range(100, 120))
def test_pruned_and_unpruned_agree(seed):
    s = gen_sentence(seed)
    assert _pipeline_verdict(s, pruned=True) == _pipeline_verdict(s, pruned=False)


def test_determinism_same_contract_reported():
    s = gen_sentence(7)
    cnf, _, _ = run_steps(s)
    a = solve_cnf(cnf, BackendRegistry())
    b = solve_cnf(cnf, BackendRegistry())
    assert a.verdict == b.verdict
    if a.contract is not None:
        assert a.contract == b.contract


def test_cache_reuses_queries():
    s = gen_sentence(11)
    cnf, _, _ = run_steps(s)
    out = solve_cnf(cnf, BackendRegistry())
    # strictly fewer backend calls than (contracts x sorts) once any
    # second contract shares a per-sort clause subset
    if out.contracts_tried > 1:
        assert out.queries_issued < out.contracts_tried * len(cnf.signature.sorts)
