"""End-to-end solve() orchestration."""

from __future__ import annotations

import os

import pytest

from eqsmt.backends import BackendRegistry
from eqsmt.core import (
    Eq,
    Not,
    Sentence,
    Var,
    Verdict,
    foreground_sort,
    make_signature,
)
from eqsmt.parser import parse
from eqsmt.pipeline import InvalidSentence, SolveReport, solve
from eqsmt.transform import TransformOptions
from gen import gen_sentence

FG = foreground_sort()
SIG = make_signature([FG])


def test_solve_sat_ships_witness():
    a, b = Var("a", FG), Var("b", FG)
    s = Sentence(signature=SIG, exists_fo=(a, b), matrix=Not(Eq(a, b)))
    report = solve(s)
    assert report.verdict == Verdict.SAT
    assert report.witness is not None
    assert len(report.witness.universe) == 2


def test_solve_unsat_has_no_witness():
    a = Var("a", FG)
    s = Sentence(signature=SIG, exists_fo=(a,), matrix=Not(Eq(a, a)))
    report = solve(s)
    assert report.verdict == Verdict.UNSAT
    assert report.witness is None


def test_invalid_sentence_raises():
    a = Var("a", FG)
    stray = Var("z", FG)
    s = Sentence(signature=SIG, exists_fo=(a,), matrix=Eq(a, stray))
    with pytest.raises(InvalidSentence) as exc:
        solve(s)
    assert "unbound" in str(exc.value)


def test_budget_exhaustion_is_unknown():
    s = gen_sentence(2)
    report = solve(s, transform_opts=TransformOptions(cnf_budget=1))
    assert report.verdict == Verdict.UNKNOWN
    assert "budget" in report.reason


def test_restriction_note_surfaces():
    # no existential foreground variables but a universal one: the
    # restriction step short-circuits and says so
    y = Var("y", FG)
    s = Sentence(signature=SIG, forall_fo=(y,), matrix=Eq(y, y))
    report = solve(s)
    assert report.verdict == Verdict.UNSAT
    assert report.notes


def test_trace_dir_dumps_stages(tmp_path):
    s = gen_sentence(0)
    report = solve(s, trace_dir=str(tmp_path))
    assert report.verdict in (Verdict.SAT, Verdict.UNSAT)
    names = sorted(os.listdir(tmp_path))
    for stage in ("01-norel", "02-restrict", "03-nofun", "04-ack", "05-cnf"):
        assert stage + ".eqsmt" in names
    assert "contracts.log" in names
    # stage dumps must re-parse
    for name in names:
        if name.endswith(".eqsmt"):
            text = (tmp_path / name).read_text()
            parsed = parse(text)
            assert len(parsed.sentences) == 1


def test_trace_dir_logs_external_scripts(tmp_path):
    text = """
(declare-sort FG :foreground)
(declare-sort Int :background lia)
(assert-eqsmt (exists ((n Int)) (forall ((m Int)) (<= n m))))
"""
    pf = parse(text)
    registry = BackendRegistry(
        external_command="python3 -c \"import sys; sys.stdin.read(); print('unsat')\"")
    report = solve(pf.sentences[0], registry=registry, trace_dir=str(tmp_path))
    assert report.verdict == Verdict.UNSAT
    smt = [n for n in os.listdir(tmp_path) if n.endswith(".smt2")]
    assert smt and all(n.startswith("query-") for n in smt)


def test_report_carries_outcome_counters():
    s = gen_sentence(5)
    report = solve(s)
    assert report.outcome is not None
    assert report.outcome.queries_issued >= 0
    assert report.trace is not None
