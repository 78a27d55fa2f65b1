"""End-to-end solving: validate, lower to CNF, run the contract
search, and pull the model back up on SAT.

This is the library entry point the CLI wraps.  Budget exhaustion in
the lowering surfaces as an UNKNOWN report rather than an exception so
that callers running batches can keep going.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

from .backends import BackendRegistry
from .core import Sentence, Diagnostic, Verdict, validate
from .decompose import SolveOptions, SolveOutcome, solve_cnf
from .parser import print_problem
from .transform import (
    TransformOptions,
    TransformResourceError,
    TransformTrace,
    run_steps,
)
from .witness import Witness, pull_back


class InvalidSentence(Exception):
    def __init__(self, diags: list[Diagnostic]):
        super().__init__("; ".join(str(d) for d in diags))
        self.diagnostics = diags


@dataclass
class SolveReport:
    verdict: Verdict
    witness: Optional[Witness] = None
    reason: Optional[str] = None
    outcome: Optional[SolveOutcome] = None
    trace: Optional[TransformTrace] = None
    notes: list[str] = field(default_factory=list)


def _dir_writer(trace_dir: str, inner: Optional[Callable[[str, str], None]]):
    os.makedirs(trace_dir, exist_ok=True)

    def write(name: str, content: str) -> None:
        with open(os.path.join(trace_dir, name), "w") as fh:
            fh.write(content)
        if inner is not None:
            inner(name, content)

    return write


def solve(
    sentence: Sentence,
    registry: Optional[BackendRegistry] = None,
    transform_opts: Optional[TransformOptions] = None,
    solve_opts: Optional[SolveOptions] = None,
    trace_dir: Optional[str] = None,
) -> SolveReport:
    """Decide the sentence and, on SAT, reconstruct a Witness.

    Raises InvalidSentence when validation fails; every other obstacle
    (budgets, missing backends, solver timeouts) comes back as an
    UNKNOWN report with a reason.
    """
    diags = validate(sentence)
    if diags:
        raise InvalidSentence(diags)
    registry = registry or BackendRegistry()
    topts = transform_opts or TransformOptions()
    sopts = solve_opts or SolveOptions()
    if trace_dir is not None:
        sopts = replace(sopts, trace=_dir_writer(trace_dir, sopts.trace))

    try:
        cnf, trace, stages = run_steps(sentence, topts)
    except TransformResourceError as e:
        return SolveReport(Verdict.UNKNOWN, reason=str(e))

    if sopts.trace is not None:
        for name, stage in stages:
            sopts.trace(name + ".eqsmt",
                        print_problem(sentence.signature, [stage]))

    notes = [trace.restrict_note] if trace.restrict_note else []
    outcome = solve_cnf(cnf, registry, sopts)
    witness = None
    if outcome.verdict == Verdict.SAT:
        witness = pull_back(outcome.models or {}, trace, sentence)
    return SolveReport(
        verdict=outcome.verdict,
        witness=witness,
        reason=outcome.reason,
        outcome=outcome,
        trace=trace,
        notes=notes,
    )
