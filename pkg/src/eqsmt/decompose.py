"""Clause-to-sort contract search over the CNF sentence.

A contract assigns every clause a sort; the per-sort queries keep only
each clause's literals of that sort.  The CNF is satisfiable iff some
contract makes every per-sort query satisfiable, which is what the
search below explores.

When every candidate sort is decided internally (foreground, boolean,
empty-theory backgrounds), the search runs as environment covering
instead of contract enumeration: a per-sort query is satisfiable iff
some assignment of that sort's existentials validates every assigned
clause, so a contract exists iff some combination of per-sort
assignments leaves no clause uncovered.  The assignment spaces are
tiny (bounded by the small-model property) while the contract space is
exponential in the clause count, so this path decides UNSAT instances
that pure search cannot.

Otherwise: depth-first over clauses, most-constrained clause first,
with forward checking.  Assigning a clause to a sort only ever grows
that sort's query, and a grown query implies the smaller one, so an
UNSAT answer on a partial assignment closes the whole subtree; the
same monotonicity retires a candidate sort for an unassigned clause as
soon as the grown query refutes it.  This cut is kept in both the
pruned and unpruned candidate modes; "pruned" refers only to skipping
sorts with no literals in a clause, whose disjunction would be false.
UNKNOWN answers close nothing: a larger query can still come back SAT
from the same backend, so the search continues and decides at leaves.
"""

from __future__ import annotations

import itertools
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterator, Optional

from .backends import (
    BackendRegistry,
    BackendResult,
    SortModel,
    TheoryQuery,
    bool_clause_valid,
    fg_clause_valid,
)
from .core import Eq, Formula, RelApp, Sort, Verdict, sort_of
from .transform import CnfSentence, Literal

# combined size of the per-sort assignment spaces the covering path is
# willing to enumerate before handing over to contract search
ENV_COVER_LIMIT = 200_000


@dataclass(frozen=True)
class Contract:
    """Total map from clause index to sort, stored in clause order."""

    sorts: tuple[Sort, ...]

    def describe(self) -> str:
        return " ".join("L(%d)=%s" % (j, s.name) for j, s in enumerate(self.sorts))


@dataclass
class SolveOutcome:
    verdict: Verdict
    models: Optional[dict[str, SortModel]] = None  # sort name -> model
    contract: Optional[Contract] = None
    reason: Optional[str] = None
    contracts_tried: int = 0
    queries_issued: int = 0


def sort_of_atom(atom: Formula) -> Sort:
    if isinstance(atom, Eq):
        s = sort_of(atom.lhs)
        if sort_of(atom.rhs) != s:
            raise ValueError("mixed-sort equality: %r" % (atom,))
        return s
    if isinstance(atom, RelApp):
        sorts = {sort_of(a) for a in atom.args}
        if len(sorts) != 1:
            raise ValueError("mixed-sort relation atom: %r" % (atom,))
        return sorts.pop()
    raise ValueError("not an atom: %r" % (atom,))


def split_clause(clause: tuple[Literal, ...], sort: Sort) -> tuple[Literal, ...]:
    return tuple(l for l in clause if sort_of_atom(l.atom) == sort)


def candidate_sorts(clause: tuple[Literal, ...], sorts: tuple[Sort, ...],
                    pruned: bool) -> tuple[Sort, ...]:
    if not pruned:
        return sorts
    present = {sort_of_atom(l.atom) for l in clause}
    return tuple(s for s in sorts if s in present)


def enumerate_contracts(
    cnf: CnfSentence, pruned: bool = True,
) -> Iterator[Contract]:
    """All contracts in the deterministic search order.  With pruning a
    clause is never sent to a sort it has no literals of; the count is
    bounded by |S|^r either way."""
    sorts = cnf.signature.sorts
    cands = [candidate_sorts(c, sorts, pruned) for c in cnf.clauses]
    order = sorted(range(len(cnf.clauses)), key=lambda j: (len(cands[j]), j))
    for combo in itertools.product(*[cands[j] for j in order]):
        assignment: list[Optional[Sort]] = [None] * len(cnf.clauses)
        for j, s in zip(order, combo):
            assignment[j] = s
        yield Contract(tuple(assignment))  # type: ignore[arg-type]


def build_query(cnf: CnfSentence, sort: Sort, clause_idxs: frozenset[int]) -> TheoryQuery:
    clauses = tuple(split_clause(cnf.clauses[j], sort) for j in sorted(clause_idxs))
    q = TheoryQuery(
        sort=sort,
        exists=tuple(v for v in cnf.exists_fo if v.sort == sort),
        forall=tuple(v for v in cnf.forall_fo if v.sort == sort),
        clauses=clauses,
    )
    for clause in q.clauses:
        for lit in clause:
            assert sort_of_atom(lit.atom) == sort, "sort purity violated"
    return q


@dataclass
class SolveOptions:
    pruned: bool = True
    max_contracts: Optional[int] = None
    jobs: int = 1
    trace: Optional[Callable[[str, str], None]] = None  # (filename, content)
    log: Optional[list[str]] = None  # contracts.log lines


class _Search:
    def __init__(self, cnf: CnfSentence, registry: BackendRegistry, opts: SolveOptions):
        self.cnf = cnf
        self.registry = registry
        self.opts = opts
        self.cache: dict[tuple[str, frozenset[int]], BackendResult] = {}
        self.leaves = 0
        self.queries = 0
        self.unknown_seen = False
        self.budget_hit = False
        self.log = opts.log if opts.log is not None else []

    def query(self, sort: Sort, idxs: frozenset[int]) -> BackendResult:
        key = (sort.name, idxs)
        if key not in self.cache:
            self.queries += 1
            q = build_query(self.cnf, sort, idxs)
            self.cache[key] = self.registry.solve(q, self.opts.trace)
        return self.cache[key]

    def prefetch(self, jobs_args: list[tuple[Sort, frozenset[int]]]) -> None:
        todo = [(s, i) for s, i in jobs_args if (s.name, i) not in self.cache]
        if len(todo) <= 1 or self.opts.jobs <= 1:
            return
        with ThreadPoolExecutor(max_workers=self.opts.jobs) as pool:
            list(pool.map(lambda a: self.query(*a), todo))

    def run(self) -> SolveOutcome:
        cnf = self.cnf
        sorts = cnf.signature.sorts
        cands = [candidate_sorts(c, sorts, self.opts.pruned) for c in cnf.clauses]
        covered = self._try_env_cover(cands)
        if covered is not None:
            return covered
        assigned: dict[str, set[int]] = {s.name: set() for s in sorts}
        chosen: list[Optional[Sort]] = [None] * len(cnf.clauses)

        # initial viability: a clause can go to a sort only while the
        # singleton query is satisfiable
        self.prefetch([(s, frozenset({j}))
                       for j, cs in enumerate(cands) for s in cs])
        viable: list[dict[str, bool]] = []
        for j, cs in enumerate(cands):
            row: dict[str, bool] = {}
            for s in cs:
                res = self.query(s, frozenset({j}))
                if res.verdict == Verdict.UNSAT:
                    self.log.append("; cut: clause %d alone is unsat at %s" % (j, s.name))
                else:
                    row[s.name] = True
            viable.append(row)

        result = self._dfs(cands, assigned, chosen, viable)
        if result is not None:
            return result
        if self.budget_hit:
            return SolveOutcome(
                Verdict.UNKNOWN, reason="contract budget exhausted",
                contracts_tried=self.leaves, queries_issued=self.queries)
        if self.unknown_seen:
            return SolveOutcome(
                Verdict.UNKNOWN, reason="some contract could not be resolved",
                contracts_tried=self.leaves, queries_issued=self.queries)
        return SolveOutcome(Verdict.UNSAT, contracts_tried=self.leaves,
                            queries_issued=self.queries)

    def _try_env_cover(self, cands) -> Optional[SolveOutcome]:
        """Exact decision by enumerating per-sort existential
        assignments, applicable when every candidate sort has an
        internal decider.  Returns None to fall back to contract
        search (an external sort, or assignment spaces past
        ENV_COVER_LIMIT).  max_contracts does not apply here: the
        path reports at most one contract."""
        cnf = self.cnf
        relevant = [s for s in cnf.signature.sorts
                    if any(s in cs for cs in cands)]
        kinds: dict[str, str] = {}
        for s in relevant:
            try:
                d = self.registry.descriptor(s)
            except ValueError:
                return None
            if d.kind not in ("internal-fg", "internal-bool"):
                return None
            kinds[s.name] = d.kind

        ex_by = {s.name: tuple(v for v in cnf.exists_fo if v.sort == s)
                 for s in relevant}
        uni_by = {s.name: {v.vid for v in cnf.forall_fo if v.sort == s}
                  for s in relevant}
        spaces: list[list[tuple[list, dict[int, object]]]] = []
        total = 1
        for s in relevant:
            evars = ex_by[s.name]
            envs: list[tuple[list, dict[int, object]]] = []
            if kinds[s.name] == "internal-bool":
                for combo in itertools.product((False, True), repeat=len(evars)):
                    envs.append(([False, True],
                                 {v.vid: val for v, val in zip(evars, combo)}))
            else:
                for size in range(1, max(1, len(evars)) + 1):
                    universe = list(range(size))
                    for combo in itertools.product(universe, repeat=len(evars)):
                        envs.append((universe,
                                     {v.vid: val for v, val in zip(evars, combo)}))
            spaces.append(envs)
            total *= len(envs)
            if total > ENV_COVER_LIMIT:
                return None

        parts: dict[tuple[str, int], tuple[Literal, ...]] = {}
        for j, clause in enumerate(cnf.clauses):
            for s in cands[j]:
                parts[(s.name, j)] = split_clause(clause, s)

        memo: dict[tuple[str, int, int], bool] = {}

        def valid(s: Sort, ei: int, j: int) -> bool:
            key = (s.name, ei, j)
            if key not in memo:
                universe, env = spaces[relevant.index(s)][ei]
                part = parts[(s.name, j)]
                if kinds[s.name] == "internal-bool":
                    memo[key] = bool_clause_valid(part, env, uni_by[s.name])
                else:
                    memo[key] = fg_clause_valid(part, env, uni_by[s.name], universe)
            return memo[key]

        combos = 0
        for combo in itertools.product(*[range(len(sp)) for sp in spaces]):
            combos += 1
            env_of = dict(zip((s.name for s in relevant), combo))
            chosen: list[Optional[Sort]] = []
            for j in range(len(cnf.clauses)):
                hit = None
                for s in cands[j]:
                    if valid(s, env_of[s.name], j):
                        hit = s
                        break
                chosen.append(hit)
                if hit is None:
                    break
            if chosen and chosen[-1] is None:
                continue
            contract = Contract(tuple(chosen))
            models = {
                s.name: SortModel(s, ex_by[s.name], dict(spaces[i][combo[i]][1]))
                for i, s in enumerate(relevant)
            }
            self.log.append("contract %s: %s" % (
                contract.describe(),
                " ".join("%s=sat" % s.name for s in relevant) or "(no clauses)"))
            return SolveOutcome(
                Verdict.SAT, models=models, contract=contract,
                contracts_tried=1, queries_issued=0)
        self.log.append(
            "; cover: no assignment combination validates every clause "
            "(%d combinations)" % combos)
        return SolveOutcome(Verdict.UNSAT, contracts_tried=0, queries_issued=0)

    def _dfs(self, cands, assigned, chosen, viable) -> Optional[SolveOutcome]:
        if self.budget_hit:
            return None
        unassigned = [j for j, c in enumerate(chosen) if c is None]
        if not unassigned:
            return self._leaf(assigned, chosen)
        # most-constrained clause first, under current viability
        j = min(unassigned, key=lambda k: (len(viable[k]), k))
        options = [s for s in cands[j] if s.name in viable[j]]
        if not options:
            return None
        self.prefetch([(s, frozenset(assigned[s.name] | {j})) for s in options])
        for s in options:
            idxs = frozenset(assigned[s.name] | {j})
            res = self.query(s, idxs)
            if res.verdict == Verdict.UNSAT:
                self.log.append("; cut: clause %d at %s is unsat with {%s}"
                                % (j, s.name, ",".join(map(str, sorted(idxs)))))
                continue
            if res.verdict == Verdict.UNKNOWN:
                self.unknown_seen = True
            assigned[s.name].add(j)
            chosen[j] = s
            # forward check: other clauses' viability at this sort may die
            new_viable = []
            dead = False
            self.prefetch([(s, frozenset(assigned[s.name] | {k}))
                           for k in unassigned if k != j and s.name in viable[k]])
            for k in range(len(chosen)):
                if chosen[k] is not None or k == j:
                    new_viable.append(viable[k])
                    continue
                row = viable[k]
                if s.name in row:
                    r2 = self.query(s, frozenset(assigned[s.name] | {k}))
                    if r2.verdict == Verdict.UNSAT:
                        row = {n: True for n in row if n != s.name}
                        if not row:
                            dead = True
                new_viable.append(row)
            if not dead:
                out = self._dfs(cands, assigned, chosen, new_viable)
                if out is not None:
                    return out
            assigned[s.name].remove(j)
            chosen[j] = None
            if self.budget_hit:
                return None
        return None

    def _leaf(self, assigned, chosen) -> Optional[SolveOutcome]:
        self.leaves += 1
        contract = Contract(tuple(chosen))
        per_sort: list[str] = []
        all_sat = True
        models: dict[str, SortModel] = {}
        for s in self.cnf.signature.sorts:
            idxs = frozenset(assigned[s.name])
            if not idxs:
                per_sort.append("%s=trivial" % s.name)
                continue
            res = self.query(s, idxs)
            per_sort.append("%s=%s" % (s.name, res.verdict))
            if res.verdict != Verdict.SAT:
                all_sat = False
            elif res.model is not None:
                models[s.name] = res.model
        self.log.append("contract %s: %s" % (contract.describe(), " ".join(per_sort)))
        if all_sat:
            return SolveOutcome(
                Verdict.SAT, models=models, contract=contract,
                contracts_tried=self.leaves, queries_issued=self.queries)
        if self.opts.max_contracts is not None and self.leaves >= self.opts.max_contracts:
            self.budget_hit = True
        return None


def solve_cnf(
    cnf: CnfSentence,
    registry: BackendRegistry,
    opts: Optional[SolveOptions] = None,
) -> SolveOutcome:
    """Contract search.  SAT with per-sort models at the first
    successful contract in deterministic order; UNSAT when the search
    space is exhausted; UNKNOWN when unresolved contracts or the
    contract budget stand in the way of either answer."""
    opts = opts or SolveOptions()
    search = _Search(cnf, registry, opts)
    outcome = search.run()
    if opts.trace is not None:
        opts.trace("contracts.log", "\n".join(search.log) + "\n")
    if opts.log is not None and opts.log is not search.log:
        opts.log.extend(search.log)
    return outcome
