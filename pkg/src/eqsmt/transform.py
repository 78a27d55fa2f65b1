"""Lowering pipeline: relation-variable elimination, foreground
restriction, existential-function elimination, Ackermann reduction, and
equivalence-preserving CNF conversion.

Each step is a pure Sentence -> Sentence function.  A TransformTrace
accumulates the fresh-symbol bookkeeping the witness module needs to
pull backend models back to the original sentence.

Two satisfiability-preserving refinements beyond the guard construction
itself, both oracle-checked:

  * Eliminating an existential function F introduces, besides the image
    variables x^F_t and the universal emulator G^F, the functional
    consistency conjunct (t = t' => x^F_t = x^F_t') over all tuple
    pairs.  Without it a solver could pick clashing images for colliding
    tuples, making the emulator guard unsatisfiable and the guarded
    matrix vacuously true, which breaks equisatisfiability (take the
    conjunction of a = b, F(a) = true and F(b) = false).

  * Optional unit pruning drops consistency or Ackermann implications
    whose antecedent is refuted by a top-level unit literal of the
    matrix; with units in force both forms are pointwise equivalent.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Optional

from .core import (
    And,
    App,
    Eq,
    FApp,
    FalseF,
    Formula,
    FunVar,
    Iff,
    Implies,
    Not,
    Or,
    RelApp,
    RelVar,
    RelVarApp,
    Sentence,
    Sort,
    Term,
    TrueF,
    Var,
    FALSE,
    TRUE,
    bool_true,
    conj,
    formula_terms,
    map_atoms,
    map_formula_terms,
    sort_of,
    subterms,
)


class TransformResourceError(Exception):
    """A configured budget was exceeded; carries the stage name."""

    def __init__(self, stage: str, message: str):
        super().__init__("%s: %s" % (stage, message))
        self.stage = stage


@dataclass(frozen=True)
class TransformOptions:
    step2_budget: int = 4096
    cnf_budget: int = 100_000
    collect_guards: bool = False   # one conjoined emulator guard instead of nesting
    substitute_pure: bool = False  # image substitution when every application is over x0 vars
    prune_by_units: bool = False   # drop implications refuted by top-level units


@dataclass(frozen=True)
class Literal:
    neg: bool
    atom: Formula

    def negate(self) -> "Literal":
        return Literal(not self.neg, self.atom)

    def to_formula(self) -> Formula:
        return Not(self.atom) if self.neg else self.atom


@dataclass
class Step2Record:
    fvar: FunVar
    tuples: list[tuple[Var, ...]]
    image: dict[tuple[int, ...], Var]
    emulator: Optional[FunVar]  # None in substitution mode


@dataclass
class Step3Record:
    fvar: FunVar
    apps: list[tuple[tuple[Term, ...], Var]]  # argument terms -> fresh universal var


@dataclass
class TransformTrace:
    step1: dict[int, FunVar] = field(default_factory=dict)       # rel vid -> f^R
    step1_rels: dict[int, RelVar] = field(default_factory=dict)
    step2: dict[int, Step2Record] = field(default_factory=dict)  # fun vid -> record
    step2_order: list[int] = field(default_factory=list)
    step3: dict[int, Step3Record] = field(default_factory=dict)  # fun vid -> record
    ack_implications: dict[int, int] = field(default_factory=dict)
    restrict_terms: int = 0
    restrict_note: Optional[str] = None
    clause_count: int = 0


@dataclass
class CnfSentence:
    """First-order exists*-forall* sentence with a CNF matrix."""

    signature: object
    exists_fo: tuple[Var, ...]
    forall_fo: tuple[Var, ...]
    clauses: list[tuple[Literal, ...]]

    def matrix_formula(self) -> Formula:
        return conj(*[
            Or(tuple(l.to_formula() for l in c)) if len(c) != 1 else c[0].to_formula()
            for c in self.clauses
        ]) if self.clauses else TRUE

    def to_sentence(self) -> Sentence:
        return Sentence(
            signature=self.signature,  # type: ignore[arg-type]
            exists_fo=self.exists_fo,
            forall_fo=self.forall_fo,
            matrix=self.matrix_formula(),
        )


def step1_eliminate_relvars(s: Sentence, trace: Optional[TransformTrace] = None) -> Sentence:
    """Replace every relation variable R by its characteristic function
    f^R; atoms R(t) become f^R(t) = true."""
    if trace is None:
        trace = TransformTrace()
    if not s.exists_rel and not s.forall_rel:
        return s
    bool_sort = s.signature.boolean()
    top = bool_true(bool_sort)
    charfun: dict[int, FunVar] = {}
    for r in s.exists_rel + s.forall_rel:
        f = FunVar("f_%s" % r.name, r.arg_sorts, bool_sort)
        charfun[r.vid] = f
        trace.step1[r.vid] = f
        trace.step1_rels[r.vid] = r

    def on_atom(a: Formula) -> Formula:
        if isinstance(a, RelVarApp):
            return Eq(FApp(charfun[a.rvar.vid], a.args), top)
        return a

    return Sentence(
        signature=s.signature,
        exists_fo=s.exists_fo,
        exists_rel=(),
        exists_fun=s.exists_fun + tuple(charfun[r.vid] for r in s.exists_rel),
        forall_fo=s.forall_fo,
        forall_rel=(),
        forall_fun=s.forall_fun + tuple(charfun[r.vid] for r in s.forall_rel),
        matrix=map_atoms(s.matrix, on_atom),
    )


def _foreground_subterms(s: Sentence) -> list[Term]:
    """T0: every sigma0-sorted subterm of the matrix, plus the sigma0
    prefix variables themselves, first occurrence order, deduplicated."""
    fg = s.signature.foreground()
    seen: dict[Term, None] = {}
    for v in s.exists_fo + s.forall_fo:
        if v.sort == fg:
            seen.setdefault(v, None)
    for t in formula_terms(s.matrix):
        if sort_of(t) == fg:
            seen.setdefault(t, None)
    return list(seen)


def step2_restrict_foreground(s: Sentence, trace: Optional[TransformTrace] = None) -> Sentence:
    """Conjoin psi_restrict: every foreground term equals one of the
    existential foreground variables."""
    if trace is None:
        trace = TransformTrace()
    fg = s.signature.foreground()
    x0 = [v for v in s.exists_fo if v.sort == fg]
    t0 = _foreground_subterms(s)
    trace.restrict_terms = len(t0)
    if not t0:
        return s
    if not x0:
        # empty disjunction: no foreground element can be named
        trace.restrict_note = (
            "restriction is unsatisfiable: %d foreground terms but no "
            "existential foreground variables" % len(t0))
        return Sentence(
            signature=s.signature,
            exists_fo=s.exists_fo, exists_rel=s.exists_rel, exists_fun=s.exists_fun,
            forall_fo=s.forall_fo, forall_rel=s.forall_rel, forall_fun=s.forall_fun,
            matrix=FALSE,
        )
    restrict = conj(*[
        Or(tuple(Eq(t, x) for x in x0)) if len(x0) > 1 else Eq(t, x0[0])
        for t in t0
    ])
    return Sentence(
        signature=s.signature,
        exists_fo=s.exists_fo, exists_rel=s.exists_rel, exists_fun=s.exists_fun,
        forall_fo=s.forall_fo, forall_rel=s.forall_rel, forall_fun=s.forall_fun,
        matrix=conj(restrict, s.matrix),
    )


def _top_level_units(f: Formula) -> set[tuple[bool, Formula]]:
    units: set[tuple[bool, Formula]] = set()

    def walk(g: Formula) -> None:
        if isinstance(g, And):
            for p in g.parts:
                walk(p)
        elif isinstance(g, Not) and isinstance(g.body, (Eq, RelApp, RelVarApp)):
            units.add((True, g.body))
        elif isinstance(g, (Eq, RelApp, RelVarApp)):
            units.add((False, g))

    walk(f)
    return units


def _eq_refuted(lhs: Term, rhs: Term, units: set[tuple[bool, Formula]]) -> bool:
    return (True, Eq(lhs, rhs)) in units or (True, Eq(rhs, lhs)) in units


def _consistency(tuples: list[tuple[Var, ...]], image: dict[tuple[int, ...], Var],
                 units: set, opts: TransformOptions) -> list[Formula]:
    out: list[Formula] = []
    for t1, t2 in itertools.combinations(tuples, 2):
        if opts.prune_by_units and any(_eq_refuted(a, b, units) for a, b in zip(t1, t2)):
            continue
        ante = conj(*[Eq(a, b) for a, b in zip(t1, t2)])
        v1 = image[tuple(v.vid for v in t1)]
        v2 = image[tuple(v.vid for v in t2)]
        out.append(Implies(ante, Eq(v1, v2)))
    return out


def step2_eliminate_existential_funs(
    s: Sentence,
    trace: Optional[TransformTrace] = None,
    opts: TransformOptions = TransformOptions(),
) -> Sentence:
    """Eliminate each existential function variable F through n^m image
    variables x^F_t and a universally quantified emulator G^F, guarding
    the matrix with the emulation conjunct; or, in substitution mode,
    by direct image substitution when every application of F is over
    existential foreground variables."""
    if trace is None:
        trace = TransformTrace()
    if not s.exists_fun:
        return s
    fg = s.signature.foreground()
    x0 = [v for v in s.exists_fo if v.sort == fg]
    matrix = s.matrix
    units = _top_level_units(matrix) if opts.prune_by_units else set()

    new_exists: list[Var] = list(s.exists_fo)
    new_forall_fun: list[FunVar] = list(s.forall_fun)
    consistency: list[Formula] = []
    guards: list[Formula] = []

    for fv in s.exists_fun:
        n, m = len(x0), len(fv.arg_sorts)
        count = n ** m
        if count > opts.step2_budget:
            raise TransformResourceError(
                "step2", "image budget exceeded for %s: %d^%d = %d > %d"
                % (fv.name, n, m, count, opts.step2_budget))
        tuples = list(itertools.product(x0, repeat=m))
        image: dict[tuple[int, ...], Var] = {}
        for t in tuples:
            name = "x_%s_%s" % (fv.name, "_".join(v.name for v in t))
            xvar = Var(name, fv.result)
            image[tuple(v.vid for v in t)] = xvar
            new_exists.append(xvar)
        rec = Step2Record(fvar=fv, tuples=tuples, image=image, emulator=None)

        apps = [t for t in set(formula_terms(matrix))
                if isinstance(t, FApp) and t.fvar.vid == fv.vid]
        pure = all(
            all(isinstance(a, Var) and any(a.vid == x.vid for x in x0) for a in app.args)
            for app in apps)

        if opts.substitute_pure and pure:
            def subst(t: Term, _fv=fv, _image=image) -> Term:
                if isinstance(t, FApp) and t.fvar.vid == _fv.vid:
                    return _image[tuple(a.vid for a in t.args)]  # type: ignore[union-attr]
                return t
            matrix = map_formula_terms(matrix, subst)
        else:
            emulator = FunVar("G_%s" % fv.name, fv.arg_sorts, fv.result)
            rec.emulator = emulator
            new_forall_fun.append(emulator)

            def replace(t: Term, _fv=fv, _em=emulator) -> Term:
                if isinstance(t, FApp) and t.fvar.vid == _fv.vid:
                    return FApp(_em, t.args)
                return t
            matrix = map_formula_terms(matrix, replace)
            emulate = conj(*[
                Eq(FApp(emulator, t), image[tuple(v.vid for v in t)])
                for t in tuples
            ])
            if opts.collect_guards:
                guards.append(emulate)
            else:
                matrix = Implies(emulate, matrix)

        consistency.extend(_consistency(tuples, image, units, opts))
        trace.step2[fv.vid] = rec
        trace.step2_order.append(fv.vid)

    if guards:
        matrix = Implies(conj(*guards), matrix)
    matrix = conj(*consistency, matrix)
    return Sentence(
        signature=s.signature,
        exists_fo=tuple(new_exists),
        exists_rel=s.exists_rel,
        exists_fun=(),
        forall_fo=s.forall_fo,
        forall_rel=s.forall_rel,
        forall_fun=tuple(new_forall_fun),
        matrix=matrix,
    )


def step3_ackermannize(
    s: Sentence,
    trace: Optional[TransformTrace] = None,
    opts: TransformOptions = TransformOptions(),
) -> Sentence:
    """Replace universal function applications by fresh universal
    variables, innermost first until none remain, then guard the matrix
    with the pairwise functional-consistency conjunct psi_ack."""
    if trace is None:
        trace = TransformTrace()
    assert not s.exists_fun, "step3 requires step2 output"
    if not s.forall_fun:
        return s
    matrix = s.matrix
    units = _top_level_units(matrix) if opts.prune_by_units else set()
    records: dict[int, Step3Record] = {}
    fresh: list[Var] = []
    counter: dict[int, int] = {}

    def innermost_apps(f: Formula) -> list[FApp]:
        seen: dict[FApp, None] = {}
        for t in formula_terms(f):
            if isinstance(t, FApp) and not any(
                    isinstance(u, FApp) for a in t.args for u in subterms(a)):
                seen.setdefault(t, None)
        return list(seen)

    while True:
        apps = innermost_apps(matrix)
        if not apps:
            break
        mapping: dict[FApp, Var] = {}
        for app in apps:
            fv = app.fvar
            k = counter.get(fv.vid, 0) + 1
            counter[fv.vid] = k
            y = Var("y_%s_%d" % (fv.name, k), fv.result)
            fresh.append(y)
            mapping[app] = y
            records.setdefault(fv.vid, Step3Record(fvar=fv, apps=[])).apps.append((app.args, y))

        def replace(t: Term) -> Term:
            if isinstance(t, FApp) and t in mapping:
                return mapping[t]
            return t
        matrix = map_formula_terms(matrix, replace)

    ack: list[Formula] = []
    for vid, rec in records.items():
        emitted = 0
        for (args1, y1), (args2, y2) in itertools.combinations(rec.apps, 2):
            if opts.prune_by_units and any(
                    _eq_refuted(a, b, units) for a, b in zip(args1, args2)):
                continue
            ante = conj(*[Eq(a, b) for a, b in zip(args1, args2)])
            ack.append(Implies(ante, Eq(y1, y2)))
            emitted += 1
        trace.ack_implications[vid] = emitted
        trace.step3[vid] = rec

    if ack:
        matrix = Implies(conj(*ack), matrix)
    return Sentence(
        signature=s.signature,
        exists_fo=s.exists_fo,
        exists_rel=s.exists_rel,
        exists_fun=(),
        forall_fo=s.forall_fo + tuple(fresh),
        forall_rel=s.forall_rel,
        forall_fun=(),
        matrix=matrix,
    )


def _nnf(f: Formula, polarity: bool) -> Formula:
    if isinstance(f, TrueF):
        return TRUE if polarity else FALSE
    if isinstance(f, FalseF):
        return FALSE if polarity else TRUE
    if isinstance(f, Not):
        return _nnf(f.body, not polarity)
    if isinstance(f, And):
        parts = tuple(_nnf(p, polarity) for p in f.parts)
        return And(parts) if polarity else Or(parts)
    if isinstance(f, Or):
        parts = tuple(_nnf(p, polarity) for p in f.parts)
        return Or(parts) if polarity else And(parts)
    if isinstance(f, Implies):
        if polarity:
            return Or((_nnf(f.lhs, False), _nnf(f.rhs, True)))
        return And((_nnf(f.lhs, True), _nnf(f.rhs, False)))
    if isinstance(f, Iff):
        if polarity:
            return And((
                Or((_nnf(f.lhs, False), _nnf(f.rhs, True))),
                Or((_nnf(f.lhs, True), _nnf(f.rhs, False))),
            ))
        return And((
            Or((_nnf(f.lhs, True), _nnf(f.rhs, True))),
            Or((_nnf(f.lhs, False), _nnf(f.rhs, False))),
        ))
    # atom
    return f if polarity else Not(f)


def to_cnf(
    s: Sentence,
    trace: Optional[TransformTrace] = None,
    opts: TransformOptions = TransformOptions(),
) -> CnfSentence:
    """Equivalent CNF by distribution.  Equivalence, not mere
    equisatisfiability: the decomposition step splits clauses by sort,
    which is only sound on an equivalent clause set.  Tseitin-style
    definitional variables are ruled out since they would be existential
    inside the universal block."""
    if trace is None:
        trace = TransformTrace()
    assert not s.exists_fun and not s.forall_fun and not s.exists_rel and not s.forall_rel, \
        "to_cnf requires first-order input"

    budget = opts.cnf_budget

    def clauses_of(f: Formula) -> list[tuple[Literal, ...]]:
        if isinstance(f, TrueF):
            return []
        if isinstance(f, FalseF):
            return [()]
        if isinstance(f, Not):
            return [(Literal(True, f.body),)]
        if isinstance(f, (Eq, RelApp, RelVarApp)):
            return [(Literal(False, f),)]
        if isinstance(f, And):
            out: list[tuple[Literal, ...]] = []
            for p in f.parts:
                out.extend(clauses_of(p))
                if len(out) > budget:
                    raise TransformResourceError(
                        "cnf", "clause budget exceeded: more than %d clauses" % budget)
            return out
        if isinstance(f, Or):
            parts = [clauses_of(p) for p in f.parts]
            prod: list[tuple[Literal, ...]] = [()]
            for cs in parts:
                nxt: list[tuple[Literal, ...]] = []
                for base in prod:
                    for c in cs:
                        nxt.append(base + c)
                        if len(nxt) > budget:
                            raise TransformResourceError(
                                "cnf", "clause budget exceeded: more than %d clauses" % budget)
                prod = nxt
            return prod
        raise TypeError("unexpected formula in cnf conversion: %r" % (f,))

    raw = clauses_of(_nnf(s.matrix, True))

    # dedupe literals, drop tautologies, then absorption
    cleaned: list[tuple[Literal, ...]] = []
    seen_clauses: set[frozenset[Literal]] = set()
    for c in raw:
        lits: list[Literal] = []
        lset: set[Literal] = set()
        taut = False
        for lit in c:
            if lit.negate() in lset:
                taut = True
                break
            if lit not in lset:
                lset.add(lit)
                lits.append(lit)
        if taut:
            continue
        key = frozenset(lits)
        if key in seen_clauses:
            continue
        seen_clauses.add(key)
        cleaned.append(tuple(lits))

    sets = [frozenset(c) for c in cleaned]
    keep: list[tuple[Literal, ...]] = []
    for i, c in enumerate(cleaned):
        if not any(j != i and sets[j] < sets[i] for j in range(len(cleaned))):
            keep.append(c)

    trace.clause_count = len(keep)
    return CnfSentence(
        signature=s.signature,
        exists_fo=s.exists_fo,
        forall_fo=s.forall_fo,
        clauses=keep,
    )


def run_steps(
    s: Sentence,
    opts: TransformOptions = TransformOptions(),
) -> tuple[CnfSentence, TransformTrace, list[tuple[str, Sentence]]]:
    """Steps 1 through 4 in order, returning the CNF sentence, the
    trace, and the named intermediate stages for --trace dumps."""
    trace = TransformTrace()
    s1 = step1_eliminate_relvars(s, trace)
    s2a = step2_restrict_foreground(s1, trace)
    s2b = step2_eliminate_existential_funs(s2a, trace, opts)
    s3 = step3_ackermannize(s2b, trace, opts)
    cnf = to_cnf(s3, trace, opts)
    stages = [
        ("01-norel", s1),
        ("02-restrict", s2a),
        ("03-nofun", s2b),
        ("04-ack", s3),
        ("05-cnf", cnf.to_sentence()),
    ]
    return cnf, trace, stages
