"""Model pullback and validation.

A SAT verdict arrives as per-sort models of the lowered CNF sentence.
pull_back reads those through the TransformTrace to reconstruct
interpretations for the original existential variables: the foreground
universe is the set of values taken by the existential foreground
variables, function tables are read off the step-2 image variables, and
relation variables are recovered from their characteristic functions.

validate_witness then re-checks the original sentence against the
reconstructed model.  Finite sorts (foreground, boolean, empty-theory
backgrounds) are enumerated outright; what remains after grounding is a
formula over arithmetic atoms whose universal validity is discharged
clause by clause through the backend registry.
"""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Optional

from . import sexpr
from .backends import BackendRegistry, SortModel, TheoryQuery
from .core import (
    And,
    App,
    BOOLEAN,
    Eq,
    FApp,
    FalseF,
    Formula,
    FunVar,
    Iff,
    Implies,
    Not,
    Num,
    Or,
    RelApp,
    RelVarApp,
    Sentence,
    Sort,
    Term,
    TrueF,
    Var,
    Verdict,
    FALSE,
    FOREGROUND,
    TRUE,
    conj,
    disj,
    neg,
    sort_of,
    subterms,
)
from .transform import (
    Literal,
    TransformResourceError,
    TransformTrace,
    to_cnf,
)


@dataclass
class Witness:
    """Interpretations for the original existential prefix.

    universe lists the foreground elements; fun_tables are total over
    universe tuples; rel_sets contain universe tuples only.  Values at
    finite sorts are Python ints/bools; values at arithmetic sorts are
    ints, Fractions, or verbatim backend literals.
    """

    universe: tuple[object, ...]
    fo_values: dict[int, object] = field(default_factory=dict)
    fun_tables: dict[int, dict[tuple[object, ...], object]] = field(default_factory=dict)
    rel_sets: dict[int, frozenset] = field(default_factory=dict)


class PullbackError(Exception):
    """A per-sort model is missing a value the trace says must exist."""


def _default_value(sort: Sort, universe: tuple[object, ...]) -> object:
    if sort.kind == BOOLEAN:
        return False
    if sort.is_arith():
        return 0
    # foreground or empty-theory background
    return universe[0] if sort.kind == FOREGROUND else 0


def pull_back(
    models: Mapping[str, SortModel],
    trace: TransformTrace,
    original: Sentence,
) -> Witness:
    """Reconstruct a model of the original sentence from per-sort models
    of the lowered one.

    Sorts whose query was trivial (no clauses assigned) have no model
    and impose no constraints; their variables take defaults.  Image
    variables for tuples that collide under the foreground model agree
    by the functional-consistency conjunct, so any representative
    serves.
    """
    values: dict[int, object] = {}
    for sm in models.values():
        values.update(sm.values)

    fg = original.signature.foreground()
    x0 = [v for v in original.exists_fo if v.sort == fg]
    x0_vals = {v.vid: values.get(v.vid, 0) for v in x0}
    universe = tuple(sorted(set(x0_vals.values()))) or (0,)

    fo_values: dict[int, object] = {}
    for v in original.exists_fo:
        if v.vid in values:
            fo_values[v.vid] = values[v.vid]
        else:
            fo_values[v.vid] = _default_value(v.sort, universe)

    def read_table(fvar: FunVar) -> dict[tuple[object, ...], object]:
        rec = trace.step2.get(fvar.vid)
        if rec is None:
            raise PullbackError("no elimination record for %s" % fvar.name)
        arity = len(fvar.arg_sorts)
        image_vals: dict[tuple[int, ...], object] = {}
        for key, ivar in rec.image.items():
            image_vals[key] = values.get(
                ivar.vid, _default_value(fvar.result, universe))
        table: dict[tuple[object, ...], object] = {}
        for elems in itertools.product(universe, repeat=arity):
            hit: Optional[object] = None
            for vt in rec.tuples:
                if tuple(x0_vals[v.vid] for v in vt) == elems:
                    hit = image_vals[tuple(v.vid for v in vt)]
                    break
            if hit is None:
                # arity > 0 with no existential foreground variables only
                # happens when the function is never applied
                hit = _default_value(fvar.result, universe)
            table[elems] = hit
        return table

    fun_tables: dict[int, dict[tuple[object, ...], object]] = {}
    for fvar in original.exists_fun:
        fun_tables[fvar.vid] = read_table(fvar)

    rel_sets: dict[int, frozenset] = {}
    for rvar in original.exists_rel:
        f_r = trace.step1.get(rvar.vid)
        if f_r is None:
            raise PullbackError("no characteristic function for %s" % rvar.name)
        table = read_table(f_r)
        rel_sets[rvar.vid] = frozenset(t for t, b in table.items() if b is True)

    return Witness(universe, fo_values, fun_tables, rel_sets)


# Validation.


@dataclass
class ValidationReport:
    status: str  # "pass" | "fail" | "inconclusive"
    checks: int = 0
    failures: list[str] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)

    def ok(self) -> bool:
        return self.status == "pass"


_INT_RE = re.compile(r"-?\d+\Z")
_DEC_RE = re.compile(r"\d+\.\d+\Z")


def parse_backend_value(token: object) -> Optional[object]:
    """Backend model literal -> int or Fraction, None if unrecognized."""
    if isinstance(token, (int, bool, Fraction)):
        return token
    if not isinstance(token, str):
        return None
    text = token.strip()
    if _INT_RE.match(text):
        return int(text)
    if _DEC_RE.match(text):
        whole, frac = text.split(".")
        return Fraction(int(whole) * 10 ** len(frac) + int(frac), 10 ** len(frac))
    try:
        form = sexpr.read_all(text)
    except sexpr.SExprError:
        return None
    if len(form) != 1:
        return None

    def walk(e) -> Optional[object]:
        if isinstance(e, sexpr.Atom):
            if _INT_RE.match(e.text):
                return int(e.text)
            if _DEC_RE.match(e.text):
                return parse_backend_value(e.text)
            return None
        items = e.items
        if len(items) == 2 and isinstance(items[0], sexpr.Atom) and items[0].text == "-":
            sub = walk(items[1])
            return None if sub is None else -sub
        if len(items) == 3 and isinstance(items[0], sexpr.Atom) and items[0].text == "/":
            a, b = walk(items[1]), walk(items[2])
            if a is None or b is None or b == 0:
                return None
            return Fraction(a) / Fraction(b)
        return None

    return walk(form[0])


def _finite_sorts(sentence: Sentence) -> set[str]:
    out = set()
    for s in sentence.signature.sorts:
        if not s.is_arith():
            out.add(s.name)
    return out


class _Grounder:
    """Evaluate a matrix under concrete finite-sort values, leaving
    arithmetic subformulas symbolic."""

    def __init__(self, env: dict, fun_fresh: dict):
        self.env = env            # ("fo", vid) / ("rel", vid, tuple) / ("fun", vid, tuple) -> value
        self.fun_fresh = fun_fresh  # (vid, tuple) -> Var for arith-result universal funs

    def term(self, t: Term) -> object:
        """Concrete value for finite sorts, a Term for arithmetic."""
        if isinstance(t, Var):
            if ("fo", t.vid) in self.env:
                return self.env[("fo", t.vid)]
            return t
        if isinstance(t, Num):
            return t
        if isinstance(t, App):
            if t.sym.name == "true" and not t.args:
                return True
            if t.sym.name == "false" and not t.args:
                return False
            return App(t.sym, tuple(self._as_term(a) for a in t.args))
        if isinstance(t, FApp):
            args = tuple(self.term(a) for a in t.args)
            if ("fun", t.fvar.vid, args) in self.env:
                return self.env[("fun", t.fvar.vid, args)]
            if (t.fvar.vid, args) in self.fun_fresh:
                return self.fun_fresh[(t.fvar.vid, args)]
            raise KeyError("no value for %s%r" % (t.fvar.name, args))
        raise TypeError("not a term: %r" % (t,))

    def _as_term(self, t: Term) -> Term:
        v = self.term(t)
        if isinstance(v, (Var, Num, App, FApp)):
            return v
        raise TypeError("finite value inside arithmetic term: %r" % (v,))

    def formula(self, f: Formula) -> Formula:
        if isinstance(f, (TrueF, FalseF)):
            return f
        if isinstance(f, Not):
            return neg(self.formula(f.body))
        if isinstance(f, And):
            return conj(*[self.formula(p) for p in f.parts])
        if isinstance(f, Or):
            return disj(*[self.formula(p) for p in f.parts])
        if isinstance(f, Implies):
            return disj(neg(self.formula(f.lhs)), self.formula(f.rhs))
        if isinstance(f, Iff):
            a, b = self.formula(f.lhs), self.formula(f.rhs)
            if isinstance(a, (TrueF, FalseF)) and isinstance(b, (TrueF, FalseF)):
                return TRUE if type(a) is type(b) else FALSE
            return conj(disj(neg(a), b), disj(neg(b), a))
        if isinstance(f, Eq):
            lhs, rhs = self.term(f.lhs), self.term(f.rhs)
            symbolic_l = isinstance(lhs, (Var, Num, App, FApp))
            symbolic_r = isinstance(rhs, (Var, Num, App, FApp))
            if not symbolic_l and not symbolic_r:
                return TRUE if lhs == rhs else FALSE
            return Eq(lhs if symbolic_l else _const_term(lhs, sort_of(f.rhs)),
                      rhs if symbolic_r else _const_term(rhs, sort_of(f.lhs)))
        if isinstance(f, RelApp):
            return RelApp(f.sym, tuple(self._as_term(a) for a in f.args))
        if isinstance(f, RelVarApp):
            args = tuple(self.term(a) for a in f.args)
            key = ("rel", f.rvar.vid, args)
            if key in self.env:
                return TRUE if self.env[key] else FALSE
            raise KeyError("no value for %s%r" % (f.rvar.name, args))
        raise TypeError("not a formula: %r" % (f,))


def _const_term(value: object, sort: Sort) -> Term:
    if isinstance(value, (int, Fraction)) and not isinstance(value, bool):
        return Num(value, sort)
    raise TypeError("cannot embed %r as a term of sort %s" % (value, sort.name))


def _describe_env(env: dict, sentence: Sentence) -> str:
    names: dict[int, str] = {}
    for v in sentence.forall_fo:
        names[v.vid] = v.name
    for r in sentence.forall_rel:
        names[r.vid] = r.name
    for g in sentence.forall_fun:
        names[g.vid] = g.name
    parts: list[str] = []
    for key in sorted(env, key=repr):
        kind = key[0]
        if kind == "fo" and key[1] in names:
            parts.append("%s=%s" % (names[key[1]], env[key]))
        elif kind == "rel" and key[1] in names:
            parts.append("%s%s=%s" % (names[key[1]], key[2], env[key]))
        elif kind == "fun" and key[1] in names:
            parts.append("%s%s=%s" % (names[key[1]], key[2], env[key]))
    return ", ".join(parts) if parts else "(no universal variables)"


def _witness_env(w: Witness, sentence: Sentence) -> tuple[dict, list[str]]:
    """Base environment covering the existential prefix; arith values
    become Num terms.  Returns (env, notes) where notes list values the
    validator could not interpret."""
    env: dict = {}
    notes: list[str] = []
    for v in sentence.exists_fo:
        val = w.fo_values.get(v.vid)
        if v.sort.is_arith():
            parsed = parse_backend_value(val)
            if parsed is None:
                notes.append("uninterpretable value %r for %s" % (val, v.name))
                continue
            env[("fo", v.vid)] = Num(parsed, v.sort)
        else:
            env[("fo", v.vid)] = val
    for fvar in sentence.exists_fun:
        table = w.fun_tables.get(fvar.vid, {})
        for args, val in table.items():
            if fvar.result.is_arith():
                parsed = parse_backend_value(val)
                if parsed is None:
                    notes.append("uninterpretable value %r for %s%r" % (val, fvar.name, args))
                    continue
                env[("fun", fvar.vid, args)] = Num(parsed, fvar.result)
            else:
                env[("fun", fvar.vid, args)] = val
    for rvar in sentence.exists_rel:
        tuples = w.rel_sets.get(rvar.vid, frozenset())
        arity = len(rvar.arg_sorts)
        for args in itertools.product(w.universe, repeat=arity):
            env[("rel", rvar.vid, args)] = args in tuples
    return env, notes


def _bg_universe(w: Witness, sort: Sort, sentence: Sentence) -> tuple[object, ...]:
    """Finite universe for an empty-theory background sort: the values
    the witness mentions at that sort.  Restricting a model of a
    universal sentence to the mentioned elements preserves truth, so
    validating against this universe is exact."""
    seen: set = set()
    for v in sentence.exists_fo:
        if v.sort == sort and v.vid in w.fo_values:
            seen.add(w.fo_values[v.vid])
    for fvar in sentence.exists_fun:
        if fvar.result == sort:
            seen.update(w.fun_tables.get(fvar.vid, {}).values())
    return tuple(sorted(seen, key=repr)) or (0,)


def validate_witness(
    w: Witness,
    original: Sentence,
    registry: Optional[BackendRegistry] = None,
    guard: int = 1_000_000,
) -> ValidationReport:
    """Check the witness against the original sentence.

    Universals over finite sorts (foreground, boolean, empty-theory
    backgrounds, and second-order variables whose arguments stay within
    those) are enumerated.  Each grounded matrix must be valid over its
    arithmetic universals; that check runs clause by clause: a clause is
    valid iff its negation cube, split by sort, has some unsatisfiable
    part.  Backend UNKNOWN makes the report inconclusive, never a fail.
    """
    registry = registry or BackendRegistry()
    sig = original.signature
    fg = sig.foreground()
    report = ValidationReport("pass")

    base_env, notes = _witness_env(w, original)
    report.notes.extend(notes)

    def domain_of(sort: Sort) -> Optional[tuple]:
        if sort == fg:
            return w.universe
        if sort.kind == BOOLEAN:
            return (False, True)
        if not sort.is_arith():
            return _bg_universe(w, sort, original)
        return None

    # finite choice points for the universal prefix
    points: list[tuple[tuple, tuple]] = []  # (env key, domain)
    fun_fresh: dict[tuple[int, tuple], Var] = {}
    unsupported: list[str] = []
    for v in original.forall_fo:
        dom = domain_of(v.sort)
        if dom is not None:
            points.append((("fo", v.vid), dom))
    for rvar in original.forall_rel:
        doms = [domain_of(s) for s in rvar.arg_sorts]
        if any(d is None for d in doms):
            unsupported.append("universal relation %s has arithmetic arguments" % rvar.name)
            continue
        for args in itertools.product(*doms):
            points.append((("rel", rvar.vid, args), (False, True)))
    for gvar in original.forall_fun:
        doms = [domain_of(s) for s in gvar.arg_sorts]
        if any(d is None for d in doms):
            unsupported.append("universal function %s has arithmetic arguments" % gvar.name)
            continue
        res_dom = domain_of(gvar.result)
        for args in itertools.product(*doms):
            if res_dom is None:
                fun_fresh[(gvar.vid, args)] = Var(
                    "%s@%s" % (gvar.name, "_".join(map(str, args))), gvar.result)
            else:
                points.append((("fun", gvar.vid, args), res_dom))

    if unsupported:
        report.notes.extend(unsupported)
        report.status = "inconclusive"
        return report

    total = 1
    for _, dom in points:
        total *= len(dom)
        if total > guard:
            report.notes.append("universal instantiation space exceeds %d" % guard)
            report.status = "inconclusive"
            return report

    inconclusive = False
    for combo in itertools.product(*[dom for _, dom in points]):
        env = dict(base_env)
        for (key, _), val in zip(points, combo):
            env[key] = val
        grounder = _Grounder(env, fun_fresh)
        try:
            residual = grounder.formula(original.matrix)
        except KeyError as e:
            report.failures.append("internal gap: %s" % e)
            report.status = "fail"
            return report
        report.checks += 1
        if isinstance(residual, TrueF):
            continue
        if isinstance(residual, FalseF):
            report.failures.append(
                "matrix false under " + _describe_env(env, original))
            report.status = "fail"
            return report
        verdict = _check_validity(residual, sig, registry, report)
        if verdict is False:
            report.failures.append(
                "arithmetic residue falsifiable under " + _describe_env(env, original))
            report.status = "fail"
            return report
        if verdict is None:
            inconclusive = True

    if inconclusive and report.status == "pass":
        report.status = "inconclusive"
    return report


def _check_validity(
    residual: Formula,
    sig,
    registry: BackendRegistry,
    report: ValidationReport,
) -> Optional[bool]:
    """Is the residual valid over its (arithmetic) variables?  True,
    False, or None for backend-undecided."""
    try:
        cnf = to_cnf(Sentence(signature=sig, matrix=residual))
    except TransformResourceError as e:
        report.notes.append(str(e))
        return None
    undecided = False
    for clause in cnf.clauses:
        # clause valid iff the negation cube has an unsatisfiable part;
        # parts of different sorts share no variables
        parts: dict[str, list[Literal]] = {}
        for lit in clause:
            s = _atom_sort(lit.atom)
            parts.setdefault(s.name, []).append(lit.negate())
        statuses = []
        for sort_name, lits in parts.items():
            sort = sig.sort_named(sort_name)
            vars_here: dict[int, Var] = {}
            for lit in lits:
                for t in _literal_terms(lit):
                    if isinstance(t, Var):
                        vars_here[t.vid] = t
            q = TheoryQuery(
                sort=sort,
                exists=tuple(vars_here.values()),
                forall=(),
                clauses=tuple((l,) for l in lits),
            )
            res = registry.solve(q)
            statuses.append(res.verdict)
            if res.verdict == Verdict.UNSAT:
                break
        if Verdict.UNSAT in statuses:
            continue
        if Verdict.UNKNOWN in statuses:
            undecided = True
            continue
        return False
    return None if undecided else True


def _atom_sort(atom: Formula) -> Sort:
    if isinstance(atom, Eq):
        return sort_of(atom.lhs)
    if isinstance(atom, RelApp):
        return atom.sym.arg_sorts[0]
    raise TypeError("unexpected residual atom: %r" % (atom,))


def _literal_terms(lit: Literal):
    atom = lit.atom
    if isinstance(atom, Eq):
        yield from subterms(atom.lhs)
        yield from subterms(atom.rhs)
    elif isinstance(atom, RelApp):
        for a in atom.args:
            yield from subterms(a)


# JSON shape for --model-out.

SCHEMA = "eqsmt-witness/1"


def _json_value(v: object) -> object:
    if isinstance(v, Fraction):
        return "%d/%d" % (v.numerator, v.denominator)
    return v


def witness_to_json(w: Witness, sentence: Sentence) -> dict:
    """Schema: names come from the sentence binders, values are
    universe indices for foreground, booleans, or backend literals."""
    fo = []
    for v in sentence.exists_fo:
        fo.append({
            "name": v.name,
            "sort": v.sort.name,
            "value": _json_value(w.fo_values.get(v.vid)),
        })
    rels = []
    for r in sentence.exists_rel:
        rels.append({
            "name": r.name,
            "arity": len(r.arg_sorts),
            "tuples": sorted([list(t) for t in w.rel_sets.get(r.vid, frozenset())]),
        })
    funs = []
    for g in sentence.exists_fun:
        table = w.fun_tables.get(g.vid, {})
        funs.append({
            "name": g.name,
            "args": [s.name for s in g.arg_sorts],
            "result": g.result.name,
            "table": [
                {"args": list(t), "value": _json_value(val)}
                for t, val in sorted(table.items())
            ],
        })
    return {
        "schema": SCHEMA,
        "universe": list(w.universe),
        "fo": fo,
        "rels": rels,
        "funs": funs,
    }
