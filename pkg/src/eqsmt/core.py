"""Core syntax: sorts, signatures, terms, formulas, sentences, validation.

The sentence shape is the exists*-forall* fragment over a pure signature:
every declared symbol lives at a single sort, no symbol touches the
foreground sort, existential relation variables range over foreground
tuples, and existential function variables map foreground tuples into a
background or boolean sort.  The validator enforces exactly that shape;
everything downstream (transform, decompose, backends) assumes it.
"""

from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterator, Mapping, Optional, Union

FOREGROUND = "foreground"
BOOLEAN = "boolean"
BACKGROUND = "background"


class Verdict(enum.Enum):
    SAT = "sat"
    UNSAT = "unsat"
    UNKNOWN = "unknown"

    def __str__(self) -> str:
        return self.value

ARITH_THEORIES = ("lia", "lra", "nra")
EMPTY_THEORY = "empty"

_fresh_ids = itertools.count(1)


def fresh_id() -> int:
    return next(_fresh_ids)


@dataclass(frozen=True)
class Sort:
    """A sort: one foreground, one boolean, any number of background sorts."""

    name: str
    kind: str
    theory: Optional[str] = None  # background sorts only

    def theory_id(self) -> str:
        if self.kind == FOREGROUND:
            return EMPTY_THEORY
        if self.kind == BOOLEAN:
            return "bool"
        assert self.theory is not None
        return self.theory

    def is_arith(self) -> bool:
        return self.kind == BACKGROUND and self.theory in ARITH_THEORIES


def foreground_sort(name: str = "FG") -> Sort:
    return Sort(name, FOREGROUND)


def boolean_sort(name: str = "bool") -> Sort:
    return Sort(name, BOOLEAN)


def background_sort(name: str, theory: str) -> Sort:
    return Sort(name, BACKGROUND, theory)


@dataclass(frozen=True)
class FunSym:
    """Uninterpreted or theory function symbol; single-sorted by purity."""

    name: str
    arg_sorts: tuple[Sort, ...]
    result: Sort


@dataclass(frozen=True)
class RelSym:
    """Relation symbol (theory predicates such as <, or user-declared)."""

    name: str
    arg_sorts: tuple[Sort, ...]


# Builtin theory vocabulary.  Constructed per sort so symbols stay
# single-sorted; the parser and validator consult these tables.

def theory_funs(sort: Sort) -> dict[tuple[str, int], FunSym]:
    if sort.kind == BOOLEAN:
        return {
            ("true", 0): FunSym("true", (), sort),
            ("false", 0): FunSym("false", (), sort),
        }
    if sort.is_arith():
        return {
            ("+", 2): FunSym("+", (sort, sort), sort),
            ("-", 2): FunSym("-", (sort, sort), sort),
            ("-", 1): FunSym("-", (sort,), sort),
            ("*", 2): FunSym("*", (sort, sort), sort),
        }
    return {}


def theory_rels(sort: Sort) -> dict[tuple[str, int], RelSym]:
    if sort.is_arith():
        return {
            ("<", 2): RelSym("<", (sort, sort)),
            ("<=", 2): RelSym("<=", (sort, sort)),
            (">", 2): RelSym(">", (sort, sort)),
            (">=", 2): RelSym(">=", (sort, sort)),
        }
    return {}


def bool_true(bool_sort: Sort) -> "App":
    return App(FunSym("true", (), bool_sort), ())


def bool_false(bool_sort: Sort) -> "App":
    return App(FunSym("false", (), bool_sort), ())


@dataclass(frozen=True)
class Var:
    """First-order variable.  Identity is the globally unique vid; the
    name is for display only."""

    name: str
    sort: Sort
    vid: int = field(default_factory=fresh_id)


@dataclass(frozen=True)
class RelVar:
    name: str
    arg_sorts: tuple[Sort, ...]
    vid: int = field(default_factory=fresh_id)


@dataclass(frozen=True)
class FunVar:
    name: str
    arg_sorts: tuple[Sort, ...]
    result: Sort
    vid: int = field(default_factory=fresh_id)


@dataclass(frozen=True)
class Num:
    """Numeral literal.  Integer for lia, Fraction allowed for lra/nra."""

    value: Union[int, Fraction]
    sort: Sort


@dataclass(frozen=True)
class App:
    sym: FunSym
    args: tuple["Term", ...]


@dataclass(frozen=True)
class FApp:
    fvar: FunVar
    args: tuple["Term", ...]


Term = Union[Var, Num, App, FApp]


@dataclass(frozen=True)
class TrueF:
    pass


@dataclass(frozen=True)
class FalseF:
    pass


@dataclass(frozen=True)
class Not:
    body: "Formula"


@dataclass(frozen=True)
class And:
    parts: tuple["Formula", ...]


@dataclass(frozen=True)
class Or:
    parts: tuple["Formula", ...]


@dataclass(frozen=True)
class Implies:
    lhs: "Formula"
    rhs: "Formula"


@dataclass(frozen=True)
class Iff:
    lhs: "Formula"
    rhs: "Formula"


@dataclass(frozen=True)
class Eq:
    lhs: Term
    rhs: Term


@dataclass(frozen=True)
class RelApp:
    sym: RelSym
    args: tuple[Term, ...]


@dataclass(frozen=True)
class RelVarApp:
    rvar: RelVar
    args: tuple[Term, ...]


Formula = Union[
    TrueF, FalseF, Not, And, Or, Implies, Iff, Eq, RelApp, RelVarApp
]

TRUE = TrueF()
FALSE = FalseF()


def conj(*parts: Formula) -> Formula:
    flat = [p for p in parts if not isinstance(p, TrueF)]
    if any(isinstance(p, FalseF) for p in flat):
        return FALSE
    if not flat:
        return TRUE
    if len(flat) == 1:
        return flat[0]
    return And(tuple(flat))


def disj(*parts: Formula) -> Formula:
    flat = [p for p in parts if not isinstance(p, FalseF)]
    if any(isinstance(p, TrueF) for p in flat):
        return TRUE
    if not flat:
        return FALSE
    if len(flat) == 1:
        return flat[0]
    return Or(tuple(flat))


def neg(f: Formula) -> Formula:
    if isinstance(f, Not):
        return f.body
    if isinstance(f, TrueF):
        return FALSE
    if isinstance(f, FalseF):
        return TRUE
    return Not(f)


@dataclass(frozen=True)
class Signature:
    """Declared vocabulary.  Theory symbols are implicit (theory_funs /
    theory_rels); this records the sorts plus user-declared symbols."""

    sorts: tuple[Sort, ...]
    funs: tuple[FunSym, ...] = ()
    rels: tuple[RelSym, ...] = ()

    def foreground(self) -> Sort:
        for s in self.sorts:
            if s.kind == FOREGROUND:
                return s
        raise ValueError("signature has no foreground sort")

    def boolean(self) -> Sort:
        for s in self.sorts:
            if s.kind == BOOLEAN:
                return s
        raise ValueError("signature has no boolean sort")

    def sort_named(self, name: str) -> Optional[Sort]:
        for s in self.sorts:
            if s.name == name:
                return s
        return None

    def fun_named(self, name: str, arity: int) -> Optional[FunSym]:
        for f in self.funs:
            if f.name == name and len(f.arg_sorts) == arity:
                return f
        for s in self.sorts:
            hit = theory_funs(s).get((name, arity))
            if hit is not None:
                return hit
        return None

    def rel_named(self, name: str, arity: int) -> Optional[RelSym]:
        for r in self.rels:
            if r.name == name and len(r.arg_sorts) == arity:
                return r
        for s in self.sorts:
            hit = theory_rels(s).get((name, arity))
            if hit is not None:
                return hit
        return None


def make_signature(
    sorts: list[Sort],
    funs: list[FunSym] = [],
    rels: list[RelSym] = [],
) -> Signature:
    """Build a signature, adding the implicit boolean sort if absent."""
    if not any(s.kind == BOOLEAN for s in sorts):
        sorts = sorts + [boolean_sort()]
    return Signature(tuple(sorts), tuple(funs), tuple(rels))


@dataclass(frozen=True)
class Sentence:
    """One EQSMT sentence: the six prefix blocks plus a quantifier-free
    matrix.  The universal blocks are unrestricted; the existential
    second-order blocks carry the foreground-only discipline."""

    signature: Signature
    exists_fo: tuple[Var, ...] = ()
    exists_rel: tuple[RelVar, ...] = ()
    exists_fun: tuple[FunVar, ...] = ()
    forall_fo: tuple[Var, ...] = ()
    forall_rel: tuple[RelVar, ...] = ()
    forall_fun: tuple[FunVar, ...] = ()
    matrix: Formula = TRUE

    def foreground_exists(self) -> tuple[Var, ...]:
        fg = self.signature.foreground()
        return tuple(v for v in self.exists_fo if v.sort == fg)


@dataclass(frozen=True)
class Diagnostic:
    code: str
    message: str
    span: Optional[tuple[int, int]] = None

    def __str__(self) -> str:
        if self.span is not None:
            return "%d:%d: %s: %s" % (self.span[0], self.span[1], self.code, self.message)
        return "%s: %s" % (self.code, self.message)


def sort_of(term: Term) -> Sort:
    if isinstance(term, Var):
        return term.sort
    if isinstance(term, Num):
        return term.sort
    if isinstance(term, App):
        return term.sym.result
    if isinstance(term, FApp):
        return term.fvar.result
    raise TypeError("not a term: %r" % (term,))


def subterms(term: Term) -> Iterator[Term]:
    """All subterm occurrences, the term itself included, pre-order."""
    yield term
    if isinstance(term, (App, FApp)):
        for a in term.args:
            yield from subterms(a)


def formula_terms(f: Formula) -> Iterator[Term]:
    for atom in atoms(f):
        if isinstance(atom, Eq):
            yield from subterms(atom.lhs)
            yield from subterms(atom.rhs)
        elif isinstance(atom, (RelApp, RelVarApp)):
            for a in atom.args:
                yield from subterms(a)


def atoms(f: Formula) -> Iterator[Formula]:
    if isinstance(f, (TrueF, FalseF, Eq, RelApp, RelVarApp)):
        yield f
    elif isinstance(f, Not):
        yield from atoms(f.body)
    elif isinstance(f, (And, Or)):
        for p in f.parts:
            yield from atoms(p)
    elif isinstance(f, (Implies, Iff)):
        yield from atoms(f.lhs)
        yield from atoms(f.rhs)
    else:
        raise TypeError("not a formula: %r" % (f,))


def map_formula_terms(f: Formula, fn: Callable[[Term], Term]) -> Formula:
    """Rebuild f with fn applied bottom-up to every term."""

    def on_term(t: Term) -> Term:
        if isinstance(t, (App, FApp)):
            args = tuple(on_term(a) for a in t.args)
            t = App(t.sym, args) if isinstance(t, App) else FApp(t.fvar, args)
        return fn(t)

    def on_formula(g: Formula) -> Formula:
        if isinstance(g, (TrueF, FalseF)):
            return g
        if isinstance(g, Not):
            return Not(on_formula(g.body))
        if isinstance(g, And):
            return And(tuple(on_formula(p) for p in g.parts))
        if isinstance(g, Or):
            return Or(tuple(on_formula(p) for p in g.parts))
        if isinstance(g, Implies):
            return Implies(on_formula(g.lhs), on_formula(g.rhs))
        if isinstance(g, Iff):
            return Iff(on_formula(g.lhs), on_formula(g.rhs))
        if isinstance(g, Eq):
            return Eq(on_term(g.lhs), on_term(g.rhs))
        if isinstance(g, RelApp):
            return RelApp(g.sym, tuple(on_term(a) for a in g.args))
        if isinstance(g, RelVarApp):
            return RelVarApp(g.rvar, tuple(on_term(a) for a in g.args))
        raise TypeError("not a formula: %r" % (g,))

    return on_formula(f)


def map_atoms(f: Formula, fn: Callable[[Formula], Formula]) -> Formula:
    if isinstance(f, (TrueF, FalseF, Eq, RelApp, RelVarApp)):
        return fn(f)
    if isinstance(f, Not):
        return Not(map_atoms(f.body, fn))
    if isinstance(f, And):
        return And(tuple(map_atoms(p, fn) for p in f.parts))
    if isinstance(f, Or):
        return Or(tuple(map_atoms(p, fn) for p in f.parts))
    if isinstance(f, Implies):
        return Implies(map_atoms(f.lhs, fn), map_atoms(f.rhs, fn))
    if isinstance(f, Iff):
        return Iff(map_atoms(f.lhs, fn), map_atoms(f.rhs, fn))
    raise TypeError("not a formula: %r" % (f,))


def substitute(f: Formula, mapping: Mapping[int, Term]) -> Formula:
    """Replace variables by vid.  Matrices are quantifier-free, so the
    substitution is trivially capture-free."""

    def fn(t: Term) -> Term:
        if isinstance(t, Var) and t.vid in mapping:
            return mapping[t.vid]
        return t

    return map_formula_terms(f, fn)


def free_vars(f: Formula) -> dict[int, Var]:
    out: dict[int, Var] = {}
    for t in formula_terms(f):
        if isinstance(t, Var):
            out[t.vid] = t
    return out


def fun_var_apps(f: Formula) -> list[FApp]:
    """Distinct FApp occurrences in first-seen order."""
    seen: dict[FApp, None] = {}
    for t in formula_terms(f):
        if isinstance(t, FApp) and t not in seen:
            seen[t] = None
    return list(seen)


def rel_vars_of(f: Formula) -> list[RelVar]:
    seen: dict[int, RelVar] = {}
    for atom in atoms(f):
        if isinstance(atom, RelVarApp) and atom.rvar.vid not in seen:
            seen[atom.rvar.vid] = atom.rvar
    return list(seen.values())


# Validation.  Diagnostics, never exceptions: the CLI turns a non-empty
# list into exit status 3.

def validate(sentence: Sentence) -> list[Diagnostic]:
    sig = sentence.signature
    diags: list[Diagnostic] = []

    names = [s.name for s in sig.sorts]
    if len(set(names)) != len(names):
        diags.append(Diagnostic("duplicate-sort", "sort names not unique"))
    fgs = [s for s in sig.sorts if s.kind == FOREGROUND]
    if len(fgs) != 1:
        diags.append(Diagnostic("foreground-count", "need exactly one foreground sort, have %d" % len(fgs)))
        return diags
    bools = [s for s in sig.sorts if s.kind == BOOLEAN]
    if len(bools) != 1:
        diags.append(Diagnostic("boolean-count", "need exactly one boolean sort, have %d" % len(bools)))
        return diags
    fg = fgs[0]
    for s in sig.sorts:
        if s.kind == BACKGROUND and s.theory not in ARITH_THEORIES + (EMPTY_THEORY,):
            diags.append(Diagnostic("unknown-theory", "sort %s has unknown theory %r" % (s.name, s.theory)))

    for sym in sig.funs:
        involved = set(sym.arg_sorts) | {sym.result}
        if len(involved) > 1:
            diags.append(Diagnostic("impure-symbol", "function symbol %s crosses sorts" % sym.name))
        if fg in involved:
            diags.append(Diagnostic("foreground-symbol", "function symbol %s involves the foreground sort" % sym.name))
    for rsym in sig.rels:
        if len(set(rsym.arg_sorts)) > 1:
            diags.append(Diagnostic("impure-symbol", "relation symbol %s crosses sorts" % rsym.name))
        if fg in rsym.arg_sorts:
            diags.append(Diagnostic("foreground-symbol", "relation symbol %s involves the foreground sort" % rsym.name))

    for v in sentence.exists_fo + sentence.forall_fo:
        if sig.sort_named(v.sort.name) != v.sort:
            diags.append(Diagnostic("unknown-sort", "variable %s has undeclared sort %s" % (v.name, v.sort.name)))
    for rv in sentence.exists_rel:
        if len(rv.arg_sorts) == 0:
            diags.append(Diagnostic("nullary-relation", "relation variable %s needs at least one argument" % rv.name))
        if any(s != fg for s in rv.arg_sorts):
            diags.append(Diagnostic(
                "bg-relation-var",
                "existential relation variable %s over background sort" % rv.name))
    for fv in sentence.exists_fun:
        if len(fv.arg_sorts) == 0:
            diags.append(Diagnostic("nullary-function", "function variable %s needs at least one argument" % fv.name))
        if any(s != fg for s in fv.arg_sorts):
            diags.append(Diagnostic(
                "bg-function-var",
                "existential function variable %s with non-foreground arguments" % fv.name))
        if fv.result == fg:
            diags.append(Diagnostic(
                "fg-function-range",
                "existential function variable %s with foreground range" % fv.name))

    vids = [v.vid for v in sentence.exists_fo + sentence.forall_fo]
    vids += [r.vid for r in sentence.exists_rel + sentence.forall_rel]
    vids += [g.vid for g in sentence.exists_fun + sentence.forall_fun]
    if len(set(vids)) != len(vids):
        diags.append(Diagnostic("duplicate-binder", "a variable is bound twice"))

    bound_fo = {v.vid for v in sentence.exists_fo + sentence.forall_fo}
    bound_rel = {r.vid for r in sentence.exists_rel + sentence.forall_rel}
    bound_fun = {g.vid for g in sentence.exists_fun + sentence.forall_fun}

    def check_term(t: Term, path: str) -> None:
        if isinstance(t, Var):
            if t.vid not in bound_fo:
                diags.append(Diagnostic("unbound-variable", "unbound variable %s at %s" % (t.name, path)))
            return
        if isinstance(t, Num):
            if not t.sort.is_arith():
                diags.append(Diagnostic("numeral-sort", "numeral %s at non-arithmetic sort %s" % (t.value, t.sort.name)))
            elif t.sort.theory == "lia" and not isinstance(t.value, int):
                diags.append(Diagnostic("numeral-sort", "non-integer numeral %s at lia sort" % (t.value,)))
            return
        if isinstance(t, App):
            declared = sig.fun_named(t.sym.name, len(t.args))
            if declared != t.sym:
                diags.append(Diagnostic("unknown-symbol", "undeclared function symbol %s at %s" % (t.sym.name, path)))
            if len(t.args) != len(t.sym.arg_sorts):
                diags.append(Diagnostic("arity", "arity mismatch for %s at %s" % (t.sym.name, path)))
                return
            for i, (a, want) in enumerate(zip(t.args, t.sym.arg_sorts)):
                sub = "%s.%s[%d]" % (path, t.sym.name, i)
                check_term(a, sub)
                if sort_of(a) != want:
                    diags.append(Diagnostic("ill-sorted", "argument %d of %s has sort %s, expected %s, at %s"
                                            % (i, t.sym.name, sort_of(a).name, want.name, sub)))
            if t.sym.name == "*" and len(t.args) == 2 and t.sym.result.theory in ("lia", "lra"):
                if not any(isinstance(a, Num) or _is_numeral_term(a) for a in t.args):
                    diags.append(Diagnostic("nonlinear", "multiplication of two non-numerals at linear sort, at %s" % path))
            return
        if isinstance(t, FApp):
            if t.fvar.vid not in bound_fun:
                diags.append(Diagnostic("unbound-variable", "unbound function variable %s at %s" % (t.fvar.name, path)))
            if len(t.args) != len(t.fvar.arg_sorts):
                diags.append(Diagnostic("arity", "arity mismatch for %s at %s" % (t.fvar.name, path)))
                return
            for i, (a, want) in enumerate(zip(t.args, t.fvar.arg_sorts)):
                sub = "%s.%s[%d]" % (path, t.fvar.name, i)
                check_term(a, sub)
                if sort_of(a) != want:
                    diags.append(Diagnostic("ill-sorted", "argument %d of %s has sort %s, expected %s, at %s"
                                            % (i, t.fvar.name, sort_of(a).name, want.name, sub)))
            return
        diags.append(Diagnostic("bad-term", "unrecognized term at %s" % path))

    def check_formula(f: Formula, path: str) -> None:
        if isinstance(f, (TrueF, FalseF)):
            return
        if isinstance(f, Not):
            check_formula(f.body, path + ".not")
            return
        if isinstance(f, (And, Or)):
            tag = ".and" if isinstance(f, And) else ".or"
            for i, p in enumerate(f.parts):
                check_formula(p, "%s%s[%d]" % (path, tag, i))
            return
        if isinstance(f, (Implies, Iff)):
            tag = ".implies" if isinstance(f, Implies) else ".iff"
            check_formula(f.lhs, path + tag + "[0]")
            check_formula(f.rhs, path + tag + "[1]")
            return
        if isinstance(f, Eq):
            check_term(f.lhs, path + ".eq[0]")
            check_term(f.rhs, path + ".eq[1]")
            try:
                ls, rs = sort_of(f.lhs), sort_of(f.rhs)
            except TypeError:
                return
            if ls != rs:
                diags.append(Diagnostic("eq-sorts", "equality between sorts %s and %s at %s" % (ls.name, rs.name, path)))
            return
        if isinstance(f, RelApp):
            declared = sig.rel_named(f.sym.name, len(f.args))
            if declared != f.sym:
                diags.append(Diagnostic("unknown-symbol", "undeclared relation symbol %s at %s" % (f.sym.name, path)))
            for i, (a, want) in enumerate(zip(f.args, f.sym.arg_sorts)):
                sub = "%s.%s[%d]" % (path, f.sym.name, i)
                check_term(a, sub)
                if sort_of(a) != want:
                    diags.append(Diagnostic("ill-sorted", "argument %d of %s ill-sorted at %s" % (i, f.sym.name, sub)))
            return
        if isinstance(f, RelVarApp):
            if f.rvar.vid not in bound_rel:
                diags.append(Diagnostic("unbound-variable", "unbound relation variable %s at %s" % (f.rvar.name, path)))
            if len(f.args) != len(f.rvar.arg_sorts):
                diags.append(Diagnostic("arity", "arity mismatch for %s at %s" % (f.rvar.name, path)))
                return
            for i, (a, want) in enumerate(zip(f.args, f.rvar.arg_sorts)):
                sub = "%s.%s[%d]" % (path, f.rvar.name, i)
                check_term(a, sub)
                if sort_of(a) != want:
                    diags.append(Diagnostic("ill-sorted", "argument %d of %s ill-sorted at %s" % (i, f.rvar.name, sub)))
            return
        diags.append(Diagnostic("bad-formula", "unrecognized formula at %s" % path))

    check_formula(sentence.matrix, "matrix")
    return diags


def _is_numeral_term(t: Term) -> bool:
    if isinstance(t, Num):
        return True
    if isinstance(t, App) and t.sym.name == "-" and len(t.args) == 1:
        return _is_numeral_term(t.args[0])
    return False


def rename_apart(sentence: Sentence) -> Sentence:
    """Fresh vids for every bound variable; display names preserved."""
    vmap: dict[int, Var] = {}
    rmap: dict[int, RelVar] = {}
    fmap: dict[int, FunVar] = {}
    for v in sentence.exists_fo + sentence.forall_fo:
        vmap[v.vid] = Var(v.name, v.sort)
    for r in sentence.exists_rel + sentence.forall_rel:
        rmap[r.vid] = RelVar(r.name, r.arg_sorts)
    for g in sentence.exists_fun + sentence.forall_fun:
        fmap[g.vid] = FunVar(g.name, g.arg_sorts, g.result)

    def on_term(t: Term) -> Term:
        if isinstance(t, Var) and t.vid in vmap:
            return vmap[t.vid]
        if isinstance(t, FApp) and t.fvar.vid in fmap:
            return FApp(fmap[t.fvar.vid], t.args)
        return t

    def on_atom(a: Formula) -> Formula:
        if isinstance(a, RelVarApp) and a.rvar.vid in rmap:
            return RelVarApp(rmap[a.rvar.vid], a.args)
        return a

    matrix = map_atoms(map_formula_terms(sentence.matrix, on_term), on_atom)
    return Sentence(
        signature=sentence.signature,
        exists_fo=tuple(vmap[v.vid] for v in sentence.exists_fo),
        exists_rel=tuple(rmap[r.vid] for r in sentence.exists_rel),
        exists_fun=tuple(fmap[g.vid] for g in sentence.exists_fun),
        forall_fo=tuple(vmap[v.vid] for v in sentence.forall_fo),
        forall_rel=tuple(rmap[r.vid] for r in sentence.forall_rel),
        forall_fun=tuple(fmap[g.vid] for g in sentence.forall_fun),
        matrix=matrix,
    )


def conjoin(sentences: list[Sentence]) -> Sentence:
    """Merge prefixes and conjoin matrices.  Models of the result are
    exactly the joint models.  Sentences are renamed apart first."""
    if not sentences:
        raise ValueError("conjoin of no sentences")
    sig = sentences[0].signature
    for s in sentences[1:]:
        if s.signature != sig:
            raise ValueError("conjoin across different signatures")
    if len(sentences) == 1:
        return sentences[0]
    fresh = [rename_apart(s) for s in sentences]
    return Sentence(
        signature=sig,
        exists_fo=tuple(v for s in fresh for v in s.exists_fo),
        exists_rel=tuple(r for s in fresh for r in s.exists_rel),
        exists_fun=tuple(g for s in fresh for g in s.exists_fun),
        forall_fo=tuple(v for s in fresh for v in s.forall_fo),
        forall_rel=tuple(r for s in fresh for r in s.forall_rel),
        forall_fun=tuple(g for s in fresh for g in s.forall_fun),
        matrix=conj(*[s.matrix for s in fresh]),
    )


@dataclass
class FiniteModel:
    """Explicit interpretation over finite universes.  Elements are plain
    Python values: ints for the foreground (and empty-theory) sorts, the
    booleans True/False for the boolean sort."""

    universes: dict[str, tuple[object, ...]]
    fo: dict[int, object] = field(default_factory=dict)
    funs: dict[int, dict[tuple[object, ...], object]] = field(default_factory=dict)
    rels: dict[int, frozenset] = field(default_factory=dict)


def eval_formula(f: Formula, model: FiniteModel) -> bool:
    """Recursive matrix evaluator.  The oracle module carries a second,
    table-driven evaluator; the two are cross-checked in tests."""

    def ev_term(t: Term) -> object:
        if isinstance(t, Var):
            return model.fo[t.vid]
        if isinstance(t, App):
            if t.sym.name == "true" and not t.args:
                return True
            if t.sym.name == "false" and not t.args:
                return False
            raise ValueError("cannot evaluate symbol %s over a finite model" % t.sym.name)
        if isinstance(t, FApp):
            table = model.funs[t.fvar.vid]
            return table[tuple(ev_term(a) for a in t.args)]
        if isinstance(t, Num):
            raise ValueError("cannot evaluate numeral over a finite model")
        raise TypeError("not a term: %r" % (t,))

    def ev(g: Formula) -> bool:
        if isinstance(g, TrueF):
            return True
        if isinstance(g, FalseF):
            return False
        if isinstance(g, Not):
            return not ev(g.body)
        if isinstance(g, And):
            return all(ev(p) for p in g.parts)
        if isinstance(g, Or):
            return any(ev(p) for p in g.parts)
        if isinstance(g, Implies):
            return (not ev(g.lhs)) or ev(g.rhs)
        if isinstance(g, Iff):
            return ev(g.lhs) == ev(g.rhs)
        if isinstance(g, Eq):
            return ev_term(g.lhs) == ev_term(g.rhs)
        if isinstance(g, RelVarApp):
            return tuple(ev_term(a) for a in g.args) in model.rels[g.rvar.vid]
        if isinstance(g, RelApp):
            raise ValueError("cannot evaluate theory relation %s over a finite model" % g.sym.name)
        raise TypeError("not a formula: %r" % (g,))

    return ev(f)
