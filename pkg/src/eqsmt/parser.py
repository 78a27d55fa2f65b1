"""Read and write the textual problem format (.eqsmt).

The surface syntax is s-expression based and deliberately close to
SMT-LIB 2, so problem files diff cleanly against the backend scripts the
solver emits.  A file is a sequence of forms:

    (declare-sort FG :foreground)
    (declare-sort Int :background lia)
    (declare-const k Int)
    (declare-fun h (Int) Int)
    (set-option :goal solve)
    (assert-eqsmt (exists ((a FG) (R (Rel FG FG)) (F (-> FG Int)))
                    (forall ((y FG))
                      (or (R a y) (= (F a) k)))))

Relation-variable types are written (Rel FG FG), function-variable types
(-> FG Int); both appear inside ordinary exists/forall binder lists.
Multiple assert-eqsmt forms are conjoined.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Union

from . import core
from .core import (
    App,
    Eq,
    FApp,
    Formula,
    FunSym,
    FunVar,
    Iff,
    Implies,
    Not,
    Num,
    RelApp,
    RelSym,
    RelVar,
    RelVarApp,
    Sentence,
    Signature,
    Sort,
    Term,
    TrueF,
    FalseF,
    And,
    Or,
    Var,
    sort_of,
)
from .sexpr import Atom, SExpr, SExprError, SList, read_all

_INT_RE = re.compile(r"^-?[0-9]+$")
_RAT_RE = re.compile(r"^-?[0-9]+/[0-9]+$")
_DEC_RE = re.compile(r"^-?[0-9]+\.[0-9]+$")


class ParseError(Exception):
    def __init__(self, message: str, line: int = 0, col: int = 0):
        super().__init__("%d:%d: %s" % (line, col, message))
        self.message = message
        self.line = line
        self.col = col

    def as_json(self) -> dict:
        return {"error": "parse", "message": self.message, "line": self.line, "col": self.col}


class _AmbiguousNumeral(Exception):
    def __init__(self, e: SExpr):
        self.e = e


@dataclass
class ProblemFile:
    signature: Signature
    sentences: list[Sentence]
    options: dict[str, object] = field(default_factory=dict)

    @property
    def goal(self) -> str:
        return str(self.options.get("goal", "solve"))


def _pos(e: SExpr) -> tuple[int, int]:
    return (e.line, e.col)


def _fail(e: SExpr, msg: str) -> "ParseError":
    line, col = _pos(e)
    return ParseError(msg, line, col)


def _atom(e: SExpr, what: str) -> str:
    if not isinstance(e, Atom):
        raise _fail(e, "expected %s" % what)
    return e.text


@dataclass
class _Scope:
    vars: dict[str, Var] = field(default_factory=dict)
    rels: dict[str, RelVar] = field(default_factory=dict)
    funs: dict[str, FunVar] = field(default_factory=dict)

    def bind_names(self) -> set[str]:
        return set(self.vars) | set(self.rels) | set(self.funs)


def parse(text: str) -> ProblemFile:
    """Parse a full problem file, or raise ParseError at the first
    syntax error with its line and column."""
    try:
        forms = read_all(text)
    except SExprError as e:
        raise ParseError(e.message, e.line, e.col) from None

    sorts: list[Sort] = []
    funs: list[FunSym] = []
    rels: list[RelSym] = []
    options: dict[str, object] = {}
    asserts: list[SList] = []

    # declarations first pass so asserts can reference any declaration order
    for form in forms:
        if not isinstance(form, SList) or not form.items:
            raise _fail(form, "expected a (command ...) form")
        head = _atom(form.items[0], "command name")
        if head == "declare-sort":
            if len(form.items) < 3:
                raise _fail(form, "declare-sort needs a name and a kind")
            name = _atom(form.items[1], "sort name")
            kind = _atom(form.items[2], "sort kind")
            if any(s.name == name for s in sorts):
                raise _fail(form.items[1], "duplicate declaration of sort %s" % name)
            if kind == ":foreground":
                sorts.append(core.foreground_sort(name))
            elif kind == ":boolean":
                sorts.append(core.boolean_sort(name))
            elif kind == ":background":
                if len(form.items) != 4:
                    raise _fail(form, "declare-sort :background needs a theory id")
                theory = _atom(form.items[3], "theory id")
                sorts.append(core.background_sort(name, theory))
            else:
                raise _fail(form.items[2], "unknown sort kind %s" % kind)
        elif head == "set-option":
            if len(form.items) != 3:
                raise _fail(form, "set-option needs a key and a value")
            key = _atom(form.items[1], "option key").lstrip(":")
            options[key] = _parse_option_value(form.items[2])
        elif head in ("declare-const", "declare-fun", "assert-eqsmt"):
            pass
        else:
            raise _fail(form.items[0], "unknown command %s" % head)

    sig = core.make_signature(sorts)

    for form in forms:
        assert isinstance(form, SList)
        head = _atom(form.items[0], "command name")
        if head == "declare-const":
            if len(form.items) != 3:
                raise _fail(form, "declare-const needs a name and a sort")
            name = _atom(form.items[1], "constant name")
            sort = _parse_sort_ref(form.items[2], sig)
            funs.append(FunSym(name, (), sort))
        elif head == "declare-fun":
            if len(form.items) != 4:
                raise _fail(form, "declare-fun needs a name, argument sorts, and a result sort")
            name = _atom(form.items[1], "function name")
            if not isinstance(form.items[2], SList):
                raise _fail(form.items[2], "expected argument sort list")
            args = tuple(_parse_sort_ref(a, sig) for a in form.items[2].items)
            result = _parse_sort_ref(form.items[3], sig)
            funs.append(FunSym(name, args, result))
        elif head == "assert-eqsmt":
            if len(form.items) != 2:
                raise _fail(form, "assert-eqsmt takes exactly one sentence")
            body = form.items[1]
            assert isinstance(body, (Atom, SList))
            asserts.append(form)

    sig = Signature(sig.sorts, tuple(funs), tuple(rels))
    sentences = [_parse_sentence(form.items[1], sig) for form in asserts]
    return ProblemFile(sig, sentences, options)


def _parse_option_value(e: SExpr) -> object:
    text = _atom(e, "option value")
    if text.startswith('"'):
        return text[1:]
    if _INT_RE.match(text):
        return int(text)
    return text


def _parse_sort_ref(e: SExpr, sig: Signature) -> Sort:
    name = _atom(e, "sort name")
    s = sig.sort_named(name)
    if s is None:
        raise _fail(e, "unknown sort %s" % name)
    return s


def _parse_sentence(e: SExpr, sig: Signature) -> Sentence:
    scope = _Scope()
    exists_fo: list[Var] = []
    exists_rel: list[RelVar] = []
    exists_fun: list[FunVar] = []
    forall_fo: list[Var] = []
    forall_rel: list[RelVar] = []
    forall_fun: list[FunVar] = []

    body = e
    if isinstance(body, SList) and body.items and body.items[0] == Atom("exists"):
        if len(body.items) != 3:
            raise _fail(body, "exists needs a binder list and a body")
        _parse_binders(body.items[1], sig, scope, exists_fo, exists_rel, exists_fun)
        body = body.items[2]
    if isinstance(body, SList) and body.items and body.items[0] == Atom("forall"):
        if len(body.items) != 3:
            raise _fail(body, "forall needs a binder list and a body")
        _parse_binders(body.items[1], sig, scope, forall_fo, forall_rel, forall_fun)
        body = body.items[2]
    if isinstance(body, SList) and body.items and body.items[0] in (Atom("exists"), Atom("forall")):
        raise _fail(body, "quantifier blocks must be exists then forall, outermost only")

    try:
        matrix = _parse_formula(body, sig, scope)
    except _AmbiguousNumeral as amb:
        raise _fail(amb.e, "ambiguous numeral sort; write (as <numeral> <Sort>)") from None
    return Sentence(
        signature=sig,
        exists_fo=tuple(exists_fo),
        exists_rel=tuple(exists_rel),
        exists_fun=tuple(exists_fun),
        forall_fo=tuple(forall_fo),
        forall_rel=tuple(forall_rel),
        forall_fun=tuple(forall_fun),
        matrix=matrix,
    )


def _parse_binders(
    e: SExpr,
    sig: Signature,
    scope: _Scope,
    fo: list[Var],
    rel: list[RelVar],
    fun: list[FunVar],
) -> None:
    if not isinstance(e, SList):
        raise _fail(e, "expected a binder list")
    for b in e.items:
        if not isinstance(b, SList) or len(b.items) != 2:
            raise _fail(b, "expected a (name type) binder")
        name = _atom(b.items[0], "binder name")
        if name in scope.bind_names():
            raise _fail(b.items[0], "duplicate binder name %s" % name)
        ty = b.items[1]
        if isinstance(ty, Atom):
            sort = _parse_sort_ref(ty, sig)
            v = Var(name, sort)
            scope.vars[name] = v
            fo.append(v)
        elif isinstance(ty, SList) and ty.items and ty.items[0] == Atom("Rel"):
            args = tuple(_parse_sort_ref(a, sig) for a in ty.items[1:])
            if not args:
                raise _fail(ty, "relation type needs at least one argument sort")
            rv = RelVar(name, args)
            scope.rels[name] = rv
            rel.append(rv)
        elif isinstance(ty, SList) and ty.items and ty.items[0] == Atom("->"):
            if len(ty.items) < 3:
                raise _fail(ty, "function type needs argument sorts and a result sort")
            args = tuple(_parse_sort_ref(a, sig) for a in ty.items[1:-1])
            result = _parse_sort_ref(ty.items[-1], sig)
            fv = FunVar(name, args, result)
            scope.funs[name] = fv
            fun.append(fv)
        else:
            raise _fail(ty, "expected a sort, (Rel ...), or (-> ...)")


def _parse_formula(e: SExpr, sig: Signature, scope: _Scope) -> Formula:
    if isinstance(e, Atom):
        if e.text == "true":
            return core.TRUE
        if e.text == "false":
            return core.FALSE
        raise _fail(e, "expected a formula, got %s" % e.text)
    if not e.items:
        raise _fail(e, "empty formula")
    head = _atom(e.items[0], "formula head")
    rest = e.items[1:]
    if head == "and":
        return And(tuple(_parse_formula(x, sig, scope) for x in rest))
    if head == "or":
        return Or(tuple(_parse_formula(x, sig, scope) for x in rest))
    if head == "not":
        if len(rest) != 1:
            raise _fail(e, "not takes one argument")
        return Not(_parse_formula(rest[0], sig, scope))
    if head == "=>":
        if len(rest) < 2:
            raise _fail(e, "=> takes at least two arguments")
        parts = [_parse_formula(x, sig, scope) for x in rest]
        out = parts[-1]
        for p in reversed(parts[:-1]):
            out = Implies(p, out)
        return out
    if head == "iff":
        if len(rest) != 2:
            raise _fail(e, "iff takes two arguments")
        return Iff(_parse_formula(rest[0], sig, scope), _parse_formula(rest[1], sig, scope))
    if head == "=":
        if len(rest) != 2:
            raise _fail(e, "= takes two arguments")
        try:
            lhs = _parse_term(rest[0], sig, scope, None)
        except _AmbiguousNumeral:
            rhs = _parse_term(rest[1], sig, scope, None)
            lhs = _parse_term(rest[0], sig, scope, sort_of(rhs))
            return Eq(lhs, rhs)
        rhs = _parse_term(rest[1], sig, scope, sort_of(lhs))
        return Eq(lhs, rhs)
    if head in scope.rels:
        rv = scope.rels[head]
        if len(rest) != len(rv.arg_sorts):
            raise _fail(e, "relation variable %s expects %d arguments" % (head, len(rv.arg_sorts)))
        args = tuple(_parse_term(a, sig, scope, s) for a, s in zip(rest, rv.arg_sorts))
        return RelVarApp(rv, args)
    rsym = sig.rel_named(head, len(rest))
    if rsym is not None:
        args = tuple(_parse_term(a, sig, scope, s) for a, s in zip(rest, rsym.arg_sorts))
        return RelApp(rsym, args)
    raise _fail(e, "unknown formula head %s" % head)


def _parse_term(e: SExpr, sig: Signature, scope: _Scope, expected: Optional[Sort]) -> Term:
    if isinstance(e, Atom):
        text = e.text
        if text in scope.vars:
            return scope.vars[text]
        if text == "true":
            return core.bool_true(sig.boolean())
        if text == "false":
            return core.bool_false(sig.boolean())
        if _INT_RE.match(text) or _RAT_RE.match(text) or _DEC_RE.match(text):
            return _numeral(text, e, sig, expected)
        sym = sig.fun_named(text, 0)
        if sym is not None:
            return App(sym, ())
        raise _fail(e, "unknown term %s" % text)
    if not e.items:
        raise _fail(e, "empty term")
    head = _atom(e.items[0], "term head")
    rest = e.items[1:]
    if head == "as":
        if len(rest) != 2:
            raise _fail(e, "as takes a numeral and a sort")
        sort = _parse_sort_ref(rest[1], sig)
        text = _atom(rest[0], "numeral")
        return _numeral(text, rest[0], sig, sort)
    if head in scope.funs:
        fv = scope.funs[head]
        if len(rest) != len(fv.arg_sorts):
            raise _fail(e, "function variable %s expects %d arguments" % (head, len(fv.arg_sorts)))
        args = tuple(_parse_term(a, sig, scope, s) for a, s in zip(rest, fv.arg_sorts))
        return FApp(fv, args)
    if head in ("+", "-", "*") and len(rest) >= 2:
        arg_sort = expected if expected is not None and expected.is_arith() else None
        parts = []
        for a in rest:
            try:
                parts.append(_parse_term(a, sig, scope, arg_sort))
            except _AmbiguousNumeral:
                parts.append(a)  # retry once a sibling fixes the sort
        for p in parts:
            if not isinstance(p, (Atom, SList)):
                arg_sort = sort_of(p)
                break
        else:
            raise _AmbiguousNumeral(e)
        terms = [
            p if not isinstance(p, (Atom, SList)) else _parse_term(p, sig, scope, arg_sort)
            for p in parts
        ]
        if not arg_sort.is_arith():
            raise _fail(e, "%s applied at non-arithmetic sort %s" % (head, arg_sort.name))
        sym = FunSym(head, (arg_sort, arg_sort), arg_sort)
        out = terms[0]
        for t in terms[1:]:
            if sort_of(t) != arg_sort:
                raise _fail(e, "mixed sorts under %s" % head)
            out = App(sym, (out, t))
        return out
    if head == "-" and len(rest) == 1:
        try:
            arg = _parse_term(rest[0], sig, scope, expected)
        except _AmbiguousNumeral:
            raise _AmbiguousNumeral(e) from None
        s = sort_of(arg)
        if not s.is_arith():
            raise _fail(e, "- applied at non-arithmetic sort %s" % s.name)
        return App(FunSym("-", (s,), s), (arg,))
    sym = sig.fun_named(head, len(rest))
    if sym is not None:
        args = tuple(_parse_term(a, sig, scope, s) for a, s in zip(rest, sym.arg_sorts))
        return App(sym, args)
    raise _fail(e, "unknown term head %s" % head)


def _numeral(text: str, e: SExpr, sig: Signature, expected: Optional[Sort]) -> Num:
    if expected is not None and expected.is_arith():
        sort = expected
    else:
        arith = [s for s in sig.sorts if s.is_arith()]
        if len(arith) == 1:
            sort = arith[0]
        else:
            raise _AmbiguousNumeral(e)
    if _INT_RE.match(text):
        value: Union[int, Fraction] = int(text)
    elif _RAT_RE.match(text):
        p, q = text.split("/")
        value = Fraction(int(p), int(q))
    else:
        value = Fraction(text)
    if sort.theory == "lia":
        if isinstance(value, Fraction):
            if value.denominator != 1:
                raise _fail(e, "non-integer numeral at lia sort")
            value = int(value)
    else:
        value = Fraction(value)
    return Num(value, sort)


# Printing.  parse(print(x)) is structurally identical to x up to
# variable ids; names shared by several binders get a !vid suffix so the
# round trip stays unambiguous.

def _display_names(s: Sentence) -> dict[int, str]:
    binders: list[tuple[str, int]] = []
    for v in s.exists_fo + s.forall_fo:
        binders.append((v.name, v.vid))
    for r in s.exists_rel + s.forall_rel:
        binders.append((r.name, r.vid))
    for g in s.exists_fun + s.forall_fun:
        binders.append((g.name, g.vid))
    counts: dict[str, int] = {}
    for name, _ in binders:
        counts[name] = counts.get(name, 0) + 1
    return {
        vid: name if counts[name] == 1 else "%s!%d" % (name, vid)
        for name, vid in binders
    }


def format_term(t: Term, names: dict[int, str]) -> str:
    if isinstance(t, Var):
        return names.get(t.vid, t.name)
    if isinstance(t, Num):
        if isinstance(t.value, Fraction) and t.value.denominator != 1:
            return "%d/%d" % (t.value.numerator, t.value.denominator)
        return str(int(t.value))
    if isinstance(t, App):
        if not t.args:
            return t.sym.name
        return "(%s %s)" % (t.sym.name, " ".join(format_term(a, names) for a in t.args))
    if isinstance(t, FApp):
        head = names.get(t.fvar.vid, t.fvar.name)
        return "(%s %s)" % (head, " ".join(format_term(a, names) for a in t.args))
    raise TypeError("not a term: %r" % (t,))


def format_formula(f: Formula, names: dict[int, str]) -> str:
    if isinstance(f, TrueF):
        return "true"
    if isinstance(f, FalseF):
        return "false"
    if isinstance(f, Not):
        return "(not %s)" % format_formula(f.body, names)
    if isinstance(f, And):
        if not f.parts:
            return "true"
        return "(and %s)" % " ".join(format_formula(p, names) for p in f.parts)
    if isinstance(f, Or):
        if not f.parts:
            return "false"
        return "(or %s)" % " ".join(format_formula(p, names) for p in f.parts)
    if isinstance(f, Implies):
        return "(=> %s %s)" % (format_formula(f.lhs, names), format_formula(f.rhs, names))
    if isinstance(f, Iff):
        return "(iff %s %s)" % (format_formula(f.lhs, names), format_formula(f.rhs, names))
    if isinstance(f, Eq):
        return "(= %s %s)" % (format_term(f.lhs, names), format_term(f.rhs, names))
    if isinstance(f, RelApp):
        return "(%s %s)" % (f.sym.name, " ".join(format_term(a, names) for a in f.args))
    if isinstance(f, RelVarApp):
        head = names.get(f.rvar.vid, f.rvar.name)
        if not f.args:
            return "(%s)" % head
        return "(%s %s)" % (head, " ".join(format_term(a, names) for a in f.args))
    raise TypeError("not a formula: %r" % (f,))


def _format_binder(name: str, ty: object) -> str:
    if isinstance(ty, Sort):
        return "(%s %s)" % (name, ty.name)
    if isinstance(ty, RelVar):
        return "(%s (Rel %s))" % (name, " ".join(s.name for s in ty.arg_sorts))
    assert isinstance(ty, FunVar)
    return "(%s (-> %s %s))" % (name, " ".join(s.name for s in ty.arg_sorts), ty.result.name)


def print_sentence(s: Sentence) -> str:
    names = _display_names(s)
    ex: list[str] = []
    for v in s.exists_fo:
        ex.append(_format_binder(names[v.vid], v.sort))
    for r in s.exists_rel:
        ex.append(_format_binder(names[r.vid], r))
    for g in s.exists_fun:
        ex.append(_format_binder(names[g.vid], g))
    fa: list[str] = []
    for v in s.forall_fo:
        fa.append(_format_binder(names[v.vid], v.sort))
    for r in s.forall_rel:
        fa.append(_format_binder(names[r.vid], r))
    for g in s.forall_fun:
        fa.append(_format_binder(names[g.vid], g))
    body = format_formula(s.matrix, names)
    if fa:
        body = "(forall (%s) %s)" % (" ".join(fa), body)
    if ex:
        body = "(exists (%s) %s)" % (" ".join(ex), body)
    return body


def print_problem(sig: Signature, sentences: list[Sentence], options: Optional[dict] = None) -> str:
    """Full re-parseable problem text, used for --trace stage dumps."""
    lines: list[str] = []
    for s in sig.sorts:
        if s.kind == core.FOREGROUND:
            lines.append("(declare-sort %s :foreground)" % s.name)
        elif s.kind == core.BACKGROUND:
            lines.append("(declare-sort %s :background %s)" % (s.name, s.theory))
        elif s.name != "bool":
            lines.append("(declare-sort %s :boolean)" % s.name)
    for fsym in sig.funs:
        if fsym.arg_sorts:
            lines.append("(declare-fun %s (%s) %s)"
                         % (fsym.name, " ".join(a.name for a in fsym.arg_sorts), fsym.result.name))
        else:
            lines.append("(declare-const %s %s)" % (fsym.name, fsym.result.name))
    for key, value in (options or {}).items():
        if isinstance(value, str) and (" " in value or value == ""):
            lines.append('(set-option :%s "%s")' % (key, value))
        else:
            lines.append("(set-option :%s %s)" % (key, value))
    for sent in sentences:
        lines.append("(assert-eqsmt %s)" % print_sentence(sent))
    return "\n".join(lines) + "\n"


def alpha_equal(a: Sentence, b: Sentence) -> bool:
    """Structural equality up to variable ids (display names ignored,
    sorts and shapes compared exactly)."""
    pairing: dict[int, int] = {}

    def bind(x: int, y: int) -> bool:
        if x in pairing:
            return pairing[x] == y
        pairing[x] = y
        return True

    def eq_var(x: Var, y: Var) -> bool:
        return x.sort == y.sort and bind(x.vid, y.vid)

    def eq_term(x: Term, y: Term) -> bool:
        if type(x) is not type(y):
            return False
        if isinstance(x, Var):
            assert isinstance(y, Var)
            return x.sort == y.sort and pairing.get(x.vid) == y.vid
        if isinstance(x, Num):
            assert isinstance(y, Num)
            return x.sort == y.sort and x.value == y.value
        if isinstance(x, App):
            assert isinstance(y, App)
            return x.sym == y.sym and len(x.args) == len(y.args) and all(
                eq_term(p, q) for p, q in zip(x.args, y.args))
        assert isinstance(x, FApp) and isinstance(y, FApp)
        return pairing.get(x.fvar.vid) == y.fvar.vid and len(x.args) == len(y.args) and all(
            eq_term(p, q) for p, q in zip(x.args, y.args))

    def eq_formula(x: Formula, y: Formula) -> bool:
        if type(x) is not type(y):
            return False
        if isinstance(x, (TrueF, FalseF)):
            return True
        if isinstance(x, Not):
            assert isinstance(y, Not)
            return eq_formula(x.body, y.body)
        if isinstance(x, (And, Or)):
            assert isinstance(y, (And, Or))
            return len(x.parts) == len(y.parts) and all(
                eq_formula(p, q) for p, q in zip(x.parts, y.parts))
        if isinstance(x, (Implies, Iff)):
            assert isinstance(y, (Implies, Iff))
            return eq_formula(x.lhs, y.lhs) and eq_formula(x.rhs, y.rhs)
        if isinstance(x, Eq):
            assert isinstance(y, Eq)
            return eq_term(x.lhs, y.lhs) and eq_term(x.rhs, y.rhs)
        if isinstance(x, RelApp):
            assert isinstance(y, RelApp)
            return x.sym == y.sym and all(eq_term(p, q) for p, q in zip(x.args, y.args))
        assert isinstance(x, RelVarApp) and isinstance(y, RelVarApp)
        return pairing.get(x.rvar.vid) == y.rvar.vid and len(x.args) == len(y.args) and all(
            eq_term(p, q) for p, q in zip(x.args, y.args))

    if a.signature != b.signature:
        return False
    for xs, ys in (
        (a.exists_fo, b.exists_fo),
        (a.forall_fo, b.forall_fo),
    ):
        if len(xs) != len(ys):
            return False
        for x, y in zip(xs, ys):
            if not eq_var(x, y):
                return False
    for rxs, rys in ((a.exists_rel, b.exists_rel), (a.forall_rel, b.forall_rel)):
        if len(rxs) != len(rys):
            return False
        for x, y in zip(rxs, rys):
            if x.arg_sorts != y.arg_sorts or not bind(x.vid, y.vid):
                return False
    for gxs, gys in ((a.exists_fun, b.exists_fun), (a.forall_fun, b.forall_fun)):
        if len(gxs) != len(gys):
            return False
        for x, y in zip(gxs, gys):
            if x.arg_sorts != y.arg_sorts or x.result != y.result or not bind(x.vid, y.vid):
                return False
    return eq_formula(a.matrix, b.matrix)
