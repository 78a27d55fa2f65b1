"""Grammar-based synthesis frontend.

A synthesis problem fixes a component grammar, a maximum expression-tree
depth and a specification of the program's input/output behaviour.
encode() turns the problem into a single sentence: existential node
constants, child relations and a labeling function describe the
candidate tree, universal valuation functions assign every node a value
per unrolled call, and the matrix ties structure to meaning.  decode()
reads the program back out of a witness.

The matrix has one hostile feature: the semantics conjunction sits in
the antecedent of an implication, so its equivalent CNF multiplies out
a clause per combination of negated conjuncts.  Toy grammars survive
the distribution; realistic ones do not, so solve() falls back to a
size-ordered enumeration of grammar terms whose constant slots are
filled by an exact linear-arithmetic query per candidate.
"""

from __future__ import annotations

import itertools
import json
import re
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Iterator, Mapping, Optional, Sequence, Union

from . import arith, sexpr
from .backends import BackendRegistry, TheoryQuery
from .core import (
    BOOLEAN,
    And,
    App,
    Eq,
    FApp,
    Formula,
    FunVar,
    Implies,
    Not,
    Num,
    Or,
    RelApp,
    RelVar,
    RelVarApp,
    Sentence,
    Sort,
    Term,
    TrueF,
    FalseF,
    Iff,
    Var,
    Verdict,
    background_sort,
    boolean_sort,
    bool_false,
    bool_true,
    conj,
    disj,
    foreground_sort,
    make_signature,
    neg,
    substitute,
    theory_funs,
    theory_rels,
    validate,
)
from .pipeline import SolveReport, solve as pipeline_solve
from .transform import (
    Literal,
    TransformOptions,
    TransformResourceError,
    run_steps,
)
from .witness import Witness, parse_backend_value


class SynthError(Exception):
    pass


BRANCHING = 3
TERM, PRED = "term", "pred"

# Candidate pieces per valuation before a candidate is abandoned as too
# branchy to check cheaply; abandoning is conservative, never unsound.
PIECE_CAP = 4096
ENCODE_NODE_CAP = 400

_LABEL_RE = re.compile(r"^[A-Za-z][A-Za-z0-9_]*$")


def skeleton_paths(depth: int) -> list[str]:
    """Node paths of the full ternary skeleton: root "0", children of
    p are p0, p1, p2, down to the given depth."""
    level = ["0"]
    paths = ["0"]
    for _ in range(depth):
        level = [p + d for p in level for d in "012"]
        paths.extend(level)
    assert len(paths) == (BRANCHING ** (depth + 1) - 1) // 2
    return paths


# -- grammar ------------------------------------------------------------------


@dataclass(frozen=True)
class Operator:
    """One grammar component: a label, child slot categories, and a
    semantics template relating the node value to the child values."""

    label: str
    kind: str
    arity: int
    produces: str
    child_cats: tuple[str, ...]
    template: Formula
    value_ph: Var
    child_phs: tuple[Var, ...]
    op: Optional[str] = None
    mode: str = "sum"
    symmetric: bool = False


@dataclass(frozen=True)
class GrammarSpec:
    operators: tuple[Operator, ...]
    constant_labels: tuple[str, ...]
    input_labels: tuple[str, ...]
    max_depth: int
    value_sort: Sort

    def labels(self) -> tuple[str, ...]:
        return (tuple(o.label for o in self.operators)
                + self.input_labels + self.constant_labels)

    def operator(self, label: str) -> Operator:
        for o in self.operators:
            if o.label == label:
                return o
        raise KeyError(label)


@dataclass(frozen=True)
class SynthesisProblem:
    name: str
    grammar: GrammarSpec
    universals: tuple[Var, ...]
    valuations: int
    # per input label, one binding term per valuation (over the
    # universals and earlier valuations' root values)
    input_bindings: Mapping[str, tuple[Term, ...]]
    spec: Formula
    root_refs: tuple[Var, ...]
    stretch: bool = False


Prog = tuple  # ("input", label) | ("const", label-or-hole-index) | ("op", label, (children...))


@dataclass(frozen=True)
class Program:
    """A decoded program: the labeled tree plus synthesized constants."""

    tree: Prog
    constants: Mapping[str, object]
    problem: SynthesisProblem

    def sexpr(self) -> str:
        def go(t: Prog) -> str:
            if t[0] == "input":
                return t[1]
            if t[0] == "const":
                return str(t[1])
            return "(%s %s)" % (t[1], " ".join(go(c) for c in t[2]))
        return go(self.tree)

    def pretty(self) -> str:
        g = self.problem.grammar

        def go(t: Prog) -> str:
            if t[0] == "input":
                b = self.problem.input_bindings[t[1]][0]
                return render_term(b) if isinstance(b, Var) else t[1]
            if t[0] == "const":
                v = self.constants.get(t[1])
                return t[1] if v is None else str(v)
            o = g.operator(t[1])
            kids = [go(c) for c in t[2]]
            if o.kind == "add":
                return "(%s + %s)" % (kids[0], kids[1])
            if o.kind == "sub":
                return "(%s - %s)" % (kids[0], kids[1])
            if o.kind == "neg":
                return "-(%s)" % kids[0]
            if o.kind == "ite":
                return "ite(%s, %s, %s)" % (kids[0], kids[1], kids[2])
            if o.kind == "cmp":
                lhs = kids[0] if o.arity == 1 else "(%s %s %s)" % (
                    kids[0], "+" if o.mode == "sum" else "-", kids[1])
                return "%s %s 0" % (lhs, o.op)
            if o.kind == "bnot":
                return "not(%s)" % kids[0]
            return "(%s %s)" % (t[1], " ".join(kids))
        return go(self.tree)

    def evaluate(self, inputs: Mapping[str, object]) -> object:
        """Concrete single-valuation evaluation: every input label is
        bound directly to a value."""
        g = self.problem.grammar

        def go(t: Prog) -> object:
            if t[0] == "input":
                return inputs[t[1]]
            if t[0] == "const":
                return self.constants[t[1]]
            o = g.operator(t[1])
            if o.kind == "ite":
                return go(t[2][1]) if go(t[2][0]) == 1 else go(t[2][2])
            kids = [go(c) for c in t[2]]
            if o.kind == "add":
                return kids[0] + kids[1]
            if o.kind == "sub":
                return kids[0] - kids[1]
            if o.kind == "neg":
                return -kids[0]
            if o.kind == "bnot":
                return not kids[0]
            if o.kind == "cmp":
                s = kids[0] if o.arity == 1 else (
                    kids[0] + kids[1] if o.mode == "sum" else kids[0] - kids[1])
                ok = {"<": s < 0, "<=": s <= 0, ">": s > 0, ">=": s >= 0,
                      "=": s == 0, "!=": s != 0}[o.op]
                return 1 if ok else 0
            raise SynthError("no evaluation for kind %r" % o.kind)
        return go(self.tree)


@dataclass
class CheckReport:
    status: str  # "pass" | "fail" | "unknown"
    counterexample: Optional[Mapping[str, object]] = None
    reason: Optional[str] = None


@dataclass
class SynthReport:
    status: Verdict
    program: Optional[Program] = None
    method: str = "pipeline"
    report: Optional[SolveReport] = None
    sentence: Optional[Sentence] = None
    witness: Optional[Witness] = None
    candidates: int = 0
    notes: list[str] = field(default_factory=list)


# -- problem loading ----------------------------------------------------------


_CMP_OPS = ("<", "<=", ">", ">=", "=", "!=")


def _num(value: object, sort: Sort) -> Num:
    if sort.theory == "lia":
        return Num(int(value), sort)
    return Num(Fraction(value), sort)


def _cmp_atom(op: str, lhs: Term, sort: Sort) -> Formula:
    zero = _num(0, sort)
    if op == "=":
        return Eq(lhs, zero)
    if op == "!=":
        return Not(Eq(lhs, zero))
    sym = theory_rels(sort)[(op, 2)]
    return RelApp(sym, (lhs, zero))


def _make_operator(label: str, kind: str, sort: Sort, op: Optional[str],
                   arity: Optional[int], mode: str) -> Operator:
    bool_mode = sort.kind == BOOLEAN

    def ph(name: str) -> Var:
        return Var(name, sort)

    v = ph("v")
    if kind in ("add", "sub"):
        if bool_mode:
            raise SynthError("kind %r needs an arithmetic value sort" % kind)
        c0, c1 = ph("v0"), ph("v1")
        fn = theory_funs(sort)[("+" if kind == "add" else "-", 2)]
        return Operator(label, kind, 2, TERM, (TERM, TERM),
                        Eq(v, App(fn, (c0, c1))), v, (c0, c1),
                        symmetric=(kind == "add"))
    if kind == "neg":
        if bool_mode:
            raise SynthError("kind 'neg' needs an arithmetic value sort")
        c0 = ph("v0")
        fn = theory_funs(sort)[("-", 1)]
        return Operator(label, kind, 1, TERM, (TERM,),
                        Eq(v, App(fn, (c0,))), v, (c0,))
    if kind == "ite":
        if bool_mode:
            raise SynthError("kind 'ite' needs an arithmetic value sort")
        c0, c1, c2 = ph("v0"), ph("v1"), ph("v2")
        one, zero = _num(1, sort), _num(0, sort)
        t = conj(Implies(Eq(c0, one), Eq(v, c1)),
                 Implies(Eq(c0, zero), Eq(v, c2)))
        return Operator(label, kind, 3, TERM, (PRED, TERM, TERM),
                        t, v, (c0, c1, c2))
    if kind == "cmp":
        if bool_mode:
            raise SynthError("kind 'cmp' needs an arithmetic value sort")
        if op not in _CMP_OPS:
            raise SynthError("cmp operator %r needs op one of %s" % (label, (_CMP_OPS,)))
        n = 1 if arity is None else arity
        if n not in (1, 2):
            raise SynthError("cmp arity must be 1 or 2")
        if mode not in ("sum", "diff"):
            raise SynthError("cmp mode must be 'sum' or 'diff'")
        phs = tuple(ph("v%d" % i) for i in range(n))
        if n == 1:
            lhs: Term = phs[0]
        else:
            fn = theory_funs(sort)[("+" if mode == "sum" else "-", 2)]
            lhs = App(fn, phs)
        one, zero = _num(1, sort), _num(0, sort)
        atom = _cmp_atom(op, lhs, sort)
        t = conj(Implies(atom, Eq(v, one)), Implies(neg(atom), Eq(v, zero)))
        return Operator(label, kind, n, PRED, (TERM,) * n, t, v, phs,
                        op=op, mode=mode, symmetric=(n == 2 and mode == "sum"))
    if kind == "bnot":
        if not bool_mode:
            raise SynthError("kind 'bnot' needs the boolean value sort")
        c0 = ph("v0")
        tt, ff = bool_true(sort), bool_false(sort)
        t = conj(Implies(Eq(c0, tt), Eq(v, ff)),
                 Implies(Eq(c0, ff), Eq(v, tt)))
        return Operator(label, kind, 1, TERM, (TERM,), t, v, (c0,))
    raise SynthError("unknown operator kind %r" % kind)


def _value_sort(name: str) -> Sort:
    if name in ("Int", "Nat"):
        return background_sort(name, "lia")
    if name == "Real":
        return background_sort(name, "lra")
    if name in ("bool", "Bool"):
        return boolean_sort()
    raise SynthError("unsupported value sort %r" % name)


class _Reader:
    """Terms and formulas of the problem file: s-expressions over the
    universals, (root i) references, numerals and the value theory."""

    def __init__(self, sort: Sort, env: Mapping[str, Var],
                 roots: Sequence[Var], max_root: Optional[int] = None):
        self.sort = sort
        self.env = env
        self.roots = roots
        self.max_root = max_root

    def _fail(self, msg: str) -> SynthError:
        return SynthError(msg)

    def term(self, e: sexpr.SExpr) -> Term:
        if isinstance(e, sexpr.Atom):
            t = e.text
            if t in self.env:
                return self.env[t]
            if self.sort.kind == BOOLEAN and t in ("true", "false"):
                return (bool_true if t == "true" else bool_false)(self.sort)
            try:
                return _num(int(t) if self.sort.theory == "lia" else Fraction(t),
                            self.sort)
            except ValueError:
                raise self._fail("unknown term %r" % t) from None
        items = e.items
        if not items or not isinstance(items[0], sexpr.Atom):
            raise self._fail("bad term %s" % sexpr.write(e))
        head = items[0].text
        if head == "root":
            if len(items) != 2 or not isinstance(items[1], sexpr.Atom):
                raise self._fail("(root i) takes one index")
            i = int(items[1].text)
            if not 0 <= i < len(self.roots):
                raise self._fail("root index %d out of range" % i)
            if self.max_root is not None and i >= self.max_root:
                raise self._fail(
                    "valuation %d may only reference earlier roots" % self.max_root)
            return self.roots[i]
        args = [self.term(a) for a in items[1:]]
        if head in ("true", "false") and self.sort.kind == BOOLEAN:
            return (bool_true if head == "true" else bool_false)(self.sort)
        if head in ("+", "*") and len(args) > 2:
            fn = theory_funs(self.sort)[(head, 2)]
            acc = args[0]
            for a in args[1:]:
                acc = App(fn, (acc, a))
            return acc
        fn = theory_funs(self.sort).get((head, len(args)))
        if fn is None:
            raise self._fail("unknown function %r/%d" % (head, len(args)))
        return App(fn, tuple(args))

    def formula(self, e: sexpr.SExpr) -> Formula:
        if isinstance(e, sexpr.Atom):
            if e.text == "true":
                return TrueF()
            if e.text == "false":
                return FalseF()
            raise self._fail("bad formula %r" % e.text)
        items = e.items
        if not items or not isinstance(items[0], sexpr.Atom):
            raise self._fail("bad formula %s" % sexpr.write(e))
        head = items[0].text
        if head == "and":
            return conj(*[self.formula(a) for a in items[1:]])
        if head == "or":
            return disj(*[self.formula(a) for a in items[1:]])
        if head == "not":
            return neg(self.formula(items[1]))
        if head == "=>":
            parts = [self.formula(a) for a in items[1:]]
            f = parts[-1]
            for p in reversed(parts[:-1]):
                f = Implies(p, f)
            return f
        if head in ("<", "<=", ">", ">="):
            sym = theory_rels(self.sort).get((head, 2))
            if sym is None:
                raise self._fail("comparison %r needs an arithmetic value sort" % head)
            return RelApp(sym, (self.term(items[1]), self.term(items[2])))
        if head == "=":
            return Eq(self.term(items[1]), self.term(items[2]))
        raise self._fail("unknown formula head %r" % head)


def load_problem(source: Union[str, dict]) -> SynthesisProblem:
    """Load a problem from a JSON file path or an equivalent dict."""
    if isinstance(source, str):
        with open(source) as fh:
            data = json.load(fh)
    else:
        data = source
    try:
        name = str(data.get("name", "synthesis"))
        sort = _value_sort(str(data.get("value-sort", "Int")))
        depth = int(data["max-depth"])
        if depth < 0:
            raise SynthError("max-depth must be nonnegative")

        ops = []
        for entry in data.get("operators", []):
            label = str(entry["label"])
            ops.append(_make_operator(
                label, str(entry["kind"]), sort, entry.get("op"),
                entry.get("arity"), str(entry.get("mode", "sum"))))
        consts = tuple(str(c) for c in data.get("constants", []))

        inputs = data.get("inputs")
        if inputs is None:
            # single-input shorthand
            inputs = [{"label": data.get("input-label", "INPUT"),
                       "bindings": data.get("valuations", ["x"])}]
        universal_names = [str(u) for u in data.get("universals", ["x"])]
        uvars = tuple(Var(n, sort) for n in universal_names)
        env = {v.name: v for v in uvars}
        if len(env) != len(uvars):
            raise SynthError("universal names must be distinct")

        counts = {len(entry["bindings"]) for entry in inputs}
        if len(counts) != 1:
            raise SynthError("every input label needs one binding per valuation")
        nval = counts.pop()
        if nval < 1:
            raise SynthError("at least one valuation is required")
        roots = tuple(Var("root%d" % i, sort) for i in range(nval))

        bindings: dict[str, tuple[Term, ...]] = {}
        input_labels = []
        for entry in inputs:
            label = str(entry["label"])
            input_labels.append(label)
            terms = []
            for i, b in enumerate(entry["bindings"]):
                rd = _Reader(sort, env, roots, max_root=i)
                (e,) = sexpr.read_all(str(b))
                terms.append(rd.term(e))
            bindings[label] = tuple(terms)

        rd = _Reader(sort, env, roots)
        (se,) = sexpr.read_all(str(data["spec"]))
        spec = rd.formula(se)
    except (KeyError, ValueError, sexpr.SExprError) as e:
        raise SynthError("bad problem file: %s" % e) from None

    labels = [o.label for o in ops] + input_labels + list(consts)
    if len(set(labels)) != len(labels):
        raise SynthError("labels must be distinct")
    for label in labels:
        if not _LABEL_RE.match(label):
            raise SynthError("bad label %r" % label)
    for o in ops:
        if o.arity > BRANCHING:
            raise SynthError("operator %s arity exceeds %d" % (o.label, BRANCHING))

    grammar = GrammarSpec(tuple(ops), consts, tuple(input_labels), depth, sort)
    return SynthesisProblem(
        name=name, grammar=grammar, universals=uvars, valuations=nval,
        input_bindings=bindings, spec=spec, root_refs=roots,
        stretch=bool(data.get("stretch", False)))


# -- encoding -----------------------------------------------------------------


@dataclass(frozen=True)
class Encoding:
    """Binder map for one encode() result, recoverable from the
    sentence by the naming scheme (decode relies on this)."""

    paths: tuple[str, ...]
    nodes: Mapping[str, Var]
    label_vars: Mapping[str, Var]
    const_vars: Mapping[str, Var]
    rels: tuple[RelVar, RelVar, RelVar]
    f_label: FunVar
    gvals: tuple[FunVar, ...]
    int_labels: bool


def _encoding_of(sentence: Sentence, p: SynthesisProblem) -> Encoding:
    paths = tuple(skeleton_paths(p.grammar.max_depth))
    nodes: dict[str, Var] = {}
    label_vars: dict[str, Var] = {}
    const_vars: dict[str, Var] = {}
    labels = set(p.grammar.labels())
    for v in sentence.exists_fo:
        if v.name.startswith("n!"):
            nodes[v.name[2:]] = v
        elif v.name.startswith("c!"):
            const_vars[v.name[2:]] = v
        elif v.name in labels:
            label_vars[v.name] = v
    rels = {r.name: r for r in sentence.exists_rel}
    f_label = next(f for f in sentence.exists_fun if f.name == "f!label")
    gvals = tuple(sorted((g for g in sentence.forall_fun
                          if g.name.startswith("g!")),
                         key=lambda g: int(g.name[2:])))
    if set(nodes) != set(paths) or len(gvals) != p.valuations:
        raise SynthError("sentence does not match the problem's encoding")
    return Encoding(paths, nodes, label_vars, const_vars,
                    (rels["Left"], rels["Mid"], rels["Right"]),
                    f_label, gvals, int_labels=not label_vars)


def encode(p: SynthesisProblem, int_labels: bool = False,
           max_nodes: int = ENCODE_NODE_CAP) -> Sentence:
    """Build the synthesis sentence.

    Labels live in their own empty-theory background sort and are
    asserted pairwise distinct; with int_labels they are numerals in an
    auxiliary arithmetic sort instead, for backends without
    uninterpreted sorts.  Child relations are pinned to the skeleton in
    the well-formedness conjunct, so the semantics guards reference
    each node's actual children directly.
    """
    g = p.grammar
    paths = skeleton_paths(g.max_depth)
    if len(paths) > max_nodes:
        raise SynthError(
            "depth %d needs %d nodes, over the cap of %d"
            % (g.max_depth, len(paths), max_nodes))
    fg = foreground_sort("FG")
    vs = g.value_sort
    if int_labels:
        label_sort = background_sort("LabelCode", "lia")
    else:
        label_sort = background_sort("Label", "empty")
    if vs.name in ("FG", label_sort.name):
        raise SynthError("value sort name %r is reserved" % vs.name)
    sorts = [fg, label_sort] + ([] if vs.kind == BOOLEAN else [vs])
    sig = make_signature(sorts)

    nodes = {path: Var("n!" + path, fg) for path in paths}
    labels = g.labels()
    if int_labels:
        label_term: dict[str, Term] = {
            name: Num(i, label_sort) for i, name in enumerate(labels)}
        label_vars: dict[str, Var] = {}
    else:
        label_vars = {name: Var(name, label_sort) for name in labels}
        label_term = dict(label_vars)
    const_vars = {name: Var("c!" + name, vs) for name in g.constant_labels}
    left = RelVar("Left", (fg, fg))
    mid = RelVar("Mid", (fg, fg))
    right = RelVar("Right", (fg, fg))
    f_label = FunVar("f!label", (fg,), label_sort)
    gvals = tuple(FunVar("g!%d" % i, (fg,), vs) for i in range(p.valuations))

    def lab(path: str) -> Term:
        return FApp(f_label, (nodes[path],))

    def val(i: int, path: str) -> Term:
        return FApp(gvals[i], (nodes[path],))

    wf: list[Formula] = []
    for a, b in itertools.combinations(paths, 2):
        wf.append(Not(Eq(nodes[a], nodes[b])))
    for rel, digit in ((left, "0"), (mid, "1"), (right, "2")):
        for a in paths:
            for b in paths:
                atom = RelVarApp(rel, (nodes[a], nodes[b]))
                wf.append(atom if b == a + digit else Not(atom))
    if not int_labels:
        for a, b in itertools.combinations(labels, 2):
            wf.append(Not(Eq(label_vars[a], label_vars[b])))
    for path in paths:
        wf.append(disj(*[Eq(lab(path), label_term[name]) for name in labels]))

    sem: list[Formula] = []
    for o in g.operators:
        for path in paths:
            kids = [path + str(k) for k in range(o.arity)]
            if any(k not in nodes for k in kids):
                continue  # ops cannot fire on boundary nodes
            body = []
            for i in range(p.valuations):
                m = {o.value_ph.vid: val(i, path)}
                for slot, cp in enumerate(kids):
                    m[o.child_phs[slot].vid] = val(i, cp)
                body.append(substitute(o.template, m))
            sem.append(Implies(Eq(lab(path), label_term[o.label]), conj(*body)))
    root_map = {p.root_refs[i].vid: val(i, "0") for i in range(p.valuations)}
    for label in g.input_labels:
        for path in paths:
            body = []
            for i in range(p.valuations):
                b = substitute(Eq(val(i, path), p.input_bindings[label][i]),
                               root_map)
                body.append(b)
            sem.append(Implies(Eq(lab(path), label_term[label]), conj(*body)))
    for name in g.constant_labels:
        for path in paths:
            body = [Eq(val(i, path), const_vars[name])
                    for i in range(p.valuations)]
            sem.append(Implies(Eq(lab(path), label_term[name]), conj(*body)))

    spec = substitute(p.spec, root_map)
    matrix = conj(*wf, Implies(conj(*sem), spec))

    sentence = Sentence(
        signature=sig,
        exists_fo=tuple(nodes[path] for path in paths)
        + tuple(label_vars[name] for name in labels if name in label_vars)
        + tuple(const_vars[name] for name in g.constant_labels),
        exists_rel=(left, mid, right),
        exists_fun=(f_label,),
        forall_fo=p.universals,
        forall_fun=gvals,
        matrix=matrix,
    )
    diags = validate(sentence)
    if diags:
        raise SynthError("encoding failed validation: %s"
                         % "; ".join(str(d) for d in diags))
    return sentence


# -- decoding -----------------------------------------------------------------


def render_term(t: Term) -> str:
    if isinstance(t, Var):
        return t.name
    if isinstance(t, Num):
        return str(t.value)
    if isinstance(t, App):
        if not t.args:
            return t.sym.name
        return "(%s %s)" % (t.sym.name, " ".join(render_term(a) for a in t.args))
    raise SynthError("cannot render %r" % (t,))


def decode(w: Witness, p: SynthesisProblem, sentence: Sentence) -> Program:
    """Read the program out of a witness for the encoded sentence.

    The witness is vid-keyed, so the sentence whose solve produced it
    is required to identify the binders."""
    enc = _encoding_of(sentence, p)
    g = p.grammar

    elt_of = {path: w.fo_values[enc.nodes[path].vid] for path in enc.paths}
    if enc.int_labels:
        names = list(g.labels())
        label_of_value: dict[object, str] = {i: n for i, n in enumerate(names)}
    else:
        label_of_value = {}
        for name, v in enc.label_vars.items():
            label_of_value[w.fo_values[v.vid]] = name
    ftab = w.fun_tables.get(enc.f_label.vid, {})
    rel_sets = [w.rel_sets.get(r.vid, frozenset()) for r in enc.rels]
    constants = {name: w.fo_values[v.vid] for name, v in enc.const_vars.items()}

    path_of_elt = {}
    for path, e in elt_of.items():
        if e in path_of_elt:
            raise SynthError("nodes are not distinct in the witness")
        path_of_elt[e] = path

    def child(elt: object, slot: int) -> object:
        hits = [b for (a, b) in rel_sets[slot] if a == elt]
        if len(hits) != 1:
            raise SynthError(
                "witness child relation %d is not tree-shaped at %r"
                % (slot, path_of_elt.get(elt)))
        return hits[0]

    def walk(elt: object, depth: int) -> Prog:
        if depth > g.max_depth:
            raise SynthError("witness tree exceeds the depth bound")
        lv = ftab.get((elt,))
        if lv is None or lv not in label_of_value:
            raise SynthError("node %r has no known label" % path_of_elt.get(elt))
        name = label_of_value[lv]
        if name in g.input_labels:
            return ("input", name)
        if name in g.constant_labels:
            return ("const", name)
        o = g.operator(name)
        kids = tuple(walk(child(elt, s), depth + 1) for s in range(o.arity))
        return ("op", name, kids)

    tree = walk(elt_of["0"], 0)
    return Program(tree, constants, p)


# -- piecewise evaluation -----------------------------------------------------

Piece = tuple  # (guards: tuple[Formula, ...], value: Term)


class _PieceBudget(Exception):
    pass


def _cross(parts: Sequence[Sequence[Piece]], cap: int) -> Iterator[tuple]:
    total = 1
    for p in parts:
        total *= len(p)
        if total > cap:
            raise _PieceBudget()
    return itertools.product(*parts)


def _num_eq(t: Term, k: int) -> bool:
    return isinstance(t, Num) and t.value == k


def _op_pieces(o: Operator, kids: Sequence[Sequence[Piece]], sort: Sort,
               cap: int) -> list[Piece]:
    out: list[Piece] = []
    if o.kind == "ite":
        # predicate children carry literal 0/1 values with the
        # condition already in the guard, so the branch is static
        for cg, cv in kids[0]:
            if _num_eq(cv, 1):
                for bg, bv in kids[1]:
                    out.append((cg + bg, bv))
            elif _num_eq(cv, 0):
                for bg, bv in kids[2]:
                    out.append((cg + bg, bv))
            else:
                raise SynthError("ite condition is not a predicate")
            if len(out) > cap:
                raise _PieceBudget()
        return out
    if o.kind == "cmp":
        one, zero = _num(1, sort), _num(0, sort)
        for combo in _cross(kids, cap):
            guards = tuple(g for gs, _ in combo for g in gs)
            vals = [v for _, v in combo]
            lhs = vals[0]
            if o.arity == 2:
                fn = theory_funs(sort)[("+" if o.mode == "sum" else "-", 2)]
                lhs = App(fn, (vals[0], vals[1]))
            atom = _cmp_atom(o.op, lhs, sort)
            out.append((guards + (atom,), one))
            out.append((guards + (neg(atom),), zero))
            if len(out) > cap:
                raise _PieceBudget()
        return out
    if o.kind == "bnot":
        # fork on the child's truth value; the two cases are exhaustive
        # over the two-element boolean sort
        tt, ff = bool_true(sort), bool_false(sort)
        for cg, cv in kids[0]:
            out.append((cg + (Eq(cv, tt),), ff))
            out.append((cg + (Eq(cv, ff),), tt))
            if len(out) > cap:
                raise _PieceBudget()
        return out
    for combo in _cross(kids, cap):
        guards = tuple(g for gs, _ in combo for g in gs)
        vals = [v for _, v in combo]
        if o.kind == "add":
            value: Term = App(theory_funs(sort)[("+", 2)], (vals[0], vals[1]))
        elif o.kind == "sub":
            value = App(theory_funs(sort)[("-", 2)], (vals[0], vals[1]))
        elif o.kind == "neg":
            value = App(theory_funs(sort)[("-", 1)], (vals[0],))
        else:
            raise SynthError("kind %r has no piecewise form" % o.kind)
        out.append((guards, value))
        if len(out) > cap:
            raise _PieceBudget()
    return out


def _term_pieces(t: Term, roots: Sequence[Sequence[Piece]],
                 root_refs: Sequence[Var], cap: int) -> list[Piece]:
    """Pieces of a binding/spec term: root references expand to the
    referenced valuation's root pieces."""
    for i, r in enumerate(root_refs):
        if isinstance(t, Var) and t.vid == r.vid:
            return list(roots[i])
    if isinstance(t, (Var, Num)):
        return [((), t)]
    if isinstance(t, App):
        kid_pieces = [_term_pieces(a, roots, root_refs, cap) for a in t.args]
        out = []
        for combo in _cross(kid_pieces, cap):
            guards = tuple(g for gs, _ in combo for g in gs)
            out.append((guards, App(t.sym, tuple(v for _, v in combo))))
        return out
    raise SynthError("cannot take pieces of %r" % (t,))


def _prog_pieces(prog: Prog, inputs: Mapping[str, Sequence[Piece]],
                 holes: Mapping[object, Term], g: GrammarSpec,
                 cap: int) -> list[Piece]:
    if prog[0] == "input":
        return list(inputs[prog[1]])
    if prog[0] == "const":
        return [((), holes[prog[1]])]
    o = g.operator(prog[1])
    kids = [_prog_pieces(c, inputs, holes, g, cap) for c in prog[2]]
    return _op_pieces(o, kids, g.value_sort, cap)


def _valuation_roots(prog: Prog, p: SynthesisProblem,
                     holes: Mapping[object, Term],
                     cap: int = PIECE_CAP) -> list[list[Piece]]:
    roots: list[list[Piece]] = []
    for i in range(p.valuations):
        inputs = {
            label: _term_pieces(p.input_bindings[label][i], roots,
                                p.root_refs, cap)
            for label in p.grammar.input_labels}
        roots.append(_prog_pieces(prog, inputs, holes, p.grammar, cap))
    return roots


def _spec_with_pieces(p: SynthesisProblem, roots: Sequence[Sequence[Piece]],
                      cap: int = PIECE_CAP) -> Formula:
    """Replace every atom that mentions a root reference by the
    conjunction, over piece combinations, of guard => atom-instance.
    Pieces cover all inputs, so the rewrite is pointwise equivalent and
    safe under negation."""
    ref_vids = {r.vid for r in p.root_refs}

    def has_ref(t: Term) -> bool:
        if isinstance(t, Var):
            return t.vid in ref_vids
        if isinstance(t, App):
            return any(has_ref(a) for a in t.args)
        return False

    def on_atom(a: Formula) -> Formula:
        if isinstance(a, (TrueF, FalseF)):
            return a
        terms = a.args if isinstance(a, RelApp) else (a.lhs, a.rhs)
        if not any(has_ref(t) for t in terms):
            return a
        arg_pieces = [_term_pieces(t, roots, p.root_refs, cap) for t in terms]
        parts = []
        for combo in _cross(arg_pieces, cap):
            guards = tuple(g for gs, _ in combo for g in gs)
            vals = tuple(v for _, v in combo)
            if isinstance(a, RelApp):
                inst: Formula = RelApp(a.sym, vals)
            else:
                inst = Eq(vals[0], vals[1])
            parts.append(Implies(conj(*guards), inst))
        return conj(*parts)

    def go(f: Formula) -> Formula:
        if isinstance(f, (TrueF, FalseF)):
            return f
        if isinstance(f, Not):
            return Not(go(f.body))
        if isinstance(f, And):
            return conj(*[go(x) for x in f.parts])
        if isinstance(f, Or):
            return disj(*[go(x) for x in f.parts])
        if isinstance(f, Implies):
            return Implies(go(f.lhs), go(f.rhs))
        if isinstance(f, Iff):
            return Iff(go(f.lhs), go(f.rhs))
        if isinstance(f, RelVarApp):
            raise SynthError("relation variables cannot appear in a spec")
        return on_atom(f)

    return go(p.spec)


# -- formula to linear-arithmetic translation ---------------------------------


def _to_lin(t: Term, name_of: Mapping[int, str]) -> arith.Lin:
    if isinstance(t, Var):
        n = name_of.get(t.vid)
        if n is None:
            raise SynthError("unbound variable %r in arithmetic check" % t.name)
        return arith.lin({n: 1})
    if isinstance(t, Num):
        return arith.lin(const=Fraction(t.value))
    if isinstance(t, App):
        args = [_to_lin(a, name_of) for a in t.args]
        if t.sym.name == "+":
            return args[0].add(args[1])
        if t.sym.name == "-" and len(args) == 1:
            return args[0].scale(-1)
        if t.sym.name == "-":
            return args[0].sub(args[1])
        if t.sym.name == "*":
            if not args[0].coeffs:
                return args[1].scale(args[0].const)
            if not args[1].coeffs:
                return args[0].scale(args[1].const)
            raise SynthError("nonlinear product in arithmetic check")
    raise SynthError("cannot linearize %r" % (t,))


def _to_arith(f: Formula, name_of: Mapping[int, str], int_mode: bool) -> tuple:
    if isinstance(f, TrueF):
        return arith.TRUE_A
    if isinstance(f, FalseF):
        return arith.FALSE_A
    if isinstance(f, Not):
        return arith.a_neg(_to_arith(f.body, name_of, int_mode), int_mode)
    if isinstance(f, And):
        return arith.a_and(_to_arith(x, name_of, int_mode) for x in f.parts)
    if isinstance(f, Or):
        return arith.a_or(_to_arith(x, name_of, int_mode) for x in f.parts)
    if isinstance(f, Implies):
        return arith.a_or((
            arith.a_neg(_to_arith(f.lhs, name_of, int_mode), int_mode),
            _to_arith(f.rhs, name_of, int_mode)))
    if isinstance(f, Iff):
        a = _to_arith(f.lhs, name_of, int_mode)
        b = _to_arith(f.rhs, name_of, int_mode)
        return arith.a_or((
            arith.a_and((a, b)),
            arith.a_and((arith.a_neg(a, int_mode), arith.a_neg(b, int_mode)))))
    if isinstance(f, Eq):
        l = _to_lin(f.lhs, name_of).sub(_to_lin(f.rhs, name_of))
        return arith.a_eq(l, int_mode)
    if isinstance(f, RelApp):
        l = _to_lin(f.args[0], name_of).sub(_to_lin(f.args[1], name_of))
        if f.sym.name == "<":
            return arith.a_lt(l, int_mode)
        if f.sym.name == "<=":
            return arith.a_le(l, int_mode)
        if f.sym.name == ">":
            return arith.a_lt(l.scale(-1), int_mode)
        if f.sym.name == ">=":
            return arith.a_le(l.scale(-1), int_mode)
    raise SynthError("cannot translate %r to arithmetic" % (f,))


# -- candidate enumeration ----------------------------------------------------


def enumerate_candidates(g: GrammarSpec) -> Iterator[Prog]:
    """Grammar terms in ascending node-count order.

    Constant leaves come out as ("const", k) with hole indices numbered
    by first occurrence; symmetric binary operators only produce
    ordered child pairs, and both conventions together keep the stream
    free of trivially equivalent duplicates."""
    max_size = (BRANCHING ** (g.max_depth + 1) - 1) // 2
    ops_by_cat: dict[str, list[Operator]] = {TERM: [], PRED: []}
    for o in g.operators:
        ops_by_cat[o.produces].append(o)

    @lru_cache(maxsize=None)
    def gen(cat: str, height: int, size: int) -> tuple[Prog, ...]:
        out: list[Prog] = []
        if size == 1 and cat == TERM:
            for label in g.input_labels:
                out.append(("input", label))
            if g.constant_labels:
                out.append(("const", None))
        if height == 0:
            return tuple(out)
        for o in ops_by_cat[cat]:
            if size - 1 < o.arity:
                continue
            for split in _splits(size - 1, o.arity):
                for kids in itertools.product(*[
                        gen(o.child_cats[s], height - 1, split[s])
                        for s in range(o.arity)]):
                    if o.symmetric and o.arity == 2 and kids[0] > kids[1]:
                        continue
                    out.append(("op", o.label, kids))
        return tuple(out)

    for size in range(1, max_size + 1):
        for t in gen(TERM, g.max_depth, size):
            yield _number_holes(t)


def _splits(total: int, parts: int) -> Iterator[tuple[int, ...]]:
    if parts == 1:
        yield (total,)
        return
    for first in range(1, total - parts + 2):
        for rest in _splits(total - first, parts - 1):
            yield (first,) + rest


def _number_holes(t: Prog) -> Prog:
    counter = itertools.count()

    def go(x: Prog) -> Prog:
        if x[0] == "const":
            return ("const", next(counter))
        if x[0] == "op":
            return ("op", x[1], tuple(go(c) for c in x[2]))
        return x

    return go(t)


def _hole_ids(t: Prog) -> list[int]:
    if t[0] == "const":
        return [t[1]]
    if t[0] == "op":
        return [h for c in t[2] for h in _hole_ids(c)]
    return []


def _fill_holes(t: Prog, names: Mapping[int, str]) -> Prog:
    if t[0] == "const":
        return ("const", names[t[1]])
    if t[0] == "op":
        return ("op", t[1], tuple(_fill_holes(c, names) for c in t[2]))
    return t


def _check_candidate(prog: Prog, p: SynthesisProblem
                     ) -> Optional[dict[int, object]]:
    """Fill the candidate's constant holes, or return None.

    The candidate is correct for hole values c iff for all inputs every
    piece guard implies the spec instance, which is one exists-forall
    linear query."""
    vs = p.grammar.value_sort
    int_mode = vs.theory == "lia"
    hole_ids = _hole_ids(prog)
    hole_vars = {h: Var("hole%d" % h, vs) for h in hole_ids}
    holes: Mapping[object, Term] = dict(hole_vars)
    roots = _valuation_roots(prog, p, holes)
    spec = _spec_with_pieces(p, roots)
    name_of = {v.vid: "h%d" % h for h, v in hole_vars.items()}
    name_of.update({u.vid: "u!" + u.name for u in p.universals})
    matrix = _to_arith(spec, name_of, int_mode)
    verdict, model = arith.solve_ea(
        ["h%d" % h for h in hole_ids],
        ["u!" + u.name for u in p.universals],
        matrix, int_mode, want_model=True)
    if verdict != "sat":
        return None
    assert model is not None
    out: dict[int, object] = {}
    for h in hole_ids:
        v = model.get("h%d" % h, 0)
        out[h] = int(v) if int_mode else Fraction(v)
    return out


# -- program checking ---------------------------------------------------------


def _dnf_cubes(f: Formula, cap: int) -> list[tuple[Literal, ...]]:
    """Cubes of f in negation normal form.  CNF would be exponential
    here (f is the negation of a conjunction of implications), but the
    cubes stay near-linear and a satisfiability question splits over
    them."""

    def go(g: Formula, sign: bool) -> list[tuple[Literal, ...]]:
        if isinstance(g, TrueF):
            return [()] if sign else []
        if isinstance(g, FalseF):
            return [] if sign else [()]
        if isinstance(g, Not):
            return go(g.body, not sign)
        if isinstance(g, Implies):
            return go(Or((Not(g.lhs), g.rhs)), sign)
        if isinstance(g, Iff):
            a, b = g.lhs, g.rhs
            both = And((a, b))
            neither = And((Not(a), Not(b)))
            return go(Or((both, neither)), sign)
        if isinstance(g, (And, Or)):
            conjunctive = isinstance(g, And) == sign
            parts = [go(x, sign) for x in g.parts]
            if conjunctive:
                out: list[tuple[Literal, ...]] = [()]
                for alts in parts:
                    out = [c + d for c in out for d in alts]
                    if len(out) > cap:
                        raise _PieceBudget()
                return out
            merged = [c for alts in parts for c in alts]
            if len(merged) > cap:
                raise _PieceBudget()
            return merged
        return [(Literal(not sign, g),)]

    return go(f, True)


def check_program(program: Program, p: SynthesisProblem,
                  registry: Optional[BackendRegistry] = None) -> CheckReport:
    """Ask a backend whether any input violates the spec for this
    program; pass means the negated instantiated spec is unsatisfiable.
    The negation is queried cube by cube so no CNF blowup occurs."""
    registry = registry or BackendRegistry()
    vs = p.grammar.value_sort
    holes: dict[object, Term] = {}
    for name in p.grammar.constant_labels:
        if name in program.constants:
            v = program.constants[name]
            holes[name] = (bool_true(vs) if v is True else
                           bool_false(vs) if v is False else _num(v, vs))
    try:
        roots = _valuation_roots(program.tree, p, holes)
        spec = _spec_with_pieces(p, roots)
        cubes = _dnf_cubes(neg(spec), PIECE_CAP)
    except _PieceBudget:
        return CheckReport("unknown", reason="piece budget exceeded")
    unknown: Optional[str] = None
    for cube in cubes:
        q = TheoryQuery(sort=vs, exists=p.universals, forall=(),
                        clauses=tuple((lit,) for lit in cube))
        res = registry.solve(q)
        if res.verdict == Verdict.SAT:
            cex = None
            if res.model is not None:
                cex = {u.name: parse_backend_value(res.model.values.get(u.vid))
                       for u in p.universals}
            return CheckReport("fail", counterexample=cex)
        if res.verdict == Verdict.UNKNOWN and unknown is None:
            unknown = res.reason
    if unknown is not None:
        return CheckReport("unknown", reason=unknown)
    return CheckReport("pass")


# -- witness construction for enumerated programs -----------------------------


def _witness_for(prog: Prog, constants: Mapping[str, object],
                 p: SynthesisProblem, sentence: Sentence) -> Witness:
    """A witness for the encoded sentence, read off a concrete program:
    nodes are skeleton indices, reachable nodes take the program's
    labels and every unreachable node is labeled as an input leaf."""
    enc = _encoding_of(sentence, p)
    g = p.grammar
    idx = {path: i for i, path in enumerate(enc.paths)}
    labeling: dict[str, str] = {}

    def place(t: Prog, path: str) -> None:
        if t[0] == "input":
            labeling[path] = t[1]
        elif t[0] == "const":
            labeling[path] = t[1]
        else:
            labeling[path] = t[1]
            for s, c in enumerate(t[2]):
                place(c, path + str(s))

    place(prog, "0")
    # unreachable nodes still need a label for the totality conjunct;
    # any leaf label keeps their semantics constraints satisfiable
    default = (g.input_labels + g.constant_labels + g.labels())[0]
    if enc.int_labels:
        codes = {name: i for i, name in enumerate(g.labels())}
        label_value = lambda name: codes[name]
        fo_labels: dict[int, object] = {}
    else:
        label_value = lambda name: name
        fo_labels = {enc.label_vars[name].vid: name for name in g.labels()}

    fo_values: dict[int, object] = {
        enc.nodes[path].vid: idx[path] for path in enc.paths}
    fo_values.update(fo_labels)
    zero = 0 if g.value_sort.theory == "lia" else Fraction(0)
    for name, v in enc.const_vars.items():
        val = constants.get(name, zero)
        fo_values[v.vid] = val
    ftab = {(idx[path],): label_value(labeling.get(path, default))
            for path in enc.paths}
    rel_sets = {}
    for slot, rv in enumerate(enc.rels):
        pairs = {(idx[a], idx[a + str(slot)])
                 for a in enc.paths if a + str(slot) in idx}
        rel_sets[rv.vid] = frozenset(pairs)
    return Witness(
        universe=tuple(range(len(enc.paths))),
        fo_values=fo_values,
        fun_tables={enc.f_label.vid: ftab},
        rel_sets=rel_sets,
    )


# -- solving ------------------------------------------------------------------


def solve(p: SynthesisProblem,
          registry: Optional[BackendRegistry] = None,
          strategy: str = "auto",
          transform_opts: Optional[TransformOptions] = None,
          trace_dir: Optional[str] = None,
          max_candidates: int = 200_000,
          int_labels: bool = False) -> SynthReport:
    """Synthesize a program for p.

    The faithful route encodes the whole search as one sentence and
    runs it through the pipeline.  When the transform or decomposition
    blows a resource budget (the expected outcome beyond toy grammars),
    the finite-label route enumerates grammar terms in size order,
    fills constant holes per candidate by an exact linear query, and
    certifies the winner against the backend.
    """
    if strategy not in ("auto", "pipeline", "enumeration"):
        raise ValueError("unknown strategy %r" % strategy)
    registry = registry or BackendRegistry()
    sentence = encode(p, int_labels=int_labels)
    notes: list[str] = []
    if transform_opts is None:
        # every application in the encoding is over existential node
        # variables, so pure substitution applies; unit pruning lets
        # the well-formedness facts cancel the semantics case split
        transform_opts = TransformOptions(substitute_pure=True,
                                          prune_by_units=True)

    if strategy in ("auto", "pipeline"):
        feasible = True
        try:
            run_steps(sentence, transform_opts or TransformOptions())
        except TransformResourceError as e:
            feasible = False
            notes.append("pipeline route gave up: %s" % e)
            if strategy == "pipeline":
                return SynthReport(Verdict.UNKNOWN, method="pipeline",
                                   sentence=sentence, notes=notes)
        if feasible:
            report = pipeline_solve(sentence, registry,
                                    transform_opts=transform_opts,
                                    trace_dir=trace_dir)
            if report.verdict == Verdict.SAT:
                assert report.witness is not None
                program = decode(report.witness, p, sentence)
                return SynthReport(Verdict.SAT, program=program,
                                   method="pipeline", report=report,
                                   sentence=sentence, witness=report.witness,
                                   notes=notes)
            if report.verdict == Verdict.UNSAT or strategy == "pipeline":
                return SynthReport(report.verdict, method="pipeline",
                                   report=report, sentence=sentence,
                                   notes=notes)
            notes.append("pipeline route inconclusive: %s" % report.reason)

    if p.grammar.value_sort.kind == BOOLEAN:
        notes.append("enumeration route needs an arithmetic value sort")
        return SynthReport(Verdict.UNKNOWN, sentence=sentence, notes=notes)

    tried = 0
    skipped = 0
    for cand in enumerate_candidates(p.grammar):
        if tried >= max_candidates:
            notes.append("candidate cap reached at %d" % tried)
            skipped += 1
            break
        tried += 1
        try:
            holes = _check_candidate(cand, p)
        except (_PieceBudget, arith.ArithError):
            skipped += 1
            continue
        if holes is None:
            continue
        values = sorted(set(holes.values()), key=str)
        if len(values) > max(1, len(p.grammar.constant_labels)):
            skipped += 1
            continue
        label_of = {v: p.grammar.constant_labels[i]
                    for i, v in enumerate(values)}
        names = {h: label_of[v] for h, v in holes.items()}
        constants = {label_of[v]: v for v in values}
        program = Program(_fill_holes(cand, names), constants, p)
        check = check_program(program, p, registry)
        if check.status == "fail":
            # the internal query said yes and the backend says no;
            # distrust the candidate rather than the disagreement
            notes.append("certification refuted candidate %s" % program.sexpr())
            skipped += 1
            continue
        if check.status == "unknown":
            notes.append("certification unavailable: %s" % check.reason)
        witness = _witness_for(program.tree, constants, p, sentence)
        return SynthReport(Verdict.SAT, program=program, method="enumeration",
                           sentence=sentence, witness=witness,
                           candidates=tried, notes=notes)
    if not skipped:
        notes.append("every grammar term up to the bound was refuted")
    return SynthReport(Verdict.UNKNOWN, method="enumeration",
                       sentence=sentence, candidates=tried, notes=notes)
