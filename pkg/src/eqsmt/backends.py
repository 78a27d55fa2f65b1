"""Per-sort exists*-forall* deciders.

Internal deciders cover the foreground sort (empty theory: finite
search up to the small-model bound), the boolean sort, and any
background sort declared with the empty theory.  Arithmetic sorts go to
an external SMT-LIB 2 solver over stdin/stdout, one subprocess per
query, no incremental solving.

External model values are kept verbatim as backend literals; only the
synthesis decoder interprets them, and only for theories it knows.
"""

from __future__ import annotations

import hashlib
import itertools
import shlex
import subprocess
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Optional

from . import sexpr
from .core import (
    App,
    BACKGROUND,
    BOOLEAN,
    Eq,
    FOREGROUND,
    Num,
    RelApp,
    Sort,
    Term,
    Var,
    Verdict,
)
from .transform import Literal

LOGIC_BY_THEORY = {"lia": "LIA", "lra": "LRA", "nra": "NRA"}


@dataclass(frozen=True)
class TheoryQuery:
    """Single-sorted exists*-forall* conjunction of clause disjunctions.

    Every variable and every atom is of `sort`; decompose guarantees
    this by construction and the deciders re-check what they rely on.
    """

    sort: Sort
    exists: tuple[Var, ...]
    forall: tuple[Var, ...]
    clauses: tuple[tuple[Literal, ...], ...]


@dataclass
class SortModel:
    sort: Sort
    vars: tuple[Var, ...]
    values: dict[int, object]  # vid -> element; external: literal string

    def named(self) -> dict[str, object]:
        return {v.name: self.values[v.vid] for v in self.vars if v.vid in self.values}


@dataclass
class BackendResult:
    verdict: Verdict
    model: Optional[SortModel] = None
    reason: Optional[str] = None
    transcript: Optional[str] = None


@dataclass(frozen=True)
class BackendDescriptor:
    theory_id: str
    kind: str  # "internal-fg" | "internal-bool" | "external"
    command: Optional[str] = None
    logic: Optional[str] = None
    timeout: float = 60.0
    supports_models: bool = True


def _eval_eq_literal(lit: Literal, env: dict[int, object]) -> bool:
    atom = lit.atom
    assert isinstance(atom, Eq)
    lhs = _eval_finite_term(atom.lhs, env)
    rhs = _eval_finite_term(atom.rhs, env)
    return (lhs == rhs) != lit.neg


def _eval_finite_term(t: Term, env: dict[int, object]) -> object:
    if isinstance(t, Var):
        return env[t.vid]
    if isinstance(t, App) and not t.args and t.sym.name in ("true", "false"):
        return t.sym.name == "true"
    raise ValueError("unsupported term in finite query: %r" % (t,))


def _check_finite_shape(q: TheoryQuery, allow_bool_consts: bool) -> None:
    for clause in q.clauses:
        for lit in clause:
            if not isinstance(lit.atom, Eq):
                raise ValueError("finite decider expects equality atoms, got %r" % (lit.atom,))
            for side in (lit.atom.lhs, lit.atom.rhs):
                if isinstance(side, Var):
                    continue
                if allow_bool_consts and isinstance(side, App) and not side.args \
                        and side.sym.name in ("true", "false"):
                    continue
                raise ValueError("finite decider expects variables, got %r" % (side,))


def fg_clause_valid(clause: tuple[Literal, ...], env: dict[int, object],
                     universal: set[int], universe: list) -> bool:
    """Does the clause hold for every universal assignment?  Universals
    outside the clause cannot affect it, so only the clause's own ones
    are enumerated; clause width bounds the exponent."""
    own: list[int] = []
    for l in clause:
        for side in (l.atom.lhs, l.atom.rhs):
            if isinstance(side, Var) and side.vid in universal and side.vid not in own:
                own.append(side.vid)
    for ua in itertools.product(universe, repeat=len(own)):
        env2 = dict(env)
        env2.update(zip(own, ua))
        if not any(_eval_eq_literal(l, env2) for l in clause):
            return False
    return True


def solve_foreground(q: TheoryQuery) -> BackendResult:
    """Finite search for the empty theory.  Universe sizes run from 1
    to max(1, number of existentials); within a size, existential
    assignments are enumerated and the universal side is discharged
    clause by clause.  Never returns UNKNOWN."""
    _check_finite_shape(q, allow_bool_consts=False)
    universal = {v.vid for v in q.forall}
    top = max(1, len(q.exists))
    for size in range(1, top + 1):
        universe = list(range(size))
        for ex in itertools.product(universe, repeat=len(q.exists)):
            env = {v.vid: val for v, val in zip(q.exists, ex)}
            if all(fg_clause_valid(c, env, universal, universe) for c in q.clauses):
                model = SortModel(sort=q.sort, vars=q.exists, values=env)
                return BackendResult(Verdict.SAT, model)
    return BackendResult(Verdict.UNSAT)


def _bool_side(t: Term, env: dict[int, object], universal: set[int]):
    """(kind, payload): ("const", b) or ("uvar", vid)."""
    if isinstance(t, Var):
        if t.vid in universal:
            return ("uvar", t.vid)
        return ("const", env[t.vid])
    if isinstance(t, App) and not t.args and t.sym.name in ("true", "false"):
        return ("const", t.sym.name == "true")
    raise ValueError("unsupported term in finite query: %r" % (t,))


def bool_clause_valid(clause: tuple[Literal, ...], env: dict[int, object],
                       universal: set[int]) -> bool:
    """Does the clause hold for every assignment of its universal
    variables, existentials fixed by env?

    Valid iff no universal assignment falsifies every literal.  A
    falsifying assignment must give each literal's universal sides the
    unique combination making it false, which is a system of forced
    values and parity links between universal variables; the clause is
    valid exactly when that system is inconsistent (or some literal is
    already true without universals).
    """
    forced: dict[int, bool] = {}
    # union-find with parity: parent + relative polarity to parent
    parent: dict[int, tuple[int, bool]] = {}

    def find(v: int) -> tuple[int, bool]:
        p, pol = parent.setdefault(v, (v, False))
        if p == v:
            return p, pol
        root, rpol = find(p)
        parent[v] = (root, pol ^ rpol)
        return root, pol ^ rpol

    def link(a: int, b: int, differ: bool) -> bool:
        # returns False on contradiction
        ra, pa = find(a)
        rb, pb = find(b)
        if ra == rb:
            return (pa ^ pb) == differ
        parent[ra] = (rb, pa ^ pb ^ differ)
        if ra in forced:
            val = forced.pop(ra)
            return fix(a, val if not pa else (not val))  # re-anchor through root
        return True

    def fix(v: int, val: bool) -> bool:
        r, pol = find(v)
        want = val ^ pol
        if r in forced:
            return forced[r] == want
        forced[r] = want
        return True

    consistent = True
    for lit in clause:
        atom = lit.atom
        assert isinstance(atom, Eq)
        lhs = _bool_side(atom.lhs, env, universal)
        rhs = _bool_side(atom.rhs, env, universal)
        if lhs[0] == "const" and rhs[0] == "const":
            value = (lhs[1] == rhs[1]) != lit.neg
            if value:
                return True  # true regardless of universals
            continue
        # to falsify: equality result must equal lit.neg
        if lhs[0] == "const" or rhs[0] == "const":
            uvid = rhs[1] if lhs[0] == "const" else lhs[1]
            cval = lhs[1] if lhs[0] == "const" else rhs[1]
            # (u = c) must be lit.neg: u := c iff lit.neg
            consistent = fix(uvid, bool(cval) if lit.neg else (not cval))
        else:
            # (u = u') must be lit.neg: differ unless lit.neg
            consistent = link(lhs[1], rhs[1], differ=not lit.neg)
        if not consistent:
            return True  # cannot falsify all literals at once
    return False  # a falsifying universal assignment exists


def solve_bool(q: TheoryQuery) -> BackendResult:
    """Complete check over {true, false}.  Unit clauses are propagated
    to a fixpoint first (over a two-element sort even a negated unit
    forces a value), then only the undetermined existentials still
    occurring in residual clauses are enumerated; the universal side of
    each clause is discharged analytically per clause.  Never returns
    UNKNOWN."""
    _check_finite_shape(q, allow_bool_consts=True)
    universal = {v.vid for v in q.forall}
    env: dict[int, object] = {}

    def side(t: Term):
        if isinstance(t, Var):
            if t.vid in universal:
                return ("u", t.vid)
            if t.vid in env:
                return ("c", env[t.vid])
            return ("e", t.vid)
        return ("c", t.sym.name == "true")

    while True:
        residual: list[tuple[Literal, ...]] = []
        for clause in q.clauses:
            lits: list[Literal] = []
            satisfied = False
            for lit in clause:
                a, b = side(lit.atom.lhs), side(lit.atom.rhs)
                if a[0] == "c" and b[0] == "c":
                    if (a[1] == b[1]) != lit.neg:
                        satisfied = True
                        break
                    continue  # literal already false, drop it
                lits.append(lit)
            if satisfied:
                continue
            if not lits:
                return BackendResult(Verdict.UNSAT)
            residual.append(tuple(lits))
        forced = None
        for lits in residual:
            if len(lits) != 1:
                continue
            lit = lits[0]
            a, b = side(lit.atom.lhs), side(lit.atom.rhs)
            if a[0] == "e" and b[0] == "c":
                forced = (a[1], b[1] != lit.neg)
            elif b[0] == "e" and a[0] == "c":
                forced = (b[1], a[1] != lit.neg)
            if forced is not None:
                break
        if forced is None:
            break
        env[forced[0]] = forced[1]

    open_vids = {
        s[1]
        for clause in residual for lit in clause
        for s in (side(lit.atom.lhs), side(lit.atom.rhs)) if s[0] == "e"}
    free = [v for v in q.exists if v.vid in open_vids]
    for ex in itertools.product([False, True], repeat=len(free)):
        env2 = dict(env)
        env2.update({v.vid: val for v, val in zip(free, ex)})
        if all(bool_clause_valid(c, env2, universal) for c in residual):
            values = {v.vid: env2.get(v.vid, False) for v in q.exists}
            return BackendResult(Verdict.SAT, SortModel(q.sort, q.exists, values))
    return BackendResult(Verdict.UNSAT)


def _smt_sort_name(sort: Sort) -> str:
    if sort.theory == "lia":
        return "Int"
    if sort.theory in ("lra", "nra"):
        return "Real"
    raise ValueError("no SMT-LIB rendering for sort %s" % sort.name)


def _sanitize(name: str) -> str:
    out = "".join(c if c.isalnum() or c == "_" else "_" for c in name)
    return out if out and not out[0].isdigit() else "s" + out


def _render_num(value, real: bool) -> str:
    if isinstance(value, Fraction) and value.denominator != 1:
        if value < 0:
            return "(- (/ %d %d))" % (-value.numerator, value.denominator)
        return "(/ %d %d)" % (value.numerator, value.denominator)
    n = int(value)
    if real:
        return "%d.0" % n if n >= 0 else "(- %d.0)" % -n
    return str(n) if n >= 0 else "(- %d)" % -n


class _SmtPrinter:
    def __init__(self, sort: Sort, names: dict[int, str], fun_names: dict):
        self.sort = sort
        self.real = sort.theory in ("lra", "nra")
        self.names = names
        self.fun_names = fun_names

    def term(self, t: Term) -> str:
        if isinstance(t, Var):
            return self.names[t.vid]
        if isinstance(t, Num):
            return _render_num(t.value, self.real)
        if isinstance(t, App):
            if not t.args:
                return self.fun_names.get((t.sym.name, 0), _sanitize(t.sym.name))
            op = t.sym.name if t.sym.name in ("+", "-", "*") \
                else self.fun_names.get((t.sym.name, len(t.args)), _sanitize(t.sym.name))
            return "(%s %s)" % (op, " ".join(self.term(a) for a in t.args))
        raise ValueError("cannot render term %r" % (t,))

    def literal(self, lit: Literal) -> str:
        atom = lit.atom
        if isinstance(atom, Eq):
            body = "(= %s %s)" % (self.term(atom.lhs), self.term(atom.rhs))
        elif isinstance(atom, RelApp):
            body = "(%s %s)" % (atom.sym.name, " ".join(self.term(a) for a in atom.args))
        else:
            raise ValueError("cannot render atom %r" % (atom,))
        return "(not %s)" % body if lit.neg else body

    def clause(self, c: tuple[Literal, ...]) -> str:
        if not c:
            return "false"
        if len(c) == 1:
            return self.literal(c[0])
        return "(or %s)" % " ".join(self.literal(l) for l in c)


def _declared_funs(q: TheoryQuery) -> list:
    seen: dict[tuple[str, int], App] = {}

    def scan_term(t: Term) -> None:
        if isinstance(t, App):
            if t.sym.name not in ("+", "-", "*", "true", "false"):
                seen.setdefault((t.sym.name, len(t.args)), t)
            for a in t.args:
                scan_term(a)

    for clause in q.clauses:
        for lit in clause:
            atom = lit.atom
            if isinstance(atom, Eq):
                scan_term(atom.lhs)
                scan_term(atom.rhs)
            elif isinstance(atom, RelApp):
                for a in atom.args:
                    scan_term(a)
    return list(seen.values())


def render_script(q: TheoryQuery, d: BackendDescriptor) -> tuple[str, dict[str, Var]]:
    """SMT-LIB 2 script: set-logic, declared constants for the
    existentials, one assert of the universally quantified clause
    conjunction, check-sat, and get-value when a model is wanted."""
    smt_sort = _smt_sort_name(q.sort)
    names: dict[int, str] = {}
    by_name: dict[str, Var] = {}
    for i, v in enumerate(q.exists):
        names[v.vid] = "e%d" % i
        by_name["e%d" % i] = v
    for i, v in enumerate(q.forall):
        names[v.vid] = "u%d" % i

    funs = _declared_funs(q)
    fun_names = {
        (a.sym.name, len(a.args)): _sanitize(a.sym.name) for a in funs}
    logic = d.logic or LOGIC_BY_THEORY.get(q.sort.theory or "", "ALL")
    if funs and not logic.startswith("UF") and logic != "ALL":
        logic = "UF" + logic

    printer = _SmtPrinter(q.sort, names, fun_names)
    lines = ["(set-logic %s)" % logic]
    for app in funs:
        arg_sorts = " ".join(smt_sort for _ in app.args)
        lines.append("(declare-fun %s (%s) %s)"
                     % (fun_names[(app.sym.name, len(app.args))], arg_sorts, smt_sort))
    for i, v in enumerate(q.exists):
        lines.append("(declare-const e%d %s)" % (i, smt_sort))
    body = "(and %s)" % " ".join(printer.clause(c) for c in q.clauses) \
        if len(q.clauses) != 1 else printer.clause(q.clauses[0])
    if not q.clauses:
        body = "true"
    if q.forall:
        binders = " ".join("(u%d %s)" % (i, smt_sort) for i in range(len(q.forall)))
        lines.append("(assert (forall (%s) %s))" % (binders, body))
    else:
        lines.append("(assert %s)" % body)
    lines.append("(check-sat)")
    if q.exists and d.supports_models:
        lines.append("(get-value (%s))" % " ".join(
            "e%d" % i for i in range(len(q.exists))))
    return "\n".join(lines) + "\n", by_name


def script_hash(script: str) -> str:
    return hashlib.sha1(script.encode()).hexdigest()[:10]


def _parse_model_values(text: str, by_name: dict[str, Var], sort: Sort) -> Optional[dict[int, object]]:
    try:
        forms = sexpr.read_all(text)
    except sexpr.SExprError:
        return None
    values: dict[int, object] = {}
    for form in forms:
        if not isinstance(form, sexpr.SList):
            continue
        for pair in form.items:
            if (isinstance(pair, sexpr.SList) and len(pair.items) == 2
                    and isinstance(pair.items[0], sexpr.Atom)):
                name = pair.items[0].text
                if name in by_name:
                    values[by_name[name].vid] = sexpr.write(pair.items[1])
    if set(values) != {v.vid for v in by_name.values()}:
        return None
    return values


def solve_external(
    q: TheoryQuery,
    d: BackendDescriptor,
    trace: Optional[Callable[[str, str], None]] = None,
) -> BackendResult:
    """One subprocess per query.  Timeouts and unparsable output map to
    UNKNOWN with the captured transcript; they are never UNSAT."""
    script, by_name = render_script(q, d)
    result = _run_external(q, d, script, by_name)
    if trace is not None:
        stem = "%s-%s" % (_sanitize(q.sort.name), script_hash(script))
        trace("query-%s.smt2" % stem, script)
        # The reply file is the replay baseline: rerunning the script
        # against a backend should reproduce this verdict.
        trace("reply-%s.txt" % stem, str(result.verdict) + "\n")
    return result


def _run_external(
    q: TheoryQuery,
    d: BackendDescriptor,
    script: str,
    by_name: dict[str, Var],
) -> BackendResult:
    assert d.command, "external backend without a command"
    try:
        proc = subprocess.run(
            shlex.split(d.command),
            input=script, capture_output=True, text=True, timeout=d.timeout)
    except subprocess.TimeoutExpired:
        return BackendResult(Verdict.UNKNOWN, reason="timeout after %gs" % d.timeout)
    except OSError as e:
        return BackendResult(Verdict.UNKNOWN, reason="backend failed to start: %s" % e)
    out = proc.stdout
    transcript = out + (("\n[stderr]\n" + proc.stderr) if proc.stderr.strip() else "")
    verdict_line = None
    rest_lines: list[str] = []
    for line in out.splitlines():
        word = line.strip()
        if verdict_line is None and word in ("sat", "unsat", "unknown"):
            verdict_line = word
        elif verdict_line is not None:
            rest_lines.append(line)
    if verdict_line is None:
        return BackendResult(
            Verdict.UNKNOWN, reason="no verdict in backend output", transcript=transcript)
    if verdict_line == "unsat":
        return BackendResult(Verdict.UNSAT, transcript=transcript)
    if verdict_line == "unknown":
        return BackendResult(Verdict.UNKNOWN, reason="backend returned unknown",
                             transcript=transcript)
    if not q.exists or not d.supports_models:
        return BackendResult(Verdict.SAT, SortModel(q.sort, q.exists, {}),
                             transcript=transcript)
    values = _parse_model_values("\n".join(rest_lines), by_name, q.sort)
    if values is None:
        return BackendResult(
            Verdict.UNKNOWN, reason="could not parse model values",
            transcript=transcript)
    return BackendResult(Verdict.SAT, SortModel(q.sort, q.exists, values),
                         transcript=transcript)


@dataclass
class BackendRegistry:
    """theory id -> descriptor; resolves each sort to its decider."""

    external_command: Optional[str] = None
    timeout: float = 60.0
    overrides: dict[str, BackendDescriptor] = field(default_factory=dict)

    def descriptor(self, sort: Sort) -> BackendDescriptor:
        tid = sort.theory_id()
        if tid in self.overrides:
            return self.overrides[tid]
        if sort.kind == FOREGROUND or (sort.kind == BACKGROUND and tid == "empty"):
            return BackendDescriptor(theory_id=tid, kind="internal-fg")
        if sort.kind == BOOLEAN:
            return BackendDescriptor(theory_id="bool", kind="internal-bool")
        if tid in LOGIC_BY_THEORY:
            if not self.external_command:
                raise ValueError(
                    "no backend command configured for theory %s "
                    "(set --backend or EQSMT_BACKEND_CMD)" % tid)
            return BackendDescriptor(
                theory_id=tid, kind="external", command=self.external_command,
                logic=LOGIC_BY_THEORY[tid], timeout=self.timeout)
        raise ValueError("no backend for theory %s" % tid)

    def solve(
        self,
        q: TheoryQuery,
        trace: Optional[Callable[[str, str], None]] = None,
    ) -> BackendResult:
        try:
            d = self.descriptor(q.sort)
        except ValueError as e:
            # configuration gaps surface as UNKNOWN, never as UNSAT
            return BackendResult(Verdict.UNKNOWN, reason=str(e))
        if d.kind == "internal-fg":
            return solve_foreground(q)
        if d.kind == "internal-bool":
            return solve_bool(q)
        return solve_external(q, d, trace)
