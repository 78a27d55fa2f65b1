"""Brute-force reference decision procedure.

Decides sentences whose signature contains only the foreground and the
boolean sort, by enumerating finite universes and all second-order
assignments.  With the default size limit (the structural small-model
bound max(1, number of existential foreground variables)) the verdict
is definitive for this class; with a smaller explicit limit, UNSAT only
means no model up to that size.

The matrix is evaluated twice on every point, once by the recursive
evaluator in core and once by the worklist evaluator here, and the two
results are compared.  A disagreement raises instead of returning a
verdict, so a bug in either evaluator cannot silently corrupt the
reference answers.
"""

from __future__ import annotations

import itertools
from typing import Callable, Iterator, Optional

from .core import (
    And,
    App,
    BOOLEAN,
    Eq,
    FApp,
    FalseF,
    FiniteModel,
    Formula,
    FunVar,
    FOREGROUND,
    Iff,
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
    Var,
    Verdict,
    eval_formula,
)


class OracleUnsupported(Exception):
    """The sentence is outside the finitely enumerable class."""


class OracleResourceError(Exception):
    """The estimated search space exceeds the configured guard."""


def small_model_bound(s: Sentence) -> int:
    fg = s.signature.foreground()
    return max(1, sum(1 for v in s.exists_fo if v.sort == fg))


def eval_formula_iterative(f: Formula, model: FiniteModel) -> bool:
    """Worklist evaluator over shared subformulas, no recursion.

    Values are memoised per node; since nodes are immutable and the
    model is fixed for a call, occurrences that compare equal share
    their value.
    """
    values: dict[object, object] = {}

    def deps(n: object) -> tuple[object, ...]:
        if isinstance(n, (TrueF, FalseF, Var, Num)):
            return ()
        if isinstance(n, App):
            return n.args
        if isinstance(n, FApp):
            return n.args
        if isinstance(n, Not):
            return (n.body,)
        if isinstance(n, (And, Or)):
            return n.parts
        if isinstance(n, (Implies, Iff)):
            return (n.lhs, n.rhs)
        if isinstance(n, Eq):
            return (n.lhs, n.rhs)
        if isinstance(n, (RelVarApp, RelApp)):
            return n.args
        raise TypeError("not a node: %r" % (n,))

    def compute(n: object) -> object:
        if isinstance(n, TrueF):
            return True
        if isinstance(n, FalseF):
            return False
        if isinstance(n, Var):
            return model.fo[n.vid]
        if isinstance(n, App):
            if n.sym.name == "true" and not n.args:
                return True
            if n.sym.name == "false" and not n.args:
                return False
            raise ValueError("cannot evaluate symbol %s over a finite model" % n.sym.name)
        if isinstance(n, FApp):
            return model.funs[n.fvar.vid][tuple(values[a] for a in n.args)]
        if isinstance(n, Num):
            raise ValueError("cannot evaluate numeral over a finite model")
        if isinstance(n, Not):
            return not values[n.body]
        if isinstance(n, And):
            return all(values[p] for p in n.parts)
        if isinstance(n, Or):
            return any(values[p] for p in n.parts)
        if isinstance(n, Implies):
            return (not values[n.lhs]) or values[n.rhs]
        if isinstance(n, Iff):
            return values[n.lhs] == values[n.rhs]
        if isinstance(n, Eq):
            return values[n.lhs] == values[n.rhs]
        if isinstance(n, RelVarApp):
            return tuple(values[a] for a in n.args) in model.rels[n.rvar.vid]
        if isinstance(n, RelApp):
            raise ValueError("cannot evaluate theory relation %s over a finite model" % n.sym.name)
        raise TypeError("not a node: %r" % (n,))

    stack: list[object] = [f]
    while stack:
        n = stack[-1]
        if n in values:
            stack.pop()
            continue
        pending = [d for d in deps(n) if d not in values]
        if pending:
            stack.extend(pending)
        else:
            values[n] = compute(n)
            stack.pop()
    return bool(values[f])


def _checked_eval(f: Formula, model: FiniteModel) -> bool:
    a = eval_formula(f, model)
    b = eval_formula_iterative(f, model)
    if a != b:
        raise RuntimeError("evaluator disagreement on %r" % (f,))
    return a


def _check_supported(s: Sentence) -> None:
    for sort in s.signature.sorts:
        if sort.kind not in (FOREGROUND, BOOLEAN):
            raise OracleUnsupported(
                "background sort %s is not finitely enumerable" % sort.name)
    for sym in s.signature.funs:
        if sym.name not in ("true", "false"):
            raise OracleUnsupported("declared function %s" % sym.name)
    if s.signature.rels:
        raise OracleUnsupported(
            "declared relation %s" % s.signature.rels[0].name)


def _tuple_space(arg_sorts: tuple[Sort, ...], universes: dict[str, tuple]) -> list[tuple]:
    return list(itertools.product(*[universes[x.name] for x in arg_sorts]))


def _count_assignments(
    fo: tuple[Var, ...], rels: tuple[RelVar, ...], funs: tuple[FunVar, ...],
    universes: dict[str, tuple],
) -> int:
    total = 1
    for v in fo:
        total *= len(universes[v.sort.name])
    for r in rels:
        t = 1
        for x in r.arg_sorts:
            t *= len(universes[x.name])
        total *= 2 ** t
    for g in funs:
        t = 1
        for x in g.arg_sorts:
            t *= len(universes[x.name])
        total *= len(universes[g.result.name]) ** t
    return total


def _assignment_factories(
    fo: tuple[Var, ...], rels: tuple[RelVar, ...], funs: tuple[FunVar, ...],
    universes: dict[str, tuple],
) -> list[tuple[str, int, Callable[[], Iterator]]]:
    """One (kind, vid, factory) per variable; factories restart cleanly
    so the product below never materialises a factor."""
    out: list[tuple[str, int, Callable[[], Iterator]]] = []
    for v in fo:
        u = universes[v.sort.name]
        out.append(("fo", v.vid, lambda u=u: iter(u)))
    for r in rels:
        space = _tuple_space(r.arg_sorts, universes)

        def rel_iter(space=space) -> Iterator:
            for bits in itertools.product((False, True), repeat=len(space)):
                yield frozenset(t for t, b in zip(space, bits) if b)
        out.append(("rel", r.vid, rel_iter))
    for g in funs:
        space = _tuple_space(g.arg_sorts, universes)
        result = universes[g.result.name]

        def fun_iter(space=space, result=result) -> Iterator:
            for vals in itertools.product(result, repeat=len(space)):
                yield dict(zip(space, vals))
        out.append(("fun", g.vid, fun_iter))
    return out


def _lazy_product(factories: list) -> Iterator[list]:
    if not factories:
        yield []
        return
    head = factories[0]
    for value in head[2]():
        for rest in _lazy_product(factories[1:]):
            yield [(head[0], head[1], value)] + rest


def _apply(model: FiniteModel, assignment: list) -> None:
    for kind, vid, value in assignment:
        if kind == "fo":
            model.fo[vid] = value
        elif kind == "rel":
            model.rels[vid] = value
        else:
            model.funs[vid] = value


def _remove(model: FiniteModel, assignment: list) -> None:
    for kind, vid, _ in assignment:
        if kind == "fo":
            model.fo.pop(vid, None)
        elif kind == "rel":
            model.rels.pop(vid, None)
        else:
            model.funs.pop(vid, None)


def holds_for_all(s: Sentence, model: FiniteModel) -> bool:
    """True iff the matrix holds for every universal assignment, under
    the existential assignment already present in model.  The model must
    cover every existential variable and carry the universes."""
    scratch = FiniteModel(
        universes=dict(model.universes),
        fo=dict(model.fo),
        funs={k: dict(v) for k, v in model.funs.items()},
        rels=dict(model.rels),
    )
    factories = _assignment_factories(
        s.forall_fo, s.forall_rel, s.forall_fun, scratch.universes)
    for ua in _lazy_product(factories):
        _apply(scratch, ua)
        ok = _checked_eval(s.matrix, scratch)
        _remove(scratch, ua)
        if not ok:
            return False
    return True


def brute_force_sat(
    s: Sentence,
    max_size: Optional[int] = None,
    guard: int = 10_000_000,
) -> tuple[Verdict, Optional[FiniteModel]]:
    """Enumerate foreground universes of size 1..max_size and all
    second-order assignments.  Returns (SAT, witness model holding the
    existential assignment) or (UNSAT, None).

    Raises OracleResourceError if the estimated number of matrix
    evaluations across all sizes exceeds guard.
    """
    _check_supported(s)
    if max_size is None:
        max_size = small_model_bound(s)
    if max_size < 1:
        raise ValueError("universe size must be at least 1")

    fg = s.signature.foreground()
    bool_sort = s.signature.boolean()

    estimate = 0
    for k in range(1, max_size + 1):
        universes = {fg.name: tuple(range(k)), bool_sort.name: (False, True)}
        e = _count_assignments(s.exists_fo, s.exists_rel, s.exists_fun, universes)
        a = _count_assignments(s.forall_fo, s.forall_rel, s.forall_fun, universes)
        estimate += e * a
    if estimate > guard:
        raise OracleResourceError(
            "estimated %d matrix evaluations exceeds guard %d" % (estimate, guard))

    for k in range(1, max_size + 1):
        universes = {fg.name: tuple(range(k)), bool_sort.name: (False, True)}
        model = FiniteModel(universes=dict(universes))
        ex_factories = _assignment_factories(
            s.exists_fo, s.exists_rel, s.exists_fun, universes)
        all_factories = _assignment_factories(
            s.forall_fo, s.forall_rel, s.forall_fun, universes)
        for ex in _lazy_product(ex_factories):
            _apply(model, ex)
            holds = True
            for ua in _lazy_product(all_factories):
                _apply(model, ua)
                ok = _checked_eval(s.matrix, model)
                _remove(model, ua)
                if not ok:
                    holds = False
                    break
            if holds:
                return Verdict.SAT, model
            _remove(model, ex)
    return Verdict.UNSAT, None
