"""Bundled reference backend: an SMT-LIB 2 subprocess for linear arithmetic.

Reads a script on stdin and answers on stdout, so it can serve as the
external solver command out of the box.  The supported shape is what
``render_script`` produces: ``set-logic``, constant declarations, any
number of asserts whose only quantifier is a single top-level
``forall`` block, ``check-sat``, ``get-value``.  Linear integer and
linear rational formulas are decided exactly; anything outside that
fragment (uninterpreted functions, nonlinear terms, nested
quantifiers, booleans) answers ``unknown``, never a wrong verdict.
"""

from __future__ import annotations

import sys
from fractions import Fraction

from . import arith
from .backends import _render_num
from .sexpr import Atom, SExprError, SList, read_all


class _Unsupported(Exception):
    """Script uses something outside the decided fragment."""


def _head(e) -> str | None:
    if isinstance(e, SList) and e.items and isinstance(e.items[0], Atom):
        return e.items[0].text
    return None


def _numeral(e) -> Fraction | None:
    if isinstance(e, Atom):
        try:
            return Fraction(e.text)
        except ValueError:
            return None
    h = _head(e)
    if h == "-" and len(e.items) == 2:
        v = _numeral(e.items[1])
        return None if v is None else -v
    if h == "/" and len(e.items) == 3:
        p, q = _numeral(e.items[1]), _numeral(e.items[2])
        if p is None or q is None or q == 0:
            return None
        return p / q
    return None


class _Session:
    def __init__(self) -> None:
        self.mode: bool | None = None  # True = integers, False = rationals
        self.consts: dict[str, str] = {}
        self.asserts: list = []
        self.unsupported: str | None = None
        self.verdict: str | None = None
        self.model: dict[str, int | Fraction] | None = None
        self.fresh = 0

    # -- declarations --------------------------------------------------------

    def _sort_mode(self, e) -> bool:
        if isinstance(e, Atom) and e.text == "Int":
            return True
        if isinstance(e, Atom) and e.text == "Real":
            return False
        raise _Unsupported(f"sort {e!r}")

    def _note_mode(self, int_mode: bool) -> None:
        if self.mode is None:
            self.mode = int_mode
        elif self.mode != int_mode:
            raise _Unsupported("mixed Int and Real declarations")

    def declare(self, name: str, sort) -> None:
        self._note_mode(self._sort_mode(sort))
        self.consts[name] = name

    # -- conversion ----------------------------------------------------------

    def term(self, e, env: dict[str, str]) -> arith.Lin:
        v = _numeral(e)
        if v is not None:
            return arith.lin(const=v)
        if isinstance(e, Atom):
            if e.text in env:
                return arith.lin({env[e.text]: 1})
            raise _Unsupported(f"symbol {e.text}")
        h = _head(e)
        args = e.items[1:] if isinstance(e, SList) else []
        if h == "+" and args:
            acc = self.term(args[0], env)
            for a in args[1:]:
                acc = acc.add(self.term(a, env))
            return acc
        if h == "-" and len(args) == 1:
            return self.term(args[0], env).scale(-1)
        if h == "-" and len(args) >= 2:
            acc = self.term(args[0], env)
            for a in args[1:]:
                acc = acc.sub(self.term(a, env))
            return acc
        if h == "*" and args:
            acc = self.term(args[0], env)
            for a in args[1:]:
                l = self.term(a, env)
                if not acc.coeffs:
                    acc = l.scale(acc.const)
                elif not l.coeffs:
                    acc = acc.scale(l.const)
                else:
                    raise _Unsupported("nonlinear product")
            return acc
        if h == "/" and len(args) == 2:
            num = self.term(args[0], env)
            den = self.term(args[1], env)
            if den.coeffs or den.const == 0:
                raise _Unsupported("division by a non-constant")
            return num.scale(Fraction(1) / den.const)
        raise _Unsupported(f"term {h or e!r}")

    def formula(self, e, env: dict[str, str], neg: bool) -> tuple:
        im = bool(self.mode)
        if isinstance(e, Atom):
            if e.text == "true":
                return arith.FALSE_A if neg else arith.TRUE_A
            if e.text == "false":
                return arith.TRUE_A if neg else arith.FALSE_A
            raise _Unsupported(f"boolean symbol {e.text}")
        h = _head(e)
        args = e.items[1:] if isinstance(e, SList) else []
        if h == "not" and len(args) == 1:
            return self.formula(args[0], env, not neg)
        if h in ("and", "or"):
            parts = [self.formula(a, env, neg) for a in args]
            join = arith.a_or if (h == "and") == neg else arith.a_and
            return join(parts)
        if h == "=>" and len(args) >= 2:
            parts = [self.formula(a, env, not neg) for a in args[:-1]]
            parts.append(self.formula(args[-1], env, neg))
            return arith.a_and(parts) if neg else arith.a_or(parts)
        if h in ("=", "<", "<=", ">", ">="):
            if len(args) < 2:
                raise _Unsupported(f"{h} with {len(args)} arguments")
            parts = []
            for a, b in zip(args, args[1:]):
                la, lb = self.term(a, env), self.term(b, env)
                if h == "=":
                    atom = arith.a_eq(la.sub(lb), im)
                elif h == "<":
                    atom = arith.a_lt(la.sub(lb), im)
                elif h == "<=":
                    atom = arith.a_le(la.sub(lb), im)
                elif h == ">":
                    atom = arith.a_lt(lb.sub(la), im)
                else:
                    atom = arith.a_le(lb.sub(la), im)
                parts.append(arith.a_neg(atom, im) if neg else atom)
            return arith.a_or(parts) if neg else arith.a_and(parts)
        if h in ("forall", "exists"):
            raise _Unsupported(f"nested {h}")
        raise _Unsupported(f"connective {h or e!r}")

    # -- commands ------------------------------------------------------------

    def convert_assert(self, body) -> tuple[list[str], tuple]:
        """One assert: strip an optional top-level universal block."""
        if _head(body) == "forall":
            binders, inner = body.items[1], body.items[2]
            if not isinstance(binders, SList) or len(body.items) != 3:
                raise _Unsupported("malformed forall")
            env = dict(self.consts)
            unames = []
            for b in binders.items:
                if not (isinstance(b, SList) and len(b.items) == 2
                        and isinstance(b.items[0], Atom)):
                    raise _Unsupported("malformed binder")
                self._note_mode(self._sort_mode(b.items[1]))
                uname = f"u!{self.fresh}"
                self.fresh += 1
                env[b.items[0].text] = uname
                unames.append(uname)
            return unames, self.formula(inner, env, False)
        return [], self.formula(body, dict(self.consts), False)

    def check_sat(self) -> str:
        self.model = None
        if self.unsupported is not None:
            self.verdict = "unknown"
            return "unknown"
        try:
            universals: list[str] = []
            parts: list[tuple] = []
            for body in self.asserts:
                us, f = self.convert_assert(body)
                universals.extend(us)
                parts.append(f)
            matrix = arith.a_and(parts)
            verdict, model = arith.solve_ea(
                list(self.consts), universals, matrix,
                int_mode=bool(self.mode), want_model=True)
        except (_Unsupported, arith.ArithError) as e:
            print(f"; {e}", file=sys.stderr)
            self.verdict = "unknown"
            return "unknown"
        self.verdict = verdict
        self.model = model
        return verdict

    def get_value(self, names: list[str]) -> str:
        if self.verdict != "sat" or self.model is None:
            return '(error "no model")'
        real = self.mode is False
        pairs = []
        for n in names:
            v = self.model.get(n, 0)
            pairs.append("(%s %s)" % (n, _render_num(v, real)))
        return "(%s)" % " ".join(pairs)


def main(argv: list[str] | None = None) -> int:
    sys.setrecursionlimit(100_000)
    try:
        forms = read_all(sys.stdin.read())
    except SExprError as e:
        print('(error "%s")' % e)
        return 1
    s = _Session()
    for form in forms:
        h = _head(form)
        args = form.items[1:] if isinstance(form, SList) else []
        try:
            if h in ("set-logic", "set-option", "set-info") or h == "exit":
                continue
            if h == "declare-const" and len(args) == 2 and isinstance(args[0], Atom):
                s.declare(args[0].text, args[1])
            elif (h == "declare-fun" and len(args) == 3
                    and isinstance(args[0], Atom) and isinstance(args[1], SList)):
                if args[1].items:
                    raise _Unsupported("uninterpreted function "
                                       + args[0].text)
                s.declare(args[0].text, args[2])
            elif h == "assert" and len(args) == 1:
                s.asserts.append(args[0])
            elif h == "check-sat":
                print(s.check_sat(), flush=True)
            elif h == "get-value" and len(args) == 1 and isinstance(args[0], SList):
                names = [a.text for a in args[0].items if isinstance(a, Atom)]
                print(s.get_value(names), flush=True)
            else:
                raise _Unsupported(f"command {h!r}")
        except _Unsupported as e:
            # Remembered, not fatal: the next check-sat answers unknown.
            if s.unsupported is None:
                s.unsupported = str(e)
            print(f"; unsupported: {e}", file=sys.stderr)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
