"""Quantifier elimination for linear arithmetic over exact rationals.

Two eliminators: Cooper's method for linear integer arithmetic and
virtual substitution with epsilon / minus-infinity test points for
linear rational arithmetic.  On top of both sits ``solve_ea``, a
decision procedure for sentences with one existential block followed
by one universal block, which is what the bundled reference backend
runs.

Formulas are negation-normal tuple trees over linear atoms.  Build
them with the ``a_*`` constructors: they normalise eagerly (integer
atoms get integer coefficients, ground atoms collapse to truth
constants), so a fully substituted formula is literally ``TRUE_A`` or
``FALSE_A``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping


class ArithError(Exception):
    """A formula fell outside the supported linear fragment or budget."""


# Hard cap on atoms in any intermediate formula; elimination is
# worst-case exponential and must fail loudly instead of thrashing.
ATOM_BUDGET = 500_000

# Cap on clauses produced by distributing a matrix into clausal form.
CLAUSE_BUDGET = 100_000


def _fr(x: int | Fraction) -> Fraction:
    return x if isinstance(x, Fraction) else Fraction(x)


@dataclass(frozen=True)
class Lin:
    """Linear expression: sum of coeff * var terms plus a constant."""

    coeffs: tuple[tuple[str, Fraction], ...]
    const: Fraction

    def coeff(self, var: str) -> Fraction:
        for v, c in self.coeffs:
            if v == var:
                return c
        return Fraction(0)

    def vars(self) -> tuple[str, ...]:
        return tuple(v for v, _ in self.coeffs)

    def add(self, other: Lin) -> Lin:
        acc = dict(self.coeffs)
        for v, c in other.coeffs:
            acc[v] = acc.get(v, Fraction(0)) + c
        return lin(acc, self.const + other.const)

    def scale(self, k: int | Fraction) -> Lin:
        k = _fr(k)
        if k == 0:
            return lin((), 0)
        return Lin(tuple((v, c * k) for v, c in self.coeffs), self.const * k)

    def sub(self, other: Lin) -> Lin:
        return self.add(other.scale(-1))

    def drop(self, var: str) -> Lin:
        return Lin(tuple((v, c) for v, c in self.coeffs if v != var), self.const)

    def subst(self, var: str, repl: Lin) -> Lin:
        c = self.coeff(var)
        if c == 0:
            return self
        return self.drop(var).add(repl.scale(c))


def lin(coeffs: Mapping[str, int | Fraction] | Iterable[tuple[str, int | Fraction]] = (),
        const: int | Fraction = 0) -> Lin:
    items = coeffs.items() if isinstance(coeffs, Mapping) else coeffs
    kept = tuple(sorted((v, _fr(c)) for v, c in items if _fr(c) != 0))
    return Lin(kept, _fr(const))


# Formulas: ("true",) | ("false",) | ("and", parts) | ("or", parts)
# | ("le", Lin) | ("lt", Lin) | ("eq", Lin) | ("ne", Lin)
# | ("dvd", d, Lin) | ("ndvd", d, Lin), all meaning <lin> <op> 0,
# divisibility meaning d | lin.  Integer mode never stores "lt".

TRUE_A = ("true",)
FALSE_A = ("false",)

_ATOM_TAGS = frozenset({"le", "lt", "eq", "ne", "dvd", "ndvd"})


def _intify(l: Lin) -> Lin:
    # Clear denominators with a positive factor; sense-preserving.
    den = math.lcm(l.const.denominator, *(c.denominator for _, c in l.coeffs)) \
        if l.coeffs else l.const.denominator
    return l.scale(den) if den != 1 else l


def _content(l: Lin) -> int:
    # gcd of integer coefficient magnitudes; 0 when there are none.
    return math.gcd(*(abs(int(c)) for _, c in l.coeffs)) if l.coeffs else 0


def a_le(l: Lin, int_mode: bool) -> tuple:
    if int_mode:
        l = _intify(l)
        g = _content(l)
        if g > 1:
            # g*t + c <= 0  iff  t <= floor(-c/g)
            c = int(l.const)
            l = Lin(tuple((v, k / g) for v, k in l.coeffs), Fraction(-((-c) // g)))
    if not l.coeffs:
        return TRUE_A if l.const <= 0 else FALSE_A
    return ("le", l)


def a_lt(l: Lin, int_mode: bool) -> tuple:
    if int_mode:
        l = _intify(l)
        return a_le(Lin(l.coeffs, l.const + 1), int_mode)
    if not l.coeffs:
        return TRUE_A if l.const < 0 else FALSE_A
    return ("lt", l)


def a_eq(l: Lin, int_mode: bool) -> tuple:
    if int_mode:
        l = _intify(l)
        g = _content(l)
        if g > 1:
            if int(l.const) % g != 0:
                return FALSE_A
            l = l.scale(Fraction(1, g))
    if not l.coeffs:
        return TRUE_A if l.const == 0 else FALSE_A
    return ("eq", l)


def a_ne(l: Lin, int_mode: bool) -> tuple:
    if int_mode:
        l = _intify(l)
        g = _content(l)
        if g > 1:
            if int(l.const) % g != 0:
                return TRUE_A
            l = l.scale(Fraction(1, g))
    if not l.coeffs:
        return TRUE_A if l.const != 0 else FALSE_A
    return ("ne", l)


def _dvd(tag: str, d: int, l: Lin) -> tuple:
    d = abs(d)
    if d == 0:
        raise ArithError("zero divisibility modulus")
    l = _intify(l)
    # Divide out the common factor first: gd' | g*l' iff d' | l'.
    g = math.gcd(d, int(l.const), *(int(c) for _, c in l.coeffs))
    if g > 1:
        d //= g
        l = l.scale(Fraction(1, g))
    # Reduce modulo d; equivalence depends only on residues.
    coeffs = tuple((v, Fraction(int(c) % d)) for v, c in l.coeffs)
    l = lin(dict(coeffs), int(l.const) % d)
    if d == 1 or not l.coeffs:
        holds = int(l.const) % d == 0
        if tag == "dvd":
            return TRUE_A if holds else FALSE_A
        return FALSE_A if holds else TRUE_A
    return (tag, d, l)


def a_dvd(d: int, l: Lin) -> tuple:
    return _dvd("dvd", d, l)


def a_ndvd(d: int, l: Lin) -> tuple:
    return _dvd("ndvd", d, l)


def a_and(parts: Iterable[tuple]) -> tuple:
    out, seen = [], set()
    for p in parts:
        if p == TRUE_A:
            continue
        if p == FALSE_A:
            return FALSE_A
        sub = p[1] if p[0] == "and" else (p,)
        for q in sub:
            if q == FALSE_A:
                return FALSE_A
            if q != TRUE_A and q not in seen:
                seen.add(q)
                out.append(q)
    if not out:
        return TRUE_A
    if len(out) == 1:
        return out[0]
    return ("and", tuple(out))


def a_or(parts: Iterable[tuple]) -> tuple:
    out, seen = [], set()
    for p in parts:
        if p == FALSE_A:
            continue
        if p == TRUE_A:
            return TRUE_A
        sub = p[1] if p[0] == "or" else (p,)
        for q in sub:
            if q == TRUE_A:
                return TRUE_A
            if q != FALSE_A and q not in seen:
                seen.add(q)
                out.append(q)
    if not out:
        return FALSE_A
    if len(out) == 1:
        return out[0]
    return ("or", tuple(out))


def a_neg(f: tuple, int_mode: bool) -> tuple:
    tag = f[0]
    if tag == "true":
        return FALSE_A
    if tag == "false":
        return TRUE_A
    if tag == "and":
        return a_or(a_neg(p, int_mode) for p in f[1])
    if tag == "or":
        return a_and(a_neg(p, int_mode) for p in f[1])
    if tag == "le":
        return a_lt(f[1].scale(-1), int_mode)
    if tag == "lt":
        return a_le(f[1].scale(-1), int_mode)
    if tag == "eq":
        return a_ne(f[1], int_mode)
    if tag == "ne":
        return a_eq(f[1], int_mode)
    if tag == "dvd":
        return a_ndvd(f[1], f[2])
    if tag == "ndvd":
        return a_dvd(f[1], f[2])
    raise ArithError(f"bad formula tag {tag!r}")


def occurs(f: tuple, var: str) -> bool:
    tag = f[0]
    if tag in ("true", "false"):
        return False
    if tag in ("and", "or"):
        return any(occurs(p, var) for p in f[1])
    l = f[2] if tag in ("dvd", "ndvd") else f[1]
    return l.coeff(var) != 0


def free_vars(f: tuple) -> set[str]:
    tag = f[0]
    if tag in ("true", "false"):
        return set()
    if tag in ("and", "or"):
        out: set[str] = set()
        for p in f[1]:
            out |= free_vars(p)
        return out
    l = f[2] if tag in ("dvd", "ndvd") else f[1]
    return set(l.vars())


def atom_count(f: tuple) -> int:
    tag = f[0]
    if tag in ("true", "false"):
        return 0
    if tag in ("and", "or"):
        return sum(atom_count(p) for p in f[1])
    return 1


def subst_formula(f: tuple, var: str, repl: Lin, int_mode: bool) -> tuple:
    tag = f[0]
    if tag in ("true", "false"):
        return f
    if tag == "and":
        return a_and(subst_formula(p, var, repl, int_mode) for p in f[1])
    if tag == "or":
        return a_or(subst_formula(p, var, repl, int_mode) for p in f[1])
    if tag in ("dvd", "ndvd"):
        l = f[2]
        if l.coeff(var) == 0:
            return f
        l = l.subst(var, repl)
        return a_dvd(f[1], l) if tag == "dvd" else a_ndvd(f[1], l)
    l = f[1]
    if l.coeff(var) == 0:
        return f
    l = l.subst(var, repl)
    make = {"le": a_le, "lt": a_lt, "eq": a_eq, "ne": a_ne}[tag]
    return make(l, int_mode)


def eval_ground(f: tuple) -> bool:
    # Constructors collapse ground atoms, so a variable-free formula
    # built through them is already a truth constant.
    if f == TRUE_A:
        return True
    if f == FALSE_A:
        return False
    raise ArithError("formula is not ground")


# -- Cooper elimination (integers) -------------------------------------------


def _expand_eq_ne(f: tuple, var: str) -> tuple:
    """Rewrite eq/ne atoms containing var into le atoms."""
    tag = f[0]
    if tag == "and":
        return a_and(_expand_eq_ne(p, var) for p in f[1])
    if tag == "or":
        return a_or(_expand_eq_ne(p, var) for p in f[1])
    if tag == "eq" and f[1].coeff(var) != 0:
        l = f[1]
        return a_and((a_le(l, True), a_le(l.scale(-1), True)))
    if tag == "ne" and f[1].coeff(var) != 0:
        l = f[1]
        return a_or((a_le(Lin(l.coeffs, l.const + 1), True),
                     a_le(Lin(l.scale(-1).coeffs, -l.const + 1), True)))
    return f


def _unit_scale(f: tuple, var: str, L: int) -> tuple:
    """Scale every atom containing var so its coefficient is +-L, then
    substitute the unit variable (conceptually z = L * var).  Atoms are
    rebuilt raw: normalisation would undo the scaling."""
    tag = f[0]
    if tag in ("true", "false"):
        return f
    if tag in ("and", "or"):
        parts = tuple(_unit_scale(p, var, L) for p in f[1])
        return (tag, parts)
    if tag in ("dvd", "ndvd"):
        d, l = f[1], f[2]
        a = l.coeff(var)
        if a == 0:
            return f
        k = L // abs(int(a))
        l2 = l.scale(k)
        sign = 1 if a > 0 else -1
        l2 = l2.drop(var).add(lin({var: sign}))
        return (tag, d * k, l2)
    l = f[1]
    a = l.coeff(var)
    if a == 0:
        return f
    k = L // abs(int(a))
    l2 = l.scale(k)
    sign = 1 if a > 0 else -1
    l2 = l2.drop(var).add(lin({var: sign}))
    return (tag, l2)


def _x_atoms(f: tuple, var: str, acc: list[tuple]) -> None:
    tag = f[0]
    if tag in ("and", "or"):
        for p in f[1]:
            _x_atoms(p, var, acc)
    elif tag in _ATOM_TAGS:
        l = f[2] if tag in ("dvd", "ndvd") else f[1]
        if l.coeff(var) != 0:
            acc.append(f)


def _minus_inf(f: tuple, var: str, j: int) -> tuple:
    """f with var at minus infinity in congruence class j: upper-bound
    le atoms become true, lower bounds false, divisibilities keep j."""
    tag = f[0]
    if tag in ("true", "false"):
        return f
    if tag == "and":
        return a_and(_minus_inf(p, var, j) for p in f[1])
    if tag == "or":
        return a_or(_minus_inf(p, var, j) for p in f[1])
    if tag in ("dvd", "ndvd"):
        l = f[2]
        if l.coeff(var) == 0:
            return f
        l2 = l.drop(var).add(lin(const=j))
        return a_dvd(f[1], l2) if tag == "dvd" else a_ndvd(f[1], l2)
    l = f[1]
    a = l.coeff(var)
    if a == 0:
        return f
    return TRUE_A if a > 0 else FALSE_A


def qe_exists_int(f: tuple, var: str) -> tuple:
    """Eliminate an integer existential: returns a formula equivalent
    to exists var. f, over the remaining variables (Cooper's method,
    lower-bound form).

    The quantifier is pushed through disjunctions and past conjuncts
    that do not mention the variable before the core method runs;
    skipping that factoring makes chained eliminations blow up.
    """
    return _qe_factor(f, var, _cooper)


def _qe_factor(f: tuple, var: str, core) -> tuple:
    if not occurs(f, var):
        return f
    if f[0] == "or":
        return a_or(_qe_factor(p, var, core) for p in f[1])
    if f[0] == "and":
        rest = [p for p in f[1] if not occurs(p, var)]
        hot = [p for p in f[1] if occurs(p, var)]
        if rest:
            return a_and(rest + [_qe_factor(a_and(hot), var, core)])
        if len(hot) == 1 and hot[0][0] == "or":
            return _qe_factor(hot[0], var, core)
    return core(f, var)


def _cooper(f: tuple, var: str) -> tuple:
    f = _expand_eq_ne(f, var)
    atoms: list[tuple] = []
    _x_atoms(f, var, atoms)
    coeffs = []
    for a in atoms:
        l = a[2] if a[0] in ("dvd", "ndvd") else a[1]
        c = l.coeff(var)
        if c.denominator != 1:
            raise ArithError("non-integer coefficient in integer mode")
        coeffs.append(abs(int(c)))
    L = math.lcm(*coeffs) if coeffs else 1
    g = _unit_scale(f, var, L) if L > 1 else f
    if L > 1:
        g = a_and((g, a_dvd(L, lin({var: 1}))))
    atoms = []
    _x_atoms(g, var, atoms)
    delta = 1
    lowers: list[Lin] = []
    for a in atoms:
        if a[0] in ("dvd", "ndvd"):
            delta = math.lcm(delta, a[1])
        else:
            # unit coefficient by construction: +1 upper, -1 lower
            if a[1].coeff(var) < 0:
                lowers.append(a[1].drop(var))
    disjuncts: list[tuple] = []
    total = 0
    # Lower bounds here are non-strict (z >= r), so the test points are
    # r + j for j in 0..delta-1; the minus-infinity residues likewise.
    for j in range(delta):
        disjuncts.append(_minus_inf(g, var, j))
        jl = lin(const=j)
        for b in lowers:
            disjuncts.append(subst_formula(g, var, b.add(jl), True))
        total += (1 + len(lowers)) * atom_count(g)
        if total > ATOM_BUDGET:
            raise ArithError("elimination exceeded the atom budget")
    out = a_or(disjuncts)
    if atom_count(out) > ATOM_BUDGET:
        raise ArithError("elimination exceeded the atom budget")
    return out


# -- Virtual substitution (rationals) ----------------------------------------


def _real_minus_inf(f: tuple, var: str) -> tuple:
    tag = f[0]
    if tag in ("true", "false"):
        return f
    if tag in ("and", "or"):
        parts = (_real_minus_inf(p, var) for p in f[1])
        return a_and(parts) if tag == "and" else a_or(parts)
    l = f[1]
    a = l.coeff(var)
    if a == 0:
        return f
    if tag in ("le", "lt"):
        return TRUE_A if a > 0 else FALSE_A
    return FALSE_A if tag == "eq" else TRUE_A


def _subst_eps(f: tuple, var: str, s: Lin) -> tuple:
    """f with var := s + epsilon for an infinitesimal epsilon > 0."""
    tag = f[0]
    if tag in ("true", "false"):
        return f
    if tag in ("and", "or"):
        parts = (_subst_eps(p, var, s) for p in f[1])
        return a_and(parts) if tag == "and" else a_or(parts)
    l = f[1]
    a = l.coeff(var)
    if a == 0:
        return f
    lv = l.drop(var).add(s.scale(a))
    if tag in ("le", "lt"):
        # a*eps decides ties: negative a admits the boundary itself.
        return a_le(lv, False) if a < 0 else a_lt(lv, False)
    return FALSE_A if tag == "eq" else TRUE_A


def qe_exists_real(f: tuple, var: str) -> tuple:
    """Eliminate a rational existential by substituting minus infinity,
    every atom boundary, and every boundary plus epsilon.  Factors the
    quantifier through the formula the same way as the integer path."""
    return _qe_factor(f, var, _virtual_subst)


def _virtual_subst(f: tuple, var: str) -> tuple:
    atoms: list[tuple] = []
    _x_atoms(f, var, atoms)
    bounds: list[Lin] = []
    seen: set[Lin] = set()
    for a in atoms:
        l = a[1]
        c = l.coeff(var)
        s = l.drop(var).scale(Fraction(-1) / c)
        if s not in seen:
            seen.add(s)
            bounds.append(s)
    disjuncts = [_real_minus_inf(f, var)]
    for s in bounds:
        disjuncts.append(subst_formula(f, var, s, False))
        disjuncts.append(_subst_eps(f, var, s))
    out = a_or(disjuncts)
    if atom_count(out) > ATOM_BUDGET:
        raise ArithError("elimination exceeded the atom budget")
    return out


def qe_exists(f: tuple, var: str, int_mode: bool) -> tuple:
    return qe_exists_int(f, var) if int_mode else qe_exists_real(f, var)


def eliminate_all(f: tuple, vars: Iterable[str], int_mode: bool) -> tuple:
    remaining = [v for v in vars if occurs(f, v)]
    while remaining:
        # Cheapest variable first: fewest atoms mentioning it.
        counts = []
        for v in remaining:
            acc: list[tuple] = []
            _x_atoms(f, v, acc)
            counts.append((len(acc), v))
        counts.sort()
        _, v = counts[0]
        f = qe_exists(f, v, int_mode)
        remaining = [w for w in remaining if w != v and occurs(f, w)]
    return f


# -- Lazy existential search -------------------------------------------------

# Eager elimination of a whole existential block multiplies the formula
# at every step.  Deciding satisfiability only needs the disjuncts of
# the elimination theorem explored one at a time: substitute a candidate
# term, recurse on the same-sized formula, backtrack.  The search path
# doubles as a symbolic answer from which a numeric model is read off.

# Work accounting: every branch charges the source formula's atom count,
# so large divisibility periods on wide formulas fail in bounded time.
WORK_BUDGET = 150_000

DELTA_LIMIT = 1_000_000


def _int_node(phi: tuple, var: str) -> tuple[int, int, list[tuple], list[tuple[tuple, tuple]]]:
    """Branches for one integer variable: (L, delta, z-atoms, branches),
    each branch a (record, successor-formula) pair."""
    atoms0: list[tuple] = []
    _x_atoms(phi, var, atoms0)
    coeffs = []
    for a in atoms0:
        l = a[2] if a[0] in ("dvd", "ndvd") else a[1]
        c = l.coeff(var)
        if c.denominator != 1:
            raise ArithError("non-integer coefficient in integer mode")
        coeffs.append(abs(int(c)))
    L = math.lcm(*coeffs) if coeffs else 1
    if any(a[0] == "eq" for a in atoms0):
        # An equality atom forces the (scaled) variable to one value:
        # exists z (z = t and psi)  ==  psi[t/z].  One branch, no period.
        g = phi
        if L > 1:
            g = a_and((_unit_scale(phi, var, L), a_dvd(L, lin({var: 1}))))
        satoms: list[tuple] = []
        _x_atoms(g, var, satoms)
        l = next(a[1] for a in satoms if a[0] == "eq")
        t = l.drop(var).scale(Fraction(-1) / l.coeff(var))

        def pinned():
            yield ("term", t), subst_formula(g, var, t, True)

        return L, 1, [], pinned()
    g = _expand_eq_ne(phi, var)
    if L > 1:
        g = a_and((_unit_scale(g, var, L), a_dvd(L, lin({var: 1}))))
    atoms: list[tuple] = []
    _x_atoms(g, var, atoms)
    delta = 1
    lowers: list[Lin] = []
    zatoms: list[tuple] = []
    for a in atoms:
        if a[0] in ("dvd", "ndvd"):
            delta = math.lcm(delta, a[1])
        else:
            sign = 1 if a[1].coeff(var) > 0 else -1
            zatoms.append((sign, a[1].drop(var)))
            if sign < 0:
                lowers.append(a[1].drop(var))
    if delta > DELTA_LIMIT:
        raise ArithError("divisibility period exceeded the limit")

    def branches():
        za = tuple(zatoms)
        for j in range(delta):
            jl = lin(const=j)
            for b in lowers:
                t = b.add(jl)
                yield ("term", t), subst_formula(g, var, t, True)
            yield ("minf", j, delta, za), _minus_inf(g, var, j)

    return L, delta, zatoms, branches()


def _real_node(phi: tuple, var: str):
    atoms: list[tuple] = []
    _x_atoms(phi, var, atoms)
    for a in atoms:
        if a[0] == "eq":
            l = a[1]
            t = l.drop(var).scale(Fraction(-1) / l.coeff(var))

            def pinned():
                yield ("term", t), subst_formula(phi, var, t, False)

            return pinned()
    bounds: list[Lin] = []
    seen: set[Lin] = set()
    for a in atoms:
        l = a[1]
        s = l.drop(var).scale(Fraction(-1) / l.coeff(var))
        if s not in seen:
            seen.add(s)
            bounds.append(s)
    allb = tuple(bounds)

    def branches():
        for s in bounds:
            yield ("term", s), subst_formula(phi, var, s, False)
            yield ("eps", s, allb), _subst_eps(phi, var, s)
        yield ("minf", allb), _real_minus_inf(phi, var)

    return branches()


def _decide(phi: tuple, order: list[str], int_mode: bool, ticks: list[int],
            ) -> list[tuple[str, tuple, int]] | None:
    """Depth-first search over elimination test points.  Returns the
    substitution path on success (outermost variable first), None when
    no branch closes."""
    if phi == FALSE_A:
        return None
    if phi == TRUE_A:
        return [(v, ("default",), 1) for v in order]
    if not order:
        raise ArithError("free variables remain after the search prefix")
    size = atom_count(phi)
    counts = []
    for v in order:
        acc: list[tuple] = []
        _x_atoms(phi, v, acc)
        # Equality-pinned variables never branch, so they go first.
        pin = 0 if any(a[0] == "eq" for a in acc) else 1
        counts.append((pin, len(acc), v))
    counts.sort()
    _, n, v = counts[0]
    rest = [w for w in order if w != v]
    if n == 0:
        sub = _decide(phi, rest, int_mode, ticks)
        return None if sub is None else [(v, ("default",), 1)] + sub
    if int_mode:
        L, _, _, branches = _int_node(phi, v)
    else:
        L, branches = 1, _real_node(phi, v)
    explored: set[tuple] = set()
    for rec, phi2 in branches:
        # Each branch substitutes through the whole formula, so it is
        # charged proportionally; distinct records can yield the same
        # successor formula, which need not be searched twice.
        ticks[0] += size
        if ticks[0] > WORK_BUDGET:
            raise ArithError("existential search exceeded the work budget")
        if phi2 in explored:
            continue
        explored.add(phi2)
        sub = _decide(phi2, rest, int_mode, ticks)
        if sub is not None:
            return [(v, rec, L)] + sub
    return None


def _eval_lin(l: Lin, model: Mapping[str, int | Fraction]) -> Fraction:
    acc = l.const
    for v, c in l.coeffs:
        acc += c * _fr(model[v])
    return acc


def _resolve_path(path: list[tuple[str, tuple, int]], int_mode: bool,
                  ) -> dict[str, int | Fraction]:
    """Turn a search path into numeric values, innermost variable first
    so every symbolic bound can be evaluated."""
    model: dict[str, int | Fraction] = {}
    for var, rec, L in reversed(path):
        kind = rec[0]
        if kind == "default":
            val = Fraction(0)
        elif kind == "term":
            val = _eval_lin(rec[1], model)
        elif int_mode:
            # minus infinity, integers: largest z below every z-bound in
            # the right congruence class
            _, j, delta, zatoms = rec
            if zatoms:
                caps = []
                for sign, r in zatoms:
                    rv = _eval_lin(r, model)
                    caps.append(-rv if sign > 0 else rv - 1)
                zmax = math.floor(min(caps))
            else:
                zmax = j
            val = Fraction(zmax - ((zmax - j) % delta))
        elif kind == "minf":
            bvals = [_eval_lin(b, model) for b in rec[1]]
            val = min(bvals) - 1 if bvals else Fraction(0)
        else:
            # epsilon: halfway between this bound and the next one up
            sval = _eval_lin(rec[1], model)
            above = [x for x in (_eval_lin(b, model) for b in rec[2]) if x > sval]
            val = sval + (min(above) - sval) / 2 if above else sval + 1
        if int_mode:
            val = val / L
            if val.denominator != 1:
                raise ArithError("model resolution produced a non-integer")
            model[var] = int(val)
        else:
            model[var] = val
    return model


def find_model(phi: tuple, vars: Iterable[str], int_mode: bool) -> dict[str, int | Fraction]:
    """A satisfying assignment for a satisfiable formula over vars."""
    order = list(vars)
    path = _decide(phi, order, int_mode, [0])
    if path is None:
        raise ArithError("find_model called on an unsatisfiable formula")
    model = _resolve_path(path, int_mode)
    check = phi
    for v, val in model.items():
        check = subst_formula(check, v, lin(const=val), int_mode)
    if not eval_ground(check):
        raise ArithError("model reconstruction failed")
    return model


# -- Exists/forall decision --------------------------------------------------


def clauses_of(f: tuple) -> list[tuple[tuple, ...]]:
    """Distribute a negation-normal formula into clauses (tuples of
    atoms read disjunctively); the empty clause list means true."""
    if f == TRUE_A:
        return []
    if f == FALSE_A:
        return [()]
    tag = f[0]
    if tag in _ATOM_TAGS:
        return [(f,)]
    if tag == "and":
        out: list[tuple[tuple, ...]] = []
        for p in f[1]:
            out.extend(clauses_of(p))
            if len(out) > CLAUSE_BUDGET:
                raise ArithError("clause distribution exceeded the budget")
        return out
    acc: list[tuple[tuple, ...]] = [()]
    for p in f[1]:
        cls = clauses_of(p)
        acc = [a + b for a in acc for b in cls]
        if len(acc) > CLAUSE_BUDGET:
            raise ArithError("clause distribution exceeded the budget")
    return acc


def solve_ea(exists: Iterable[str], foralls: Iterable[str], matrix: tuple,
             int_mode: bool, want_model: bool = False,
             ) -> tuple[str, dict[str, int | Fraction] | None]:
    """Decide exists e-block forall u-block matrix.

    Returns ("sat", model-or-None) or ("unsat", None).  The universal
    block distributes over the clauses of the matrix, so each clause
    only pays for the universals it actually mentions.
    """
    exists = list(exists)
    foralls = list(foralls)
    parts: list[tuple] = []
    for cl in clauses_of(matrix):
        disj = a_or(cl)
        uv = [u for u in foralls if occurs(disj, u)]
        if not uv:
            parts.append(disj)
            continue
        witnessable = eliminate_all(a_neg(disj, int_mode), uv, int_mode)
        parts.append(a_neg(witnessable, int_mode))
    phi = a_and(parts)
    stray = free_vars(phi) - set(exists)
    if stray:
        raise ArithError(f"free variables outside the prefix: {sorted(stray)}")
    path = _decide(phi, exists, int_mode, [0])
    if path is None:
        return "unsat", None
    if not want_model:
        return "sat", None
    model = _resolve_path(path, int_mode)
    check = phi
    for v, val in model.items():
        check = subst_formula(check, v, lin(const=val), int_mode)
    if not eval_ground(check):
        raise ArithError("model reconstruction failed")
    return "sat", model
