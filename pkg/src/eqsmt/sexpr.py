"""Small s-expression reader and writer with source positions.

Shared by the problem-file parser, the SMT-LIB script printer, and the
bundled reference backend, so all three agree on tokenization.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Union


class SExprError(Exception):
    def __init__(self, message: str, line: int, col: int):
        super().__init__("%d:%d: %s" % (line, col, message))
        self.message = message
        self.line = line
        self.col = col


@dataclass(frozen=True)
class Atom:
    text: str
    line: int = 0
    col: int = 0

    # positions are metadata, not identity
    def __eq__(self, other: object) -> bool:
        return isinstance(other, Atom) and other.text == self.text

    def __hash__(self) -> int:
        return hash(("atom", self.text))


@dataclass(frozen=True)
class SList:
    items: tuple["SExpr", ...]
    line: int = 0
    col: int = 0

    def __eq__(self, other: object) -> bool:
        return isinstance(other, SList) and other.items == self.items

    def __hash__(self) -> int:
        return hash(("slist", self.items))


SExpr = Union[Atom, SList]

_DELIMS = "()\"; \t\r\n"


def _tokens(text: str) -> Iterator[tuple[str, int, int]]:
    line, col = 1, 1
    i, n = 0, len(text)
    while i < n:
        c = text[i]
        if c == "\n":
            i += 1
            line += 1
            col = 1
            continue
        if c in " \t\r":
            i += 1
            col += 1
            continue
        if c == ";":
            while i < n and text[i] != "\n":
                i += 1
            continue
        if c in "()":
            yield c, line, col
            i += 1
            col += 1
            continue
        if c == '"':
            start_line, start_col = line, col
            j = i + 1
            buf = []
            while j < n and text[j] != '"':
                if text[j] == "\n":
                    line += 1
                    col = 0
                buf.append(text[j])
                j += 1
            if j >= n:
                raise SExprError("unterminated string", start_line, start_col)
            yield '"' + "".join(buf), start_line, start_col
            col += j + 1 - i
            i = j + 1
            continue
        j = i
        while j < n and text[j] not in _DELIMS:
            j += 1
        yield text[i:j], line, col
        col += j - i
        i = j


def read_all(text: str) -> list[SExpr]:
    """Parse every top-level form; raises SExprError on malformed input."""
    stack: list[tuple[list[SExpr], int, int]] = []
    top: list[SExpr] = []
    for tok, line, col in _tokens(text):
        if tok == "(":
            stack.append(([], line, col))
        elif tok == ")":
            if not stack:
                raise SExprError("unmatched )", line, col)
            items, l0, c0 = stack.pop()
            node = SList(tuple(items), l0, c0)
            (stack[-1][0] if stack else top).append(node)
        else:
            node = Atom(tok, line, col)
            (stack[-1][0] if stack else top).append(node)
    if stack:
        _, l0, c0 = stack[-1]
        raise SExprError("unmatched (", l0, c0)
    return top


def write(e: SExpr) -> str:
    if isinstance(e, Atom):
        if e.text.startswith('"'):
            return '"%s"' % e.text[1:]
        return e.text
    return "(%s)" % " ".join(write(x) for x in e.items)


def pretty(e: SExpr, indent: int = 0, width: int = 100) -> str:
    """One line when it fits, otherwise head on the first line and the
    remaining items indented below."""
    flat = write(e)
    if isinstance(e, Atom) or len(flat) + indent <= width or len(e.items) <= 1:
        return flat
    pad = " " * (indent + 2)
    head = write(e.items[0]) if isinstance(e.items[0], Atom) else pretty(e.items[0], indent + 2, width)
    rest = [pretty(x, indent + 2, width) for x in e.items[1:]]
    return "(%s\n%s%s)" % (head, pad, ("\n" + pad).join(rest))


def sx(*items: object) -> SList:
    """Convenience builder: strings become atoms, lists pass through."""
    out: list[SExpr] = []
    for it in items:
        if isinstance(it, (Atom, SList)):
            out.append(it)
        else:
            out.append(Atom(str(it)))
    return SList(tuple(out))
