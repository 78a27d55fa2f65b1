"""EQSMT: a decision procedure for the exists*-forall* fragment of
many-sorted second-order logic over uninterpreted combinations of
theories, with a bounded expression-tree synthesis frontend."""

from .core import (
    Sort,
    Signature,
    Sentence,
    Var,
    RelVar,
    FunVar,
    validate,
    conjoin,
    sort_of,
)

__all__ = [
    "Sort",
    "Signature",
    "Sentence",
    "Var",
    "RelVar",
    "FunVar",
    "validate",
    "conjoin",
    "sort_of",
]

__version__ = "0.1.0"
