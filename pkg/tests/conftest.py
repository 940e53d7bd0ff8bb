"""Shared fixtures: the 16-structure universe and its standard modules."""

import pytest

from modalg.core import (
    AtomicModule,
    Domain,
    RelationValue,
    Structure,
    Valuation,
    Vocabulary,
    build_universe,
)


def rel(arity, *tuples):
    return RelationValue.of(arity, tuples)


def full_p_module():
    return AtomicModule.extensional("FullP", [("P0", 1)], [(rel(1, ("a",), ("b",)),)])


def empty_q_module():
    return AtomicModule.extensional("EmptyQ", [("Q0", 1)], [(rel(1),)])


def nonempty_module(name, var):
    return AtomicModule.builtin(
        name, [(var, 1)], fn=lambda domain, rels: bool(rels[0].tuples)
    )


def copy_module():
    return AtomicModule.builtin(
        "Copy", [("A", 1), ("B", 1)], fn=lambda domain, rels: rels[0] == rels[1]
    )


@pytest.fixture(scope="session")
def pq():
    """Domain {a,b}, vocabulary {P/1, Q/1}: the 16-structure universe."""
    domain = Domain(("a", "b"))
    vocab = Vocabulary((("P", 1), ("Q", 1)))
    universe = build_universe(domain, vocab)
    modules = {
        "FullP": full_p_module(),
        "EmptyQ": empty_q_module(),
        "NonemptyP": nonempty_module("NonemptyP", "N0"),
        "Copy": copy_module(),
    }
    valuation = Valuation(domain, {"P0": "P", "Q0": "Q", "N0": "P"}, modules)
    return domain, vocab, universe, valuation


def structure_pq(domain, vocab, p=(), q=()):
    return Structure.make(domain, vocab, {"P": [(x,) for x in p], "Q": [(x,) for x in q]})
