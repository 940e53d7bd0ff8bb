"""Possibly-complemented index sets checked against plain set semantics."""

import random

import pytest

from modalg.errors import CapExceeded
from modalg.indexsets import MATERIALIZE_LIMIT, IndexSet, submasks

SPACE = 12


def model(iset):
    return set(range(iset.space)) - iset.members if iset.negated else set(iset.members)


def samples(rng, n=40):
    out = []
    for _ in range(n):
        members = {i for i in range(SPACE) if rng.random() < 0.4}
        out.append(IndexSet(SPACE, members, negated=rng.random() < 0.5))
    out += [IndexSet.empty(SPACE), IndexSet.full(SPACE)]
    return out


def test_operations_match_set_model():
    rng = random.Random(99)
    sets = samples(rng)
    for a in sets:
        assert model(a.complement()) == set(range(SPACE)) - model(a)
        assert len(a) == len(model(a))
        assert set(a.indices()) == model(a)
        for i in range(SPACE):
            assert (i in a) == (i in model(a))
    for a in sets[:20]:
        for b in sets[:20]:
            assert model(a.union(b)) == model(a) | model(b)
            assert model(a.intersection(b)) == model(a) & model(b)
            assert model(a.difference(b)) == model(a) - model(b)
            assert a.issubset(b) == (model(a) <= model(b))
            assert (a == b) == (model(a) == model(b))


def test_equality_across_representations():
    pos = IndexSet(4, {0, 1})
    neg = IndexSet(4, {2, 3}, negated=True)
    assert pos == neg and neg == pos
    assert pos != IndexSet(4, {0, 1, 2})


def test_materialization_guard():
    big = IndexSet.full(MATERIALIZE_LIMIT + 10)
    with pytest.raises(CapExceeded):
        list(big.indices())


def test_submasks_enumeration():
    assert set(submasks(0b101)) == {0b000, 0b001, 0b100, 0b101}
    assert list(submasks(0)) == [0]
