"""Possibly-complemented finite index sets.

Subsets of {0, ..., space-1} stored either as an explicit member set or as
the complement of one. Complementation is O(1) and unions/intersections go
through De Morgan, so expressions like -(-a | -b) never materialize the
ambient space. Only iteration materializes, and it is guarded: spaces here
can be as large as |universe|^2.
"""

from __future__ import annotations

from typing import Iterable, Iterator

from .errors import CapExceeded

# Hard ceiling on how many indices a single operation may materialize.
MATERIALIZE_LIMIT = 4_000_000


class IndexSet:
    """Immutable subset of range(space), possibly stored complemented."""

    __slots__ = ("space", "members", "negated")

    def __init__(self, space: int, members: Iterable[int] = (), negated: bool = False):
        self.space = space
        self.members = frozenset(members)
        self.negated = negated

    @classmethod
    def empty(cls, space: int) -> "IndexSet":
        return cls(space)

    @classmethod
    def full(cls, space: int) -> "IndexSet":
        return cls(space, (), negated=True)

    def __len__(self) -> int:
        return self.space - len(self.members) if self.negated else len(self.members)

    def __contains__(self, i: int) -> bool:
        return (i in self.members) != self.negated

    def __bool__(self) -> bool:
        return len(self) > 0

    def complement(self) -> "IndexSet":
        return IndexSet(self.space, self.members, not self.negated)

    def union(self, other: "IndexSet") -> "IndexSet":
        a, b = self, other
        if not a.negated and not b.negated:
            return IndexSet(a.space, a.members | b.members)
        if a.negated and b.negated:
            return IndexSet(a.space, a.members & b.members, negated=True)
        if b.negated:
            a, b = b, a
        # a negated, b plain: (U \ A) | B = U \ (A \ B)
        return IndexSet(a.space, a.members - b.members, negated=True)

    def intersection(self, other: "IndexSet") -> "IndexSet":
        return self.complement().union(other.complement()).complement()

    def difference(self, other: "IndexSet") -> "IndexSet":
        return self.intersection(other.complement())

    def issubset(self, other: "IndexSet") -> bool:
        a, b = self, other
        if not a.negated and not b.negated:
            return a.members <= b.members
        if not a.negated and b.negated:
            return a.members.isdisjoint(b.members)
        if a.negated and b.negated:
            return b.members <= a.members
        # (U \ A) <= B  iff  U \ B <= A  iff  |A | B| = space
        return len(a.members | b.members) == a.space

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, IndexSet):
            return NotImplemented
        if self.space != other.space:
            return False
        if self.negated == other.negated:
            return self.members == other.members
        return len(self.members) + len(other.members) == self.space and self.members.isdisjoint(
            other.members
        )

    def __hash__(self) -> int:  # weak but consistent with the semantic __eq__
        return hash((self.space, len(self)))

    def indices(self) -> Iterator[int]:
        """Ascending iteration; materializes complements (guarded)."""
        if not self.negated:
            yield from sorted(self.members)
            return
        if len(self) > MATERIALIZE_LIMIT:
            raise CapExceeded(
                f"materializing {len(self)} of {self.space} indices exceeds the "
                f"enumeration limit ({MATERIALIZE_LIMIT})"
            )
        skip = self.members
        for i in range(self.space):
            if i not in skip:
                yield i

    def __repr__(self) -> str:
        sign = "~" if self.negated else ""
        return f"IndexSet({sign}{len(self.members)} of {self.space})"


def submasks(mask: int) -> Iterator[int]:
    """All submasks of a bitmask, including 0 and the mask itself."""
    sub = mask
    while True:
        yield sub
        if sub == 0:
            return
        sub = (sub - 1) & mask
