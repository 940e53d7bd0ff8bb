"""modalg: an explicit-state engine for a lifted relational algebra over
sets of structures, its binary-relation calculus with information flow, the
two-sorted modal logic on top of it, and the associated reasoning tasks."""

from .core import (
    AtomicModule,
    Domain,
    RelationValue,
    Structure,
    StructureSet,
    Universe,
    Valuation,
    Vocabulary,
    all_relation_values,
    build_universe,
    extension_of,
    module_membership,
    propositional_module,
)
from .errors import ModalgError

__all__ = [
    "AtomicModule",
    "Domain",
    "ModalgError",
    "RelationValue",
    "Structure",
    "StructureSet",
    "Universe",
    "Valuation",
    "Vocabulary",
    "all_relation_values",
    "build_universe",
    "extension_of",
    "module_membership",
    "propositional_module",
]
