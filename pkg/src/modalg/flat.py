"""The flat algebra: union, complement, projection, selection, and least
fixed points over sets of structures.

Evaluation is explicit-state: extensions are subsets of a materializable
universe, represented as possibly-complemented index sets.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterable, Optional, Union as TUnion

from .core import (
    RelationValue,
    StructureSet,
    Universe,
    Valuation,
    extension_index_set,
)
from .errors import (
    ArityMismatch,
    NonMonotoneDetected,
    UnboundModuleVar,
    WellformednessError,
)
from .indexsets import IndexSet, submasks


class FlatExpr:
    """Base class for flat-algebra ASTs."""

    __slots__ = ()


@dataclass(frozen=True)
class Bottom(FlatExpr):
    pass


@dataclass(frozen=True)
class Atom(FlatExpr):
    module: str
    args: tuple[str, ...]


@dataclass(frozen=True)
class ModuleVar(FlatExpr):
    name: str


@dataclass(frozen=True)
class Union(FlatExpr):
    left: FlatExpr
    right: FlatExpr


@dataclass(frozen=True)
class Complement(FlatExpr):
    inner: FlatExpr


@dataclass(frozen=True)
class Project(FlatExpr):
    keep: frozenset[str]
    inner: FlatExpr


@dataclass(frozen=True)
class Var:
    """Selection operand: a relational variable."""

    name: str


@dataclass(frozen=True)
class Const:
    """Selection operand: a literal relation. Arity may be deferred for '{}'."""

    tuples: frozenset[tuple[str, ...]]
    arity: Optional[int] = None

    def __post_init__(self):
        if self.arity is None and self.tuples:
            object.__setattr__(self, "arity", len(next(iter(self.tuples))))
        for t in self.tuples:
            if len(t) != self.arity:
                raise ArityMismatch(f"constant tuples of mixed arity: {sorted(self.tuples)}")

    @classmethod
    def of(cls, tuples: Iterable[tuple[str, ...]], arity: Optional[int] = None) -> "Const":
        return cls(frozenset(tuples), arity)

    def value(self, arity: int) -> RelationValue:
        if self.arity is not None and self.arity != arity:
            raise ArityMismatch(f"constant has arity {self.arity}, context expects {arity}")
        return RelationValue(arity, self.tuples)


Operand = TUnion[Var, Const]


@dataclass(frozen=True)
class Select(FlatExpr):
    left: Operand
    right: Operand
    inner: FlatExpr


@dataclass(frozen=True)
class Lfp(FlatExpr):
    var: str
    body: FlatExpr


def intersect(left: FlatExpr, right: FlatExpr) -> FlatExpr:
    """Parser sugar: a & b = -(-a | -b)."""
    return Complement(Union(Complement(left), Complement(right)))


def minus(left: FlatExpr, right: FlatExpr) -> FlatExpr:
    """Parser sugar: a \\ b = -(-a | b)."""
    return Complement(Union(Complement(left), right))


# ---------------------------------------------------------------------------
# Static analysis


def occurring_vars(e: FlatExpr) -> frozenset[str]:
    """Relational variables used by atoms or selection operands."""
    if isinstance(e, (Bottom, ModuleVar)):
        return frozenset()
    if isinstance(e, Atom):
        return frozenset(e.args)
    if isinstance(e, Union):
        return occurring_vars(e.left) | occurring_vars(e.right)
    if isinstance(e, (Complement, Project)):
        return occurring_vars(e.inner)
    if isinstance(e, Select):
        ops = {op.name for op in (e.left, e.right) if isinstance(op, Var)}
        return occurring_vars(e.inner) | frozenset(ops)
    if isinstance(e, Lfp):
        return occurring_vars(e.body)
    raise TypeError(f"not a flat expression: {e!r}")


def free_relational_vars(e: FlatExpr) -> frozenset[str]:
    """Variables visible from outside: projection existentially hides the rest."""
    if isinstance(e, (Bottom, ModuleVar)):
        return frozenset()
    if isinstance(e, Atom):
        return frozenset(e.args)
    if isinstance(e, Union):
        return free_relational_vars(e.left) | free_relational_vars(e.right)
    if isinstance(e, Complement):
        return free_relational_vars(e.inner)
    if isinstance(e, Project):
        return free_relational_vars(e.inner) & e.keep
    if isinstance(e, Select):
        ops = {op.name for op in (e.left, e.right) if isinstance(op, Var)}
        return free_relational_vars(e.inner) | frozenset(ops)
    if isinstance(e, Lfp):
        return free_relational_vars(e.body)
    raise TypeError(f"not a flat expression: {e!r}")


@dataclass(frozen=True)
class Violation:
    node: object
    message: str

    def __str__(self) -> str:
        from .printer import to_text

        return f"{self.message} (in: {to_text(self.node)})"


def _polarities(e: FlatExpr, var: str, negations: int, hits: list[int]) -> None:
    if isinstance(e, ModuleVar):
        if e.name == var:
            hits.append(negations)
    elif isinstance(e, Union):
        _polarities(e.left, var, negations, hits)
        _polarities(e.right, var, negations, hits)
    elif isinstance(e, Complement):
        _polarities(e.inner, var, negations + 1, hits)
    elif isinstance(e, (Project, Select)):
        _polarities(e.inner, var, negations, hits)
    elif isinstance(e, Lfp):
        if e.var != var:  # shadowed
            _polarities(e.body, var, negations, hits)


def check_wellformed(e: FlatExpr) -> list[Violation]:
    """Positivity, projection scoping and arity-consistency diagnostics.

    Empty list iff well-formed. Arity consistency is checked across variable
    uses (a variable used at two different arities is flagged); binding to
    concrete symbols is validated at evaluation time.
    """
    violations: list[Violation] = []
    arities: dict[str, int] = {}

    def note_arity(var: str, arity: Optional[int], node: FlatExpr) -> None:
        if arity is None:
            return
        if var in arities and arities[var] != arity:
            violations.append(
                Violation(node, f"variable {var} used at arities {arities[var]} and {arity}")
            )
        else:
            arities[var] = arity

    def walk(node: FlatExpr) -> None:
        if isinstance(node, (Bottom, ModuleVar, Atom)):
            return
        if isinstance(node, Union):
            walk(node.left)
            walk(node.right)
        elif isinstance(node, Complement):
            walk(node.inner)
        elif isinstance(node, Project):
            missing = node.keep - occurring_vars(node.inner)
            if missing:
                violations.append(
                    Violation(node, f"projection keeps {sorted(missing)} which do not occur")
                )
            walk(node.inner)
        elif isinstance(node, Select):
            l, r = node.left, node.right
            if isinstance(l, Const) and isinstance(r, Const):
                if l.arity is not None and r.arity is not None and l.arity != r.arity:
                    violations.append(Violation(node, "selection constants of different arity"))
            for op in (l, r):
                if isinstance(op, Var) and op.name in arities:
                    other = r if op is l else l
                    if isinstance(other, Const) and other.arity is not None:
                        note_arity(op.name, other.arity, node)
            walk(node.inner)
        elif isinstance(node, Lfp):
            hits: list[int] = []
            _polarities(node.body, node.var, 0, hits)
            if any(h % 2 for h in hits):
                violations.append(
                    Violation(node, f"module variable {node.var} occurs under an odd "
                    f"number of complements")
                )
            walk(node.body)
        else:
            violations.append(Violation(node, f"unknown node {type(node).__name__}"))

    walk(e)
    return violations


# ---------------------------------------------------------------------------
# Evaluation


class EvalStats:
    """Optional recorder threaded through the evaluators."""

    def __init__(self):
        self.fixpoint_iterations: dict[str, int] = {}

    def record_fixpoint(self, label: str, iterations: int) -> None:
        self.fixpoint_iterations[label] = max(
            self.fixpoint_iterations.get(label, 0), iterations
        )


def _select_filter(
    left: Operand, right: Operand, valuation: Valuation, u: Universe
) -> IndexSet:
    """Indices whose structure satisfies L1 = L2 (state-level comparison)."""
    if isinstance(left, Const) and isinstance(right, Const):
        arity = left.arity if left.arity is not None else right.arity
        if arity is None or left.value(arity).tuples == right.value(arity).tuples:
            return IndexSet.full(u.size)
        return IndexSet.empty(u.size)
    # at least one variable: enumerate only the involved symbol slots
    vars_ = [op.name for op in (left, right) if isinstance(op, Var)]
    syms = [valuation.symbol(v) for v in vars_]
    for v, s in zip(vars_, syms):
        if s not in u.vocabulary:
            raise ArityMismatch(f"selection operand {v} maps to unknown symbol {s}")
    mask = u.mask(syms)
    rest = u.full_mask & ~mask

    def val_of(op: Operand, pattern: int) -> frozenset:
        if isinstance(op, Var):
            return u.rel_of_index(pattern, valuation.symbol(op.name)).tuples
        arity = op.arity
        if arity is None:
            arity = u.vocabulary.arity(syms[0])
        return op.value(arity).tuples

    members = set()
    for pattern in submasks(mask):
        if val_of(left, pattern) == val_of(right, pattern):
            for free in submasks(rest):
                members.add(pattern | free)
    return IndexSet(u.size, members)


def _project_iset(inner: IndexSet, u: Universe, keep_mask: int) -> IndexSet:
    """{A : exists A' in inner with A agreeing on keep_mask}."""
    off = u.full_mask & ~keep_mask
    if not inner.negated:
        keys = {i & keep_mask for i in inner.members}
        members = set()
        for key in keys:
            for free in submasks(off):
                members.add(key | free)
        return IndexSet(u.size, members)
    # complemented: a keep-class survives unless every member was removed
    class_size = 1 << bin(off).count("1")
    removed_per_class: dict[int, int] = {}
    for i in inner.members:
        key = i & keep_mask
        removed_per_class[key] = removed_per_class.get(key, 0) + 1
    dead = [key for key, n in removed_per_class.items() if n == class_size]
    members = set()
    for key in dead:
        for free in submasks(off):
            members.add(key | free)
    return IndexSet(u.size, members, negated=True)


def _check_injective(e: FlatExpr, valuation: Valuation) -> None:
    """Restriction semantics (projection, agreement) needs distinct symbols
    per variable; reject valuations that identify two variables."""
    by_symbol: dict[str, str] = {}
    for var in sorted(occurring_vars(e)):
        sym = valuation.symbol(var)
        if sym in by_symbol and by_symbol[sym] != var:
            raise WellformednessError(
                f"valuation maps distinct variables {by_symbol[sym]} and {var} to "
                f"symbol {sym}; restriction semantics would be ambiguous"
            )
        by_symbol[sym] = var


def _lfp_indexsets(
    f: Callable[[IndexSet], IndexSet], space: int, label: str, stats: Optional[EvalStats]
) -> IndexSet:
    current = IndexSet.empty(space)
    iterations = 0
    while True:
        iterations += 1
        nxt = f(current)
        if not current.issubset(nxt):
            raise NonMonotoneDetected(
                f"fixpoint iteration for {label} shrank the set; body is not monotone"
            )
        if nxt.issubset(current):
            if stats is not None:
                stats.record_fixpoint(label, iterations)
            return current
        current = nxt


def eval_flat(
    e: FlatExpr,
    valuation: Valuation,
    universe: Universe,
    stats: Optional[EvalStats] = None,
) -> StructureSet:
    """Extension of a flat expression: the set of satisfying structures."""
    _check_injective(e, valuation)
    cache: dict = {}
    iset = _eval(e, valuation, universe, cache, stats)
    return StructureSet(universe, iset)


def _eval(
    e: FlatExpr,
    valuation: Valuation,
    u: Universe,
    ext_cache: dict,
    stats: Optional[EvalStats],
) -> IndexSet:
    if isinstance(e, Bottom):
        return IndexSet.empty(u.size)
    if isinstance(e, Atom):
        module = valuation.module(e.module)
        if len(e.args) != len(module.vvoc):
            raise ArityMismatch(
                f"atom {e.module} has {len(e.args)} arguments, vvoc has {len(module.vvoc)}"
            )
        binding = {
            formal: valuation.symbol(arg) for (formal, _), arg in zip(module.vvoc, e.args)
        }
        return extension_index_set(u, module, binding, ext_cache)
    if isinstance(e, ModuleVar):
        value = valuation.env.get(e.name)
        if not isinstance(value, StructureSet):
            raise UnboundModuleVar(f"module variable {e.name} is not bound to a structure set")
        return value.iset
    if isinstance(e, Union):
        return _eval(e.left, valuation, u, ext_cache, stats).union(
            _eval(e.right, valuation, u, ext_cache, stats)
        )
    if isinstance(e, Complement):
        return _eval(e.inner, valuation, u, ext_cache, stats).complement()
    if isinstance(e, Project):
        inner = _eval(e.inner, valuation, u, ext_cache, stats)
        keep_mask = u.mask(valuation.symbol(v) for v in e.keep)
        return _project_iset(inner, u, keep_mask)
    if isinstance(e, Select):
        inner = _eval(e.inner, valuation, u, ext_cache, stats)
        return inner.intersection(_select_filter(e.left, e.right, valuation, u))
    if isinstance(e, Lfp):
        from .printer import to_text

        label = to_text(e)

        def step(current: IndexSet) -> IndexSet:
            bound = valuation.bind(e.var, StructureSet(u, current))
            return _eval(e.body, bound, u, ext_cache, stats)

        return _lfp_indexsets(step, u.size, label, stats)
    raise TypeError(f"not a flat expression: {e!r}")


def lfp_iterate(
    f: Callable[[StructureSet], StructureSet],
    universe: Universe,
    stats: Optional[EvalStats] = None,
    label: str = "<anonymous>",
) -> StructureSet:
    """Least fixed point of a monotone set transformer, by iteration from {}.

    Terminates in at most |universe| + 1 steps; raises NonMonotoneDetected if
    a step shrinks the set.
    """

    def step(iset: IndexSet) -> IndexSet:
        return f(StructureSet(universe, iset)).iset

    return StructureSet(universe, _lfp_indexsets(step, universe.size, label, stats))
