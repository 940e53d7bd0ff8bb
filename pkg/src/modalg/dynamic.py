"""The calculus of binary relations: actions with inertia, tests, binary
fixed points, the derived operations, and transition-system construction.

Edge sets live over universe-index pairs encoded as i * size + j, stored as
possibly-complemented index sets so that complement costs nothing and the
intersection sugar -(-a | -b) stays sparse.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Optional

from .core import (
    RelationValue,
    Structure,
    Universe,
    Valuation,
    extension_index_set,
)
from .errors import (
    ArityMismatch,
    CapExceeded,
    IllegalSelect,
    UnboundModuleVar,
    WellformednessError,
)
from .flat import Const, EvalStats, Var, Operand, _lfp_indexsets, _select_filter
from .indexsets import MATERIALIZE_LIMIT, IndexSet, submasks


class ProcExpr:
    """Base class for process (binary-relation) ASTs."""

    __slots__ = ()


@dataclass(frozen=True)
class Bottom(ProcExpr):
    pass


@dataclass(frozen=True)
class Test(ProcExpr):
    """M? : diagonal restricted to the module's extension."""

    module: str
    args: tuple[str, ...]


@dataclass(frozen=True)
class Action(ProcExpr):
    """Atomic action: replicate the source except on the output vocabulary."""

    module: str
    args: tuple[str, ...]
    inputs: frozenset[str]
    outputs: frozenset[str]

    def __post_init__(self):
        argset = frozenset(self.args)
        if self.inputs | self.outputs != argset or self.inputs & self.outputs:
            raise WellformednessError(
                f"action {self.module}: inputs/outputs must partition the arguments"
            )


@dataclass(frozen=True)
class ModuleVar(ProcExpr):
    name: str


@dataclass(frozen=True)
class Union(ProcExpr):
    left: ProcExpr
    right: ProcExpr


@dataclass(frozen=True)
class Complement(ProcExpr):
    inner: ProcExpr


@dataclass(frozen=True)
class Project(ProcExpr):
    keep: frozenset[str]
    inner: ProcExpr


@dataclass(frozen=True)
class Select(ProcExpr):
    left: Operand
    right: Operand
    inner: ProcExpr


@dataclass(frozen=True)
class Lfp(ProcExpr):
    var: str
    body: ProcExpr


@dataclass(frozen=True)
class Down(ProcExpr):
    """States with an outgoing transition, as a diagonal."""

    inner: ProcExpr


@dataclass(frozen=True)
class Up(ProcExpr):
    """States with an incoming transition, as a diagonal."""

    inner: ProcExpr


@dataclass(frozen=True)
class UnaryNeg(ProcExpr):
    """States with no outgoing transition, as a diagonal."""

    inner: ProcExpr


@dataclass(frozen=True)
class Diagonal(ProcExpr):
    """The nil action."""


@dataclass(frozen=True)
class Compose(ProcExpr):
    left: ProcExpr
    right: ProcExpr


@dataclass(frozen=True)
class Count(ProcExpr):
    """Paths of n..m pieces of the body."""

    inner: ProcExpr
    low: int
    high: int

    def __post_init__(self):
        if not 0 <= self.low <= self.high:
            raise WellformednessError(f"bad counting bounds {self.low}..{self.high}")


@dataclass(frozen=True)
class Reverse(ProcExpr):
    """Flip the information-propagation direction of every atomic action."""

    inner: ProcExpr


@dataclass(frozen=True)
class TestEq(ProcExpr):
    """Transitions that start and end with the same structure."""

    inner: ProcExpr


@dataclass(frozen=True)
class TestNeq(ProcExpr):
    inner: ProcExpr


@dataclass(frozen=True)
class ConstTest(ProcExpr):
    """Diagonal test: a variable's interpretation equals (or not) a constant."""

    var: str
    value: Const
    equal: bool = True


@dataclass(frozen=True)
class StateTest(ProcExpr):
    """phi? for a two-sorted state formula."""

    phi: object  # lmumu.StateExpr; untyped to avoid a circular import


def intersect(left: ProcExpr, right: ProcExpr) -> ProcExpr:
    return Complement(Union(Complement(left), Complement(right)))


def minus(left: ProcExpr, right: ProcExpr) -> ProcExpr:
    return Complement(Union(Complement(left), right))


def kleene_star(a: ProcExpr) -> ProcExpr:
    """a* := mu Z. (diag | Z ; a), with a fresh variable."""
    used = module_vars_of(a)
    name = "Zs"
    k = 0
    while name in used:
        k += 1
        name = f"Zs{k}"
    return Lfp(name, Union(Diagonal(), Compose(ModuleVar(name), a)))


def module_vars_of(a: ProcExpr) -> frozenset[str]:
    out: set[str] = set()

    def walk(node: ProcExpr) -> None:
        if isinstance(node, ModuleVar):
            out.add(node.name)
        elif isinstance(node, (Union, Compose)):
            walk(node.left)
            walk(node.right)
        elif isinstance(node, (Complement, Project, Select, Down, Up, UnaryNeg, Count,
                               Reverse, TestEq, TestNeq)):
            walk(node.inner)
        elif isinstance(node, Lfp):
            out.add(node.var)
            walk(node.body)

    walk(a)
    return frozenset(out)


def flip_actions(a: ProcExpr) -> ProcExpr:
    """Swap in/out on every atomic action (reverse distributes to atoms)."""
    if isinstance(a, Action):
        return Action(a.module, a.args, a.outputs, a.inputs)
    if isinstance(a, (Bottom, Test, ModuleVar, Diagonal, ConstTest, StateTest)):
        return a
    if isinstance(a, Union):
        return Union(flip_actions(a.left), flip_actions(a.right))
    if isinstance(a, Compose):
        return Compose(flip_actions(a.left), flip_actions(a.right))
    if isinstance(a, Complement):
        return Complement(flip_actions(a.inner))
    if isinstance(a, Project):
        return Project(a.keep, flip_actions(a.inner))
    if isinstance(a, Select):
        return Select(a.left, a.right, flip_actions(a.inner))
    if isinstance(a, Lfp):
        return Lfp(a.var, flip_actions(a.body))
    if isinstance(a, Down):
        return Down(flip_actions(a.inner))
    if isinstance(a, Up):
        return Up(flip_actions(a.inner))
    if isinstance(a, UnaryNeg):
        return UnaryNeg(flip_actions(a.inner))
    if isinstance(a, Count):
        return Count(flip_actions(a.inner), a.low, a.high)
    if isinstance(a, Reverse):
        return Reverse(flip_actions(a.inner))
    if isinstance(a, TestEq):
        return TestEq(flip_actions(a.inner))
    if isinstance(a, TestNeq):
        return TestNeq(flip_actions(a.inner))
    raise TypeError(f"not a process expression: {a!r}")


# ---------------------------------------------------------------------------
# Input/output vocabularies


def io_vocab(a: ProcExpr) -> tuple[frozenset[str], frozenset[str]]:
    """(free input variables, free output variables) of a process expression."""
    if isinstance(a, (Bottom, ModuleVar, Diagonal)):
        return frozenset(), frozenset()
    if isinstance(a, Test):
        vs = frozenset(a.args)
        return vs, vs
    if isinstance(a, Action):
        return a.inputs, a.outputs
    if isinstance(a, Union):
        ls, le = io_vocab(a.left)
        rs, re = io_vocab(a.right)
        return ls | rs, le | re
    if isinstance(a, (Complement, Select)):
        return io_vocab(a.inner)
    if isinstance(a, Project):
        s, e = io_vocab(a.inner)
        return s & a.keep, e & a.keep
    if isinstance(a, Lfp):
        return io_vocab(a.body)
    if isinstance(a, (Down, UnaryNeg)):
        s, _ = io_vocab(a.inner)
        return s, s
    if isinstance(a, Up):
        _, e = io_vocab(a.inner)
        return e, e
    if isinstance(a, Compose):
        ls, le = io_vocab(a.left)
        rs, re = io_vocab(a.right)
        return ls | rs, le | re
    if isinstance(a, Count):
        return io_vocab(a.inner)
    if isinstance(a, Reverse):
        s, e = io_vocab(a.inner)
        return e, s
    if isinstance(a, (TestEq, TestNeq)):
        s, e = io_vocab(a.inner)
        return s | e, s | e
    if isinstance(a, ConstTest):
        return frozenset({a.var}), frozenset({a.var})
    if isinstance(a, StateTest):
        from .lmumu import state_vars

        vs = state_vars(a.phi)
        return vs, vs
    raise TypeError(f"not a process expression: {a!r}")


# ---------------------------------------------------------------------------
# Edge sets


class EdgeSet:
    """Set of (source, target) universe-index pairs."""

    __slots__ = ("universe", "iset")

    def __init__(self, universe: Universe, iset: IndexSet):
        if iset.space != universe.size * universe.size:
            raise WellformednessError("edge index set does not match the pair space")
        self.universe = universe
        self.iset = iset

    @classmethod
    def empty(cls, universe: Universe) -> "EdgeSet":
        return cls(universe, IndexSet.empty(universe.size * universe.size))

    @classmethod
    def from_pairs(cls, universe: Universe, pairs: Iterable[tuple[int, int]]) -> "EdgeSet":
        n = universe.size
        return cls(universe, IndexSet(n * n, (i * n + j for i, j in pairs)))

    def pairs(self) -> Iterator[tuple[int, int]]:
        n = self.universe.size
        for code in self.iset.indices():
            yield divmod(code, n)

    def structure_pairs(self) -> Iterator[tuple[Structure, Structure]]:
        for i, j in self.pairs():
            yield self.universe.structure_at(i), self.universe.structure_at(j)

    def contains(self, i: int, j: int) -> bool:
        return i * self.universe.size + j in self.iset

    def __len__(self) -> int:
        return len(self.iset)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, EdgeSet):
            return NotImplemented
        return self.universe is other.universe and self.iset == other.iset

    def __hash__(self) -> int:
        return hash((id(self.universe), len(self.iset)))

    def union(self, other: "EdgeSet") -> "EdgeSet":
        return EdgeSet(self.universe, self.iset.union(other.iset))

    def intersection(self, other: "EdgeSet") -> "EdgeSet":
        return EdgeSet(self.universe, self.iset.intersection(other.iset))

    def complement(self) -> "EdgeSet":
        return EdgeSet(self.universe, self.iset.complement())

    def __repr__(self) -> str:
        return f"EdgeSet({len(self)} of {self.universe.size}^2)"


@dataclass
class TransitionSystem:
    """The universe with one labelled edge set per recorded subformula."""

    universe: Universe
    edges: dict[str, EdgeSet] = field(default_factory=dict)
    order: tuple[str, ...] = ()

    def edge_count(self, label: str) -> int:
        return len(self.edges[label])


# ---------------------------------------------------------------------------
# Evaluation


class _DynContext:
    __slots__ = ("valuation", "universe", "ext_cache", "stats", "record")

    def __init__(self, valuation, universe, stats=None, record=None):
        self.valuation = valuation
        self.universe = universe
        self.ext_cache: dict = {}
        self.stats = stats
        self.record = record  # dict[str, IndexSet] | None


def _diag_code(i: int, n: int) -> int:
    return i * n + i


def _diag_on(states: Iterable[int], n: int) -> IndexSet:
    return IndexSet(n * n, (_diag_code(i, n) for i in states))


def _full_diag(n: int) -> IndexSet:
    return IndexSet(n * n, (_diag_code(i, n) for i in range(n)))


def _atom_extension(ctx: _DynContext, module_name: str, args: tuple[str, ...]) -> IndexSet:
    val, u = ctx.valuation, ctx.universe
    module = val.module(module_name)
    if len(args) != len(module.vvoc):
        raise ArityMismatch(
            f"atom {module_name} has {len(args)} arguments, vvoc has {len(module.vvoc)}"
        )
    binding = {formal: val.symbol(arg) for (formal, _), arg in zip(module.vvoc, args)}
    return extension_index_set(u, module, binding, ctx.ext_cache)


def _guard(count: int, what: str) -> None:
    if count > MATERIALIZE_LIMIT:
        raise CapExceeded(f"{what} would materialize {count} pairs (> {MATERIALIZE_LIMIT})")


def _firsts(iset: IndexSet, n: int) -> set[int]:
    """Sources that have at least one outgoing pair."""
    if not iset.negated:
        return {code // n for code in iset.members}
    removed_rows: dict[int, int] = defaultdict(int)
    for code in iset.members:
        removed_rows[code // n] += 1
    return {i for i in range(n) if removed_rows.get(i, 0) < n}


def _seconds(iset: IndexSet, n: int) -> set[int]:
    if not iset.negated:
        return {code % n for code in iset.members}
    removed_cols: dict[int, int] = defaultdict(int)
    for code in iset.members:
        removed_cols[code % n] += 1
    return {j for j in range(n) if removed_cols.get(j, 0) < n}


def _restrict_side(iset: IndexSet, n: int, states: IndexSet, side: int) -> IndexSet:
    """Pairs of iset whose side-th component lies in `states` (side 0 = source)."""
    if not iset.negated:
        if side == 0:
            return IndexSet(n * n, (c for c in iset.members if (c // n) in states))
        return IndexSet(n * n, (c for c in iset.members if (c % n) in states))
    _guard(len(states) * n, "selection over a complemented edge set")
    members = set()
    for s in states.indices():
        base = s * n if side == 0 else s
        step = 1 if side == 0 else n
        for k in range(n):
            code = base + k * step
            if code not in iset.members:
                members.add(code)
    return IndexSet(n * n, members)


def _project_pairs(iset: IndexSet, u: Universe, keep_mask: int) -> IndexSet:
    """{(B1,B2): exists (C1,C2) in iset agreeing with (B1,B2) on keep_mask}."""
    n = u.size
    off = u.full_mask & ~keep_mask
    off_bits = bin(off).count("1")
    class_size = 1 << off_bits
    if not iset.negated:
        key_pairs = {((c // n) & keep_mask, (c % n) & keep_mask) for c in iset.members}
        _guard(len(key_pairs) * class_size * class_size, "binary projection")
        members = set()
        subs = list(submasks(off))
        for k1, k2 in key_pairs:
            for f1 in subs:
                row = (k1 | f1) * n
                for f2 in subs:
                    members.add(row + (k2 | f2))
        return IndexSet(n * n, members)
    removed_per_pair: dict[tuple[int, int], int] = defaultdict(int)
    for c in iset.members:
        removed_per_pair[((c // n) & keep_mask, (c % n) & keep_mask)] += 1
    dead = [kp for kp, cnt in removed_per_pair.items() if cnt == class_size * class_size]
    members = set()
    subs = list(submasks(off))
    for k1, k2 in dead:
        for f1 in subs:
            row = (k1 | f1) * n
            for f2 in subs:
                members.add(row + (k2 | f2))
    return IndexSet(n * n, members, negated=True)


def _compose_isets(a: IndexSet, b: IndexSet, n: int) -> IndexSet:
    by_second: dict[int, list[int]] = defaultdict(list)
    for code in a.indices():
        by_second[code % n].append(code // n)
    members = set()
    for code in b.indices():
        mid, j = divmod(code, n)
        for i in by_second.get(mid, ()):
            members.add(i * n + j)
            if len(members) > MATERIALIZE_LIMIT:
                raise CapExceeded("composition result too large")
    return IndexSet(n * n, members)


def eval_dyn(
    a: ProcExpr,
    valuation: Valuation,
    universe: Universe,
    stats: Optional[EvalStats] = None,
) -> EdgeSet:
    """Extension of a process expression as a set of structure pairs."""
    ctx = _DynContext(valuation, universe, stats)
    return EdgeSet(universe, _eval_dyn(a, ctx, valuation))


def _record(ctx: _DynContext, node: ProcExpr, iset: IndexSet) -> IndexSet:
    if ctx.record is not None:
        from .printer import to_text

        ctx.record[to_text(node)] = iset
    return iset


def _eval_dyn(a: ProcExpr, ctx: _DynContext, val: Valuation) -> IndexSet:
    return _record(ctx, a, _eval_dyn_inner(a, ctx, val))


def _eval_dyn_inner(a: ProcExpr, ctx: _DynContext, val: Valuation) -> IndexSet:
    u = ctx.universe
    n = u.size
    if isinstance(a, Bottom):
        return IndexSet.empty(n * n)
    if isinstance(a, Test):
        return _diag_on(_atom_extension(ctx, a.module, a.args).indices(), n)
    if isinstance(a, Action):
        ext = _atom_extension(ctx, a.module, a.args)
        emask = u.mask({val.symbol(arg) for arg in a.outputs}) if a.outputs else 0
        width = bin(emask).count("1")
        _guard(len(ext) << width, f"action {a.module}")
        members = set()
        for b2 in ext.indices():
            for b1 in u.variants(b2, emask):
                members.add(b1 * n + b2)
        return IndexSet(n * n, members)
    if isinstance(a, ModuleVar):
        value = val.env.get(a.name)
        if not isinstance(value, EdgeSet):
            raise UnboundModuleVar(f"module variable {a.name} is not bound to an edge set")
        return value.iset
    if isinstance(a, Union):
        return _eval_dyn(a.left, ctx, val).union(_eval_dyn(a.right, ctx, val))
    if isinstance(a, Complement):
        return _eval_dyn(a.inner, ctx, val).complement()
    if isinstance(a, Project):
        inner = _eval_dyn(a.inner, ctx, val)
        keep_mask = u.mask(val.symbol(v) for v in a.keep)
        return _project_pairs(inner, u, keep_mask)
    if isinstance(a, Select):
        return _eval_select(a, ctx, val)
    if isinstance(a, Lfp):
        from .printer import to_text

        label = to_text(a)

        def step(current: IndexSet) -> IndexSet:
            bound = val.bind(a.var, EdgeSet(u, current))
            return _eval_dyn(a.body, ctx, bound)

        return _lfp_indexsets(step, n * n, label, ctx.stats)
    if isinstance(a, Down):
        inner = _eval_dyn(a.inner, ctx, val)
        return _diag_on(_firsts(inner, n), n)
    if isinstance(a, Up):
        inner = _eval_dyn(a.inner, ctx, val)
        return _diag_on(_seconds(inner, n), n)
    if isinstance(a, UnaryNeg):
        inner = _eval_dyn(a.inner, ctx, val)
        return _diag_on(set(range(n)) - _firsts(inner, n), n)
    if isinstance(a, Diagonal):
        return _full_diag(n)
    if isinstance(a, Compose):
        return _compose_isets(_eval_dyn(a.left, ctx, val), _eval_dyn(a.right, ctx, val), n)
    if isinstance(a, Count):
        inner = _eval_dyn(a.inner, ctx, val)
        power = _full_diag(n)
        for _ in range(a.low):
            power = _compose_isets(power, inner, n)
        acc = power
        for _ in range(a.low, a.high):
            power = _compose_isets(power, inner, n)
            acc = acc.union(power)
        return acc
    if isinstance(a, Reverse):
        return _eval_dyn(flip_actions(a.inner), ctx, val)
    if isinstance(a, TestEq):
        return _eval_dyn(a.inner, ctx, val).intersection(_full_diag(n))
    if isinstance(a, TestNeq):
        return _eval_dyn(a.inner, ctx, val).intersection(_full_diag(n).complement())
    if isinstance(a, ConstTest):
        sym = val.symbol(a.var)
        arity = u.vocabulary.arity(sym)
        value = a.value.value(arity)
        pattern = u.encode_rel(sym, value)
        mask = u.mask([sym])
        states = {pattern | free for free in submasks(u.full_mask & ~mask)}
        if a.equal:
            return _diag_on(states, n)
        return _diag_on(set(range(n)) - states, n)
    if isinstance(a, StateTest):
        from .lmumu import _eval_state

        states = _eval_state(a.phi, ctx, val)
        return _diag_on(states.indices(), n)
    raise TypeError(f"not a process expression: {a!r}")


def _eval_select(a: Select, ctx: _DynContext, val: Valuation) -> IndexSet:
    u = ctx.universe
    n = u.size
    sigma, epsilon = io_vocab(a.inner)
    inner = _eval_dyn(a.inner, ctx, val)

    def is_in(op: Operand) -> bool:
        return isinstance(op, Const) or op.name in sigma

    def is_out(op: Operand) -> bool:
        return isinstance(op, Const) or op.name in epsilon

    l, r = a.left, a.right
    if is_in(l) and is_in(r):
        sat = _select_filter(l, r, val, u)
        return _restrict_side(inner, n, sat, side=0)
    if is_out(l) and is_out(r):
        sat = _select_filter(l, r, val, u)
        return _restrict_side(inner, n, sat, side=1)
    if isinstance(l, Var) and l.name in sigma and is_out(r):
        # feedback: guess the input L1 on the source to match L2 on the target
        l1_sym = val.symbol(l.name)
        l1_arity = u.vocabulary.arity(l1_sym)
        l1_mask = u.mask([l1_sym])
        members = set()
        for code in inner.indices():
            c, b2 = divmod(code, n)
            if isinstance(r, Var):
                r_tuples = u.rel_of_index(b2, val.symbol(r.name)).tuples
            else:
                r_tuples = r.tuples
            if any(len(t) != l1_arity for t in r_tuples):
                continue  # sets of mismatched arity can never be equal unless empty
            bits = u.encode_rel(l1_sym, RelationValue(l1_arity, frozenset(r_tuples)))
            b1 = (c & ~l1_mask) | bits
            members.add(b1 * n + b2)
        return IndexSet(n * n, members)
    raise IllegalSelect(
        f"selection operands {l} and {r} do not classify as two inputs, two outputs, "
        f"or input-output feedback for the body (inputs {sorted(sigma)}, outputs "
        f"{sorted(epsilon)})"
    )


# ---------------------------------------------------------------------------
# Transition systems


def subformulas(a: ProcExpr) -> list[ProcExpr]:
    """Postorder, duplicates removed by identity of canonical print."""
    from .printer import to_text

    seen: set[str] = set()
    out: list[ProcExpr] = []

    def walk(node: ProcExpr) -> None:
        for child in _children(node):
            walk(child)
        key = to_text(node)
        if key not in seen:
            seen.add(key)
            out.append(node)

    walk(a)
    return out


def _children(node: ProcExpr) -> tuple[ProcExpr, ...]:
    if isinstance(node, (Union, Compose)):
        return (node.left, node.right)
    if isinstance(node, (Complement, Project, Select, Lfp, Down, Up, UnaryNeg, Count,
                         Reverse, TestEq, TestNeq)):
        return (node.body,) if isinstance(node, Lfp) else (node.inner,)
    return ()


def build_transition_system(
    a: ProcExpr,
    valuation: Valuation,
    universe: Universe,
    stats: Optional[EvalStats] = None,
) -> TransitionSystem:
    """Label the universe with the extension of every subformula of `a`.

    Subformulas under a fixed point are labelled with their converged
    extension (the final iteration's value).
    """
    from .printer import to_text

    record: dict[str, IndexSet] = {}
    ctx = _DynContext(valuation, universe, stats, record)
    _eval_dyn(a, ctx, valuation)
    nodes = subformulas(a)
    edges: dict[str, EdgeSet] = {}
    order: list[str] = []
    for node in nodes:
        key = to_text(node)
        if key not in record:
            # e.g. the as-written operand of a reverse; evaluate it directly
            try:
                record[key] = _eval_dyn_inner(node, ctx, valuation)
            except UnboundModuleVar:
                continue  # open subterm of a reversed fixed point; unlabelable
        edges[key] = EdgeSet(universe, record[key])
        order.append(key)
    return TransitionSystem(universe, edges, tuple(order))
