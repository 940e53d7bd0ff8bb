"""Two-sorted syntax (state formulae over process formulae), its evaluation,
the translation into the minimal one-sorted syntax, and the existential-rule
embedding with a bounded chase.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Optional, Union as TUnion

from . import dynamic
from .core import Structure, StructureSet, Universe, Valuation
from .dynamic import ProcExpr, _DynContext
from .errors import UnboundSetVar, UnsafeRule
from .flat import EvalStats, _lfp_indexsets
from .indexsets import IndexSet


class StateExpr:
    """Base class for state-formula ASTs."""

    __slots__ = ()


@dataclass(frozen=True)
class Prop(StateExpr):
    module: str
    args: tuple[str, ...]


@dataclass(frozen=True)
class SetVar(StateExpr):
    name: str


@dataclass(frozen=True)
class Or(StateExpr):
    left: StateExpr
    right: StateExpr


@dataclass(frozen=True)
class Not(StateExpr):
    inner: StateExpr


@dataclass(frozen=True)
class And(StateExpr):
    left: StateExpr
    right: StateExpr


@dataclass(frozen=True)
class Diamond(StateExpr):
    process: ProcExpr
    inner: StateExpr


@dataclass(frozen=True)
class Box(StateExpr):
    """[a] phi = !<a>!phi."""

    process: ProcExpr
    inner: StateExpr


@dataclass(frozen=True)
class Lfp(StateExpr):
    var: str
    body: StateExpr


def state_vars(phi: StateExpr) -> frozenset[str]:
    """Relational variables mentioned anywhere in the formula."""
    if isinstance(phi, Prop):
        return frozenset(phi.args)
    if isinstance(phi, SetVar):
        return frozenset()
    if isinstance(phi, (Or, And)):
        return state_vars(phi.left) | state_vars(phi.right)
    if isinstance(phi, Not):
        return state_vars(phi.inner)
    if isinstance(phi, (Diamond, Box)):
        sigma, epsilon = dynamic.io_vocab(phi.process)
        return sigma | epsilon | state_vars(phi.inner)
    if isinstance(phi, Lfp):
        return state_vars(phi.body)
    raise TypeError(f"not a state expression: {phi!r}")


# ---------------------------------------------------------------------------
# Evaluation


def eval_state(
    phi: StateExpr,
    valuation: Valuation,
    universe: Universe,
    stats: Optional[EvalStats] = None,
) -> StructureSet:
    """The set of states satisfying the formula."""
    ctx = _DynContext(valuation, universe, stats)
    return StructureSet(universe, _eval_state(phi, ctx, valuation))


def _diamond_states(edges: IndexSet, targets: IndexSet, n: int) -> IndexSet:
    """{A : exists B with (A,B) an edge and B a target}."""
    if not edges.negated:
        return IndexSet(n, (c // n for c in edges.members if (c % n) in targets))
    # complemented edges: A qualifies unless every (A, target) pair was removed
    goal_count = len(targets)
    if goal_count == 0:
        return IndexSet.empty(n)
    removed: dict[int, int] = {}
    for c in edges.members:
        if (c % n) in targets:
            i = c // n
            removed[i] = removed.get(i, 0) + 1
    return IndexSet(n, (i for i in range(n) if removed.get(i, 0) < goal_count))


def _eval_state(phi: StateExpr, ctx: _DynContext, val: Valuation) -> IndexSet:
    u = ctx.universe
    n = u.size
    if isinstance(phi, Prop):
        return dynamic._atom_extension(ctx, phi.module, phi.args)
    if isinstance(phi, SetVar):
        value = val.env.get(phi.name)
        if not isinstance(value, StructureSet):
            raise UnboundSetVar(f"set variable {phi.name} is not bound to a structure set")
        return value.iset
    if isinstance(phi, Or):
        return _eval_state(phi.left, ctx, val).union(_eval_state(phi.right, ctx, val))
    if isinstance(phi, And):
        return _eval_state(phi.left, ctx, val).intersection(_eval_state(phi.right, ctx, val))
    if isinstance(phi, Not):
        return _eval_state(phi.inner, ctx, val).complement()
    if isinstance(phi, Diamond):
        edges = dynamic._eval_dyn(phi.process, ctx, val)
        targets = _eval_state(phi.inner, ctx, val)
        return _diamond_states(edges, targets, n)
    if isinstance(phi, Box):
        edges = dynamic._eval_dyn(phi.process, ctx, val)
        bad = _eval_state(phi.inner, ctx, val).complement()
        return _diamond_states(edges, bad, n).complement()
    if isinstance(phi, Lfp):
        from .printer import state_to_text

        label = state_to_text(phi)

        def step(current: IndexSet) -> IndexSet:
            bound = val.bind(phi.var, StructureSet(u, current))
            return _eval_state(phi.body, ctx, bound)

        return _lfp_indexsets(step, n, label, ctx.stats)
    raise TypeError(f"not a state expression: {phi!r}")


# ---------------------------------------------------------------------------
# Two-sorted -> minimal syntax


def translate_two_sorted(phi: StateExpr) -> ProcExpr:
    """Translate a state formula into the one-sorted calculus.

    Contract: B satisfies phi iff (B, B) satisfies dn(translation). Monadic
    variables become binary module variables used in diagonal position.
    """
    if isinstance(phi, Prop):
        return dynamic.Test(phi.module, phi.args)
    if isinstance(phi, SetVar):
        return dynamic.ModuleVar(phi.name)
    if isinstance(phi, Or):
        return dynamic.Union(translate_two_sorted(phi.left), translate_two_sorted(phi.right))
    if isinstance(phi, And):
        # phi1 & phi2 = !(!phi1 | !phi2)
        return dynamic.UnaryNeg(
            dynamic.Union(
                dynamic.UnaryNeg(translate_two_sorted(phi.left)),
                dynamic.UnaryNeg(translate_two_sorted(phi.right)),
            )
        )
    if isinstance(phi, Not):
        return dynamic.UnaryNeg(translate_two_sorted(phi.inner))
    if isinstance(phi, Diamond):
        return dynamic.Compose(
            translate_process(phi.process), translate_two_sorted(phi.inner)
        )
    if isinstance(phi, Box):
        # [a] phi = !<a>!phi
        return dynamic.UnaryNeg(
            dynamic.Compose(
                translate_process(phi.process),
                dynamic.UnaryNeg(translate_two_sorted(phi.inner)),
            )
        )
    if isinstance(phi, Lfp):
        return dynamic.Lfp(phi.var, dynamic.Down(translate_two_sorted(phi.body)))
    raise TypeError(f"not a state expression: {phi!r}")


def translate_process(a: ProcExpr) -> ProcExpr:
    """Rewrite state tests phi? into dn(phi^); everything else is unchanged."""
    if isinstance(a, dynamic.StateTest):
        return dynamic.Down(translate_two_sorted(a.phi))
    if isinstance(a, dynamic.Union):
        return dynamic.Union(translate_process(a.left), translate_process(a.right))
    if isinstance(a, dynamic.Compose):
        return dynamic.Compose(translate_process(a.left), translate_process(a.right))
    if isinstance(a, dynamic.Complement):
        return dynamic.Complement(translate_process(a.inner))
    if isinstance(a, dynamic.Project):
        return dynamic.Project(a.keep, translate_process(a.inner))
    if isinstance(a, dynamic.Select):
        return dynamic.Select(a.left, a.right, translate_process(a.inner))
    if isinstance(a, dynamic.Lfp):
        return dynamic.Lfp(a.var, translate_process(a.body))
    if isinstance(a, dynamic.Down):
        return dynamic.Down(translate_process(a.inner))
    if isinstance(a, dynamic.Up):
        return dynamic.Up(translate_process(a.inner))
    if isinstance(a, dynamic.UnaryNeg):
        return dynamic.UnaryNeg(translate_process(a.inner))
    if isinstance(a, dynamic.Count):
        return dynamic.Count(translate_process(a.inner), a.low, a.high)
    if isinstance(a, dynamic.Reverse):
        return dynamic.Reverse(translate_process(a.inner))
    if isinstance(a, dynamic.TestEq):
        return dynamic.TestEq(translate_process(a.inner))
    if isinstance(a, dynamic.TestNeq):
        return dynamic.TestNeq(translate_process(a.inner))
    return a


def tautology(valuation: Valuation) -> StateExpr:
    """M or !M over the first declared module (a designated fixed tautology)."""
    for name in valuation.modules:
        module = valuation.modules[name]
        args = tuple(var for var, _ in module.vvoc)
        prop = Prop(name, args)
        return Or(prop, Not(prop))
    raise UnsafeRule("no modules available to build a tautology")


def eval_equality_test(
    a1: ProcExpr,
    a2: ProcExpr,
    valuation: Valuation,
    universe: Universe,
    stats: Optional[EvalStats] = None,
) -> StructureSet:
    """States from which some executions of a1 and a2 reach the same structure.

    Sugar expansion of <a1 == a2> top: a diamond over the intersection of the
    two processes.
    """
    both = dynamic.intersect(a1, a2)
    return eval_state(Diamond(both, tautology(valuation)), valuation, universe, stats)


# ---------------------------------------------------------------------------
# Existential rules (Datalog with existentials in rule heads)


@dataclass(frozen=True)
class DatalogAtom:
    """Predicate atom; arguments starting with an uppercase letter are
    variables, anything else is a constant."""

    pred: str
    args: tuple[str, ...]

    def variables(self) -> frozenset[str]:
        return frozenset(a for a in self.args if _is_var(a))

    def __str__(self) -> str:
        return f"{self.pred}({','.join(self.args)})"


def _is_var(token: str) -> bool:
    return token[:1].isupper()


@dataclass(frozen=True)
class DatalogRule:
    body: tuple[DatalogAtom, ...]
    head: tuple[DatalogAtom, ...]
    exist_vars: frozenset[str] = frozenset()

    def __post_init__(self):
        body_vars = frozenset().union(*(a.variables() for a in self.body)) if self.body else frozenset()
        head_vars = frozenset().union(*(a.variables() for a in self.head)) if self.head else frozenset()
        if self.exist_vars & body_vars:
            raise UnsafeRule(f"existential variables {sorted(self.exist_vars & body_vars)} occur in the body")
        missing = head_vars - self.exist_vars - body_vars
        if missing:
            raise UnsafeRule(f"head variables {sorted(missing)} are neither bound by the body nor existential")


@dataclass(frozen=True)
class DatalogProgram:
    rules: tuple[DatalogRule, ...]

    def predicates(self) -> dict[str, int]:
        arities: dict[str, int] = {}
        for rule in self.rules:
            for atom in rule.body + rule.head:
                if arities.setdefault(atom.pred, len(atom.args)) != len(atom.args):
                    raise UnsafeRule(f"predicate {atom.pred} used at two arities")
        return arities


def datalog_translate(program: DatalogProgram) -> StateExpr:
    """Render an existential-rule program as a modal formula.

    Each rule becomes an implication; binary predicates turn into modalities
    whose input position is the frontier variable (the one shared with the
    body) and whose output is the existential. Supported shapes: existential
    rules with one binary head atom (optionally chained with a unary atom
    through the existential), and binary-guarded unary heads. Anything else
    raises UnsafeRule.
    """
    arities = program.predicates()
    for pred, arity in arities.items():
        if arity not in (1, 2):
            raise UnsafeRule(f"predicate {pred} has arity {arity}; only 1 and 2 are supported")
    io_split: dict[str, tuple[int, int]] = {}  # pred -> (in position, out position)
    for rule in program.rules:
        for atom in rule.head:
            if len(atom.args) == 2 and rule.exist_vars:
                positions = [i for i, arg in enumerate(atom.args) if arg in rule.exist_vars]
                if len(positions) == 1:
                    out_pos = positions[0]
                    io_split.setdefault(atom.pred, (1 - out_pos, out_pos))

    conjuncts: list[StateExpr] = []
    for rule in program.rules:
        conjuncts.append(_translate_rule(rule, io_split))
    if not conjuncts:
        raise UnsafeRule("empty program")
    result = conjuncts[0]
    for c in conjuncts[1:]:
        result = And(result, c)
    return result


def _implies(antecedent: StateExpr, consequent: StateExpr) -> StateExpr:
    return Or(Not(antecedent), consequent)


def _rule_tautology(rule: DatalogRule) -> StateExpr:
    atom = rule.body[0]
    prop = Prop(atom.pred, atom.args)
    return Or(prop, Not(prop))


def _translate_rule(rule: DatalogRule, io_split: Mapping[str, tuple[int, int]]) -> StateExpr:
    if not rule.body or not rule.head:
        raise UnsafeRule("rules need a body and a head")
    binary_heads = [a for a in rule.head if len(a.args) == 2]
    unary_heads = [a for a in rule.head if len(a.args) == 1]

    if rule.exist_vars:
        if len(rule.exist_vars) != 1 or len(binary_heads) != 1 or len(unary_heads) > 1:
            raise UnsafeRule(
                "existential rules must have one existential, one binary head atom "
                "and at most one unary head atom"
            )
        (exist,) = rule.exist_vars
        modality_atom = binary_heads[0]
        in_pos, out_pos = io_split[modality_atom.pred]
        if modality_atom.args[out_pos] != exist:
            raise UnsafeRule(f"existential {exist} is not in the output position of {modality_atom}")
        action = dynamic.Action(
            modality_atom.pred,
            modality_atom.args,
            inputs=frozenset({modality_atom.args[in_pos]}),
            outputs=frozenset({modality_atom.args[out_pos]}),
        )
        if unary_heads:
            if unary_heads[0].args != (exist,):
                raise UnsafeRule("the unary head atom must be over the existential variable")
            post: StateExpr = Prop(unary_heads[0].pred, unary_heads[0].args)
        else:
            post = _rule_tautology(rule)
        return _implies(_body_formula(rule), Diamond(action, post))

    # no existentials: a single binary body atom guarding a unary head
    if len(unary_heads) == 1 and not binary_heads and len(rule.body) == 1 and len(rule.body[0].args) == 2:
        guard = rule.body[0]
        if guard.pred in io_split:
            in_pos, out_pos = io_split[guard.pred]
        else:
            in_pos, out_pos = 0, 1
        action = dynamic.Action(
            guard.pred,
            guard.args,
            inputs=frozenset({guard.args[in_pos]}),
            outputs=frozenset({guard.args[out_pos]}),
        )
        head = unary_heads[0]
        if head.args[0] not in guard.variables():
            raise UnsafeRule(f"head variable of {head} does not occur in the guard")
        return Box(action, Prop(head.pred, head.args))
    raise UnsafeRule(f"rule shape outside the supported fragment: {rule}")


def _body_formula(rule: DatalogRule) -> StateExpr:
    props = [Prop(a.pred, a.args) for a in rule.body]
    result: StateExpr = props[0]
    for p in props[1:]:
        result = And(result, p)
    return result


class _UnknownType:
    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "Unknown"

    def __bool__(self) -> bool:
        raise TypeError("Unknown is not a truth value; compare with `is UNKNOWN`")


UNKNOWN = _UnknownType()

Fact = tuple[str, tuple[str, ...]]


def _facts_of(db: Structure) -> set[Fact]:
    facts: set[Fact] = set()
    for (name, _), rel in zip(db.vocabulary.symbols, db.relations):
        for t in rel.tuples:
            facts.add((name, t))
    return facts


def _body_matches(rule: DatalogRule, facts: set[Fact], active: list[str]):
    """All assignments of body variables (lexicographic order) matching the facts."""
    body_vars = sorted(frozenset().union(*(a.variables() for a in rule.body)))

    def extend(i: int, binding: dict[str, str]):
        if i == len(body_vars):
            if all((a.pred, tuple(binding.get(x, x) for x in a.args)) in facts for a in rule.body):
                yield dict(binding)
            return
        for el in active:
            binding[body_vars[i]] = el
            yield from extend(i + 1, binding)
            del binding[body_vars[i]]

    yield from extend(0, {})


def _head_satisfied(rule: DatalogRule, binding: Mapping[str, str], facts: set[Fact], active: list[str]) -> bool:
    exist = sorted(rule.exist_vars)

    def extend(i: int, b: dict[str, str]) -> bool:
        if i == len(exist):
            return all((a.pred, tuple(b.get(x, x) for x in a.args)) in facts for a in rule.head)
        return any(extend(i + 1, {**b, exist[i]: el}) for el in active)

    return extend(0, dict(binding))


def datalog_certain_bounded(
    program: DatalogProgram,
    db: Structure,
    query: DatalogAtom,
    null_budget: int,
) -> TUnion[bool, _UnknownType]:
    """Naive chase with at most null_budget fresh elements.

    True as soon as the query atom is derived (the chase only grows); False
    when the chase terminates without deriving it; UNKNOWN when the budget
    runs out first.
    """
    facts = _facts_of(db)
    active = list(db.domain.elements)
    nulls_used = 0
    query_fact: Fact = (query.pred, query.args)

    while True:
        if query_fact in facts:
            return True
        fired = False
        exhausted = False
        for rule in program.rules:
            for binding in list(_body_matches(rule, facts, active)):
                if _head_satisfied(rule, binding, facts, active):
                    continue
                extended = dict(binding)
                for var in sorted(rule.exist_vars):
                    if nulls_used >= null_budget:
                        exhausted = True
                        break
                    nulls_used += 1
                    fresh = f"n{nulls_used}"
                    active.append(fresh)
                    extended[var] = fresh
                if exhausted:
                    break
                for atom in rule.head:
                    facts.add((atom.pred, tuple(extended.get(x, x) for x in atom.args)))
                fired = True
            if exhausted:
                break
        if exhausted:
            return True if query_fact in facts else UNKNOWN
        if not fired:
            return query_fact in facts
