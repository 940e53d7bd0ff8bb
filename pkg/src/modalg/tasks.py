"""The reasoning-task suite: model checking, model expansion, bounded
satisfiability, generalized evaluation, query evaluation via the
singleton encoding, the temporal tasks, reachability, and the three-way
equivalence report.

mc/mx/ev/qe work directly on structures (no universe): model checking is a
recursion, projection searches only the hidden symbols, and expansions are
found by DFS with three-valued pruning. Formulas with fixed points or free
module variables fall back to an explicit universe.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterator, Mapping, Optional, Sequence

from . import dynamic, flat, lmumu
from .core import (
    AtomicModule,
    Domain,
    RelationValue,
    Structure,
    Universe,
    Valuation,
    Vocabulary,
    all_relation_values,
    build_universe,
)
from .core import DEFAULT_UNIVERSE_CAP
from .errors import (
    ArityMismatch,
    CapExceeded,
    IncompleteStructure,
    ModalgError,
    NonPropositionalFormula,
    NonSingletonEncoding,
    WellformednessError,
)
from .flat import Const, FlatExpr, Var, free_relational_vars, occurring_vars

MX_RESULT_LIMIT = 1 << 20


# ---------------------------------------------------------------------------
# Vocabulary inference for structure-level tasks


def infer_arities(e: FlatExpr, valuation: Valuation) -> dict[str, int]:
    """Arity of every variable occurring in e, from module signatures."""
    arities: dict[str, int] = {}

    def note(var: str, arity: int) -> None:
        if arities.setdefault(var, arity) != arity:
            raise ArityMismatch(f"variable {var} used at arities {arities[var]} and {arity}")

    def walk(node: FlatExpr) -> None:
        if isinstance(node, flat.Atom):
            module = valuation.module(node.module)
            if len(node.args) != len(module.vvoc):
                raise ArityMismatch(
                    f"atom {node.module} has {len(node.args)} arguments, "
                    f"vvoc has {len(module.vvoc)}"
                )
            for (_, arity), arg in zip(module.vvoc, node.args):
                note(arg, arity)
        elif isinstance(node, flat.Union):
            walk(node.left)
            walk(node.right)
        elif isinstance(node, (flat.Complement, flat.Project)):
            walk(node.inner)
        elif isinstance(node, flat.Select):
            walk(node.inner)
            l, r = node.left, node.right
            for op, other in ((l, r), (r, l)):
                if isinstance(op, Var):
                    if isinstance(other, Const) and other.arity is not None:
                        note(op.name, other.arity)
            if isinstance(l, Var) and isinstance(r, Var):
                if l.name in arities:
                    note(r.name, arities[l.name])
                elif r.name in arities:
                    note(l.name, arities[r.name])
        elif isinstance(node, flat.Lfp):
            walk(node.body)

    walk(e)
    return arities


def task_vocabulary(
    e: FlatExpr, valuation: Valuation, base: Optional[Vocabulary] = None
) -> Vocabulary:
    """Base symbols (declaration order) plus inferred extras, sorted by name."""
    arities = infer_arities(e, valuation)
    symbols: list[tuple[str, int]] = list(base.symbols) if base is not None else []
    known = {n for n, _ in symbols}
    extras = sorted(
        (valuation.symbol(var), arity)
        for var, arity in arities.items()
        if valuation.symbol(var) not in known
    )
    seen: set[str] = set()
    for name, arity in extras:
        if name in seen:
            continue
        seen.add(name)
        symbols.append((name, arity))
    return Vocabulary(tuple(symbols))


def _needs_universe(e: FlatExpr) -> bool:
    if isinstance(e, (flat.Lfp, flat.ModuleVar)):
        return True
    if isinstance(e, flat.Union):
        return _needs_universe(e.left) or _needs_universe(e.right)
    if isinstance(e, (flat.Complement, flat.Project, flat.Select)):
        return _needs_universe(e.inner)
    return False


# ---------------------------------------------------------------------------
# Structure-level satisfaction (two- and three-valued)


def _atom_binding(node: flat.Atom, valuation: Valuation) -> list[tuple[str, str, int]]:
    module = valuation.module(node.module)
    return [
        (formal, valuation.symbol(arg), arity)
        for (formal, arity), arg in zip(module.vvoc, node.args)
    ]


def _sat(e: FlatExpr, rels: Mapping[str, RelationValue], domain: Domain,
         vocab: Vocabulary, valuation: Valuation) -> bool:
    value = _sat3(e, rels, domain, vocab, valuation)
    assert value is not None, "three-valued check must be definite on total structures"
    return value


def _sat3(
    e: FlatExpr,
    rels: Mapping[str, RelationValue],
    domain: Domain,
    vocab: Vocabulary,
    valuation: Valuation,
) -> Optional[bool]:
    """Kleene evaluation on a partial interpretation (missing symbols unknown)."""
    if isinstance(e, flat.Bottom):
        return False
    if isinstance(e, flat.Atom):
        module = valuation.module(e.module)
        values = []
        for _, sym, arity in _atom_binding(e, valuation):
            if sym not in rels:
                return None
            if rels[sym].arity != arity:
                raise ArityMismatch(
                    f"atom {e.module}: symbol {sym} has arity {rels[sym].arity}, "
                    f"expected {arity}"
                )
            values.append(rels[sym])
        return module.accepts(domain, values)
    if isinstance(e, flat.Union):
        left = _sat3(e.left, rels, domain, vocab, valuation)
        if left is True:
            return True
        right = _sat3(e.right, rels, domain, vocab, valuation)
        if right is True:
            return True
        if left is False and right is False:
            return False
        return None
    if isinstance(e, flat.Complement):
        inner = _sat3(e.inner, rels, domain, vocab, valuation)
        return None if inner is None else not inner
    if isinstance(e, flat.Select):
        inner = _sat3(e.inner, rels, domain, vocab, valuation)
        if inner is False:
            return False
        theta = _theta3(e.left, e.right, rels, valuation)
        if theta is False:
            return False
        if inner is True and theta is True:
            return True
        return None
    if isinstance(e, flat.Project):
        keep_syms = {valuation.symbol(v) for v in e.keep}
        if not keep_syms <= set(rels):
            return None
        hidden = sorted(
            {valuation.symbol(v) for v in occurring_vars(e.inner)} - keep_syms
        )
        base = {s: rels[s] for s in keep_syms}
        return _exists_expansion(e.inner, base, hidden, domain, vocab, valuation)
    raise ModalgError(
        f"{type(e).__name__} needs the explicit universe; structure-level check refused"
    )


def _theta3(left, right, rels: Mapping[str, RelationValue], valuation: Valuation) -> Optional[bool]:
    def tuples_of(op):
        if isinstance(op, Const):
            return op.tuples
        sym = valuation.symbol(op.name)
        if sym not in rels:
            return None
        return rels[sym].tuples

    lt, rt = tuples_of(left), tuples_of(right)
    if lt is None or rt is None:
        return None
    return lt == rt


def _exists_expansion(
    e: FlatExpr,
    base: dict[str, RelationValue],
    symbols: Sequence[str],
    domain: Domain,
    vocab: Vocabulary,
    valuation: Valuation,
) -> bool:
    value = _sat3(e, base, domain, vocab, valuation)
    if value is not None:
        return value
    sym = symbols[0]
    for rv in all_relation_values(domain, vocab.arity(sym)):
        base[sym] = rv
        if _exists_expansion(e, base, symbols[1:], domain, vocab, valuation):
            del base[sym]
            return True
        del base[sym]
    return False


def _dfs_expansions(
    e: FlatExpr,
    base: dict[str, RelationValue],
    symbols: Sequence[str],
    domain: Domain,
    vocab: Vocabulary,
    valuation: Valuation,
) -> Iterator[dict[str, RelationValue]]:
    """All completions of base over `symbols` satisfying e, canonical order."""
    value = _sat3(e, base, domain, vocab, valuation)
    if value is False:
        return
    if value is True:
        for combo in itertools.product(
            *(all_relation_values(domain, vocab.arity(s)) for s in symbols)
        ):
            full = dict(base)
            full.update(zip(symbols, combo))
            yield full
        return
    if not symbols:
        return
    sym = symbols[0]
    for rv in all_relation_values(domain, vocab.arity(sym)):
        base[sym] = rv
        yield from _dfs_expansions(e, base, symbols[1:], domain, vocab, valuation)
        del base[sym]


# ---------------------------------------------------------------------------
# MC / MX / SAT / EV


def mc(e: FlatExpr, structure: Structure, valuation: Valuation) -> bool:
    """Model checking: does the structure satisfy the expression?"""
    needed = {valuation.symbol(v) for v in occurring_vars(e)}
    missing = needed - set(structure.vocabulary.names)
    if missing:
        raise IncompleteStructure(f"structure does not interpret {sorted(missing)}")
    if _needs_universe(e):
        universe = build_universe(structure.domain, structure.vocabulary)
        return structure in flat.eval_flat(e, valuation, universe)
    rels = {name: structure.rel(name) for name in structure.vocabulary.names}
    return _sat(e, rels, structure.domain, structure.vocabulary, valuation)


def _sigma_symbols(sigma, valuation: Valuation) -> set[str]:
    return {valuation.symbol(v) for v in sigma}


def _check_sigma_structure(sigma_syms: set[str], structure: Structure) -> None:
    have = set(structure.vocabulary.names)
    if have != sigma_syms:
        raise WellformednessError(
            f"input structure interprets {sorted(have)}, expected exactly {sorted(sigma_syms)}"
        )


def mx(
    e: FlatExpr,
    sigma,
    structure: Structure,
    valuation: Valuation,
    vocabulary: Optional[Vocabulary] = None,
    limit: int = MX_RESULT_LIMIT,
) -> list[Structure]:
    """Model expansion: all expansions of the input structure satisfying e,
    in canonical order."""
    sigma_syms = _sigma_symbols(sigma, valuation)
    _check_sigma_structure(sigma_syms, structure)
    vocab = vocabulary or task_vocabulary(e, valuation, structure.vocabulary)
    domain = structure.domain
    expansion_syms = [n for n in vocab.names if n not in sigma_syms]

    if _needs_universe(e):
        universe = build_universe(domain, vocab)
        sat = flat.eval_flat(e, valuation, universe)
        smask = universe.mask(sigma_syms) if sigma_syms else 0
        target = 0
        for s in sigma_syms:
            target |= universe.encode_rel(s, structure.rel(s))
        out = [
            universe.structure_at(i)
            for i in sat.indices()
            if (i & smask) == target
        ]
        if len(out) > limit:
            raise CapExceeded(f"more than {limit} expansions")
        return out

    base = {s: structure.rel(s) for s in sigma_syms}
    results = []
    for full in _dfs_expansions(e, base, expansion_syms, domain, vocab, valuation):
        results.append(Structure.make(domain, vocab, full))
        if len(results) > limit:
            raise CapExceeded(f"more than {limit} expansions")
    return results


def sat_bounded(
    e: FlatExpr,
    valuation: Valuation,
    domain_cap: int,
    vocabulary: Optional[Vocabulary] = None,
) -> Optional[Structure]:
    """Search domains of size 1..domain_cap (prefixes of the valuation's
    domain) in canonical order; the first satisfying structure, else None.

    None is not a proof of unsatisfiability.
    """
    if domain_cap < 1 or domain_cap > len(valuation.domain):
        raise CapExceeded(
            f"domain cap {domain_cap} outside 1..{len(valuation.domain)} available names"
        )
    vocab = vocabulary or task_vocabulary(e, valuation)
    for size in range(1, domain_cap + 1):
        domain = Domain(valuation.domain.elements[:size])
        sub_val = Valuation(domain, valuation.var_map, valuation.modules, dict(valuation.env))
        if _needs_universe(e):
            universe = build_universe(domain, vocab)
            sat = flat.eval_flat(e, sub_val, universe)
            for i in sat.indices():
                return universe.structure_at(i)
            continue
        syms = list(vocab.names)
        for full in _dfs_expansions(e, {}, syms, domain, vocab, sub_val):
            return Structure.make(domain, vocab, full)
    return None


def ev(
    e: FlatExpr,
    sigma,
    structure: Structure,
    outputs: Mapping[str, RelationValue],
    valuation: Valuation,
    vocabulary: Optional[Vocabulary] = None,
) -> Optional[Structure]:
    """General evaluation: find internal relations making (A, R, E) satisfy e.

    Returns the canonically least witness structure, or None.
    """
    sigma_syms = _sigma_symbols(sigma, valuation)
    _check_sigma_structure(sigma_syms, structure)
    free = free_relational_vars(e)
    expected_outputs = {v for v in free if v not in set(sigma)}
    if expected_outputs != set(outputs):
        raise WellformednessError(
            f"outputs must interpret exactly the free non-input variables "
            f"{sorted(expected_outputs)}, got {sorted(outputs)}"
        )
    vocab = vocabulary or task_vocabulary(e, valuation, structure.vocabulary)
    arities = infer_arities(e, valuation)
    base: dict[str, RelationValue] = {s: structure.rel(s) for s in sigma_syms}
    for var, value in outputs.items():
        if var in arities and value.arity != arities[var]:
            raise ArityMismatch(
                f"output {var} has arity {value.arity}, formula expects {arities[var]}"
            )
        base[valuation.symbol(var)] = value
    internal_syms = [n for n in vocab.names if n not in base]
    domain = structure.domain

    if _needs_universe(e):
        universe = build_universe(domain, vocab)
        sat = flat.eval_flat(e, valuation, universe)
        fixed_mask = universe.mask(base) if base else 0
        target = 0
        for s, value in base.items():
            target |= universe.encode_rel(s, value)
        for i in sat.indices():
            if (i & fixed_mask) == target:
                return universe.structure_at(i)
        return None

    for full in _dfs_expansions(e, base, internal_syms, domain, vocab, valuation):
        return Structure.make(domain, vocab, full)
    return None


# ---------------------------------------------------------------------------
# Query evaluation through the singleton encoding


class FOFormula:
    __slots__ = ()


@dataclass(frozen=True)
class FOAtom(FOFormula):
    pred: str
    args: tuple[str, ...]


@dataclass(frozen=True)
class FOEq(FOFormula):
    left: str
    right: str


@dataclass(frozen=True)
class FOAnd(FOFormula):
    left: FOFormula
    right: FOFormula


@dataclass(frozen=True)
class FOOr(FOFormula):
    left: FOFormula
    right: FOFormula


@dataclass(frozen=True)
class FONot(FOFormula):
    inner: FOFormula


@dataclass(frozen=True)
class FOExists(FOFormula):
    var: str
    body: FOFormula


def fo_free_vars(f: FOFormula) -> tuple[str, ...]:
    """Free object variables in first-occurrence order."""
    out: list[str] = []

    def walk(node: FOFormula, bound: frozenset[str]) -> None:
        if isinstance(node, FOAtom):
            for a in node.args:
                if a not in bound and a not in out:
                    out.append(a)
        elif isinstance(node, FOEq):
            for a in (node.left, node.right):
                if a not in bound and a not in out:
                    out.append(a)
        elif isinstance(node, (FOAnd, FOOr)):
            walk(node.left, bound)
            walk(node.right, bound)
        elif isinstance(node, FONot):
            walk(node.inner, bound)
        elif isinstance(node, FOExists):
            walk(node.body, bound | {node.var})

    walk(f, frozenset())
    return tuple(out)


def _singleton(domain: Domain, rels: Sequence[RelationValue]) -> bool:
    return len(rels[0].tuples) == 1


def _holds1(domain: Domain, rels: Sequence[RelationValue]) -> bool:
    r, a = rels
    return len(a.tuples) == 1 and (next(iter(a.tuples))[0],) in r.tuples


def _holds2(domain: Domain, rels: Sequence[RelationValue]) -> bool:
    r, a, b = rels
    if len(a.tuples) != 1 or len(b.tuples) != 1:
        return False
    return (next(iter(a.tuples))[0], next(iter(b.tuples))[0]) in r.tuples


def _eq1(domain: Domain, rels: Sequence[RelationValue]) -> bool:
    a, b = rels
    return len(a.tuples) == 1 and a.tuples == b.tuples


QE_MODULES = {
    "sing": AtomicModule.builtin("sing", [("A", 1)], fn=_singleton),
    "eq1": AtomicModule.builtin("eq1", [("A", 1), ("B", 1)], fn=_eq1),
    "holds1": AtomicModule.builtin("holds1", [("R", 1), ("A", 1)], fn=_holds1),
    "holds2": AtomicModule.builtin("holds2", [("R", 2), ("A", 1), ("B", 1)], fn=_holds2),
}


@dataclass(frozen=True)
class IoAssignment:
    """Per-atomic-occurrence input/output split for internal variables."""

    choices: tuple[tuple[int, str, str], ...]  # (occurrence, variable, 'in'|'out')

    def direction(self, occurrence: int, var: str) -> Optional[str]:
        for occ, v, d in self.choices:
            if occ == occurrence and v == var:
                return d
        return None

    def label(self) -> str:
        if not self.choices:
            return "<none>"
        return ", ".join(f"#{occ}.{v}={d}" for occ, v, d in self.choices)


@dataclass
class TaskInstance:
    """A formula with designated inputs, the input structure, designated
    output variables (values optional), and the valuation."""

    formula: FlatExpr
    sigma: frozenset[str]
    structure: Structure
    output_vars: tuple[str, ...]
    outputs: dict[str, RelationValue] = field(default_factory=dict)
    valuation: Valuation = None
    vocabulary: Vocabulary = None


def qe_encode(query: FOFormula, db: Structure) -> TaskInstance:
    """Encode a first-order query as an evaluation instance whose witnesses
    biject with the answer tuples (object variables become unary singleton
    relational variables)."""
    free = fo_free_vars(query)
    db_syms = set(db.vocabulary.names)
    all_vars: set[str] = set(free)

    def collect(node: FOFormula) -> None:
        if isinstance(node, FOExists):
            all_vars.add(node.var)
            collect(node.body)
        elif isinstance(node, (FOAnd, FOOr)):
            collect(node.left)
            collect(node.right)
        elif isinstance(node, FONot):
            collect(node.inner)

    collect(query)
    clash = all_vars & db_syms
    if clash:
        raise NonSingletonEncoding(
            f"query variables {sorted(clash)} collide with database symbols"
        )

    def translate(node: FOFormula) -> FlatExpr:
        if isinstance(node, FOAtom):
            arity = db.vocabulary.arity(node.pred)
            if arity == 1:
                return flat.Atom("holds1", (node.pred,) + node.args)
            if arity == 2:
                return flat.Atom("holds2", (node.pred,) + node.args)
            raise NonSingletonEncoding(f"predicate {node.pred} has unsupported arity {arity}")
        if isinstance(node, FOEq):
            return flat.Atom("eq1", (node.left, node.right))
        if isinstance(node, FOAnd):
            return flat.intersect(translate(node.left), translate(node.right))
        if isinstance(node, FOOr):
            return flat.Union(translate(node.left), translate(node.right))
        if isinstance(node, FONot):
            return flat.Complement(translate(node.inner))
        if isinstance(node, FOExists):
            body = flat.intersect(translate(node.body), flat.Atom("sing", (node.var,)))
            keep = (occurring_vars(body) | frozenset(db_syms)) - {node.var}
            return flat.Project(frozenset(keep), body)
        raise TypeError(f"not a first-order formula: {node!r}")

    e = translate(query)
    for var in free:
        e = flat.intersect(e, flat.Atom("sing", (var,)))
    symbols = list(db.vocabulary.symbols) + [(v, 1) for v in free]
    quantified = sorted(all_vars - set(free))
    symbols += [(v, 1) for v in quantified]
    vocab = Vocabulary(tuple(symbols))
    valuation = Valuation(db.domain, {}, QE_MODULES)
    return TaskInstance(
        formula=e,
        sigma=frozenset(db_syms),
        structure=db,
        output_vars=tuple(free),
        outputs={},
        valuation=valuation,
        vocabulary=vocab,
    )


def qe_answers(instance: TaskInstance) -> set[tuple[str, ...]]:
    """All answer tuples: assignments of domain elements to the output
    variables for which the evaluation instance has a witness."""
    domain = instance.structure.domain
    answers = set()
    for combo in itertools.product(domain.elements, repeat=len(instance.output_vars)):
        outputs = {
            var: RelationValue.of(1, [(el,)])
            for var, el in zip(instance.output_vars, combo)
        }
        witness = ev(
            instance.formula,
            instance.sigma,
            instance.structure,
            outputs,
            instance.valuation,
            instance.vocabulary,
        )
        if witness is not None:
            answers.add(combo)
    return answers


# ---------------------------------------------------------------------------
# Temporal tasks


def temp_mc(
    phi: lmumu.StateExpr, structure: Structure, valuation: Valuation, universe: Universe
) -> bool:
    """Temporal model checking: does the state satisfy the formula?"""
    return structure in lmumu.eval_state(phi, valuation, universe)


def temp_mc_search(
    phi: lmumu.StateExpr, valuation: Valuation, universe: Universe
) -> list[Structure]:
    """All satisfying states, in canonical order."""
    return list(lmumu.eval_state(phi, valuation, universe).structures())


def _propositional_check(phi: lmumu.StateExpr, valuation: Valuation) -> frozenset[str]:
    """Validate the propositional restriction; returns the variables used."""
    variables = lmumu.state_vars(phi)
    modules: set[str] = set()

    def collect_proc(a: dynamic.ProcExpr) -> None:
        if isinstance(a, (dynamic.Test, dynamic.Action)):
            modules.add(a.module)
        elif isinstance(a, (dynamic.Union, dynamic.Compose)):
            collect_proc(a.left)
            collect_proc(a.right)
        elif isinstance(a, (dynamic.Complement, dynamic.Project, dynamic.Select,
                            dynamic.Down, dynamic.Up, dynamic.UnaryNeg, dynamic.Count,
                            dynamic.Reverse, dynamic.TestEq, dynamic.TestNeq)):
            collect_proc(a.inner)
        elif isinstance(a, dynamic.Lfp):
            collect_proc(a.body)
        elif isinstance(a, dynamic.StateTest):
            collect_state(a.phi)

    def collect_state(p: lmumu.StateExpr) -> None:
        if isinstance(p, lmumu.Prop):
            modules.add(p.module)
        elif isinstance(p, (lmumu.Or, lmumu.And)):
            collect_state(p.left)
            collect_state(p.right)
        elif isinstance(p, lmumu.Not):
            collect_state(p.inner)
        elif isinstance(p, (lmumu.Diamond, lmumu.Box)):
            collect_proc(p.process)
            collect_state(p.inner)
        elif isinstance(p, lmumu.Lfp):
            collect_state(p.body)

    collect_state(phi)
    for name in modules:
        module = valuation.module(name)
        if not module.propositional:
            raise NonPropositionalFormula(f"module {name} is not marked propositional")
        for var, arity in module.vvoc:
            if arity != 1:
                raise NonPropositionalFormula(f"module {name} uses non-unary variable {var}")
    return variables


def temp_sat_prop(
    phi: lmumu.StateExpr, valuation: Valuation
) -> Optional[tuple[Universe, Structure]]:
    """Satisfiability for propositional formulas, over the one-element-domain
    universe only (one domain element is enough for this fragment)."""
    variables = _propositional_check(phi, valuation)
    symbols = sorted({valuation.symbol(v) for v in variables})
    domain = Domain((valuation.domain.elements[0],))
    vocab = Vocabulary(tuple((s, 1) for s in symbols))
    universe = build_universe(domain, vocab)
    small = Valuation(domain, valuation.var_map, valuation.modules, {})
    sat = lmumu.eval_state(phi, small, universe)
    for i in sat.indices():
        return universe, universe.structure_at(i)
    return None


def _goal_states(
    universe: Universe, valuation: Valuation, goal: Mapping[str, RelationValue]
) -> list[int]:
    """States whose designated symbols carry exactly the goal values."""
    pattern = 0
    mask = 0
    for var, value in goal.items():
        sym = valuation.symbol(var)
        pattern |= universe.encode_rel(sym, value)
        mask |= universe.mask([sym])
    free = universe.full_mask & ~mask
    from .indexsets import submasks

    return [pattern | f for f in submasks(free)]


def reach(
    a: dynamic.ProcExpr,
    structure: Structure,
    goal: Mapping[str, RelationValue],
    valuation: Valuation,
    universe: Universe,
) -> bool:
    """Is there an a-labelled edge from the state to a goal-satisfying state?

    The goal is a conjunction of constant tests on designated variables,
    checked on the constructed transition system.
    """
    from .printer import to_text

    ts = dynamic.build_transition_system(a, valuation, universe)
    edges = ts.edges[to_text(a)]
    source = universe.index_of(structure)
    return any(edges.contains(source, j) for j in _goal_states(universe, valuation, goal))


# ---------------------------------------------------------------------------
# The three-way equivalence report


def _atom_occurrences(e: FlatExpr) -> list[flat.Atom]:
    out: list[flat.Atom] = []

    def walk(node: FlatExpr) -> None:
        if isinstance(node, flat.Atom):
            out.append(node)
        elif isinstance(node, flat.Union):
            walk(node.left)
            walk(node.right)
        elif isinstance(node, (flat.Complement, flat.Project, flat.Select)):
            walk(node.inner)
        elif isinstance(node, flat.Lfp):
            walk(node.body)

    walk(e)
    return out


def enumerate_io_assignments(
    e: FlatExpr, internal_vars: frozenset[str]
) -> list[IoAssignment]:
    """Every in/out choice for each internal variable at each atom occurrence."""
    slots: list[tuple[int, str]] = []
    for occ, atom in enumerate(_atom_occurrences(e)):
        for var in atom.args:
            if var in internal_vars and (occ, var) not in slots:
                slots.append((occ, var))
    assignments = []
    for dirs in itertools.product(("in", "out"), repeat=len(slots)):
        choices = tuple(
            (occ, var, d) for (occ, var), d in zip(slots, dirs)
        )
        assignments.append(IoAssignment(choices))
    return assignments


def dynamize(
    e: FlatExpr,
    sigma: frozenset[str],
    output_vars: frozenset[str],
    assignment: IoAssignment,
) -> dynamic.ProcExpr:
    """Turn a flat formula into a process by designating information flow:
    input variables flow in, output variables flow out, internal variables
    per the assignment."""
    counter = itertools.count()

    def walk(node: FlatExpr) -> dynamic.ProcExpr:
        if isinstance(node, flat.Bottom):
            return dynamic.Bottom()
        if isinstance(node, flat.Atom):
            occ = next(counter)
            ins, outs = set(), set()
            for var in node.args:
                if var in sigma:
                    ins.add(var)
                elif var in output_vars:
                    outs.add(var)
                else:
                    direction = assignment.direction(occ, var)
                    if direction is None:
                        raise WellformednessError(
                            f"no direction for internal variable {var} at occurrence {occ}"
                        )
                    (ins if direction == "in" else outs).add(var)
            return dynamic.Action(node.module, node.args, frozenset(ins), frozenset(outs))
        if isinstance(node, flat.ModuleVar):
            return dynamic.ModuleVar(node.name)
        if isinstance(node, flat.Union):
            return dynamic.Union(walk(node.left), walk(node.right))
        if isinstance(node, flat.Complement):
            return dynamic.Complement(walk(node.inner))
        if isinstance(node, flat.Project):
            return dynamic.Project(node.keep, walk(node.inner))
        if isinstance(node, flat.Select):
            return dynamic.Select(node.left, node.right, walk(node.inner))
        if isinstance(node, flat.Lfp):
            return dynamic.Lfp(node.var, walk(node.body))
        raise TypeError(f"not a flat expression: {node!r}")

    return walk(e)


@dataclass
class EquivalenceRow:
    assignment: IoAssignment
    temp_mc: bool
    reach: bool
    ev: bool

    @property
    def agree(self) -> bool:
        return self.temp_mc == self.reach == self.ev


@dataclass
class EquivalenceReport:
    rows: list[EquivalenceRow]

    @property
    def passed(self) -> bool:
        return all(row.agree for row in self.rows)

    def summary(self) -> str:
        lines = [
            f"{row.assignment.label():40s} temp-MC={row.temp_mc!s:5s} "
            f"REACH={row.reach!s:5s} EV={row.ev!s:5s} "
            f"{'agree' if row.agree else 'DISAGREE'}"
            for row in self.rows
        ]
        lines.append("pass" if self.passed else "FAIL")
        return "\n".join(lines)


def _const_modules(
    outputs: Mapping[str, RelationValue], arities: Mapping[str, int]
) -> dict[str, AtomicModule]:
    modules = {}
    for var, value in outputs.items():
        name = f"const_{var}"
        modules[name] = AtomicModule.extensional(name, [(var, value.arity)], [(value,)])
    return modules


def equivalence_check(
    e: FlatExpr,
    sigma,
    structure: Structure,
    outputs: Mapping[str, RelationValue],
    valuation: Valuation,
    vocabulary: Optional[Vocabulary] = None,
    cap: int = DEFAULT_UNIVERSE_CAP,
) -> EquivalenceReport:
    """Check temp-MC = REACH = EV under every internal in/out assignment.

    The initial state interprets the inputs from A, the designated outputs
    from E, and the (projection-hidden) internal symbols as empty relations.
    """
    sigma = frozenset(sigma)
    free = free_relational_vars(e)
    internal = occurring_vars(e) - free
    output_vars = frozenset(outputs)
    if sigma & output_vars:
        raise WellformednessError(
            f"variables {sorted(sigma & output_vars)} are designated both input and output"
        )
    if free != sigma | output_vars:
        raise WellformednessError(
            f"designated inputs/outputs {sorted(sigma | output_vars)} must cover the "
            f"free variables {sorted(free)}"
        )
    vocab = vocabulary or task_vocabulary(e, valuation, structure.vocabulary)
    universe = build_universe(structure.domain, vocab, cap)
    arities = infer_arities(e, valuation)

    interpretation: dict[str, RelationValue] = {
        s: structure.rel(s) for s in structure.vocabulary.names
    }
    for var, value in outputs.items():
        interpretation[valuation.symbol(var)] = value
    for name, arity in vocab.symbols:
        interpretation.setdefault(name, RelationValue.of(arity))
    initial = Structure.make(structure.domain, vocab, interpretation)

    goal_modules = _const_modules(outputs, arities)
    val2 = valuation.with_modules(goal_modules)
    goal_formula: Optional[lmumu.StateExpr] = None
    for var in sorted(outputs):
        prop = lmumu.Prop(f"const_{var}", (var,))
        goal_formula = prop if goal_formula is None else lmumu.And(goal_formula, prop)
    if goal_formula is None:
        goal_formula = lmumu.tautology(val2)

    ev_witness = ev(e, sigma, structure, dict(outputs), valuation, vocab)
    ev_ok = ev_witness is not None

    rows = []
    for assignment in enumerate_io_assignments(e, internal):
        alpha = dynamize(e, sigma, output_vars, assignment)
        tmc = temp_mc(lmumu.Diamond(alpha, goal_formula), initial, val2, universe)
        rch = reach(alpha, initial, dict(outputs), val2, universe)
        rows.append(EquivalenceRow(assignment, tmc, rch, ev_ok))
    return EquivalenceReport(rows)
