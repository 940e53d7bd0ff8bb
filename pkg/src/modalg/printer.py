"""Canonical printer for the three expression sorts.

The output is valid surface syntax and deterministic (sets are emitted
sorted), so it doubles as the subformula-labelling key for transition
systems. parse(to_text(ast)) == ast is a tested invariant.
"""

from __future__ import annotations

from . import dynamic, flat, lmumu
from .flat import Const, Var

# precedence levels: 0 mu, 1 union, 2 compose/and, 3 prefix unary, 4 primary
_MU, _UNION, _SEQ, _PREFIX, _PRIMARY = 0, 1, 2, 3, 4


def _paren(text: str, level: int, required: int) -> str:
    return f"({text})" if level < required else text


def _operand(op) -> str:
    if isinstance(op, Var):
        return op.name
    if isinstance(op, Const):
        items = ",".join("(" + ",".join(t) + ")" for t in sorted(op.tuples))
        return "'{" + items + "}'"
    raise TypeError(f"not a selection operand: {op!r}")


def _names(names) -> str:
    return ",".join(sorted(names))


def to_text(e) -> str:
    text, _ = _emit(e)
    return text


def state_to_text(phi) -> str:
    return to_text(phi)


def _emit(e) -> tuple[str, int]:
    if isinstance(e, flat.FlatExpr):
        return _emit_flat(e)
    if isinstance(e, dynamic.ProcExpr):
        return _emit_proc(e)
    if isinstance(e, lmumu.StateExpr):
        return _emit_state(e)
    raise TypeError(f"not an expression: {e!r}")


def _emit_flat(e: flat.FlatExpr) -> tuple[str, int]:
    if isinstance(e, flat.Bottom):
        return "bot", _PRIMARY
    if isinstance(e, flat.Atom):
        return f"{e.module}({','.join(e.args)})", _PRIMARY
    if isinstance(e, flat.ModuleVar):
        return e.name, _PRIMARY
    if isinstance(e, flat.Union):
        lt, ll = _emit_flat(e.left)
        rt, rl = _emit_flat(e.right)
        return f"{_paren(lt, ll, _UNION)} | {_paren(rt, rl, _SEQ)}", _UNION
    if isinstance(e, flat.Complement):
        it, il = _emit_flat(e.inner)
        return f"-{_paren(it, il, _PREFIX)}", _PREFIX
    if isinstance(e, flat.Project):
        it, il = _emit_flat(e.inner)
        return f"pi{{{_names(e.keep)}}} {_paren(it, il, _PREFIX)}", _PREFIX
    if isinstance(e, flat.Select):
        it, il = _emit_flat(e.inner)
        return (
            f"sel[{_operand(e.left)} == {_operand(e.right)}] {_paren(it, il, _PREFIX)}",
            _PREFIX,
        )
    if isinstance(e, flat.Lfp):
        bt, _ = _emit_flat(e.body)
        return f"mu {e.var} . {bt}", _MU
    raise TypeError(f"not a flat expression: {e!r}")


def _action_args(e: dynamic.Action) -> str:
    parts = []
    previous = None
    for arg in e.args:
        marker = "in" if arg in e.inputs else "out"
        if marker != previous:
            sep = "; " if parts else ""
            parts.append(f"{sep}{marker} {arg}")
            previous = marker
        else:
            parts.append(f", {arg}")
    return "".join(parts)


def _emit_proc(e: dynamic.ProcExpr) -> tuple[str, int]:
    if isinstance(e, dynamic.Bottom):
        return "bot", _PRIMARY
    if isinstance(e, dynamic.Diagonal):
        return "diag", _PRIMARY
    if isinstance(e, dynamic.Test):
        return f"{e.module}({','.join(e.args)})?", _PRIMARY
    if isinstance(e, dynamic.Action):
        return f"{e.module}({_action_args(e)})", _PRIMARY
    if isinstance(e, dynamic.ModuleVar):
        return e.name, _PRIMARY
    if isinstance(e, dynamic.Union):
        lt, ll = _emit_proc(e.left)
        rt, rl = _emit_proc(e.right)
        return f"{_paren(lt, ll, _UNION)} | {_paren(rt, rl, _SEQ)}", _UNION
    if isinstance(e, dynamic.Compose):
        lt, ll = _emit_proc(e.left)
        rt, rl = _emit_proc(e.right)
        return f"{_paren(lt, ll, _SEQ)} ; {_paren(rt, rl, _PREFIX)}", _SEQ
    if isinstance(e, dynamic.Complement):
        it, il = _emit_proc(e.inner)
        return f"-{_paren(it, il, _PREFIX)}", _PREFIX
    if isinstance(e, dynamic.Down):
        it, il = _emit_proc(e.inner)
        return f"dn {_paren(it, il, _PREFIX)}", _PREFIX
    if isinstance(e, dynamic.Up):
        it, il = _emit_proc(e.inner)
        return f"up {_paren(it, il, _PREFIX)}", _PREFIX
    if isinstance(e, dynamic.UnaryNeg):
        it, il = _emit_proc(e.inner)
        return f"neg {_paren(it, il, _PREFIX)}", _PREFIX
    if isinstance(e, dynamic.Reverse):
        it, il = _emit_proc(e.inner)
        return f"rev {_paren(it, il, _PREFIX)}", _PREFIX
    if isinstance(e, dynamic.Project):
        it, il = _emit_proc(e.inner)
        return f"pi{{{_names(e.keep)}}} {_paren(it, il, _PREFIX)}", _PREFIX
    if isinstance(e, dynamic.Select):
        it, il = _emit_proc(e.inner)
        return (
            f"sel[{_operand(e.left)} == {_operand(e.right)}] {_paren(it, il, _PREFIX)}",
            _PREFIX,
        )
    if isinstance(e, dynamic.Lfp):
        bt, _ = _emit_proc(e.body)
        return f"mu {e.var} . {bt}", _MU
    if isinstance(e, dynamic.Count):
        it, il = _emit_proc(e.inner)
        return f"{_paren(it, il, _PRIMARY)}^{{{e.low},{e.high}}}", _PRIMARY
    if isinstance(e, dynamic.TestEq):
        it, il = _emit_proc(e.inner)
        return f"{_paren(it, il, _PRIMARY)}=?", _PRIMARY
    if isinstance(e, dynamic.TestNeq):
        it, il = _emit_proc(e.inner)
        return f"{_paren(it, il, _PRIMARY)}!=?", _PRIMARY
    if isinstance(e, dynamic.ConstTest):
        rel = _operand(e.value)
        op = "==" if e.equal else "!="
        return f"const[{e.var} {op} {rel}]", _PRIMARY
    if isinstance(e, dynamic.StateTest):
        return f"({to_text(e.phi)})?", _PRIMARY
    raise TypeError(f"not a process expression: {e!r}")


def _emit_state(e: lmumu.StateExpr) -> tuple[str, int]:
    if isinstance(e, lmumu.Prop):
        return f"prop {e.module}({','.join(e.args)})", _PRIMARY
    if isinstance(e, lmumu.SetVar):
        return e.name, _PRIMARY
    if isinstance(e, lmumu.Or):
        lt, ll = _emit_state(e.left)
        rt, rl = _emit_state(e.right)
        return f"{_paren(lt, ll, _UNION)} | {_paren(rt, rl, _SEQ)}", _UNION
    if isinstance(e, lmumu.And):
        lt, ll = _emit_state(e.left)
        rt, rl = _emit_state(e.right)
        return f"{_paren(lt, ll, _SEQ)} & {_paren(rt, rl, _PREFIX)}", _SEQ
    if isinstance(e, lmumu.Not):
        it, il = _emit_state(e.inner)
        return f"!{_paren(it, il, _PREFIX)}", _PREFIX
    if isinstance(e, lmumu.Diamond):
        it, il = _emit_state(e.inner)
        return f"<{to_text(e.process)}> {_paren(it, il, _PREFIX)}", _PREFIX
    if isinstance(e, lmumu.Box):
        it, il = _emit_state(e.inner)
        return f"[{to_text(e.process)}] {_paren(it, il, _PREFIX)}", _PREFIX
    if isinstance(e, lmumu.Lfp):
        bt, _ = _emit_state(e.body)
        return f"mu {e.var} . {bt}", _MU
    raise TypeError(f"not a state expression: {e!r}")
