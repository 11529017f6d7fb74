"""Replace annotated loops by havoc/assume summaries.

``// @summary modifies x,y: <relation over x, y and old(v)>`` before a
``while`` becomes::

    scope { T _old_v = v; ...; havoc x, y; assume(relation' && !cond); }

where ``relation'`` reads the snapshot ``_old_v`` for every ``old(v)``.
The exit condition is always added since it holds after any terminating
run.  A loop with an empty body needs no annotation: nothing is modified.
"""

from __future__ import annotations

from typing import Mapping

from ..lang.ast import (
    Assume,
    Binop,
    Const,
    Decl,
    Expr,
    Havoc,
    LoopSummary,
    Old,
    Scope,
    Skip,
    Stmt,
    Type,
    Unop,
    Var,
    While,
    iter_exprs,
    map_expr,
    map_stmt,
    seq,
    subexprs,
    walk,
)


_TRUE = Const(True)


class LoopSummaryError(ValueError):
    pass


def _all_names(s: Stmt) -> set[str]:
    names: set[str] = set()
    for st in walk(s):
        if isinstance(st, Decl):
            names.add(st.name)
        if isinstance(st, Havoc):
            names.update(st.names)
        if isinstance(st, While) and st.summary is not None:
            names.update(st.summary.modifies)
            for e in subexprs(st.summary.relation):
                if isinstance(e, (Var, Old)):
                    names.add(e.name)
        for ex in iter_exprs(st):
            for e in subexprs(ex):
                if isinstance(e, Var):
                    names.add(e.name)
    return names


def _decl_types(s: Stmt) -> dict[str, Type]:
    return {st.name: st.type for st in walk(s) if isinstance(st, Decl)}


def has_raw_loops(s: Stmt) -> bool:
    return any(isinstance(st, While) for st in walk(s))


def summarize_loop(loop: While, types: Mapping[str, Type], taken: set[str]) -> Stmt:
    summary = loop.summary
    if summary is None:
        if isinstance(loop.body, Skip):
            summary = LoopSummary((), _TRUE)
        else:
            raise LoopSummaryError("loop without a summary annotation")
    for v in summary.modifies:
        if v not in types:
            raise LoopSummaryError(f"summary modifies unknown variable '{v}'")
    olds = sorted({e.name for e in subexprs(summary.relation) if isinstance(e, Old)})
    for v in olds:
        if v not in types:
            raise LoopSummaryError(f"summary mentions old({v}) of an unknown variable")
    for e in subexprs(summary.relation):
        if isinstance(e, Var) and e.name not in types:
            raise LoopSummaryError(f"summary mentions unknown variable '{e.name}'")
    ren: dict[str, str] = {}
    for v in olds:
        name = f"_old_{v}"
        k = 0
        while name in taken:
            k += 1
            name = f"_old_{v}{k}"
        taken.add(name)
        ren[v] = name

    def fix(e: Expr) -> Expr:
        if isinstance(e, Old):
            return Var(ren[e.name])
        return e

    rel = map_expr(summary.relation, fix)
    assumed = Binop(rel, "&&", Unop("!", loop.cond)) if rel != _TRUE else Unop("!", loop.cond)
    parts: list[Stmt] = [Decl(types[v], ren[v], Var(v)) for v in olds]
    if summary.modifies:
        parts.append(Havoc(tuple(summary.modifies)))
    parts.append(Assume(assumed))
    return Scope(seq(*parts))


def instrument_loop_summaries(s: Stmt, env: Mapping[str, Type]) -> Stmt:
    """Every loop in ``s`` replaced by its summary."""
    types = dict(env)
    types.update(_decl_types(s))
    taken = _all_names(s) | set(types)

    def fix(st: Stmt) -> Stmt:
        if isinstance(st, While):
            return summarize_loop(st, types, taken)
        return st

    return map_stmt(s, fix)

__all__ = ["LoopSummaryError", "has_raw_loops", "instrument_loop_summaries", "summarize_loop"]
