"""Commute sites of a program and the variables they mention."""

from __future__ import annotations

from typing import Iterable

from ..lang.ast import Decl, Expr, Havoc, Old, Program, Stmt, Var, iter_exprs, subexprs, walk
from ..lang.domain import InputSpec, VarDomain, default_domain, input_spec
from ..lang.typecheck import CommuteSite, check_stmt


def spec_of(program: Program) -> InputSpec:
    return input_spec(program.domain, program.init)


def program_sites(program: Program, spec: InputSpec | None = None) -> list[CommuteSite]:
    """Commute sites in source order, each with its context environment."""
    spec = spec or spec_of(program)
    return check_stmt(program.body, spec.types)


def expr_vars(e: Expr) -> set[str]:
    return {x.name for x in subexprs(e) if isinstance(x, (Var, Old))}


def stmt_vars(s: Stmt) -> set[str]:
    out: set[str] = set()
    for st in walk(s):
        for e in iter_exprs(st):
            out |= expr_vars(e)
        if isinstance(st, Havoc):
            out.update(st.names)
        if isinstance(st, Decl):
            out.add(st.name)
        summary = getattr(st, "summary", None)
        if summary is not None:
            out.update(summary.modifies)
            out |= expr_vars(summary.relation)
    return out


def site_vars(site: CommuteSite, extra: Iterable[Expr] = ()) -> list[str]:
    """Context variables mentioned by the site's fragments, guard or ``extra``."""
    names = stmt_vars(site.left) | stmt_vars(site.right)
    if site.guard is not None:
        names |= expr_vars(site.guard)
    for e in extra:
        if e is not None:
            names |= expr_vars(e)
    return sorted(n for n in names if n in site.env)


def site_domains(site: CommuteSite, spec: InputSpec, names: Iterable[str]) -> dict[str, VarDomain]:
    """Declared domain of each variable, else the default domain of its type."""
    out = {}
    for n in names:
        out[n] = spec.domains[n] if n in spec.domains else default_domain(n, site.env[n])
    return out
