"""Brute-force commutativity oracle over a finite domain.

For each start state the two fragments are run in both orders under the
sequential semantics and the final states compared: every visible variable
and the reachable heap, up to renaming of heap locations.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterable, Mapping

from ..explorer import bigstep
from ..lang.ast import Expr, Havoc, Scope, Seq, Stmt, walk
from ..lang.domain import InputSpec, build_state
from ..lang.state import RuntimeFault, ScopedState, canonicalize
from ..lang.typecheck import CommuteSite
from ..runtime import Machine, run_direct
from .site import site_domains, site_vars

ORACLE_MAX_ITERS = 100_000


@dataclass(frozen=True)
class Sample:
    """One start state and whether the two orders agree (None: a run failed)."""

    assignment: tuple  # sorted (name, value) pairs
    commutes: bool | None
    error: str | None = None

    @property
    def env(self) -> dict:
        return dict(self.assignment)


def eval_expr(e: Expr, state: ScopedState):
    m = Machine(state)
    return m.eval(e, m.root)


def holds(e: Expr | None, assignment: Mapping) -> bool:
    """Truth of a condition in a state; ``None`` (the ``_`` guard) is false."""
    if e is None:
        return False
    v = eval_expr(e, build_state(assignment))
    if not isinstance(v, bool):
        raise RuntimeFault("condition is not a bool")
    return v


def _has_havoc(s: Stmt) -> bool:
    return any(isinstance(x, Havoc) for x in walk(s))


def run_orders(left: Stmt, right: Stmt, state: ScopedState):
    """Outcomes of ``left;right`` and ``right;left`` (sets when havoc is present)."""
    ab = Seq(Scope(left), Scope(right))
    ba = Seq(Scope(right), Scope(left))
    if _has_havoc(left) or _has_havoc(right):
        r1, r2 = bigstep(ab, state, "seq"), bigstep(ba, state, "seq")
        if r1.errors or r2.errors:
            raise RuntimeFault((r1.errors + r2.errors)[0])
        return r1.finals, r2.finals
    return (canonicalize(run_direct(ab, state, ORACLE_MAX_ITERS)),
            canonicalize(run_direct(ba, state, ORACLE_MAX_ITERS)))


def commutes_at(left: Stmt, right: Stmt, assignment: Mapping) -> Sample:
    key = tuple(sorted(assignment.items()))
    try:
        a, b = run_orders(left, right, build_state(assignment))
    except RuntimeFault as exc:
        return Sample(key, None, str(exc))
    return Sample(key, a == b)


def enumerate_assignments(domains: Mapping) -> Iterable[dict]:
    names = sorted(domains)
    for combo in itertools.product(*(domains[n].values for n in names)):
        yield dict(zip(names, combo))


def site_samples(site: CommuteSite, spec: InputSpec, extra: Iterable[Expr] = ()) -> list[Sample]:
    """Commutativity of the site at every state of its variables' domains."""
    names = site_vars(site, extra)
    doms = site_domains(site, spec, names)
    return [commutes_at(site.left, site.right, a) for a in enumerate_assignments(doms)]


@dataclass
class OracleVerdict:
    valid: bool
    witness: dict | None = None  # a state satisfying phi where the orders differ
    checked: int = 0  # states satisfying phi
    excluded: int = 0  # states where a run or phi failed
    complete: bool = True  # no state outside phi commutes
    slack: dict | None = None  # a commuting state outside phi
    total: int = 0
    errors: list[str] = field(default_factory=list)


def judge(samples: Iterable[Sample], phi: Expr | None) -> OracleVerdict:
    v = OracleVerdict(True)
    for s in samples:
        v.total += 1
        if s.commutes is None:
            v.excluded += 1
            if len(v.errors) < 3:
                v.errors.append(s.error or "error")
            continue
        try:
            p = holds(phi, s.env)
        except RuntimeFault as exc:
            v.excluded += 1
            if len(v.errors) < 3:
                v.errors.append(f"condition: {exc}")
            continue
        if p:
            v.checked += 1
            if not s.commutes and v.valid:
                v.valid = False
                v.witness = s.env
        elif s.commutes and v.complete:
            v.complete = False
            v.slack = s.env
    return v


def oracle_check_condition(site: CommuteSite, phi: Expr | None, spec: InputSpec,
                           samples: list[Sample] | None = None) -> OracleVerdict:
    """Valid iff both orders agree on every domain state satisfying ``phi``."""
    if samples is None:
        samples = site_samples(site, spec, [phi] if phi is not None else [])
    return judge(samples, phi)


__all__ = [
    "OracleVerdict",
    "Sample",
    "commutes_at",
    "enumerate_assignments",
    "eval_expr",
    "holds",
    "judge",
    "oracle_check_condition",
    "run_orders",
    "site_samples",
]
