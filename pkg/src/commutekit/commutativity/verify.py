"""Checking a user-supplied commutativity condition with the oracle and/or solver."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

from ..lang.ast import Expr
from ..lang.domain import InputSpec
from ..lang.typecheck import CommuteSite
from .embed import EmbedError, LogicalAdt, decode_state, embed, emit_commutativity_query
from .oracle import OracleVerdict, Sample, commutes_at, oracle_check_condition
from .solver import DEFAULT_TIMEOUT, SolverUnavailable, run_smt, solver_available

log = logging.getLogger(__name__)

MODES = ("oracle", "solver", "both")


@dataclass
class SolverVerdict:
    status: str  # "valid", "invalid", "unknown" or "error"
    witness: dict | None = None
    faithful: bool = True  # the witness decodes to a concrete state
    confirmed: bool | None = None  # the oracle reproduces the witness
    complete: bool | None = None
    seconds: float = 0.0
    query: str = ""
    notes: list[str] = field(default_factory=list)


@dataclass
class Verdict:
    status: str  # "valid", "invalid" or "unknown"
    witness: dict | None = None
    complete: bool | None = None  # no state outside the condition commutes
    proved: bool = False  # certified by the solver, not only on the finite domain
    mode: str = "both"
    oracle: OracleVerdict | None = None
    solver: SolverVerdict | None = None
    disagreement: bool = False
    notes: list[str] = field(default_factory=list)

    @property
    def valid(self) -> bool:
        return self.status == "valid"


def solver_check(site: CommuteSite, phi: Expr | None, *, adt: LogicalAdt | None = None,
                 cmd: str | None = None, timeout: float = DEFAULT_TIMEOUT,
                 completeness: bool = True) -> SolverVerdict:
    """Validity (and optionally completeness) of ``phi`` via the SMT query."""
    try:
        adt = adt or embed(site)
        q = emit_commutativity_query(adt, phi)
    except EmbedError as exc:
        return SolverVerdict("error", notes=[f"not embeddable: {exc}"])
    r = run_smt(q.text, cmd, timeout)
    v = SolverVerdict("unknown", seconds=r.seconds, query=q.text)
    if r.status == "unsat":
        v.status = "valid"
    elif r.status == "sat":
        v.status = "invalid"
        d = decode_state(adt, q.probes, r.values)
        v.witness, v.faithful = d.assignment, d.faithful
        v.notes += d.notes
        s = commutes_at(site.left, site.right, d.assignment)
        v.confirmed = s.commutes is False
        if not v.confirmed:
            why = s.error or "the two orders agree there"
            v.notes.append(f"solver witness not reproduced by execution ({why})")
    else:
        v.notes.append(f"solver returned {r.status}")
    if completeness and not adt.has_havoc and phi is not None:
        cq = emit_commutativity_query(adt, phi, negate_eq=False, assume_not_phi=True)
        cr = run_smt(cq.text, cmd, timeout)
        v.seconds += cr.seconds
        if cr.status == "sat":
            v.complete = False
        elif cr.status == "unsat":
            v.complete = True
    elif phi is None:
        v.complete = None
    return v


def verify_condition(site: CommuteSite, phi: Expr | None, spec: InputSpec, mode: str = "both", *,
                     cmd: str | None = None, timeout: float = DEFAULT_TIMEOUT,
                     samples: list[Sample] | None = None) -> Verdict:
    """Is ``phi`` a sufficient commutativity condition for ``site``?

    ``oracle`` decides on the finite domain, ``solver`` decides for all
    states (sound but possibly unknown), ``both`` runs both and reports any
    disagreement.  Without a solver the check degrades to the oracle.
    """
    if mode not in MODES:
        raise ValueError(f"unknown mode '{mode}'")
    out = Verdict("unknown", mode=mode)
    if mode != "oracle" and not solver_available(cmd):
        out.notes.append("no SMT solver available; oracle only")
        mode = out.mode = "oracle"
    if mode in ("oracle", "both"):
        out.oracle = oracle_check_condition(site, phi, spec, samples)
        if out.oracle.excluded:
            out.notes.append(f"{out.oracle.excluded} domain states excluded (run-time error or blocked)")
    if mode in ("solver", "both"):
        try:
            out.solver = solver_check(site, phi, cmd=cmd, timeout=timeout)
        except SolverUnavailable as exc:
            out.notes.append(str(exc))
        else:
            out.notes += out.solver.notes
    o, s = out.oracle, out.solver
    if o is not None and not o.valid:
        out.status, out.witness = "invalid", o.witness
    elif s is not None and s.status == "valid":
        out.status, out.proved = "valid", True
    elif s is not None and s.status == "invalid" and s.confirmed:
        out.status, out.witness = "invalid", s.witness
    elif o is not None:
        out.status = "valid"
        if s is not None:
            out.notes.append("valid on the finite domain only; the solver did not prove it")
    elif s is not None and s.status == "invalid":
        # solver-only mode with a spurious witness: stay sound, report not verified
        out.status, out.witness = "unknown", s.witness
    if o is not None and s is not None:
        if s.status == "valid" and not o.valid:
            out.disagreement = True
            msg = f"solver proved the condition but the oracle found witness {o.witness}"
            out.notes.append("EMBEDDING BUG: " + msg)
            log.error(msg)
        out.complete = o.complete
    else:
        out.complete = o.complete if o is not None else (s.complete if s is not None else None)
    return out


__all__ = ["MODES", "SolverVerdict", "Verdict", "solver_check", "verify_condition"]
