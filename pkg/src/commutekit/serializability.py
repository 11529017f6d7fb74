"""Scoped and adapted serializability of executions and programs.

Fork and Join are structural steps: they belong to the enclosing fragment
but neither read nor write shared state, so both checkers ignore them.
Without that convention no execution of a nested commute could interleave
an outer co-fragment with the inner fragments at all, since the inner Fork
and Join bracket every inner step.

Program-level checks explore the par semantics restricted by a *sealing*
discipline: once a step of group ``g`` follows a step of a rival ``g'``,
``g'`` is sealed and may not step again.  The executions admitted are
exactly the scoped-serial (respectively adapted-serial) ones.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .explorer import DEFAULT_BUDGET, DEFAULT_MAX_STATES, BigStep, bigstep, final_state, search
from .lang.ast import Stmt
from .lang.state import CanonicalState, ScopedState
from .par import Execution, ParConfig, TransitionLabel, enabled_steps, initial_config

STRUCTURAL = ("Fork", "Join")


def _flip(tok: str) -> str:
    return ("R" if tok[0] == "L" else "L") + tok[1:]


def scoped_groups(fr: tuple) -> list[tuple]:
    """Every prefix ``p·L_k``/``p·R_k`` of the label."""
    return [fr[: i + 1] for i in range(len(fr))]


def scoped_rival(g: tuple) -> tuple:
    return g[:-1] + (_flip(g[-1]),)


def related(p: tuple, q: tuple) -> bool:
    n = min(len(p), len(q))
    return p[:n] == q[:n]


@dataclass
class SerialVerdict:
    ok: bool
    groups: tuple | None = None  # the two interleaved groups
    steps: tuple = ()  # step indices a < b < c with a, c in one group and b in the other

    def __bool__(self) -> bool:
        return self.ok


def _check_pairs(index: dict[tuple, list[int]], pairs: Iterable[tuple[tuple, tuple]]) -> SerialVerdict:
    for g, h in pairs:
        a, b = index.get(g), index.get(h)
        if not a or not b:
            continue
        if a[-1] < b[0] or b[-1] < a[0]:
            continue
        # interleaved: find x < y < z alternating between the groups
        merged = sorted([(i, 0) for i in a] + [(i, 1) for i in b])
        runs = [merged[0]]
        for it in merged[1:]:
            if it[1] != runs[-1][1]:
                runs.append(it)
            if len(runs) == 3:
                break
        first = g if runs[0][1] == 0 else h
        second = h if first == g else g
        return SerialVerdict(False, (first, second), tuple(i for i, _ in runs))
    return SerialVerdict(True)


def _labels(ex: Execution | Sequence[TransitionLabel]) -> list[TransitionLabel]:
    return ex.labels if isinstance(ex, Execution) else list(ex)


def is_scoped_serial(ex: Execution | Sequence[TransitionLabel]) -> SerialVerdict:
    """Co-fragments of every scope run one entirely before the other."""
    index: dict[tuple, list[int]] = {}
    for i, lab in enumerate(_labels(ex)):
        _validate(lab.fr)
        if lab.rule in STRUCTURAL:
            continue
        for g in scoped_groups(lab.fr):
            index.setdefault(g, []).append(i)
    pairs = [(g, scoped_rival(g)) for g in sorted(index) if g[-1][0] == "L"]
    return _check_pairs(index, pairs)


def is_adapted_serial(ex: Execution | Sequence[TransitionLabel]) -> SerialVerdict:
    """Steps of unrelated fragment labels are never interleaved."""
    index: dict[tuple, list[int]] = {}
    for i, lab in enumerate(_labels(ex)):
        _validate(lab.fr)
        if lab.rule in STRUCTURAL or not lab.fr:
            continue
        index.setdefault(lab.fr, []).append(i)
    keys = sorted(index)
    pairs = [(p, q) for i, p in enumerate(keys) for q in keys[i + 1:] if not related(p, q)]
    return _check_pairs(index, pairs)


class MalformedLabel(ValueError):
    pass


def _validate(fr: tuple) -> None:
    for tok in fr:
        if len(tok) < 2 or tok[0] not in "LR" or not tok[1:].isdigit():
            raise MalformedLabel(f"bad fragment token '{tok}'")


# ---------------------------------------------------------------------------
# Sealing-constrained exploration
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class SealNode:
    cfg: ParConfig
    started: frozenset
    sealed: frozenset

    def key(self):
        return (self.cfg.key(), self.started, self.sealed)


def _groups(mode: str, lab: TransitionLabel) -> list[tuple]:
    if lab.rule in STRUCTURAL or not lab.fr:
        return []
    return scoped_groups(lab.fr) if mode == "scoped" else [lab.fr]


def _rivals(mode: str, g: tuple, started: frozenset) -> list[tuple]:
    if mode == "scoped":
        r = scoped_rival(g)
        return [r] if r in started else []
    return [h for h in started if not related(g, h)]


def sealed_successors(node: SealNode, mode: str):
    for lab, nxt in enabled_steps(node.cfg, "par"):
        gs = _groups(mode, lab)
        if any(g in node.sealed for g in gs):
            continue
        if not gs:
            yield lab, SealNode(nxt, node.started, node.sealed)
            continue
        sealed = set(node.sealed)
        for g in gs:
            sealed.update(_rivals(mode, g, node.started))
        yield lab, SealNode(nxt, node.started | frozenset(gs), frozenset(sealed))


def serial_bigstep(stmt: Stmt, state: ScopedState, mode: str = "scoped", budget: int = DEFAULT_BUDGET,
                   max_states: int = DEFAULT_MAX_STATES, track_paths: bool = False) -> BigStep:
    """Final states of all scoped-serial (or adapted-serial) par executions."""
    if mode not in ("scoped", "adapted"):
        raise ValueError(f"unknown mode '{mode}'")
    init = SealNode(initial_config(stmt, state), frozenset(), frozenset())
    res = search(
        init,
        lambda n: sealed_successors(n, mode),
        key=SealNode.key,
        outcome=lambda n: final_state(n.cfg),
        is_terminal=lambda n: n.cfg.terminal,
        budget=budget,
        max_states=max_states,
        track_paths=track_paths,
    )
    return BigStep(frozenset(res.finals), res.complete, res.visited, res.deadlocks, res.errors,
                   res if track_paths else None)


def execution_of(init: ParConfig, path: list) -> Execution:
    """Turn a search path (over par or sealed nodes) into an Execution."""
    steps = [(lab, n.cfg if isinstance(n, SealNode) else n) for lab, n in path]
    return Execution(init, steps)


def witness_execution(stmt: Stmt, state: ScopedState, final: CanonicalState, mode: str = "par",
                      budget: int = DEFAULT_BUDGET, max_states: int = DEFAULT_MAX_STATES) -> Execution | None:
    """A shortest execution ending in ``final``: unconstrained or ``scoped``/``adapted``-serial."""
    if mode == "par":
        b = bigstep(stmt, state, "par", budget, max_states, track_paths=True)
    else:
        b = serial_bigstep(stmt, state, mode, budget, max_states, track_paths=True)
    if final not in b.finals:
        return None
    return execution_of(initial_config(stmt, state), b.witness(final))


def is_scoped_serializable_execution(ex: Execution, stmt: Stmt, state: ScopedState,
                                     budget: int = DEFAULT_BUDGET) -> bool | None:
    """Whether some scoped-serial execution reaches the same final state.

    ``None`` means the bounded search was incomplete and found no match.
    """
    if is_scoped_serial(ex):
        return True
    b = serial_bigstep(stmt, state, "scoped", budget)
    if final_state(ex.final) in b.finals:
        return True
    return False if b.complete else None


@dataclass
class ProgramVerdict:
    serializable: bool | None  # None: unknown (budget)
    states_checked: int = 0
    par_states: int = 0
    start: ScopedState | None = None
    bad_final: CanonicalState | None = None
    counterexample: Execution | None = None
    serial_finals: frozenset = frozenset()
    notes: list[str] = field(default_factory=list)


def is_program_scoped_serializable(stmt: Stmt, states: Iterable[ScopedState], budget: int = DEFAULT_BUDGET,
                                   max_states: int = DEFAULT_MAX_STATES, mode: str = "scoped") -> ProgramVerdict:
    """Every par final state is reachable by a serial execution, for every start state."""
    verdict = ProgramVerdict(True)
    for st in states:
        verdict.states_checked += 1
        par = bigstep(stmt, st, "par", budget, max_states, track_paths=True)
        verdict.par_states += par.visited
        ser = serial_bigstep(stmt, st, mode, budget, max_states)
        missing = sorted(par.finals - ser.finals, key=lambda c: c.render())
        if missing:
            bad = missing[0]
            verdict.serializable = False
            verdict.start = st
            verdict.bad_final = bad
            verdict.serial_finals = ser.finals
            # prefer a witness that is adapted-serial: it shows the scoped notion is the stricter one
            ex = witness_execution(stmt, st, bad, "adapted", budget, max_states) if mode == "scoped" else None
            verdict.counterexample = ex or execution_of(initial_config(stmt, st), par.witness(bad))
            return verdict
        if not (par.complete and ser.complete):
            verdict.serializable = None
            verdict.notes.append(f"exploration incomplete from start state #{verdict.states_checked}")
    return verdict


__all__ = [
    "MalformedLabel",
    "ProgramVerdict",
    "SealNode",
    "SerialVerdict",
    "is_adapted_serial",
    "is_program_scoped_serializable",
    "is_scoped_serial",
    "is_scoped_serializable_execution",
    "serial_bigstep",
    "witness_execution",
]
