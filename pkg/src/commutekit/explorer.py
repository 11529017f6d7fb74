"""Bounded exhaustive exploration and big-step denotations.

``search`` is a generic breadth- or depth-first search over any successor
function with deduplication and parent pointers, so shortest
counterexample paths can be recovered.  ``bigstep`` instantiates it with
``enabled_steps`` and collects canonical final states.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Hashable, Iterable

from .lang.ast import Stmt
from .lang.state import CanonicalState, RuntimeFault, ScopedState, canonicalize
from .par import ParConfig, TransitionLabel, enabled_steps, initial_config
from .stepper import HavocDomain, default_havoc_domain

DEFAULT_BUDGET = 100_000  # steps per path
DEFAULT_MAX_STATES = 1_000_000


@dataclass
class SearchResult:
    finals: dict = field(default_factory=dict)  # outcome -> node key of its first witness
    parents: dict = field(default_factory=dict)  # node key -> (parent key, label, node)
    visited: int = 0
    complete: bool = True
    deadlocks: int = 0
    errors: list[str] = field(default_factory=list)
    root: Hashable = None

    def path(self, k: Hashable) -> list:
        """(label, node) pairs from the root to node ``k``."""
        out = []
        while k != self.root:
            parent, label, node = self.parents[k]
            out.append((label, node))
            k = parent
        out.reverse()
        return out


def search(
    init,
    successors: Callable[[object], Iterable[tuple[object, object]]],
    *,
    key: Callable[[object], Hashable],
    outcome: Callable[[object], Hashable | None],
    is_terminal: Callable[[object], bool],
    budget: int = DEFAULT_BUDGET,
    max_states: int = DEFAULT_MAX_STATES,
    depth_first: bool = False,
    track_paths: bool = False,
    dedup: bool = True,
) -> SearchResult:
    """Enumerate every node reachable from ``init``.

    ``outcome`` maps terminal nodes to the value collected in ``finals``.
    Nodes with no successors that are not terminal count as deadlocks.
    Without ``dedup`` the search enumerates the execution tree naively.
    """
    res = SearchResult()
    k0 = key(init)
    res.root = k0
    seen = {k0} if dedup else None
    frontier = deque([(init, k0, 0)])
    pop = frontier.pop if depth_first else frontier.popleft
    counter = 0
    while frontier:
        node, k, depth = pop()
        res.visited += 1
        if is_terminal(node):
            out = outcome(node)
            if out not in res.finals:
                res.finals[out] = k
            continue
        if depth >= budget:
            res.complete = False
            continue
        try:
            succ = list(successors(node))
        except RuntimeFault as exc:
            res.errors.append(str(exc))
            continue
        if not succ:
            res.deadlocks += 1
            continue
        for label, nxt in succ:
            nk = key(nxt)
            if dedup:
                if nk in seen:
                    continue
                if len(seen) >= max_states:
                    res.complete = False
                    continue
                seen.add(nk)
            else:
                counter += 1
                if counter >= max_states:
                    res.complete = False
                    continue
                nk = (nk, counter)
            if track_paths:
                res.parents[nk] = (k, label, nxt)
            frontier.append((nxt, nk, depth + 1))
    return res


@dataclass
class BigStep:
    """Final states of all executions (canonical), plus exploration stats."""

    finals: frozenset
    complete: bool
    visited: int
    deadlocks: int = 0
    errors: list[str] = field(default_factory=list)
    search: SearchResult | None = None

    def witness(self, final: CanonicalState) -> list[tuple[TransitionLabel, ParConfig]]:
        if self.search is None:
            raise ValueError("exploration ran without path tracking")
        return self.search.path(self.search.finals[final])


def final_state(cfg: ParConfig) -> CanonicalState:
    return canonicalize(cfg.st)


def bigstep(stmt: Stmt, state: ScopedState, sem: str = "par", budget: int = DEFAULT_BUDGET,
            max_states: int = DEFAULT_MAX_STATES, *, track_paths: bool = False, dedup: bool = True,
            depth_first: bool = False, havoc: HavocDomain = default_havoc_domain) -> BigStep:
    """The set of final states of ``stmt`` from ``state`` under ``sem``."""
    if budget <= 0:
        raise ValueError("budget must be positive")
    res = search(
        initial_config(stmt, state),
        lambda c: enabled_steps(c, sem, havoc),
        key=ParConfig.key,
        outcome=final_state,
        is_terminal=lambda c: c.terminal,
        budget=budget,
        max_states=max_states,
        depth_first=depth_first,
        track_paths=track_paths,
        dedup=dedup,
    )
    return BigStep(frozenset(res.finals), res.complete, res.visited, res.deadlocks, res.errors,
                   res if track_paths else None)


@dataclass
class InclusionReport:
    seq: frozenset
    nd: frozenset
    par: frozenset
    complete: bool
    errors: list[str] = field(default_factory=list)

    @property
    def seq_singleton(self) -> bool:
        return len(self.seq) == 1

    @property
    def seq_not_in_nd(self) -> frozenset:
        return self.seq - self.nd

    @property
    def nd_not_in_par(self) -> frozenset:
        return self.nd - self.par

    @property
    def holds(self) -> bool:
        return not self.seq_not_in_nd and not self.nd_not_in_par


def check_inclusion(stmt: Stmt, state: ScopedState, budget: int = DEFAULT_BUDGET,
                    max_states: int = DEFAULT_MAX_STATES) -> InclusionReport:
    """Compute all three denotations and compare them as sets."""
    r = {sem: bigstep(stmt, state, sem, budget, max_states) for sem in ("seq", "nd", "par")}
    errors = [f"{sem}: {e}" for sem, b in r.items() for e in b.errors]
    return InclusionReport(r["seq"].finals, r["nd"].finals, r["par"].finals,
                           all(b.complete for b in r.values()), errors)


@dataclass
class DeterminismReport:
    deterministic: bool
    checked: int
    witness: ScopedState | None = None
    finals: frozenset = frozenset()
    complete: bool = True


def check_nd_determinism(stmt: Stmt, states: Iterable[ScopedState],
                         budget: int = DEFAULT_BUDGET) -> DeterminismReport:
    """True iff the nd denotation is a singleton from every start state."""
    n = 0
    complete = True
    for st in states:
        n += 1
        b = bigstep(stmt, st, "nd", budget)
        complete &= b.complete
        if len(b.finals) > 1:
            return DeterminismReport(False, n, st, b.finals, complete)
    return DeterminismReport(True, n, complete=complete)


__all__ = [
    "BigStep",
    "DEFAULT_BUDGET",
    "DEFAULT_MAX_STATES",
    "DeterminismReport",
    "InclusionReport",
    "SearchResult",
    "bigstep",
    "check_inclusion",
    "check_nd_determinism",
    "final_state",
    "search",
]
