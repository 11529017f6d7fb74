"""Parallel semantics over nested configurations and recorded executions.

A configuration is a tree.  A :class:`Leaf` holds a statement and its local
frames; a :class:`Node` holds two running children, the continuation to
resume after Join, and the frames of the enclosing fragment.  Heap, locks
and the allocation counter are global and live in a separate
:class:`ScopedState` whose frames are empty.

The same stepping code also serves the seq and nd semantics (pass
``sem="seq"`` or ``"nd"``); then ``commute(true)`` is sequenced instead of
forked and the tree is always a single leaf.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

from .lang.ast import SKIP, Skip, Stmt
from .lang.state import RuntimeFault, ScopedState, _frame_key, canonicalize
from .stepper import (
    AlreadyValue,
    Decomposition,
    HavocDomain,
    Stuck,
    commute_orders,
    decompose,
    default_havoc_domain,
    plug,
    reduce_redex,
)

SEMANTICS = ("seq", "nd", "par")


@dataclass(frozen=True, eq=False)
class Leaf:
    stmt: Stmt
    frames: tuple  # local frames, innermost first
    forks: int = 0  # completed commute blocks at this level (label subscript)


@dataclass(frozen=True, eq=False)
class Node:
    left: "Config"
    right: "Config"
    cont: Stmt
    frames: tuple
    index: int  # subscript k of the L_k/R_k tokens of the children


Config = Leaf | Node


def tree_key(c: Config) -> tuple:
    if isinstance(c, Leaf):
        return ("L", c.stmt, tuple(_frame_key(f) for f in c.frames), c.forks)
    return ("N", tree_key(c.left), tree_key(c.right), c.cont, tuple(_frame_key(f) for f in c.frames), c.index)


@dataclass(frozen=True, eq=False)
class ParConfig:
    """A whole configuration: the tree plus the global heap/lock component."""

    tree: Config
    glob: ScopedState  # frames unused

    def key(self) -> tuple:
        g = self.glob
        return (tree_key(self.tree), tuple(sorted(g.heap.items())), g.locks)

    def __eq__(self, other):
        return isinstance(other, ParConfig) and self.key() == other.key()

    def __hash__(self):
        return hash(self.key())

    @property
    def st(self) -> ScopedState:
        """The outermost state (root frames plus global heap and locks)."""
        return self.glob.with_frames(self.tree.frames)

    @property
    def terminal(self) -> bool:
        return isinstance(self.tree, Leaf) and isinstance(self.tree.stmt, Skip)

    def held_locks(self) -> list[int]:
        return sorted(self.glob.locks)


def initial_config(stmt: Stmt, state: ScopedState) -> ParConfig:
    return ParConfig(Leaf(stmt, state.frames, 0), state.with_frames(()))


@dataclass(frozen=True)
class TransitionLabel:
    fr: tuple  # tokens such as "L0", "R1"
    eff: tuple | None  # (target, value) or None for epsilon
    rule: str

    def render(self) -> str:
        fr = "".join(self.fr) if self.fr else "-"
        eff = f"{self.eff[0]}={self.eff[1]}" if self.eff else "-"
        return f"fr={fr}, eff={eff} | {self.rule}"


def _leaf_steps(leaf: Leaf, chain: tuple, glob: ScopedState, sem: str, havoc: HavocDomain):
    """Successors of a leaf whose enclosing frames are ``chain``."""
    d = decompose(leaf.stmt)
    if isinstance(d, AlreadyValue):
        return []
    if isinstance(d, Stuck):
        raise RuntimeFault(f"stuck: {d.reason}")
    if d.kind == "CommuteTrue":
        r = d.redex
        if sem == "par":
            node = Node(Leaf(r.left, ({},), 0), Leaf(r.right, ({},), 0), plug(d.ctx, SKIP), leaf.frames, leaf.forks)
            return [((), None, "Fork", node, chain, glob)]
        return [((), None, "CommuteTrue", Leaf(plug(d.ctx, t), leaf.frames, leaf.forks), chain, glob)
                for t in commute_orders(r, sem)]
    full = glob.with_frames(leaf.frames + chain)
    if d.kind == "Lock" and full.lock_held(d.redex.expr.value):
        return []
    out = []
    n_outer = len(chain)
    for red in reduce_redex(d, full, havoc):
        fr = red.state.frames
        cut = len(fr) - n_outer
        out.append(((), red.eff, d.kind, Leaf(plug(d.ctx, red.term), fr[:cut], leaf.forks), fr[cut:],
                    red.state.with_frames(())))
    return out


def _steps(c: Config, chain: tuple, glob: ScopedState, sem: str, havoc: HavocDomain):
    if isinstance(c, Leaf):
        return _leaf_steps(c, chain, glob, sem, havoc)
    left, right = c.left, c.right
    if (isinstance(left, Leaf) and isinstance(left.stmt, Skip)
            and isinstance(right, Leaf) and isinstance(right.stmt, Skip)):
        # Join: fragment frames are discarded, the continuation resumes
        return [((), None, "Join", Leaf(c.cont, c.frames, c.index + 1), chain, glob)]
    out = []
    inner = c.frames + chain
    k = len(c.frames)
    for side, child in (("L", left), ("R", right)):
        tok = f"{side}{c.index}"
        for path, eff, rule, new_child, new_chain, new_glob in _steps(child, inner, glob, sem, havoc):
            frames, rest = new_chain[:k], new_chain[k:]
            node = (Node(new_child, right, c.cont, frames, c.index) if side == "L"
                    else Node(left, new_child, c.cont, frames, c.index))
            out.append(((tok,) + path, eff, rule, node, rest, new_glob))
    return out


def enabled_steps(cfg: ParConfig, sem: str = "par",
                  havoc: HavocDomain = default_havoc_domain) -> list[tuple[TransitionLabel, ParConfig]]:
    """All successors of ``cfg``.  Order: Join, then left, then right steps.

    An empty list means the configuration is terminal or deadlocked.
    """
    if sem not in SEMANTICS:
        raise ValueError(f"unknown semantics '{sem}'")
    out = []
    for path, eff, rule, tree, chain, glob in _steps(cfg.tree, (), cfg.glob, sem, havoc):
        assert chain == ()
        out.append((TransitionLabel(path, eff, rule), ParConfig(tree, glob)))
    return out


# ---------------------------------------------------------------------------
# Schedulers
# ---------------------------------------------------------------------------


class Scheduler:
    def choose(self, enabled: Sequence[tuple[TransitionLabel, ParConfig]], step: int) -> int:
        raise NotImplementedError


@dataclass
class FixedChoices(Scheduler):
    """Follow a list of indices; index 0 once the list is exhausted."""

    choices: Sequence[int] = ()

    def choose(self, enabled, step):
        i = self.choices[step] if step < len(self.choices) else 0
        if not 0 <= i < len(enabled):
            raise RuntimeFault(f"choice {i} at step {step} out of range (0..{len(enabled) - 1})")
        return i


@dataclass
class SeededRandom(Scheduler):
    seed: int = 0
    rng: random.Random = field(init=False)

    def __post_init__(self):
        self.rng = random.Random(self.seed)

    def choose(self, enabled, step):
        return self.rng.randrange(len(enabled))


@dataclass
class RoundRobin(Scheduler):
    """Rotate among the distinct fragment paths that have an enabled step."""

    last: tuple = ()

    def choose(self, enabled, step):
        paths = sorted({lab.fr for lab, _ in enabled})
        later = [p for p in paths if p > self.last]
        pick = later[0] if later else paths[0]
        self.last = pick
        return next(i for i, (lab, _) in enumerate(enabled) if lab.fr == pick)


@dataclass
class LabelReplay(Scheduler):
    """Replay a dumped trace by matching rendered labels."""

    lines: Sequence[str]

    def choose(self, enabled, step):
        if step >= len(self.lines):
            return 0
        want = self.lines[step]
        for i, (lab, _) in enumerate(enabled):
            if lab.render() == want:
                return i
        raise RuntimeFault(f"trace step {step} ('{want}') is not enabled")


# ---------------------------------------------------------------------------
# Executions
# ---------------------------------------------------------------------------


class DeadlockError(RuntimeFault):
    def __init__(self, msg: str, execution: "Execution"):
        super().__init__(msg)
        self.execution = execution


class BudgetError(RuntimeFault):
    def __init__(self, msg: str, execution: "Execution"):
        super().__init__(msg)
        self.execution = execution


@dataclass
class Execution:
    initial: ParConfig
    steps: list[tuple[TransitionLabel, ParConfig]] = field(default_factory=list)

    @property
    def final(self) -> ParConfig:
        return self.steps[-1][1] if self.steps else self.initial

    @property
    def labels(self) -> list[TransitionLabel]:
        return [lab for lab, _ in self.steps]

    @property
    def complete(self) -> bool:
        return self.final.terminal

    def final_state(self) -> ScopedState:
        return self.final.st

    def dump(self, with_final: bool = True) -> str:
        return dump_trace(self.labels, self.final.st if with_final and self.complete else None)


def run_recorded(stmt: Stmt, state: ScopedState, scheduler: Scheduler | None = None, sem: str = "par",
                 budget: int = 100_000, havoc: HavocDomain = default_havoc_domain) -> Execution:
    """Drive ``enabled_steps`` with ``scheduler`` until termination."""
    scheduler = scheduler or FixedChoices()
    ex = Execution(initial_config(stmt, state))
    cfg = ex.initial
    for i in range(budget):
        if cfg.terminal:
            return ex
        en = enabled_steps(cfg, sem, havoc)
        if not en:
            held = cfg.held_locks()
            raise DeadlockError(f"deadlock after {i} steps; held locks: {held}", ex)
        lab, cfg = en[scheduler.choose(en, i)]
        ex.steps.append((lab, cfg))
    if cfg.terminal:
        return ex
    raise BudgetError(f"step budget {budget} exhausted", ex)


def dump_trace(labels: Iterable[TransitionLabel], final: ScopedState | None = None) -> str:
    lines = [f"step {i} | {lab.render()}" for i, lab in enumerate(labels)]
    if final is not None:
        lines.append("final | " + ", ".join(canonicalize(final).render()))
    return "\n".join(lines) + "\n"


def parse_trace(text: str) -> list[str]:
    """Rendered labels (``fr=..., eff=... | Rule``) of each ``step`` line."""
    out = []
    for line in text.splitlines():
        if line.startswith("step "):
            _, rest = line.split(" | ", 1)
            out.append(rest)
    return out


def parse_choices(text: str) -> Scheduler:
    """A choices file is either a trace dump or whitespace-separated ints."""
    if any(line.startswith("step ") for line in text.splitlines()):
        return LabelReplay(parse_trace(text))
    return FixedChoices([int(t) for t in text.replace(",", " ").split()])


SchedulerFactory = Callable[[], Scheduler]


def make_scheduler(seed: int | None = None, choices: str | None = None, round_robin: bool = False) -> Scheduler:
    if choices is not None:
        return parse_choices(choices)
    if round_robin:
        return RoundRobin()
    if seed is not None:
        return SeededRandom(seed)
    return FixedChoices()


__all__ = [
    "BudgetError",
    "Config",
    "DeadlockError",
    "Execution",
    "FixedChoices",
    "LabelReplay",
    "Leaf",
    "Node",
    "ParConfig",
    "RoundRobin",
    "SeededRandom",
    "TransitionLabel",
    "Decomposition",
    "dump_trace",
    "enabled_steps",
    "initial_config",
    "make_scheduler",
    "parse_choices",
    "parse_trace",
    "run_recorded",
    "tree_key",
]
