"""Direct interpreter and the multi-worker parallel runtime.

The :class:`Machine` walks the AST over mutable frames instead of
rewriting terms, so it is much faster than the stepper.  With one worker
it computes exactly the seq result.  With more workers ``commute`` blocks
whose guard holds run their left fragment on a fresh thread while the
current thread runs the right fragment; the join waits for both.

Shared state is guarded at element granularity: every variable read or
write and every heap-cell update takes the stripe lock for that element,
so each effect is atomic as in the interleaving semantics.
"""

from __future__ import annotations

import hashlib
import threading
import time
from dataclasses import dataclass

from .lang.ast import (
    ArrayT,
    Assign,
    Assume,
    Binop,
    Call,
    Commute,
    Const,
    Decl,
    Deref,
    Expr,
    Field,
    HashtableT,
    Havoc,
    If,
    Index,
    Lock,
    NewArray,
    NewHashtable,
    Old,
    Pop,
    Push,
    Ref,
    Scope,
    Seq,
    Skip,
    Stmt,
    Ternary,
    Unlock,
    Unop,
    Var,
    While,
    map_stmt,
)
from .lang.state import ArrayObj, RuntimeFault, ScopedState, TableObj, UnboundVariable, new_heap_object
from .stepper import (
    BudgetExceeded,
    _const_ok_binop,
    _const_ok_unop,
    apply_binop,
    apply_unop,
    call_builtin,
    field_read,
)

N_STRIPES = 64


class Blocked(RuntimeFault):
    """``assume(false)`` was reached: the run has no outcome."""


class HavocUnsupported(RuntimeFault):
    pass


class LockTimeout(RuntimeFault):
    pass


def force_sequential(s: Stmt) -> Stmt:
    """Every commute guard replaced by ``false``."""

    def fix(st: Stmt) -> Stmt:
        if isinstance(st, Commute):
            return Commute(Const(False), st.left, st.right, st.alias)
        return st

    return map_stmt(s, fix)


_BUSY_BUF = bytearray()
_BUSY_LOCK = threading.Lock()


def busy_work(n: int) -> None:
    """Hash ``32 * n`` zero bytes; hashlib releases the GIL on large inputs."""
    global _BUSY_BUF
    size = 32 * n
    if len(_BUSY_BUF) < size:
        with _BUSY_LOCK:
            if len(_BUSY_BUF) < size:
                _BUSY_BUF = bytearray(size)
    hashlib.sha256(memoryview(_BUSY_BUF)[:size]).digest()


class Machine:
    """Shared execution state for one run."""

    def __init__(self, state: ScopedState, workers: int = 1, *, real_busy: bool = False,
                 lock_timeout: float = 10.0, max_iters: int = 10_000_000):
        self.heap = dict(state.heap)
        self.next_loc = state.next_loc
        self.locks = set(state.locks)
        self.root = [dict(f) for f in state.frames]
        self.workers = max(1, workers)
        self.slots = threading.Semaphore(self.workers - 1)
        self.stripes = [threading.Lock() for _ in range(N_STRIPES)]
        self.alloc_lock = threading.Lock()
        self.lock_cv = threading.Condition()
        self.real_busy = real_busy
        self.lock_timeout = lock_timeout
        self.max_iters = max_iters
        self.forks = 0

    # -- element guards --------------------------------------------------
    def _stripe(self, frame: dict, name) -> threading.Lock:
        return self.stripes[hash((id(frame), name)) % N_STRIPES]

    def _heap_stripe(self, loc: int) -> threading.Lock:
        return self.stripes[hash(("heap", loc)) % N_STRIPES]

    @staticmethod
    def _find(chain: list, name: str) -> dict:
        for f in chain:
            if name in f:
                return f
        raise UnboundVariable(f"unbound variable '{name}'")

    def read(self, chain: list, name: str):
        f = self._find(chain, name)
        with self._stripe(f, name):
            return f[name]

    def write(self, chain: list, name: str, v) -> None:
        f = self._find(chain, name)
        with self._stripe(f, name):
            f[name] = v

    def deref(self, ref):
        if not isinstance(ref, Ref) or ref.loc not in self.heap:
            raise RuntimeFault(f"dangling or non-reference value {ref!r}")
        return self.heap[ref.loc]

    def alloc(self, obj) -> Ref:
        with self.alloc_lock:
            loc = self.next_loc
            self.next_loc += 1
            self.heap[loc] = obj
        return Ref(loc)

    def heap_write(self, ref, key, v) -> None:
        if not isinstance(ref, Ref) or ref.loc not in self.heap:
            raise RuntimeFault(f"dangling or non-reference value {ref!r}")
        with self._heap_stripe(ref.loc):
            obj = self.heap[ref.loc]
            if isinstance(obj, ArrayObj):
                if not isinstance(key, int) or isinstance(key, bool):
                    raise RuntimeFault("array index is not an int")
                self.heap[ref.loc] = obj.set(key, v)
            else:
                self.heap[ref.loc] = obj.put(key, v)

    # -- expressions -----------------------------------------------------
    def eval(self, e: Expr, chain: list):
        if isinstance(e, Const):
            return e.value
        if isinstance(e, Var):
            return self.read(chain, e.name)
        if isinstance(e, Binop):
            a = self.eval(e.left, chain)
            b = self.eval(e.right, chain)
            why = _const_ok_binop(a, e.op, b)
            if why:
                raise RuntimeFault(f"stuck: {why}")
            return apply_binop(a, e.op, b)
        if isinstance(e, Unop):
            v = self.eval(e.expr, chain)
            why = _const_ok_unop(e.op, v)
            if why:
                raise RuntimeFault(f"stuck: {why}")
            return apply_unop(e.op, v)
        if isinstance(e, Index):
            base = self.eval(e.base, chain)
            key = self.eval(e.index, chain)
            with self._heap_stripe(base.loc if isinstance(base, Ref) else -1):
                return self.deref(base).get(key)
        if isinstance(e, Ternary):
            c = self.eval(e.cond, chain)
            return self.eval(e.then if c else e.els, chain)
        if isinstance(e, Call):
            args = [self.eval(a, chain) for a in e.args]
            if e.fname == "busy":
                if args[0] < 0:
                    raise RuntimeFault("busy expects a non-negative amount")
                if self.real_busy:
                    busy_work(args[0])
                return 0
            return call_builtin(_HeapView(self), e.fname, args)
        if isinstance(e, Field):
            return field_read(_HeapView(self), self.eval(e.expr, chain), e.name)
        if isinstance(e, NewArray):
            n = self.eval(e.length, chain)
            return self.alloc(new_heap_object(ArrayT(e.elem), n))
        if isinstance(e, NewHashtable):
            return self.alloc(new_heap_object(HashtableT(e.key, e.val)))
        if isinstance(e, Deref):
            return self.eval(e.expr, chain)
        if isinstance(e, Old):
            raise RuntimeFault("old(...) outside a loop summary")
        raise RuntimeFault(f"cannot evaluate {e!r}")

    # -- statements ------------------------------------------------------
    def exec(self, s: Stmt, chain: list) -> None:
        while True:
            if isinstance(s, Seq):
                self.exec(s.first, chain)
                s = s.second
                continue
            if isinstance(s, Skip):
                return
            if isinstance(s, Assign):
                lv = s.lval
                if isinstance(lv, Var):
                    v = self.eval(s.expr, chain)
                    self.write(chain, lv.name, v)
                else:
                    base = self.eval(lv.base, chain)
                    key = self.eval(lv.index, chain)
                    v = self.eval(s.expr, chain)
                    self.heap_write(base, key, v)
                return
            if isinstance(s, Decl):
                chain[0][s.name] = self.eval(s.expr, chain)
                return
            if isinstance(s, If):
                c = self.eval(s.cond, chain)
                if not isinstance(c, bool):
                    raise RuntimeFault("if condition is not a bool")
                s = s.then if c else s.els
                continue
            if isinstance(s, While):
                n = 0
                while True:
                    c = self.eval(s.cond, chain)
                    if not isinstance(c, bool):
                        raise RuntimeFault("while condition is not a bool")
                    if not c:
                        return
                    n += 1
                    if n > self.max_iters:
                        raise BudgetExceeded(f"loop exceeded {self.max_iters} iterations")
                    self.exec(s.body, chain)
            if isinstance(s, Commute):
                self.commute(s, chain)
                return
            if isinstance(s, Scope):
                self.exec(s.body, [{}] + chain)
                return
            if isinstance(s, Push):
                chain.insert(0, {})
                return
            if isinstance(s, Pop):
                if len(chain) <= 1:
                    raise RuntimeFault("pop_scope would remove the last frame")
                chain.pop(0)
                return
            if isinstance(s, Lock):
                self.acquire(self.eval(s.expr, chain))
                return
            if isinstance(s, Unlock):
                n = self.eval(s.expr, chain)
                with self.lock_cv:
                    self.locks.discard(n)
                    self.lock_cv.notify_all()
                return
            if isinstance(s, Assume):
                if not self.eval(s.expr, chain):
                    raise Blocked("assume(false)")
                return
            if isinstance(s, Havoc):
                raise HavocUnsupported("havoc requires exhaustive exploration")
            raise RuntimeFault(f"cannot execute {s!r}")

    def acquire(self, n) -> None:
        deadline = time.monotonic() + self.lock_timeout
        with self.lock_cv:
            while n in self.locks:
                left = deadline - time.monotonic()
                if left <= 0:
                    raise LockTimeout(f"lock {n} not released within {self.lock_timeout}s; held: {sorted(self.locks)}")
                self.lock_cv.wait(left)
            self.locks.add(n)

    def commute(self, s: Commute, chain: list) -> None:
        g = False if s.guard is None else self.eval(s.guard, chain)
        if not isinstance(g, bool):
            raise RuntimeFault("commute guard is not a bool")
        if not g or not self.slots.acquire(blocking=False):
            self.exec(s.left, [{}] + chain)
            self.exec(s.right, [{}] + chain)
            return
        self.forks += 1
        errors: list[BaseException] = []

        def run_left():
            try:
                self.exec(s.left, [{}] + chain)
            except BaseException as exc:  # re-raised on join
                errors.append(exc)

        t = threading.Thread(target=run_left, daemon=True)
        t.start()
        try:
            self.exec(s.right, [{}] + chain)
        finally:
            t.join()
            self.slots.release()
        if errors:
            raise errors[0]

    def state(self) -> ScopedState:
        return ScopedState(tuple(self.root), dict(self.heap), frozenset(self.locks), self.next_loc)


@dataclass(frozen=True)
class _HeapView:
    """Adapter so stepper builtins can read the machine heap."""

    m: Machine

    def deref(self, ref):
        return self.m.deref(ref)


def run_direct(stmt: Stmt, state: ScopedState, max_iters: int = 10_000_000) -> ScopedState:
    """Sequential result computed by the direct interpreter."""
    m = Machine(state, 1, max_iters=max_iters)
    m.exec(stmt, m.root)
    return m.state()


@dataclass
class ParallelResult:
    state: ScopedState
    seconds: float
    forks: int


def run_parallel(stmt: Stmt, state: ScopedState, workers: int = 2, *, force_seq: bool = False,
                 lock_timeout: float = 10.0, real_busy: bool = True) -> ParallelResult:
    """Execute on up to ``workers`` OS threads; returns the final state and wall time."""
    if force_seq:
        stmt = force_sequential(stmt)
    m = Machine(state, workers, real_busy=real_busy, lock_timeout=lock_timeout)
    t0 = time.perf_counter()
    m.exec(stmt, m.root)
    dt = time.perf_counter() - t0
    return ParallelResult(m.state(), dt, m.forks)


__all__ = [
    "Blocked",
    "HavocUnsupported",
    "LockTimeout",
    "Machine",
    "ParallelResult",
    "TableObj",
    "busy_work",
    "force_sequential",
    "run_direct",
    "run_parallel",
]
