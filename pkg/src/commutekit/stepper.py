"""Redex/context decomposition and the base small-step relation.

``decompose`` splits a term into a context (a path of frames from the root
to the hole) and the unique redex, ``plug`` rebuilds the term, and
``reduce_redex`` performs one atomic reduction.  ``step_seq`` and
``step_nd`` lift this to the sequential and nondeterministic semantics.

Three redexes extend the textbook grammar so that fragment-local
declarations go out of scope at the end of a fragment, exactly as they do
under the parallel semantics where Join discards the fragment frames:

* ``commute(b){{s0}{s1}}`` reduces to ``scope{s0}; scope{s1}`` (or the
  reverse order under nd);
* ``scope{s}`` reduces to ``s; pop_scope`` while pushing a fresh frame;
* ``pop_scope`` discards the innermost frame.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

from .lang.ast import (
    POP,
    SKIP,
    UNIT,
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
    Unit,
    Unlock,
    Unop,
    Var,
    While,
)
from .lang.state import (
    ArrayObj,
    RuntimeFault,
    ScopedState,
    TableObj,
    new_heap_object,
    render_value,
    wrap,
)

Term = Stmt | Expr

# ---------------------------------------------------------------------------
# Context frames.  Each frame knows how to put a term back into its hole.
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SeqFirst:
    second: Stmt

    def plug(self, h):
        return Seq(h, self.second)


@dataclass(frozen=True)
class UnopArg:
    op: str

    def plug(self, h):
        return Unop(self.op, h)


@dataclass(frozen=True)
class BinopLeft:
    op: str
    right: Expr

    def plug(self, h):
        return Binop(h, self.op, self.right)


@dataclass(frozen=True)
class BinopRight:
    left: Const
    op: str

    def plug(self, h):
        return Binop(self.left, self.op, h)


@dataclass(frozen=True)
class TernaryCond:
    then: Expr
    els: Expr

    def plug(self, h):
        return Ternary(h, self.then, self.els)


@dataclass(frozen=True)
class IndexBase:
    index: Expr

    def plug(self, h):
        return Index(h, self.index)


@dataclass(frozen=True)
class IndexIdx:
    base: Const

    def plug(self, h):
        return Index(self.base, h)


@dataclass(frozen=True)
class DerefArg:
    def plug(self, h):
        return Deref(h)


@dataclass(frozen=True)
class FieldBase:
    name: str

    def plug(self, h):
        return Field(h, self.name)


@dataclass(frozen=True)
class CallArg:
    fname: str
    done: tuple
    rest: tuple

    def plug(self, h):
        return Call(self.fname, self.done + (h,) + self.rest)


@dataclass(frozen=True)
class NewArrayLen:
    elem: object

    def plug(self, h):
        return NewArray(self.elem, h)


@dataclass(frozen=True)
class AssignRhs:
    lval: Expr

    def plug(self, h):
        return Assign(self.lval, h)


@dataclass(frozen=True)
class AssignLvalBase:
    index: Expr
    rhs: Expr

    def plug(self, h):
        return Assign(Index(h, self.index), self.rhs)


@dataclass(frozen=True)
class AssignLvalIdx:
    base: Const
    rhs: Expr

    def plug(self, h):
        return Assign(Index(self.base, h), self.rhs)


@dataclass(frozen=True)
class DeclRhs:
    type: object
    name: str

    def plug(self, h):
        return Decl(self.type, self.name, h)


@dataclass(frozen=True)
class IfCond:
    then: Stmt
    els: Stmt

    def plug(self, h):
        return If(h, self.then, self.els)


@dataclass(frozen=True)
class CommuteGuard:
    left: Stmt
    right: Stmt
    alias: str

    def plug(self, h):
        return Commute(h, self.left, self.right, self.alias)


@dataclass(frozen=True)
class LockArg:
    def plug(self, h):
        return Lock(h)


@dataclass(frozen=True)
class UnlockArg:
    def plug(self, h):
        return Unlock(h)


@dataclass(frozen=True)
class AssumeArg:
    def plug(self, h):
        return Assume(h)


Context = tuple  # frames, outermost first

# ---------------------------------------------------------------------------
# Decomposition
# ---------------------------------------------------------------------------

REDEX_KINDS = (
    "VarRead", "Deref", "IndexConst", "NewArray", "NewHashtable", "UnopConst", "BinopConsts",
    "TernaryResolved", "FieldConst", "BuiltinCall", "AssignConst", "DeclConst", "IfResolved",
    "WhileUnroll", "SkipSeq", "CommuteFalse", "CommuteTrue", "Lock", "Unlock", "Havoc", "Assume",
    "ScopeEnter", "Push", "Pop",
)


@dataclass(frozen=True)
class Decomposition:
    ctx: Context
    redex: Term
    kind: str


@dataclass(frozen=True)
class AlreadyValue:
    term: Term


@dataclass(frozen=True)
class Stuck:
    term: Term
    reason: str


def plug(ctx: Context, term: Term) -> Term:
    for frame in reversed(ctx):
        term = frame.plug(term)
    return term


def _is_int(v) -> bool:
    return isinstance(v, int) and not isinstance(v, bool)


def _const_ok_unop(op: str, v) -> str | None:
    if op == "-" and not _is_int(v):
        return f"'-' applied to {render_value(v)}"
    if op == "!" and not isinstance(v, bool):
        return f"'!' applied to {render_value(v)}"
    return None


def _const_ok_binop(a, op: str, b) -> str | None:
    if op in ("+", "-", "*", "/", "%", "<", "<=", ">", ">="):
        if not (_is_int(a) and _is_int(b)):
            return f"'{op}' applied to {render_value(a)} and {render_value(b)}"
    elif op in ("&&", "||"):
        if not (isinstance(a, bool) and isinstance(b, bool)):
            return f"'{op}' applied to {render_value(a)} and {render_value(b)}"
    elif op in ("==", "!="):
        if type(a) is not type(b) and not (isinstance(a, Ref) and isinstance(b, Ref)):
            return f"'{op}' compares {render_value(a)} with {render_value(b)}"
    return None


def decompose(term: Term) -> Decomposition | AlreadyValue | Stuck:
    """Find the unique ``(H, r)`` with ``term = H[r]``."""
    ctx: list = []
    t = term
    while True:
        # -- statements --
        if isinstance(t, Skip):
            return AlreadyValue(term) if not ctx else Stuck(term, "skip in expression position")
        if isinstance(t, Seq):
            if isinstance(t.first, Skip):
                return Decomposition(tuple(ctx), t, "SkipSeq")
            ctx.append(SeqFirst(t.second))
            t = t.first
            continue
        if isinstance(t, Assign):
            lv = t.lval
            if isinstance(lv, Index):
                if not isinstance(lv.base, Const):
                    ctx.append(AssignLvalBase(lv.index, t.expr))
                    t = lv.base
                    continue
                if not isinstance(lv.index, Const):
                    ctx.append(AssignLvalIdx(lv.base, t.expr))
                    t = lv.index
                    continue
            elif not isinstance(lv, Var):
                return Stuck(term, f"bad assignment target {lv!r}")
            if not isinstance(t.expr, Const):
                ctx.append(AssignRhs(lv))
                t = t.expr
                continue
            return Decomposition(tuple(ctx), t, "AssignConst")
        if isinstance(t, Decl):
            if not isinstance(t.expr, Const):
                ctx.append(DeclRhs(t.type, t.name))
                t = t.expr
                continue
            return Decomposition(tuple(ctx), t, "DeclConst")
        if isinstance(t, If):
            if not isinstance(t.cond, Const):
                ctx.append(IfCond(t.then, t.els))
                t = t.cond
                continue
            if not isinstance(t.cond.value, bool):
                return Stuck(term, f"if condition {render_value(t.cond.value)} is not a bool")
            return Decomposition(tuple(ctx), t, "IfResolved")
        if isinstance(t, While):
            return Decomposition(tuple(ctx), t, "WhileUnroll")
        if isinstance(t, Commute):
            if t.guard is None:
                return Decomposition(tuple(ctx), t, "CommuteFalse")
            if not isinstance(t.guard, Const):
                ctx.append(CommuteGuard(t.left, t.right, t.alias))
                t = t.guard
                continue
            if t.guard.value is True:
                return Decomposition(tuple(ctx), t, "CommuteTrue")
            if t.guard.value is False:
                return Decomposition(tuple(ctx), t, "CommuteFalse")
            return Stuck(term, "commute guard is not a bool")
        if isinstance(t, Lock):
            if not isinstance(t.expr, Const):
                ctx.append(LockArg())
                t = t.expr
                continue
            if not _is_int(t.expr.value):
                return Stuck(term, "lock id is not an int")
            return Decomposition(tuple(ctx), t, "Lock")
        if isinstance(t, Unlock):
            if not isinstance(t.expr, Const):
                ctx.append(UnlockArg())
                t = t.expr
                continue
            if not _is_int(t.expr.value):
                return Stuck(term, "lock id is not an int")
            return Decomposition(tuple(ctx), t, "Unlock")
        if isinstance(t, Assume):
            if not isinstance(t.expr, Const):
                ctx.append(AssumeArg())
                t = t.expr
                continue
            if not isinstance(t.expr.value, bool):
                return Stuck(term, "assume expects a bool")
            return Decomposition(tuple(ctx), t, "Assume")
        if isinstance(t, Havoc):
            return Decomposition(tuple(ctx), t, "Havoc")
        if isinstance(t, Scope):
            return Decomposition(tuple(ctx), t, "ScopeEnter")
        if isinstance(t, Push):
            return Decomposition(tuple(ctx), t, "Push")
        if isinstance(t, Pop):
            return Decomposition(tuple(ctx), t, "Pop")
        # -- expressions --
        if isinstance(t, Const):
            return AlreadyValue(term) if not ctx else Stuck(term, "constant in hole")
        if isinstance(t, Var):
            return Decomposition(tuple(ctx), t, "VarRead")
        if isinstance(t, Old):
            return Stuck(term, "old(...) is only meaningful inside a loop summary")
        if isinstance(t, Deref):
            if not isinstance(t.expr, Const):
                ctx.append(DerefArg())
                t = t.expr
                continue
            return Decomposition(tuple(ctx), t, "Deref")
        if isinstance(t, Index):
            if not isinstance(t.base, Const):
                ctx.append(IndexBase(t.index))
                t = t.base
                continue
            if not isinstance(t.index, Const):
                ctx.append(IndexIdx(t.base))
                t = t.index
                continue
            if not isinstance(t.base.value, Ref):
                return Stuck(term, f"cannot index {render_value(t.base.value)}")
            return Decomposition(tuple(ctx), t, "IndexConst")
        if isinstance(t, NewArray):
            if not isinstance(t.length, Const):
                ctx.append(NewArrayLen(t.elem))
                t = t.length
                continue
            if not _is_int(t.length.value):
                return Stuck(term, "array length is not an int")
            return Decomposition(tuple(ctx), t, "NewArray")
        if isinstance(t, NewHashtable):
            return Decomposition(tuple(ctx), t, "NewHashtable")
        if isinstance(t, Unop):
            if not isinstance(t.expr, Const):
                ctx.append(UnopArg(t.op))
                t = t.expr
                continue
            why = _const_ok_unop(t.op, t.expr.value)
            if why:
                return Stuck(term, why)
            return Decomposition(tuple(ctx), t, "UnopConst")
        if isinstance(t, Binop):
            if not isinstance(t.left, Const):
                ctx.append(BinopLeft(t.op, t.right))
                t = t.left
                continue
            if not isinstance(t.right, Const):
                ctx.append(BinopRight(t.left, t.op))
                t = t.right
                continue
            why = _const_ok_binop(t.left.value, t.op, t.right.value)
            if why:
                return Stuck(term, why)
            return Decomposition(tuple(ctx), t, "BinopConsts")
        if isinstance(t, Ternary):
            if not isinstance(t.cond, Const):
                ctx.append(TernaryCond(t.then, t.els))
                t = t.cond
                continue
            if not isinstance(t.cond.value, bool):
                return Stuck(term, "ternary condition is not a bool")
            return Decomposition(tuple(ctx), t, "TernaryResolved")
        if isinstance(t, Field):
            if not isinstance(t.expr, Const):
                ctx.append(FieldBase(t.name))
                t = t.expr
                continue
            return Decomposition(tuple(ctx), t, "FieldConst")
        if isinstance(t, Call):
            for i, a in enumerate(t.args):
                if not isinstance(a, Const):
                    ctx.append(CallArg(t.fname, t.args[:i], t.args[i + 1:]))
                    t = a
                    break
            else:
                return Decomposition(tuple(ctx), t, "BuiltinCall")
            continue
        return Stuck(term, f"unknown term {t!r}")


# ---------------------------------------------------------------------------
# Redex reduction
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Reduction:
    term: Term
    state: ScopedState
    eff: tuple | None  # (target, rendered value) or None for ε


def tdiv(a: int, b: int) -> int:
    """Division truncating toward zero."""
    if b == 0:
        raise RuntimeFault("division by zero")
    q = abs(a) // abs(b)
    return wrap(q if (a >= 0) == (b >= 0) else -q)


def tmod(a: int, b: int) -> int:
    if b == 0:
        raise RuntimeFault("modulus by zero")
    return wrap(a - b * tdiv(a, b))


def apply_unop(op: str, v):
    if op == "-":
        return wrap(-v)
    return not v


def apply_binop(a, op: str, b):
    if op == "+":
        return wrap(a + b)
    if op == "-":
        return wrap(a - b)
    if op == "*":
        return wrap(a * b)
    if op == "/":
        return tdiv(a, b)
    if op == "%":
        return tmod(a, b)
    if op == "==":
        return a == b
    if op == "!=":
        return a != b
    if op == "<":
        return a < b
    if op == "<=":
        return a <= b
    if op == ">":
        return a > b
    if op == ">=":
        return a >= b
    if op == "&&":
        return a and b
    if op == "||":
        return a or b
    raise RuntimeFault(f"unknown operator {op}")


def index_read(state: ScopedState, ref, key):
    obj = state.deref(ref)
    if isinstance(obj, ArrayObj):
        if not _is_int(key):
            raise RuntimeFault("array index is not an int")
        return obj.get(key)
    return obj.get(key)


def field_read(state: ScopedState, v, name: str):
    obj = state.deref(v)
    if name == "size" and isinstance(obj, TableObj):
        return obj.size
    if name == "length" and isinstance(obj, ArrayObj):
        return len(obj.elems)
    raise RuntimeFault(f"no field '{name}'")


def call_builtin(state: ScopedState, fname: str, args: Sequence):
    if fname == "abs":
        return wrap(abs(args[0]))
    if fname == "min":
        return min(args[0], args[1])
    if fname == "max":
        return max(args[0], args[1])
    if fname == "busy":
        # Pure busy-work: semantically the constant 0.
        if args[0] < 0:
            raise RuntimeFault("busy expects a non-negative amount")
        return 0
    if fname == "ht_mem":
        obj = state.deref(args[0])
        if not isinstance(obj, TableObj):
            raise RuntimeFault("ht_mem expects a table")
        return obj.mem(args[1])
    if fname == "ht_size":
        obj = state.deref(args[0])
        if not isinstance(obj, TableObj):
            raise RuntimeFault("ht_size expects a table")
        return obj.size
    if fname == "len":
        obj = state.deref(args[0])
        if not isinstance(obj, ArrayObj):
            raise RuntimeFault("len expects an array")
        return len(obj.elems)
    raise RuntimeFault(f"unknown builtin '{fname}'")


def index_write(state: ScopedState, ref, key, value) -> ScopedState:
    obj = state.deref(ref)
    if isinstance(obj, ArrayObj):
        if not _is_int(key):
            raise RuntimeFault("array index is not an int")
        return state.store(ref, obj.set(key, value))
    return state.store(ref, obj.put(key, value))


HavocDomain = Callable[[str, object], Iterable]


def default_havoc_domain(name: str, current) -> Iterable:
    """Values ``havoc`` may draw for a variable currently holding ``current``."""
    if isinstance(current, bool):
        return (False, True)
    if _is_int(current):
        return range(-2, 3)
    return (current,)


def reduce_redex(d: Decomposition, state: ScopedState, havoc: HavocDomain = default_havoc_domain) -> list[Reduction]:
    """All reductions of the redex ``d.redex`` in ``state``.

    Almost every redex has exactly one reduction.  ``havoc`` has one per
    candidate value and ``assume(false)`` has none (the path is pruned).
    ``commute(true)`` and lock acquisition are semantics-specific and are
    handled by the callers.
    """
    r = d.redex
    k = d.kind
    if k == "VarRead":
        return [Reduction(Const(state.lookup(r.name)), state, None)]
    if k == "Deref":
        return [Reduction(Const(state.lookup(r.expr.value) if isinstance(r.expr.value, str) else r.expr.value),
                          state, None)]
    if k == "IndexConst":
        return [Reduction(Const(index_read(state, r.base.value, r.index.value)), state, None)]
    if k == "NewArray":
        obj = new_heap_object(ArrayT(r.elem), r.length.value)
        ref, st = state.alloc(obj)
        return [Reduction(Const(ref), st, (repr(ref), "new"))]
    if k == "NewHashtable":
        ref, st = state.alloc(new_heap_object(HashtableT(r.key, r.val)))
        return [Reduction(Const(ref), st, (repr(ref), "new"))]
    if k == "UnopConst":
        return [Reduction(Const(apply_unop(r.op, r.expr.value)), state, None)]
    if k == "BinopConsts":
        return [Reduction(Const(apply_binop(r.left.value, r.op, r.right.value)), state, None)]
    if k == "TernaryResolved":
        return [Reduction(r.then if r.cond.value else r.els, state, None)]
    if k == "FieldConst":
        return [Reduction(Const(field_read(state, r.expr.value, r.name)), state, None)]
    if k == "BuiltinCall":
        return [Reduction(Const(call_builtin(state, r.fname, [a.value for a in r.args])), state, None)]
    if k == "AssignConst":
        v = r.expr.value
        if isinstance(r.lval, Var):
            return [Reduction(SKIP, state.update(r.lval.name, v), (r.lval.name, render_value(v)))]
        ref, key = r.lval.base.value, r.lval.index.value
        st = index_write(state, ref, key, v)
        return [Reduction(SKIP, st, (f"{ref!r}[{render_value(key)}]", render_value(v)))]
    if k == "DeclConst":
        v = r.expr.value
        return [Reduction(SKIP, state.declare(r.name, v), (r.name, render_value(v)))]
    if k == "IfResolved":
        return [Reduction(r.then if r.cond.value else r.els, state, None)]
    if k == "WhileUnroll":
        return [Reduction(If(r.cond, Seq(r.body, r), SKIP), state, None)]
    if k == "SkipSeq":
        return [Reduction(r.second, state, None)]
    if k == "CommuteFalse":
        return [Reduction(Seq(Scope(r.left), Scope(r.right)), state, None)]
    if k == "Lock":
        n = r.expr.value
        return [Reduction(SKIP, state.set_lock(n, True), (f"lock({n})", "true"))]
    if k == "Unlock":
        n = r.expr.value
        return [Reduction(SKIP, state.set_lock(n, False), (f"lock({n})", "false"))]
    if k == "Assume":
        return [Reduction(SKIP, state, None)] if r.expr.value else []
    if k == "Havoc":
        if not r.names:
            return [Reduction(SKIP, state, None)]
        name, rest = r.names[0], r.names[1:]
        cur = state.lookup(name)
        nxt = Havoc(rest) if rest else SKIP
        return [Reduction(nxt, state.update(name, v), (name, render_value(v))) for v in havoc(name, cur)]
    if k == "ScopeEnter":
        return [Reduction(Seq(r.body, POP), state.push(), None)]
    if k == "Push":
        return [Reduction(SKIP, state.push(), None)]
    if k == "Pop":
        return [Reduction(SKIP, state.pop(), None)]
    raise RuntimeFault(f"no reduction for redex kind {k}")


# ---------------------------------------------------------------------------
# seq / nd stepping
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Step:
    rule: str
    term: Stmt
    state: ScopedState
    eff: tuple | None


def commute_orders(r: Commute, sem: str) -> list[Stmt]:
    first = Seq(Scope(r.left), Scope(r.right))
    if sem == "seq":
        return [first]
    return [first, Seq(Scope(r.right), Scope(r.left))]


def successors(term: Stmt, state: ScopedState, sem: str = "seq",
               havoc: HavocDomain = default_havoc_domain) -> list[Step]:
    """All ``sem``-successors of ``<term, state>`` for ``sem`` in seq/nd.

    Raises :class:`RuntimeFault` on stuck terms and runtime errors.
    """
    d = decompose(term)
    if isinstance(d, AlreadyValue):
        return []
    if isinstance(d, Stuck):
        raise RuntimeFault(f"stuck: {d.reason}")
    if d.kind == "CommuteTrue":
        return [Step("CommuteTrue", plug(d.ctx, t), state, None) for t in commute_orders(d.redex, sem)]
    if d.kind == "Lock" and state.lock_held(d.redex.expr.value):
        return []  # not enabled; a sequential run is then deadlocked
    return [Step(d.kind, plug(d.ctx, red.term), red.state, red.eff) for red in reduce_redex(d, state, havoc)]


class Deadlock(RuntimeFault):
    pass


def step_seq(term: Stmt, state: ScopedState) -> Step | None:
    """The unique seq successor, or ``None`` when ``term`` is ``skip``."""
    if isinstance(term, Skip):
        return None
    succ = successors(term, state, "seq")
    if not succ:
        d = decompose(term)
        if isinstance(d, Decomposition) and d.kind == "Lock":
            raise Deadlock(f"lock {d.redex.expr.value} already held")
        raise RuntimeFault("execution blocked (assume false)")
    return succ[0]


def step_nd(term: Stmt, state: ScopedState) -> list[Step]:
    return successors(term, state, "nd")


def run_seq(term: Stmt, state: ScopedState, budget: int = 100_000) -> ScopedState:
    """Run to completion under seq; raises on budget exhaustion."""
    for _ in range(budget):
        st = step_seq(term, state)
        if st is None:
            return state
        term, state = st.term, st.state
    if isinstance(term, Skip):
        return state
    raise BudgetExceeded(f"step budget {budget} exhausted")


class BudgetExceeded(RuntimeFault):
    pass


__all__ = [
    "AlreadyValue",
    "BudgetExceeded",
    "Deadlock",
    "Decomposition",
    "REDEX_KINDS",
    "Reduction",
    "Step",
    "Stuck",
    "UNIT",
    "Unit",
    "decompose",
    "plug",
    "reduce_redex",
    "run_seq",
    "step_nd",
    "step_seq",
    "successors",
]
