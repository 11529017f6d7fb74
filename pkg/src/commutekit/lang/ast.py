"""Abstract syntax for the commute language.

Terms are immutable and hashable so configurations can be deduplicated
during exhaustive exploration.  Hashes are cached on first use because
the explorer hashes the same deep terms many times.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Union

# ---------------------------------------------------------------------------
# Types
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class IntT:
    def __str__(self) -> str:
        return "int"


@dataclass(frozen=True)
class BoolT:
    def __str__(self) -> str:
        return "bool"


@dataclass(frozen=True)
class StringT:
    def __str__(self) -> str:
        return "string"


@dataclass(frozen=True)
class UnitT:
    def __str__(self) -> str:
        return "unit"


@dataclass(frozen=True)
class ArrayT:
    elem: "Type"

    def __str__(self) -> str:
        return f"{self.elem}[]"


@dataclass(frozen=True)
class HashtableT:
    key: "Type"
    val: "Type"

    def __str__(self) -> str:
        return f"hashtable[{self.key},{self.val}]"


@dataclass(frozen=True)
class RefT:
    inner: "Type"

    def __str__(self) -> str:
        return f"ref<{self.inner}>"


Type = Union[IntT, BoolT, StringT, UnitT, ArrayT, HashtableT, RefT]

INT = IntT()
BOOL = BoolT()
STRING = StringT()
UNIT_T = UnitT()

SCALAR_TYPES = (IntT, BoolT, StringT)


def is_container(ty: Type) -> bool:
    return isinstance(ty, (ArrayT, HashtableT))


def check_container_type(ty: Type) -> None:
    """Container element/key/value types must be non-ref, non-unit scalars."""
    parts: tuple[Type, ...] = ()
    if isinstance(ty, ArrayT):
        parts = (ty.elem,)
    elif isinstance(ty, HashtableT):
        parts = (ty.key, ty.val)
    for p in parts:
        if isinstance(p, (RefT, UnitT)) or is_container(p):
            raise ValueError(f"invalid component type {p} in {ty}")


# ---------------------------------------------------------------------------
# Node base
# ---------------------------------------------------------------------------


def node(cls):
    """Make ``cls`` a frozen dataclass whose hash is computed once."""
    cls = dataclass(frozen=True)(cls)
    generated = cls.__hash__

    def __hash__(self):
        try:
            return self.__dict__["_hash"]
        except KeyError:
            h = generated(self)
            object.__setattr__(self, "_hash", h)
            return h

    cls.__hash__ = __hash__
    return cls


class Unit:
    """The unit value ``()``."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "()"

    def __reduce__(self):
        return (Unit, ())


UNIT = Unit()


@dataclass(frozen=True, order=True)
class Ref:
    """A reference to a heap location."""

    loc: int

    def __repr__(self) -> str:
        return f"#{self.loc}"


Value = Union[int, bool, str, Unit, Ref]

# ---------------------------------------------------------------------------
# Expressions
# ---------------------------------------------------------------------------

BINOPS = ("+", "-", "*", "/", "%", "==", "!=", "<", "<=", ">", ">=", "&&", "||")
UNOPS = ("-", "!")

# Builtins are pure and evaluated atomically.
BUILTINS = {
    "abs": 1,
    "min": 2,
    "max": 2,
    "busy": 1,
    "ht_mem": 2,
    "ht_size": 1,
    "len": 1,
}


class Expr:
    __slots__ = ()


@node
class Const(Expr):
    value: Any


@node
class Var(Expr):
    name: str


@node
class Deref(Expr):
    expr: Expr


@node
class Index(Expr):
    base: Expr
    index: Expr


@node
class NewArray(Expr):
    elem: Type
    length: Expr


@node
class NewHashtable(Expr):
    key: Type
    val: Type


@node
class Unop(Expr):
    op: str
    expr: Expr


@node
class Binop(Expr):
    left: Expr
    op: str
    right: Expr


@node
class Ternary(Expr):
    cond: Expr
    then: Expr
    els: Expr


@node
class Field(Expr):
    expr: Expr
    name: str


@node
class Call(Expr):
    """Builtin call.  User functions never survive parsing (they are inlined)."""

    fname: str
    args: tuple[Expr, ...]


@node
class Old(Expr):
    """``old(v)`` inside a loop summary: the value of ``v`` before the loop."""

    name: str


TRUE = Const(True)
FALSE = Const(False)

# ---------------------------------------------------------------------------
# Statements
# ---------------------------------------------------------------------------


class Stmt:
    __slots__ = ()


@node
class Skip(Stmt):
    pass


SKIP = Skip()


@node
class Seq(Stmt):
    first: Stmt
    second: Stmt


@node
class Assign(Stmt):
    lval: Expr  # Var or Index
    expr: Expr


@node
class Decl(Stmt):
    type: Type
    name: str
    expr: Expr


@node
class If(Stmt):
    cond: Expr
    then: Stmt
    els: Stmt


@node
class LoopSummary:
    """Annotation ``@summary modifies x,y: <relation>`` attached to a loop."""

    modifies: tuple[str, ...]
    relation: Expr


@node
class While(Stmt):
    cond: Expr
    body: Stmt
    summary: LoopSummary | None = None


@node
class Commute(Stmt):
    """``commute(guard) { {left} {right} }``.  A ``None`` guard is written ``_``."""

    guard: Expr | None
    left: Stmt
    right: Stmt
    alias: str = "commute"


@node
class Lock(Stmt):
    expr: Expr


@node
class Unlock(Stmt):
    expr: Expr


@node
class Havoc(Stmt):
    names: tuple[str, ...]


@node
class Assume(Stmt):
    expr: Expr


@node
class Scope(Stmt):
    """Block with its own variable frame; declarations inside vanish at exit."""

    body: Stmt


@node
class Push(Stmt):
    """Runtime marker: open a fresh innermost frame."""


@node
class Pop(Stmt):
    """Runtime marker: discard the innermost frame."""


PUSH = Push()
POP = Pop()

# ---------------------------------------------------------------------------
# Helpers
# ---------------------------------------------------------------------------


def seq(*stmts: Stmt) -> Stmt:
    """Right-nested sequence; drops nothing, empty is ``skip``."""
    if not stmts:
        return SKIP
    out = stmts[-1]
    for s in reversed(stmts[:-1]):
        out = Seq(s, out)
    return out


def flatten(s: Stmt) -> list[Stmt]:
    """Top-level statement list, descending through nested ``Seq`` on both sides."""
    out: list[Stmt] = []
    stack = [s]
    while stack:
        cur = stack.pop()
        if isinstance(cur, Seq):
            stack.append(cur.second)
            stack.append(cur.first)
        elif isinstance(cur, Skip):
            continue
        else:
            out.append(cur)
    return out


def is_value(e: Expr) -> bool:
    return isinstance(e, Const)


def iter_exprs(s: Stmt):
    """Expressions directly owned by statement ``s`` (not nested statements)."""
    if isinstance(s, Assign):
        yield s.lval
        yield s.expr
    elif isinstance(s, Decl):
        yield s.expr
    elif isinstance(s, (If, While)):
        yield s.cond
    elif isinstance(s, Commute):
        if s.guard is not None:
            yield s.guard
    elif isinstance(s, (Lock, Unlock, Assume)):
        yield s.expr


def child_stmts(s: Stmt) -> tuple[Stmt, ...]:
    if isinstance(s, Seq):
        return (s.first, s.second)
    if isinstance(s, If):
        return (s.then, s.els)
    if isinstance(s, While):
        return (s.body,)
    if isinstance(s, Commute):
        return (s.left, s.right)
    if isinstance(s, Scope):
        return (s.body,)
    return ()


def subexprs(e: Expr):
    """All sub-expressions of ``e`` including itself, preorder."""
    yield e
    if isinstance(e, (Deref, Unop)):
        yield from subexprs(e.expr)
    elif isinstance(e, Field):
        yield from subexprs(e.expr)
    elif isinstance(e, Index):
        yield from subexprs(e.base)
        yield from subexprs(e.index)
    elif isinstance(e, NewArray):
        yield from subexprs(e.length)
    elif isinstance(e, Binop):
        yield from subexprs(e.left)
        yield from subexprs(e.right)
    elif isinstance(e, Ternary):
        yield from subexprs(e.cond)
        yield from subexprs(e.then)
        yield from subexprs(e.els)
    elif isinstance(e, Call):
        for a in e.args:
            yield from subexprs(a)


def walk(s: Stmt):
    """Preorder traversal of statements."""
    yield s
    for c in child_stmts(s):
        yield from walk(c)


def commute_sites(s: Stmt) -> list[Commute]:
    """Commute statements in source (preorder) order."""
    return [x for x in walk(s) if isinstance(x, Commute)]


def map_stmt(s: Stmt, fn) -> Stmt:
    """Bottom-up rebuild: ``fn`` is applied to each statement after its children."""
    if isinstance(s, Seq):
        s = Seq(map_stmt(s.first, fn), map_stmt(s.second, fn))
    elif isinstance(s, If):
        s = If(s.cond, map_stmt(s.then, fn), map_stmt(s.els, fn))
    elif isinstance(s, While):
        s = While(s.cond, map_stmt(s.body, fn), s.summary)
    elif isinstance(s, Commute):
        s = Commute(s.guard, map_stmt(s.left, fn), map_stmt(s.right, fn), s.alias)
    elif isinstance(s, Scope):
        s = Scope(map_stmt(s.body, fn))
    return fn(s)


def map_expr(e: Expr, fn) -> Expr:
    """Bottom-up rebuild of an expression."""
    if isinstance(e, Deref):
        e = Deref(map_expr(e.expr, fn))
    elif isinstance(e, Unop):
        e = Unop(e.op, map_expr(e.expr, fn))
    elif isinstance(e, Field):
        e = Field(map_expr(e.expr, fn), e.name)
    elif isinstance(e, Index):
        e = Index(map_expr(e.base, fn), map_expr(e.index, fn))
    elif isinstance(e, NewArray):
        e = NewArray(e.elem, map_expr(e.length, fn))
    elif isinstance(e, Binop):
        e = Binop(map_expr(e.left, fn), e.op, map_expr(e.right, fn))
    elif isinstance(e, Ternary):
        e = Ternary(map_expr(e.cond, fn), map_expr(e.then, fn), map_expr(e.els, fn))
    elif isinstance(e, Call):
        e = Call(e.fname, tuple(map_expr(a, fn) for a in e.args))
    return fn(e)


def map_stmt_exprs(s: Stmt, fn) -> Stmt:
    """Apply ``fn`` (an Expr -> Expr rewriter) to every expression in ``s``."""

    def rewrite(st: Stmt) -> Stmt:
        if isinstance(st, Assign):
            return Assign(fn(st.lval), fn(st.expr))
        if isinstance(st, Decl):
            return Decl(st.type, st.name, fn(st.expr))
        if isinstance(st, If):
            return If(fn(st.cond), st.then, st.els)
        if isinstance(st, While):
            return While(fn(st.cond), st.body, st.summary)
        if isinstance(st, Commute):
            g = None if st.guard is None else fn(st.guard)
            return Commute(g, st.left, st.right, st.alias)
        if isinstance(st, Lock):
            return Lock(fn(st.expr))
        if isinstance(st, Unlock):
            return Unlock(fn(st.expr))
        if isinstance(st, Assume):
            return Assume(fn(st.expr))
        return st

    return map_stmt(s, rewrite)


@dataclass
class Program:
    """A parsed source file: the main statement plus header pragmas."""

    body: Stmt
    domain: str | None = None
    init: str | None = None
    pragmas: dict[str, str] = field(default_factory=dict)
