"""Lightweight static checker and commute-site collection.

The checker rejects obviously ill-typed programs (``true + 1``, unbound
names, indexing a scalar) before execution.  While walking the program it
records, for every ``commute`` statement in source order, the variables
visible at that point: the context environment of the site.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

from .ast import (
    BOOL,
    INT,
    STRING,
    UNIT_T,
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
    IntT,
    Lock,
    NewArray,
    NewHashtable,
    Old,
    Pop,
    Push,
    Ref,
    RefT,
    Scope,
    Seq,
    Skip,
    Stmt,
    Ternary,
    Type,
    Unit,
    Unlock,
    Unop,
    Var,
    While,
)


class StaticTypeError(Exception):
    pass


@dataclass
class CommuteSite:
    """A commute statement together with the variables visible at it."""

    index: int
    node: Commute
    env: dict[str, Type] = field(default_factory=dict)
    depth: int = 0  # number of enclosing commute fragments

    @property
    def guard(self) -> Expr | None:
        return self.node.guard

    @property
    def left(self) -> Stmt:
        return self.node.left

    @property
    def right(self) -> Stmt:
        return self.node.right


def const_type(v) -> Type:
    if isinstance(v, bool):
        return BOOL
    if isinstance(v, int):
        return INT
    if isinstance(v, str):
        return STRING
    if isinstance(v, Unit):
        return UNIT_T
    if isinstance(v, Ref):
        return RefT(UNIT_T)
    raise StaticTypeError(f"unknown constant {v!r}")


def _same(a: Type, b: Type) -> bool:
    if isinstance(a, RefT) or isinstance(b, RefT):
        return True
    return a == b


def expr_type(e: Expr, env: Mapping[str, Type]) -> Type:
    if isinstance(e, Const):
        return const_type(e.value)
    if isinstance(e, (Var, Old)):
        if e.name not in env:
            raise StaticTypeError(f"unbound variable '{e.name}'")
        return env[e.name]
    if isinstance(e, Deref):
        t = expr_type(e.expr, env)
        return t.inner if isinstance(t, RefT) else t
    if isinstance(e, Index):
        bt = expr_type(e.base, env)
        it = expr_type(e.index, env)
        if isinstance(bt, ArrayT):
            if not isinstance(it, IntT):
                raise StaticTypeError(f"array index must be int, got {it}")
            return bt.elem
        if isinstance(bt, HashtableT):
            if not _same(it, bt.key):
                raise StaticTypeError(f"table key must be {bt.key}, got {it}")
            return bt.val
        raise StaticTypeError(f"cannot index a value of type {bt}")
    if isinstance(e, Field):
        bt = expr_type(e.expr, env)
        if e.name == "size" and isinstance(bt, HashtableT):
            return INT
        if e.name == "length" and isinstance(bt, ArrayT):
            return INT
        raise StaticTypeError(f"no field '{e.name}' on {bt}")
    if isinstance(e, NewArray):
        if not isinstance(expr_type(e.length, env), IntT):
            raise StaticTypeError("array length must be int")
        return ArrayT(e.elem)
    if isinstance(e, NewHashtable):
        return HashtableT(e.key, e.val)
    if isinstance(e, Unop):
        t = expr_type(e.expr, env)
        want = INT if e.op == "-" else BOOL
        if t != want:
            raise StaticTypeError(f"operator '{e.op}' expects {want}, got {t}")
        return want
    if isinstance(e, Binop):
        lt, rt = expr_type(e.left, env), expr_type(e.right, env)
        if e.op in ("+", "-", "*", "/", "%"):
            if lt != INT or rt != INT:
                raise StaticTypeError(f"operator '{e.op}' expects int operands, got {lt} and {rt}")
            return INT
        if e.op in ("<", "<=", ">", ">="):
            if lt != INT or rt != INT:
                raise StaticTypeError(f"operator '{e.op}' expects int operands, got {lt} and {rt}")
            return BOOL
        if e.op in ("&&", "||"):
            if lt != BOOL or rt != BOOL:
                raise StaticTypeError(f"operator '{e.op}' expects bool operands, got {lt} and {rt}")
            return BOOL
        if not _same(lt, rt):
            raise StaticTypeError(f"cannot compare {lt} with {rt}")
        return BOOL
    if isinstance(e, Ternary):
        if expr_type(e.cond, env) != BOOL:
            raise StaticTypeError("ternary condition must be bool")
        a, b = expr_type(e.then, env), expr_type(e.els, env)
        if not _same(a, b):
            raise StaticTypeError(f"ternary branches differ: {a} vs {b}")
        return a
    if isinstance(e, Call):
        ts = [expr_type(a, env) for a in e.args]
        f = e.fname
        if f in ("abs", "min", "max", "busy"):
            if any(t != INT for t in ts):
                raise StaticTypeError(f"{f} expects int arguments")
            return INT
        if f == "ht_mem":
            if not isinstance(ts[0], HashtableT):
                raise StaticTypeError("ht_mem expects a table")
            return BOOL
        if f == "ht_size":
            if not isinstance(ts[0], HashtableT):
                raise StaticTypeError("ht_size expects a table")
            return INT
        if f == "len":
            if not isinstance(ts[0], ArrayT):
                raise StaticTypeError("len expects an array")
            return INT
        raise StaticTypeError(f"unknown builtin '{f}'")
    raise StaticTypeError(f"unknown expression {e!r}")


class Checker:
    def __init__(self):
        self.sites: list[CommuteSite] = []

    def check(self, s: Stmt, env: dict[str, Type], depth: int = 0) -> dict[str, Type]:
        """Check ``s`` under ``env``; return the environment after ``s``."""
        if isinstance(s, (Skip, Push, Pop)):
            return env
        if isinstance(s, Seq):
            return self.check(s.second, self.check(s.first, env, depth), depth)
        if isinstance(s, Assign):
            lt = expr_type(s.lval, env)
            rt = expr_type(s.expr, env)
            if not _same(lt, rt):
                raise StaticTypeError(f"cannot assign {rt} to {lt}")
            return env
        if isinstance(s, Decl):
            rt = expr_type(s.expr, env)
            if not _same(s.type, rt):
                raise StaticTypeError(f"cannot initialize {s.type} '{s.name}' with {rt}")
            out = dict(env)
            out[s.name] = s.type
            return out
        if isinstance(s, If):
            if expr_type(s.cond, env) != BOOL:
                raise StaticTypeError("if condition must be bool")
            a = self.check(s.then, env, depth)
            b = self.check(s.els, env, depth)
            return {**a, **b}
        if isinstance(s, While):
            if expr_type(s.cond, env) != BOOL:
                raise StaticTypeError("while condition must be bool")
            out = self.check(s.body, env, depth)
            if s.summary is not None:
                for n in s.summary.modifies:
                    if n not in out:
                        raise StaticTypeError(f"summary modifies unknown variable '{n}'")
                if expr_type(s.summary.relation, out) != BOOL:
                    raise StaticTypeError("summary relation must be bool")
            return {**env, **out}
        if isinstance(s, Commute):
            if s.guard is not None and expr_type(s.guard, env) != BOOL:
                raise StaticTypeError("commute guard must be bool")
            site = CommuteSite(len(self.sites), s, dict(env), depth)
            self.sites.append(site)
            self.check(s.left, dict(env), depth + 1)
            self.check(s.right, dict(env), depth + 1)
            return env
        if isinstance(s, (Lock, Unlock)):
            if expr_type(s.expr, env) != INT:
                raise StaticTypeError("lock ids are ints")
            return env
        if isinstance(s, Havoc):
            for n in s.names:
                if n not in env:
                    raise StaticTypeError(f"havoc of unbound variable '{n}'")
            return env
        if isinstance(s, Assume):
            if expr_type(s.expr, env) != BOOL:
                raise StaticTypeError("assume expects bool")
            return env
        if isinstance(s, Scope):
            self.check(s.body, dict(env), depth)
            return env
        raise StaticTypeError(f"unknown statement {s!r}")


def check_stmt(s: Stmt, env: Mapping[str, Type]) -> list[CommuteSite]:
    """Type-check ``s``; return its commute sites in source order."""
    c = Checker()
    c.check(s, dict(env))
    return c.sites


def collect_sites(s: Stmt, env: Mapping[str, Type]) -> list[CommuteSite]:
    return check_stmt(s, env)


__all__ = [
    "CommuteSite",
    "StaticTypeError",
    "check_stmt",
    "collect_sites",
    "expr_type",
]
