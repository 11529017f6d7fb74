"""Read/write sets and source transformations that make commute sites serializable.

Three patterns enforce pairwise serializability of the two fragments of a
site:

* ``naive``: one lock held from the first to the last instruction that
  touches a conflicting variable, in both fragments;
* ``snapshot``: when one fragment (the reader) only reads what the other
  writes, its reads go to a copy taken before the block, so the fragments
  become independent;
* ``narrow``: instructions are reordered along their dependency DAG so the
  lock covers only the conflict instructions and what lies between them.

``auto`` tries snapshot, then narrow, then naive.  Sites are transformed
bottom-up so inner sites are already protected when the outer one is
analysed.
"""

from __future__ import annotations

import heapq
import logging
from dataclasses import dataclass, field
from typing import Iterable, Mapping

from .lang.ast import (
    BOOL,
    SKIP,
    Assign,
    Assume,
    BoolT,
    Commute,
    Const,
    Decl,
    Expr,
    Havoc,
    If,
    Index,
    IntT,
    Lock,
    Old,
    Program,
    Scope,
    Seq,
    Stmt,
    StringT,
    Type,
    Unlock,
    Unop,
    Var,
    While,
    Call,
    Field,
    flatten,
    is_container,
    iter_exprs,
    map_expr,
    map_stmt,
    seq,
    subexprs,
    walk,
    LoopSummary,
)
from .lang.typecheck import CommuteSite, check_stmt
from .lang.domain import input_spec

log = logging.getLogger(__name__)

PATTERNS = ("auto", "snapshot", "narrow", "naive")


# ---------------------------------------------------------------------------
# Access sets
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AccessSets:
    wr: frozenset = frozenset()
    rd: frozenset = frozenset()

    def __or__(self, other: "AccessSets") -> "AccessSets":
        return AccessSets(self.wr | other.wr, self.rd | other.rd)

    @property
    def all(self) -> frozenset:
        return self.wr | self.rd


def _expr_access(e: Expr, alias: Mapping[str, str]) -> AccessSets:
    rd: set[str] = set()
    wr: set[str] = set()
    for x in subexprs(e):
        if isinstance(x, (Var, Old)):
            rd.add(alias.get(x.name, x.name))
        # builtin ADT operations count as both a read and a write of the container
        root = None
        if isinstance(x, Index) and isinstance(x.base, Var):
            root = x.base.name
        elif isinstance(x, Call) and x.fname in ("ht_mem", "ht_size", "len") and isinstance(x.args[0], Var):
            root = x.args[0].name
        elif isinstance(x, Field) and isinstance(x.expr, Var):
            root = x.expr.name
        if root is not None:
            wr.add(alias.get(root, root))
    return AccessSets(frozenset(wr), frozenset(rd))


def raw_access(s: Stmt, alias: Mapping[str, str] | None = None) -> tuple[AccessSets, frozenset]:
    """Access sets of ``s`` including its own locals, plus the names it declares."""
    alias = alias or {}
    wr: set[str] = set()
    rd: set[str] = set()
    declared: set[str] = set()
    for st in walk(s):
        if isinstance(st, (Lock, Unlock)):
            continue  # lock ids are not variables
        if isinstance(st, Assign):
            lv = st.lval
            if isinstance(lv, Var):
                wr.add(alias.get(lv.name, lv.name))
            else:
                a = _expr_access(lv, alias)
                wr |= a.wr | a.rd  # the container root is read and written
                rd |= a.rd
            a = _expr_access(st.expr, alias)
            wr |= a.wr
            rd |= a.rd
            continue
        if isinstance(st, Decl):
            declared.add(st.name)
            wr.add(st.name)
        if isinstance(st, Havoc):
            wr.update(alias.get(n, n) for n in st.names)
        if isinstance(st, While) and st.summary is not None:
            wr.update(alias.get(n, n) for n in st.summary.modifies)
        for e in iter_exprs(st):
            a = _expr_access(e, alias)
            wr |= a.wr
            rd |= a.rd
    return AccessSets(frozenset(wr), frozenset(rd)), frozenset(declared)


def access_sets(s: Stmt, alias: Mapping[str, str] | None = None) -> AccessSets:
    """Shared variables ``s`` may write and read (its own locals excluded)."""
    a, declared = raw_access(s, alias)
    return AccessSets(a.wr - declared, a.rd - declared)


def conflict_set(s0: Stmt, s1: Stmt, alias: Mapping[str, str] | None = None) -> frozenset:
    a, b = access_sets(s0, alias), access_sets(s1, alias)
    return (a.wr & b.wr) | (a.wr & b.rd) | (a.rd & b.wr)


def alias_classes(body: Stmt, types: Mapping[str, Type]) -> dict[str, str]:
    """Container variables that may share an object, mapped to one representative.

    Any assignment of one container variable to another merges their classes.
    """
    parent: dict[str, str] = {}

    def find(x: str) -> str:
        while parent.get(x, x) != x:
            x = parent[x]
        return x

    for st in walk(body):
        pair = None
        if isinstance(st, Assign) and isinstance(st.lval, Var) and isinstance(st.expr, Var):
            pair = (st.lval.name, st.expr.name)
        elif isinstance(st, Decl) and isinstance(st.expr, Var):
            pair = (st.name, st.expr.name)
        if pair is None or not is_container(types.get(pair[1], BOOL)):
            continue
        a, b = sorted((find(pair[0]), find(pair[1])))
        if a != b:
            parent[b] = a
    return {x: find(x) for x in parent}


# ---------------------------------------------------------------------------
# Results
# ---------------------------------------------------------------------------


class NotApplicable(ValueError):
    pass


@dataclass
class SiteReport:
    site: int
    pattern: str  # "snapshot", "narrow", "naive" or "none"
    con: list[str]
    locks: list[int] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)

    def to_json(self) -> dict:
        return {"site": self.site, "pattern": self.pattern, "con": self.con, "locks": self.locks,
                "notes": self.notes}


# ---------------------------------------------------------------------------
# Pattern 0: naive lock
# ---------------------------------------------------------------------------


def _touches(s: Stmt, con: frozenset, alias: Mapping[str, str]) -> bool:
    a, _ = raw_access(s, alias)
    return bool(a.all & con)


def lock_span(frag: Stmt, con: frozenset, lock: int, alias: Mapping[str, str] | None = None) -> Stmt:
    """``frag`` with ``lock``/``unlock`` around its first..last conflicting instruction."""
    alias = alias or {}
    ins = flatten(frag)
    hits = [i for i, s in enumerate(ins) if _touches(s, con, alias)]
    if not hits:
        return frag
    lo, hi = hits[0], hits[-1]
    return seq(*ins[:lo], Lock(Const(lock)), *ins[lo:hi + 1], Unlock(Const(lock)), *ins[hi + 1:])


def transform_naive_lock(node: Commute, lock: int, alias: Mapping[str, str] | None = None) -> Commute:
    con = conflict_set(node.left, node.right, alias)
    if not con:
        return node
    return Commute(node.guard, lock_span(node.left, con, lock, alias), lock_span(node.right, con, lock, alias),
                   node.alias)


# ---------------------------------------------------------------------------
# Pattern 1: snapshot
# ---------------------------------------------------------------------------


def rename_reads(s: Stmt, v: str, v0: str) -> Stmt:
    def fix_e(e: Expr) -> Expr:
        return Var(v0) if isinstance(e, Var) and e.name == v else e

    def fix(st: Stmt) -> Stmt:
        if isinstance(st, Assign):
            lv = st.lval if isinstance(st.lval, Var) else map_expr(st.lval, fix_e)
            return Assign(lv, map_expr(st.expr, fix_e))
        if isinstance(st, Decl):
            return Decl(st.type, st.name, map_expr(st.expr, fix_e))
        if isinstance(st, If):
            return If(map_expr(st.cond, fix_e), st.then, st.els)
        if isinstance(st, While):
            summ = st.summary
            if summ is not None:
                summ = LoopSummary(summ.modifies, map_expr(summ.relation, fix_e))
            return While(map_expr(st.cond, fix_e), st.body, summ)
        if isinstance(st, Commute):
            g = None if st.guard is None else map_expr(st.guard, fix_e)
            return Commute(g, st.left, st.right, st.alias)
        if isinstance(st, Assume):
            return Assume(map_expr(st.expr, fix_e))
        return st

    return map_stmt(s, fix)


def transform_snapshot(node: Commute, env: Mapping[str, Type], taken: set[str],
                       alias: Mapping[str, str] | None = None) -> Stmt:
    """Gated snapshot form of the site.

    ``if (g) { scope { T v0 = v; ...; commute(true) {s0'} {s1'} } }
    else { commute(false) {s0} {s1} }`` where the reader fragment reads the
    copies ``v0``.  The gate keeps the sequential meaning when ``g`` is false.
    """
    con = conflict_set(node.left, node.right, alias)
    if not con:
        raise NotApplicable("no conflicting variables")
    if node.guard is None or node.guard == Const(False):
        raise NotApplicable("the guard is never true")
    a, b = access_sets(node.left, alias), access_sets(node.right, alias)
    if not (b.all & a.wr):
        reader = 0  # the left fragment only reads what the right one writes
    elif not (a.all & b.wr):
        reader = 1
    else:
        raise NotApplicable("both fragments write variables the other touches")
    frag = node.left if reader == 0 else node.right
    _, declared = raw_access(frag, alias)
    decls, rd = [], frag
    for v in sorted(con):
        ty = env.get(v)
        if not isinstance(ty, (IntT, BoolT, StringT)):
            raise NotApplicable(f"'{v}' is not a scalar")
        if v in declared:
            raise NotApplicable(f"the reader declares its own '{v}'")
        v0 = fresh_name(f"_snap_{v}", taken)
        decls.append(Decl(ty, v0, Var(v)))
        rd = rename_reads(rd, v, v0)
    left, right = (rd, node.right) if reader == 0 else (node.left, rd)
    par = Commute(Const(True), left, right, node.alias)
    if node.guard == Const(True):
        return Scope(seq(*decls, par))
    return If(node.guard, Scope(seq(*decls, par)), Commute(Const(False), node.left, node.right, node.alias))


def fresh_name(base: str, taken: set[str]) -> str:
    name, k = base, 0
    while name in taken:
        k += 1
        name = f"{base}{k}"
    taken.add(name)
    return name


# ---------------------------------------------------------------------------
# Pattern 2: narrowed lock
# ---------------------------------------------------------------------------


class PartitionError(ValueError):
    pass


@dataclass
class DepGraph:
    nodes: list[Stmt]
    access: list[AccessSets]
    edges: set[tuple[int, int]]  # (u, v) with u before v in the original order
    ci: set[int]

    def succ(self, u: int) -> list[int]:
        return sorted(v for a, v in self.edges if a == u)

    def pred(self, v: int) -> list[int]:
        return sorted(u for u, b in self.edges if b == v)

    def closure(self, start: Iterable[int], forward: bool) -> set[int]:
        out: set[int] = set()
        todo = list(start)
        while todo:
            x = todo.pop()
            for y in (self.succ(x) if forward else self.pred(x)):
                if y not in out:
                    out.add(y)
                    todo.append(y)
        return out


def _is_barrier(s: Stmt) -> bool:
    return isinstance(s, (Lock, Unlock)) or (
        any(isinstance(x, (Lock, Unlock)) for x in walk(s)) and not _balanced_locks(s))


def _balanced_locks(s: Stmt) -> bool:
    held: list = []
    for x in walk(s):
        if isinstance(x, Lock):
            held.append(x.expr)
        elif isinstance(x, Unlock):
            if not held or held[-1] != x.expr:
                return False
            held.pop()
    return not held


def dependency_graph(nodes: list[Stmt], con: frozenset, alias: Mapping[str, str] | None = None) -> DepGraph:
    alias = alias or {}
    acc = [raw_access(s, alias)[0] for s in nodes]
    edges: set[tuple[int, int]] = set()
    for v in range(len(nodes)):
        for u in range(v):
            a, b = acc[u], acc[v]
            if (a.wr & b.rd) or (a.rd & b.wr) or (a.wr & b.wr) or _is_barrier(nodes[u]) or _is_barrier(nodes[v]):
                edges.add((u, v))
    ci = {i for i, a in enumerate(acc) if a.all & con}
    return DepGraph(nodes, acc, edges, ci)


def if_convert(nodes: list[Stmt], con: frozenset, taken: set[str], alias: Mapping[str, str] | None = None) -> list[Stmt]:
    """Split conflicting ``if`` statements whose branches also do unrelated work.

    ``if (c) {s1; s2} else {s3}`` becomes ``bool g = c; if (g) {s1}
    if (g) {s2} if (!g) {s3}`` so each piece gets its own dependency node.
    Branches with top-level declarations or locks are left whole.
    """
    alias = alias or {}
    out: list[Stmt] = []
    for s in nodes:
        if not isinstance(s, If) or not _touches(s, con, alias):
            out.append(s)
            continue
        parts = [(True, x) for x in flatten(s.then)] + [(False, x) for x in flatten(s.els)]
        if (len(parts) < 2 or any(isinstance(x, (Decl, Lock, Unlock)) for _, x in parts)
                or all(_touches(x, con, alias) for _, x in parts)):
            out.append(s)
            continue
        g = fresh_name("_g", taken)
        out.append(Decl(BOOL, g, s.cond))
        for pol, x in parts:
            out.append(If(Var(g) if pol else Unop("!", Var(g)), x, SKIP))
    return out


def narrowed_order(g: DepGraph) -> tuple[list[int], list[int]]:
    """Emission order and the spine, grouped ancestors < spine < descendants < independent."""
    if not g.ci:
        return list(range(len(g.nodes))), []
    anc = g.closure(g.ci, forward=False)
    desc = g.closure(g.ci, forward=True)
    spine = set(g.ci) | (anc & desc)
    rank = {}
    for i in range(len(g.nodes)):
        if i in spine:
            rank[i] = 1
        elif i in anc:
            rank[i] = 0
        elif i in desc:
            rank[i] = 2
        else:
            rank[i] = 3
    indeg = {i: len(g.pred(i)) for i in range(len(g.nodes))}
    ready = [(rank[i], i) for i in range(len(g.nodes)) if indeg[i] == 0]
    heapq.heapify(ready)
    order: list[int] = []
    while ready:
        _, u = heapq.heappop(ready)
        order.append(u)
        for v in g.succ(u):
            indeg[v] -= 1
            if indeg[v] == 0:
                heapq.heappush(ready, (rank[v], v))
    if len(order) != len(g.nodes):
        raise PartitionError("dependency graph has a cycle")
    pos = [order.index(i) for i in sorted(spine)]
    if max(pos) - min(pos) + 1 != len(spine):
        raise PartitionError("conflict region is not contiguous")
    return order, sorted(spine, key=order.index)


def respects_dependencies(g: DepGraph, order: list[int]) -> bool:
    pos = {n: i for i, n in enumerate(order)}
    return all(pos[u] < pos[v] for u, v in g.edges)


def narrow_fragment(frag: Stmt, con: frozenset, lock: int, taken: set[str],
                    alias: Mapping[str, str] | None = None) -> Stmt:
    nodes = if_convert(flatten(frag), con, taken, alias)
    g = dependency_graph(nodes, con, alias)
    order, spine = narrowed_order(g)
    if not spine:
        return frag
    if not respects_dependencies(g, order):
        raise PartitionError("reordering broke a dependency")
    first, last = order.index(spine[0]), order.index(spine[-1])
    stmts = [nodes[i] for i in order]
    return seq(*stmts[:first], Lock(Const(lock)), *stmts[first:last + 1], Unlock(Const(lock)), *stmts[last + 1:])


def transform_narrowed_lock(node: Commute, lock: int, taken: set[str],
                            alias: Mapping[str, str] | None = None) -> Commute:
    con = conflict_set(node.left, node.right, alias)
    if not con:
        return node
    return Commute(node.guard, narrow_fragment(node.left, con, lock, taken, alias),
                   narrow_fragment(node.right, con, lock, taken, alias), node.alias)


# ---------------------------------------------------------------------------
# Whole programs
# ---------------------------------------------------------------------------


def all_names(s: Stmt) -> set[str]:
    out: set[str] = set()
    for st in walk(s):
        if isinstance(st, Decl):
            out.add(st.name)
        if isinstance(st, Havoc):
            out.update(st.names)
        for e in iter_exprs(st):
            out.update(x.name for x in subexprs(e) if isinstance(x, (Var, Old)))
    return out


def max_lock_id(s: Stmt) -> int:
    ids = [x.expr.value for x in walk(s) if isinstance(x, (Lock, Unlock)) and isinstance(x.expr, Const)]
    return max(ids, default=-1)


@dataclass
class Synthesis:
    program: Program
    sites: list[SiteReport]

    def to_json(self) -> dict:
        return {"sites": [r.to_json() for r in self.sites]}


def synthesize(program: Program, pattern: str = "auto") -> Synthesis:
    """Apply ``pattern`` to every commute site, innermost first."""
    if pattern not in PATTERNS:
        raise ValueError(f"unknown pattern '{pattern}'")
    spec = input_spec(program.domain, program.init)
    sites: list[CommuteSite] = check_stmt(program.body, spec.types)
    types = dict(spec.types)
    for st in walk(program.body):
        if isinstance(st, Decl):
            types.setdefault(st.name, st.type)
    alias = alias_classes(program.body, types)
    taken = all_names(program.body) | set(types)
    next_lock = [max(max_lock_id(program.body), 0) + 1]
    counter = [0]
    reports: list[SiteReport] = []

    def visit(s: Stmt) -> Stmt:
        if isinstance(s, Seq):
            return Seq(visit(s.first), visit(s.second))
        if isinstance(s, If):
            return If(s.cond, visit(s.then), visit(s.els))
        if isinstance(s, While):
            return While(s.cond, visit(s.body), s.summary)
        if isinstance(s, Scope):
            return Scope(visit(s.body))
        if not isinstance(s, Commute):
            return s
        idx = counter[0]
        counter[0] += 1
        node = Commute(s.guard, visit(s.left), visit(s.right), s.alias)
        out, rep = _transform_site(node, idx, sites[idx].env, pattern, taken, alias, next_lock)
        reports.append(rep)
        return out

    body = visit(program.body)
    reports.sort(key=lambda r: r.site)
    return Synthesis(Program(body, program.domain, program.init, dict(program.pragmas)), reports)


def _transform_site(node: Commute, idx: int, env: Mapping[str, Type], pattern: str, taken: set[str],
                    alias: Mapping[str, str], next_lock: list[int]) -> tuple[Stmt, SiteReport]:
    con = conflict_set(node.left, node.right, alias)
    rep = SiteReport(idx, "none", sorted(con))
    if not con:
        rep.notes.append("fragments do not conflict")
        return node, rep
    if node.guard is None or node.guard == Const(False):
        rep.notes.append("the guard is never true")
        return node, rep
    if pattern in ("auto", "snapshot"):
        try:
            out = transform_snapshot(node, env, taken, alias)
        except NotApplicable as exc:
            rep.notes.append(f"snapshot not applicable: {exc}")
            if pattern == "snapshot":
                return node, rep
        else:
            rep.pattern = "snapshot"
            return out, rep
    lock = next_lock[0]
    if pattern in ("auto", "narrow"):
        try:
            out = transform_narrowed_lock(node, lock, taken, alias)
        except PartitionError as exc:
            log.warning("site %d: narrowed lock failed (%s); using the naive lock", idx, exc)
            rep.notes.append(f"narrowed lock failed: {exc}")
        else:
            next_lock[0] += 1
            rep.pattern, rep.locks = "narrow", [lock]
            return out, rep
    next_lock[0] += 1
    rep.pattern, rep.locks = "naive", [lock]
    return transform_naive_lock(node, lock, alias), rep


__all__ = [
    "AccessSets",
    "DepGraph",
    "NotApplicable",
    "PATTERNS",
    "PartitionError",
    "SiteReport",
    "Synthesis",
    "access_sets",
    "alias_classes",
    "conflict_set",
    "dependency_graph",
    "if_convert",
    "lock_span",
    "narrow_fragment",
    "narrowed_order",
    "raw_access",
    "respects_dependencies",
    "synthesize",
    "transform_naive_lock",
    "transform_narrowed_lock",
    "transform_snapshot",
]
