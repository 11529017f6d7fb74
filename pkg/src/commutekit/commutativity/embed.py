"""Embedding of a commute site as a logical ADT and the SMT-LIB query.

Every context variable becomes one or more state components:

* ``int``/``bool``/``string`` scalars: one component of the matching sort;
* ``hashtable[K,V]`` ``t``: ``t.K`` (Array K Bool) key set, ``t.S`` Int size
  and ``t.M`` (Array K V) map;
* ``T[]`` ``a``: ``a.M`` (Array Int T) contents and ``a.L`` Int length.

Each fragment is translated by symbolic execution into a post-condition
over pre-state components ``v`` and post-state components ``v!new``.
Intermediate values are SSA symbols ``v!k`` bound in a let-chain; the
innermost conjunct relates every ``v!new`` to its last binding.  ``if``
translates both branches and merges them with ``ite``; ``havoc`` opens an
existential; ``assume`` and the run-time safety conditions (index bounds,
non-zero divisors) become implications under the path condition.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping

from ..lang.ast import (
    ArrayT,
    Assign,
    Assume,
    Binop,
    BoolT,
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
    Scope,
    Seq,
    Skip,
    Stmt,
    StringT,
    Ternary,
    Type,
    Unlock,
    Unop,
    Var,
    While,
    iter_exprs,
    subexprs,
    walk,
)
from ..lang.state import ArrayObj, TableObj
from ..lang.typecheck import CommuteSite
from .loopsum import LoopSummaryError, instrument_loop_summaries
from .sexp import SExp, num, pretty, render, string_lit, sym


class EmbedError(ValueError):
    """The site uses a construct outside the embeddable subset."""


def sort_of(ty: Type) -> str:
    if isinstance(ty, IntT):
        return "Int"
    if isinstance(ty, BoolT):
        return "Bool"
    if isinstance(ty, StringT):
        return "String"
    raise EmbedError(f"no SMT sort for type {ty}")


def default_term(ty: Type) -> SExp:
    if isinstance(ty, IntT):
        return "0"
    if isinstance(ty, BoolT):
        return "false"
    if isinstance(ty, StringT):
        return string_lit("")
    raise EmbedError(f"no default value for type {ty}")


def const_term(v) -> SExp:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, int):
        return num(v)
    if isinstance(v, str):
        return string_lit(v)
    raise EmbedError(f"constant {v!r} cannot be embedded")


# ---------------------------------------------------------------------------
# State components
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Component:
    name: str  # e.g. "x", "t.K"
    sort: str
    var: str  # program variable it belongs to
    role: str  # "val", "K", "S", "M", "L"


def components(name: str, ty: Type) -> list[Component]:
    if isinstance(ty, HashtableT):
        k, v = sort_of(ty.key), sort_of(ty.val)
        return [Component(f"{name}.K", f"(Array {k} Bool)", name, "K"),
                Component(f"{name}.S", "Int", name, "S"),
                Component(f"{name}.M", f"(Array {k} {v})", name, "M")]
    if isinstance(ty, ArrayT):
        return [Component(f"{name}.M", f"(Array Int {sort_of(ty.elem)})", name, "M"),
                Component(f"{name}.L", "Int", name, "L")]
    return [Component(name, sort_of(ty), name, "val")]


@dataclass
class LogicalAdt:
    """State components, the two methods' post-conditions, and equality."""

    types: dict[str, Type]  # program variable -> type
    state: list[Component]
    posts: tuple[SExp, SExp]  # over pre components and their "!new" copies
    literals: tuple[int, ...] = ()  # int literals of the site (for witness decoding)
    has_havoc: bool = False

    @property
    def pre(self) -> tuple[str, str]:
        # programs are total: both preconditions are true
        return ("true", "true")

    def method_spec(self, i: int) -> tuple[SExp, SExp]:
        return (self.pre[i], self.posts[i])


def new_name(c: Component) -> str:
    return f"{c.name}!new"


# ---------------------------------------------------------------------------
# Symbolic execution
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TableVal:
    K: SExp
    S: SExp
    M: SExp
    ty: HashtableT


@dataclass(frozen=True)
class ArrayVal:
    M: SExp
    L: SExp
    ty: ArrayT


@dataclass
class _Binder:
    kind: str  # "let" or "exists"
    name: str
    term: SExp  # bound term, or the sort for "exists"


@dataclass
class SymExec:
    """Translates one fragment; bindings and constraints accumulate in order."""

    types: Mapping[str, Type]
    binders: list[_Binder] = field(default_factory=list)
    facts: list[SExp] = field(default_factory=list)
    counters: dict[str, int] = field(default_factory=dict)
    local_types: dict[str, Type] = field(default_factory=dict)

    def fresh(self, base: str) -> str:
        k = self.counters.get(base, 0) + 1
        self.counters[base] = k
        return sym(f"{base}!{k}")

    def bind(self, base: str, term: SExp) -> SExp:
        if isinstance(term, str):
            return term  # atoms need no binding
        s = self.fresh(base)
        self.binders.append(_Binder("let", s, term))
        return s

    def require(self, pc: SExp, cond: SExp) -> None:
        self.facts.append(cond if pc == "true" else ["=>", pc, cond])

    # -- environment: list of frames, innermost first; values are terms or ADT vals
    @staticmethod
    def lookup(env: list, name: str):
        for f in env:
            if name in f:
                return f[name]
        raise EmbedError(f"unbound variable '{name}'")

    @staticmethod
    def update(env: list, name: str, v) -> None:
        for f in env:
            if name in f:
                f[name] = v
                return
        raise EmbedError(f"unbound variable '{name}'")

    def type_of(self, name: str) -> Type:
        if name in self.local_types:
            return self.local_types[name]
        return self.types[name]

    # -- expressions
    def expr(self, e: Expr, env: list, pc: SExp):
        if isinstance(e, Const):
            return const_term(e.value)
        if isinstance(e, Var):
            return self.lookup(env, e.name)
        if isinstance(e, Unop):
            a = self.expr(e.expr, env, pc)
            return ["not", a] if e.op == "!" else ["-", a]
        if isinstance(e, Binop) and e.op in ("&&", "||"):
            # strict: both operands are evaluated, as in the stepper
            a = self.expr(e.left, env, pc)
            b = self.expr(e.right, env, pc)
            return ["and" if e.op == "&&" else "or", a, b]
        if isinstance(e, Binop):
            a = self.expr(e.left, env, pc)
            b = self.expr(e.right, env, pc)
            if isinstance(a, (TableVal, ArrayVal)) or isinstance(b, (TableVal, ArrayVal)):
                raise EmbedError("reference comparison cannot be embedded")
            op = e.op
            if op in ("+", "-", "*", "<", "<=", ">", ">="):
                return [op, a, b]
            if op == "==":
                return ["=", a, b]
            if op == "!=":
                return ["not", ["=", a, b]]
            if op in ("/", "%"):
                self.require(pc, ["not", ["=", b, "0"]])
                a = self.bind("%t", a)
                b = self.bind("%t", b)
                q = ["ite", [">=", a, "0"], ["div", a, b], ["-", ["div", ["-", a], b]]]
                return q if op == "/" else ["-", a, ["*", b, q]]
            raise EmbedError(f"operator '{op}' cannot be embedded")
        if isinstance(e, Ternary):
            c = self.bind("%cond", self.expr(e.cond, env, pc))
            then_pc = c if pc == "true" else ["and", pc, c]
            else_pc = ["not", c] if pc == "true" else ["and", pc, ["not", c]]
            return ["ite", c, self.expr(e.then, env, then_pc), self.expr(e.els, env, else_pc)]
        if isinstance(e, Index):
            base = self.expr(e.base, env, pc)
            k = self.expr(e.index, env, pc)
            if isinstance(base, TableVal):
                return ["ite", ["select", base.K, k], ["select", base.M, k], default_term(base.ty.val)]
            if isinstance(base, ArrayVal):
                self.require(pc, ["and", ["<=", "0", k], ["<", k, base.L]])
                return ["select", base.M, k]
            raise EmbedError("indexing a non-container")
        if isinstance(e, Call):
            if e.fname == "busy":
                return "0"
            args = [self.expr(a, env, pc) for a in e.args]
            if e.fname == "abs":
                a = self.bind("%t", args[0])
                return ["ite", [">=", a, "0"], a, ["-", a]]
            if e.fname in ("min", "max"):
                a, b = (self.bind("%t", x) for x in args)
                return ["ite", ["<=" if e.fname == "min" else ">=", a, b], a, b]
            if e.fname == "ht_mem" and isinstance(args[0], TableVal):
                return ["select", args[0].K, args[1]]
            if e.fname == "ht_size" and isinstance(args[0], TableVal):
                return args[0].S
            if e.fname == "len" and isinstance(args[0], ArrayVal):
                return args[0].L
            raise EmbedError(f"call '{e.fname}' cannot be embedded")
        if isinstance(e, Field):
            base = self.expr(e.expr, env, pc)
            if e.name == "size" and isinstance(base, TableVal):
                return base.S
            if e.name == "length" and isinstance(base, ArrayVal):
                return base.L
            raise EmbedError(f"field '{e.name}' cannot be embedded")
        if isinstance(e, (NewArray, NewHashtable)):
            raise EmbedError("allocation inside a fragment cannot be embedded")
        if isinstance(e, Deref):
            return self.expr(e.expr, env, pc)
        if isinstance(e, Old):
            raise EmbedError("old(...) outside a loop summary")
        raise EmbedError(f"expression {type(e).__name__} cannot be embedded")

    # -- statements
    def stmt(self, s: Stmt, env: list, pc: SExp) -> None:
        if isinstance(s, Skip):
            return
        if isinstance(s, Seq):
            self.stmt(s.first, env, pc)
            self.stmt(s.second, env, pc)
            return
        if isinstance(s, Scope):
            env.insert(0, {})
            self.stmt(s.body, env, pc)
            env.pop(0)
            return
        if isinstance(s, Push):
            env.insert(0, {})
            return
        if isinstance(s, Pop):
            env.pop(0)
            return
        if isinstance(s, Decl):
            if not isinstance(s.type, (IntT, BoolT, StringT)):
                raise EmbedError(f"declaration of container variable '{s.name}' cannot be embedded")
            self.local_types[s.name] = s.type
            env[0][s.name] = self.bind(s.name, self.expr(s.expr, env, pc))
            return
        if isinstance(s, Assign):
            self.assign(s, env, pc)
            return
        if isinstance(s, If):
            self.branch(s, env, pc)
            return
        if isinstance(s, Commute):
            # nested commute blocks are sequenced
            self.stmt(Seq(Scope(s.left), Scope(s.right)), env, pc)
            return
        if isinstance(s, (Lock, Unlock)):
            return
        if isinstance(s, Havoc):
            for n in s.names:
                cur = self.lookup(env, n)
                if isinstance(cur, (TableVal, ArrayVal)):
                    raise EmbedError(f"havoc of container '{n}' cannot be embedded")
                v = self.fresh(n)
                self.binders.append(_Binder("exists", v, sort_of(self.type_of(n))))
                self.update(env, n, v)
            return
        if isinstance(s, Assume):
            self.require(pc, self.expr(s.expr, env, pc))
            return
        if isinstance(s, While):
            raise EmbedError("loop without a summary cannot be embedded")
        raise EmbedError(f"statement {type(s).__name__} cannot be embedded")

    def assign(self, s: Assign, env: list, pc: SExp) -> None:
        lv = s.lval
        if isinstance(lv, Var):
            cur = self.lookup(env, lv.name)
            if isinstance(cur, (TableVal, ArrayVal)):
                raise EmbedError(f"reference assignment to '{lv.name}' cannot be embedded")
            self.update(env, lv.name, self.bind(lv.name, self.expr(s.expr, env, pc)))
            return
        if not isinstance(lv, Index) or not isinstance(lv.base, Var):
            raise EmbedError("only x[k] = e writes can be embedded")
        name = lv.base.name
        base = self.lookup(env, name)
        k = self.bind("%k", self.expr(lv.index, env, pc))
        v = self.expr(s.expr, env, pc)
        if isinstance(base, TableVal):
            new = TableVal(
                self.bind(f"{name}.K", ["store", base.K, k, "true"]),
                self.bind(f"{name}.S", ["ite", ["select", base.K, k], base.S, ["+", base.S, "1"]]),
                self.bind(f"{name}.M", ["store", base.M, k, v]),
                base.ty,
            )
        elif isinstance(base, ArrayVal):
            self.require(pc, ["and", ["<=", "0", k], ["<", k, base.L]])
            new = ArrayVal(self.bind(f"{name}.M", ["store", base.M, k, v]), base.L, base.ty)
        else:
            raise EmbedError(f"'{name}' is not a container")
        self.update(env, name, new)

    def branch(self, s: If, env: list, pc: SExp) -> None:
        c = self.bind("%cond", self.expr(s.cond, env, pc))
        outs = []
        for cond, body in ((c, s.then), (["not", c], s.els)):
            sub = [dict(f) for f in env]
            bpc = cond if pc == "true" else ["and", pc, cond]
            self.stmt(body, sub, bpc)
            outs.append(sub)
        then_env, else_env = outs
        for i, f in enumerate(env):
            for name in f:
                a, b = then_env[i][name], else_env[i][name]
                if a == b:
                    f[name] = a
                elif isinstance(a, TableVal):
                    f[name] = TableVal(self._merge(f"{name}.K", c, a.K, b.K), self._merge(f"{name}.S", c, a.S, b.S),
                                       self._merge(f"{name}.M", c, a.M, b.M), a.ty)
                elif isinstance(a, ArrayVal):
                    f[name] = ArrayVal(self._merge(f"{name}.M", c, a.M, b.M), self._merge(f"{name}.L", c, a.L, b.L),
                                       a.ty)
                else:
                    f[name] = self.bind(name, ["ite", c, a, b])

    def _merge(self, base: str, c: SExp, a: SExp, b: SExp) -> SExp:
        return a if a == b else self.bind(base, ["ite", c, a, b])

    def close(self, inner: SExp) -> SExp:
        """Wrap ``inner`` in the accumulated lets and existentials."""
        out = inner
        for b in reversed(self.binders):
            if b.kind == "let":
                out = ["let", [[b.name, b.term]], out]
            else:
                out = ["exists", [[b.name, b.term]], out]
        return out


def initial_env(types: Mapping[str, Type], prefix: str = "", suffix: str = "") -> dict:
    """Values of all context variables as (renamed) component symbols."""
    env: dict = {}
    for n in sorted(types):
        ty = types[n]
        comps = {c.role: sym(prefix + c.name + suffix) for c in components(n, ty)}
        if isinstance(ty, HashtableT):
            env[n] = TableVal(comps["K"], comps["S"], comps["M"], ty)
        elif isinstance(ty, ArrayT):
            env[n] = ArrayVal(comps["M"], comps["L"], ty)
        else:
            env[n] = comps["val"]
    return env


def _leaves(v) -> list[tuple[str, SExp]]:
    if isinstance(v, TableVal):
        return [("K", v.K), ("S", v.S), ("M", v.M)]
    if isinstance(v, ArrayVal):
        return [("M", v.M), ("L", v.L)]
    return [("val", v)]


def post_formula(frag: Stmt, types: Mapping[str, Type]) -> SExp:
    """specOf: relates pre components to ``!new`` components after ``frag``."""
    ex = SymExec(types)
    start = initial_env(types)
    env: dict = {}
    for n in sorted(types):
        roles = {}
        for (role, term), c in zip(_leaves(start[n]), components(n, types[n])):
            v0 = sym(f"{c.name}!0")
            ex.binders.append(_Binder("let", v0, term))
            roles[role] = v0
        env[n] = _rebuild(start[n], roles)
    frames = [{}, env]
    ex.stmt(Scope(frag), frames, "true")
    eqs = []
    for n in sorted(types):
        for (role, term), c in zip(_leaves(frames[1][n]), components(n, types[n])):
            eqs.append(["=", sym(new_name(c)), term])
    conj = ex.facts + eqs
    return ex.close(conj[0] if len(conj) == 1 else ["and", *conj] if conj else "true")


def _rebuild(v, roles: dict):
    if isinstance(v, TableVal):
        return TableVal(roles["K"], roles["S"], roles["M"], v.ty)
    if isinstance(v, ArrayVal):
        return ArrayVal(roles["M"], roles["L"], v.ty)
    return roles["val"]


# ---------------------------------------------------------------------------
# Sites
# ---------------------------------------------------------------------------


def _int_literals(stmts: Iterable[Stmt], exprs: Iterable[Expr] = ()) -> tuple[int, ...]:
    out: set[int] = set()
    roots = [e for s in stmts for st in walk(s) for e in iter_exprs(st)] + [e for e in exprs if e is not None]
    for r in roots:
        for x in subexprs(r):
            if isinstance(x, Const) and isinstance(x.value, int) and not isinstance(x.value, bool):
                out.add(x.value)
    return tuple(sorted(out))


def prepare_fragments(site: CommuteSite) -> tuple[Stmt, Stmt]:
    """Fragments with annotated loops replaced by their summaries."""
    try:
        return (instrument_loop_summaries(site.left, site.env),
                instrument_loop_summaries(site.right, site.env))
    except LoopSummaryError as exc:
        raise EmbedError(str(exc)) from exc


def embed(site: CommuteSite) -> LogicalAdt:
    """The logical ADT of ``site``: one method per fragment."""
    left, right = prepare_fragments(site)
    types = {n: t for n, t in site.env.items() if _embeddable_type(t)}
    state = [c for n in sorted(types) for c in components(n, types[n])]
    posts = (post_formula(left, types), post_formula(right, types))
    havoc = any(isinstance(x, Havoc) for f in (left, right) for x in walk(f))
    return LogicalAdt(types, state, posts, _int_literals([site.left, site.right], [site.guard]), havoc)


def _embeddable_type(t: Type) -> bool:
    try:
        components("_", t)
    except EmbedError:
        return False
    return True


# ---------------------------------------------------------------------------
# Query
# ---------------------------------------------------------------------------

COPIES = ("s0", "a1", "a2", "b1", "b2")


def copy_name(c: Component, copy: str) -> str:
    return sym(f"{c.name}@{copy}")


def condition_term(phi: Expr | None, adt: LogicalAdt, copy: str = "s0") -> SExp:
    """``phi`` over the components of state copy ``copy``."""
    if phi is None:
        return "false"
    ex = SymExec(adt.types)
    env = initial_env(adt.types, suffix=f"@{copy}")
    t = ex.expr(phi, [env], "true")
    if ex.facts:
        # partial operations in the condition: it holds only where defined
        t = ["and", *ex.facts, t]
    return ex.close(t)


def _eq_def(adt: LogicalAdt) -> SExp:
    params = [[sym(c.name + "@x"), c.sort] for c in adt.state] + [[sym(c.name + "@y"), c.sort] for c in adt.state]
    body = ["and", *(["=", sym(c.name + "@x"), sym(c.name + "@y")] for c in adt.state)] if adt.state else "true"
    return ["define-fun", "eq", params, "Bool", body]


def _post_def(adt: LogicalAdt, i: int) -> SExp:
    params = [[sym(c.name), c.sort] for c in adt.state] + [[sym(new_name(c)), c.sort] for c in adt.state]
    return ["define-fun", f"post{i}", params, "Bool", adt.posts[i]]


def _app(f: str, *copies: str, adt: LogicalAdt) -> SExp:
    args = [copy_name(c, cp) for cp in copies for c in adt.state]
    return [f, *args] if args else f


@dataclass
class Query:
    text: str
    probes: list[tuple[tuple, SExp]]  # (tag, term) requested with get-value


def probe_terms(adt: LogicalAdt, keys: Iterable[int] = (), max_len: int = 6) -> list[tuple[tuple, SExp]]:
    """Terms whose model values reconstruct the s0 state.

    Tags: ``(role, var)`` for scalars, sizes and lengths, ``(role, var, key)``
    for key-set and map probes where ``key`` is ``("lit", v)`` or
    ``("var", name)``, and ``("A", var, i)`` for array cells.
    """
    out: list[tuple[tuple, SExp]] = []
    int_scalars = [c for c in adt.state if c.role == "val" and c.sort == "Int"]
    for c in adt.state:
        if c.role in ("val", "S", "L"):
            out.append(((c.role, c.var), copy_name(c, "s0")))
    int_keys = [(("lit", k), num(k)) for k in sorted(set(keys))]
    int_keys += [(("var", c.var), copy_name(c, "s0")) for c in int_scalars]
    for c in adt.state:
        ty = adt.types[c.var]
        if isinstance(ty, HashtableT) and c.role in ("K", "M"):
            if isinstance(ty.key, IntT):
                terms = int_keys
            elif isinstance(ty.key, BoolT):
                terms = [(("lit", True), "true"), (("lit", False), "false")]
            else:
                terms = []
            for key, t in terms:
                out.append(((c.role, c.var, key), ["select", copy_name(c, "s0"), t]))
        if isinstance(ty, ArrayT) and c.role == "M":
            for i in range(max_len):
                out.append((("A", c.var, i), ["select", copy_name(c, "s0"), str(i)]))
    return out


def emit_commutativity_query(adt: LogicalAdt, phi: Expr | None, *, negate_eq: bool = True,
                             assume_not_phi: bool = False, keys: Iterable[int] = ()) -> Query:
    """SMT-LIB text whose ``unsat`` certifies that ``phi`` is sufficient.

    With ``negate_eq=False`` and ``assume_not_phi=True`` the query instead
    asks for a state outside ``phi`` where the orders agree.
    """
    lines: list[str] = ["(set-logic ALL)", "(set-option :produce-models true)"]
    lines.append(pretty(_post_def(adt, 0)))
    lines.append(pretty(_post_def(adt, 1)))
    lines.append(pretty(_eq_def(adt)))
    for cp in COPIES:
        for c in adt.state:
            lines.append(render(["declare-const", copy_name(c, cp), c.sort]))
    for cp in COPIES:
        for c in adt.state:
            if c.role in ("S", "L"):
                lines.append(render(["assert", [">=", copy_name(c, cp), "0"]]))
    cond = condition_term(phi, adt)
    lines.append(pretty(["assert", ["not", cond] if assume_not_phi else cond]))
    lines.append(render(["assert", _app("post0", "s0", "a1", adt=adt)]))
    lines.append(render(["assert", _app("post1", "a1", "a2", adt=adt)]))
    lines.append(render(["assert", _app("post1", "s0", "b1", adt=adt)]))
    lines.append(render(["assert", _app("post0", "b1", "b2", adt=adt)]))
    same = _app("eq", "a2", "b2", adt=adt)
    lines.append(render(["assert", ["not", same] if negate_eq else same]))
    lines.append("(check-sat)")
    probes = probe_terms(adt, set(adt.literals) | set(range(-2, 3)) | set(keys))
    if probes:
        lines.append(render(["get-value", [t for _, t in probes]]))
    lines.append("(get-model)")
    return Query("\n".join(lines) + "\n", probes)


# ---------------------------------------------------------------------------
# Witness decoding
# ---------------------------------------------------------------------------


@dataclass
class DecodedState:
    assignment: dict
    faithful: bool  # False when the model is not a concrete program state
    notes: list[str] = field(default_factory=list)


def decode_state(adt: LogicalAdt, probes: list[tuple[tuple, SExp]], values: list) -> DecodedState:
    """Rebuild the s0 assignment from ``get-value`` results (in probe order)."""
    got = {tag: v for (tag, _), v in zip(probes, values)}
    out: dict = {}
    notes: list[str] = []
    faithful = True
    for n in sorted(adt.types):
        ty = adt.types[n]
        if isinstance(ty, HashtableT):
            keys = {}
            for tag, v in got.items():
                if tag[0] == "K" and tag[1] == n and v is True:
                    kind, ref = tag[2]
                    k = ref if kind == "lit" else got.get(("val", ref))
                    keys[k] = got.get(("M", n, tag[2]))
            size = got.get(("S", n))
            if size != len(keys):
                faithful = False
                notes.append(f"size of '{n}' is {size} but {len(keys)} keys were found")
            out[n] = TableObj.of(keys, ty.key, ty.val)
        elif isinstance(ty, ArrayT):
            length = got.get(("L", n), 0)
            elems = [got.get(("A", n, i)) for i in range(length)]
            if any(e is None for e in elems):
                faithful = False
                notes.append(f"array '{n}' of length {length} exceeds the probed prefix")
                elems = [e for e in elems if e is not None]
            out[n] = ArrayObj(tuple(elems), ty.elem)
        else:
            out[n] = got.get(("val", n))
    return DecodedState(out, faithful, notes)


__all__ = [
    "ArrayVal",
    "COPIES",
    "Component",
    "DecodedState",
    "EmbedError",
    "LogicalAdt",
    "Query",
    "SymExec",
    "TableVal",
    "components",
    "condition_term",
    "decode_state",
    "embed",
    "emit_commutativity_query",
    "post_formula",
    "prepare_fragments",
    "probe_terms",
]
