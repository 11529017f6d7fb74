from __future__ import annotations

import dataclasses

import pytest
from hypothesis import given, settings

from commutekit import corpus
from commutekit.explorer import bigstep
from commutekit.lang import (
    Assign,
    Binop,
    Call,
    Commute,
    Const,
    Decl,
    Deref,
    Field,
    Havoc,
    If,
    Index,
    Lock,
    NewArray,
    NewHashtable,
    Pop,
    Push,
    RuntimeFault,
    Scope,
    Seq,
    Skip,
    Ternary,
    Unlock,
    Unop,
    Var,
    While,
    parse,
)
from commutekit.lang.ast import Assume
from commutekit.lang.state import canonicalize
from commutekit.stepper import (
    AlreadyValue,
    Decomposition,
    Stuck,
    decompose,
    plug,
    reduce_redex,
    run_seq,
    step_nd,
    step_seq,
)

from conftest import load_prog
from strategies import programs

# -- an independent redex oracle --------------------------------------------------
#
# Enumerate every subterm position and keep those that (a) have the shape of a
# redex and (b) sit in a hole of the evaluation-context grammar.  Exactly one
# position may qualify, and it must be the one decompose() returns.


def _val(e) -> bool:
    return isinstance(e, Const)


def _resolved_lval(lv) -> bool:
    return isinstance(lv, Var) or (isinstance(lv, Index) and _val(lv.base) and _val(lv.index))


def redex_shaped(t) -> bool:
    if isinstance(t, Seq):
        return isinstance(t.first, Skip)
    if isinstance(t, (Var, NewHashtable, While, Havoc, Scope, Push, Pop)):
        return True
    if isinstance(t, Binop):
        return _val(t.left) and _val(t.right)
    if isinstance(t, Index):
        return _val(t.base) and _val(t.index)
    if isinstance(t, (Unop, Deref, Field, Lock, Unlock, Assume)):
        return _val(t.expr)
    if isinstance(t, NewArray):
        return _val(t.length)
    if isinstance(t, Ternary):
        return _val(t.cond)
    if isinstance(t, Call):
        return all(map(_val, t.args))
    if isinstance(t, Assign):
        return _resolved_lval(t.lval) and _val(t.expr)
    if isinstance(t, Decl):
        return _val(t.expr)
    if isinstance(t, If):
        return _val(t.cond)
    if isinstance(t, Commute):
        return t.guard is None or _val(t.guard)
    return False


def hole_ok(parent, field: str, idx: int | None) -> bool:
    """May a context hole sit at ``parent.field[idx]``?"""
    p = parent
    allowed = {
        Seq: field == "first",
        Decl: field == "expr",
        If: field == "cond",
        Commute: field == "guard",
        Lock: field == "expr",
        Unlock: field == "expr",
        Assume: field == "expr",
        Unop: field == "expr",
        Deref: field == "expr",
        Field: field == "expr",
        NewArray: field == "length",
        Ternary: field == "cond",
    }
    if type(p) in allowed:
        return allowed[type(p)]
    if isinstance(p, Binop):
        return field == "left" or (field == "right" and _val(p.left))
    if isinstance(p, Index):
        return field == "base" or (field == "index" and _val(p.base))
    if isinstance(p, Call):
        return field == "args" and all(map(_val, p.args[:idx]))
    if isinstance(p, Assign):
        return field == "expr" and _resolved_lval(p.lval)
    return False


def subterms(t, path=()):
    yield path, t
    if not dataclasses.is_dataclass(t):
        return
    for f in dataclasses.fields(t):
        v = getattr(t, f.name)
        if isinstance(v, tuple):
            for i, c in enumerate(v):
                if dataclasses.is_dataclass(c):
                    yield from subterms(c, path + ((t, f.name, i),))
        elif dataclasses.is_dataclass(v):
            yield from subterms(v, path + ((t, f.name, None),))


def oracle_redexes(term):
    out = []
    for path, t in subterms(term):
        if not redex_shaped(t):
            continue
        ok = True
        for k, (parent, field, idx) in enumerate(path):
            if isinstance(parent, Assign) and field == "lval":
                # the next step must be into the Index target's base or index
                nxt = path[k + 1] if k + 1 < len(path) else None
                if nxt is None:
                    ok = False  # the target itself is never a hole
                    break
                continue
            if isinstance(parent, Index) and k > 0 and path[k - 1][0].__class__ is Assign and path[k - 1][1] == "lval":
                ok = field == "base" or (field == "index" and _val(parent.base))
                if not ok:
                    break
                continue
            if not hole_ok(parent, field, idx):
                ok = False
                break
        if ok:
            out.append(t)
    return out


def configurations(term, state, limit=400):
    """Terms along the seq run, a cheap source of realistic intermediate programs."""
    for _ in range(limit):
        yield term, state
        s = step_seq(term, state)
        if s is None:
            return
        term, state = s.term, s.state


def check_uniqueness(term):
    d = decompose(term)
    found = oracle_redexes(term)
    if isinstance(d, AlreadyValue):
        assert found == []
        return
    assert isinstance(d, Decomposition)
    assert len(found) == 1, found
    assert found[0] is d.redex
    assert plug(d.ctx, d.redex) == term


@pytest.mark.parametrize("name", sorted(set(corpus.names()) - {"speedup"}))
def test_redex_uniqueness_on_corpus(name):
    prog, spec = load_prog(corpus.source(name))
    try:
        for term, _ in configurations(prog.body, spec.initial_state()):
            check_uniqueness(term)
    except RuntimeFault:
        pass


@settings(max_examples=25)
@given(programs())
def test_redex_uniqueness_random(src):
    prog, spec = load_prog(src)
    try:
        for term, _ in configurations(prog.body, spec.initial_state(), 200):
            check_uniqueness(term)
    except RuntimeFault:
        pass


# -- decomposition examples ----------------------------------------------------------


def test_threaded_first_redex_is_guard_read():
    prog = parse(corpus.source("threaded"))
    d = decompose(prog.body)
    assert d.kind == "VarRead" and d.redex == Var("x")
    hole = plug(d.ctx, Const(1))
    assert hole.first.guard == Binop(Const(1), "==", Const(1))


def test_skip_is_value():
    assert isinstance(decompose(Skip()), AlreadyValue)


def test_ill_typed_term_is_stuck():
    assert isinstance(decompose(Assign(Var("x"), Binop(Const(True), "+", Const(1)))), Stuck)


# -- reduction rows ------------------------------------------------------------------


def reduce_once(src, bindings):
    from commutekit.lang.domain import build_state

    d = decompose(parse(src).body)
    return d, reduce_redex(d, build_state(bindings))


def test_while_unrolls_to_if():
    d, rs = reduce_once("while (x > 0) { x = x - 1; }", {"x": 1})
    (r,) = rs
    w = d.redex
    assert r.term == If(w.cond, Seq(w.body, w), Skip())
    assert r.eff is None


def test_commute_false_sequences_fragments():
    d, rs = reduce_once("commute (false) { {x = 1;} {y = 2;} }", {"x": 0, "y": 0})
    (r,) = rs
    assert r.term == Seq(Scope(d.redex.left), Scope(d.redex.right))
    assert r.eff is None


def test_assign_const_writes_one_variable():
    d, rs = reduce_once("x = 2;", {"x": 1})
    (r,) = rs
    assert r.term == Skip()
    assert r.state.lookup("x") == 2
    assert r.eff == ("x", "2")


def test_division_by_zero():
    prog, spec = load_prog("// @domain x:int[0..1]\nx = 1 / x;")
    with pytest.raises(RuntimeFault, match="division by zero"):
        run_seq(prog.body, spec.initial_state())


# -- seq and nd ----------------------------------------------------------------------


def test_seq_threaded_final():
    prog, spec = load_prog(corpus.source("threaded"))
    final = run_seq(prog.body, spec.initial_state())
    assert canonicalize(final).bindings() == {"x": 3, "y": 1}


def test_seq_skip_done():
    prog, spec = load_prog("// @domain x:int[0..0]\nskip;")
    assert step_seq(prog.body, spec.initial_state()) is None


def test_seq_counter_hand_evaluation():
    prog, spec = load_prog("// @domain c:int{5}, x:int{1}, y:int{2}\ncommute(true){ {c = c - x;} {c = c + y;} }")
    assert run_seq(prog.body, spec.initial_state()).lookup("c") == 5 - 1 + 2


def test_nd_commute_true_has_both_orders():
    prog, spec = load_prog("// @domain x:int[0..0]\ncommute(true){ {x = 1;} {x = 2;} }")
    succ = step_nd(prog.body, spec.initial_state())
    c = prog.body
    assert {s.term for s in succ} == {Seq(Scope(c.left), Scope(c.right)), Seq(Scope(c.right), Scope(c.left))}


def test_nd_nested_final_set():
    prog, spec = load_prog(corpus.source("nested"))
    b = bigstep(prog.body, spec.initial_state(), "nd")
    assert b.complete
    assert {tuple(sorted(f.bindings().items())) for f in b.finals} == {(("x", 0), ("y", 0))}


def _diff_count(a, b) -> int:
    """Changed state elements between two states (frame-structure changes aside)."""
    n = 0
    if len(a.frames) == len(b.frames):
        for fa, fb in zip(a.frames, b.frames):
            for k in set(fa) | set(fb):
                n += fa.get(k, object()) != fb.get(k, object())
    n += sum(a.heap.get(k) != b.heap.get(k) for k in set(a.heap) | set(b.heap))
    n += len(a.locks ^ b.locks)
    return n


@settings(max_examples=25)
@given(programs())
def test_determinism_and_effect_bound(src):
    prog, spec = load_prog(src)
    try:
        for term, state in configurations(prog.body, spec.initial_state(), 200):
            if isinstance(term, Skip):
                break
            d = decompose(term)
            nd = step_nd(term, state)
            seq = step_seq(term, state)
            # seq successors are nd successors
            assert (seq.term, seq.state) in {(s.term, s.state) for s in nd}
            if d.kind != "CommuteTrue":
                assert len(nd) == 1
            for s in nd:
                assert _diff_count(state, s.state) <= 1
                # a write of an unchanged value still carries its effect label
                if s.eff is None and d.kind not in ("Push", "Pop", "ScopeEnter"):
                    assert _diff_count(state, s.state) == 0
    except RuntimeFault:
        pass
