from __future__ import annotations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from commutekit import corpus
from commutekit.commutativity import program_sites, verify_condition
from commutekit.explorer import bigstep
from commutekit.locksynth import synthesize
from commutekit.par import TransitionLabel, make_scheduler, run_recorded
from commutekit.serializability import (
    MalformedLabel,
    is_adapted_serial,
    is_program_scoped_serializable,
    is_scoped_serial,
    is_scoped_serializable_execution,
    serial_bigstep,
    witness_execution,
)

from conftest import EXPLORABLE, load_prog
from strategies import programs


def lab(path: str, rule: str = "AssignConst", eff=None) -> TransitionLabel:
    return TransitionLabel(tuple(path.split()) if path else (), eff, rule)


# -- brute-force oracles over step triples ------------------------------------------


def _flip(tok):
    return ("R" if tok[0] == "L" else "L") + tok[1:]


def oracle_scoped(labels) -> bool:
    steps = [la.fr for la in labels if la.rule not in ("Fork", "Join")]
    n = len(steps)
    for i in range(n):
        for k in range(i + 2, n):
            for d in range(1, min(len(steps[i]), len(steps[k])) + 1):
                g = steps[i][:d]
                if steps[k][:d] != g:
                    continue
                rival = g[:-1] + (_flip(g[-1]),)
                if any(steps[j][:d] == rival for j in range(i + 1, k)):
                    return False
    return True


def _related(p, q):
    m = min(len(p), len(q))
    return p[:m] == q[:m]


def oracle_adapted(labels) -> bool:
    steps = [la.fr for la in labels if la.rule not in ("Fork", "Join") and la.fr]
    n = len(steps)
    for i in range(n):
        for k in range(i + 2, n):
            if steps[i] != steps[k]:
                continue
            if any(not _related(steps[j], steps[i]) for j in range(i + 1, k)):
                return False
    return True


token = st.sampled_from(["L0", "R0", "L1", "R1"])
label_st = st.builds(
    lambda fr, rule: TransitionLabel(tuple(fr), None, rule),
    st.lists(token, max_size=3),
    st.sampled_from(["AssignConst", "VarRead", "Fork", "Join"]),
)


@settings(max_examples=300)
@given(st.lists(label_st, max_size=10))
def test_scoped_matches_oracle(labels):
    assert bool(is_scoped_serial(labels)) == oracle_scoped(labels)


@settings(max_examples=300)
@given(st.lists(label_st, max_size=10))
def test_adapted_matches_oracle(labels):
    assert bool(is_adapted_serial(labels)) == oracle_adapted(labels)


@settings(max_examples=200)
@given(st.lists(label_st, max_size=10), st.data())
def test_scoped_ignores_effect_payloads(labels, data):
    relabeled = [TransitionLabel(la.fr, data.draw(st.sampled_from([None, ("x", "1"), ("y", "7")])), la.rule)
                 for la in labels]
    assert bool(is_scoped_serial(labels)) == bool(is_scoped_serial(relabeled))


# -- execution-level examples ---------------------------------------------------------


def test_threaded_trace_is_scoped_serial():
    prog, spec = load_prog(corpus.source("threaded"))
    assert is_scoped_serial(run_recorded(prog.body, spec.initial_state()))


def test_interleaved_outer_fragment_is_not_scoped_serial():
    trace = [lab("L0 R0", eff=("x", "2")), lab("R0", eff=("y", "1")), lab("L0 L1", eff=("x", "0"))]
    v = is_scoped_serial(trace)
    assert not v
    assert v.steps == (0, 1, 2)
    assert set(v.groups) == {("L0",), ("R0",)}
    assert is_adapted_serial(trace)


def test_single_fragment_vacuous():
    assert is_scoped_serial([lab("L0"), lab("L0"), lab("")])
    assert is_adapted_serial([lab("L0"), lab("L0")])


def test_single_threaded_trace():
    assert is_adapted_serial([lab(""), lab(""), lab("")])


def test_malformed_label_rejected():
    with pytest.raises(MalformedLabel):
        is_scoped_serial([TransitionLabel(("X3",), None, "VarRead")])


@settings(max_examples=30)
@given(programs(), st.integers(0, 50))
def test_scoped_serial_implies_adapted(src, seed):
    prog, spec = load_prog(src)
    try:
        ex = run_recorded(prog.body, spec.initial_state(), make_scheduler(seed))
    except Exception:
        return
    if is_scoped_serial(ex):
        assert is_adapted_serial(ex)


# -- nested commute: the separating example --------------------------------------------


def test_nested_separates_the_two_notions():
    prog, spec = load_prog(corpus.source("nested"))
    st0 = spec.initial_state()
    bad = next(f for f in bigstep(prog.body, st0, "par").finals if f.bindings() == {"x": 0, "y": 1})
    ex = witness_execution(prog.body, st0, bad, "adapted")
    assert ex is not None and ex.complete
    assert is_adapted_serial(ex) and not is_scoped_serial(ex)
    assert is_scoped_serializable_execution(ex, prog.body, st0) is False
    assert witness_execution(prog.body, st0, bad, "scoped") is None


def test_nested_program_verdict():
    prog, spec = load_prog(corpus.source("nested"))
    v = is_program_scoped_serializable(prog.body, [spec.initial_state()])
    assert v.serializable is False
    assert v.bad_final.bindings() == {"x": 0, "y": 1}
    assert {f.bindings()["y"] for f in v.serial_finals} == {0}
    assert is_adapted_serial(v.counterexample) and not is_scoped_serial(v.counterexample)


def test_scoped_serial_execution_is_its_own_witness():
    prog, spec = load_prog(corpus.source("simple"))
    ex = run_recorded(prog.body, spec.initial_state())
    assert is_scoped_serial(ex)
    assert is_scoped_serializable_execution(ex, prog.body, spec.initial_state())


def test_straight_line_program_serializable():
    prog, spec = load_prog("// @domain x:int[0..2]\nx = x + 1; x = x * 2;")
    assert is_program_scoped_serializable(prog.body, spec.states()).serializable


def test_snapshot_transformed_simple_serializable():
    prog, spec = load_prog(corpus.source("simple"))
    out = synthesize(prog, "snapshot").program
    assert is_program_scoped_serializable(out.body, spec.states()).serializable


# -- extensional checks on the corpus ---------------------------------------------------


def _guards_valid(prog, spec) -> bool:
    return all(verify_condition(s, s.guard, spec, "oracle").valid for s in program_sites(prog, spec))


@pytest.mark.parametrize("name", EXPLORABLE)
def test_scoped_serial_finals_equal_nd_finals(name):
    prog, spec = load_prog(corpus.source(name))
    if not _guards_valid(prog, spec):
        pytest.skip("a guard is not a valid condition")
    for st0 in list(spec.states())[:6]:
        ser = serial_bigstep(prog.body, st0, "scoped")
        nd = bigstep(prog.body, st0, "nd")
        assert ser.complete and nd.complete
        assert ser.finals == nd.finals


@pytest.mark.parametrize("name", ["threaded", "counter"])
def test_seq_equals_par_for_serializable_programs(name):
    prog, spec = load_prog(corpus.source(name))
    body = synthesize(prog, "naive").program.body
    for st0 in spec.states():
        assert bigstep(body, st0, "seq").finals == bigstep(body, st0, "par").finals
