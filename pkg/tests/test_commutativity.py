from __future__ import annotations

import itertools

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from commutekit import corpus
from commutekit.commutativity import (
    commutes_at,
    embed,
    emit_commutativity_query,
    infer_condition,
    oracle_check_condition,
    program_sites,
    site_domains,
    site_vars,
    solver_check,
    verify_condition,
)
from commutekit.commutativity.infer import learn, pool_atoms
from commutekit.commutativity.loopsum import instrument_loop_summaries
from commutekit.commutativity.oracle import holds
from commutekit.lang import Scope, Seq, parse_expr
from commutekit.lang.domain import build_state
from commutekit.lang.state import RuntimeFault, canonicalize
from commutekit.stepper import run_seq

from conftest import EXPLORABLE, load_prog
from strategies import programs


def site_of(src: str, index: int = 0):
    prog, spec = load_prog(src)
    return program_sites(prog, spec)[index], spec


def corpus_site(name: str, index: int = 0):
    return site_of(corpus.source(name), index)


def E(text: str):
    return parse_expr(text)


# -- an independent two-order oracle -------------------------------------------------
#
# Runs both orders through the small-step stepper (the oracle under test uses
# the direct interpreter) over the full product of the site's domains.


def stepper_commutes(site, env) -> bool | None:
    st0 = build_state(env)
    try:
        a = run_seq(Seq(Scope(site.left), Scope(site.right)), st0)
        b = run_seq(Seq(Scope(site.right), Scope(site.left)), st0)
    except RuntimeFault:
        return None
    return canonicalize(a) == canonicalize(b)


def stepper_valid(site, spec, phi) -> bool:
    doms = site_domains(site, spec, site_vars(site, [phi]))
    names = sorted(doms)
    for combo in itertools.product(*(doms[n].values for n in names)):
        env = dict(zip(names, combo))
        c = stepper_commutes(site, env)
        if c is None:
            continue
        try:
            if holds(phi, env) and not c:
                return False
        except RuntimeFault:
            continue
    return True


# -- oracle examples -------------------------------------------------------------------


def test_counter_true_valid():
    site, spec = corpus_site("counter")
    v = oracle_check_condition(site, E("true"), spec)
    assert v.valid and v.complete and v.checked == 27


def test_calc_guard_valid():
    site, spec = corpus_site("calc")
    assert oracle_check_condition(site, E("c > 0"), spec).valid


def test_zero_then_double_valid():
    site, spec = site_of("// @domain x:int[-2..2]\ncommute (true) { {x = 0;} {x = x * 2;} }")
    assert oracle_check_condition(site, E("true"), spec).valid


def test_one_then_double_invalid_at_one():
    site, spec = site_of("// @domain x:int[1..1]\ncommute (true) { {x = 1;} {x = x * 2;} }")
    v = oracle_check_condition(site, E("true"), spec)
    assert not v.valid and v.witness == {"x": 1}


def test_false_is_trivially_valid():
    site, spec = corpus_site("simple")
    v = oracle_check_condition(site, E("false"), spec)
    assert v.valid and v.checked == 0


def test_unknown_guard_behaves_as_false():
    site, spec = corpus_site("simple")
    assert oracle_check_condition(site, None, spec).valid


def test_commutes_at_reports_difference():
    site, _ = site_of("// @domain x:int[0..2]\ncommute (true) { {x = 1;} {x = x * 2;} }")
    assert commutes_at(site.left, site.right, {"x": 0}).commutes is False
    assert commutes_at(site.left, site.right, {"x": 2}).commutes is False


@settings(max_examples=40)
@given(programs(depth=1), st.sampled_from(["true", "x == 0", "y != z", "x + y > 0"]))
def test_oracle_matches_stepper_oracle(src, phi_text):
    site, spec = site_of(src)
    phi = E(phi_text)
    assert oracle_check_condition(site, phi, spec).valid == stepper_valid(site, spec, phi)


@settings(max_examples=30)
@given(programs(depth=1))
def test_stronger_condition_stays_valid(src):
    site, spec = site_of(src)
    weak, strong = E("x == 0"), E("x == 0 && y == 0")
    if oracle_check_condition(site, weak, spec).valid:
        assert oracle_check_condition(site, strong, spec).valid


# -- embedding --------------------------------------------------------------------------


def test_embedding_is_deterministic():
    site, _ = corpus_site("dict")
    q1 = emit_commutativity_query(embed(site), E("res != input")).text
    q2 = emit_commutativity_query(embed(site), E("res != input")).text
    assert q1 == q2


def test_embedding_structure_of_worked_example():
    site, _ = corpus_site("simple")
    text = emit_commutativity_query(embed(site), E("c > a")).text
    assert "(let " in text and "(ite " in text
    assert text.count("(define-fun\n  post") == 2 and "(check-sat)" in text


def test_table_components():
    site, _ = corpus_site("dict")
    roles = {c.role for c in embed(site).state if c.var == "stats"}
    assert roles == {"K", "S", "M"}


def test_loop_summary_introduces_existentials():
    site, _ = corpus_site("loop-simple")
    text = emit_commutativity_query(embed(site), E("true")).text
    assert "exists" in text


def test_loop_summary_instrumentation_removes_loops():
    site, _ = corpus_site("loop-simple")
    from commutekit.commutativity.loopsum import has_raw_loops

    assert has_raw_loops(site.left)
    assert not has_raw_loops(instrument_loop_summaries(site.left, site.env))


# -- solver queries ----------------------------------------------------------------------


def test_counter_query_unsat(needs_solver):
    site, _ = corpus_site("counter")
    assert solver_check(site, E("true")).status == "valid"


def test_one_then_double_query_sat_with_witness(needs_solver):
    site, _ = site_of("// @domain x:int[0..2]\ncommute (true) { {x = 1;} {x = x * 2;} }")
    v = solver_check(site, E("true"))
    assert v.status == "invalid" and v.confirmed and v.faithful
    assert commutes_at(site.left, site.right, v.witness).commutes is False


def test_false_condition_unsat(needs_solver):
    site, _ = corpus_site("simple")
    assert solver_check(site, E("false")).status == "valid"


def test_solver_checks_completeness(needs_solver):
    site, _ = corpus_site("counter")
    assert solver_check(site, E("true")).complete is True
    # over unbounded ints a put of the value already stored commutes with the get
    site, _ = corpus_site("dict")
    assert solver_check(site, E("res != input")).complete is False


# -- verification -------------------------------------------------------------------------


def test_simple_guard_verifies():
    site, spec = corpus_site("simple")
    v = verify_condition(site, E("c > a"), spec)
    assert v.valid and not v.disagreement


def test_simple_true_refuted_with_witness():
    site, spec = corpus_site("simple")
    v = verify_condition(site, E("true"), spec)
    assert v.status == "invalid"
    assert commutes_at(site.left, site.right, v.witness).commutes is False


def test_dict_guard_verifies():
    site, spec = corpus_site("dict")
    assert verify_condition(site, E("res != input"), spec).valid


def test_loop_simple_summary_verifies(needs_solver):
    site, spec = corpus_site("loop-simple")
    v = verify_condition(site, E("true"), spec)
    assert v.valid and v.proved and v.oracle.valid


def test_oracle_mode_never_calls_solver():
    site, spec = corpus_site("dict")
    v = verify_condition(site, E("res != input"), spec, "oracle")
    assert v.solver is None and v.valid and not v.proved


def test_unknown_mode_rejected():
    site, spec = corpus_site("dict")
    with pytest.raises(ValueError):
        verify_condition(site, E("true"), spec, "guess")


CASES = [(n, i) for n in EXPLORABLE for i in range(len(program_sites(*load_prog(corpus.source(n)))))]


@pytest.mark.solver
@pytest.mark.parametrize("name,index", CASES)
def test_solver_never_contradicts_oracle(name, index, needs_solver):
    site, spec = corpus_site(name, index)
    for phi in (site.guard, E("true"), E("false")):
        v = verify_condition(site, phi, spec)
        assert not v.disagreement, v.notes
        if v.solver.status == "invalid" and v.solver.confirmed:
            assert not v.valid


# -- inference -----------------------------------------------------------------------------


def test_learn_separates_rows():
    rows = [((True, False), True), ((False, True), False), ((True, True), True), ((False, False), False)]
    cubes = learn(rows, 2)
    for feats, ok in rows:
        assert any(all(feats[a] == pol for a, pol in c) for c in cubes) == ok


def test_infer_counter_true():
    site, spec = corpus_site("counter")
    inf = infer_condition(site, spec)
    assert inf.text == "true" and inf.sound and inf.weakest_on_domain


def test_infer_dict_implies_key_disjointness():
    site, spec = corpus_site("dict")
    inf = infer_condition(site, spec)
    assert inf.sound
    for env in ({"res": 0, "input": 0}, {"res": 1, "input": 1}):
        assert not holds(inf.condition, env)


def test_infer_never_commuting_site_is_false():
    site, spec = site_of("// @domain x:int[0..2]\ncommute (true) { {x = 1;} {x = 2;} }")
    inf = infer_condition(site, spec)
    assert inf.text == "false" and inf.sound


@pytest.mark.parametrize("name", ["simple", "commute1"])
def test_infer_weakest_over_pool(name):
    site, spec = corpus_site(name)
    inf = infer_condition(site, spec)
    assert inf.sound and inf.weakest_on_domain


def test_pool_contains_key_disequality():
    site, _ = corpus_site("dict")
    atoms = set(pool_atoms(site))
    assert E("input == res") in atoms


@pytest.mark.slow
@pytest.mark.parametrize("name,index", CASES)
def test_inferred_conditions_are_sound(name, index):
    site, spec = corpus_site(name, index)
    inf = infer_condition(site, spec)
    assert inf.sound
    assert stepper_valid(site, spec, inf.condition)
