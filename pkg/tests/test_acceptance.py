"""End-to-end acceptance criteria, one test each, each printing a pass/fail line."""

from __future__ import annotations

import os
import subprocess
import sys
import time
import warnings

import pytest

from commutekit import corpus
from commutekit.commutativity import (
    commutes_at,
    infer_condition,
    oracle_check_condition,
    pool_atoms,
    program_sites,
    site_samples,
    solver_available,
    verify_condition,
)
from commutekit.commutativity.oracle import holds
from commutekit.explorer import bigstep, check_inclusion
from commutekit.lang import Binop, Const, parse_expr, print_expr
from commutekit.lang.ast import iter_exprs, subexprs, walk
from commutekit.lang.domain import input_spec
from commutekit.lang.state import canonicalize
from commutekit.locksynth import conflict_set, synthesize
from commutekit.par import make_scheduler, run_recorded
from commutekit.runtime import run_parallel
from commutekit.serializability import (
    is_adapted_serial,
    is_program_scoped_serializable,
    is_scoped_serial,
    witness_execution,
)

from conftest import EXPLORABLE, load_prog
from test_locksynth import _guards_valid, check_dependency_order


@pytest.fixture
def report(capsys):
    def emit(n: int, ok: bool | None, detail: str) -> None:
        status = {True: "PASS", False: "FAIL", None: "SKIP"}[ok]
        with capsys.disabled():
            print(f"\n[acceptance {n:2d}] {status}: {detail}")
    return emit


def _b(finals):
    return {tuple(sorted(f.bindings().items())) for f in finals}


def test_01_golden_trace(report):
    t0 = time.perf_counter()
    prog, spec = load_prog(corpus.source("threaded"))
    st = spec.initial_state()
    ex = run_recorded(prog.body, st, make_scheduler())
    rules = [la.rule for la in ex.labels]
    fork, join = rules.index("Fork"), rules.index("Join")
    inside = [la.fr for la in ex.labels[fork + 1:join]]
    tail = [r for r in rules[join + 1:] if r != "SkipSeq"]
    shape = (rules[:fork] == ["VarRead", "BinopConsts"]
             and inside == [("L0",)] * 3 + [("R0",)] * 3
             and tail == ["VarRead", "VarRead", "BinopConsts", "AssignConst"])
    final = canonicalize(ex.final_state()).bindings()
    want = {(("x", 3), ("y", 1))}
    sets = all(_b(bigstep(prog.body, st, sem).finals) == want for sem in ("seq", "nd"))
    dt = time.perf_counter() - t0
    ok = shape and final == {"x": 3, "y": 1} and sets and dt < 1.0
    report(1, ok, f"threaded: fork, 3 left, 3 right, join, 4 tail steps; final {final}; seq/nd sets exact; {dt:.2f}s")
    assert ok


def test_02_nested_separation(report):
    t0 = time.perf_counter()
    prog, spec = load_prog(corpus.source("nested"))
    st = spec.initial_state()
    par = bigstep(prog.body, st, "par").finals
    bad = next(f for f in par if f.bindings() == {"x": 0, "y": 1})
    ex = witness_execution(prog.body, st, bad, "adapted")
    separated = ex is not None and bool(is_adapted_serial(ex)) and not is_scoped_serial(ex)
    nd = _b(bigstep(prog.body, st, "nd").finals)
    verdict = is_program_scoped_serializable(prog.body, [st]).serializable
    dt = time.perf_counter() - t0
    ok = separated and nd == {(("x", 0), ("y", 0))} and verdict is False and dt < 10.0
    report(2, ok, f"nested: {{x:0,y:1}} reached adapted-serially but not scoped-serially; nd={nd}; "
                  f"verdict={verdict}; {dt:.2f}s")
    assert ok


def test_03_inclusion(report):
    violations, states = [], 0
    for name in EXPLORABLE:
        prog, spec = load_prog(corpus.source(name))
        for st in spec.states():
            states += 1
            r = check_inclusion(prog.body, st)
            if r.errors or not (r.complete and r.holds and r.seq_singleton):
                violations.append(name)
    ok = len(EXPLORABLE) >= 20 and not violations
    report(3, ok, f"seq <= nd <= par on {len(EXPLORABLE)} programs, {states} states; violations: {sorted(set(violations))}")
    assert ok


def test_04_main_theorem(report):
    t0 = time.perf_counter()
    checked, violations = [], []
    for name in EXPLORABLE:
        prog, spec = load_prog(corpus.source(name))
        if not _guards_valid(prog, spec):
            continue
        body = synthesize(prog, "auto").program.body
        checked.append(name)
        for st in spec.states():
            if bigstep(body, st, "seq").finals != bigstep(body, st, "par").finals:
                violations.append(name)
                break
    dt = time.perf_counter() - t0
    ok = not violations and dt < 300
    report(4, ok, f"seq = par after auto locks on {len(checked)} programs; violations: {violations}; {dt:.1f}s")
    assert ok


# -- criterion 5 -------------------------------------------------------------------------


def _nonlinear(site, phi) -> bool:
    exprs = [e for s in (site.left, site.right) for st in walk(s) for e in iter_exprs(st)]
    if phi is not None:
        exprs.append(phi)
    for e in exprs:
        for x in subexprs(e):
            if isinstance(x, Binop) and x.op in ("*", "/", "%") and not (
                    isinstance(x.left, Const) or isinstance(x.right, Const)):
                return True
    return False


def _pairs():
    out = []
    for name in EXPLORABLE:
        prog, spec = load_prog(corpus.source(name))
        for site in program_sites(prog, spec):
            seen = set()
            for phi in (site.guard, parse_expr("true"), parse_expr("false")):
                if phi not in seen:
                    seen.add(phi)
                    out.append((name, site, spec, phi))
    return out


def test_05_oracle_solver_agreement(report):
    pairs = _pairs()
    oracle = [(n, s, sp, phi, oracle_check_condition(s, phi, sp)) for n, s, sp, phi in pairs]
    valid = sum(o.valid for *_, o in oracle)
    invalid = len(oracle) - valid
    # the oracle half: every refutation is a real difference between the two orders
    oracle_ok = all(o.valid or commutes_at(s.left, s.right, o.witness).commutes is False
                    for _, s, _, _, o in oracle)
    if not solver_available():
        warnings.warn("no SMT solver available; only the oracle half of criterion 5 ran")
        report(5, None if oracle_ok else False,
               f"no solver; oracle half on {len(oracle)} pairs ({valid} valid, {invalid} invalid) ok={oracle_ok}")
        assert oracle_ok
        return
    agree = exact = abstain = nl = nl_unknown = 0
    conflicts = []
    for name, s, sp, phi, o in oracle:
        # a witness that execution does not reproduce comes from an imprecise loop
        # summary; solver mode reports that as unknown, which counts as abstention
        status = verify_condition(s, phi, sp, "solver").status
        is_nl = _nonlinear(s, phi)
        nl += is_nl
        if status in ("unknown", "error"):
            abstain += 1
            nl_unknown += is_nl
            continue
        # solver-valid must be oracle-valid; solver-invalid must be oracle-invalid or carry
        # a witness outside the finite domain that execution confirms
        if status == "valid" and o.valid:
            agree += 1
            exact += 1
        elif status == "invalid" and not o.valid:
            agree += 1
            exact += 1
        elif status == "invalid":
            agree += 1  # confirmed by execution from a state outside the finite domain
        else:
            conflicts.append((name, s.index, print_expr(phi), status, o.valid))
    unknown_rate = nl_unknown / nl if nl else 0.0
    ok = (oracle_ok and len(pairs) >= 30 and valid > 0 and invalid > 0 and not conflicts
          and unknown_rate <= 0.2)
    report(5, ok, f"{len(pairs)} pairs ({valid} valid, {invalid} invalid on the domain): {agree} agree "
                  f"({exact} same verdict, {agree - exact} beyond-domain witnesses), {abstain} abstain, "
                  f"nonlinear unknown {nl_unknown}/{nl}; conflicts: {conflicts}")
    assert ok


def test_06_verification_verdicts(report):
    def site(name):
        prog, spec = load_prog(corpus.source(name))
        return program_sites(prog, spec)[0], spec

    s, sp = site("simple")
    a = verify_condition(s, parse_expr("c > a"), sp)
    b = verify_condition(s, parse_expr("true"), sp)
    b_ok = (b.status == "invalid" and b.witness is not None
            and commutes_at(s.left, s.right, b.witness).commutes is False)
    s, sp = site("dict")
    c = verify_condition(s, parse_expr("res != input"), sp)
    s, sp = site("loop-simple")
    d = verify_condition(s, s.guard, sp)
    d_ok = d.valid and oracle_check_condition(s, s.guard, sp).valid
    ok = a.valid and b_ok and c.valid and d_ok
    report(6, ok, f"simple c>a {a.status}; simple true {b.status} witness {b.witness}; "
                  f"dict res!=input {c.status}; loop-simple {d.status} (proved={d.proved})")
    assert ok


def _weakest_over_pool(site, spec, inferred) -> bool:
    """Every pool atom that is itself sufficient implies the inferred condition on the domain."""
    samples = site_samples(site, spec)
    for atom in pool_atoms(site):
        if not oracle_check_condition(site, atom, spec, samples).valid:
            continue
        for smp in samples:
            if smp.commutes is None:
                continue
            try:
                if holds(atom, smp.env) and not holds(inferred, smp.env):
                    return False
            except Exception:
                continue
    return True


def test_07_inference(report):
    unsound, not_weakest, n = [], [], 0
    for name in EXPLORABLE:
        prog, spec = load_prog(corpus.source(name))
        for s in program_sites(prog, spec):
            n += 1
            inf = infer_condition(s, spec)
            if not (inf.sound and verify_condition(s, inf.condition, spec).valid):
                unsound.append((name, s.index))
            if name in ("counter", "simple", "commute1"):
                if not (inf.weakest_on_domain and _weakest_over_pool(s, spec, inf.condition)):
                    not_weakest.append(name)
    ok = not unsound and not not_weakest
    report(7, ok, f"{n} sites inferred; unsound {unsound}; counter/simple/commute1 not weakest {not_weakest}")
    assert ok


def test_08_transformations(report):
    bad = []
    applied = 0
    for name in EXPLORABLE:
        prog, spec = load_prog(corpus.source(name))
        states = list(spec.states())
        seq0 = [bigstep(prog.body, st, "seq").finals for st in states]
        valid = _guards_valid(prog, spec)
        for pattern in ("naive", "snapshot", "narrow"):
            out = synthesize(prog, pattern)
            if not all(r.pattern == pattern or not r.con for r in out.sites):
                continue  # the pattern does not apply to some site
            if pattern == "snapshot" and not valid:
                continue
            applied += 1
            body = out.program.body
            if [bigstep(body, st, "seq").finals for st in states] != seq0:
                bad.append((name, pattern, "seq"))
            if not is_program_scoped_serializable(body, states).serializable:
                bad.append((name, pattern, "scoped"))
        for site in program_sites(prog, spec):
            con = conflict_set(site.left, site.right)
            for side in (site.left, site.right) if con else ():
                try:
                    check_dependency_order(side, con)
                except AssertionError:
                    bad.append((name, "narrow", "order"))
                except ValueError:
                    pass
    ok = not bad and applied > 0
    report(8, ok, f"{applied} (program, pattern) pairs: seq preserved, scoped-serializable, dependency order kept; "
                  f"violations {bad}")
    assert ok


def test_09_speedup(report):
    cores = os.cpu_count() or 1
    if cores < 2:
        report(9, None, f"{cores} core available; the speedup check needs at least 2")
        pytest.skip("speedup needs at least 2 cores")
    prog, _ = load_prog(corpus.source("speedup"))
    spec = input_spec(prog.domain, "n=1000000")
    st = spec.initial_state()
    seq_t = min(run_parallel(prog.body, st, 2, force_seq=True).seconds for _ in range(3))
    par_t = min(run_parallel(prog.body, st, 2).seconds for _ in range(3))
    ratio = seq_t / par_t
    ok = ratio >= 1.2
    report(9, ok, f"N=1e6: force-seq {seq_t:.3f}s, 2 workers {par_t:.3f}s, speedup {ratio:.2f}x")
    assert ok


def test_10_reproducible_traces(report, tmp_path):
    dumps = []
    for i in range(5):
        out = tmp_path / f"t{i}.trace"
        subprocess.run([sys.executable, "-m", "commutekit", "run", "nested", "--seed", "42", "--trace", str(out)],
                       check=True, capture_output=True)
        dumps.append(out.read_bytes())
    ok = len(set(dumps)) == 1 and dumps[0]
    report(10, bool(ok), f"5 runs with seed 42 give {len(set(dumps))} distinct trace dump(s) of {len(dumps[0])} bytes")
    assert ok
