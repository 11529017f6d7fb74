"""Command-line interface.

Exit codes: 0 success, 1 parse/usage/static error, 2 run-time error,
3 deadlock or exhausted budget.  Verdicts (serializable or not, valid or
not) are reported in the output, not through the exit code.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Sequence

from . import corpus
from .commutativity import infer_condition, program_sites, site_vars, verify_condition
from .commutativity.solver import DEFAULT_TIMEOUT
from .explorer import DEFAULT_BUDGET, DEFAULT_MAX_STATES, bigstep, check_inclusion, check_nd_determinism
from .lang import ParseError, Program, StaticTypeError, parse, parse_expr, print_expr, print_program, print_stmt
from .lang.domain import DomainError, InputSpec, input_spec
from .lang.state import CanonicalState, RuntimeFault, ScopedState, canonicalize
from .lang.typecheck import check_stmt
from .locksynth import PATTERNS, synthesize
from .par import BudgetError, DeadlockError, make_scheduler, run_recorded
from .runtime import LockTimeout, force_sequential, run_parallel
from .serializability import is_adapted_serial, is_program_scoped_serializable, is_scoped_serial
from .stepper import BudgetExceeded

EXIT_OK, EXIT_INPUT, EXIT_RUNTIME, EXIT_STUCK = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # usage errors share the input-error exit code
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


# ---------------------------------------------------------------------------
# Helpers
# ---------------------------------------------------------------------------


def load_source(arg: str) -> str:
    """Read a file, or a bundled corpus program given as ``corpus:NAME`` or ``NAME``."""
    name = arg[len("corpus:"):] if arg.startswith("corpus:") else arg
    p = Path(arg)
    if p.exists():
        return p.read_text(encoding="utf-8")
    if name in corpus.names():
        return corpus.source(name)
    raise UsageError(f"no such file or corpus program: {arg}")


def load(args) -> tuple[Program, InputSpec]:
    prog = parse(load_source(args.file))
    if getattr(args, "domain", None):
        prog = Program(prog.body, args.domain, prog.init, prog.pragmas)
    if getattr(args, "init", None):
        prog = Program(prog.body, prog.domain, args.init, prog.pragmas)
    spec = input_spec(prog.domain, prog.init)
    check_stmt(prog.body, spec.types)
    return prog, spec


def state_json(st: ScopedState | CanonicalState) -> dict:
    c = st if isinstance(st, CanonicalState) else canonicalize(st)
    return c.to_json()


def state_text(st: ScopedState | CanonicalState) -> str:
    c = st if isinstance(st, CanonicalState) else canonicalize(st)
    return ", ".join(c.render())


def finals_json(finals) -> list[dict]:
    return [f.to_json() for f in sorted(finals, key=lambda c: c.render())]


def finals_text(finals) -> str:
    return "{" + "; ".join("{" + ", ".join(f.render()) + "}" for f in sorted(finals, key=lambda c: c.render())) + "}"


def start_states(args, spec: InputSpec) -> list[ScopedState]:
    if getattr(args, "initial_only", False):
        return [spec.initial_state()]
    return list(spec.states())


def emit(args, payload: dict, text: str) -> None:
    if args.json:
        print(json.dumps(payload, indent=2, sort_keys=True))
    else:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")


def select_sites(args, prog: Program, spec: InputSpec):
    sites = program_sites(prog, spec)
    if args.site is None:
        return sites
    if not 0 <= args.site < len(sites):
        raise UsageError(f"site {args.site} does not exist (program has {len(sites)})")
    return [sites[args.site]]


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def cmd_run(args) -> int:
    prog, spec = load(args)
    body = force_sequential(prog.body) if args.force_seq else prog.body
    st = spec.initial_state()
    if args.workers:
        if args.trace or args.choices or args.seed is not None:
            raise UsageError("--workers runs on threads; --trace, --choices and --seed need the stepper")
        res = run_parallel(body, st, args.workers, lock_timeout=args.lock_timeout)
        payload = {"engine": "threads", "workers": args.workers, "final": state_json(res.state),
                   "seconds": res.seconds, "forks": res.forks}
        emit(args, payload, "\n".join(canonicalize(res.state).render()))
        return EXIT_OK
    choices = Path(args.choices).read_text(encoding="utf-8") if args.choices else None
    sched = make_scheduler(args.seed, choices, args.round_robin)
    try:
        ex = run_recorded(body, st, sched, args.semantics, args.budget)
    except (DeadlockError, BudgetError) as exc:
        if args.trace:
            Path(args.trace).write_text(exc.execution.dump(), encoding="utf-8")
        raise
    if args.trace:
        Path(args.trace).write_text(ex.dump(), encoding="utf-8")
    final = ex.final_state()
    payload = {"engine": "stepper", "semantics": args.semantics, "steps": len(ex.steps), "final": state_json(final)}
    emit(args, payload, "\n".join(canonicalize(final).render()))
    return EXIT_OK


def cmd_explore(args) -> int:
    prog, spec = load(args)
    rows, lines = [], []
    ok = complete = True
    for st in start_states(args, spec):
        r = check_inclusion(prog.body, st, args.budget, args.max_states)
        ok &= r.holds and r.seq_singleton
        complete &= r.complete
        rows.append({"start": state_json(st), "seq": finals_json(r.seq), "nd": finals_json(r.nd),
                     "par": finals_json(r.par), "inclusion": r.holds, "seq_singleton": r.seq_singleton,
                     "complete": r.complete, "errors": r.errors})
        lines += [f"start {state_text(st)}", f"  seq: {finals_text(r.seq)}", f"  nd:  {finals_text(r.nd)}",
                  f"  par: {finals_text(r.par)}", f"  inclusion: {'ok' if r.holds else 'VIOLATED'}"
                  + ("" if r.complete else " (exploration incomplete)")]
        lines += [f"  error: {e}" for e in r.errors]
    lines.append(f"seq ⊆ nd ⊆ par {'holds' if ok else 'FAILS'} on {len(rows)} start states"
                 + ("" if complete else " (some explorations incomplete)"))
    emit(args, {"states": rows, "inclusion": ok, "complete": complete}, "\n".join(lines))
    return EXIT_OK


def cmd_check(args) -> int:
    prog, spec = load(args)
    body = prog.body
    if args.transform:
        body = synthesize(prog, args.transform).program.body
    states = start_states(args, spec)
    prop = args.property
    payload: dict = {"property": prop, "holds": None, "states_checked": 0, "counterexample": None, "notes": []}
    if prop in ("scoped-ser", "adapted-ser"):
        mode = "scoped" if prop == "scoped-ser" else "adapted"
        v = is_program_scoped_serializable(body, states, args.budget, args.max_states, mode)
        payload.update(holds=v.serializable, states_checked=v.states_checked, notes=v.notes)
        if v.counterexample is not None:
            ex = v.counterexample
            trace = ex.dump()
            payload["counterexample"] = {
                "start": state_json(v.start),
                "final": v.bad_final.to_json(),
                "serial_finals": finals_json(v.serial_finals),
                "scoped_serial": bool(is_scoped_serial(ex)),
                "adapted_serial": bool(is_adapted_serial(ex)),
                "trace": trace,
            }
            if args.trace_out:
                Path(args.trace_out).write_text(trace, encoding="utf-8")
    elif prop == "nd-det":
        r = check_nd_determinism(body, states, args.budget)
        payload.update(holds=r.deterministic if r.complete or not r.deterministic else None, states_checked=r.checked)
        if r.witness is not None:
            payload["counterexample"] = {"start": state_json(r.witness), "finals": finals_json(r.finals)}
    else:  # main-theorem: seq and par agree as sets
        holds: bool | None = True
        for st in states:
            payload["states_checked"] += 1
            s = bigstep(body, st, "seq", args.budget, args.max_states)
            p = bigstep(body, st, "par", args.budget, args.max_states)
            if s.finals != p.finals:
                holds = False
                payload["counterexample"] = {"start": state_json(st), "seq": finals_json(s.finals),
                                             "par": finals_json(p.finals)}
                break
            if not (s.complete and p.complete):
                holds = None
                payload["notes"].append("exploration incomplete")
        payload["holds"] = holds
    verdict = {True: "holds", False: "FAILS", None: "unknown"}[payload["holds"]]
    lines = [f"{prop}: {verdict} ({payload['states_checked']} start states)"]
    ce = payload["counterexample"]
    if ce:
        lines.append(f"counterexample from {json.dumps(ce['start'], sort_keys=True)}")
        if "trace" in ce:
            lines.append(f"final {json.dumps(ce['final'], sort_keys=True)} is not reachable serially; "
                         f"scoped-serial={ce['scoped_serial']} adapted-serial={ce['adapted_serial']}")
            lines.append(ce["trace"].rstrip("\n"))
    lines += payload["notes"]
    emit(args, payload, "\n".join(lines))
    return EXIT_OK


def _verdict_json(site, cond, v) -> dict:
    out = {"site": site.index, "condition": print_expr(cond) if cond is not None else "_",
           "status": v.status, "proved": v.proved, "complete": v.complete, "witness": None,
           "disagreement": v.disagreement, "mode": v.mode, "notes": v.notes}
    if v.witness is not None:
        from .lang.domain import build_state

        out["witness"] = state_json(build_state(v.witness))
    if v.oracle is not None:
        o = v.oracle
        out["oracle"] = {"valid": o.valid, "checked": o.checked, "excluded": o.excluded, "total": o.total,
                         "complete": o.complete}
    if v.solver is not None:
        s = v.solver
        out["solver"] = {"status": s.status, "seconds": round(s.seconds, 3), "complete": s.complete,
                         "witness_confirmed": s.confirmed}
    return out


def cmd_verify(args) -> int:
    prog, spec = load(args)
    rows, lines = [], []
    for site in select_sites(args, prog, spec):
        cond = parse_expr(args.condition) if args.condition else site.guard
        v = verify_condition(site, cond, spec, args.mode, cmd=args.solver_cmd, timeout=args.timeout)
        row = _verdict_json(site, cond, v)
        rows.append(row)
        tag = "proved" if v.proved else ("domain" if v.status == "valid" else "")
        lines.append(f"site {site.index}: {row['condition']} is {v.status.upper()}" + (f" ({tag})" if tag else "")
                     + ("" if v.complete is None else f"; complete={v.complete}"))
        if row["witness"] is not None:
            lines.append(f"  witness: {json.dumps(row['witness'], sort_keys=True)}")
        lines += [f"  note: {n}" for n in v.notes]
    emit(args, {"results": rows}, "\n".join(lines))
    return EXIT_OK


def cmd_infer(args) -> int:
    prog, spec = load(args)
    rows, lines = [], []
    for site in select_sites(args, prog, spec):
        r = infer_condition(site, spec, max_atoms=args.budget, mode=args.mode, timeout=args.timeout,
                            cmd=args.solver_cmd)
        rows.append({"site": site.index, "condition": r.text, "sound": r.sound,
                     "proved": bool(r.verdict and r.verdict.proved), "weakest_on_domain": r.weakest_on_domain,
                     "atoms": r.atoms, "samples": r.samples, "rounds": r.rounds, "timed_out": r.timed_out,
                     "notes": r.notes})
        lines.append(f"site {site.index}: {r.text}")
        lines.append(f"  sound={r.sound} proved={rows[-1]['proved']} weakest_on_domain={r.weakest_on_domain} "
                     f"atoms={r.atoms} samples={r.samples}")
        lines += [f"  note: {n}" for n in r.notes]
    emit(args, {"results": rows}, "\n".join(lines))
    return EXIT_OK


def cmd_transform(args) -> int:
    prog, _ = load(args)
    syn = synthesize(prog, args.pattern)
    src = print_program(syn.program)
    if args.out:
        Path(args.out).write_text(src, encoding="utf-8")
        locks = {str(l): r.site for r in syn.sites for l in r.locks}
        Path(args.out + ".locks.json").write_text(json.dumps(locks, indent=2, sort_keys=True) + "\n",
                                                  encoding="utf-8")
    header = [f"// site {r.site}: {r.pattern}, con={{{', '.join(r.con)}}}, locks={r.locks}" for r in syn.sites]
    emit(args, {"source": src, "sites": [r.to_json() for r in syn.sites]},
         "\n".join(header) + "\n" + src if not args.out else "\n".join(header))
    return EXIT_OK


def cmd_sites(args) -> int:
    prog, spec = load(args)
    rows, lines = [], []
    for s in program_sites(prog, spec):
        guard = "_" if s.guard is None else print_expr(s.guard)
        rows.append({"index": s.index, "depth": s.depth, "guard": guard, "vars": site_vars(s),
                     "left": print_stmt(s.left), "right": print_stmt(s.right)})
        lines.append(f"{s.index}: depth={s.depth} guard={guard} vars={','.join(site_vars(s))}")
    emit(args, {"sites": rows}, "\n".join(lines) if lines else "no commute sites")
    return EXIT_OK


# ---------------------------------------------------------------------------
# Argument parsing
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="commutekit", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, domain: bool = True):
        sp.add_argument("file", help="source file, or the name of a bundled corpus program")
        sp.add_argument("--json", action="store_true", help="machine-readable output")
        sp.add_argument("--init", help="override the initial state, e.g. 'x=1, y=0'")
        if domain:
            sp.add_argument("--domain", help="override the input domain, e.g. 'x:int[-2..2], b:bool'")

    def bounds(sp):
        sp.add_argument("--budget", type=int, default=DEFAULT_BUDGET, help="steps per execution path")
        sp.add_argument("--max-states", type=int, default=DEFAULT_MAX_STATES)
        sp.add_argument("--initial-only", action="store_true", help="only the written initial state")

    sp = sub.add_parser("run", help="execute a program once")
    common(sp)
    sp.add_argument("--semantics", choices=("seq", "nd", "par"), default="par")
    sp.add_argument("--force-seq", action="store_true", help="every commute guard evaluates to false")
    sp.add_argument("--seed", type=int, help="random scheduler seed")
    sp.add_argument("--choices", help="file with a trace dump or a list of step indices to replay")
    sp.add_argument("--round-robin", action="store_true")
    sp.add_argument("--trace", help="write the trace dump to this file")
    sp.add_argument("--workers", type=int, help="run on this many OS threads instead of the stepper")
    sp.add_argument("--budget", type=int, default=DEFAULT_BUDGET)
    sp.add_argument("--lock-timeout", type=float, default=10.0)
    sp.set_defaults(func=cmd_run)

    sp = sub.add_parser("explore", help="final-state sets under seq, nd and par")
    common(sp)
    bounds(sp)
    sp.set_defaults(func=cmd_explore)

    sp = sub.add_parser("check", help="check a program-level property")
    common(sp)
    bounds(sp)
    sp.add_argument("--property", choices=("scoped-ser", "adapted-ser", "nd-det", "main-theorem"),
                    default="scoped-ser")
    sp.add_argument("--transform", choices=PATTERNS, help="apply lock synthesis first")
    sp.add_argument("--trace-out", help="write the counterexample trace to this file")
    sp.set_defaults(func=cmd_check)

    for name, func, helptext in (("verify", cmd_verify, "check a commutativity condition"),
                                 ("infer", cmd_infer, "infer a commutativity condition")):
        sp = sub.add_parser(name, help=helptext)
        common(sp)
        sp.add_argument("--site", type=int, help="site index (see 'sites'); default all")
        sp.add_argument("--mode", choices=("oracle", "solver", "both"), default="both")
        sp.add_argument("--solver-cmd", help="solver command line (default: z3 -in)")
        if name == "verify":
            sp.add_argument("--condition", help="condition to check (default: the site's guard)")
            sp.add_argument("--timeout", type=float, default=DEFAULT_TIMEOUT, help="solver timeout in seconds")
        else:
            sp.add_argument("--budget", type=int, default=400, help="maximum number of pool atoms")
            sp.add_argument("--timeout", type=float, default=120.0, help="refinement time budget in seconds")
        sp.set_defaults(func=func)

    sp = sub.add_parser("transform", help="insert locks or snapshots at commute sites")
    common(sp, domain=False)
    sp.add_argument("--pattern", choices=PATTERNS, default="auto")
    sp.add_argument("--out", help="write the transformed source here")
    sp.set_defaults(func=cmd_transform)

    sp = sub.add_parser("sites", help="list commute sites")
    common(sp)
    sp.set_defaults(func=cmd_sites)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ParseError, StaticTypeError, DomainError, UsageError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (DeadlockError, BudgetError, BudgetExceeded, LockTimeout) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_STUCK
    except RuntimeFault as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
