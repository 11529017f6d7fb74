"""One row per corpus commute site: guard verdict, inferred condition, chosen transformation.

    python3 scripts/corpus_report.py [--mode oracle|solver|both] [--no-infer]

Program-level columns report inclusion over every domain state and whether
seq = par holds after ``auto`` lock synthesis.
"""

from __future__ import annotations

import argparse
import time

from commutekit import corpus
from commutekit.commutativity import infer_condition, program_sites, spec_of, verify_condition
from commutekit.explorer import bigstep, check_inclusion
from commutekit.lang import parse, print_expr
from commutekit.locksynth import synthesize


def program_row(name: str, mode: str, infer: bool) -> list[str]:
    prog = parse(corpus.source(name))
    spec = spec_of(prog)
    sites = program_sites(prog, spec)
    synth = synthesize(prog, "auto")
    states = list(spec.states())
    incl = all(check_inclusion(prog.body, st).holds for st in states)
    body = synth.program.body
    theorem = all(bigstep(body, st, "seq").finals == bigstep(body, st, "par").finals for st in states)
    rows = []
    for site, rep in zip(sites, synth.sites):
        v = verify_condition(site, site.guard, spec, mode)
        guard = print_expr(site.guard) if site.guard is not None else "_"
        status = v.status + (" (proved)" if v.proved else "")
        inferred = infer_condition(site, spec, mode=mode).text if infer else "-"
        rows.append(f"| {name} | {site.index} | `{guard}` | {status} | `{inferred}` | {rep.pattern} "
                    f"| {'yes' if incl else 'NO'} | {'yes' if theorem else 'no'} |")
    return rows


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--mode", choices=("oracle", "solver", "both"), default="both")
    ap.add_argument("--no-infer", action="store_true")
    args = ap.parse_args()
    t0 = time.perf_counter()
    print("| program | site | guard | guard verdict | inferred | auto pattern | inclusion | seq = par after auto |")
    print("|---|---|---|---|---|---|---|---|")
    for name in corpus.names():
        if name in corpus.EXPLORATION_EXCLUDED:
            continue
        for row in program_row(name, args.mode, not args.no_infer):
            print(row, flush=True)
    print(f"\n{time.perf_counter() - t0:.1f}s")


if __name__ == "__main__":
    main()
