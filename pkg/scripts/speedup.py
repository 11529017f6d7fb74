"""Wall-clock comparison of the thread runtime against its forced-sequential run.

    python3 scripts/speedup.py --n 1000000 --workers 2 --repeat 5
"""

from __future__ import annotations

import argparse
import os
import statistics

from commutekit import corpus
from commutekit.lang import parse
from commutekit.lang.domain import input_spec
from commutekit.runtime import run_parallel


def measure(n: int, workers: int, repeat: int, program: str) -> tuple[list[float], list[float]]:
    prog = parse(corpus.source(program))
    st = input_spec(prog.domain, f"n={n}").initial_state()
    seq = [run_parallel(prog.body, st, workers, force_seq=True).seconds for _ in range(repeat)]
    par = [run_parallel(prog.body, st, workers).seconds for _ in range(repeat)]
    return seq, par


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, nargs="+", default=[10_000, 100_000, 1_000_000])
    ap.add_argument("--workers", type=int, default=2)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--program", default="speedup", help="corpus program with an int input n")
    args = ap.parse_args()
    print(f"cores: {os.cpu_count()}, workers: {args.workers}, repeats: {args.repeat}")
    print(f"{'N':>10} {'force-seq s':>12} {'parallel s':>12} {'speedup':>8}")
    for n in args.n:
        seq, par = measure(n, args.workers, args.repeat, args.program)
        s, p = statistics.median(seq), statistics.median(par)
        print(f"{n:>10} {s:>12.4f} {p:>12.4f} {s / p:>7.2f}x")


if __name__ == "__main__":
    main()
