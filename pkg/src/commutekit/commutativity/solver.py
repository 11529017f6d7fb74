"""SMT solver access through a subprocess speaking SMT-LIB v2.

The command defaults to ``z3 -in`` and can be overridden with the
``COMMUTEKIT_SOLVER`` environment variable (e.g. ``cvc5 --lang smt2``).
"""

from __future__ import annotations

import os
import shlex
import shutil
import subprocess
import time
from dataclasses import dataclass, field

from .sexp import parse_all, to_value

ENV_VAR = "COMMUTEKIT_SOLVER"
DEFAULT_TIMEOUT = 20.0


def solver_command(cmd: str | None = None) -> list[str] | None:
    """The solver argv, or None when no solver is installed."""
    text = cmd or os.environ.get(ENV_VAR) or "z3 -in"
    argv = shlex.split(text)
    if not argv or shutil.which(argv[0]) is None:
        return None
    return argv


def solver_available(cmd: str | None = None) -> bool:
    return solver_command(cmd) is not None


class SolverUnavailable(RuntimeError):
    pass


@dataclass
class SolverResult:
    status: str  # "sat", "unsat", "unknown", "timeout" or "error"
    values: list = field(default_factory=list)  # get-value results in request order
    output: str = ""
    seconds: float = 0.0

    @property
    def definite(self) -> bool:
        return self.status in ("sat", "unsat")


def run_smt(text: str, cmd: str | None = None, timeout: float = DEFAULT_TIMEOUT) -> SolverResult:
    argv = solver_command(cmd)
    if argv is None:
        raise SolverUnavailable("no SMT solver found (install z3 or set COMMUTEKIT_SOLVER)")
    if os.path.basename(argv[0]) == "z3":
        argv = argv + [f"-T:{max(1, int(timeout))}"]
    t0 = time.perf_counter()
    try:
        proc = subprocess.run(argv, input=text, capture_output=True, text=True, timeout=timeout + 5)
    except subprocess.TimeoutExpired:
        return SolverResult("timeout", seconds=time.perf_counter() - t0)
    dt = time.perf_counter() - t0
    return parse_response(proc.stdout + proc.stderr, dt)


def parse_response(out: str, seconds: float = 0.0) -> SolverResult:
    try:
        items = parse_all(out)
    except ValueError:
        return SolverResult("error", output=out, seconds=seconds)
    if not items:
        return SolverResult("error", output=out, seconds=seconds)
    head = items[0]
    if head == "timeout":
        return SolverResult("timeout", output=out, seconds=seconds)
    if head not in ("sat", "unsat", "unknown"):
        return SolverResult("error", output=out, seconds=seconds)
    res = SolverResult(head, output=out, seconds=seconds)
    if head == "sat" and len(items) > 1 and isinstance(items[1], list):
        vals = []
        for pair in items[1]:
            try:
                vals.append(to_value(pair[1]))
            except (ValueError, IndexError, TypeError):
                vals.append(None)
        res.values = vals
    return res


__all__ = [
    "ENV_VAR",
    "SolverResult",
    "SolverUnavailable",
    "parse_response",
    "run_smt",
    "solver_available",
    "solver_command",
]
