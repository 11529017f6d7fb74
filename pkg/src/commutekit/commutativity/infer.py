"""Inference of commutativity conditions over a predicate pool.

The pool holds comparisons (``<``, ``==``) between terms taken from the
site: int variables, table reads ``t[k]``, ``ht_size``, ``len`` and the
constants 0, 1 and the site's int literals.  Boolean variables and
``ht_mem(t, k)`` are atoms on their own.

Two learners run over the oracle samples: a decision tree whose
commuting leaves become cubes, and sequential covering that grows one
cube per uncovered commuting sample.  In both, literals are then dropped
greedily while no non-commuting sample is covered and subsumed cubes are
removed; the smaller formula wins.  When the pool can express the commuting set,
the result covers every commuting sample, so it is the weakest pool
formula on the domain.  With a solver, a counterexample it finds outside
the domain is added as a sample and the loop repeats.
"""

from __future__ import annotations

import itertools
import math
import time
from dataclasses import dataclass, field

from ..lang.ast import (
    ArrayT,
    BoolT,
    Binop,
    Call,
    Const,
    Expr,
    HashtableT,
    Index,
    IntT,
    Unop,
    Var,
    iter_exprs,
    subexprs,
    walk,
)
from ..lang.domain import InputSpec, build_state
from ..lang.printer import print_expr
from ..lang.state import RuntimeFault
from ..lang.typecheck import CommuteSite
from ..runtime import Machine
from .oracle import Sample, commutes_at, site_samples
from .site import site_vars
from .solver import DEFAULT_TIMEOUT, solver_available
from .verify import Verdict, solver_check, verify_condition

TRUE = Const(True)
FALSE = Const(False)

MAX_LITERAL = 8  # program literals beyond this magnitude are not pool constants


# ---------------------------------------------------------------------------
# Predicate pool
# ---------------------------------------------------------------------------


def _site_exprs(site: CommuteSite) -> list[Expr]:
    roots = [e for frag in (site.left, site.right) for st in walk(frag) for e in iter_exprs(st)]
    return [x for r in roots for x in subexprs(r)]


def pool_terms(site: CommuteSite) -> list[Expr]:
    """Int-valued terms of the site, constants last."""
    names = site_vars(site)
    env = site.env
    exprs = _site_exprs(site)
    out: list[Expr] = [Var(n) for n in names if isinstance(env[n], IntT)]
    lits = sorted({x.value for x in exprs if isinstance(x, Const) and type(x.value) is int
                   and abs(x.value) <= MAX_LITERAL} | {0, 1})
    # table reads at keys the site itself uses
    for x in exprs:
        if (isinstance(x, Index) and isinstance(x.base, Var) and x.base.name in env
                and isinstance(env[x.base.name], HashtableT) and isinstance(env[x.base.name].val, IntT)):
            k = x.index
            if (isinstance(k, Var) and k.name in env) or isinstance(k, Const):
                t = Index(Var(x.base.name), k)
                if t not in out:
                    out.append(t)
    for n in names:
        if isinstance(env[n], HashtableT):
            out.append(Call("ht_size", (Var(n),)))
        if isinstance(env[n], ArrayT):
            out.append(Call("len", (Var(n),)))
    out += [Const(v) for v in lits]
    return out


def pool_atoms(site: CommuteSite) -> list[Expr]:
    terms = pool_terms(site)
    env = site.env
    names = site_vars(site)
    atoms: list[Expr] = [Var(n) for n in names if isinstance(env[n], BoolT)]
    for a, b in itertools.combinations(terms, 2):
        if isinstance(a, Const) and isinstance(b, Const):
            continue
        atoms.append(Binop(a, "==", b))
        atoms.append(Binop(a, "<", b))
        atoms.append(Binop(b, "<", a))
    key_terms = [Var(n) for n in names if isinstance(env[n], IntT)]
    key_terms += [t for t in terms if isinstance(t, Const)]
    for n in names:
        ty = env[n]
        if isinstance(ty, HashtableT) and isinstance(ty.key, IntT):
            atoms += [Call("ht_mem", (Var(n), k)) for k in key_terms]
    return atoms


# ---------------------------------------------------------------------------
# Feature evaluation
# ---------------------------------------------------------------------------


def features(atoms: list[Expr], assignment: dict) -> tuple:
    """Truth value of every atom (False where it cannot be evaluated)."""
    m = Machine(build_state(assignment))
    out = []
    for a in atoms:
        try:
            out.append(m.eval(a, m.root) is True)
        except (RuntimeFault, KeyError, TypeError):
            out.append(False)
    return tuple(out)


# ---------------------------------------------------------------------------
# Learning
# ---------------------------------------------------------------------------

Cube = tuple  # of (atom index, polarity)


def _entropy(pos: int, neg: int) -> float:
    n = pos + neg
    if pos == 0 or neg == 0:
        return 0.0
    p = pos / n
    return -(p * math.log2(p) + (1 - p) * math.log2(1 - p))


def learn_cubes(rows: list[tuple[tuple, bool]], n_atoms: int) -> list[Cube]:
    """Commuting leaves of a decision tree that splits until leaves are pure."""
    cubes: list[Cube] = []

    def grow(idx: list[int], path: tuple) -> None:
        pos = sum(1 for i in idx if rows[i][1])
        if pos == 0:
            return
        if pos == len(idx):
            cubes.append(path)
            return
        base = _entropy(pos, len(idx) - pos)
        best, best_gain = None, 1e-12
        used = {a for a, _ in path}
        for a in range(n_atoms):
            if a in used:
                continue
            t = [i for i in idx if rows[i][0][a]]
            if not t or len(t) == len(idx):
                continue
            f = [i for i in idx if not rows[i][0][a]]
            tp = sum(1 for i in t if rows[i][1])
            fp = pos - tp
            rem = (len(t) * _entropy(tp, len(t) - tp) + len(f) * _entropy(fp, len(f) - fp)) / len(idx)
            if base - rem > best_gain:
                best, best_gain = a, base - rem
        if best is None:
            # no single atom separates this region: try any splitting atom
            for a in range(n_atoms):
                if a not in used and 0 < sum(1 for i in idx if rows[i][0][a]) < len(idx):
                    best = a
                    break
        if best is None:
            return  # indistinguishable mixed samples: stay sound
        grow([i for i in idx if rows[i][0][best]], path + ((best, True),))
        grow([i for i in idx if not rows[i][0][best]], path + ((best, False),))

    grow(list(range(len(rows))), ())
    return cubes


def _foil_gain(p0: int, n0: int, p1: int, n1: int) -> float:
    if p1 == 0:
        return -math.inf
    return p1 * (math.log2(p1 / (p1 + n1)) - math.log2(p0 / (p0 + n0)))


def learn_cover(rows: list[tuple[tuple, bool]], n_atoms: int) -> list[Cube]:
    """Sequential covering: grow one cube per uncovered commuting sample."""
    pos = [f for f, ok in rows if ok]
    neg = [f for f, ok in rows if not ok]
    cubes: list[Cube] = []
    uncovered = list(pos)
    while uncovered:
        seed = uncovered[0]
        cube: tuple = ()
        p_in, n_in = uncovered, neg
        while n_in:
            best, best_gain = None, -math.inf
            for a in range(n_atoms):
                lit = (a, seed[a])
                if lit in cube:
                    continue
                p1 = [f for f in p_in if f[a] == seed[a]]
                n1 = [f for f in n_in if f[a] == seed[a]]
                if len(n1) == len(n_in):
                    continue
                g = _foil_gain(len(p_in), len(n_in), len(p1), len(n1))
                if g > best_gain:
                    best, best_gain = lit, g
            if best is None:
                break  # the seed is indistinguishable from a negative
            cube += (best,)
            p_in = [f for f in p_in if f[best[0]] == best[1]]
            n_in = [f for f in n_in if f[best[0]] == best[1]]
        if n_in:
            uncovered = uncovered[1:]
            continue
        cubes.append(cube)
        uncovered = [f for f in uncovered if not _covers(cube, f)]
    return cubes


def _size(cubes: list[Cube]) -> tuple:
    return (sum(len(c) for c in cubes) + len(cubes), len(cubes))


def learn(rows: list[tuple[tuple, bool]], n_atoms: int) -> list[Cube]:
    """The smaller of the decision-tree and covering formulas, both simplified."""
    pos = [f for f, ok in rows if ok]
    best = None
    for cand in (learn_cubes(rows, n_atoms), learn_cover(rows, n_atoms)):
        cand = simplify(cand, rows)
        covered = sum(1 for f in pos if any(_covers(c, f) for c in cand))
        key = (-covered, _size(cand))
        if best is None or key < best[0]:
            best = (key, cand)
    return best[1]


def _covers(cube: Cube, feats: tuple) -> bool:
    return all(feats[a] == pol for a, pol in cube)


def simplify(cubes: list[Cube], rows: list[tuple[tuple, bool]]) -> list[Cube]:
    negatives = [f for f, ok in rows if not ok]
    out: list[Cube] = []
    for cube in cubes:
        lits = list(cube)
        for lit in list(lits):
            trial = [x for x in lits if x != lit]
            if not any(_covers(tuple(trial), f) for f in negatives):
                lits = trial
        out.append(tuple(sorted(lits)))
    out = sorted(set(out), key=lambda c: (len(c), c))
    kept: list[Cube] = []
    for c in out:
        if any(set(k) <= set(c) for k in kept):
            continue
        kept.append(c)
    # drop cubes whose positives are all covered by the others
    positives = [f for f, ok in rows if ok]
    changed = True
    while changed:
        changed = False
        for c in sorted(kept, key=lambda c: -len(c)):
            rest = [k for k in kept if k != c]
            if all(any(_covers(k, f) for k in rest) for f in positives if _covers(c, f)):
                kept = rest
                changed = True
                break
    return kept


def literal_expr(atom: Expr, pol: bool) -> Expr:
    if pol:
        return atom
    if isinstance(atom, Binop) and atom.op == "==":
        return Binop(atom.left, "!=", atom.right)
    if isinstance(atom, Binop) and atom.op == "<":
        return Binop(atom.left, ">=", atom.right)
    return Unop("!", atom)


def cubes_expr(cubes: list[Cube], atoms: list[Expr]) -> Expr:
    if not cubes:
        return FALSE
    disj: Expr | None = None
    for cube in cubes:
        conj: Expr | None = None
        for a, pol in cube:
            lit = literal_expr(atoms[a], pol)
            conj = lit if conj is None else Binop(conj, "&&", lit)
        conj = conj if conj is not None else TRUE
        disj = conj if disj is None else Binop(disj, "||", conj)
    return disj


# ---------------------------------------------------------------------------
# Driver
# ---------------------------------------------------------------------------


@dataclass
class Inference:
    condition: Expr
    text: str
    verdict: Verdict | None
    atoms: int
    samples: int
    rounds: int = 1
    weakest_on_domain: bool = False  # covers every commuting domain sample
    timed_out: bool = False
    notes: list[str] = field(default_factory=list)

    @property
    def sound(self) -> bool:
        return self.verdict is not None and self.verdict.valid


def infer_condition(site: CommuteSite, spec: InputSpec, *, max_atoms: int = 400, max_rounds: int = 5,
                    mode: str = "both", timeout: float = 120.0, cmd: str | None = None,
                    solver_timeout: float = DEFAULT_TIMEOUT) -> Inference:
    """A sound commutativity condition for ``site``, as weak as the pool allows."""
    t0 = time.perf_counter()
    notes: list[str] = []
    atoms = pool_atoms(site)
    if len(atoms) > max_atoms:
        notes.append(f"pool truncated from {len(atoms)} to {max_atoms} atoms")
        atoms = atoms[:max_atoms]
    samples: list[Sample] = site_samples(site, spec)
    usable = [s for s in samples if s.commutes is not None]
    if len(usable) < len(samples):
        notes.append(f"{len(samples) - len(usable)} domain states excluded (run-time error or blocked)")
    rows = [(features(atoms, s.env), bool(s.commutes)) for s in usable]
    use_solver = mode in ("solver", "both") and solver_available(cmd)
    if mode != "oracle" and not use_solver:
        notes.append("no SMT solver available; refinement uses the oracle only")
    phi, cubes = FALSE, []
    rounds = 0
    timed_out = False
    while True:
        rounds += 1
        cubes = learn(rows, len(atoms))
        phi = cubes_expr(cubes, atoms)
        if not use_solver or rounds > max_rounds:
            break
        if time.perf_counter() - t0 > timeout:
            timed_out = True
            notes.append("time budget exhausted during refinement")
            break
        sv = solver_check(site, phi, cmd=cmd, timeout=solver_timeout, completeness=False)
        if sv.status != "invalid":
            break
        if not (sv.faithful and sv.confirmed):
            notes.append("solver counterexample is not a real execution; keeping the domain-sound condition")
            break
        w = commutes_at(site.left, site.right, sv.witness)
        rows.append((features(atoms, sv.witness), bool(w.commutes)))
        notes.append(f"refined with counterexample {sv.witness}")
    verdict = verify_condition(site, phi, spec, "both" if use_solver else "oracle", cmd=cmd,
                               timeout=solver_timeout, samples=samples)
    if not verdict.valid and len(cubes) > 1:
        # a disjunction of sufficient conditions is sufficient: keep the cubes that verify
        kept = [c for c in cubes
                if verify_condition(site, cubes_expr([c], atoms), spec, "both" if use_solver else "oracle",
                                    cmd=cmd, timeout=solver_timeout, samples=samples).valid]
        notes.append(f"learned condition {print_expr(phi)} failed verification; kept {len(kept)} of "
                     f"{len(cubes)} disjuncts")
        cubes = kept
        phi = cubes_expr(cubes, atoms)
        verdict = verify_condition(site, phi, spec, "both" if use_solver else "oracle", cmd=cmd,
                                   timeout=solver_timeout, samples=samples)
    if not verdict.valid:
        notes.append(f"learned condition {print_expr(phi)} failed verification; falling back to false")
        cubes, phi = [], FALSE
        verdict = verify_condition(site, phi, spec, "oracle", samples=samples)
    domain_pos = [f for f, ok in rows[:len(usable)] if ok]
    weakest = all(any(_covers(c, f) for c in cubes) for f in domain_pos)
    return Inference(phi, print_expr(phi), verdict, len(atoms), len(rows), rounds, weakest, timed_out, notes)


__all__ = [
    "Inference",
    "cubes_expr",
    "features",
    "infer_condition",
    "learn",
    "learn_cover",
    "learn_cubes",
    "literal_expr",
    "pool_atoms",
    "pool_terms",
    "simplify",
]
