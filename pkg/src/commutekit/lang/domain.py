"""Finite input domains and initial states.

Domain mini-language (comma separated)::

    x:int[-2..2], b:bool, s:int{1,5}, name:string{"a","b"},
    t:table(int[0..1]->int[0..1]), a:array(int[0..1],2)

Tables draw up to ``MAX_TABLE_KEYS`` keys from the key range.  The
initial-state pragma uses ``x=1, b=true, t={0:1}, a=[0,1]``.
"""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass
from typing import Iterable, Iterator, Mapping

from .ast import BOOL, INT, STRING, ArrayT, BoolT, HashtableT, IntT, StringT, Type
from .state import ArrayObj, ScopedState, TableObj, default_value

MAX_TABLE_KEYS = 2
DEFAULT_INT_RANGE = (-2, 2)


class DomainError(ValueError):
    pass


@dataclass(frozen=True)
class VarDomain:
    name: str
    type: Type
    values: tuple  # scalars, or TableObj/ArrayObj prototypes

    def __len__(self) -> int:
        return len(self.values)


def split_top(text: str, sep: str = ",") -> list[str]:
    """Split on ``sep`` outside brackets, braces, parentheses and strings."""
    out, depth, cur, in_str = [], 0, [], False
    i = 0
    while i < len(text):
        ch = text[i]
        if in_str:
            cur.append(ch)
            if ch == "\\" and i + 1 < len(text):
                cur.append(text[i + 1])
                i += 1
            elif ch == '"':
                in_str = False
        elif ch == '"':
            in_str = True
            cur.append(ch)
        elif ch in "([{":
            depth += 1
            cur.append(ch)
        elif ch in ")]}":
            depth -= 1
            cur.append(ch)
        elif ch == sep and depth == 0:
            out.append("".join(cur).strip())
            cur = []
        else:
            cur.append(ch)
        i += 1
    tail = "".join(cur).strip()
    if tail:
        out.append(tail)
    return [p for p in out if p]


_RANGE = re.compile(r"^(int|bool|string)\s*(?:\[\s*(-?\d+)\s*\.\.\s*(-?\d+)\s*\]|\{(.*)\})?$", re.DOTALL)


def _scalar(text: str) -> tuple[Type, tuple]:
    m = _RANGE.match(text.strip())
    if not m:
        raise DomainError(f"bad scalar domain '{text}'")
    kind, lo, hi, items = m.groups()
    if kind == "bool":
        if lo is not None:
            raise DomainError("bool domains take no range")
        vals = tuple(parse_value(x) for x in split_top(items)) if items is not None else (False, True)
        return BOOL, vals
    if kind == "string":
        if items is None:
            return STRING, ("",)
        return STRING, tuple(parse_value(x) for x in split_top(items))
    if lo is not None:
        lo_i, hi_i = int(lo), int(hi)
        if lo_i > hi_i:
            raise DomainError(f"empty range in '{text}'")
        return INT, tuple(range(lo_i, hi_i + 1))
    if items is not None:
        vals = tuple(parse_value(x) for x in split_top(items))
        if not all(isinstance(v, int) and not isinstance(v, bool) for v in vals):
            raise DomainError(f"non-integer in '{text}'")
        return INT, vals
    return INT, tuple(range(DEFAULT_INT_RANGE[0], DEFAULT_INT_RANGE[1] + 1))


def all_tables(key_t: Type, keys: tuple, val_t: Type, vals: tuple, max_keys: int = MAX_TABLE_KEYS) -> tuple:
    out = []
    for n in range(0, min(max_keys, len(keys)) + 1):
        for ks in itertools.combinations(sorted(keys), n):
            for vs in itertools.product(vals, repeat=n):
                out.append(TableObj.of(dict(zip(ks, vs)), key_t, val_t))
    return tuple(out)


def parse_var_domain(name: str, text: str) -> VarDomain:
    text = text.strip()
    m = re.match(r"^table\s*\((.*)->(.*)\)$", text, re.DOTALL)
    if m:
        kt, ks = _scalar(m.group(1))
        vt, vs = _scalar(m.group(2))
        return VarDomain(name, HashtableT(kt, vt), all_tables(kt, ks, vt, vs))
    m = re.match(r"^array\s*\((.*),\s*(\d+)\s*\)$", text, re.DOTALL)
    if m:
        et, es = _scalar(m.group(1))
        n = int(m.group(2))
        vals = tuple(ArrayObj(tuple(p), et) for p in itertools.product(es, repeat=n))
        return VarDomain(name, ArrayT(et), vals)
    ty, vals = _scalar(text)
    return VarDomain(name, ty, vals)


def parse_domain(text: str | None) -> dict[str, VarDomain]:
    out: dict[str, VarDomain] = {}
    if not text:
        return out
    for part in split_top(text):
        if ":" not in part:
            raise DomainError(f"expected 'name:domain', got '{part}'")
        name, spec = part.split(":", 1)
        name = name.strip()
        if not re.match(r"^[A-Za-z_][A-Za-z0-9_]*$", name):
            raise DomainError(f"bad variable name '{name}'")
        out[name] = parse_var_domain(name, spec)
    return out


def default_domain(name: str, ty: Type) -> VarDomain:
    if isinstance(ty, IntT):
        return VarDomain(name, ty, tuple(range(DEFAULT_INT_RANGE[0], DEFAULT_INT_RANGE[1] + 1)))
    if isinstance(ty, BoolT):
        return VarDomain(name, ty, (False, True))
    if isinstance(ty, StringT):
        return VarDomain(name, ty, ("", "a"))
    if isinstance(ty, HashtableT):
        return VarDomain(name, ty, all_tables(ty.key, _small(ty.key), ty.val, _small(ty.val)))
    if isinstance(ty, ArrayT):
        es = _small(ty.elem)
        return VarDomain(name, ty, tuple(ArrayObj(tuple(p), ty.elem) for p in itertools.product(es, repeat=2)))
    raise DomainError(f"no default domain for type {ty}")


def _small(ty: Type) -> tuple:
    if isinstance(ty, BoolT):
        return (False, True)
    if isinstance(ty, StringT):
        return ("", "a")
    return (0, 1)


def parse_value(text: str):
    t = text.strip()
    if t == "true":
        return True
    if t == "false":
        return False
    if re.match(r"^-?\d+$", t):
        return int(t)
    if len(t) >= 2 and t[0] == '"' and t[-1] == '"':
        return re.sub(r"\\(.)", lambda m: m.group(1), t[1:-1])
    raise DomainError(f"bad value '{text}'")


def _value_type(v) -> Type:
    if isinstance(v, bool):
        return BOOL
    if isinstance(v, int):
        return INT
    if isinstance(v, str):
        return STRING
    raise DomainError(f"unsupported value {v!r}")


def parse_init(text: str | None, types: Mapping[str, Type] | None = None) -> dict[str, object]:
    """``x=1, t={0:1}, a=[0,1]`` -> name -> scalar / TableObj / ArrayObj."""
    out: dict[str, object] = {}
    if not text:
        return out
    types = types or {}
    for part in split_top(text):
        if "=" not in part:
            raise DomainError(f"expected 'name=value', got '{part}'")
        name, val = part.split("=", 1)
        name, val = name.strip(), val.strip()
        ty = types.get(name)
        if val.startswith("{"):
            items = split_top(val[1:-1])
            d = {}
            for it in items:
                k, v = it.split(":", 1)
                d[parse_value(k)] = parse_value(v)
            if isinstance(ty, HashtableT):
                kt, vt = ty.key, ty.val
            else:
                kt = _value_type(next(iter(d))) if d else INT
                vt = _value_type(next(iter(d.values()))) if d else INT
            out[name] = TableObj.of(d, kt, vt)
        elif val.startswith("["):
            elems = tuple(parse_value(x) for x in split_top(val[1:-1]))
            et = ty.elem if isinstance(ty, ArrayT) else (_value_type(elems[0]) if elems else INT)
            out[name] = ArrayObj(elems, et)
        else:
            out[name] = parse_value(val)
        if ty is not None and value_type(out[name]) != ty:
            raise DomainError(f"initial value of '{name}' does not have type {ty}")
    return out


def value_type(v) -> Type:
    if isinstance(v, TableObj):
        return HashtableT(v.key_type, v.val_type)
    if isinstance(v, ArrayObj):
        return ArrayT(v.elem_type)
    return _value_type(v)


def build_state(assignment: Mapping[str, object]) -> ScopedState:
    """Single-frame state; heap objects are allocated in sorted name order."""
    st = ScopedState(({},))
    frame = {}
    for name in sorted(assignment):
        v = assignment[name]
        if isinstance(v, (TableObj, ArrayObj)):
            ref, st = st.alloc(v)
            frame[name] = ref
        else:
            frame[name] = v
    return st.with_frames((frame,))


@dataclass
class InputSpec:
    """Program inputs: per-variable domains plus the written initial state."""

    domains: dict[str, VarDomain]
    init: dict[str, object]

    @property
    def types(self) -> dict[str, Type]:
        t = {n: d.type for n, d in self.domains.items()}
        for n, v in self.init.items():
            t.setdefault(n, value_type(v))
        return t

    def initial_assignment(self) -> dict[str, object]:
        out: dict[str, object] = {}
        for n, d in self.domains.items():
            out[n] = self.init[n] if n in self.init else _default_of(d)
        for n, v in self.init.items():
            out.setdefault(n, v)
        return out

    def initial_state(self) -> ScopedState:
        return build_state(self.initial_assignment())

    def assignments(self, names: Iterable[str] | None = None) -> Iterator[dict[str, object]]:
        """All combinations over the domain (restricted to ``names`` when given).

        Variables outside ``names`` keep their initial value.
        """
        base = self.initial_assignment()
        vary = sorted(self.domains if names is None else (n for n in names if n in self.domains))
        pools = [self.domains[n].values for n in vary]
        for combo in itertools.product(*pools):
            a = dict(base)
            a.update(zip(vary, combo))
            yield a

    def states(self, names: Iterable[str] | None = None) -> Iterator[ScopedState]:
        for a in self.assignments(names):
            yield build_state(a)

    def size(self, names: Iterable[str] | None = None) -> int:
        vary = self.domains if names is None else [n for n in names if n in self.domains]
        n = 1
        for v in vary:
            n *= len(self.domains[v])
        return n


def _default_of(d: VarDomain):
    if isinstance(d.type, HashtableT):
        return TableObj((), d.type.key, d.type.val)
    if isinstance(d.type, ArrayT):
        return d.values[0] if d.values else ArrayObj((), d.type.elem)
    v = default_value(d.type)
    return v if v in d.values or not d.values else d.values[0]


def input_spec(domain_text: str | None, init_text: str | None) -> InputSpec:
    domains = parse_domain(domain_text)
    init = parse_init(init_text, {n: d.type for n, d in domains.items()})
    return InputSpec(domains, init)
