"""Runtime values, heap objects and the scoped state model.

A :class:`ScopedState` is a stack of variable frames (innermost first)
together with a single global heap and lock map.  Composition of states
(``left ⊕ right``) concatenates frames so that the left operand's frames
are inner; heap and locks are shared, never split.

States are treated as immutable: every update returns a new state and
copies only the frame or heap object that changed.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Iterable, Mapping

from .ast import (
    UNIT,
    ArrayT,
    BoolT,
    HashtableT,
    IntT,
    Ref,
    StringT,
    Type,
    Unit,
    UnitT,
)

INT_BITS = 64
_MASK = (1 << INT_BITS) - 1
_SIGN = 1 << (INT_BITS - 1)


class RuntimeFault(Exception):
    """A runtime error raised while reducing a term (unbound name, division by zero...)."""


class UnboundVariable(RuntimeFault):
    pass


def wrap(i: int) -> int:
    """Two's complement 64-bit wrap-around."""
    i &= _MASK
    return i - (1 << INT_BITS) if i & _SIGN else i


def default_value(ty: Type) -> Any:
    if isinstance(ty, IntT):
        return 0
    if isinstance(ty, BoolT):
        return False
    if isinstance(ty, StringT):
        return ""
    if isinstance(ty, UnitT):
        return UNIT
    raise RuntimeFault(f"no default value for type {ty}")


@dataclass(frozen=True)
class ArrayObj:
    elems: tuple
    elem_type: Type

    def get(self, i: int):
        if not 0 <= i < len(self.elems):
            raise RuntimeFault(f"array index {i} out of bounds (length {len(self.elems)})")
        return self.elems[i]

    def set(self, i: int, v) -> "ArrayObj":
        if not 0 <= i < len(self.elems):
            raise RuntimeFault(f"array index {i} out of bounds (length {len(self.elems)})")
        elems = list(self.elems)
        elems[i] = v
        return ArrayObj(tuple(elems), self.elem_type)


@dataclass(frozen=True)
class TableObj:
    """Finite map with sorted items; the key set and size are derived from it."""

    items: tuple
    key_type: Type
    val_type: Type

    @property
    def keys(self) -> frozenset:
        return frozenset(k for k, _ in self.items)

    @property
    def size(self) -> int:
        return len(self.items)

    def mem(self, k) -> bool:
        return any(kk == k for kk, _ in self.items)

    def get(self, k):
        for kk, v in self.items:
            if kk == k:
                return v
        return default_value(self.val_type)

    def put(self, k, v) -> "TableObj":
        d = dict(self.items)
        d[k] = v
        return TableObj(tuple(sorted(d.items())), self.key_type, self.val_type)

    @staticmethod
    def of(mapping: Mapping, key_type: Type, val_type: Type) -> "TableObj":
        return TableObj(tuple(sorted(mapping.items())), key_type, val_type)


HeapObj = ArrayObj | TableObj


def new_heap_object(ty: Type, length: int = 0) -> HeapObj:
    if isinstance(ty, ArrayT):
        if length < 0:
            raise RuntimeFault(f"negative array length {length}")
        return ArrayObj((default_value(ty.elem),) * length, ty.elem)
    if isinstance(ty, HashtableT):
        return TableObj((), ty.key, ty.val)
    raise RuntimeFault(f"cannot allocate {ty}")


def _frame_key(f: Mapping) -> tuple:
    return tuple(sorted(f.items()))


@dataclass(frozen=True)
class ScopedState:
    """Frames (innermost first), heap (location -> object) and held locks."""

    frames: tuple = ({},)
    heap: Mapping[int, HeapObj] = field(default_factory=dict)
    locks: frozenset = frozenset()
    next_loc: int = 0

    # -- variables ---------------------------------------------------------

    def _find(self, name: str) -> int:
        for i, f in enumerate(self.frames):
            if name in f:
                return i
        raise UnboundVariable(f"unbound variable '{name}'")

    def lookup(self, name: str):
        return self.frames[self._find(name)][name]

    def binds(self, name: str) -> bool:
        return any(name in f for f in self.frames)

    def update(self, name: str, value) -> "ScopedState":
        i = self._find(name)
        return self._with_frame(i, name, value)

    def declare(self, name: str, value) -> "ScopedState":
        if not self.frames:
            raise RuntimeFault("no frame to declare into")
        return self._with_frame(0, name, value)

    def _with_frame(self, i: int, name: str, value) -> "ScopedState":
        f = dict(self.frames[i])
        f[name] = value
        frames = self.frames[:i] + (f,) + self.frames[i + 1 :]
        return ScopedState(frames, self.heap, self.locks, self.next_loc)

    def push(self) -> "ScopedState":
        return ScopedState(({},) + self.frames, self.heap, self.locks, self.next_loc)

    def pop(self) -> "ScopedState":
        if len(self.frames) < 2:
            raise RuntimeFault("cannot pop the outermost frame")
        return ScopedState(self.frames[1:], self.heap, self.locks, self.next_loc)

    def with_frames(self, frames: tuple) -> "ScopedState":
        return ScopedState(tuple(frames), self.heap, self.locks, self.next_loc)

    def append(self, outer: "ScopedState") -> "ScopedState":
        """``self ⊕ outer``: self's frames become inner; heap and locks come from ``outer``."""
        return ScopedState(self.frames + outer.frames, outer.heap, outer.locks, outer.next_loc)

    # -- heap --------------------------------------------------------------

    def alloc(self, obj: HeapObj) -> tuple[Ref, "ScopedState"]:
        heap = dict(self.heap)
        loc = self.next_loc
        heap[loc] = obj
        return Ref(loc), ScopedState(self.frames, heap, self.locks, loc + 1)

    def deref(self, ref) -> HeapObj:
        if not isinstance(ref, Ref):
            raise RuntimeFault(f"expected a reference, got {ref!r}")
        try:
            return self.heap[ref.loc]
        except KeyError:
            raise RuntimeFault(f"dangling reference {ref!r}") from None

    def store(self, ref: Ref, obj: HeapObj) -> "ScopedState":
        heap = dict(self.heap)
        heap[ref.loc] = obj
        return ScopedState(self.frames, heap, self.locks, self.next_loc)

    # -- locks -------------------------------------------------------------

    def lock_held(self, n: int) -> bool:
        return n in self.locks

    def set_lock(self, n: int, held: bool) -> "ScopedState":
        locks = self.locks | {n} if held else self.locks - {n}
        return ScopedState(self.frames, self.heap, frozenset(locks), self.next_loc)

    # -- identity ----------------------------------------------------------

    def key(self) -> tuple:
        """Exact hashable identity (used for deduplication)."""
        return (
            tuple(_frame_key(f) for f in self.frames),
            tuple(sorted(self.heap.items())),
            tuple(sorted(self.locks)),
            self.next_loc,
        )

    def canonical(self) -> "CanonicalState":
        """Observable identity: bindings plus reachable heap, with locations renumbered."""
        return canonicalize(self)

    def __eq__(self, other):
        if not isinstance(other, ScopedState):
            return NotImplemented
        return self.key() == other.key()

    def __hash__(self):
        return hash(self.key())

    def __repr__(self) -> str:
        return f"ScopedState({format_frames(self)})"


@dataclass(frozen=True)
class CanonicalState:
    """A state with heap locations renumbered in reachability order.

    Two states are observably equal exactly when their canonical forms are.
    """

    frames: tuple  # tuple of tuple(sorted (name, cvalue))
    heap: tuple  # tuple of canonical heap objects, index = canonical location
    locks: tuple = ()

    def bindings(self) -> dict:
        """Flattened name -> value view with inner frames shadowing outer ones."""
        out: dict = {}
        for f in reversed(self.frames):
            out.update(dict(f))
        return out

    def render(self) -> list[str]:
        """Sorted ``name=value`` lines with heap objects expanded."""
        lines = []
        for name, v in sorted(self.bindings().items()):
            lines.append(f"{name}={render_value(v, self.heap)}")
        return lines

    def to_json(self) -> dict:
        return {name: json_value(v, self.heap) for name, v in sorted(self.bindings().items())}


def canonicalize(state: ScopedState, names: Iterable[str] | None = None) -> CanonicalState:
    remap: dict[int, int] = {}
    order: list[int] = []

    def visit(v):
        if isinstance(v, Ref):
            if v.loc not in remap:
                remap[v.loc] = len(order)
                order.append(v.loc)
                obj = state.heap.get(v.loc)
                if isinstance(obj, ArrayObj):
                    for e in obj.elems:
                        visit(e)
                elif isinstance(obj, TableObj):
                    for k, e in obj.items:
                        visit(k)
                        visit(e)
            return Ref(remap[v.loc])
        return v

    keep = None if names is None else set(names)
    frames = []
    for f in state.frames:
        items = []
        for name, v in sorted(f.items()):
            if keep is not None and name not in keep:
                continue
            items.append((name, visit(v)))
        frames.append(tuple(items))
    heap = []
    for loc in order:
        obj = state.heap.get(loc)
        if isinstance(obj, ArrayObj):
            heap.append(("array", tuple(visit(e) for e in obj.elems)))
        elif isinstance(obj, TableObj):
            heap.append(("table", tuple((visit(k), visit(e)) for k, e in obj.items)))
        else:
            heap.append(("dangling",))
    return CanonicalState(tuple(frames), tuple(heap), tuple(sorted(state.locks)))


def render_value(v, heap: tuple = ()) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, int):
        return str(v)
    if isinstance(v, str):
        return '"' + v.replace("\\", "\\\\").replace('"', '\\"') + '"'
    if isinstance(v, Unit):
        return "()"
    if isinstance(v, Ref):
        if v.loc < len(heap):
            obj = heap[v.loc]
            if obj[0] == "array":
                return "[" + ", ".join(render_value(e, heap) for e in obj[1]) + "]"
            if obj[0] == "table":
                return "{" + ", ".join(f"{render_value(k, heap)}: {render_value(e, heap)}" for k, e in obj[1]) + "}"
        return repr(v)
    return repr(v)


def json_value(v, heap: tuple = ()):
    if isinstance(v, (bool, int, str)):
        return v
    if isinstance(v, Unit):
        return None
    if isinstance(v, Ref) and v.loc < len(heap):
        obj = heap[v.loc]
        if obj[0] == "array":
            return [json_value(e, heap) for e in obj[1]]
        if obj[0] == "table":
            return {render_value(k, heap): json_value(e, heap) for k, e in obj[1]}
    return repr(v)


def format_frames(state: ScopedState) -> str:
    return " ⊕ ".join("{" + ", ".join(f"{k}↦{v!r}" for k, v in sorted(f.items())) + "}" for f in state.frames)


def state_from_bindings(bindings: Mapping[str, Any], tables: Mapping[str, TableObj] | None = None) -> ScopedState:
    """Single-frame state; ``tables`` are allocated on the heap in name order."""
    st = ScopedState(({},))
    frame = dict(bindings)
    for name in sorted(tables or {}):
        ref, st = st.alloc(tables[name])
        frame[name] = ref
    return st.with_frames((frame,))
