"""Minimal S-expression construction, printing and parsing for SMT-LIB."""

from __future__ import annotations

import re
from typing import Union

SExp = Union[str, list, tuple]

_SIMPLE = re.compile(r"^[A-Za-z~!@$%^&*_+=<>.?/-][A-Za-z0-9~!@$%^&*_+=<>.?/-]*$")


def sym(name: str) -> str:
    """Quote a symbol unless it is a plain SMT-LIB simple symbol."""
    if _SIMPLE.match(name) and "!" not in name and "@" not in name:
        return name
    if "|" in name or "\\" in name:
        raise ValueError(f"cannot quote symbol {name!r}")
    return f"|{name}|"


def num(n: int) -> SExp:
    return str(n) if n >= 0 else ["-", str(-n)]


def string_lit(s: str) -> str:
    return '"' + s.replace('"', '""') + '"'


def render(x: SExp) -> str:
    if isinstance(x, str):
        return x
    return "(" + " ".join(render(y) for y in x) + ")"


def pretty(x: SExp, indent: int = 0, width: int = 100) -> str:
    flat = render(x)
    if isinstance(x, str) or len(flat) + indent <= width:
        return flat
    pad = " " * (indent + 2)
    head = render(x[0]) if x else ""
    if head in ("let", "exists") and len(x) == 3:
        # binder chains stay flat instead of drifting right
        return "(" + head + " " + render(x[1]) + "\n" + " " * indent + pretty(x[2], indent, width) + ")"
    parts = [pretty(y, indent + 2, width) for y in x[1:]]
    return "(" + head + "".join("\n" + pad + p for p in parts) + ")"


_TOKEN = re.compile(r'\s*(?:(\()|(\))|(\|[^|]*\|)|("(?:[^"]|"")*")|([^\s()|"]+))')


def parse_all(text: str) -> list:
    """Parse a sequence of S-expressions; atoms stay strings (quotes kept)."""
    out: list = []
    stack: list[list] = []
    pos = 0
    text = re.sub(r";[^\n]*", "", text)
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            if text[pos:].strip() == "":
                break
            raise ValueError(f"cannot parse S-expression near {text[pos:pos + 30]!r}")
        pos = m.end()
        lp, rp, quoted, strlit, atom = m.groups()
        if lp:
            stack.append([])
        elif rp:
            if not stack:
                raise ValueError("unbalanced ')'")
            done = stack.pop()
            (stack[-1] if stack else out).append(done)
        else:
            tok = quoted or strlit or atom
            (stack[-1] if stack else out).append(tok)
    if stack:
        raise ValueError("unbalanced '('")
    return out


def to_int(x: SExp) -> int:
    """Decode an SMT integer literal such as ``5`` or ``(- 5)``."""
    if isinstance(x, str):
        return int(x)
    if len(x) == 2 and x[0] == "-":
        return -to_int(x[1])
    raise ValueError(f"not an integer literal: {render(x)}")


def to_value(x: SExp):
    if x == "true":
        return True
    if x == "false":
        return False
    if isinstance(x, str) and x.startswith('"'):
        return x[1:-1].replace('""', '"')
    return to_int(x)
