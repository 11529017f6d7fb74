"""Hypothesis strategies producing small well-typed ``.vcy`` programs."""

from __future__ import annotations

from hypothesis import strategies as st

VARS = ("x", "y", "z")
HEADER = "// @domain x:int[0..1], y:int[0..1], z:int[-1..0]\n// @init x=1, y=0, z=0\n"


def atoms():
    return st.one_of(st.sampled_from(VARS), st.integers(-2, 2).map(str))


def int_exprs(depth: int = 2):
    if depth == 0:
        return atoms()
    sub = int_exprs(depth - 1)
    return st.one_of(
        atoms(),
        st.tuples(sub, st.sampled_from(["+", "-", "*"]), sub).map(lambda t: f"({t[0]} {t[1]} {t[2]})"),
    )


def bool_exprs():
    cmp = st.tuples(int_exprs(1), st.sampled_from(["==", "!=", "<", "<=", ">", ">="]), int_exprs(1))
    base = cmp.map(lambda t: f"{t[0]} {t[1]} {t[2]}")
    return st.one_of(
        st.sampled_from(["true", "false"]),
        base,
        st.tuples(base, st.sampled_from(["&&", "||"]), base).map(lambda t: f"({t[0]}) {t[1]} ({t[2]})"),
    )


def stmts(depth: int = 2, commute: bool = True):
    assign = st.tuples(st.sampled_from(VARS), int_exprs()).map(lambda t: f"{t[0]} = {t[1]};")
    if depth == 0:
        return assign
    sub = st.lists(stmts(depth - 1, commute), min_size=1, max_size=2).map(" ".join)
    options = [
        assign,
        st.tuples(bool_exprs(), sub, sub).map(lambda t: f"if ({t[0]}) {{ {t[1]} }} else {{ {t[2]} }}"),
    ]
    if commute:
        options.append(
            st.tuples(bool_exprs(), sub, sub).map(lambda t: f"commute ({t[0]}) {{ {{ {t[1]} }} {{ {t[2]} }} }}")
        )
    return st.one_of(*options)


def programs(depth: int = 2):
    """Source text of a program with at least one commute block."""
    body = st.lists(stmts(depth), min_size=0, max_size=2).map(" ".join)
    site = st.tuples(bool_exprs(), stmts(depth - 1), stmts(depth - 1)).map(
        lambda t: f"commute ({t[0]}) {{ {{ {t[1]} }} {{ {t[2]} }} }}"
    )
    return st.tuples(body, site, body).map(lambda t: HEADER + "\n".join(t) + "\n")
