"""Pretty-printer producing source that parses back to the same AST."""

from __future__ import annotations

from .ast import (
    Assign,
    Assume,
    Binop,
    Call,
    Commute,
    Const,
    Decl,
    Deref,
    Expr,
    Field,
    Havoc,
    If,
    Index,
    Lock,
    NewArray,
    NewHashtable,
    Old,
    Pop,
    Program,
    Push,
    Ref,
    Scope,
    Seq,
    Skip,
    Stmt,
    Ternary,
    Unit,
    Unlock,
    Unop,
    Var,
    While,
)

INDENT = "  "


def print_const(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, int):
        return str(v)
    if isinstance(v, str):
        return '"' + v.replace("\\", "\\\\").replace('"', '\\"').replace("\n", "\\n").replace("\t", "\\t") + '"'
    if isinstance(v, Unit):
        return "()"
    if isinstance(v, Ref):
        return repr(v)
    raise TypeError(f"cannot print constant {v!r}")


def _atomic(e: Expr) -> bool:
    return not isinstance(e, (Binop, Ternary, Unop)) and not (isinstance(e, Const) and isinstance(e.value, int)
                                                               and not isinstance(e.value, bool) and e.value < 0)


def print_expr(e: Expr) -> str:
    if isinstance(e, Const):
        return print_const(e.value)
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Old):
        return f"old({e.name})"
    if isinstance(e, Deref):
        return f"*{_paren(e.expr)}"
    if isinstance(e, Index):
        return f"{_paren(e.base)}[{print_expr(e.index)}]"
    if isinstance(e, Field):
        return f"{_paren(e.expr)}.{e.name}"
    if isinstance(e, Call):
        return f"{e.fname}({', '.join(print_expr(a) for a in e.args)})"
    if isinstance(e, NewArray):
        return f"new {e.elem}[{print_expr(e.length)}]"
    if isinstance(e, NewHashtable):
        return f"new hashtable[{e.key},{e.val}]"
    if isinstance(e, Unop):
        inner = e.expr
        if e.op == "-" and isinstance(inner, Const) and isinstance(inner.value, int) and not isinstance(inner.value, bool):
            # keep `-(3)` distinct from the literal `-3`
            return f"-({print_expr(inner)})"
        return f"{e.op}{_paren(inner)}"
    if isinstance(e, Binop):
        return f"{_paren(e.left)} {e.op} {_paren(e.right)}"
    if isinstance(e, Ternary):
        return f"{_paren(e.cond)} ? {_paren(e.then)} : {_paren(e.els)}"
    raise TypeError(f"cannot print expression {e!r}")


def _paren(e: Expr) -> str:
    s = print_expr(e)
    return s if _atomic(e) else f"({s})"


def _stmt_lines(s: Stmt, depth: int) -> list[str]:
    """Lines for a statement list (right-nested Seq), indented at ``depth``."""
    pad = INDENT * depth
    out: list[str] = []
    cur = s
    while isinstance(cur, Seq):
        first = cur.first
        if isinstance(first, Seq):
            out.append(pad + "{")
            out.extend(_stmt_lines(first, depth + 1))
            out.append(pad + "}")
        else:
            out.extend(_single(first, depth))
        cur = cur.second
    if isinstance(cur, Seq):  # pragma: no cover - loop exits on non-Seq
        raise AssertionError
    out.extend(_single(cur, depth))
    return out


def _block(s: Stmt, depth: int) -> list[str]:
    if isinstance(s, Skip):
        return [INDENT * (depth + 1) + "skip;"]
    return _stmt_lines(s, depth + 1)


def _single(s: Stmt, depth: int) -> list[str]:
    pad = INDENT * depth
    if isinstance(s, Skip):
        return [pad + "skip;"]
    if isinstance(s, Assign):
        return [pad + f"{print_expr(s.lval)} = {print_expr(s.expr)};"]
    if isinstance(s, Decl):
        return [pad + f"{s.type} {s.name} = {print_expr(s.expr)};"]
    if isinstance(s, If):
        lines = [pad + f"if ({print_expr(s.cond)}) {{"]
        lines += _block(s.then, depth)
        if isinstance(s.els, Skip):
            lines.append(pad + "}")
        else:
            lines.append(pad + "} else {")
            lines += _block(s.els, depth)
            lines.append(pad + "}")
        return lines
    if isinstance(s, While):
        lines = []
        if s.summary is not None:
            mods = ",".join(s.summary.modifies)
            lines.append(pad + f"// @summary modifies {mods}: {print_expr(s.summary.relation)}")
        lines.append(pad + f"while ({print_expr(s.cond)}) {{")
        lines += _block(s.body, depth)
        lines.append(pad + "}")
        return lines
    if isinstance(s, Commute):
        guard = "_" if s.guard is None else f"({print_expr(s.guard)})"
        lines = [pad + f"{s.alias} {guard} {{"]
        for frag in (s.left, s.right):
            lines.append(pad + INDENT + "{")
            lines += _block(frag, depth + 1)
            lines.append(pad + INDENT + "}")
        lines.append(pad + "}")
        return lines
    if isinstance(s, Lock):
        return [pad + f"lock({print_expr(s.expr)});"]
    if isinstance(s, Unlock):
        return [pad + f"unlock({print_expr(s.expr)});"]
    if isinstance(s, Havoc):
        return [pad + f"havoc {', '.join(s.names)};"]
    if isinstance(s, Assume):
        return [pad + f"assume({print_expr(s.expr)});"]
    if isinstance(s, Scope):
        return [pad + "scope {"] + _block(s.body, depth) + [pad + "}"]
    if isinstance(s, Push):
        return [pad + "push_scope;"]
    if isinstance(s, Pop):
        return [pad + "pop_scope;"]
    if isinstance(s, Seq):
        return [pad + "{"] + _stmt_lines(s, depth + 1) + [pad + "}"]
    raise TypeError(f"cannot print statement {s!r}")


def print_stmt(s: Stmt, depth: int = 0) -> str:
    return "\n".join(_stmt_lines(s, depth)) + "\n"


def print_program(p: Program) -> str:
    head = []
    for name, text in p.pragmas.items():
        head.append(f"// @{name} {text}")
    body = print_stmt(p.body)
    return ("\n".join(head) + "\n" if head else "") + body
