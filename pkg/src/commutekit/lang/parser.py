"""Lexer and recursive-descent parser for ``.vcy`` source files.

Besides plain statements the parser handles:

* header pragmas written as comments: ``// @domain ...``, ``// @init ...``;
* loop summaries ``// @summary modifies x,y: <expr>`` attached to the next ``while``;
* top-level function definitions, inlined at each call site.  A call to a
  user function must be the whole right-hand side of an assignment or a
  declaration; the body is placed in a fresh ``scope`` with renamed locals.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .ast import (
    BOOL,
    BUILTINS,
    INT,
    SKIP,
    STRING,
    UNIT,
    UNIT_T,
    ArrayT,
    Assign,
    Assume,
    Binop,
    Call,
    Commute,
    Const,
    Decl,
    Expr,
    Field,
    HashtableT,
    Havoc,
    If,
    Index,
    Lock,
    LoopSummary,
    NewArray,
    NewHashtable,
    Old,
    POP,
    PUSH,
    Program,
    Scope,
    Seq,
    Skip,
    Stmt,
    Ternary,
    Type,
    Unlock,
    Unop,
    Var,
    While,
    check_container_type,
    map_expr,
    map_stmt,
    seq,
)
from .state import default_value

INT_MIN = -(1 << 63)
INT_MAX = (1 << 63) - 1


class ParseError(Exception):
    """Syntax error(s); ``errors`` holds ``(line, col, message)`` triples."""

    def __init__(self, errors):
        self.errors = list(errors)
        line, col, msg = self.errors[0]
        super().__init__(f"{line}:{col}: {msg}")


@dataclass
class Token:
    kind: str  # INT STRING IDENT KW OP PRAGMA EOF
    text: str
    line: int
    col: int
    value: object = None


KEYWORDS = {
    "int", "bool", "string", "unit", "hashtable", "true", "false", "skip", "if", "else",
    "while", "for", "commute", "commute_seq", "commute_par", "lock", "unlock", "havoc",
    "assume", "new", "return", "scope", "push_scope", "pop_scope",
}

_OPS = sorted(
    [":=", "==", "!=", "<=", ">=", "&&", "||", "{", "}", "(", ")", "[", "]", ";", ",", ":", "?", ".",
     "=", "<", ">", "+", "-", "*", "/", "%", "!"],
    key=len,
    reverse=True,
)

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r\n]+)
  | (?P<pragma>//[ \t]*@(?P<pname>[A-Za-z_]+)[ \t]*(?P<ptext>[^\n]*))
  | (?P<lcomment>//[^\n]*)
  | (?P<bcomment>/\*.*?\*/)
  | (?P<int>[0-9]+)
  | (?P<string>"(?:[^"\\\n]|\\.)*")
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op>""" + "|".join(re.escape(o) for o in _OPS) + r""")
    """,
    re.VERBOSE | re.DOTALL,
)


def tokenize(src: str) -> list[Token]:
    toks: list[Token] = []
    pos, line, col = 0, 1, 1
    while pos < len(src):
        m = _TOKEN_RE.match(src, pos)
        if not m:
            raise ParseError([(line, col, f"unexpected character {src[pos]!r}")])
        text = m.group(0)
        if m.group("pragma") is not None:
            toks.append(Token("PRAGMA", text, line, col, (m.group("pname"), m.group("ptext").strip())))
        elif m.group("int") is not None:
            toks.append(Token("INT", text, line, col, int(text)))
        elif m.group("string") is not None:
            body = text[1:-1]
            value = re.sub(r"\\(.)", lambda mm: {"n": "\n", "t": "\t"}.get(mm.group(1), mm.group(1)), body)
            toks.append(Token("STRING", text, line, col, value))
        elif m.group("ident") is not None:
            toks.append(Token("KW" if text in KEYWORDS else "IDENT", text, line, col))
        elif m.group("op") is not None:
            toks.append(Token("OP", text, line, col))
        # whitespace and comments are dropped
        nl = text.count("\n")
        if nl:
            line += nl
            col = len(text) - text.rfind("\n")
        else:
            col += len(text)
        pos = m.end()
    toks.append(Token("EOF", "", line, col))
    return toks


@dataclass
class FunctionDef:
    ret: Type
    name: str
    params: list  # (Type, name)
    body: Stmt
    ret_expr: Expr
    line: int
    col: int


@dataclass
class _UserCall(Expr):
    """Placeholder for a user function call before inlining."""

    fname: str
    args: tuple
    line: int = 0
    col: int = 0

    def __hash__(self):
        return id(self)


_BINARY_LEVELS = [
    ("||",),
    ("&&",),
    ("==", "!="),
    ("<", "<=", ">", ">="),
    ("+", "-"),
    ("*", "/", "%"),
]


class Parser:
    def __init__(self, src: str):
        self.toks = tokenize(src)
        self.i = 0
        self.pragmas: dict[str, str] = {}
        self.functions: dict[str, FunctionDef] = {}

    # -- token helpers ------------------------------------------------------

    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def peek(self, k: int = 1) -> Token:
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def error(self, msg: str, tok: Token | None = None):
        t = tok or self.tok
        raise ParseError([(t.line, t.col, msg)])

    def at(self, text: str) -> bool:
        t = self.tok
        return t.kind in ("OP", "KW") and t.text == text

    def accept(self, text: str) -> bool:
        if self.at(text):
            self.i += 1
            return True
        return False

    def expect(self, text: str) -> Token:
        if not self.at(text):
            found = self.tok.text or "end of input"
            self.error(f"expected '{text}', found '{found}'")
        t = self.tok
        self.i += 1
        return t

    def ident(self) -> str:
        t = self.tok
        if t.kind != "IDENT":
            self.error(f"expected identifier, found '{t.text or 'end of input'}'")
        self.i += 1
        return t.text

    def skip_pragmas(self) -> tuple | None:
        """Consume pragma tokens; header pragmas are recorded, a summary is returned."""
        summary = None
        while self.tok.kind == "PRAGMA":
            name, text = self.tok.value
            if name == "summary":
                summary = (self.tok, text)
            else:
                if name in self.pragmas:
                    self.pragmas[name] += ", " + text
                else:
                    self.pragmas[name] = text
            self.i += 1
        return summary

    # -- types ----------------------------------------------------------------

    def at_type(self) -> bool:
        return self.tok.kind == "KW" and self.tok.text in ("int", "bool", "string", "unit", "hashtable")

    def parse_type(self) -> Type:
        t = self.tok
        if self.accept("int"):
            ty: Type = INT
        elif self.accept("bool"):
            ty = BOOL
        elif self.accept("string"):
            ty = STRING
        elif self.accept("unit"):
            ty = UNIT_T
        elif self.accept("hashtable"):
            self.expect("[")
            k = self.parse_type()
            self.expect(",")
            v = self.parse_type()
            self.expect("]")
            ty = HashtableT(k, v)
        else:
            self.error(f"expected a type, found '{t.text}'")
        while self.at("[") and self.peek().kind == "OP" and self.peek().text == "]":
            self.i += 2
            ty = ArrayT(ty)
        try:
            check_container_type(ty)
        except ValueError as e:
            self.error(str(e), t)
        return ty

    # -- program ------------------------------------------------------------

    def parse_program(self) -> Program:
        items: list[Stmt] = []
        while True:
            summary = self.skip_pragmas()
            if self.tok.kind == "EOF":
                if summary:
                    self.error("@summary must precede a while loop", summary[0])
                break
            if self.at_type() and self._looks_like_function():
                if summary:
                    self.error("@summary must precede a while loop", summary[0])
                self.parse_function()
                continue
            items.append(self.parse_stmt(summary))
        body = seq(*items)
        body = self.inline(body)
        return Program(body, self.pragmas.get("domain"), self.pragmas.get("init"), dict(self.pragmas))

    def _looks_like_function(self) -> bool:
        save = self.i
        try:
            self.parse_type()
            ok = self.tok.kind == "IDENT" and self.peek().kind == "OP" and self.peek().text == "("
        except ParseError:
            ok = False
        self.i = save
        return ok

    def parse_function(self) -> None:
        start = self.tok
        ret = self.parse_type()
        name = self.ident()
        if name in BUILTINS:
            self.error(f"cannot redefine builtin '{name}'", start)
        if name in self.functions:
            self.error(f"duplicate function '{name}'", start)
        self.expect("(")
        params = []
        if not self.at(")"):
            while True:
                pt = self.parse_type()
                params.append((pt, self.ident()))
                if not self.accept(","):
                    break
        self.expect(")")
        self.expect("{")
        items = []
        ret_expr = None
        while not self.at("}"):
            summary = self.skip_pragmas()
            if self.at("return"):
                self.i += 1
                ret_expr = Const(UNIT) if self.at(";") else self.parse_expr()
                self.expect(";")
                if not self.at("}"):
                    self.error("return must be the last statement of a function")
                break
            items.append(self.parse_stmt(summary))
        self.expect("}")
        if ret_expr is None:
            if ret != UNIT_T:
                self.error(f"function '{name}' must end with a return statement", start)
            ret_expr = Const(UNIT)
        self.functions[name] = FunctionDef(ret, name, params, seq(*items), ret_expr, start.line, start.col)

    # -- statements -----------------------------------------------------------

    def parse_block(self) -> Stmt:
        """``{ stmt* }`` as a statement sequence (no new scope)."""
        self.expect("{")
        items = []
        while True:
            summary = self.skip_pragmas()
            if self.at("}"):
                if summary:
                    self.error("@summary must precede a while loop", summary[0])
                break
            if self.tok.kind == "EOF":
                self.error("unterminated block")
            items.append(self.parse_stmt(summary))
        self.expect("}")
        return seq(*items)

    def parse_body(self) -> Stmt:
        """Branch or loop body: a braced block or a single statement."""
        if self.at("{"):
            return self.parse_block()
        summary = self.skip_pragmas()
        return self.parse_stmt(summary)

    def parse_stmt(self, summary=None) -> Stmt:
        t = self.tok
        if summary is not None and not self.at("while"):
            self.error("@summary must precede a while loop", summary[0])
        if self.at("{"):
            return self.parse_block()
        if self.accept("skip"):
            self.expect(";")
            return SKIP
        if self.accept("push_scope"):
            self.expect(";")
            return PUSH
        if self.accept("pop_scope"):
            self.expect(";")
            return POP
        if self.accept("scope"):
            return Scope(self.parse_block())
        if self.accept("if"):
            self.expect("(")
            cond = self.parse_expr()
            self.expect(")")
            then = self.parse_body()
            els: Stmt = SKIP
            if self.accept("else"):
                els = self.parse_body()
            return If(cond, then, els)
        if self.accept("while"):
            self.expect("(")
            cond = self.parse_expr()
            self.expect(")")
            body = self.parse_body()
            summ = None
            if summary is not None:
                summ = self.parse_summary(*summary)
            return While(cond, body, summ)
        if self.accept("for"):
            return self.parse_for()
        if t.kind == "KW" and t.text in ("commute", "commute_seq", "commute_par"):
            return self.parse_commute()
        if self.accept("lock"):
            self.expect("(")
            e = self.parse_expr()
            self.expect(")")
            self.expect(";")
            return Lock(e)
        if self.accept("unlock"):
            self.expect("(")
            e = self.parse_expr()
            self.expect(")")
            self.expect(";")
            return Unlock(e)
        if self.accept("havoc"):
            names = [self.ident()]
            while self.accept(","):
                names.append(self.ident())
            self.expect(";")
            return Havoc(tuple(names))
        if self.accept("assume"):
            self.expect("(")
            e = self.parse_expr()
            self.expect(")")
            self.expect(";")
            return Assume(e)
        if self.at("return"):
            self.error("return is only allowed at the end of a function")
        if self.at_type():
            return self.parse_decl_stmt()
        return self.parse_assign_stmt()

    def parse_decl(self) -> Stmt:
        ty = self.parse_type()
        name = self.ident()
        if self.accept("="):
            e = self.parse_expr()
        else:
            try:
                e = Const(default_value(ty))
            except Exception:
                self.error(f"declaration of '{name}' of type {ty} needs an initializer")
        return Decl(ty, name, e)

    def parse_decl_stmt(self) -> Stmt:
        d = self.parse_decl()
        self.expect(";")
        return d

    def parse_simple_assign(self) -> Stmt:
        t = self.tok
        lval = self.parse_expr()
        if not (self.at("=") or self.at(":=")):
            self.error("expected '=' (expression statements are not supported)", self.tok)
        self.i += 1
        if not isinstance(lval, (Var, Index)):
            self.error("left-hand side must be a variable or an indexed element", t)
        e = self.parse_expr()
        return Assign(lval, e)

    def parse_assign_stmt(self) -> Stmt:
        s = self.parse_simple_assign()
        self.expect(";")
        return s

    def parse_for(self) -> Stmt:
        self.expect("(")
        decls = []
        if not self.at(";"):
            while True:
                decls.append(self.parse_decl() if self.at_type() else self.parse_simple_assign())
                if not self.accept(","):
                    break
        self.expect(";")
        cond = Const(True) if self.at(";") else self.parse_expr()
        self.expect(";")
        steps = []
        if not self.at(")"):
            while True:
                steps.append(self.parse_simple_assign())
                if not self.accept(","):
                    break
        self.expect(")")
        body = self.parse_body()
        return seq(*decls, While(cond, seq(body, *steps))) if decls else While(cond, seq(body, *steps))

    def parse_commute(self) -> Stmt:
        start = self.tok
        alias = start.text
        self.i += 1
        guard: Expr | None
        if self.tok.kind == "IDENT" and self.tok.text == "_":
            self.i += 1
            guard = None
        elif self.at("(") and self.peek().kind == "IDENT" and self.peek().text == "_" and \
                self.peek(2).kind == "OP" and self.peek(2).text == ")":
            self.i += 3
            guard = None
        else:
            self.expect("(")
            guard = self.parse_expr()
            self.expect(")")
        self.expect("{")
        frags = []
        while not self.at("}"):
            if self.tok.kind == "EOF":
                self.error("unterminated commute block", start)
            if self.tok.kind == "IDENT" and self.peek().kind == "OP" and self.peek().text == ":":
                self.i += 2  # fragment label, informational only
            if not self.at("{"):
                self.error("expected a fragment '{ ... }'")
            frags.append(self.parse_block())
        self.expect("}")
        if len(frags) != 2:
            self.error(f"commute must have exactly 2 fragments, found {len(frags)}", start)
        return Commute(guard, frags[0], frags[1], alias)

    def parse_summary(self, tok: Token, text: str) -> LoopSummary:
        m = re.match(r"modifies\s+([A-Za-z_][A-Za-z0-9_]*(?:\s*,\s*[A-Za-z_][A-Za-z0-9_]*)*)?\s*:\s*(.*)$", text)
        if not m:
            self.error("malformed @summary; expected 'modifies x,y: <expr>'", tok)
        names = tuple(n.strip() for n in (m.group(1) or "").split(",") if n.strip())
        try:
            sub = Parser(m.group(2))
            rel = sub.parse_expr()
            if sub.tok.kind != "EOF":
                sub.error(f"unexpected '{sub.tok.text}' in summary")
        except ParseError as e:
            line, col, msg = e.errors[0]
            raise ParseError([(tok.line, tok.col, f"in @summary: {msg}")]) from None
        return LoopSummary(names, rel)

    # -- expressions ----------------------------------------------------------

    def parse_expr(self) -> Expr:
        cond = self.parse_binary(0)
        if self.accept("?"):
            a = self.parse_expr()
            self.expect(":")
            b = self.parse_expr()
            return Ternary(cond, a, b)
        return cond

    def parse_binary(self, level: int) -> Expr:
        if level == len(_BINARY_LEVELS):
            return self.parse_unary()
        left = self.parse_binary(level + 1)
        ops = _BINARY_LEVELS[level]
        while self.tok.kind == "OP" and self.tok.text in ops:
            op = self.tok.text
            self.i += 1
            right = self.parse_binary(level + 1)
            left = Binop(left, op, right)
        return left

    def parse_unary(self) -> Expr:
        if self.at("-"):
            self.i += 1
            if self.tok.kind == "INT":
                v = -self.tok.value
                if v < INT_MIN:
                    self.error("integer literal out of range")
                self.i += 1
                return self.parse_postfix(Const(v))
            return Unop("-", self.parse_unary())
        if self.accept("!"):
            return Unop("!", self.parse_unary())
        return self.parse_postfix(self.parse_primary())

    def parse_postfix(self, e: Expr) -> Expr:
        while True:
            if self.accept("["):
                idx = self.parse_expr()
                self.expect("]")
                e = Index(e, idx)
            elif self.at(".") and self.peek().kind == "IDENT":
                self.i += 1
                e = Field(e, self.ident())
            else:
                return e

    def parse_args(self) -> tuple:
        self.expect("(")
        args = []
        if not self.at(")"):
            while True:
                args.append(self.parse_expr())
                if not self.accept(","):
                    break
        self.expect(")")
        return tuple(args)

    def parse_primary(self) -> Expr:
        t = self.tok
        if t.kind == "INT":
            self.i += 1
            if t.value > INT_MAX:
                self.error("integer literal out of range", t)
            return Const(t.value)
        if t.kind == "STRING":
            self.i += 1
            return Const(t.value)
        if self.accept("true"):
            return Const(True)
        if self.accept("false"):
            return Const(False)
        if self.accept("new"):
            if self.accept("hashtable"):
                self.expect("[")
                k = self.parse_type()
                self.expect(",")
                v = self.parse_type()
                self.expect("]")
                ty = HashtableT(k, v)
                try:
                    check_container_type(ty)
                except ValueError as e:
                    self.error(str(e), t)
                return NewHashtable(k, v)
            elem = self.parse_type()
            self.expect("[")
            n = self.parse_expr()
            self.expect("]")
            try:
                check_container_type(ArrayT(elem))
            except ValueError as e:
                self.error(str(e), t)
            return NewArray(elem, n)
        if self.accept("("):
            if self.accept(")"):
                return Const(UNIT)
            e = self.parse_expr()
            self.expect(")")
            return e
        if t.kind == "IDENT":
            self.i += 1
            if self.at("("):
                if t.text == "old":
                    self.expect("(")
                    name = self.ident()
                    self.expect(")")
                    return Old(name)
                args = self.parse_args()
                if t.text in BUILTINS:
                    if len(args) != BUILTINS[t.text]:
                        self.error(f"builtin '{t.text}' expects {BUILTINS[t.text]} argument(s)", t)
                    return Call(t.text, args)
                return _UserCall(t.text, args, t.line, t.col)
            return Var(t.text)
        self.error(f"unexpected '{t.text or 'end of input'}'")

    # -- inlining -------------------------------------------------------------

    def inline(self, body: Stmt) -> Stmt:
        used = {t.text for t in self.toks if t.kind == "IDENT"}
        counter = [0]

        def fresh_prefix() -> str:
            while True:
                counter[0] += 1
                p = f"_f{counter[0]}_"
                if not any(u.startswith(p) for u in used):
                    return p

        def check_no_calls(e: Expr):
            x = _find_user_call(e)
            if x is not None:
                raise ParseError([(x.line, x.col,
                                   f"call to '{x.fname}' must be the whole right-hand side of an assignment")])

        def expand(call: _UserCall, stack: tuple) -> tuple[Stmt, Expr, Type]:
            f = self.functions.get(call.fname)
            if f is None:
                raise ParseError([(call.line, call.col, f"unknown function '{call.fname}'")])
            if call.fname in stack:
                raise ParseError([(call.line, call.col, f"recursive call to '{call.fname}' is not supported")])
            if len(call.args) != len(f.params):
                raise ParseError([(call.line, call.col,
                                   f"'{f.name}' expects {len(f.params)} argument(s), got {len(call.args)}")])
            for a in call.args:
                check_no_calls(a)
            prefix = fresh_prefix()
            locals_ = {n for _, n in f.params} | _declared_names(f.body)
            ren = {n: prefix + n for n in locals_}
            body = rename_vars(inline_stmt(f.body, stack + (f.name,)), ren)
            ret = rename_expr(f.ret_expr, ren)
            check_no_calls(ret)
            params = [Decl(pt, ren[pn], a) for (pt, pn), a in zip(f.params, call.args)]
            return seq(*params, body) if params else body, ret, f.ret

        def inline_stmt(s: Stmt, stack: tuple) -> Stmt:
            def fn(st: Stmt) -> Stmt:
                if isinstance(st, Assign) and isinstance(st.expr, _UserCall):
                    check_no_calls(st.lval)
                    pre, ret, _ = expand(st.expr, stack)
                    return Scope(seq(*(x for x in (pre,) if not isinstance(x, Skip)), Assign(st.lval, ret)))
                if isinstance(st, Decl) and isinstance(st.expr, _UserCall):
                    pre, ret, rty = expand(st.expr, stack)
                    tmp = Decl(st.type, st.name, Const(default_value(st.type)))
                    return Seq(tmp, Scope(seq(*(x for x in (pre,) if not isinstance(x, Skip)), Assign(Var(st.name), ret))))
                for e in _stmt_exprs(st):
                    check_no_calls(e)
                return st

            return map_stmt(s, fn)

        return inline_stmt(body, ())


def _find_user_call(e) -> "_UserCall | None":
    if isinstance(e, _UserCall):
        return e
    if isinstance(e, Call):
        children = e.args
    else:
        children = [getattr(e, a) for a in ("expr", "base", "index", "length", "left", "right", "cond", "then", "els")
                    if isinstance(getattr(e, a, None), Expr)]
    for c in children:
        found = _find_user_call(c)
        if found is not None:
            return found
    return None


def _contains_user_call(e) -> bool:
    return _find_user_call(e) is not None


def _stmt_exprs(st: Stmt):
    from .ast import iter_exprs

    yield from iter_exprs(st)


def _declared_names(s: Stmt) -> set[str]:
    from .ast import walk

    return {x.name for x in walk(s) if isinstance(x, Decl)}


def rename_expr(e: Expr, ren: dict[str, str]) -> Expr:
    def fn(x):
        if isinstance(x, Var) and x.name in ren:
            return Var(ren[x.name])
        if isinstance(x, Old) and x.name in ren:
            return Old(ren[x.name])
        return x

    return map_expr(e, fn)


def rename_vars(s: Stmt, ren: dict[str, str]) -> Stmt:
    """Rename variables (uses, declarations, havoc targets, summaries) everywhere in ``s``."""
    if not ren:
        return s

    def fn(st: Stmt) -> Stmt:
        if isinstance(st, Assign):
            return Assign(rename_expr(st.lval, ren), rename_expr(st.expr, ren))
        if isinstance(st, Decl):
            return Decl(st.type, ren.get(st.name, st.name), rename_expr(st.expr, ren))
        if isinstance(st, If):
            return If(rename_expr(st.cond, ren), st.then, st.els)
        if isinstance(st, While):
            summ = st.summary
            if summ is not None:
                summ = LoopSummary(tuple(ren.get(n, n) for n in summ.modifies), rename_expr(summ.relation, ren))
            return While(rename_expr(st.cond, ren), st.body, summ)
        if isinstance(st, Commute):
            g = None if st.guard is None else rename_expr(st.guard, ren)
            return Commute(g, st.left, st.right, st.alias)
        if isinstance(st, Lock):
            return Lock(rename_expr(st.expr, ren))
        if isinstance(st, Unlock):
            return Unlock(rename_expr(st.expr, ren))
        if isinstance(st, Assume):
            return Assume(rename_expr(st.expr, ren))
        if isinstance(st, Havoc):
            return Havoc(tuple(ren.get(n, n) for n in st.names))
        return st

    return map_stmt(s, fn)


def parse(src: str) -> Program:
    """Parse a whole source file.  Raises :class:`ParseError`."""
    return Parser(src).parse_program()


def parse_stmt(src: str) -> Stmt:
    return parse(src).body


def parse_expr(src: str) -> Expr:
    p = Parser(src)
    e = p.parse_expr()
    if p.tok.kind != "EOF":
        p.error(f"unexpected '{p.tok.text}'")
    if _contains_user_call(e):
        p.error("user function calls are not allowed in standalone expressions")
    return e
