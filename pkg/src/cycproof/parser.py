"""Concrete syntax: tokenizer, recursive-descent parsers, and printers.

Grammar (whitespace-insensitive)::

    expr   ::= INT | IDENT | "-" expr | expr ("+"|"-"|"*"|"/") expr | "(" expr ")"
    fml    ::= expr ("<="|"<"|"=="|"!="|">="|">") expr | "!" fml | fml "&&" fml
             | fml "||" fml | fml "->" fml | "forall" IDENT "." fml
             | "true" | "false" | "(" fml ")"
    prog   ::= IDENT ":=" expr | prog ";" prog
             | "if" fml "then" prog "else" prog "end"
             | "while" fml "do" prog "end" | "skip" | "(" prog ")"
             | IDENT ":=" "cons" "(" expr ")" | IDENT ":=" "[" expr "]"
             | "[" expr "]" ":=" expr | "dispose" "(" expr ")"
    config ::= "{" [IDENT "->" expr ("," IDENT "->" expr)*] "}"      (store)
             | "{" IDENT "->" expr ("|" IDENT "->" expr)+ "}"        (stack)
    dlp    ::= fml | config ":" body | "!" dlp | dlp "&&" dlp
             | dlp "||" dlp | dlp "->" dlp | "(" dlp ")"
    body   ::= "[" prog "]" body | "<" prog ">" body | "!" body
             | "(" bodyc ")" | fml-atom                    (bodyc adds &&/||/->)
    seq    ::= [dlp ("," dlp)*] "=>" [dlp ("," dlp)*]      ("." = empty side)

Derived connectives normalize to the core on the way in; the printers emit
only core connectives plus the relation sugar that reparses to the same
tree, so ``parse(print(t)) == t``.
"""

from __future__ import annotations

import re

from . import sep as _sep
from .formulas import (
    BAnd,
    BBase,
    BBox,
    BDia,
    BNot,
    Body,
    DAnd,
    DBase,
    DLabeled,
    DNot,
    DlpFormula,
    Sequent,
)
from .terms import (
    EPSILON,
    FALSE,
    SKIP,
    AndF,
    Assign,
    BaseFormula,
    BinOp,
    Config,
    Epsilon,
    Expr,
    Forall,
    If,
    Le,
    Lit,
    NotF,
    Program,
    Seq,
    Skip,
    TRUE,
    Var,
    While,
    eq,
    ge,
    gt,
    imp_f,
    lt,
    ne,
    or_f,
)


class ParseError(Exception):
    def __init__(self, message: str, line: int = 0, col: int = 0):
        super().__init__(f"{message} (line {line}, column {col})")
        self.line = line
        self.col = col


_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<int>\d+)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*'*)
  | (?P<op>:=|<=|>=|==|!=|=>|->|&&|\|\||[-+*/(){}\[\],;:.<>!|?@]|ε)
    """,
    re.VERBOSE,
)

KEYWORDS = {
    "if", "then", "else", "end", "while", "do", "forall",
    "skip", "true", "false", "cons", "dispose", "eps",
}


class _Tokens:
    metavars = False  # template mode: ?name body and @name program holes

    def __init__(self, text: str):
        self.toks: list = []
        line, col = 1, 1
        pos = 0
        while pos < len(text):
            m = _TOKEN_RE.match(text, pos)
            if not m:
                raise ParseError(f"unexpected character {text[pos]!r}", line, col)
            chunk = m.group(0)
            if m.lastgroup != "ws":
                kind = m.lastgroup
                if kind == "ident" and chunk in KEYWORDS:
                    kind = "kw"
                self.toks.append((kind, chunk, line, col))
            for ch in chunk:
                if ch == "\n":
                    line += 1
                    col = 1
                else:
                    col += 1
            pos = m.end()
        self.pos = 0
        self._end = (line, col)

    def peek(self):
        if self.pos < len(self.toks):
            return self.toks[self.pos]
        return ("eof", "", *self._end)

    def next(self):
        tok = self.peek()
        self.pos += 1
        return tok

    def at(self, value: str) -> bool:
        return self.peek()[1] == value

    def accept(self, value: str) -> bool:
        if self.at(value):
            self.pos += 1
            return True
        return False

    def expect(self, value: str):
        kind, chunk, line, col = self.peek()
        if chunk != value:
            raise ParseError(f"expected {value!r}, found {chunk or 'end of input'!r}", line, col)
        self.pos += 1

    def error(self, message: str):
        _, chunk, line, col = self.peek()
        raise ParseError(f"{message} (found {chunk or 'end of input'!r})", line, col)


# ---------------------------------------------------------------------------
# Expressions
# ---------------------------------------------------------------------------

def _expr(ts: _Tokens) -> Expr:
    node = _expr_mul(ts)
    while ts.peek()[1] in ("+", "-"):
        op = ts.next()[1]
        node = BinOp(op, node, _expr_mul(ts))
    return node


def _expr_mul(ts: _Tokens) -> Expr:
    node = _expr_atom(ts)
    while ts.peek()[1] in ("*", "/"):
        op = ts.next()[1]
        node = BinOp(op, node, _expr_atom(ts))
    return node


def _expr_atom(ts: _Tokens) -> Expr:
    kind, chunk, _, _ = ts.peek()
    if chunk == "-":
        ts.next()
        inner = _expr_atom(ts)
        if isinstance(inner, Lit):
            return Lit(-inner.value)
        return BinOp("-", Lit(0), inner)
    if kind == "int":
        ts.next()
        return Lit(int(chunk))
    if kind == "ident":
        ts.next()
        return Var(chunk)
    if chunk == "(":
        ts.next()
        node = _expr(ts)
        ts.expect(")")
        return node
    ts.error("expected an expression")


_RELATIONS = ("<=", "<", "==", "!=", ">=", ">")


def _relation(ts: _Tokens) -> BaseFormula:
    left = _expr(ts)
    op = ts.peek()[1]
    if op not in _RELATIONS:
        ts.error("expected a relation")
    ts.next()
    right = _expr(ts)
    if op == "<=":
        return Le(left, right)
    if op == "<":
        return lt(left, right)
    if op == "==":
        return eq(left, right)
    if op == "!=":
        return ne(left, right)
    if op == ">=":
        return ge(left, right)
    return gt(left, right)


# ---------------------------------------------------------------------------
# Base formulas
# ---------------------------------------------------------------------------

def _fml(ts: _Tokens) -> BaseFormula:
    node = _fml_or(ts)
    if ts.accept("->"):
        return imp_f(node, _fml(ts))
    return node


def _fml_or(ts: _Tokens) -> BaseFormula:
    node = _fml_and(ts)
    while ts.accept("||"):
        node = or_f(node, _fml_and(ts))
    return node


def _fml_and(ts: _Tokens) -> BaseFormula:
    node = _fml_unary(ts)
    while ts.accept("&&"):
        node = AndF(node, _fml_unary(ts))
    return node


def _fml_unary(ts: _Tokens) -> BaseFormula:
    if ts.accept("!"):
        return NotF(_fml_unary(ts))
    return _fml_atom(ts)


def _fml_atom(ts: _Tokens) -> BaseFormula:
    kind, chunk, _, _ = ts.peek()
    if chunk == "forall":
        ts.next()
        k2, name, line, col = ts.next()
        if k2 != "ident":
            raise ParseError("expected a variable after forall", line, col)
        ts.expect(".")
        return Forall(name, _fml(ts))
    if chunk == "true":
        ts.next()
        return TRUE
    if chunk == "false":
        ts.next()
        return FALSE
    if chunk == "(":
        save = ts.pos
        try:
            return _relation(ts)
        except ParseError:
            ts.pos = save
        ts.next()
        node = _fml(ts)
        ts.expect(")")
        return node
    return _relation(ts)


# ---------------------------------------------------------------------------
# Programs
# ---------------------------------------------------------------------------

def _prog(ts: _Tokens) -> Program:
    node = _prog_atom(ts)
    if ts.accept(";"):
        return Seq(node, _prog(ts))
    return node


def _prog_atom(ts: _Tokens) -> Program:
    kind, chunk, line, col = ts.peek()
    if ts.metavars and chunk == "@":
        from .lifting import MProg

        ts.next()
        k2, name, line2, col2 = ts.next()
        if k2 != "ident":
            raise ParseError("expected a metavariable name after @", line2, col2)
        return MProg(name)
    if chunk == "(":
        ts.next()
        node = _prog(ts)
        ts.expect(")")
        return node
    if chunk == "skip":
        ts.next()
        return SKIP
    if chunk in ("ε", "eps"):
        ts.next()
        return EPSILON
    if chunk == "if":
        ts.next()
        guard = _fml(ts)
        ts.expect("then")
        then = _prog(ts)
        ts.expect("else")
        orelse = _prog(ts)
        ts.expect("end")
        return If(guard, then, orelse)
    if chunk == "while":
        ts.next()
        guard = _fml(ts)
        ts.expect("do")
        body = _prog(ts)
        ts.expect("end")
        return While(guard, body)
    if chunk == "dispose":
        ts.next()
        ts.expect("(")
        e = _expr(ts)
        ts.expect(")")
        return _sep.Dispose(e)
    if chunk == "[":
        ts.next()
        addr = _expr(ts)
        ts.expect("]")
        ts.expect(":=")
        return _sep.HeapWrite(addr, _expr(ts))
    if kind == "ident":
        ts.next()
        ts.expect(":=")
        if ts.at("cons"):
            ts.next()
            ts.expect("(")
            e = _expr(ts)
            ts.expect(")")
            return _sep.Alloc(chunk, e)
        if ts.accept("["):
            e = _expr(ts)
            ts.expect("]")
            return _sep.HeapRead(chunk, e)
        return Assign(chunk, _expr(ts))
    raise ParseError(f"expected a program, found {chunk!r}", line, col)


# ---------------------------------------------------------------------------
# Configurations
# ---------------------------------------------------------------------------

def _config(ts: _Tokens) -> Config:
    ts.expect("{")
    entries = []
    stack = False
    if not ts.at("}"):
        while True:
            kind, name, line, col = ts.next()
            if kind != "ident":
                raise ParseError("expected a variable in configuration", line, col)
            ts.expect("->")
            entries.append((name, _expr(ts)))
            if ts.accept(","):
                continue
            if ts.accept("|"):
                stack = True
                continue
            break
    ts.expect("}")
    return Config(tuple(entries), stack=stack)


# ---------------------------------------------------------------------------
# Labeled formulas and sequents
# ---------------------------------------------------------------------------

# A body (or labeled-formula) connective over purely base operands collapses
# into the base-formula connective, so modality-free bodies stay one atom.

def _b_not(b: Body) -> Body:
    if isinstance(b, BBase):
        return BBase(NotF(b.fml))
    return BNot(b)


def _b_and(a: Body, b: Body) -> Body:
    if isinstance(a, BBase) and isinstance(b, BBase):
        return BBase(AndF(a.fml, b.fml))
    return BAnd(a, b)


def _body_atom(ts: _Tokens) -> Body:
    chunk = ts.peek()[1]
    if ts.metavars and chunk == "?":
        from .lifting import MBody

        ts.next()
        kind, name, line, col = ts.next()
        if kind != "ident":
            raise ParseError("expected a metavariable name after ?", line, col)
        return MBody(name)
    if chunk == "[":
        ts.next()
        prog = _prog(ts)
        ts.expect("]")
        return BBox(prog, _body_atom(ts))
    if chunk == "<":
        ts.next()
        prog = _prog(ts)
        ts.expect(">")
        return BDia(prog, _body_atom(ts))
    if chunk == "!":
        ts.next()
        return _b_not(_body_atom(ts))
    if chunk == "(":
        save = ts.pos
        ts.next()
        try:
            node = _body_compound(ts)
            ts.expect(")")
            return node
        except ParseError:
            ts.pos = save
        return BBase(_fml_atom(ts))
    return BBase(_fml_atom(ts))


def _body_compound(ts: _Tokens) -> Body:
    node = _body_and(ts)
    if ts.accept("->"):
        rest = _body_compound(ts)
        return _b_not(_b_and(node, _b_not(rest)))
    return node


def _body_and(ts: _Tokens) -> Body:
    node = _body_unary(ts)
    while True:
        if ts.accept("&&"):
            node = _b_and(node, _body_unary(ts))
        elif ts.accept("||"):
            right = _body_unary(ts)
            node = _b_not(_b_and(_b_not(node), _b_not(right)))
        else:
            return node


def _body_unary(ts: _Tokens) -> Body:
    if ts.accept("!"):
        return _b_not(_body_unary(ts))
    return _body_atom(ts)


def _d_not(f: DlpFormula) -> DlpFormula:
    if isinstance(f, DBase):
        return DBase(NotF(f.fml))
    return DNot(f)


def _d_and(a: DlpFormula, b: DlpFormula) -> DlpFormula:
    if isinstance(a, DBase) and isinstance(b, DBase):
        return DBase(AndF(a.fml, b.fml))
    return DAnd(a, b)


def _dlp(ts: _Tokens) -> DlpFormula:
    node = _dlp_or(ts)
    if ts.accept("->"):
        rest = _dlp(ts)
        return _d_not(_d_and(node, _d_not(rest)))
    return node


def _dlp_or(ts: _Tokens) -> DlpFormula:
    node = _dlp_and(ts)
    while ts.accept("||"):
        right = _dlp_and(ts)
        node = _d_not(_d_and(_d_not(node), _d_not(right)))
    return node


def _dlp_and(ts: _Tokens) -> DlpFormula:
    node = _dlp_unary(ts)
    while ts.accept("&&"):
        node = _d_and(node, _dlp_unary(ts))
    return node


def _dlp_unary(ts: _Tokens) -> DlpFormula:
    if ts.accept("!"):
        return _d_not(_dlp_unary(ts))
    return _dlp_atom(ts)


def _dlp_atom(ts: _Tokens) -> DlpFormula:
    chunk = ts.peek()[1]
    if chunk == "{":
        sigma = _config(ts)
        ts.expect(":")
        return DLabeled(sigma, _body_atom(ts))
    if chunk == "(":
        save = ts.pos
        try:
            return DBase(_fml_atom(ts))
        except ParseError:
            ts.pos = save
        ts.next()
        node = _dlp(ts)
        ts.expect(")")
        return node
    return DBase(_fml_atom(ts))


def _sequent(ts: _Tokens) -> Sequent:
    left = _formula_list(ts)
    ts.expect("=>")
    right = _formula_list(ts)
    return Sequent(tuple(left), tuple(right))


def _formula_list(ts: _Tokens) -> list:
    if ts.accept("."):
        return []
    if ts.at("=>") or ts.peek()[0] == "eof":
        return []
    out = [_dlp(ts)]
    while ts.accept(","):
        out.append(_dlp(ts))
    return out


def _finish(ts: _Tokens, node):
    if ts.peek()[0] != "eof":
        ts.error("trailing input")
    return node


def parse_expr(text: str) -> Expr:
    return _finish(ts := _Tokens(text), _expr(ts))


def parse_fml(text: str) -> BaseFormula:
    return _finish(ts := _Tokens(text), _fml(ts))


def parse_prog(text: str) -> Program:
    return _finish(ts := _Tokens(text), _prog(ts))


def parse_config(text: str) -> Config:
    return _finish(ts := _Tokens(text), _config(ts))


def parse_dlp(text: str) -> DlpFormula:
    return _finish(ts := _Tokens(text), _dlp(ts))


def parse_sequent(text: str) -> Sequent:
    return _finish(ts := _Tokens(text), _sequent(ts))


def parse_template_sequent(text: str) -> tuple:
    """Sides of body templates for rule lifting; ?f and @p are holes.

    Returns (left bodies, right bodies); the label is implicit and shared.
    """
    ts = _Tokens(text)
    ts.metavars = True

    def side() -> tuple:
        if ts.accept("."):
            return ()
        if ts.at("=>") or ts.peek()[0] == "eof":
            return ()
        out = [_body_compound(ts)]
        while ts.accept(","):
            out.append(_body_compound(ts))
        return tuple(out)

    left = side()
    ts.expect("=>")
    right = side()
    return _finish(ts, (left, right))


# ---------------------------------------------------------------------------
# Printers
# ---------------------------------------------------------------------------

def expr_src(e: Expr, level: int = 0) -> str:
    if isinstance(e, Lit):
        s = str(e.value)
        return f"({s})" if e.value < 0 and level >= 3 else s
    if isinstance(e, Var):
        return e.name
    if isinstance(e, BinOp):
        prec = 1 if e.op in "+-" else 2
        left = expr_src(e.left, prec)
        right = expr_src(e.right, prec + 1)
        s = f"{left} {e.op} {right}"
        return f"({s})" if level > prec else s
    raise TypeError(f"not an expression: {e!r}")


def fml_src(phi: BaseFormula, level: int = 0) -> str:
    if isinstance(phi, Le):
        s = f"{expr_src(phi.left)} <= {expr_src(phi.right)}"
        return f"({s})" if level > 1 else s
    if isinstance(phi, NotF):
        return f"!({fml_src(phi.body)})"
    if isinstance(phi, AndF):
        s = f"{fml_src(phi.left, 2)} && {fml_src(phi.right, 3)}"
        return f"({s})" if level > 2 else s
    if isinstance(phi, Forall):
        s = f"forall {phi.var} . {fml_src(phi.body)}"
        return f"({s})" if level > 0 else s
    raise TypeError(f"not a base formula: {phi!r}")


def prog_src(p: Program) -> str:
    if isinstance(p, Assign):
        return f"{p.target} := {expr_src(p.expr)}"
    if isinstance(p, Seq):
        first = prog_src(p.first)
        if isinstance(p.first, Seq):
            first = f"({first})"
        return f"{first} ; {prog_src(p.second)}"
    if isinstance(p, If):
        return (
            f"if {fml_src(p.guard)} then {prog_src(p.then)} "
            f"else {prog_src(p.orelse)} end"
        )
    if isinstance(p, While):
        return f"while {fml_src(p.guard)} do {prog_src(p.body)} end"
    if isinstance(p, Skip):
        return "skip"
    if isinstance(p, Epsilon):
        return "ε"
    if isinstance(p, _sep.Alloc):
        return f"{p.target} := cons({expr_src(p.expr)})"
    if isinstance(p, _sep.HeapRead):
        return f"{p.target} := [{expr_src(p.addr)}]"
    if isinstance(p, _sep.HeapWrite):
        return f"[{expr_src(p.addr)}] := {expr_src(p.expr)}"
    if isinstance(p, _sep.Dispose):
        return f"dispose({expr_src(p.addr)})"
    raise TypeError(f"not a program: {p!r}")


def config_src(sigma: Config) -> str:
    joiner = " | " if sigma.stack else ", "
    inner = joiner.join(f"{x} -> {expr_src(e)}" for x, e in sigma.entries)
    return "{" + inner + "}"


def body_src(b: Body) -> str:
    if isinstance(b, BBase):
        if isinstance(b.fml, (Le,)):
            return fml_src(b.fml)
        return f"({fml_src(b.fml)})"
    if isinstance(b, BNot):
        return f"!{body_src(b.body)}"
    if isinstance(b, BAnd):
        return f"({_body_src_inner(b)})"
    if isinstance(b, BBox):
        return f"[{prog_src(b.prog)}] {body_src(b.body)}"
    if isinstance(b, BDia):
        return f"<{prog_src(b.prog)}> {body_src(b.body)}"
    raise TypeError(f"not a body: {b!r}")


def _body_src_inner(b: Body) -> str:
    if isinstance(b, BAnd):
        return f"{_body_and_src(b.left)} && {_body_and_src(b.right)}"
    return body_src(b)


def _body_and_src(b: Body) -> str:
    if isinstance(b, BAnd):
        return f"({_body_src_inner(b)})"
    return body_src(b)


def dlp_src(f: DlpFormula, level: int = 0) -> str:
    if isinstance(f, DBase):
        return fml_src(f.fml, level)
    if isinstance(f, DLabeled):
        label = f.label
        label_txt = config_src(label) if isinstance(label, Config) else str(label)
        s = f"{label_txt} : {body_src(f.body)}"
        return f"({s})" if level > 0 else s
    if isinstance(f, DNot):
        return f"!({dlp_src(f.arg)})"
    if isinstance(f, DAnd):
        s = f"{dlp_src(f.left, 2)} && {dlp_src(f.right, 3)}"
        return f"({s})" if level > 2 else s
    raise TypeError(f"not a formula: {f!r}")


def sequent_src(nu: Sequent) -> str:
    left = ", ".join(dlp_src(f) for f in nu.left) or "."
    right = ", ".join(dlp_src(f) for f in nu.right) or "."
    return f"{left} => {right}"
