"""Arithmetic expressions in ``x`` and ``t`` for heterogeneity profiles.

Grammar (loosest to tightest binding)::

    expr   := expr ('+' | '-') term
    term   := term ('*' | '/') unary
    unary  := '-' unary | power
    power  := atom ('^' unary)?          # right-associative
    atom   := NUMBER | 'x' | 't' | FUNC '(' expr ')' | '(' expr ')'

FUNC is one of cos, sin, exp, abs. ``-2^2`` is -4 and ``2^3^2`` is 512.
Evaluation is vectorized over numpy arrays; any non-finite result is a
domain error.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Union

import numpy as np

from .errors import DomainError
from .grid import Field, Grid

__all__ = [
    "ParseError",
    "EvaluationError",
    "Num",
    "Var",
    "Neg",
    "BinOp",
    "Call",
    "Expr",
    "parse",
    "evaluate",
    "sample",
    "to_text",
]

FUNCTIONS = {"cos": np.cos, "sin": np.sin, "exp": np.exp, "abs": np.abs}
VARIABLES = ("x", "t")
MAX_DEPTH = 200
MAX_HEIGHT = 400


class ParseError(ValueError):
    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} at offset {offset}")
        self.offset = offset


class EvaluationError(DomainError):
    def __init__(self, message: str, node: int | None = None):
        if node is not None:
            message = f"{message} at node {node}"
        super().__init__(message)
        self.node = node


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Neg:
    operand: "Expr"


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Call:
    func: str
    arg: "Expr"


Expr = Union[Num, Var, Neg, BinOp, Call]


_TOKEN = re.compile(
    rb"""
    (?P<ws>[ \t\r\n]+)
  | (?P<num>(?:[0-9]+(?:\.[0-9]*)?|\.[0-9]+)(?:[eE][+-]?[0-9]+)?)
  | (?P<name>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>[-+*/^(),])
    """,
    re.VERBOSE,
)


def _tokenize(data: bytes) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    while pos < len(data):
        m = _TOKEN.match(data, pos)
        if m is None:
            raise ParseError(f"unexpected character {data[pos:pos + 1]!r}", pos)
        kind = m.lastgroup
        if kind != "ws":
            tokens.append((kind, m.group().decode("ascii"), pos))
        pos = m.end()
    tokens.append(("end", "", len(data)))
    return tokens


# binding powers of infix operators: (left, right)
_INFIX = {"+": (10, 11), "-": (10, 11), "*": (20, 21), "/": (20, 21), "^": (40, 30)}
_UNARY_BP = 30


class _Parser:
    def __init__(self, tokens):
        self.tokens = tokens
        self.i = 0
        self.depth = 0

    def peek(self):
        return self.tokens[self.i]

    def advance(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, text):
        kind, value, pos = self.peek()
        if value != text or kind != "op":
            found = "end of input" if kind == "end" else repr(value)
            raise ParseError(f"expected {text!r}, found {found}", pos)
        self.advance()

    def expression(self, min_bp=0):
        self.depth += 1
        if self.depth > MAX_DEPTH:
            raise ParseError("expression nested too deeply", self.peek()[2])
        lhs = self.prefix()
        while True:
            kind, value, pos = self.peek()
            if kind != "op" or value not in _INFIX:
                break
            lbp, rbp = _INFIX[value]
            if lbp < min_bp:
                break
            self.advance()
            lhs = BinOp(value, lhs, self.expression(rbp))
        self.depth -= 1
        return lhs

    def prefix(self):
        kind, value, pos = self.advance()
        if kind == "num":
            return Num(float(value))
        if kind == "name":
            if value in VARIABLES:
                return Var(value)
            if value in FUNCTIONS:
                self.expect("(")
                arg = self.expression()
                self.expect(")")
                return Call(value, arg)
            raise ParseError(f"unknown identifier {value!r}", pos)
        if kind == "op" and value == "-":
            return Neg(self.expression(_UNARY_BP))
        if kind == "op" and value == "(":
            inner = self.expression()
            self.expect(")")
            return inner
        if kind == "end":
            raise ParseError("unexpected end of input", pos)
        raise ParseError(f"unexpected token {value!r}", pos)


def parse(text: str | bytes) -> Expr:
    """Parse ``text`` into an expression tree.

    Raises ParseError carrying the byte offset of the offending token.
    """
    data = text.encode("utf-8") if isinstance(text, str) else bytes(text)
    tokens = _tokenize(data)
    parser = _Parser(tokens)
    tree = parser.expression()
    kind, value, pos = parser.peek()
    if kind != "end":
        raise ParseError(f"unexpected token {value!r}", pos)
    if _height(tree) > MAX_HEIGHT:
        raise ParseError("expression tree too deep", 0)
    return tree


def _height(e: Expr) -> int:
    best = 0
    stack = [(e, 1)]
    while stack:
        node, h = stack.pop()
        best = max(best, h)
        if isinstance(node, BinOp):
            stack.append((node.left, h + 1))
            stack.append((node.right, h + 1))
        elif isinstance(node, Neg):
            stack.append((node.operand, h + 1))
        elif isinstance(node, Call):
            stack.append((node.arg, h + 1))
    return best


def _eval(e: Expr, x, t):
    if isinstance(e, Num):
        return e.value
    if isinstance(e, Var):
        return x if e.name == "x" else t
    if isinstance(e, Neg):
        return -_eval(e.operand, x, t)
    if isinstance(e, Call):
        return FUNCTIONS[e.func](_eval(e.arg, x, t))
    a = _eval(e.left, x, t)
    b = _eval(e.right, x, t)
    if e.op == "+":
        return a + b
    if e.op == "-":
        return a - b
    if e.op == "*":
        return a * b
    if e.op == "/":
        zero = np.asarray(b) == 0
        if np.any(zero):
            raise EvaluationError("division by zero", _first_index(zero))
        return a / b
    return np.power(a, b)


def _first_index(mask):
    return int(np.flatnonzero(np.atleast_1d(mask))[0])


def evaluate(e: Expr, x, t=0.0):
    """Evaluate ``e`` at ``x`` (scalar or array) and scalar time ``t``.

    The result is broadcast to the shape of ``x``.
    """
    x = np.asarray(x, dtype=float)
    with np.errstate(all="ignore"):
        value = np.broadcast_to(np.asarray(_eval(e, x, float(t)), dtype=float), x.shape)
    bad = ~np.isfinite(value)
    if np.any(bad):
        raise EvaluationError("non-finite value", _first_index(bad))
    return np.array(value)


def sample(e: Expr, g: Grid, t: float = 0.0) -> Field:
    return Field(g, evaluate(e, g.nodes, t))


def to_text(e: Expr) -> str:
    """Render ``e`` as text that parses back to an equivalent tree."""
    if isinstance(e, Num):
        return repr(e.value) if np.isfinite(e.value) else "1e999"
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Neg):
        return f"(-{to_text(e.operand)})"
    if isinstance(e, Call):
        return f"{e.func}({to_text(e.arg)})"
    return f"({to_text(e.left)} {e.op} {to_text(e.right)})"
