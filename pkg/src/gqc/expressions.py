"""Arithmetic expressions for coefficient fields.

Grammar (precedence high to low): ``^`` (right associative), unary ``-``,
``* /``, ``+ -``. Identifiers: variables ``x1 .. x3``, the constant
``pi``, unary functions ``sin cos exp ln abs`` and the n-ary forms
``min(a, b)``, ``max(a, b)`` and ``indicator(axis, lo, hi)``. The
indicator is 1 where lo < x_axis <= hi and 0 elsewhere; axis is a 1-based
integer literal. Parsing is deterministic and ASTs compare by value, so
``parse(to_string(ast)) == ast``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np

UNARY_FUNCTIONS = {
    "sin": np.sin,
    "cos": np.cos,
    "exp": np.exp,
    "ln": np.log,
    "abs": np.abs,
}

_BINARY_FUNCTIONS = {"min", "max"}


class ExpressionError(ValueError):
    """Syntax or evaluation error; carries the character position when known."""

    def __init__(self, message: str, position: int | None = None):
        if position is not None:
            message = f"{message} (at position {position})"
        super().__init__(message)
        self.position = position


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Pi:
    pass


@dataclass(frozen=True)
class Var:
    axis: int  # 1-based


@dataclass(frozen=True)
class Neg:
    arg: "Expr"


@dataclass(frozen=True)
class BinOp:
    op: str  # one of + - * / ^
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Call:
    name: str
    args: tuple["Expr", ...]


@dataclass(frozen=True)
class Indicator:
    axis: int  # 1-based
    lo: float
    hi: float


Expr = Union[Num, Pi, Var, Neg, BinOp, Call, Indicator]


# ---------------------------------------------------------------------------
# tokenizer


@dataclass(frozen=True)
class _Token:
    kind: str  # num | name | op | lparen | rparen | comma | end
    text: str
    pos: int


def _tokenize(text: str) -> list[_Token]:
    tokens: list[_Token] = []
    i, n = 0, len(text)
    while i < n:
        ch = text[i]
        if ch.isspace():
            i += 1
            continue
        if ch.isdigit() or (ch == "." and i + 1 < n and text[i + 1].isdigit()):
            j = i
            seen_exp = False
            while j < n:
                c = text[j]
                if c.isdigit() or c == ".":
                    j += 1
                elif c in "eE" and not seen_exp and j + 1 < n and (
                    text[j + 1].isdigit() or text[j + 1] in "+-"
                ):
                    seen_exp = True
                    j += 2 if text[j + 1] in "+-" else 1
                else:
                    break
            tokens.append(_Token("num", text[i:j], i))
            i = j
            continue
        if ch.isalpha() or ch == "_":
            j = i
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            tokens.append(_Token("name", text[i:j], i))
            i = j
            continue
        if ch in "+-*/^":
            tokens.append(_Token("op", ch, i))
            i += 1
            continue
        if ch == "(":
            tokens.append(_Token("lparen", ch, i))
            i += 1
            continue
        if ch == ")":
            tokens.append(_Token("rparen", ch, i))
            i += 1
            continue
        if ch == ",":
            tokens.append(_Token("comma", ch, i))
            i += 1
            continue
        raise ExpressionError(f"unexpected character {ch!r}", i)
    tokens.append(_Token("end", "", n))
    return tokens


# ---------------------------------------------------------------------------
# recursive descent parser


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = _tokenize(text)
        self.idx = 0

    def peek(self) -> _Token:
        return self.tokens[self.idx]

    def advance(self) -> _Token:
        tok = self.tokens[self.idx]
        self.idx += 1
        return tok

    def expect(self, kind: str, text: str | None = None) -> _Token:
        tok = self.peek()
        if tok.kind != kind or (text is not None and tok.text != text):
            want = text if text is not None else kind
            raise ExpressionError(f"expected {want!r}, found {tok.text or 'end of input'!r}", tok.pos)
        return self.advance()

    def parse(self) -> Expr:
        node = self.parse_sum()
        tok = self.peek()
        if tok.kind != "end":
            raise ExpressionError(f"unexpected trailing input {tok.text!r}", tok.pos)
        return node

    def parse_sum(self) -> Expr:
        node = self.parse_product()
        while self.peek().kind == "op" and self.peek().text in "+-":
            op = self.advance().text
            node = BinOp(op, node, self.parse_product())
        return node

    def parse_product(self) -> Expr:
        node = self.parse_unary()
        while self.peek().kind == "op" and self.peek().text in "*/":
            op = self.advance().text
            node = BinOp(op, node, self.parse_unary())
        return node

    def parse_unary(self) -> Expr:
        if self.peek().kind == "op" and self.peek().text == "-":
            self.advance()
            return Neg(self.parse_unary())
        return self.parse_power()

    def parse_power(self) -> Expr:
        base = self.parse_atom()
        if self.peek().kind == "op" and self.peek().text == "^":
            self.advance()
            return BinOp("^", base, self.parse_unary())
        return base

    def parse_atom(self) -> Expr:
        tok = self.peek()
        if tok.kind == "num":
            self.advance()
            return Num(float(tok.text))
        if tok.kind == "lparen":
            self.advance()
            node = self.parse_sum()
            self.expect("rparen")
            return node
        if tok.kind == "name":
            self.advance()
            name = tok.text
            if name == "pi":
                return Pi()
            if len(name) == 2 and name[0] == "x" and name[1].isdigit():
                axis = int(name[1])
                if axis < 1 or axis > 3:
                    raise ExpressionError(f"variable {name!r} out of range x1..x3", tok.pos)
                return Var(axis)
            if name in UNARY_FUNCTIONS:
                self.expect("lparen")
                arg = self.parse_sum()
                self.expect("rparen")
                return Call(name, (arg,))
            if name in _BINARY_FUNCTIONS:
                self.expect("lparen")
                a = self.parse_sum()
                self.expect("comma")
                b = self.parse_sum()
                self.expect("rparen")
                return Call(name, (a, b))
            if name == "indicator":
                self.expect("lparen")
                axis_expr = self.parse_sum()
                self.expect("comma")
                lo_expr = self.parse_sum()
                self.expect("comma")
                hi_expr = self.parse_sum()
                self.expect("rparen")
                axis = _const_value(axis_expr, tok.pos, "indicator axis")
                lo = _const_value(lo_expr, tok.pos, "indicator lower bound")
                hi = _const_value(hi_expr, tok.pos, "indicator upper bound")
                if axis != int(axis) or not (1 <= int(axis) <= 3):
                    raise ExpressionError("indicator axis must be an integer in 1..3", tok.pos)
                return Indicator(int(axis), float(lo), float(hi))
            raise ExpressionError(f"unknown identifier {name!r}", tok.pos)
        raise ExpressionError(f"expected a value, found {tok.text or 'end of input'!r}", tok.pos)


def _const_value(node: Expr, pos: int, what: str) -> float:
    if isinstance(node, Num):
        return node.value
    if isinstance(node, Neg):
        return -_const_value(node.arg, pos, what)
    if isinstance(node, Pi):
        return float(np.pi)
    raise ExpressionError(f"{what} must be a numeric literal", pos)


def parse_expression(text: str) -> Expr:
    if not text or not text.strip():
        raise ExpressionError("empty expression", 0)
    return _Parser(text).parse()


# ---------------------------------------------------------------------------
# evaluation and printing


def variables_used(node: Expr) -> set[int]:
    if isinstance(node, Var):
        return {node.axis}
    if isinstance(node, Indicator):
        return {node.axis}
    if isinstance(node, Neg):
        return variables_used(node.arg)
    if isinstance(node, BinOp):
        return variables_used(node.left) | variables_used(node.right)
    if isinstance(node, Call):
        out: set[int] = set()
        for a in node.args:
            out |= variables_used(a)
        return out
    return set()


def evaluate(node: Expr, coords: np.ndarray) -> np.ndarray:
    """Evaluate over points given as an (npoints, dim) coordinate array."""
    npts = coords.shape[0]
    dim = coords.shape[1]

    def rec(e: Expr) -> np.ndarray:
        if isinstance(e, Num):
            return np.full(npts, e.value)
        if isinstance(e, Pi):
            return np.full(npts, np.pi)
        if isinstance(e, Var):
            if e.axis > dim:
                raise ExpressionError(f"variable x{e.axis} undefined on a {dim}-d grid")
            return coords[:, e.axis - 1].copy()
        if isinstance(e, Neg):
            return -rec(e.arg)
        if isinstance(e, BinOp):
            a, b = rec(e.left), rec(e.right)
            if e.op == "+":
                return a + b
            if e.op == "-":
                return a - b
            if e.op == "*":
                return a * b
            if e.op == "/":
                with np.errstate(divide="ignore", invalid="ignore"):
                    return a / b
            with np.errstate(invalid="ignore", over="ignore"):
                return a**b
        if isinstance(e, Call):
            args = [rec(a) for a in e.args]
            if e.name in UNARY_FUNCTIONS:
                with np.errstate(invalid="ignore", divide="ignore", over="ignore"):
                    return UNARY_FUNCTIONS[e.name](args[0])
            if e.name == "min":
                return np.minimum(args[0], args[1])
            if e.name == "max":
                return np.maximum(args[0], args[1])
        if isinstance(e, Indicator):
            if e.axis > dim:
                raise ExpressionError(f"indicator axis {e.axis} undefined on a {dim}-d grid")
            x = coords[:, e.axis - 1]
            return np.where((x > e.lo) & (x <= e.hi), 1.0, 0.0)
        raise ExpressionError(f"cannot evaluate node {e!r}")

    return rec(node)


def _precedence(node: Expr) -> int:
    if isinstance(node, BinOp):
        if node.op in "+-":
            return 1
        if node.op in "*/":
            return 2
        return 4  # ^
    if isinstance(node, Neg):
        return 3
    return 5


def to_string(node: Expr) -> str:
    """Render an AST back to the grammar; parse(to_string(e)) == e."""

    def wrap(child: Expr, parent_prec: int, right_side: bool = False) -> str:
        s = to_string(child)
        cp = _precedence(child)
        if cp < parent_prec or (cp == parent_prec and right_side and cp in (1, 2)):
            return f"({s})"
        return s

    if isinstance(node, Num):
        return repr(node.value)
    if isinstance(node, Pi):
        return "pi"
    if isinstance(node, Var):
        return f"x{node.axis}"
    if isinstance(node, Neg):
        return f"-{wrap(node.arg, 3)}"
    if isinstance(node, BinOp):
        p = _precedence(node)
        if node.op == "^":
            # right associative; the exponent re-enters at unary level
            base = wrap(node.left, p + 1)
            expo = to_string(node.right)
            if _precedence(node.right) < 3:
                expo = f"({expo})"
            return f"{base}^{expo}"
        return f"{wrap(node.left, p)} {node.op} {wrap(node.right, p, right_side=True)}"
    if isinstance(node, Call):
        inner = ", ".join(to_string(a) for a in node.args)
        return f"{node.name}({inner})"
    if isinstance(node, Indicator):
        return f"indicator({node.axis}, {node.lo!r}, {node.hi!r})"
    raise ExpressionError(f"cannot print node {node!r}")
