"""A small closed expression grammar for scenario functions.

Grammar (``^`` binds tightest and is right-associative, unary minus applies
to a power, the other binary operators are left-associative)::

    expr  := term (('+' | '-') term)*
    term  := unary (('*' | '/') unary)*
    unary := '-' unary | power
    power := atom ('^' unary)?
    atom  := NUMBER | 't' | 'x' | 'pi' | FUNC '(' expr ')' | '(' expr ')'

``FUNC`` is one of ``sin cos exp bump`` or ``bumpN`` (``N >= 1``), the N-th
derivative of ``bump(y) = exp(-1/(1-y^2))`` for ``|y| < 1`` and 0 elsewhere.
Derivatives of bump are emitted as ``bumpN`` calls so that the grammar stays
closed under differentiation and evaluates to exactly 0 on the support edges.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Union

import numpy as np

from .kernels import bump

VARIABLES = ("t", "x")
FUNCTIONS = ("sin", "cos", "exp", "bump")


class ExpressionError(ValueError):
    """Syntax or semantic error in an expression, with a 0-based position."""

    def __init__(self, message: str, position: int | None = None, source: str | None = None):
        self.message = message
        self.position = position
        self.source = source
        text = message if position is None else f"{message} at position {position}"
        if source is not None and position is not None:
            text += f"\n  {source}\n  {' ' * position}^"
        super().__init__(text)


# ---------------------------------------------------------------------------
# AST
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Const:
    name: str  # only "pi"


@dataclass(frozen=True)
class Neg:
    arg: "Expression"


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Expression"
    right: "Expression"


@dataclass(frozen=True)
class Call:
    func: str
    arg: "Expression"


Expression = Union[Num, Var, Const, Neg, BinOp, Call]

_BUMP_RE = re.compile(r"bump(\d*)$")


def _bump_order(func: str) -> int | None:
    m = _BUMP_RE.match(func)
    if m is None:
        return None
    digits = m.group(1)
    if digits == "":
        return 0
    if digits.startswith("0"):
        return None
    return int(digits)


def _known_function(name: str) -> bool:
    return name in FUNCTIONS or _bump_order(name) is not None


# ---------------------------------------------------------------------------
# parsing
# ---------------------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<name>[A-Za-z_][A-Za-z_0-9]*)|(?P<op>[-+*/^(),]))"
)


def _tokenize(source: str):
    tokens = []
    pos = 0
    while True:
        while pos < len(source) and source[pos].isspace():
            pos += 1
        if pos >= len(source):
            break
        m = _TOKEN_RE.match(source, pos)
        if m is None or m.end() == pos:
            raise ExpressionError(f"unexpected character {source[pos]!r}", pos, source)
        start = m.start(m.lastgroup)
        tokens.append((m.lastgroup, m.group(m.lastgroup), start))
        pos = m.end()
    tokens.append(("end", "", len(source)))
    return tokens


class _Parser:
    def __init__(self, source: str):
        self.source = source
        self.tokens = _tokenize(source)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def error(self, message, pos=None):
        if pos is None:
            pos = self.peek()[2]
        return ExpressionError(message, pos, self.source)

    def expect(self, text):
        kind, val, pos = self.peek()
        if val != text or kind != "op":
            what = "end of input" if kind == "end" else repr(val)
            if text == ")":
                raise self.error(f"unbalanced parentheses: expected ')' but found {what}")
            raise self.error(f"expected {text!r} but found {what}")
        return self.take()

    def parse(self) -> Expression:
        if self.peek()[0] == "end":
            raise self.error("empty expression")
        node = self.expr()
        kind, val, pos = self.peek()
        if kind != "end":
            if val == ")":
                raise self.error("unbalanced parentheses: unmatched ')'")
            raise self.error(f"unexpected token {val!r}")
        return node

    def expr(self):
        node = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            node = BinOp(op, node, self.term())
        return node

    def term(self):
        node = self.unary()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.take()[1]
            node = BinOp(op, node, self.unary())
        return node

    def unary(self):
        if self.peek()[1] == "-" and self.peek()[0] == "op":
            self.take()
            arg = self.unary()
            if isinstance(arg, Num):
                return Num(-arg.value)
            return Neg(arg)
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek()[1] == "^" and self.peek()[0] == "op":
            self.take()
            return BinOp("^", base, self.unary())
        return base

    def atom(self):
        kind, val, pos = self.peek()
        if kind == "num":
            self.take()
            return Num(float(val))
        if kind == "name":
            self.take()
            if val in VARIABLES:
                if self.peek()[1] == "(":
                    raise self.error(f"variable {val!r} cannot be called", pos)
                return Var(val)
            if val == "pi":
                return Const("pi")
            if _known_function(val):
                if self.peek()[1] != "(":
                    raise self.error(f"function {val!r} requires a parenthesized argument")
                self.take()
                if self.peek()[1] == ")":
                    raise self.error(f"arity mismatch: {val} takes exactly one argument, got none")
                arg = self.expr()
                if self.peek()[1] == ",":
                    raise self.error(f"arity mismatch: {val} takes exactly one argument")
                self.expect(")")
                return Call(val, arg)
            raise self.error(f"unknown identifier {val!r}", pos)
        if val == "(":
            self.take()
            node = self.expr()
            if self.peek()[1] == ",":
                raise self.error("unexpected ',' outside a function call")
            self.expect(")")
            return node
        if kind == "end":
            raise self.error("unexpected end of input")
        if val == ")":
            raise self.error("unbalanced parentheses: unexpected ')'")
        raise self.error(f"unexpected token {val!r}")


def parse_expression(source: str) -> Expression:
    """Parse ``source`` into an AST; raises :class:`ExpressionError` with a position."""
    return _Parser(source).parse()


# ---------------------------------------------------------------------------
# printing
# ---------------------------------------------------------------------------

_PREC = {"+": 1, "-": 1, "*": 2, "/": 2, "^": 4}


def _prec(node) -> int:
    if isinstance(node, BinOp):
        return _PREC[node.op]
    if isinstance(node, Neg):
        return 3
    return 5


def _fmt(node, min_prec: int) -> str:
    text = _raw(node)
    return f"({text})" if _prec(node) < min_prec else text


def _raw(node) -> str:
    if isinstance(node, Num):
        text = repr(float(node.value))
        return f"({text})" if node.value < 0 or text.startswith("-") else text
    if isinstance(node, Var):
        return node.name
    if isinstance(node, Const):
        return node.name
    if isinstance(node, Neg):
        return "-" + _fmt(node.arg, 3)
    if isinstance(node, Call):
        return f"{node.func}({_raw(node.arg)})"
    if isinstance(node, BinOp):
        p = _PREC[node.op]
        if node.op == "^":
            return f"{_fmt(node.left, 5)}^{_fmt(node.right, 3)}"
        return f"{_fmt(node.left, p)} {node.op} {_fmt(node.right, p + 1)}"
    raise TypeError(f"not an expression node: {node!r}")


def to_string(node: Expression) -> str:
    """Print ``node`` so that ``parse_expression(to_string(node)) == node``."""
    return _raw(node)


# ---------------------------------------------------------------------------
# evaluation
# ---------------------------------------------------------------------------

def variables(node: Expression) -> frozenset:
    if isinstance(node, Var):
        return frozenset([node.name])
    if isinstance(node, (Num, Const)):
        return frozenset()
    if isinstance(node, (Neg, Call)):
        return variables(node.arg)
    return variables(node.left) | variables(node.right)


def evaluate(node: Expression, t=0.0, x=0.0):
    """Evaluate with numpy broadcasting between ``t`` and ``x``."""
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        out = _eval(node, np.asarray(t, dtype=float), np.asarray(x, dtype=float))
    return out


def _eval(node, t, x):
    if isinstance(node, Num):
        return np.float64(node.value)
    if isinstance(node, Var):
        return t if node.name == "t" else x
    if isinstance(node, Const):
        return np.float64(np.pi)
    if isinstance(node, Neg):
        return -_eval(node.arg, t, x)
    if isinstance(node, Call):
        a = _eval(node.arg, t, x)
        if node.func == "sin":
            return np.sin(a)
        if node.func == "cos":
            return np.cos(a)
        if node.func == "exp":
            return np.exp(a)
        return bump(a, _bump_order(node.func))
    a = _eval(node.left, t, x)
    b = _eval(node.right, t, x)
    if node.op == "+":
        return a + b
    if node.op == "-":
        return a - b
    if node.op == "*":
        return a * b
    if node.op == "/":
        return a / b
    return np.power(a, b)


# ---------------------------------------------------------------------------
# symbolic differentiation
# ---------------------------------------------------------------------------

ZERO = Num(0.0)
ONE = Num(1.0)


def _is(node, value) -> bool:
    return isinstance(node, Num) and node.value == value


def _neg(a):
    if isinstance(a, Num):
        return Num(-a.value)
    if isinstance(a, Neg):
        return a.arg
    return Neg(a)


def _add(a, b):
    if _is(a, 0.0):
        return b
    if _is(b, 0.0):
        return a
    if isinstance(a, Num) and isinstance(b, Num):
        return Num(a.value + b.value)
    return BinOp("+", a, b)


def _sub(a, b):
    if _is(b, 0.0):
        return a
    if _is(a, 0.0):
        return _neg(b)
    if isinstance(a, Num) and isinstance(b, Num):
        return Num(a.value - b.value)
    return BinOp("-", a, b)


def _mul(a, b):
    if _is(a, 0.0) or _is(b, 0.0):
        return ZERO
    if _is(a, 1.0):
        return b
    if _is(b, 1.0):
        return a
    if _is(a, -1.0):
        return _neg(b)
    if _is(b, -1.0):
        return _neg(a)
    if isinstance(a, Num) and isinstance(b, Num):
        return Num(a.value * b.value)
    return BinOp("*", a, b)


def _div(a, b):
    if _is(a, 0.0):
        return ZERO
    if _is(b, 1.0):
        return a
    return BinOp("/", a, b)


def _pow(a, b):
    if _is(b, 1.0):
        return a
    if _is(b, 0.0):
        return ONE
    return BinOp("^", a, b)


def _d(node, var):
    if isinstance(node, (Num, Const)):
        return ZERO
    if isinstance(node, Var):
        return ONE if node.name == var else ZERO
    if isinstance(node, Neg):
        return _neg(_d(node.arg, var))
    if isinstance(node, Call):
        inner = _d(node.arg, var)
        if _is(inner, 0.0):
            return ZERO
        g = node.arg
        if node.func == "sin":
            outer = Call("cos", g)
        elif node.func == "cos":
            outer = _neg(Call("sin", g))
        elif node.func == "exp":
            outer = node
        else:
            outer = Call(f"bump{_bump_order(node.func) + 1}", g)
        return _mul(outer, inner)
    a, b = node.left, node.right
    if node.op == "+":
        return _add(_d(a, var), _d(b, var))
    if node.op == "-":
        return _sub(_d(a, var), _d(b, var))
    if node.op == "*":
        return _add(_mul(_d(a, var), b), _mul(a, _d(b, var)))
    if node.op == "/":
        da, db = _d(a, var), _d(b, var)
        if _is(db, 0.0):
            return _div(da, b)
        return _div(_sub(_mul(da, b), _mul(a, db)), _pow(b, Num(2.0)))
    # power
    if var in variables(b):
        raise ExpressionError(f"cannot differentiate a power with an exponent depending on {var!r}: {to_string(node)}")
    da = _d(a, var)
    if _is(da, 0.0):
        return ZERO
    lowered = Num(b.value - 1.0) if isinstance(b, Num) else _sub(b, ONE)
    return _mul(_mul(b, _pow(a, lowered)), da)


def differentiate(node: Expression, var: str, order: int = 1) -> Expression:
    if var not in VARIABLES:
        raise ExpressionError(f"unknown differentiation variable {var!r}")
    if order < 1:
        raise ValueError("order must be >= 1")
    for _ in range(order):
        node = _d(node, var)
    return node
