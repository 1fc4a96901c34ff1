"""Scalar expressions over named real variables.

Problem files describe ``A(t)``, ``f(t)`` and ``f(x, t)`` entry by entry as
infix strings such as ``"-x1 + 0.1*sin(x1) + 1"``.  This module parses them
into a small immutable AST and evaluates it in IEEE double precision.

Precedence, tightest first: ``^`` (right associative), unary ``-``,
``* /``, ``+ -`` (both left associative).  So ``-2^2`` is ``-(2^2)`` and
``2^-1`` is ``2^(-1)``.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Callable, Iterable, Mapping, Union

from .errors import EvalError, ExprSyntaxError, UnknownFunction, UnknownIdentifier

__all__ = [
    "Num", "Var", "Neg", "BinOp", "Call", "Expr", "FUNCTIONS",
    "parse_expr", "eval_expr", "compile_expr", "to_source", "variables",
]


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


def _log(x):
    if x <= 0.0:
        raise ValueError("log of non-positive value")
    return math.log(x)


def _sqrt(x):
    if x < 0.0:
        raise ValueError("sqrt of negative value")
    return math.sqrt(x)


FUNCTIONS: dict[str, Callable[[float], float]] = {
    "sin": math.sin,
    "cos": math.cos,
    "exp": math.exp,
    "log": _log,
    "sqrt": _sqrt,
    "abs": abs,
    "tanh": math.tanh,
}

_TOKEN = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>[-+*/^()])
    """,
    re.VERBOSE,
)


class _Parser:
    def __init__(self, source: str, allowed: frozenset[str]):
        self.source = source
        self.allowed = allowed
        self.tokens = self._tokenize(source)
        self.pos = 0

    def _byte_offset(self, char_index: int) -> int:
        return len(self.source[:char_index].encode("utf-8"))

    def _error(self, cls, message, char_index):
        return cls(message, offset=self._byte_offset(char_index), source=self.source)

    def _tokenize(self, s):
        out = []
        i = 0
        while i < len(s):
            m = _TOKEN.match(s, i)
            if m is None:
                raise self._error(ExprSyntaxError, f"unexpected character {s[i]!r}", i)
            kind = m.lastgroup
            if kind != "ws":
                out.append((kind, m.group(), i))
            i = m.end()
        out.append(("end", "", len(s)))
        return out

    def peek(self):
        return self.tokens[self.pos]

    def advance(self):
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect(self, text):
        kind, value, at = self.advance()
        if value != text or kind == "end":
            found = "end of input" if kind == "end" else repr(value)
            raise self._error(ExprSyntaxError, f"expected {text!r}, found {found}", at)

    def parse(self):
        node = self.expression()
        kind, value, at = self.peek()
        if kind != "end":
            raise self._error(ExprSyntaxError, f"unexpected token {value!r}", at)
        return node

    def expression(self):
        node = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.advance()[1]
            node = BinOp(op, node, self.term())
        return node

    def term(self):
        node = self.unary()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.advance()[1]
            node = BinOp(op, node, self.unary())
        return node

    def unary(self):
        if self.peek()[:2] == ("op", "-"):
            self.advance()
            return Neg(self.unary())
        return self.power()

    def power(self):
        base = self.primary()
        if self.peek()[:2] == ("op", "^"):
            self.advance()
            # exponent parsed at unary level: right associative, allows 2^-1
            return BinOp("^", base, self.unary())
        return base

    def primary(self):
        kind, value, at = self.advance()
        if kind == "num":
            x = float(value)
            if not math.isfinite(x):
                raise self._error(ExprSyntaxError, f"literal {value} overflows", at)
            return Num(x)
        if kind == "name":
            if self.peek()[:2] == ("op", "("):
                if value not in FUNCTIONS:
                    raise self._error(UnknownFunction, f"unknown function {value!r}", at)
                self.advance()
                arg = self.expression()
                self.expect(")")
                return Call(value, arg)
            if value in FUNCTIONS:
                raise self._error(ExprSyntaxError, f"function {value!r} needs an argument", at)
            if value not in self.allowed:
                raise self._error(UnknownIdentifier, f"unknown identifier {value!r}", at)
            return Var(value)
        if (kind, value) == ("op", "("):
            node = self.expression()
            self.expect(")")
            return node
        found = "end of input" if kind == "end" else repr(value)
        raise self._error(ExprSyntaxError, f"unexpected {found}", at)


def parse_expr(source: str, allowed_vars: Iterable[str] = ("t",)) -> Expr:
    """Parse ``source`` into an AST whose variables all lie in ``allowed_vars``.

    Raises ExprSyntaxError, UnknownIdentifier or UnknownFunction; each
    carries the byte offset of the offending token.

    >>> parse_expr("2*t+1")
    BinOp(op='+', left=BinOp(op='*', left=Num(value=2.0), right=Var(name='t')), right=Num(value=1.0))
    """
    if not source or not source.strip():
        raise ExprSyntaxError("empty expression", offset=0, source=source)
    return _Parser(source, frozenset(allowed_vars)).parse()


def _checked(x: float) -> float:
    if not math.isfinite(x):
        raise EvalError(f"non-finite intermediate {x!r}")
    return x


def _power(a: float, b: float) -> float:
    if a < 0.0 and not float(b).is_integer():
        raise EvalError(f"negative base {a!r} with non-integer exponent {b!r}")
    return a ** b


def _binary(op: str, a: float, b: float) -> float:
    try:
        if op == "+":
            r = a + b
        elif op == "-":
            r = a - b
        elif op == "*":
            r = a * b
        elif op == "/":
            r = a / b
        else:
            r = _power(a, b)
    except (ZeroDivisionError, OverflowError) as exc:
        raise EvalError(f"{a!r} {op} {b!r}: {exc}") from None
    return _checked(r)


def _apply(func: str, x: float) -> float:
    try:
        r = FUNCTIONS[func](x)
    except (ValueError, OverflowError) as exc:
        raise EvalError(f"{func}({x!r}): {exc}") from None
    return _checked(r)


def eval_expr(e: Expr, env: Mapping[str, float]) -> float:
    """Evaluate ``e`` with variables bound by ``env``.

    Any non-finite intermediate (pole, overflow, log of a non-positive
    number) raises EvalError instead of propagating NaN or inf.
    """
    if isinstance(e, Num):
        return e.value
    if isinstance(e, Var):
        try:
            return _checked(float(env[e.name]))
        except KeyError:
            raise EvalError(f"unbound variable {e.name!r}") from None
    if isinstance(e, Neg):
        return -eval_expr(e.operand, env)
    if isinstance(e, BinOp):
        return _binary(e.op, eval_expr(e.left, env), eval_expr(e.right, env))
    if isinstance(e, Call):
        return _apply(e.func, eval_expr(e.arg, env))
    raise TypeError(f"not an expression node: {e!r}")


def compile_expr(e: Expr, argnames: Iterable[str]) -> Callable[..., float]:
    """Turn ``e`` into a closure taking positional arguments ``argnames``.

    Same arithmetic as eval_expr, without the per-call dict lookups; used
    on the integrator's hot path.
    """
    index = {name: i for i, name in enumerate(argnames)}

    def build(node):
        if isinstance(node, Num):
            v = node.value
            return lambda args: v
        if isinstance(node, Var):
            if node.name not in index:
                raise EvalError(f"unbound variable {node.name!r}")
            i = index[node.name]
            return lambda args: _checked(float(args[i]))
        if isinstance(node, Neg):
            inner = build(node.operand)
            return lambda args: -inner(args)
        if isinstance(node, BinOp):
            lhs, rhs, op = build(node.left), build(node.right), node.op
            return lambda args: _binary(op, lhs(args), rhs(args))
        if isinstance(node, Call):
            inner, func = build(node.arg), node.func
            return lambda args: _apply(func, inner(args))
        raise TypeError(f"not an expression node: {node!r}")

    body = build(e)
    return lambda *args: body(args)


def variables(e: Expr) -> set[str]:
    if isinstance(e, Var):
        return {e.name}
    if isinstance(e, Num):
        return set()
    if isinstance(e, Neg):
        return variables(e.operand)
    if isinstance(e, BinOp):
        return variables(e.left) | variables(e.right)
    return variables(e.arg)


_PREC = {"+": 1, "-": 1, "*": 2, "/": 2, "^": 4}
_NEG_PREC = 3
_ATOM_PREC = 5


def _prec(e: Expr) -> int:
    if isinstance(e, BinOp):
        return _PREC[e.op]
    if isinstance(e, Neg):
        return _NEG_PREC
    return _ATOM_PREC


def to_source(e: Expr) -> str:
    """Render ``e`` with the minimum parentheses needed to reparse it identically."""

    def wrap(node, needed):
        s = to_source(node)
        return f"({s})" if _prec(node) < needed else s

    if isinstance(e, Num):
        return repr(e.value)
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Call):
        return f"{e.func}({to_source(e.arg)})"
    if isinstance(e, Neg):
        return "-" + wrap(e.operand, _NEG_PREC)
    p = _PREC[e.op]
    if e.op == "^":
        return f"{wrap(e.left, _ATOM_PREC)}^{wrap(e.right, _NEG_PREC)}"
    return f"{wrap(e.left, p)} {e.op} {wrap(e.right, p + 1)}"
