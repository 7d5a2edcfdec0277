"""A small arithmetic expression language for target functions.

Grammar::

    expr   := term (('+' | '-') term)*
    term   := unary (('*' | '/') unary)*
    unary  := '-' unary | '+' unary | power
    power  := atom ('^' unary)?
    atom   := number | name | name '(' expr ')' | '(' expr ')'

Names are ``x``, ``y``, ``pi``, ``e`` and the functions sin, cos, exp, tanh,
log, sqrt.  ``^`` is right-associative and binds tighter than unary minus on
its left (``-x^2 == -(x^2)``).
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Callable

import numpy as np


class ExpressionError(ValueError):
    def __init__(self, message: str, text: str, pos: int) -> None:
        prefix = f"{message} at position {pos}: "
        super().__init__(f"{prefix}{text}\n{' ' * (len(prefix) + pos)}^")
        self.reason = message
        self.pos = pos


_FUNCS: dict[str, Callable[[np.ndarray], np.ndarray]] = {
    "sin": np.sin,
    "cos": np.cos,
    "exp": np.exp,
    "tanh": np.tanh,
    "log": np.log,
    "sqrt": np.sqrt,
}
_CONSTS = {"pi": np.pi, "e": np.e}
_VARS = ("x", "y")
_TOKEN = re.compile(r"\s*(?:(\d+\.?\d*(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?)|([A-Za-z_]\w*)|(\S))")

Node = Callable[[np.ndarray, np.ndarray], np.ndarray]


@dataclass
class _Parser:
    text: str
    tokens: list[tuple[str, str, int]] = field(default_factory=list)
    i: int = 0
    used: set[str] = field(default_factory=set)

    def __post_init__(self) -> None:
        pos = 0
        while pos < len(self.text):
            mt = _TOKEN.match(self.text, pos)
            if mt is None or mt.end() == pos:
                break
            num, name, sym = mt.groups()
            start = mt.start(1) if num else mt.start(2) if name else mt.start(3)
            if num:
                self.tokens.append(("num", num, start))
            elif name:
                self.tokens.append(("name", name, start))
            elif sym is not None:
                if sym not in "+-*/^()":
                    raise ExpressionError(f"unexpected character {sym!r}", self.text, start)
                self.tokens.append(("sym", sym, start))
            pos = mt.end()
        self.tokens.append(("end", "", len(self.text)))

    def peek(self) -> tuple[str, str, int]:
        return self.tokens[self.i]

    def take(self) -> tuple[str, str, int]:
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, sym: str) -> None:
        kind, val, pos = self.take()
        if (kind, val) != ("sym", sym):
            raise ExpressionError(f"expected {sym!r}", self.text, pos)

    def parse(self) -> Node:
        if self.peek()[0] == "end":
            raise ExpressionError("empty expression", self.text, 0)
        node = self.expr()
        kind, val, pos = self.peek()
        if kind != "end":
            raise ExpressionError(f"unexpected {val!r}", self.text, pos)
        return node

    def expr(self) -> Node:
        node = self.term()
        while self.peek()[:2] in (("sym", "+"), ("sym", "-")):
            op = self.take()[1]
            rhs = self.term()
            node = (lambda a, b: lambda x, y: a(x, y) + b(x, y))(node, rhs) if op == "+" else (lambda a, b: lambda x, y: a(x, y) - b(x, y))(node, rhs)
        return node

    def term(self) -> Node:
        node = self.unary()
        while self.peek()[:2] in (("sym", "*"), ("sym", "/")):
            op = self.take()[1]
            rhs = self.unary()
            node = (lambda a, b: lambda x, y: a(x, y) * b(x, y))(node, rhs) if op == "*" else (lambda a, b: lambda x, y: a(x, y) / b(x, y))(node, rhs)
        return node

    def unary(self) -> Node:
        if self.peek()[:2] == ("sym", "-"):
            self.take()
            inner = self.unary()
            return lambda x, y: -inner(x, y)
        if self.peek()[:2] == ("sym", "+"):
            self.take()
            return self.unary()
        return self.power()

    def power(self) -> Node:
        base = self.atom()
        if self.peek()[:2] == ("sym", "^"):
            self.take()
            exp = self.unary()
            return lambda x, y: np.power(base(x, y), exp(x, y))
        return base

    def atom(self) -> Node:
        kind, val, pos = self.take()
        if kind == "num":
            c = float(val)
            return lambda x, y: np.full(np.shape(x), c)
        if kind == "name":
            if val in _FUNCS:
                fn = _FUNCS[val]
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return lambda x, y: fn(arg(x, y))
            if val in _CONSTS:
                c = _CONSTS[val]
                return lambda x, y: np.full(np.shape(x), c)
            if val in _VARS:
                self.used.add(val)
                return (lambda x, y: x) if val == "x" else (lambda x, y: y)
            raise ExpressionError(f"unknown identifier {val!r}", self.text, pos)
        if (kind, val) == ("sym", "("):
            node = self.expr()
            self.expect(")")
            return node
        if kind == "end":
            raise ExpressionError("unexpected end of expression", self.text, pos)
        raise ExpressionError(f"unexpected {val!r}", self.text, pos)


@dataclass(frozen=True)
class Expression:
    """Parsed function of x (n = 1) or of (x, y) (n = 2)."""

    text: str
    n: int
    _node: Node = field(repr=False, compare=False)

    def __call__(self, p: np.ndarray | float) -> np.ndarray | float:
        p = np.asarray(p, dtype=float)
        if self.n == 1:
            if p.ndim >= 1 and p.shape[-1:] == (1,) and p.ndim == 2:
                p = p[:, 0]
            out = self._node(p, np.zeros_like(p))
        else:
            if p.shape[-1] != 2:
                raise ValueError("two-variable expression expects points of shape (..., 2)")
            out = self._node(p[..., 0], p[..., 1])
        return float(out) if np.ndim(out) == 0 else out


def parse_expression(text: str, n: int | None = None) -> Expression:
    """Parse ``text``; the dimension is 2 when y appears (or when ``n`` says so)."""
    if not text or not text.strip():
        raise ExpressionError("empty expression", text or "", 0)
    p = _Parser(text)
    node = p.parse()
    dim = 2 if "y" in p.used else 1
    if n is not None:
        if n < dim:
            raise ExpressionError("expression uses y but dimension 1 was requested", text, text.find("y"))
        dim = n
    return Expression(text, dim, node)


@dataclass(frozen=True)
class CatalogEntry:
    name: str
    expression: str
    n: int
    kind: str = "logistic"
    theta: int = 10
    lr: float = 0.05
    steps: int = 5000
    step: float = 0.01
    gamma1: float = 0.01
    gamma2: float = 0.01
    gamma3: float = 0.01
    gamma4: float = 0.05


CATALOG: dict[str, CatalogEntry] = {
    e.name: e
    for e in (
        CatalogEntry("cubic", "x^3+3", 1),
        CatalogEntry("steep-cubic", "32*x^3+3", 1, gamma3=0.05),
        CatalogEntry("exp2", "exp(2*x)", 1),
        CatalogEntry("exp8", "exp(8*x)", 1, lr=0.0001, gamma1=0.0001, gamma2=0.0001),
        CatalogEntry("sin15", "30*(sin(15*x)+1)", 1, lr=0.001, steps=10000, gamma2=0.001, gamma3=0.05),
        CatalogEntry("sin6", "30*sin(6*x+3)+3", 1, lr=0.01, gamma2=0.001, gamma3=0.05),
        CatalogEntry("cubic2d", "16*(x^3+y^3)+3", 2, theta=20, lr=0.01, step=0.1),
        CatalogEntry("sin2d", "sin(3*(x+y+1))+3", 2, theta=20, lr=0.01, step=0.1),
        CatalogEntry("sin20-tanh", "sin(20*x)", 1, kind="tanh", theta=20),
    )
}


def lookup(name_or_expr: str) -> CatalogEntry | None:
    """Catalog entry by name or by its exact expression text (spaces ignored)."""
    if name_or_expr in CATALOG:
        return CATALOG[name_or_expr]
    key = name_or_expr.replace(" ", "")
    for e in CATALOG.values():
        if e.expression.replace(" ", "") == key:
            return e
    return None
