"""A tiny arithmetic expression language for scenario files.

Grammar (see docs/expressions.md for the EBNF)::

    expr   := term (('+' | '-') term)*
    term   := unary (('*' | '/') unary)*
    unary  := '-' unary | power
    power  := atom ('^' unary)?          # right associative
    atom   := number | name | func '(' expr ')' | '(' expr ')'

``^`` binds tighter than unary minus, so ``-x^2`` is ``-(x^2)``.  Names are
``t``, ``x1`` .. ``x9`` and ``pi``.  Evaluation is vectorized over numpy
arrays.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass

import numpy as np

from .errors import ParseError

FUNCTIONS = {
    "sin": np.sin,
    "cos": np.cos,
    "exp": np.exp,
    "log": np.log,
    "sqrt": np.sqrt,
    "tanh": np.tanh,
}
VARIABLES = ("t",) + tuple(f"x{i}" for i in range(1, 10))
CONSTANTS = {"pi": math.pi}

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<name>[A-Za-z_][A-Za-z_0-9]*)|(?P<op>[-+*/^()]))"
)


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Call:
    func: str
    arg: object


@dataclass(frozen=True)
class Neg:
    arg: object


@dataclass(frozen=True)
class BinOp:
    op: str
    left: object
    right: object


_PREC = {"+": 1, "-": 1, "*": 2, "/": 2, "^": 4}


class _Tokens:
    def __init__(self, text: str):
        self.text = text
        self.raw = text.encode("utf-8")
        self.items = []  # (kind, value, byte offset)
        pos = 0
        while True:
            m = _TOKEN.match(text, pos)
            if m is None or m.end() == pos:
                rest = text[pos:]
                if rest.strip() == "":
                    break
                start = pos + (len(rest) - len(rest.lstrip()))
                raise ParseError(f"unexpected character {text[start]!r}", self._byte(start),
                                 {"number", "name", "operator"})
            kind = m.lastgroup
            self.items.append((kind, m.group(kind), self._byte(m.start(kind))))
            pos = m.end()
        self.end = len(self.raw)
        self.i = 0

    def _byte(self, charpos: int) -> int:
        return len(self.text[:charpos].encode("utf-8"))

    def peek(self):
        return self.items[self.i] if self.i < len(self.items) else ("eof", None, self.end)

    def next(self):
        tok = self.peek()
        self.i += 1
        return tok


_ATOM_START = frozenset({"number", "name", "(", "-"})


def parse_expression(text: str):
    toks = _Tokens(text)
    tree = _parse_binary(toks, 1)
    kind, val, off = toks.peek()
    if kind != "eof":
        raise ParseError(f"unexpected {val!r}", off, {"operator", "end of input"})
    return tree


def _parse_binary(toks: _Tokens, min_prec: int):
    left = _parse_unary(toks)
    while True:
        kind, val, _ = toks.peek()
        if kind != "op" or val not in ("+", "-", "*", "/") or _PREC[val] < min_prec:
            return left
        toks.next()
        right = _parse_binary(toks, _PREC[val] + 1)
        left = BinOp(val, left, right)


def _parse_unary(toks: _Tokens):
    kind, val, _ = toks.peek()
    if kind == "op" and val == "-":
        toks.next()
        return Neg(_parse_unary(toks))
    return _parse_power(toks)


def _parse_power(toks: _Tokens):
    base = _parse_atom(toks)
    kind, val, _ = toks.peek()
    if kind == "op" and val == "^":
        toks.next()
        return BinOp("^", base, _parse_unary(toks))
    return base


def _expect(toks: _Tokens, sym: str):
    kind, val, off = toks.next()
    if kind != "op" or val != sym:
        raise ParseError(f"expected {sym!r}", off, {sym})


def _parse_atom(toks: _Tokens):
    kind, val, off = toks.next()
    if kind == "num":
        return Num(float(val))
    if kind == "name":
        if val in FUNCTIONS:
            _expect(toks, "(")
            arg = _parse_binary(toks, 1)
            _expect(toks, ")")
            return Call(val, arg)
        if val in VARIABLES or val in CONSTANTS:
            return Var(val)
        raise ParseError(f"unknown identifier {val!r}", off,
                         set(VARIABLES) | set(CONSTANTS) | set(FUNCTIONS))
    if kind == "op" and val == "(":
        inner = _parse_binary(toks, 1)
        _expect(toks, ")")
        return inner
    raise ParseError("expected an operand", off, _ATOM_START)


def evaluate(tree, env: dict):
    """Evaluate with ``env`` mapping variable names to scalars or arrays."""
    if isinstance(tree, Num):
        return tree.value
    if isinstance(tree, Var):
        if tree.name in CONSTANTS:
            return CONSTANTS[tree.name]
        try:
            return env[tree.name]
        except KeyError:
            raise KeyError(f"no value bound for variable {tree.name!r}") from None
    if isinstance(tree, Neg):
        return -evaluate(tree.arg, env)
    if isinstance(tree, Call):
        return FUNCTIONS[tree.func](evaluate(tree.arg, env))
    a, b = evaluate(tree.left, env), evaluate(tree.right, env)
    if tree.op == "+":
        return a + b
    if tree.op == "-":
        return a - b
    if tree.op == "*":
        return a * b
    if tree.op == "/":
        return a / b
    return np.power(a, b)


def free_variables(tree) -> set[str]:
    if isinstance(tree, Var):
        return set() if tree.name in CONSTANTS else {tree.name}
    if isinstance(tree, Num):
        return set()
    if isinstance(tree, (Neg, Call)):
        return free_variables(tree.arg)
    return free_variables(tree.left) | free_variables(tree.right)


def to_string(tree) -> str:
    """Fully parenthesized text that parses back to an equivalent tree."""
    if isinstance(tree, Num):
        return repr(tree.value)
    if isinstance(tree, Var):
        return tree.name
    if isinstance(tree, Neg):
        return f"(-{to_string(tree.arg)})"
    if isinstance(tree, Call):
        return f"{tree.func}({to_string(tree.arg)})"
    return f"({to_string(tree.left)} {tree.op} {to_string(tree.right)})"


class Expr:
    """Parsed expression together with its source text."""

    def __init__(self, text: str | float | int):
        self.text = str(text)
        self.tree = parse_expression(self.text)
        self.variables = free_variables(self.tree)

    def __call__(self, t=0.0, coords=()) -> np.ndarray | float:
        env = {"t": t}
        for i, x in enumerate(coords, start=1):
            env[f"x{i}"] = x
        return evaluate(self.tree, env)

    def on_grid(self, coords, t: float = 0.0) -> np.ndarray:
        """Sample on a chart's node coordinates, always returning a full array."""
        shape = coords[0].shape
        val = self(t, coords)
        return np.broadcast_to(np.asarray(val, dtype=float), shape).copy()

    @property
    def depends_on_t(self) -> bool:
        return "t" in self.variables

    @property
    def is_constant(self) -> bool:
        return not self.variables

    def __str__(self) -> str:
        return to_string(self.tree)

    def __repr__(self) -> str:
        return f"Expr({self.text!r})"
