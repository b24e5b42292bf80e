"""A small arithmetic expression language for scenario files.

Grammar (lowest to highest precedence, all binary operators left-associative)::

    expr    := term (("+" | "-") term)*
    term    := power (("*" | "/") power)*
    power   := unary ("^" unary)*
    unary   := ("-" | "+") unary | postfix
    postfix := primary ("[" expr "]")*
    primary := NUMBER | NAME | NAME "(" args ")" | "(" expr ")" | "[" args "]"

Unary minus binds tighter than ``^``, so ``-2^2`` is ``4``.  Values are
floats, or numpy arrays built by bracket literals and indexed with ``v[i]``.
The name ``pi`` is a constant unless bound in the evaluation context.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Mapping, Union

import numpy as np

from .errors import DomainError, ExprSyntaxError, UnboundVariable, UnknownFunction

__all__ = [
    "Num", "Var", "Unary", "Binary", "Call", "Index", "ListLit",
    "Expression", "parse", "evaluate", "to_source", "dump", "bump", "FUNCTIONS", "point_bindings",
]


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Unary:
    op: str
    operand: "Node"


@dataclass(frozen=True)
class Binary:
    op: str
    left: "Node"
    right: "Node"


@dataclass(frozen=True)
class Call:
    name: str
    args: tuple


@dataclass(frozen=True)
class Index:
    target: "Node"
    index: "Node"


@dataclass(frozen=True)
class ListLit:
    items: tuple


Node = Union[Num, Var, Unary, Binary, Call, Index, ListLit]

CONSTANTS = {"pi": math.pi}


def bump(x: float, a: float, b: float) -> float:
    """Smooth bump supported on the open interval (a, b), peak value 1 at the midpoint.

    Exactly zero outside (a, b).
    """
    if not a < x < b:
        return 0.0
    half = 0.5 * (b - a)
    return math.exp(1.0 / (half * half) - 1.0 / ((x - a) * (b - x)))


def _log(x):
    if x <= 0:
        raise ValueError("log of non-positive value")
    return math.log(x)


def _sqrt(x):
    if x < 0:
        raise ValueError("sqrt of negative value")
    return math.sqrt(x)


# name -> (callable, arity); arity None means one or more arguments
FUNCTIONS = {
    "sin": (math.sin, 1),
    "cos": (math.cos, 1),
    "tan": (math.tan, 1),
    "exp": (math.exp, 1),
    "log": (_log, 1),
    "sqrt": (_sqrt, 1),
    "abs": (abs, 1),
    "min": (min, None),
    "max": (max, None),
    "bump": (bump, 3),
    "atan2": (math.atan2, 2),
}

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<name>[A-Za-z_]\w*)|(?P<op>[-+*/^()\[\],]))"
)


def _byte_offset(text: str, index: int) -> int:
    return len(text[:index].encode("utf-8"))


def _tokenize(text: str):
    tokens = []
    pos = 0
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        m = _TOKEN.match(text, pos)
        if m is None or m.end() == pos:
            start = pos + (len(text[pos:]) - len(text[pos:].lstrip()))
            raise ExprSyntaxError(f"unexpected character {text[start]!r}", _byte_offset(text, start))
        kind = m.lastgroup
        start = m.start(kind)
        tokens.append((kind, m.group(kind), _byte_offset(text, start)))
        pos = m.end()
    tokens.append(("end", "", _byte_offset(text, len(text))))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def advance(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, op):
        kind, value, offset = self.peek()
        if kind != "op" or value != op:
            what = "end of input" if kind == "end" else repr(value)
            raise ExprSyntaxError(f"expected {op!r}, found {what}", offset)
        return self.advance()

    def at_op(self, *ops):
        kind, value, _ = self.peek()
        return kind == "op" and value in ops

    def parse(self) -> Node:
        node = self.expr()
        kind, value, offset = self.peek()
        if kind != "end":
            raise ExprSyntaxError(f"unexpected token {value!r}", offset)
        return node

    def expr(self) -> Node:
        node = self.term()
        while self.at_op("+", "-"):
            op = self.advance()[1]
            node = Binary(op, node, self.term())
        return node

    def term(self) -> Node:
        node = self.power()
        while self.at_op("*", "/"):
            op = self.advance()[1]
            node = Binary(op, node, self.power())
        return node

    def power(self) -> Node:
        node = self.unary()
        while self.at_op("^"):
            self.advance()
            node = Binary("^", node, self.unary())
        return node

    def unary(self) -> Node:
        if self.at_op("-", "+"):
            op = self.advance()[1]
            return Unary(op, self.unary())
        return self.postfix()

    def postfix(self) -> Node:
        node = self.primary()
        while self.at_op("["):
            self.advance()
            node = Index(node, self.expr())
            self.expect("]")
        return node

    def args(self, close: str) -> tuple:
        items = []
        if self.at_op(close):
            self.advance()
            return tuple(items)
        while True:
            items.append(self.expr())
            if self.at_op(","):
                self.advance()
                continue
            self.expect(close)
            return tuple(items)

    def primary(self) -> Node:
        kind, value, offset = self.advance()
        if kind == "num":
            return Num(float(value))
        if kind == "name":
            if self.at_op("("):
                if value not in FUNCTIONS:
                    raise UnknownFunction(f"unknown function {value!r}", offset)
                self.advance()
                args = self.args(")")
                arity = FUNCTIONS[value][1]
                if (arity is None and not args) or (arity is not None and len(args) != arity):
                    raise ExprSyntaxError(f"wrong number of arguments for {value}", offset)
                return Call(value, args)
            return Var(value)
        if kind == "op" and value == "(":
            node = self.expr()
            self.expect(")")
            return node
        if kind == "op" and value == "[":
            items = self.args("]")
            if not items:
                raise ExprSyntaxError("empty list literal", offset)
            return ListLit(items)
        what = "end of input" if kind == "end" else repr(value)
        raise ExprSyntaxError(f"unexpected {what}", offset)


def _free_vars(node: Node, out: set):
    if isinstance(node, Var):
        out.add(node.name)
    elif isinstance(node, Unary):
        _free_vars(node.operand, out)
    elif isinstance(node, Binary):
        _free_vars(node.left, out)
        _free_vars(node.right, out)
    elif isinstance(node, (Call, ListLit)):
        for a in (node.args if isinstance(node, Call) else node.items):
            _free_vars(a, out)
    elif isinstance(node, Index):
        _free_vars(node.target, out)
        _free_vars(node.index, out)


@dataclass(frozen=True)
class Expression:
    ast: Node
    source: str = ""

    @property
    def free_vars(self) -> frozenset:
        out: set = set()
        _free_vars(self.ast, out)
        return frozenset(out - set(CONSTANTS))

    def __call__(self, ctx: Mapping | None = None, **bindings):
        merged = dict(ctx or {})
        merged.update(bindings)
        return evaluate(self, merged)

    def __eq__(self, other):
        return isinstance(other, Expression) and self.ast == other.ast

    def __hash__(self):
        return hash(self.ast)


def parse(text: str) -> Expression:
    return Expression(_Parser(text).parse(), text)


def _finite(value):
    if isinstance(value, np.ndarray):
        if not np.all(np.isfinite(value)):
            raise DomainError("non-finite result")
    elif not math.isfinite(value):
        raise DomainError("non-finite result")
    return value


def _binary(op, a, b):
    if isinstance(a, np.ndarray) or isinstance(b, np.ndarray):
        with np.errstate(all="raise"):
            try:
                if op == "+":
                    return a + b
                if op == "-":
                    return a - b
                if op == "*":
                    return a * b
                if op == "/":
                    return a / b
                return np.power(a, b)
            except (FloatingPointError, ValueError) as exc:
                raise DomainError(str(exc)) from None
    try:
        if op == "+":
            return a + b
        if op == "-":
            return a - b
        if op == "*":
            return a * b
        if op == "/":
            return a / b
        return math.pow(a, b)
    except (ZeroDivisionError, ValueError, OverflowError) as exc:
        raise DomainError(f"{op}: {exc}") from None


def _eval(node: Node, ctx: Mapping):
    if isinstance(node, Num):
        return node.value
    if isinstance(node, Var):
        if node.name in ctx:
            v = ctx[node.name]
            return np.asarray(v, dtype=float) if isinstance(v, (list, tuple, np.ndarray)) else float(v)
        if node.name in CONSTANTS:
            return CONSTANTS[node.name]
        raise UnboundVariable(f"unbound variable {node.name!r}")
    if isinstance(node, Unary):
        v = _eval(node.operand, ctx)
        return -v if node.op == "-" else v
    if isinstance(node, Binary):
        return _finite(_binary(node.op, _eval(node.left, ctx), _eval(node.right, ctx)))
    if isinstance(node, Call):
        fn = FUNCTIONS[node.name][0]
        args = [_eval(a, ctx) for a in node.args]
        if any(isinstance(a, np.ndarray) for a in args):
            raise DomainError(f"{node.name} expects scalar arguments")
        try:
            return _finite(float(fn(*args)))
        except (ValueError, OverflowError) as exc:
            raise DomainError(f"{node.name}: {exc}") from None
    if isinstance(node, Index):
        target = _eval(node.target, ctx)
        idx = _eval(node.index, ctx)
        if not isinstance(target, np.ndarray):
            raise DomainError("indexing a scalar")
        if isinstance(idx, np.ndarray) or idx != int(idx):
            raise DomainError("index must be an integer")
        i = int(idx)
        if not 0 <= i < target.shape[0]:
            raise DomainError(f"index {i} out of range")
        out = target[i]
        return float(out) if np.ndim(out) == 0 else out
    if isinstance(node, ListLit):
        items = [_eval(a, ctx) for a in node.items]
        try:
            return np.array(items, dtype=float)
        except ValueError:
            raise DomainError("ragged list literal") from None
    raise TypeError(f"not an expression node: {node!r}")


def point_bindings(name: str, point) -> dict:
    """Bindings for a point: the vector ``name`` and its components ``name0, name1, ...``."""
    p = np.asarray(point, float)
    out = {name: p}
    out.update({f"{name}{i}": float(v) for i, v in enumerate(p)})
    return out


def evaluate(expr: Expression | Node, ctx: Mapping | None = None):
    """Evaluate with IEEE-754 double semantics; returns a float or a numpy array."""
    node = expr.ast if isinstance(expr, Expression) else expr
    return _eval(node, ctx or {})


def _num_source(v: float) -> str:
    return repr(float(v))


def to_source(expr: Expression | Node) -> str:
    """Fully parenthesised source text; ``parse(to_source(e))`` reproduces ``e``."""
    node = expr.ast if isinstance(expr, Expression) else expr
    if isinstance(node, Num):
        return _num_source(node.value)
    if isinstance(node, Var):
        return node.name
    if isinstance(node, Unary):
        return f"({node.op}{to_source(node.operand)})"
    if isinstance(node, Binary):
        return f"({to_source(node.left)} {node.op} {to_source(node.right)})"
    if isinstance(node, Call):
        return f"{node.name}({', '.join(to_source(a) for a in node.args)})"
    if isinstance(node, Index):
        return f"{to_source(node.target)}[{to_source(node.index)}]"
    if isinstance(node, ListLit):
        return f"[{', '.join(to_source(a) for a in node.items)}]"
    raise TypeError(f"not an expression node: {node!r}")


def dump(expr: Expression | Node) -> str:
    """S-expression rendering of the AST, e.g. ``(+ 2 (* 3 4))``."""
    node = expr.ast if isinstance(expr, Expression) else expr
    if isinstance(node, Num):
        v = node.value
        return str(int(v)) if v.is_integer() and abs(v) < 1e15 else repr(v)
    if isinstance(node, Var):
        return node.name
    if isinstance(node, Unary):
        return f"(neg {dump(node.operand)})" if node.op == "-" else f"(pos {dump(node.operand)})"
    if isinstance(node, Binary):
        return f"({node.op} {dump(node.left)} {dump(node.right)})"
    if isinstance(node, Call):
        return "(" + " ".join([node.name] + [dump(a) for a in node.args]) + ")"
    if isinstance(node, Index):
        return f"(index {dump(node.target)} {dump(node.index)})"
    if isinstance(node, ListLit):
        return "(list " + " ".join(dump(a) for a in node.items) + ")"
    raise TypeError(f"not an expression node: {node!r}")
