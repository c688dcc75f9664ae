"""Parsing and jet evaluation of scalar-field expressions.

Grammar (``^`` binds tighter than unary minus, which binds tighter than
``*``/``/``; ``^`` is right-associative)::

    expr   := term (('+' | '-') term)*
    term   := unary (('*' | '/') unary)*
    unary  := '-' unary | power
    power  := atom ('^' unary)?
    atom   := NUMBER | IDENT | IDENT '(' expr ')' | '(' expr ')'

Only ``ln`` and ``exp`` may be applied as functions.  Whether an identifier
is a variable or a constant is decided by the :class:`Binding`, not by the
grammar.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Mapping, Sequence, Union

from . import jets
from .errors import DomainError, ExprSyntaxError, UnboundIdentifierError, UnknownFunctionError
from .jets import Jet

FUNCTIONS = ("ln", "exp")


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Neg:
    operand: "Node"


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Node"
    right: "Node"


@dataclass(frozen=True)
class Call:
    func: str
    arg: "Node"


Node = Union[Num, Var, Neg, BinOp, Call]


@dataclass(frozen=True)
class Expression:
    root: Node
    source: str = field(default="", compare=False)

    def __str__(self) -> str:
        return pretty(self)


# -- tokenizer ---------------------------------------------------------------

_TOKEN_RE = re.compile(r"""
    (?P<ws>\s+)
  | (?P<number>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op>[-+*/^()])
""", re.VERBOSE)

_ATOM_START = frozenset({"NUMBER", "IDENT", "(", "-"})


def _tokenize(source: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    while pos < len(source):
        m = _TOKEN_RE.match(source, pos)
        if m is None:
            raise ExprSyntaxError(f"unexpected character {source[pos]!r}", _byte_offset(source, pos))
        kind = m.lastgroup
        text = m.group()
        if kind == "number":
            tokens.append(("NUMBER", text, pos))
        elif kind == "ident":
            tokens.append(("IDENT", text, pos))
        elif kind == "op":
            tokens.append((text, text, pos))
        pos = m.end()
    tokens.append(("EOF", "", len(source)))
    return tokens


def _byte_offset(source: str, pos: int) -> int:
    return len(source[:pos].encode("utf-8"))


class _Parser:
    def __init__(self, source: str):
        self.source = source
        self.tokens = _tokenize(source)
        self.i = 0

    def peek(self) -> tuple[str, str, int]:
        return self.tokens[self.i]

    def advance(self) -> tuple[str, str, int]:
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def fail(self, expected) -> None:
        kind, text, pos = self.peek()
        what = "end of input" if kind == "EOF" else f"token {text!r}"
        raise ExprSyntaxError(f"unexpected {what}", _byte_offset(self.source, pos),
                              frozenset(expected))

    def expect(self, kind: str) -> tuple[str, str, int]:
        if self.peek()[0] != kind:
            self.fail({kind})
        return self.advance()

    def parse(self) -> Node:
        node = self.expr()
        if self.peek()[0] != "EOF":
            self.fail({"+", "-", "*", "/", "^", "EOF"})
        return node

    def expr(self) -> Node:
        node = self.term()
        while self.peek()[0] in ("+", "-"):
            op = self.advance()[0]
            node = BinOp(op, node, self.term())
        return node

    def term(self) -> Node:
        node = self.unary()
        while self.peek()[0] in ("*", "/"):
            op = self.advance()[0]
            node = BinOp(op, node, self.unary())
        return node

    def unary(self) -> Node:
        if self.peek()[0] == "-":
            self.advance()
            return Neg(self.unary())
        return self.power()

    def power(self) -> Node:
        base = self.atom()
        if self.peek()[0] == "^":
            self.advance()
            return BinOp("^", base, self.unary())
        return base

    def atom(self) -> Node:
        kind, text, pos = self.peek()
        if kind == "NUMBER":
            self.advance()
            return Num(float(text))
        if kind == "IDENT":
            self.advance()
            if self.peek()[0] == "(":
                if text not in FUNCTIONS:
                    raise UnknownFunctionError(text, _byte_offset(self.source, pos))
                self.advance()
                arg = self.expr()
                self.expect(")")
                return Call(text, arg)
            return Var(text)
        if kind == "(":
            self.advance()
            node = self.expr()
            self.expect(")")
            return node
        self.fail(_ATOM_START)


def parse(source: str) -> Expression:
    """Parse ``source`` into an immutable :class:`Expression`."""
    return Expression(_Parser(source).parse(), source)


# -- printing ----------------------------------------------------------------

_LEVEL = {"+": 1, "-": 1, "*": 2, "/": 2, "^": 4}
_NEG_LEVEL = 3
_ATOM_LEVEL = 5


def _level(node: Node) -> int:
    if isinstance(node, BinOp):
        return _LEVEL[node.op]
    if isinstance(node, Neg):
        return _NEG_LEVEL
    return _ATOM_LEVEL


def _fmt(node: Node) -> str:
    if isinstance(node, Num):
        v = node.value
        return str(int(v)) if v.is_integer() and abs(v) < 1e15 else repr(v)
    if isinstance(node, Var):
        return node.name
    if isinstance(node, Call):
        return f"{node.func}({_fmt(node.arg)})"
    if isinstance(node, Neg):
        inner = _fmt(node.operand)
        return f"-({inner})" if _level(node.operand) < _NEG_LEVEL else f"-{inner}"
    lvl = _LEVEL[node.op]
    left, right = _fmt(node.left), _fmt(node.right)
    if node.op == "^":
        if _level(node.left) <= lvl:
            left = f"({left})"
        if _level(node.right) < _NEG_LEVEL:
            right = f"({right})"
        return f"{left}^{right}"
    if _level(node.left) < lvl:
        left = f"({left})"
    if _level(node.right) <= lvl:
        right = f"({right})"
    if node.op in "+-":
        return f"{left} {node.op} {right}"
    return f"{left}{node.op}{right}"


def pretty(e: Expression | Node) -> str:
    """Canonical text of an expression; ``parse(pretty(e))`` rebuilds the same tree."""
    return _fmt(e.root if isinstance(e, Expression) else e)


# -- analysis and evaluation ---------------------------------------------------

def free_vars(e: Expression | Node) -> frozenset[str]:
    node = e.root if isinstance(e, Expression) else e
    out: set[str] = set()
    stack = [node]
    while stack:
        n = stack.pop()
        if isinstance(n, Var):
            out.add(n.name)
        elif isinstance(n, Neg):
            stack.append(n.operand)
        elif isinstance(n, BinOp):
            stack.extend((n.left, n.right))
        elif isinstance(n, Call):
            stack.append(n.arg)
    return frozenset(out)


@dataclass(frozen=True)
class Binding:
    """Variable slots (name -> (value, slot)) and constant values."""

    variables: Mapping[str, tuple[float, int]]
    constants: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        slots = sorted(s for _, s in self.variables.values())
        if slots != list(range(len(slots))):
            raise ValueError(f"variable slots must be exactly 0..{len(slots) - 1}, got {slots}")

    @classmethod
    def at(cls, names: Sequence[str], point: Sequence[float],
           constants: Mapping[str, float] | None = None) -> "Binding":
        if len(names) != len(point):
            raise ValueError("names and point differ in length")
        return cls({nm: (float(x), i) for i, (nm, x) in enumerate(zip(names, point))},
                   dict(constants or {}))

    def seeds(self, order: int) -> dict[str, Jet]:
        n = len(self.variables)
        return {nm: Jet.variable(v, s, n, order) for nm, (v, s) in self.variables.items()}


def evaluate(e: Expression, b: Binding, order: int = 0) -> Jet:
    """Jet of ``e`` at the point described by ``b``."""
    return evaluate_jets(e, b.seeds(order), b.constants)


def evaluate_jets(e: Expression | Node, env: Mapping[str, Jet],
                  constants: Mapping[str, float] | None = None) -> Jet:
    """Evaluate with variables bound to arbitrary jets (composition by chain rule)."""
    node = e.root if isinstance(e, Expression) else e
    constants = constants or {}
    missing = free_vars(node) - set(env) - set(constants)
    if missing:
        raise UnboundIdentifierError(missing)
    proto = next(iter(env.values()), None)
    n, order = (proto.n, proto.order) if proto is not None else (0, 0)

    def ev(nd):
        if isinstance(nd, Num):
            return Jet(n, order, nd.value)
        if isinstance(nd, Var):
            if nd.name in env:
                return env[nd.name]
            return Jet(n, order, constants[nd.name])
        if isinstance(nd, Neg):
            return -ev(nd.operand)
        if isinstance(nd, Call):
            arg = ev(nd.arg)
            return jets.log(arg) if nd.func == "ln" else jets.exp(arg)
        lhs, rhs = ev(nd.left), ev(nd.right)
        if nd.op == "+":
            return lhs + rhs
        if nd.op == "-":
            return lhs - rhs
        if nd.op == "*":
            return lhs * rhs
        if nd.op == "/":
            if rhs.value == 0.0:
                raise DomainError("division by zero")
            return lhs / rhs
        return jets.power(lhs, rhs)

    return ev(node)


def compile_expression(e: Expression | Node, names: Sequence[str],
                       constants: Mapping[str, float] | None = None):
    """Turn ``e`` into a function of a positional sequence of inputs.

    Inputs are matched to ``names`` by position and may be jets (all of the
    same shape) or plain floats; the result has the same kind.  Free
    identifiers are resolved once, here, rather than on every call.
    """
    node = e.root if isinstance(e, Expression) else e
    constants = dict(constants or {})
    slot = {nm: i for i, nm in enumerate(names)}
    missing = free_vars(node) - set(slot) - set(constants)
    if missing:
        raise UnboundIdentifierError(missing)

    def build(nd):
        if isinstance(nd, Num):
            v = nd.value
            return lambda xs: v
        if isinstance(nd, Var):
            if nd.name in slot:
                i = slot[nd.name]
                return lambda xs: xs[i]
            v = float(constants[nd.name])
            return lambda xs: v
        if isinstance(nd, Neg):
            inner = build(nd.operand)
            return lambda xs: -inner(xs)
        if isinstance(nd, Call):
            arg = build(nd.arg)
            fn = jets.log if nd.func == "ln" else jets.exp
            return lambda xs: fn(arg(xs))
        lhs = build(nd.left)
        op = nd.op
        if op == "^" and _constant_value(nd.right, slot, constants) is not None:
            c = _constant_value(nd.right, slot, constants)

            def const_power(xs):
                b = lhs(xs)
                # plain positive floats need none of the jet or domain handling
                if type(b) is float and b > 0.0:
                    return b ** c
                return jets.power(b, c)
            return const_power
        rhs = build(nd.right)
        if op == "+":
            return lambda xs: lhs(xs) + rhs(xs)
        if op == "-":
            return lambda xs: lhs(xs) - rhs(xs)
        if op == "*":
            return lambda xs: lhs(xs) * rhs(xs)
        if op == "/":
            def div(xs):
                den = rhs(xs)
                if float(den) == 0.0:
                    raise DomainError("division by zero")
                return lhs(xs) / den
            return div
        return lambda xs: jets.power(lhs(xs), rhs(xs))

    return build(node)


def _constant_value(node: Node, slot, constants) -> float | None:
    """Value of a subtree that involves no variables, else None."""
    if free_vars(node) & set(slot):
        return None
    try:
        return float(evaluate_jets(node, {}, constants).value)
    except DomainError:
        return None
