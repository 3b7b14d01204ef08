"""Closed-form scalar expressions over chart coordinates.

Grammar (whitespace is ignored)::

    expr   := term (('+' | '-') term)*
    term   := factor (('*' | '/') factor)*
    factor := atom ('^' atom)?
    atom   := number | 'x' index | 'pi' | func '(' expr ')' | '(' expr ')' | '-' atom
    func   := sin | cos | tan | exp | log | sqrt | abs

Variables are 1-based (``x1`` is the first coordinate).  The exponent of
``^`` must be a constant; integer exponents are evaluated by repeated
multiplication, other exponents as ``exp(b*log(a))`` on a positive base.

Expressions compile into :class:`ScalarField` objects that evaluate values,
gradients and Hessians exactly through second-order jets (see
:mod:`curvlab.jets`).
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Callable, Union

import numpy as np

from .errors import ExprDomainError, ExprSyntaxError
from .jets import Jet

FUNCTIONS = ("sin", "cos", "tan", "exp", "log", "sqrt", "abs")


# --------------------------------------------------------------------- AST
@dataclass(frozen=True)
class Const:
    value: float


@dataclass(frozen=True)
class Var:
    index: int  # 1-based


@dataclass(frozen=True)
class Unary:
    op: str  # "neg" or a name from FUNCTIONS
    arg: "Node"


@dataclass(frozen=True)
class Binary:
    op: str  # one of + - * /
    left: "Node"
    right: "Node"


@dataclass(frozen=True)
class Pow:
    base: "Node"
    exponent: float


Node = Union[Const, Var, Unary, Binary, Pow]


# ------------------------------------------------------------------ parser
_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<var>x(?P<idx>\d+))"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^()]))"
)


class _Parser:
    def __init__(self, source: str, dim: int):
        self.source = source
        self.dim = dim
        self.tokens: list[tuple[str, str, int]] = []
        pos = 0
        while pos < len(source):
            if source[pos:].strip() == "":
                break
            m = _TOKEN.match(source, pos)
            if m is None or m.end() == pos:
                off = pos + (len(source[pos:]) - len(source[pos:].lstrip()))
                raise ExprSyntaxError(f"unexpected character {source[off]!r}", off, source)
            start = m.start(m.lastgroup if m.lastgroup != "idx" else "var")
            if m.group("num") is not None:
                self.tokens.append(("num", m.group("num"), start))
            elif m.group("var") is not None:
                self.tokens.append(("var", m.group("idx"), start))
            elif m.group("name") is not None:
                self.tokens.append(("name", m.group("name"), start))
            else:
                self.tokens.append(("op", m.group("op"), start))
            pos = m.end()
        self.tokens.append(("end", "", len(source)))
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, text: str):
        kind, val, off = self.take()
        if kind != "op" or val != text:
            raise ExprSyntaxError(f"expected {text!r}, found {val or 'end of input'!r}", off, self.source)

    def parse(self) -> Node:
        node = self.expr()
        kind, val, off = self.peek()
        if kind != "end":
            raise ExprSyntaxError(f"unexpected token {val!r}", off, self.source)
        return node

    def expr(self) -> Node:
        node = self.term()
        while self.peek()[0] == "op" and self.peek()[1] in "+-":
            op = self.take()[1]
            node = Binary(op, node, self.term())
        return node

    def term(self) -> Node:
        node = self.factor()
        while self.peek()[0] == "op" and self.peek()[1] in "*/":
            op = self.take()[1]
            node = Binary(op, node, self.factor())
        return node

    def factor(self) -> Node:
        base = self.atom()
        if self.peek()[0] == "op" and self.peek()[1] == "^":
            off = self.take()[2]
            exponent = self.atom()
            value = _constant_value(exponent)
            if value is None:
                raise ExprSyntaxError("exponent must be a constant", off, self.source)
            return Pow(base, value)
        return base

    def atom(self) -> Node:
        kind, val, off = self.take()
        if kind == "num":
            return Const(float(val))
        if kind == "var":
            idx = int(val)
            if idx < 1 or idx > self.dim:
                raise ExprSyntaxError(f"variable x{idx} out of range for dimension {self.dim}",
                                      off, self.source)
            return Var(idx)
        if kind == "name":
            if val == "pi":
                return Const(math.pi)
            if val not in FUNCTIONS:
                raise ExprSyntaxError(f"unknown function {val!r}", off, self.source)
            self.expect("(")
            arg = self.expr()
            self.expect(")")
            return Unary(val, arg)
        if kind == "op" and val == "(":
            node = self.expr()
            self.expect(")")
            return node
        if kind == "op" and val == "-":
            return Unary("neg", self.atom())
        raise ExprSyntaxError(f"unexpected {val or 'end of input'!r}", off, self.source)


def _constant_value(node: Node) -> float | None:
    if isinstance(node, Const):
        return node.value
    if isinstance(node, Unary) and node.op == "neg":
        inner = _constant_value(node.arg)
        return None if inner is None else -inner
    return None


def parse(source: str, dim: int) -> Node:
    """Parse ``source`` into an AST whose variables are ``x1..x{dim}``."""
    if dim < 1:
        raise ValueError("dimension must be positive")
    return _Parser(source, dim).parse()


# ----------------------------------------------------------------- printer
_PREC = {"+": 1, "-": 1, "*": 2, "/": 2}


def _prec(node: Node) -> int:
    if isinstance(node, Binary):
        return _PREC[node.op]
    if isinstance(node, Pow):
        return 3
    if isinstance(node, Const) and node.value < 0:
        return 0
    return 4


def _num(value: float) -> str:
    if value < 0:
        return f"(-{_num(-value)})"
    if value.is_integer() and abs(value) < 1e15:
        return str(int(value))
    return repr(value)


def to_source(node: Node) -> str:
    """Pretty-print an AST in the grammar above (parses back to the same tree)."""
    if isinstance(node, Const):
        return _num(node.value)
    if isinstance(node, Var):
        return f"x{node.index}"
    if isinstance(node, Unary):
        if node.op == "neg":
            inner = to_source(node.arg)
            return "-" + (inner if _prec(node.arg) == 4 else f"({inner})")
        return f"{node.op}({to_source(node.arg)})"
    if isinstance(node, Pow):
        base = to_source(node.base)
        if _prec(node.base) < 4:
            base = f"({base})"
        return f"{base}^{_num(node.exponent)}"
    p = _PREC[node.op]
    left = to_source(node.left)
    if _prec(node.left) < p:
        left = f"({left})"
    right = to_source(node.right)
    if _prec(node.right) <= p:
        right = f"({right})"
    return f"{left} {node.op} {right}"


def variables(node: Node) -> set[int]:
    if isinstance(node, Var):
        return {node.index}
    if isinstance(node, Const):
        return set()
    if isinstance(node, Unary):
        return variables(node.arg)
    if isinstance(node, Pow):
        return variables(node.base)
    return variables(node.left) | variables(node.right)


# ------------------------------------------------ symbolic helpers (no CAS)
ZERO = Const(0.0)
ONE = Const(1.0)


def _is(node: Node, value: float) -> bool:
    return isinstance(node, Const) and node.value == value


def add(a: Node, b: Node) -> Node:
    if _is(a, 0.0):
        return b
    if _is(b, 0.0):
        return a
    return Binary("+", a, b)


def sub(a: Node, b: Node) -> Node:
    if _is(b, 0.0):
        return a
    if _is(a, 0.0):
        return Unary("neg", b)
    return Binary("-", a, b)


def mul(a: Node, b: Node) -> Node:
    if _is(a, 0.0) or _is(b, 0.0):
        return ZERO
    if _is(a, 1.0):
        return b
    if _is(b, 1.0):
        return a
    return Binary("*", a, b)


def div(a: Node, b: Node) -> Node:
    if _is(a, 0.0):
        return ZERO
    if _is(b, 1.0):
        return a
    return Binary("/", a, b)


def diff(node: Node, i: int) -> Node:
    """AST of the partial derivative with respect to ``x{i}``.

    Zero terms are dropped while building the result; nothing else is
    rewritten.  Used to assemble induced metrics, whose curvature needs third
    derivatives of the immersion.
    """
    if isinstance(node, Const):
        return ZERO
    if isinstance(node, Var):
        return ONE if node.index == i else ZERO
    if isinstance(node, Binary):
        a, b = node.left, node.right
        da, db = diff(a, i), diff(b, i)
        if node.op == "+":
            return add(da, db)
        if node.op == "-":
            return sub(da, db)
        if node.op == "*":
            return add(mul(da, b), mul(a, db))
        return div(sub(mul(da, b), mul(a, db)), Pow(b, 2.0))
    if isinstance(node, Pow):
        du = diff(node.base, i)
        p = node.exponent
        if p == 1.0:
            return du
        inner = node.base if p - 1.0 == 1.0 else Pow(node.base, p - 1.0)
        return mul(mul(Const(p), inner), du)
    u = node.arg
    du = diff(u, i)
    if _is(du, 0.0):
        return ZERO
    op = node.op
    if op == "neg":
        return Unary("neg", du)
    if op == "sin":
        return mul(Unary("cos", u), du)
    if op == "cos":
        return Unary("neg", mul(Unary("sin", u), du))
    if op == "tan":
        return mul(add(ONE, Pow(Unary("tan", u), 2.0)), du)
    if op == "exp":
        return mul(node, du)
    if op == "log":
        return div(du, u)
    if op == "sqrt":
        return div(du, mul(Const(2.0), node))
    if op == "abs":
        return mul(div(u, node), du)
    raise ValueError(f"unknown operator {op}")


def substitute(node: Node, values: list[Node]) -> Node:
    """Replace ``x{k}`` by ``values[k-1]`` (composition of maps)."""
    if isinstance(node, Const):
        return node
    if isinstance(node, Var):
        return values[node.index - 1]
    if isinstance(node, Unary):
        return Unary(node.op, substitute(node.arg, values))
    if isinstance(node, Pow):
        return Pow(substitute(node.base, values), node.exponent)
    return Binary(node.op, substitute(node.left, values), substitute(node.right, values))


# ----------------------------------------------------------- compilation
Kernel = Callable[[Jet], Jet]


def _domain(mask: np.ndarray, message: str, node: Node) -> None:
    if np.any(mask):
        raise ExprDomainError(message, to_source(node))


def _compile(node: Node, n: int) -> Kernel:
    if isinstance(node, Const):
        value = node.value

        def const(X: Jet) -> Jet:
            return Jet.constant(np.full(X.shape[:-1], value), n, X.order)
        return const

    if isinstance(node, Var):
        k = node.index - 1

        def var(X: Jet) -> Jet:
            return X[:, k]
        return var

    if isinstance(node, Binary):
        fa, fb = _compile(node.left, n), _compile(node.right, n)
        op = node.op
        if op == "+":
            return lambda X: fa(X) + fb(X)
        if op == "-":
            return lambda X: fa(X) - fb(X)
        if op == "*":
            return lambda X: fa(X) * fb(X)

        def divide(X: Jet) -> Jet:
            den = fb(X)
            _domain(den.v == 0.0, "division by zero", node)
            return fa(X) / den
        return divide

    if isinstance(node, Pow):
        fb = _compile(node.base, n)
        p = node.exponent
        if p.is_integer():
            k = int(p)

            def ipow(X: Jet) -> Jet:
                base = fb(X)
                if k < 0:
                    _domain(base.v == 0.0, "division by zero", node)
                return base.ipow(k)
            return ipow

        def rpow(X: Jet) -> Jet:
            base = fb(X)
            _domain(base.v <= 0.0, "non-integer power of a non-positive base", node)
            return (base.log() * p).exp()
        return rpow

    fa = _compile(node.arg, n)
    op = node.op
    if op == "neg":
        return lambda X: -fa(X)
    if op == "log":
        def log(X: Jet) -> Jet:
            u = fa(X)
            _domain(u.v <= 0.0, "log of a non-positive value", node)
            return u.log()
        return log
    if op == "sqrt":
        def sqrt(X: Jet) -> Jet:
            u = fa(X)
            bad = u.v < 0.0 if X.order == 0 else u.v <= 0.0
            _domain(bad, "sqrt outside its differentiable domain", node)
            return u.sqrt()
        return sqrt
    if op == "tan":
        def tan(X: Jet) -> Jet:
            u = fa(X)
            _domain(np.cos(u.v) == 0.0, "tan pole", node)
            return u.tan()
        return tan
    method = {"sin": Jet.sin, "cos": Jet.cos, "exp": Jet.exp, "abs": Jet.abs}[op]
    return lambda X: method(fa(X))


@dataclass(frozen=True)
class ScalarField:
    """A compiled expression of ``dim`` coordinates.

    Immutable; evaluation allocates only per-call arrays, so one instance may
    be shared between threads.
    """

    ast: Node
    dim: int
    _kernel: Kernel = field(repr=False, compare=False, default=None)

    def __post_init__(self):
        bad = [i for i in variables(self.ast) if i > self.dim]
        if bad:
            raise ValueError(f"variable x{max(bad)} exceeds dimension {self.dim}")
        object.__setattr__(self, "_kernel", _compile(self.ast, self.dim))

    @classmethod
    def from_source(cls, source: str, dim: int) -> "ScalarField":
        return cls(parse(source, dim), dim)

    @classmethod
    def constant(cls, value: float, dim: int) -> "ScalarField":
        return cls(Const(float(value)), dim)

    @property
    def source(self) -> str:
        return to_source(self.ast)

    @property
    def is_constant(self) -> bool:
        return not variables(self.ast)

    def jet(self, x, order: int = 2) -> Jet:
        """Jet of the field at points ``x`` of shape ``(P, dim)``."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if x.shape[-1] != self.dim:
            raise ValueError(f"expected points of dimension {self.dim}, got {x.shape[-1]}")
        if not np.all(np.isfinite(x)):
            raise ValueError("evaluation point must be finite")
        return self._kernel(Jet.variable(x, order))

    def __call__(self, x) -> np.ndarray | float:
        x = np.asarray(x, dtype=float)
        v = self.jet(x, order=0).v
        return float(v[0]) if x.ndim == 1 else v

    def value_grad(self, x):
        j = self.jet(x, order=1)
        if np.asarray(x).ndim == 1:
            return float(j.v[0]), j.d[0]
        return j.v, j.d

    def diff(self, i: int) -> "ScalarField":
        return ScalarField(diff(self.ast, i), self.dim)


def eval_jet2(f: ScalarField, x) -> tuple:
    """Value, gradient and Hessian of ``f`` at a single point or a batch."""
    x = np.asarray(x, dtype=float)
    j = f.jet(x, order=2)
    if x.ndim <= 1:
        return float(j.v[0]), j.d[0], j.dd[0]
    return j.v, j.d, j.dd
