"""Smooth scalar expressions: parsing, real evaluation and jet evaluation.

Grammar::

    expr   := term (("+" | "-") term)*
    term   := factor (("*" | "/") factor)*
    factor := ("-")? atom ("^" INT)?
    atom   := NUMBER | IDENT | IDENT "(" expr ("," expr)* ")" | "(" expr ")"

Function names are restricted to the registered primitives; ``pi`` is a
constant; every other identifier is a variable.

Evaluating over a Weil algebra applies each univariate primitive ``g`` to
``a0 + n`` as the finite Taylor sum ``sum_j g^(j)(a0)/j! * n^j``; ring
operations go through the algebra, so the result is an algebra morphism in
the inputs.
"""

from __future__ import annotations

import functools

import math
import re
from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np

from .algebra import AlgebraElement, WeilAlgebra, factorial_multi, taylor_apply, truncated
from .errors import (
    AlgebraMismatch,
    DivisionByZero,
    DomainError,
    ExprSyntaxError,
    InvalidInput,
    UnboundVariable,
    UnknownFunction,
)

MAX_DEPTH = 256
MAX_PARTIAL_ORDER = 6
CONSTANTS = {"pi": math.pi}


# ---------------------------------------------------------------------------
# AST


@dataclass(frozen=True)
class Node:
    pass


@dataclass(frozen=True)
class Const(Node):
    value: float
    span: tuple = field(default=(0, 0), compare=False, repr=False)


@dataclass(frozen=True)
class Var(Node):
    name: str
    span: tuple = field(default=(0, 0), compare=False, repr=False)


@dataclass(frozen=True)
class BinOp(Node):
    op: str  # one of + - * /
    left: Node
    right: Node
    span: tuple = field(default=(0, 0), compare=False, repr=False)


@dataclass(frozen=True)
class Neg(Node):
    operand: Node
    span: tuple = field(default=(0, 0), compare=False, repr=False)


@dataclass(frozen=True)
class Pow(Node):
    base: Node
    exponent: int
    span: tuple = field(default=(0, 0), compare=False, repr=False)


@dataclass(frozen=True)
class Call(Node):
    func: str
    arg: Node
    span: tuple = field(default=(0, 0), compare=False, repr=False)


SmoothExpr = Node


# ---------------------------------------------------------------------------
# primitives


@dataclass(frozen=True)
class Primitive:
    """A univariate smooth function with closed-form Taylor coefficients.

    ``taylor(x0, k)`` returns ``[g(x0), g'(x0)/1!, ..., g^(k)(x0)/k!]``.
    ``domain`` says whether ``x0`` is admissible (jet evaluation);
    ``real_domain`` may be wider for plain real evaluation.
    """

    name: str
    real: Callable[[float], float]
    taylor: Callable[[float, int], list]
    domain: Callable[[float], bool] = lambda x: True
    real_domain: Callable[[float], bool] | None = None


def _sin_taylor(x, k):
    s, c = math.sin(x), math.cos(x)
    cycle = (s, c, -s, -c)
    return [cycle[j % 4] / math.factorial(j) for j in range(k + 1)]


def _cos_taylor(x, k):
    s, c = math.sin(x), math.cos(x)
    cycle = (c, -s, -c, s)
    return [cycle[j % 4] / math.factorial(j) for j in range(k + 1)]


def _exp_taylor(x, k):
    ex = math.exp(x)
    return [ex / math.factorial(j) for j in range(k + 1)]


def _log_taylor(x, k):
    return [math.log(x)] + [(-1.0) ** (j - 1) / (j * x**j) for j in range(1, k + 1)]


def _sqrt_taylor(x, k):
    out = []
    binom = 1.0
    for j in range(k + 1):
        out.append(binom * x ** (0.5 - j))
        binom *= (0.5 - j) / (j + 1)
    return out


def _atan_taylor(x, k):
    # d^j atan = (-1)^(j-1) (j-1)! sin(j*acot x) / (1+x^2)^(j/2)
    acot = math.pi / 2 - math.atan(x)
    r = 1.0 + x * x
    out = [math.atan(x)]
    for j in range(1, k + 1):
        out.append((-1.0) ** (j - 1) * math.sin(j * acot) / (j * r ** (j / 2)))
    return out


def _flat_taylor(x, k):
    # d^j exp(-1/x) = P_j(1/x) exp(-1/x),  P_{j+1}(u) = u^2 (P_j(u) - P_j'(u))
    if x <= 0.0:
        return [0.0] * (k + 1)
    u = 1.0 / x
    ex = math.exp(-u)
    poly = np.array([1.0])  # coefficients in ascending powers of u
    out = []
    for j in range(k + 1):
        out.append(np.polynomial.polynomial.polyval(u, poly) * ex / math.factorial(j))
        dpoly = np.polynomial.polynomial.polyder(poly) if len(poly) > 1 else np.array([0.0])
        diff = np.polynomial.polynomial.polysub(poly, dpoly)
        poly = np.polynomial.polynomial.polymulx(np.polynomial.polynomial.polymulx(diff))
    return out


def _flat_real(x):
    return math.exp(-1.0 / x) if x > 0.0 else 0.0


PRIMITIVES: dict[str, Primitive] = {}


def register_primitive(p: Primitive) -> None:
    PRIMITIVES[p.name] = p


register_primitive(Primitive("sin", math.sin, _sin_taylor))
register_primitive(Primitive("cos", math.cos, _cos_taylor))
register_primitive(Primitive("exp", math.exp, _exp_taylor))
register_primitive(Primitive("log", math.log, _log_taylor, lambda x: x > 0.0))
register_primitive(
    Primitive("sqrt", math.sqrt, _sqrt_taylor, lambda x: x > 0.0, lambda x: x >= 0.0)
)
register_primitive(Primitive("atan", math.atan, _atan_taylor))
# exp(-1/x) for x > 0, else 0: smooth, and flat on x <= 0 (bump functions)
register_primitive(Primitive("flat", _flat_real, _flat_taylor))


# ---------------------------------------------------------------------------
# parser

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?)|(?P<ident>[A-Za-z_][A-Za-z0-9_]*)|(?P<op>[-+*/^(),]))"
)


def _tokenize(source):
    pos = 0
    tokens = []
    n = len(source)
    while pos < n:
        if source[pos:].strip() == "":
            break
        m = _TOKEN.match(source, pos)
        if not m:
            start = pos + (len(source[pos:]) - len(source[pos:].lstrip()))
            raise ExprSyntaxError(
                f"unexpected character {source[start]!r} at {start}",
                start,
                {"number", "identifier", "operator"},
                source,
            )
        kind = m.lastgroup
        start = m.start(kind)
        tokens.append((kind, m.group(kind), start, m.end()))
        pos = m.end()
    tokens.append(("eof", "", n, n))
    return tokens


class _Parser:
    def __init__(self, source):
        self.source = source
        self.tokens = _tokenize(source)
        self.i = 0
        self.depth = 0

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def fail(self, expected, tok=None):
        tok = tok or self.peek()
        what = "end of input" if tok[0] == "eof" else repr(tok[1])
        raise ExprSyntaxError(
            f"expected {' or '.join(sorted(expected))} but found {what} at {tok[2]}",
            tok[2],
            expected,
            self.source,
        )

    def expect(self, op):
        tok = self.peek()
        if tok[0] == "op" and tok[1] == op:
            return self.take()
        self.fail({repr(op)})

    def enter(self):
        self.depth += 1
        if self.depth > MAX_DEPTH:
            raise ExprSyntaxError(
                f"expression nesting exceeds {MAX_DEPTH}", self.peek()[2], (), self.source
            )

    def parse(self):
        node = self.expr()
        if self.peek()[0] != "eof":
            self.fail({"operator", "end of input"})
        return node

    def expr(self):
        self.enter()
        node = self.term()
        while self.peek()[0] == "op" and self.peek()[1] in "+-":
            op = self.take()[1]
            rhs = self.term()
            node = BinOp(op, node, rhs, (node.span[0], rhs.span[1]))
        self.depth -= 1
        return node

    def term(self):
        node = self.factor()
        while self.peek()[0] == "op" and self.peek()[1] in "*/":
            op = self.take()[1]
            rhs = self.factor()
            node = BinOp(op, node, rhs, (node.span[0], rhs.span[1]))
        return node

    def factor(self):
        start = self.peek()[2]
        negate = False
        if self.peek()[0] == "op" and self.peek()[1] == "-":
            self.take()
            negate = True
        node = self.atom()
        if self.peek()[0] == "op" and self.peek()[1] == "^":
            self.take()
            tok = self.peek()
            if tok[0] != "num" or not tok[1].isdigit():
                self.fail({"integer exponent"})
            self.take()
            node = Pow(node, int(tok[1]), (node.span[0], tok[3]))
        if negate:
            node = Neg(node, (start, node.span[1]))
        return node

    def atom(self):
        tok = self.peek()
        kind, text, start, end = tok
        if kind == "num":
            self.take()
            return Const(float(text), (start, end))
        if kind == "ident":
            self.take()
            nxt = self.peek()
            if nxt[0] == "op" and nxt[1] == "(":
                if text not in PRIMITIVES:
                    raise UnknownFunction(
                        f"unknown function {text!r} at {start}",
                        start,
                        set(PRIMITIVES),
                        self.source,
                    )
                self.take()
                args = [self.expr()]
                while self.peek()[0] == "op" and self.peek()[1] == ",":
                    self.take()
                    args.append(self.expr())
                close = self.expect(")")
                if len(args) != 1:
                    raise ExprSyntaxError(
                        f"{text}() takes exactly one argument, got {len(args)}",
                        start,
                        {"one argument"},
                        self.source,
                    )
                return Call(text, args[0], (start, close[3]))
            if text in PRIMITIVES:
                self.fail({"'('"}, nxt)
            if text in CONSTANTS:
                return Const(CONSTANTS[text], (start, end))
            return Var(text, (start, end))
        if kind == "op" and text == "(":
            self.take()
            self.enter()
            node = self.expr()
            self.depth -= 1
            self.expect(")")
            return node
        self.fail({"number", "identifier", "'('"})


def parse(source: str) -> Node:
    """Parse ``source`` into an expression tree."""
    if not isinstance(source, str):
        raise InvalidInput(f"expression must be a string, got {type(source).__name__}")
    return _parse_cached(source)


@functools.lru_cache(maxsize=4096)
def _parse_cached(source: str) -> Node:
    # trees are immutable, so sharing them is safe
    return _Parser(source).parse()


def as_expr(e) -> Node:
    if isinstance(e, Node):
        return e
    if isinstance(e, (int, float)):
        return Const(float(e))
    return parse(e)


# ---------------------------------------------------------------------------
# tree utilities


def free_variables(e: Node) -> set:
    if isinstance(e, Var):
        return {e.name}
    if isinstance(e, Const):
        return set()
    if isinstance(e, BinOp):
        return free_variables(e.left) | free_variables(e.right)
    if isinstance(e, (Neg,)):
        return free_variables(e.operand)
    if isinstance(e, Pow):
        return free_variables(e.base)
    if isinstance(e, Call):
        return free_variables(e.arg)
    raise TypeError(e)


def substitute(e: Node, mapping: Mapping[str, Node]) -> Node:
    """Replace variables by expressions (simultaneously)."""
    if isinstance(e, Var):
        return mapping.get(e.name, e)
    if isinstance(e, Const):
        return e
    if isinstance(e, BinOp):
        return BinOp(e.op, substitute(e.left, mapping), substitute(e.right, mapping))
    if isinstance(e, Neg):
        return Neg(substitute(e.operand, mapping))
    if isinstance(e, Pow):
        return Pow(substitute(e.base, mapping), e.exponent)
    if isinstance(e, Call):
        return Call(e.func, substitute(e.arg, mapping))
    raise TypeError(e)


_PREC = {"+": 1, "-": 1, "*": 2, "/": 2}


def to_source(e: Node) -> str:
    """Render back to parseable text (fully parenthesised where needed)."""

    def go(n, ctx):
        if isinstance(n, Const):
            return repr(n.value) if n.value >= 0 else f"({n.value!r})"
        if isinstance(n, Var):
            return n.name
        if isinstance(n, Call):
            return f"{n.func}({go(n.arg, 0)})"
        if isinstance(n, Pow):
            return f"{go(n.base, 4)}^{n.exponent}"
        if isinstance(n, Neg):
            s = f"-{go(n.operand, 3)}"
            return f"({s})" if ctx > 0 else s
        if isinstance(n, BinOp):
            p = _PREC[n.op]
            s = f"{go(n.left, p)} {n.op} {go(n.right, p + 1)}"
            return f"({s})" if ctx > p else s
        raise TypeError(n)

    return go(e, 0)


# ---------------------------------------------------------------------------
# evaluation


def _lookup(env, name):
    try:
        return env[name]
    except KeyError:
        raise UnboundVariable(f"variable {name!r} is not bound", variable=name) from None


def eval_real(e: Node, env: Mapping[str, float]) -> float:
    """IEEE double evaluation."""
    e = as_expr(e)
    return _eval_real(e, env)


def _eval_real(e, env):
    if isinstance(e, Const):
        return e.value
    if isinstance(e, Var):
        return float(_lookup(env, e.name))
    if isinstance(e, BinOp):
        a = _eval_real(e.left, env)
        b = _eval_real(e.right, env)
        if e.op == "+":
            return a + b
        if e.op == "-":
            return a - b
        if e.op == "*":
            return a * b
        if b == 0.0:
            raise DivisionByZero(f"division by zero at {e.span[0]}", position=e.span[0])
        return a / b
    if isinstance(e, Neg):
        return -_eval_real(e.operand, env)
    if isinstance(e, Pow):
        b = _eval_real(e.base, env)
        return b**e.exponent
    if isinstance(e, Call):
        x = _eval_real(e.arg, env)
        p = PRIMITIVES[e.func]
        ok = p.real_domain or p.domain
        if not ok(x):
            raise DomainError(f"{e.func}({x}) outside domain", position=e.span[0], function=e.func)
        return p.real(x)
    raise TypeError(e)


def eval_jet(e: Node, env: Mapping, A: WeilAlgebra | None = None) -> AlgebraElement:
    """Evaluate over a Weil algebra.

    ``env`` values are :class:`AlgebraElement` (or plain numbers, promoted to
    scalars).  ``A`` may be omitted when some env value fixes the algebra.
    """
    e = as_expr(e)
    if A is None:
        for v in env.values():
            if isinstance(v, AlgebraElement):
                A = v.algebra
                break
        else:
            raise InvalidInput("no algebra given and none inferable from env")
    jenv = {}
    for name, v in env.items():
        if isinstance(v, AlgebraElement):
            if v.algebra != A:
                raise AlgebraMismatch(f"value of {name!r} lives in {v.algebra!r}, expected {A!r}")
            jenv[name] = v
        else:
            jenv[name] = A.scalar(float(v))
    return _eval_jet(e, jenv, A)


def _eval_jet(e, env, A):
    if isinstance(e, Const):
        return A.scalar(e.value)
    if isinstance(e, Var):
        return _lookup(env, e.name)
    if isinstance(e, BinOp):
        a = _eval_jet(e.left, env, A)
        b = _eval_jet(e.right, env, A)
        if e.op == "+":
            return a + b
        if e.op == "-":
            return a - b
        if e.op == "*":
            return a * b
        if b.real_part == 0.0:
            raise DivisionByZero(
                f"divisor has zero real part at {e.span[0]}", position=e.span[0]
            )
        return a * b.reciprocal()
    if isinstance(e, Neg):
        return -_eval_jet(e.operand, env, A)
    if isinstance(e, Pow):
        return _eval_jet(e.base, env, A) ** e.exponent
    if isinstance(e, Call):
        a = _eval_jet(e.arg, env, A)
        p = PRIMITIVES[e.func]
        x0 = a.real_part
        if not p.domain(x0):
            # a point with no infinitesimal part only needs the real domain
            if not (p.real_domain and p.real_domain(x0) and not np.any(a.coeffs[1:])):
                raise DomainError(
                    f"{e.func} at real part {x0} outside domain",
                    position=e.span[0],
                    function=e.func,
                )
            return A.scalar(p.real(x0))
        return taylor_apply(a, p.taylor(x0, A.k))
    raise TypeError(e)


@functools.lru_cache(maxsize=64)
def _model_algebra(m: int, k: int) -> WeilAlgebra:
    return truncated([f"d{i}" for i in range(m)], k, max_dim=10**4)


def partial_derivatives(e: Node, at: Mapping[str, float], k: int) -> dict:
    """All partials ``d^alpha f(at)`` with ``1 <= |alpha| <= k``.

    Keys are exponent tuples ordered like ``at``.  Computed by one jet
    evaluation over ``R[d_1..d_m]/(degree > k)``, reading coefficient of
    ``d^alpha`` and multiplying by ``alpha!``.
    """
    if not 1 <= k <= MAX_PARTIAL_ORDER:
        raise InvalidInput(f"order must be in 1..{MAX_PARTIAL_ORDER}, got {k}")
    names = list(at)
    model = _model_algebra(len(names), k)
    env = {}
    for i, name in enumerate(names):
        env[name] = model.gen(f"d{i}") + float(at[name])
    jet = eval_jet(as_expr(e), env, model)
    out = {}
    for idx, m in enumerate(model.basis):
        if idx == 0:
            continue
        out[m] = float(jet.coeffs[idx]) * factorial_multi(m)
    return out


def multi_index_name(alpha, names) -> str:
    parts = []
    for n, a in zip(names, alpha):
        if a == 1:
            parts.append(n)
        elif a > 1:
            parts.append(f"{n}^{a}")
    return "*".join(parts)
