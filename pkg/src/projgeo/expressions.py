"""A tiny expression language with exact first and second derivatives.

Charts may be defined in a manifest as component expressions in the
parameters ``y0 .. y{m-1}``.  Evaluation propagates value, gradient and
Hessian together (second-order forward jets), so Jacobians and Hessians of
expression charts are exact.  The evaluator broadcasts over a leading batch
axis, which is what makes grid sweeps and multistart solves cheap.

Grammar (standard precedence, ``^`` binds tighter than unary minus)::

    expr   := term (('+'|'-') term)*
    term   := unary (('*'|'/') unary)*
    unary  := '-' unary | power
    power  := atom ('^' exponent)*
    atom   := number | y<k> | func '(' expr ')' | '(' expr ')'

Exponents are integer literals (optionally negated / parenthesized);
general powers are written via exp/log.
"""
from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np

from .errors import EvalDomainError, ExprSyntaxError, UnknownIdentifierError

FUNCTIONS = ("sin", "cos", "exp", "log", "sqrt", "abs")

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<num>\d+\.\d*(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?"
    r"|\d+(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^()]))"
)


def _tokenize(src: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    while pos < len(src):
        m = _TOKEN_RE.match(src, pos)
        if m is None:
            stripped = src[pos:].lstrip()
            if not stripped:
                break
            raise ExprSyntaxError(f"unexpected character {stripped[0]!r}", len(src) - len(stripped))
        if m.lastgroup == "num":
            tokens.append(("num", m.group("num"), m.start("num")))
        elif m.lastgroup == "name":
            tokens.append(("name", m.group("name"), m.start("name")))
        else:
            tokens.append(("op", m.group("op"), m.start("op")))
        pos = m.end()
    return tokens


class _Parser:
    def __init__(self, src: str):
        self.src = src
        self.tokens = _tokenize(src)
        self.i = 0

    def peek(self):
        return self.tokens[self.i] if self.i < len(self.tokens) else None

    def next(self):
        tok = self.peek()
        self.i += 1
        return tok

    def expect_op(self, op: str):
        tok = self.next()
        if tok is None or tok[0] != "op" or tok[1] != op:
            raise ExprSyntaxError(f"expected {op!r}", self.offset(tok))

    def offset(self, tok) -> int:
        return len(self.src) if tok is None else tok[2]

    def parse(self):
        node = self.expr()
        tok = self.peek()
        if tok is not None:
            raise ExprSyntaxError(f"trailing input {tok[1]!r}", tok[2])
        return node

    def expr(self):
        node = self.term()
        while True:
            tok = self.peek()
            if tok and tok[0] == "op" and tok[1] in "+-":
                self.next()
                rhs = self.term()
                node = ("add" if tok[1] == "+" else "sub", node, rhs)
            else:
                return node

    def term(self):
        node = self.unary()
        while True:
            tok = self.peek()
            if tok and tok[0] == "op" and tok[1] in "*/":
                self.next()
                rhs = self.unary()
                node = ("mul" if tok[1] == "*" else "div", node, rhs)
            else:
                return node

    def unary(self):
        tok = self.peek()
        if tok and tok[0] == "op" and tok[1] == "-":
            self.next()
            return ("neg", self.unary())
        return self.power()

    def power(self):
        node = self.atom()
        while True:
            tok = self.peek()
            if tok and tok[0] == "op" and tok[1] == "^":
                self.next()
                node = ("pow", node, self.exponent())
            else:
                return node

    def exponent(self) -> int:
        tok = self.peek()
        sign = 1
        parens = False
        if tok and tok[0] == "op" and tok[1] == "(":
            self.next()
            parens = True
            tok = self.peek()
        if tok and tok[0] == "op" and tok[1] == "-":
            self.next()
            sign = -1
            tok = self.peek()
        if tok is None or tok[0] != "num" or any(c in tok[1] for c in ".eE"):
            raise ExprSyntaxError("exponent must be an integer literal", self.offset(tok))
        self.next()
        if parens:
            self.expect_op(")")
        return sign * int(tok[1])

    def atom(self):
        tok = self.next()
        if tok is None:
            raise ExprSyntaxError("unexpected end of input", len(self.src))
        kind, text, off = tok
        if kind == "num":
            return ("const", float(text))
        if kind == "op" and text == "(":
            node = self.expr()
            self.expect_op(")")
            return node
        if kind == "name":
            m = re.fullmatch(r"y(\d+)", text)
            if m:
                return ("param", int(m.group(1)))
            if text in FUNCTIONS:
                self.expect_op("(")
                arg = self.expr()
                self.expect_op(")")
                return ("call", text, arg)
            raise UnknownIdentifierError(f"unknown identifier {text!r}", off)
        raise ExprSyntaxError(f"unexpected token {text!r}", off)


def parse(src: str):
    """Parse an expression into a tuple AST; deterministic for equal input."""
    if not src or not src.strip():
        raise ExprSyntaxError("empty expression", 0)
    return _Parser(src).parse()


def max_param_index(ast) -> int:
    """Largest parameter index appearing in the tree, -1 if none."""
    kind = ast[0]
    if kind == "param":
        return ast[1]
    if kind == "const":
        return -1
    if kind in ("neg",):
        return max_param_index(ast[1])
    if kind == "call":
        return max_param_index(ast[2])
    if kind == "pow":
        return max_param_index(ast[1])
    return max(max_param_index(ast[1]), max_param_index(ast[2]))


@dataclass
class Jet2:
    """Value, gradient and symmetric Hessian of a scalar expression.

    Arrays carry an optional leading batch axis: value ``(...,)``,
    grad ``(..., m)``, hess ``(..., m, m)``.
    """

    value: np.ndarray
    grad: np.ndarray
    hess: np.ndarray


def _outer(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.einsum("...i,...j->...ij", a, b)


class _Evaluator:
    """Recursive jet propagation; order selects how many derivatives exist."""

    def __init__(self, y: np.ndarray, order: int):
        self.y = y
        self.m = y.shape[-1]
        self.batch = y.shape[:-1]
        self.order = order

    def zeros_g(self):
        return np.zeros(self.batch + (self.m,))

    def zeros_h(self):
        return np.zeros(self.batch + (self.m, self.m))

    def run(self, ast):
        kind = ast[0]
        if kind == "const":
            v = np.broadcast_to(np.float64(ast[1]), self.batch).copy()
            return v, self.zeros_g() if self.order else None, self.zeros_h() if self.order > 1 else None
        if kind == "param":
            i = ast[1]
            if i >= self.m:
                raise EvalDomainError(f"parameter y{i} out of range for m={self.m}")
            v = self.y[..., i].copy()
            g = h = None
            if self.order:
                g = self.zeros_g()
                g[..., i] = 1.0
            if self.order > 1:
                h = self.zeros_h()
            return v, g, h
        if kind in ("add", "sub"):
            av, ag, ah = self.run(ast[1])
            bv, bg, bh = self.run(ast[2])
            s = 1.0 if kind == "add" else -1.0
            return (
                av + s * bv,
                None if ag is None else ag + s * bg,
                None if ah is None else ah + s * bh,
            )
        if kind == "neg":
            av, ag, ah = self.run(ast[1])
            return -av, None if ag is None else -ag, None if ah is None else -ah
        if kind == "mul":
            av, ag, ah = self.run(ast[1])
            bv, bg, bh = self.run(ast[2])
            v = av * bv
            g = h = None
            if ag is not None:
                g = av[..., None] * bg + bv[..., None] * ag
            if ah is not None:
                h = av[..., None, None] * bh + bv[..., None, None] * ah
                h += _outer(ag, bg) + _outer(bg, ag)
            return v, g, h
        if kind == "div":
            av, ag, ah = self.run(ast[1])
            bv, bg, bh = self.run(ast[2])
            if np.any(bv == 0.0):
                raise EvalDomainError("division by zero")
            v = av / bv
            g = h = None
            if ag is not None:
                g = (ag - v[..., None] * bg) / bv[..., None]
            if ah is not None:
                gb_sym = _outer(g, bg) + _outer(bg, g)
                h = (ah - v[..., None, None] * bh - gb_sym) / bv[..., None, None]
            return v, g, h
        if kind == "pow":
            av, ag, ah = self.run(ast[1])
            n = ast[2]
            if n == 0:
                one = np.ones(self.batch)
                return (
                    one,
                    self.zeros_g() if self.order else None,
                    self.zeros_h() if self.order > 1 else None,
                )
            if n < 0 and np.any(av == 0.0):
                raise EvalDomainError("zero base with negative exponent")
            v = av**n
            g = h = None
            if ag is not None:
                p1 = n * av ** (n - 1)
                g = p1[..., None] * ag
            if ah is not None:
                h = p1[..., None, None] * ah
                if n != 1:
                    p2 = n * (n - 1) * av ** (n - 2)
                    h = h + p2[..., None, None] * _outer(ag, ag)
            return v, g, h
        if kind == "call":
            name, arg = ast[1], ast[2]
            av, ag, ah = self.run(arg)
            if name == "sin":
                v, d1, d2 = np.sin(av), np.cos(av), -np.sin(av)
            elif name == "cos":
                v, d1, d2 = np.cos(av), -np.sin(av), -np.cos(av)
            elif name == "exp":
                v = np.exp(av)
                d1 = d2 = v
            elif name == "log":
                if np.any(av <= 0.0):
                    raise EvalDomainError("log of a non-positive value")
                v, d1, d2 = np.log(av), 1.0 / av, -1.0 / av**2
            elif name == "sqrt":
                if np.any(av <= 0.0):
                    raise EvalDomainError("sqrt of a non-positive value")
                v = np.sqrt(av)
                d1 = 0.5 / v
                d2 = -0.25 / (av * v)
            elif name == "abs":
                if self.order and np.any(av == 0.0):
                    raise EvalDomainError("abs is not differentiable at 0")
                v = np.abs(av)
                d1 = np.sign(av)
                d2 = np.zeros_like(av)
            else:  # pragma: no cover - parser rejects unknown names
                raise EvalDomainError(f"unknown function {name}")
            g = h = None
            if ag is not None:
                g = d1[..., None] * ag
            if ah is not None:
                h = d1[..., None, None] * ah + d2[..., None, None] * _outer(ag, ag)
            return v, g, h
        raise EvalDomainError(f"malformed AST node {kind!r}")  # pragma: no cover


def eval_value(ast, y: np.ndarray) -> np.ndarray:
    """Value only; y has shape (m,) or (..., m)."""
    y = np.asarray(y, dtype=float)
    v, _, _ = _Evaluator(y, 0).run(ast)
    return v


def eval_value_grad(ast, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    y = np.asarray(y, dtype=float)
    v, g, _ = _Evaluator(y, 1).run(ast)
    return v, g


def eval_jet2(ast, y: np.ndarray) -> Jet2:
    """Exact value/gradient/Hessian of the expression at y."""
    y = np.asarray(y, dtype=float)
    if not np.all(np.isfinite(y)):
        raise EvalDomainError("evaluation point is not finite")
    v, g, h = _Evaluator(y, 2).run(ast)
    return Jet2(value=v, grad=g, hess=h)
