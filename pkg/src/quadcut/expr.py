"""Expression DSL for scalar fields on R^3 with forward-mode derivatives.

Grammar (standard precedence, left-associative binary operators)::

    expr   := term (('+'|'-') term)*
    term   := unary (('*'|'/') unary)*
    unary  := '-' unary | power
    power  := atom ('^' signed-integer)?
    atom   := NUMBER | 'pi' | 'x'|'y'|'z' | FUNC '(' expr ')' | '(' expr ')'
    FUNC   := 'sin'|'cos'|'sqrt'|'abs'|'exp'

Evaluation propagates value, gradient and Hessian jointly (truncated
second-order jets), vectorized over point batches of shape (n, 3).
"""

from __future__ import annotations

import math
import re

import numpy as np

from .errors import ExpressionError

FUNCTIONS = ("sin", "cos", "sqrt", "abs", "exp")
VARIABLES = {"x": 0, "y": 1, "z": 2}

_TOKEN = re.compile(
    r"\s*(?:(?P<num>\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?"
    r"|(?P<name>[A-Za-z_]\w*)"
    r"|(?P<op>[-+*/^()]))"
)


def _tokenize(text):
    tokens = []
    pos = 0
    end = len(text.rstrip())
    while pos < end:
        m = _TOKEN.match(text, pos)
        if m is None:
            raise ExpressionError(f"unexpected character {text[pos]!r} at column {pos + 1}")
        if m.group("num") is not None:
            tokens.append(("num", float(m.group()), pos))
        elif m.group("name") is not None:
            tokens.append(("name", m.group("name"), pos))
        else:
            tokens.append(("op", m.group("op"), pos))
        pos = m.end()
    return tokens


class _Parser:
    def __init__(self, text):
        self.text = text
        self.tokens = _tokenize(text)
        self.i = 0

    def _peek(self):
        return self.tokens[self.i] if self.i < len(self.tokens) else (None, None, len(self.text))

    def _next(self):
        tok = self._peek()
        self.i += 1
        return tok

    def _expect_op(self, op):
        kind, val, col = self._next()
        if kind != "op" or val != op:
            raise ExpressionError(f"expected {op!r} at column {col + 1} in {self.text!r}")

    def parse(self):
        node = self._expr()
        kind, val, col = self._peek()
        if kind is not None:
            raise ExpressionError(f"trailing input {val!r} at column {col + 1}")
        return node

    def _expr(self):
        node = self._term()
        while True:
            kind, val, _ = self._peek()
            if kind == "op" and val in "+-":
                self.i += 1
                rhs = self._term()
                node = ("add" if val == "+" else "sub", node, rhs)
            else:
                return node

    def _term(self):
        node = self._unary()
        while True:
            kind, val, _ = self._peek()
            if kind == "op" and val in "*/":
                self.i += 1
                rhs = self._unary()
                node = ("mul" if val == "*" else "div", node, rhs)
            else:
                return node

    def _unary(self):
        kind, val, _ = self._peek()
        if kind == "op" and val == "-":
            self.i += 1
            return ("neg", self._unary())
        return self._power()

    def _power(self):
        node = self._atom()
        kind, val, _ = self._peek()
        if kind == "op" and val == "^":
            self.i += 1
            return ("pow", node, self._exponent())
        return node

    def _exponent(self):
        sign = 1
        kind, val, col = self._next()
        if kind == "op" and val == "-":
            sign = -1
            kind, val, col = self._next()
        if kind == "op" and val == "(":
            inner = self._exponent()
            self._expect_op(")")
            return sign * inner
        if kind != "num" or val != int(val):
            raise ExpressionError(f"exponent must be an integer at column {col + 1}")
        return sign * int(val)

    def _atom(self):
        kind, val, col = self._next()
        if kind == "num":
            return ("num", val)
        if kind == "name":
            if val in VARIABLES:
                return ("var", VARIABLES[val])
            if val == "pi":
                return ("num", math.pi)
            if val in FUNCTIONS:
                self._expect_op("(")
                arg = self._expr()
                self._expect_op(")")
                return ("call", val, arg)
            raise ExpressionError(f"unknown name {val!r} at column {col + 1}")
        if kind == "op" and val == "(":
            node = self._expr()
            self._expect_op(")")
            return node
        raise ExpressionError(f"unexpected token at column {col + 1} in {self.text!r}")


def parse(text):
    """Parse an expression into a tuple-based AST."""
    return _Parser(text).parse()


# ---------------------------------------------------------------------------
# Jet evaluation: (value, gradient, hessian) propagated together.
# ---------------------------------------------------------------------------

def _outer(a, b):
    return a[..., :, None] * b[..., None, :]


def _unary_jet(g, h, f, df, d2f):
    if g is None:
        return f, None, None
    fg = df[..., None] * g
    if h is None:
        return f, fg, None
    fh = d2f[..., None, None] * _outer(g, g) + df[..., None, None] * h
    return f, fg, fh


def eval_jet(node, points, order=2):
    """Evaluate an AST at ``points`` (n, 3).

    Returns (value, gradient, hessian); gradient/hessian are None when
    ``order`` does not request them.
    """
    pts = np.asarray(points, dtype=float)
    n = pts.shape[0]
    kind = node[0]

    if kind == "num":
        v = np.full(n, node[1])
        g = np.zeros((n, 3)) if order >= 1 else None
        h = np.zeros((n, 3, 3)) if order >= 2 else None
        return v, g, h
    if kind == "var":
        v = pts[:, node[1]].copy()
        g = None
        if order >= 1:
            g = np.zeros((n, 3))
            g[:, node[1]] = 1.0
        h = np.zeros((n, 3, 3)) if order >= 2 else None
        return v, g, h
    if kind == "neg":
        v, g, h = eval_jet(node[1], pts, order)
        return -v, None if g is None else -g, None if h is None else -h
    if kind in ("add", "sub"):
        va, ga, ha = eval_jet(node[1], pts, order)
        vb, gb, hb = eval_jet(node[2], pts, order)
        s = 1.0 if kind == "add" else -1.0
        return (
            va + s * vb,
            None if ga is None else ga + s * gb,
            None if ha is None else ha + s * hb,
        )
    if kind == "mul":
        va, ga, ha = eval_jet(node[1], pts, order)
        vb, gb, hb = eval_jet(node[2], pts, order)
        v = va * vb
        g = h = None
        if order >= 1:
            g = ga * vb[..., None] + gb * va[..., None]
        if order >= 2:
            h = (
                ha * vb[..., None, None]
                + hb * va[..., None, None]
                + _outer(ga, gb)
                + _outer(gb, ga)
            )
        return v, g, h
    if kind == "div":
        va, ga, ha = eval_jet(node[1], pts, order)
        vb, gb, hb = eval_jet(node[2], pts, order)
        v = va / vb
        g = h = None
        if order >= 1:
            g = (ga - v[..., None] * gb) / vb[..., None]
        if order >= 2:
            h = (
                ha
                - v[..., None, None] * hb
                - _outer(g, gb)
                - _outer(gb, g)
            ) / vb[..., None, None]
        return v, g, h
    if kind == "pow":
        va, ga, ha = eval_jet(node[1], pts, order)
        k = node[2]
        v = va**k
        if order == 0:
            return v, None, None
        df = k * va ** (k - 1)
        d2f = k * (k - 1) * va ** (k - 2) if order >= 2 else None
        return _unary_jet(ga, ha, v, df, d2f)
    if kind == "call":
        va, ga, ha = eval_jet(node[2], pts, order)
        name = node[1]
        if name == "sin":
            f = np.sin(va)
        elif name == "cos":
            f = np.cos(va)
        elif name == "sqrt":
            f = np.sqrt(va)
        elif name == "exp":
            f = np.exp(va)
        elif name == "abs":
            f = np.abs(va)
        else:  # pragma: no cover - parser rejects unknown names
            raise ExpressionError(f"unknown function {name!r}")
        if order == 0:
            return f, None, None
        d2f = None
        if name == "sin":
            df = np.cos(va)
            d2f = -f
        elif name == "cos":
            df = -np.sin(va)
            d2f = -f
        elif name == "sqrt":
            df = 0.5 / f
            d2f = -0.5 * df / va
        elif name == "exp":
            df = f
            d2f = f
        else:
            df = np.sign(va)
            d2f = np.zeros_like(va)
        return _unary_jet(ga, ha, f, df, d2f if order >= 2 else None)
    raise ExpressionError(f"malformed AST node {node!r}")  # pragma: no cover
