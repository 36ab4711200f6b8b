"""Coefficient expressions in the cross-section variable ``y = (y1, y2)``.

Grammar (``^`` is right-associative and binds tighter than unary minus)::

    expr    := term   (("+" | "-") term)*
    term    := unary  (("*" | "/") unary)*
    unary   := "-" unary | power
    power   := atom ("^" unary)?
    atom    := NUMBER | NAME | NAME "(" expr ("," expr)* ")" | "(" expr ")"

Variables are ``y1``, ``y2``, ``r = |y|`` and ``theta = atan2(y2, y1)``.
Evaluation is vectorised over numpy arrays of points.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, replace
from typing import Callable

import numpy as np

VARIABLES = ("y1", "y2", "r", "theta")

FUNCTIONS: dict[str, tuple[int, Callable]] = {
    "exp": (1, np.exp),
    "tanh": (1, np.tanh),
    "cos": (1, np.cos),
    "sin": (1, np.sin),
    "sqrt": (1, np.sqrt),
    "abs": (1, np.abs),
    "min": (2, np.minimum),
    "max": (2, np.maximum),
}


class ExprSyntaxError(ValueError):
    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} at offset {offset}")
        self.offset = offset


class UnknownIdentifierError(ExprSyntaxError):
    pass


class ExprDomainError(ArithmeticError):
    """Division by zero or square root of a negative number."""

    def __init__(self, message: str, node: "Node"):
        super().__init__(f"{message} in '{format_expr(node)}'")
        self.node = node


# -- tree -----------------------------------------------------------------


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Neg:
    arg: "Node"


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Node"
    right: "Node"


@dataclass(frozen=True)
class Call:
    name: str
    args: tuple["Node", ...]


Node = Num | Var | Neg | BinOp | Call

_PREC = {"+": 1, "-": 1, "*": 2, "/": 2, "^": 4}


def format_expr(node: Node) -> str:
    """Render a tree as source text that reparses to the same tree."""
    return _fmt(node, 0)


def _fmt(node: Node, parent: int) -> str:
    if isinstance(node, Num):
        s = repr(float(node.value))
        if node.value < 0:
            s = f"({s})"
        return s
    if isinstance(node, Var):
        return node.name
    if isinstance(node, Call):
        return f"{node.name}({', '.join(_fmt(a, 0) for a in node.args)})"
    if isinstance(node, Neg):
        s = "-" + _fmt(node.arg, 3)
        return f"({s})" if parent >= 3 else s
    prec = _PREC[node.op]
    if node.op == "^":
        s = f"{_fmt(node.left, prec + 1)}^{_fmt(node.right, prec)}"
    else:
        s = f"{_fmt(node.left, prec)}{node.op}{_fmt(node.right, prec + 1)}"
    return f"({s})" if prec < parent else s


# -- tokenizer / parser -----------------------------------------------------

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<name>[A-Za-z_][A-Za-z_0-9]*)|(?P<op>[-+*/^(),]))"
)


def _tokenize(src: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    while pos < len(src):
        if src[pos:].strip() == "":
            break
        m = _TOKEN.match(src, pos)
        if not m:
            skip = len(src[pos:]) - len(src[pos:].lstrip())
            raise ExprSyntaxError(f"unexpected character {src[pos + skip]!r}", pos + skip)
        kind = m.lastgroup
        tokens.append((kind, m.group(kind), m.start(kind)))
        pos = m.end()
    tokens.append(("end", "", len(src)))
    return tokens


class _Parser:
    def __init__(self, src: str):
        self.tokens = _tokenize(src)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, value: str):
        kind, text, off = self.take()
        if text != value or kind != "op":
            raise ExprSyntaxError(f"expected {value!r}, found {text or 'end of input'!r}", off)

    def parse(self) -> Node:
        node = self.expr()
        kind, text, off = self.peek()
        if kind != "end":
            raise ExprSyntaxError(f"unexpected {text!r}", off)
        return node

    def expr(self) -> Node:
        node = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            node = BinOp(op, node, self.term())
        return node

    def term(self) -> Node:
        node = self.unary()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.take()[1]
            node = BinOp(op, node, self.unary())
        return node

    def unary(self) -> Node:
        if self.peek()[:2] == ("op", "-"):
            self.take()
            return Neg(self.unary())
        if self.peek()[:2] == ("op", "+"):
            self.take()
            return self.unary()
        return self.power()

    def power(self) -> Node:
        base = self.atom()
        if self.peek()[:2] == ("op", "^"):
            self.take()
            return BinOp("^", base, self.unary())
        return base

    def atom(self) -> Node:
        kind, text, off = self.take()
        if kind == "num":
            return Num(float(text))
        if kind == "name":
            if self.peek()[:2] == ("op", "("):
                if text not in FUNCTIONS:
                    raise UnknownIdentifierError(f"unknown function {text!r}", off)
                self.take()
                args = [self.expr()]
                while self.peek()[:2] == ("op", ","):
                    self.take()
                    args.append(self.expr())
                self.expect(")")
                arity = FUNCTIONS[text][0]
                if len(args) != arity:
                    raise ExprSyntaxError(f"{text} takes {arity} argument(s), got {len(args)}", off)
                return Call(text, tuple(args))
            if text not in VARIABLES:
                raise UnknownIdentifierError(f"unknown identifier {text!r}", off)
            return Var(text)
        if (kind, text) == ("op", "("):
            node = self.expr()
            self.expect(")")
            return node
        raise ExprSyntaxError(f"unexpected {text or 'end of input'!r}", off)


# -- evaluation -------------------------------------------------------------


def _eval(node: Node, env: dict[str, np.ndarray]):
    if isinstance(node, Num):
        return node.value
    if isinstance(node, Var):
        return env[node.name]
    if isinstance(node, Neg):
        return -_eval(node.arg, env)
    if isinstance(node, Call):
        args = [_eval(a, env) for a in node.args]
        if node.name == "sqrt" and np.any(np.asarray(args[0]) < 0):
            raise ExprDomainError("sqrt of negative value", node)
        with np.errstate(over="ignore"):
            return FUNCTIONS[node.name][1](*args)
    left = _eval(node.left, env)
    right = _eval(node.right, env)
    if node.op == "+":
        return left + right
    if node.op == "-":
        return left - right
    if node.op == "*":
        return left * right
    if node.op == "/":
        if np.any(np.asarray(right) == 0):
            raise ExprDomainError("division by zero", node)
        return left / right
    with np.errstate(invalid="ignore", over="ignore"):
        out = np.power(np.asarray(left, dtype=float), right)
    if np.any(np.isnan(out)) and not np.any(np.isnan(left) | np.isnan(right)):
        raise ExprDomainError("power of negative base with fractional exponent", node)
    return out if np.ndim(out) else float(out)


def _uses_vars(node: Node) -> bool:
    if isinstance(node, Var):
        return True
    if isinstance(node, Num):
        return False
    if isinstance(node, Neg):
        return _uses_vars(node.arg)
    if isinstance(node, Call):
        return any(_uses_vars(a) for a in node.args)
    return _uses_vars(node.left) or _uses_vars(node.right)


def _fold(node: Node) -> Node:
    """Replace variable-free subtrees by their value (skipped when they fail)."""
    if isinstance(node, (Num, Var)):
        return node
    if isinstance(node, Neg):
        node = Neg(_fold(node.arg))
    elif isinstance(node, Call):
        node = Call(node.name, tuple(_fold(a) for a in node.args))
    else:
        node = BinOp(node.op, _fold(node.left), _fold(node.right))
    if not _uses_vars(node):
        try:
            val = float(_eval(node, {}))
        except ExprDomainError:
            return node
        if math.isfinite(val):
            return Num(val)
    return node


def _substitute_scale(node: Node, s: float) -> Node:
    """Rewrite the tree so that it evaluates at ``y * s`` instead of ``y``."""
    if isinstance(node, Var):
        if node.name == "theta":
            return node
        return BinOp("*", node, Num(s))
    if isinstance(node, Num):
        return node
    if isinstance(node, Neg):
        return Neg(_substitute_scale(node.arg, s))
    if isinstance(node, Call):
        return Call(node.name, tuple(_substitute_scale(a, s) for a in node.args))
    return BinOp(node.op, _substitute_scale(node.left, s), _substitute_scale(node.right, s))


@dataclass(frozen=True)
class CoeffExpr:
    """A parsed, immutable coefficient expression."""

    source: str
    tree: Node

    def __call__(self, points) -> np.ndarray | float:
        return eval_expr(self, points)

    @property
    def is_constant(self) -> bool:
        return isinstance(self.tree, Num)

    @property
    def constant(self) -> float:
        if not self.is_constant:
            raise ValueError(f"'{self.source}' is not constant")
        return self.tree.value

    def rescaled(self, R: float) -> "CoeffExpr":
        """The coefficient ``y -> c(y / R)`` used on a domain dilated by ``R``."""
        if R == 1.0 or self.is_constant:
            return self
        tree = _substitute_scale(self.tree, 1.0 / R)
        return CoeffExpr(format_expr(tree), tree)

    def scaled_value(self, t: float) -> "CoeffExpr":
        """The coefficient ``t * c(y)``."""
        tree = _fold(BinOp("*", Num(float(t)), self.tree))
        return CoeffExpr(format_expr(tree), tree)

    def __str__(self) -> str:
        return self.source


def parse_expr(source: str | float | CoeffExpr) -> CoeffExpr:
    if isinstance(source, CoeffExpr):
        return source
    if isinstance(source, (int, float)):
        return CoeffExpr(repr(float(source)), Num(float(source)))
    tree = _fold(_Parser(str(source)).parse())
    return CoeffExpr(str(source).strip(), tree)


def eval_expr(e: CoeffExpr, points) -> np.ndarray | float:
    """Evaluate at one point ``(y1, y2)`` or an ``(n, 2)`` array of points."""
    pts = np.asarray(points, dtype=float)
    single = pts.ndim == 1
    pts = np.atleast_2d(pts)
    y1, y2 = pts[:, 0], pts[:, 1]
    env = {"y1": y1, "y2": y2, "r": np.hypot(y1, y2), "theta": np.arctan2(y2, y1)}
    # atan2 returns -pi on the negative axis with y2 = -0.0; the angle range is (-pi, pi]
    env["theta"] = np.where(env["theta"] == -np.pi, np.pi, env["theta"])
    out = np.broadcast_to(np.asarray(_eval(e.tree, env), dtype=float), y1.shape)
    return float(out[0]) if single else np.array(out)


# -- problem parameters -----------------------------------------------------


@dataclass(frozen=True)
class ProblemParams:
    """Diffusivities, exchange rates and linearised reaction coefficients.

    ``kappa`` is the exchange coefficient on the boundary, ``f_lin`` the bulk
    growth rate ``d_v f(y, 0)`` and ``g_lin`` the surface rate ``d_u g(y, 0)``.
    """

    d: float = 1.0
    D: float = 1.0
    mu: float = 1.0
    nu: float = 1.0
    eps: float = 1e-6
    kappa: CoeffExpr = parse_expr(1.0)
    f_lin: CoeffExpr = parse_expr(0.0)
    g_lin: CoeffExpr = parse_expr(0.0)

    def __post_init__(self):
        for name in ("kappa", "f_lin", "g_lin"):
            object.__setattr__(self, name, parse_expr(getattr(self, name)))
        for name in ("d", "D", "mu", "nu"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.eps < 0:
            raise ValueError("eps must be nonnegative")

    def with_(self, **changes) -> "ProblemParams":
        return replace(self, **changes)

    def rescaled(self, R: float) -> "ProblemParams":
        """Coefficients ``c(y / R)`` for the domain dilated by ``R``."""
        return replace(
            self, kappa=self.kappa.rescaled(R), f_lin=self.f_lin.rescaled(R), g_lin=self.g_lin.rescaled(R)
        )

    def check_kappa(self, boundary_points) -> None:
        k = np.atleast_1d(self.kappa(boundary_points))
        if k.min() < 0 or k.max() <= 0:
            raise ValueError("kappa must be nonnegative and not identically zero on the boundary")

    @property
    def homogeneous(self) -> bool:
        return self.kappa.is_constant and self.f_lin.is_constant and self.g_lin.is_constant

    def as_dict(self) -> dict:
        return {
            "d": self.d,
            "D": self.D,
            "mu": self.mu,
            "nu": self.nu,
            "eps": self.eps,
            "kappa": self.kappa.source,
            "f_lin": self.f_lin.source,
            "g_lin": self.g_lin.source,
        }
