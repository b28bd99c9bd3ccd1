"""Expression trees for holomorphic maps of one complex variable ``z``."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np


@dataclass(frozen=True)
class Const:
    value: complex


@dataclass(frozen=True)
class Var:
    pass


@dataclass(frozen=True)
class Neg:
    arg: "Node"


@dataclass(frozen=True)
class Add:
    left: "Node"
    right: "Node"


@dataclass(frozen=True)
class Sub:
    left: "Node"
    right: "Node"


@dataclass(frozen=True)
class Mul:
    left: "Node"
    right: "Node"


@dataclass(frozen=True)
class Div:
    left: "Node"
    right: "Node"


@dataclass(frozen=True)
class IntPow:
    base: "Node"
    exponent: int

    def __post_init__(self):
        if not isinstance(self.exponent, (int, np.integer)) or self.exponent < 0:
            raise ValueError(f"IntPow exponent must be a non-negative integer, got {self.exponent!r}")


Node = Union[Const, Var, Neg, Add, Sub, Mul, Div, IntPow]
BINARY = {Add: "+", Sub: "-", Mul: "*", Div: "/"}


def _fmt_real(x: float) -> str:
    return repr(float(x))


def _fmt_const(c: complex) -> str:
    c = complex(c)
    re, im = c.real, c.imag
    if im == 0.0:
        s = _fmt_real(re)
        return f"({s})" if s.startswith("-") else s
    if re == 0.0:
        s = _fmt_real(abs(im)) + "i"
        return f"(-{s})" if np.signbit(im) else s
    sign = "-" if np.signbit(im) else "+"
    return f"({_fmt_real(re)}{sign}{_fmt_real(abs(im))}i)"


def to_string(node: Node) -> str:
    """Canonical, fully parenthesized text; parsing it gives back ``node``."""
    if isinstance(node, Const):
        return _fmt_const(node.value)
    if isinstance(node, Var):
        return "z"
    if isinstance(node, Neg):
        return f"(-{to_string(node.arg)})"
    if isinstance(node, IntPow):
        return f"({to_string(node.base)}^{node.exponent})"
    op = BINARY[type(node)]
    return f"({to_string(node.left)}{op}{to_string(node.right)})"


def fold(node: Node) -> Node:
    """Constant folding for Neg/Add/Sub/Mul over constants (never Div)."""
    if isinstance(node, (Const, Var)):
        return node
    if isinstance(node, Neg):
        a = fold(node.arg)
        return Const(-a.value) if isinstance(a, Const) else Neg(a)
    if isinstance(node, IntPow):
        return IntPow(fold(node.base), node.exponent)
    left, right = fold(node.left), fold(node.right)
    if isinstance(left, Const) and isinstance(right, Const) and not isinstance(node, Div):
        a, b = left.value, right.value
        return Const({Add: a + b, Sub: a - b, Mul: a * b}[type(node)])
    return type(node)(left, right)


def has_division(node: Node) -> bool:
    if isinstance(node, Div):
        return True
    if isinstance(node, (Const, Var)):
        return False
    if isinstance(node, Neg):
        return has_division(node.arg)
    if isinstance(node, IntPow):
        return has_division(node.base)
    return has_division(node.left) or has_division(node.right)


def evaluate(node: Node, z):
    """Plain (vectorized) evaluation.  Division by zero yields non-finite values."""
    z = np.asarray(z, dtype=complex)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        return _eval(node, z)


def _eval(node, z):
    if isinstance(node, Const):
        return np.full(z.shape, node.value, dtype=complex)
    if isinstance(node, Var):
        return z
    if isinstance(node, Neg):
        return -_eval(node.arg, z)
    if isinstance(node, IntPow):
        return _eval(node.base, z) ** node.exponent
    a, b = _eval(node.left, z), _eval(node.right, z)
    if isinstance(node, Add):
        return a + b
    if isinstance(node, Sub):
        return a - b
    if isinstance(node, Mul):
        return a * b
    return a / b


def denominators(node: Node, z):
    """Values of every divisor subtree at ``z`` (for pole screening)."""
    out = []

    def walk(n):
        if isinstance(n, (Const, Var)):
            return
        if isinstance(n, Neg):
            walk(n.arg)
        elif isinstance(n, IntPow):
            walk(n.base)
        else:
            if isinstance(n, Div):
                out.append(evaluate(n.right, z))
            walk(n.left)
            walk(n.right)

    walk(node)
    return out
