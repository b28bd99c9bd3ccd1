"""Truncated Taylor series ("jets") and their evaluation on expression trees."""
from __future__ import annotations

import numpy as np

from ..errors import PoleAtPoint
from .ast import Add, Const, Div, IntPow, Mul, Neg, Node, Sub, Var


class Jet:
    """Coefficients ``c_0..c_k`` of a function's Taylor expansion at a point."""

    __slots__ = ("coeffs",)

    def __init__(self, coeffs):
        self.coeffs = np.asarray(coeffs, dtype=complex)

    @property
    def order(self) -> int:
        return self.coeffs.shape[0] - 1

    @classmethod
    def constant(cls, c, k):
        out = np.zeros(k + 1, dtype=complex)
        out[0] = c
        return cls(out)

    @classmethod
    def variable(cls, z0, k):
        out = np.zeros(k + 1, dtype=complex)
        out[0] = z0
        if k >= 1:
            out[1] = 1.0
        return cls(out)

    def derivative(self, n: int) -> complex:
        """``f^(n)(z0) = n! c_n``."""
        from math import factorial
        return complex(self.coeffs[n] * factorial(n))

    def __add__(self, other):
        return Jet(self.coeffs + other.coeffs)

    def __sub__(self, other):
        return Jet(self.coeffs - other.coeffs)

    def __neg__(self):
        return Jet(-self.coeffs)

    def __mul__(self, other):
        k = self.order
        return Jet(np.convolve(self.coeffs, other.coeffs)[: k + 1])

    def __truediv__(self, other):
        b = other.coeffs
        if b[0] == 0:
            raise PoleAtPoint("divisor vanishes at the expansion point")
        a = self.coeffs
        q = np.zeros_like(a)
        for n in range(a.shape[0]):
            q[n] = (a[n] - np.dot(q[:n], b[n:0:-1])) / b[0]
        return Jet(q)

    def __pow__(self, e: int):
        result = Jet.constant(1.0, self.order)
        base = self
        while e:
            if e & 1:
                result = result * base
            e >>= 1
            if e:
                base = base * base
        return result

    def __repr__(self):
        return f"Jet({self.coeffs!r})"


def eval_jet(node: Node, z0: complex, k: int) -> Jet:
    """Jet of order ``k`` of the map at ``z0``: ``c_n = f^(n)(z0) / n!``."""
    if k < 0:
        raise ValueError("jet order must be >= 0")
    z0 = complex(z0)

    def rec(n):
        if isinstance(n, Const):
            return Jet.constant(n.value, k)
        if isinstance(n, Var):
            return Jet.variable(z0, k)
        if isinstance(n, Neg):
            return -rec(n.arg)
        if isinstance(n, IntPow):
            return rec(n.base) ** n.exponent
        a, b = rec(n.left), rec(n.right)
        if isinstance(n, Add):
            return a + b
        if isinstance(n, Sub):
            return a - b
        if isinstance(n, Mul):
            return a * b
        return a / b

    return rec(node)
