"""Truncated multivariate Taylor arithmetic (jets) up to third order.

A :class:`Jet` carries the value of a scalar function at a point together
with its gradient, Hessian and third-derivative tensor.  Arithmetic on jets
propagates all of them exactly (to floating precision), which is how every
partial derivative in the package is obtained.
"""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from .errors import DimensionError, DomainError

MAX_ORDER = 3


def _sym3(H: np.ndarray, g: np.ndarray) -> np.ndarray:
    # H_ij g_k + H_ik g_j + H_jk g_i
    return (np.einsum("ij,k->ijk", H, g) + np.einsum("ik,j->ijk", H, g)
            + np.einsum("jk,i->ijk", H, g))


def _outer3(g: np.ndarray) -> np.ndarray:
    return np.einsum("i,j,k->ijk", g, g, g)


class Jet:
    """Value and derivatives (up to ``order``) of a scalar at a point in R^n."""

    __slots__ = ("n", "order", "value", "grad", "hess", "third")

    def __init__(self, n: int, order: int, value: float, grad=None, hess=None, third=None):
        if not 0 <= order <= MAX_ORDER:
            raise ValueError(f"jet order must be in 0..{MAX_ORDER}, got {order}")
        self.n = n
        self.order = order
        self.value = float(value)
        self.grad = np.zeros(n) if grad is None and order >= 1 else grad
        self.hess = np.zeros((n, n)) if hess is None and order >= 2 else hess
        self.third = np.zeros((n, n, n)) if third is None and order >= 3 else third
        if order < 1:
            self.grad = None
        if order < 2:
            self.hess = None
        if order < 3:
            self.third = None

    @classmethod
    def constant(cls, value: float, n: int, order: int) -> "Jet":
        return cls(n, order, value)

    @classmethod
    def variable(cls, value: float, slot: int, n: int, order: int) -> "Jet":
        """Seed jet of the coordinate function occupying ``slot``."""
        if not 0 <= slot < n:
            raise DimensionError(f"slot {slot} out of range for n={n}")
        j = cls(n, order, value)
        if order >= 1:
            j.grad[slot] = 1.0
        return j

    def is_constant(self) -> bool:
        return all(a is None or not np.any(a) for a in (self.grad, self.hess, self.third))

    def _coerce(self, other) -> "Jet":
        if isinstance(other, Jet):
            if other.n != self.n or other.order != self.order:
                raise DimensionError(
                    f"jet mismatch: (n={self.n}, order={self.order}) vs "
                    f"(n={other.n}, order={other.order})")
            return other
        if isinstance(other, (int, float, np.floating, np.integer)):
            return Jet(self.n, self.order, float(other))
        return NotImplemented

    def _map(self, op, other: "Jet") -> "Jet":
        return Jet(self.n, self.order, op(self.value, other.value),
                   None if self.grad is None else op(self.grad, other.grad),
                   None if self.hess is None else op(self.hess, other.hess),
                   None if self.third is None else op(self.third, other.third))

    def __add__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return o
        return self._map(lambda a, b: a + b, o)

    __radd__ = __add__

    def __sub__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return o
        return self._map(lambda a, b: a - b, o)

    def __rsub__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return o
        return o._map(lambda a, b: a - b, self)

    def __neg__(self) -> "Jet":
        return self.scale(-1.0)

    def __pos__(self) -> "Jet":
        return self

    def scale(self, c: float) -> "Jet":
        return Jet(self.n, self.order, c * self.value,
                   None if self.grad is None else c * self.grad,
                   None if self.hess is None else c * self.hess,
                   None if self.third is None else c * self.third)

    def __mul__(self, other):
        if isinstance(other, (int, float, np.floating, np.integer)):
            return self.scale(float(other))
        o = self._coerce(other)
        if o is NotImplemented:
            return o
        a, b = self, o
        grad = hess = third = None
        if self.order >= 1:
            grad = a.grad * b.value + a.value * b.grad
        if self.order >= 2:
            hess = (a.hess * b.value + np.outer(a.grad, b.grad) + np.outer(b.grad, a.grad)
                    + a.value * b.hess)
        if self.order >= 3:
            third = (a.third * b.value + a.value * b.third
                     + _sym3(a.hess, b.grad) + _sym3(b.hess, a.grad))
        return Jet(self.n, self.order, a.value * b.value, grad, hess, third)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, (int, float, np.floating, np.integer)):
            if other == 0:
                raise DomainError("division by zero")
            return self.scale(1.0 / float(other))
        o = self._coerce(other)
        if o is NotImplemented:
            return o
        return self * reciprocal(o)

    def __rtruediv__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return o
        return o * reciprocal(self)

    def __pow__(self, other):
        if isinstance(other, Jet):
            return power(self, other)
        return power(self, float(other))

    def __rpow__(self, other):
        return power(self._coerce(other), self)

    def apply(self, d0: float, d1: float, d2: float = 0.0, d3: float = 0.0) -> "Jet":
        """Compose a univariate function with derivatives ``d0..d3`` at ``value``."""
        grad = hess = third = None
        g = self.grad
        if self.order >= 1:
            grad = d1 * g
        if self.order >= 2:
            hess = d1 * self.hess + d2 * np.outer(g, g)
        if self.order >= 3:
            third = d1 * self.third + d2 * _sym3(self.hess, g) + d3 * _outer3(g)
        return Jet(self.n, self.order, d0, grad, hess, third)

    def derivative(self, i: int) -> "Jet":
        """Jet of the partial derivative along coordinate ``i`` (one order lower)."""
        if self.order < 1:
            raise ValueError("cannot differentiate an order-0 jet")
        return Jet(self.n, self.order - 1, self.grad[i],
                   self.hess[i] if self.order >= 2 else None,
                   self.third[i] if self.order >= 3 else None)

    def truncate(self, order: int) -> "Jet":
        if order > self.order:
            raise ValueError("cannot raise the order of a jet")
        return Jet(self.n, order, self.value, self.grad, self.hess, self.third)

    def compose(self, inner: Sequence["Jet"]) -> "Jet":
        """Chain rule: this jet is in the variables ``y``; ``inner[a]`` is ``y_a`` as a jet in ``x``."""
        if len(inner) != self.n:
            raise DimensionError(f"compose needs {self.n} inner jets, got {len(inner)}")
        order = inner[0].order
        nx = inner[0].n
        if order > self.order:
            raise ValueError("outer jet order is lower than the requested order")
        grad = hess = third = None
        if order >= 1:
            Y1 = np.array([y.grad for y in inner])
            grad = self.grad @ Y1
        if order >= 2:
            Y2 = np.array([y.hess for y in inner])
            hess = np.einsum("a,aij->ij", self.grad, Y2) + Y1.T @ self.hess @ Y1
        if order >= 3:
            Y3 = np.array([y.third for y in inner])
            G2 = self.hess
            third = (np.einsum("a,aijk->ijk", self.grad, Y3)
                     + np.einsum("ab,aij,bk->ijk", G2, Y2, Y1)
                     + np.einsum("ab,aik,bj->ijk", G2, Y2, Y1)
                     + np.einsum("ab,ajk,bi->ijk", G2, Y2, Y1)
                     + np.einsum("abc,ai,bj,ck->ijk", self.third, Y1, Y1, Y1))
        return Jet(nx, order, self.value, grad, hess, third)

    def __float__(self) -> float:
        return self.value

    def __repr__(self) -> str:
        parts = [f"value={self.value!r}"]
        if self.grad is not None:
            parts.append(f"grad={self.grad.tolist()}")
        if self.hess is not None:
            parts.append(f"hess={self.hess.tolist()}")
        return f"Jet(n={self.n}, order={self.order}, {', '.join(parts)})"


def seed(point: Sequence[float], order: int) -> list[Jet]:
    """Coordinate jets of ``point``: the identity map as jets."""
    n = len(point)
    return [Jet.variable(float(x), i, n, order) for i, x in enumerate(point)]


def reciprocal(u: Jet) -> Jet:
    x = u.value
    if x == 0.0:
        raise DomainError("division by zero")
    r = 1.0 / x
    return u.apply(r, -r * r, 2.0 * r ** 3, -6.0 * r ** 4)


def log(u):
    if not isinstance(u, Jet):
        if u <= 0:
            raise DomainError(f"ln of non-positive value {u!r}")
        return math.log(u)
    x = u.value
    if x <= 0.0:
        raise DomainError(f"ln of non-positive value {x!r}")
    r = 1.0 / x
    return u.apply(math.log(x), r, -r * r, 2.0 * r ** 3)


def exp(u):
    if not isinstance(u, Jet):
        return math.exp(u)
    e = math.exp(u.value)
    return u.apply(e, e, e, e)


def sin(u):
    if not isinstance(u, Jet):
        return math.sin(u)
    s, c = math.sin(u.value), math.cos(u.value)
    return u.apply(s, c, -s, -c)


def cos(u):
    if not isinstance(u, Jet):
        return math.cos(u)
    s, c = math.sin(u.value), math.cos(u.value)
    return u.apply(c, -s, -c, s)


def arctan(u):
    if not isinstance(u, Jet):
        return math.atan(u)
    x = u.value
    q = 1.0 / (1.0 + x * x)
    return u.apply(math.atan(x), q, -2.0 * x * q * q, (6.0 * x * x - 2.0) * q ** 3)


def arctan2(y, x):
    """Polar angle in (-pi, pi); smooth away from the non-positive x axis."""
    if not isinstance(x, Jet) and not isinstance(y, Jet):
        return math.atan2(y, x)
    r = sqrt(x * x + y * y)
    xv = x.value if isinstance(x, Jet) else x
    yv = y.value if isinstance(y, Jet) else y
    if yv == 0.0 and xv <= 0.0:
        raise DomainError("polar angle is not smooth on the non-positive x axis")
    # half-angle form avoids the branch cut at x = 0
    return 2.0 * arctan(y / (r + x))


def sqrt(u):
    return power(u, 0.5)


def _falling(c: float, m: int) -> float:
    out = 1.0
    for j in range(m):
        out *= c - j
    return out


def power(base, exponent):
    """``base ** exponent`` for a jet base and constant or jet exponent."""
    if not isinstance(exponent, Jet) and not isinstance(base, Jet):
        return _scalar_power(float(base), float(exponent))
    if isinstance(exponent, Jet):
        if not exponent.is_constant():
            if not isinstance(base, Jet):
                base = exponent._coerce(base)
            if base.value <= 0.0:
                raise DomainError("variable exponent requires a positive base")
            return exp(exponent * log(base))
        exponent = exponent.value
    if not isinstance(base, Jet):
        return _scalar_power(float(base), float(exponent))
    c = float(exponent)
    x = base.value
    is_int = c == math.floor(c)
    if not is_int and x <= 0.0:
        raise DomainError(f"non-integer power {c!r} of non-positive base {x!r}")
    if x == 0.0 and c < 0:
        raise DomainError(f"zero raised to negative power {c!r}")
    ds = [0.0, 0.0, 0.0, 0.0]
    for m in range(max(2, base.order + 1)):  # apply() ignores coefficients above the jet order
        f = _falling(c, m)
        if f == 0.0:
            continue
        ds[m] = f * x ** int(c - m) if is_int and c - m >= 0 else f * x ** (c - m)
    return base.apply(*ds)


def _scalar_power(x: float, c: float) -> float:
    if c != math.floor(c) and x <= 0.0:
        raise DomainError(f"non-integer power {c!r} of non-positive base {x!r}")
    if x == 0.0 and c < 0:
        raise DomainError(f"zero raised to negative power {c!r}")
    return x ** c
