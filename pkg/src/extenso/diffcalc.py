"""Scalar fields and smooth maps evaluated through jets.

A :class:`ScalarField` is anything that turns a list of coordinate jets into
a jet.  Evaluating it on seed jets gives its derivatives at a point;
evaluating it on arbitrary jets composes it with another map.  Fields built
from expressions, native Python rules, algebra on fields and partial
derivatives all share this single interface.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

import numpy as np

from . import expr as _expr
from .errors import DimensionError, DomainError
from .jets import MAX_ORDER, Jet, seed

Rule = Callable[[Sequence[Jet]], "Jet | float"]


@dataclass(frozen=True)
class Box:
    """Open axis-aligned box; infinite bounds allowed."""

    lower: tuple[float, ...]
    upper: tuple[float, ...]

    def __post_init__(self):
        if len(self.lower) != len(self.upper):
            raise DimensionError("box bounds differ in length")
        if any(lo >= hi for lo, hi in zip(self.lower, self.upper)):
            raise ValueError(f"empty box {self.lower} .. {self.upper}")

    @classmethod
    def of(cls, bounds: Sequence[tuple[float, float]]) -> "Box":
        return cls(tuple(float(b[0]) for b in bounds), tuple(float(b[1]) for b in bounds))

    @classmethod
    def unbounded(cls, n: int) -> "Box":
        return cls((-np.inf,) * n, (np.inf,) * n)

    @classmethod
    def positive(cls, n: int) -> "Box":
        return cls((0.0,) * n, (np.inf,) * n)

    @property
    def n(self) -> int:
        return len(self.lower)

    def contains(self, p) -> bool:
        return all(lo < x < hi for lo, x, hi in zip(self.lower, p, self.upper))

    def intersect(self, other: "Box | None") -> "Box":
        if other is None:
            return self
        return Box(tuple(max(a, b) for a, b in zip(self.lower, other.lower)),
                   tuple(min(a, b) for a, b in zip(self.upper, other.upper)))

    def is_bounded(self) -> bool:
        return bool(np.all(np.isfinite(self.lower)) and np.all(np.isfinite(self.upper)))


def _meet(a: Box | None, b: Box | None) -> Box | None:
    if a is None:
        return b
    return a.intersect(b)


class ScalarField:
    """Smooth function on an open box of R^n, evaluable on jets."""

    __slots__ = ("n", "rule", "domain", "label", "accepts_floats")

    def __init__(self, n: int, rule: Rule, domain: Box | None = None, label: str = "",
                 accepts_floats: bool = False):
        if domain is not None and domain.n != n:
            raise DimensionError(f"domain has dimension {domain.n}, field has {n}")
        self.n = n
        self.rule = rule
        self.domain = domain
        self.label = label
        # whether ``rule`` also works on plain floats (fast order-0 evaluation)
        self.accepts_floats = accepts_floats

    # -- construction ------------------------------------------------------

    @classmethod
    def from_expression(cls, source: "str | _expr.Expression", variables: Sequence[str],
                        constants: Mapping[str, float] | None = None,
                        domain: Box | None = None) -> "ScalarField":
        e = _expr.parse(source) if isinstance(source, str) else source
        constants = dict(constants or {})
        names = list(variables)
        rule = _expr.compile_expression(e, names, constants)
        return cls(len(names), rule, domain, _expr.pretty(e), accepts_floats=True)

    @classmethod
    def constant(cls, n: int, value: float, domain: Box | None = None) -> "ScalarField":
        v = float(value)
        return cls(n, lambda xs: v, domain, repr(v), accepts_floats=True)

    @classmethod
    def coordinate(cls, n: int, i: int, domain: Box | None = None) -> "ScalarField":
        return cls(n, lambda xs: xs[i], domain, f"x{i + 1}", accepts_floats=True)

    # -- evaluation --------------------------------------------------------

    def evaluate(self, xs: Sequence[Jet]) -> Jet:
        if len(xs) != self.n:
            raise DimensionError(f"field of dimension {self.n} given {len(xs)} inputs")
        out = self.rule(xs)
        if not isinstance(out, Jet):
            out = Jet(xs[0].n if xs else 0, xs[0].order if xs else 0, float(out))
        return out

    def check_domain(self, p) -> None:
        if len(p) != self.n:
            raise DimensionError(f"point of dimension {len(p)} for field of dimension {self.n}")
        if self.domain is not None and not self.domain.contains(p):
            raise DomainError(f"point {tuple(float(x) for x in p)} outside domain box")

    def jet(self, p, order: int = 0) -> Jet:
        return jet_of(self, p, order)

    def __call__(self, p) -> float:
        p = np.asarray(p, dtype=float)
        self.check_domain(p)
        if self.accepts_floats:
            return float(self.rule([float(x) for x in p]))
        return self.evaluate(seed(p, 0)).value

    # -- algebra -----------------------------------------------------------

    def _lift(self, other) -> "ScalarField":
        if isinstance(other, ScalarField):
            if other.n != self.n:
                raise DimensionError("fields on charts of different dimension")
            return other
        return ScalarField.constant(self.n, float(other))

    def _combine(self, other, op, sym: str, swap: bool = False) -> "ScalarField":
        o = self._lift(other)
        a, b = (o, self) if swap else (self, o)
        ra, rb = a.rule, b.rule
        return ScalarField(self.n, lambda xs: op(ra(xs), rb(xs)), _meet(a.domain, b.domain),
                           f"({a.label}{sym}{b.label})", a.accepts_floats and b.accepts_floats)

    def __add__(self, other):
        return self._combine(other, lambda u, v: u + v, "+")

    def __radd__(self, other):
        return self._combine(other, lambda u, v: u + v, "+", swap=True)

    def __sub__(self, other):
        return self._combine(other, lambda u, v: u - v, "-")

    def __rsub__(self, other):
        return self._combine(other, lambda u, v: u - v, "-", swap=True)

    def __mul__(self, other):
        return self._combine(other, lambda u, v: u * v, "*")

    def __rmul__(self, other):
        return self._combine(other, lambda u, v: u * v, "*", swap=True)

    def __truediv__(self, other):
        return self._combine(other, _divide, "/")

    def __rtruediv__(self, other):
        return self._combine(other, _divide, "/", swap=True)

    def __neg__(self):
        r = self.rule
        return ScalarField(self.n, lambda xs: -r(xs), self.domain, f"-{self.label}",
                           self.accepts_floats)

    def apply(self, fn: Callable, label: str = "") -> "ScalarField":
        """Compose with a univariate jet function such as :func:`extenso.jets.log`."""
        r = self.rule
        return ScalarField(self.n, lambda xs: fn(r(xs)), self.domain,
                           label or f"{getattr(fn, '__name__', 'f')}({self.label})",
                           self.accepts_floats)

    def partial(self, i: int) -> "ScalarField":
        """The field of partial derivatives along coordinate ``i``."""
        if not 0 <= i < self.n:
            raise DimensionError(f"no coordinate {i} in dimension {self.n}")
        parent = self

        def rule(xs):
            order = xs[0].order
            if order + 1 > MAX_ORDER:
                raise ValueError(f"partial derivative field needs jet order {order + 1} > {MAX_ORDER}")
            point = [x.value for x in xs]
            d = parent.evaluate(seed(point, order + 1)).derivative(i)
            return d.compose(xs)

        return ScalarField(self.n, rule, self.domain, f"d{i + 1}({self.label})")

    def compose(self, F: "SmoothMap") -> "ScalarField":
        """``self o F`` as a field on the source of ``F``."""
        if F.n != self.n:
            raise DimensionError(f"map lands in R^{F.n}, field lives on R^{self.n}")
        return ScalarField(F.m, lambda xs: self.evaluate(F.evaluate(xs)), F.domain,
                           f"{self.label}oF")

    def __repr__(self) -> str:
        return f"ScalarField(n={self.n}, {self.label or '<native>'})"


def _divide(u, v):
    if float(v) == 0.0:
        raise DomainError("division by zero")
    return u / v


def jet_of(f: ScalarField, p, order: int = 0) -> Jet:
    """Value and derivatives of ``f`` at ``p`` up to ``order``."""
    p = np.asarray(p, dtype=float)
    f.check_domain(p)
    return f.evaluate(seed(p, order))


def hessian(f: ScalarField, p) -> np.ndarray:
    return jet_of(f, p, 2).hess


def gradient(f: ScalarField, p) -> np.ndarray:
    return jet_of(f, p, 1).grad


class SmoothMap:
    """Map R^m -> R^n given by ``n`` scalar fields of ``m`` variables."""

    __slots__ = ("m", "n", "components", "domain")

    def __init__(self, components: Sequence[ScalarField], domain: Box | None = None):
        comps = tuple(components)
        if not comps:
            raise DimensionError("a smooth map needs at least one component")
        m = comps[0].n
        if any(c.n != m for c in comps):
            raise DimensionError("components of a smooth map must share their source dimension")
        self.m = m
        self.n = len(comps)
        self.components = comps
        dom = domain
        for c in comps:
            dom = _meet(dom, c.domain)
        self.domain = dom

    @classmethod
    def from_expressions(cls, sources: Sequence[str], variables: Sequence[str],
                         constants: Mapping[str, float] | None = None,
                         domain: Box | None = None) -> "SmoothMap":
        return cls([ScalarField.from_expression(s, variables, constants) for s in sources], domain)

    @classmethod
    def linear(cls, A, domain: Box | None = None) -> "SmoothMap":
        A = np.array(A, dtype=float)
        rows = [tuple(row) for row in A]

        def comp(row):
            return ScalarField(A.shape[1], lambda xs: sum(c * x for c, x in zip(row, xs) if c != 0.0))

        return cls([comp(r) for r in rows], domain)

    @classmethod
    def identity(cls, n: int, domain: Box | None = None) -> "SmoothMap":
        return cls([ScalarField.coordinate(n, i) for i in range(n)], domain)

    def evaluate(self, xs: Sequence[Jet]) -> list[Jet]:
        return [c.evaluate(xs) for c in self.components]

    def check_domain(self, p) -> None:
        if len(p) != self.m:
            raise DimensionError(f"point of dimension {len(p)} for map from R^{self.m}")
        if self.domain is not None and not self.domain.contains(p):
            raise DomainError(f"point {tuple(float(x) for x in p)} outside map domain")

    def jets(self, p, order: int) -> list[Jet]:
        p = np.asarray(p, dtype=float)
        self.check_domain(p)
        return self.evaluate(seed(p, order))

    def __call__(self, p) -> np.ndarray:
        return np.array([j.value for j in self.jets(p, 0)])

    def jacobian(self, p) -> np.ndarray:
        return np.array([j.grad for j in self.jets(p, 1)])

    def compose(self, G: "SmoothMap") -> "SmoothMap":
        """``self o G``."""
        if G.n != self.m:
            raise DimensionError(f"cannot compose R^{self.m} map after a map into R^{G.n}")
        return SmoothMap([c.compose(G) for c in self.components], G.domain)


def jacobian(F: SmoothMap, p) -> np.ndarray:
    """Matrix of first partials; row ``i`` is the gradient of component ``i``."""
    return F.jacobian(p)
