"""Exterior calculus on a single n-dimensional chart.

Forms store one :class:`~extenso.diffcalc.ScalarField` per strictly increasing
multi-index.  Field-level operations (:func:`d`, :func:`interior`,
:func:`lie`, :func:`wedge` on :class:`KForm`) build new lazy forms; the
pointwise operations return a :class:`FormValue`, the numeric coefficients at
one point.

Conventions: ``i_X`` contracts the first slot, and
``d(f dg) = df ^ dg``, i.e. ``(dw)_J = sum_r (-1)^r d_{j_r} w_{J - j_r}``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from math import comb
from typing import Mapping, Sequence

import numpy as np

from .diffcalc import Box, ScalarField, SmoothMap, _meet
from .errors import DimensionError, DomainError
from .jets import Jet, seed

MultiIndex = tuple[int, ...]


def multi_indices(n: int, k: int) -> list[MultiIndex]:
    return list(itertools.combinations(range(n), k))


def sort_sign(seq: Sequence[int]) -> tuple[int, MultiIndex | None]:
    """Sign of the permutation sorting ``seq``; 0 when an index repeats."""
    if len(set(seq)) != len(seq):
        return 0, None
    s = list(seq)
    sign = 1
    for i in range(len(s)):
        for j in range(len(s) - 1 - i):
            if s[j] > s[j + 1]:
                s[j], s[j + 1] = s[j + 1], s[j]
                sign = -sign
    return sign, tuple(s)


# -- combinatorics shared by fields, jets and numbers -------------------------

def _accumulate(out: dict, key, term):
    if key in out:
        out[key] = out[key] + term
    else:
        out[key] = term


def _wedge_terms(a: Mapping, b: Mapping) -> dict:
    out: dict = {}
    for I, u in a.items():
        for J, v in b.items():
            s, K = sort_sign(I + J)
            if s:
                _accumulate(out, K, u * v if s > 0 else -(u * v))
    return out


def _interior_terms(X: Sequence, w: Mapping) -> dict:
    out: dict = {}
    for I, c in w.items():
        for r, j in enumerate(I):
            term = X[j] * c
            _accumulate(out, I[:r] + I[r + 1:], term if r % 2 == 0 else -term)
    return out


def _d_terms(partials: Mapping, n: int) -> dict:
    """``partials[I][j]`` is the j-th partial of coefficient ``I``."""
    out: dict = {}
    for I, parts in partials.items():
        for j in range(n):
            if j in I:
                continue
            s, K = sort_sign((j,) + I)
            term = parts[j]
            _accumulate(out, K, term if s > 0 else -term)
    return out


# -- pointwise values ----------------------------------------------------------

@dataclass(frozen=True)
class FormValue:
    """Coefficients of a k-form at one point, ordered like :func:`multi_indices`."""

    n: int
    k: int
    values: np.ndarray

    @classmethod
    def zero(cls, n: int, k: int) -> "FormValue":
        return cls(n, k, np.zeros(comb(n, k) if 0 <= k <= n else 0))

    @classmethod
    def from_dict(cls, n: int, k: int, coeffs: Mapping) -> "FormValue":
        idx = multi_indices(n, k) if 0 <= k <= n else []
        return cls(n, k, np.array([float(coeffs.get(I, 0.0)) for I in idx]))

    def as_dict(self) -> dict[MultiIndex, float]:
        return dict(zip(multi_indices(self.n, self.k), self.values.tolist()))

    def __getitem__(self, index) -> float:
        index = (index,) if isinstance(index, int) else tuple(index)
        s, I = sort_sign(index)
        if not s:
            return 0.0
        return s * self.as_dict()[I]

    def _check(self, other: "FormValue") -> None:
        if (self.n, self.k) != (other.n, other.k):
            raise DimensionError(f"form values of type {(self.n, self.k)} and {(other.n, other.k)}")

    def __add__(self, other: "FormValue") -> "FormValue":
        self._check(other)
        return FormValue(self.n, self.k, self.values + other.values)

    def __sub__(self, other: "FormValue") -> "FormValue":
        self._check(other)
        return FormValue(self.n, self.k, self.values - other.values)

    def __mul__(self, c: float) -> "FormValue":
        return FormValue(self.n, self.k, float(c) * self.values)

    __rmul__ = __mul__

    def __neg__(self) -> "FormValue":
        return FormValue(self.n, self.k, -self.values)

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.values))) if self.values.size else 0.0

    def allclose(self, other: "FormValue", atol: float = 1e-12) -> bool:
        self._check(other)
        return bool(np.allclose(self.values, other.values, rtol=0.0, atol=atol))


# -- fields --------------------------------------------------------------------

class VectorField:
    """Vector field on a chart; ``is_radial`` marks the Euler field x^i d_i."""

    __slots__ = ("n", "components", "is_radial", "domain", "label")

    def __init__(self, components: Sequence[ScalarField], is_radial: bool = False,
                 domain: Box | None = None, label: str = ""):
        comps = tuple(components)
        n = len(comps)
        if any(c.n != n for c in comps):
            raise DimensionError(f"vector field needs {n} components of {n} variables")
        self.n = n
        self.components = comps
        self.is_radial = is_radial
        dom = domain
        for c in comps:
            dom = _meet(dom, c.domain)
        self.domain = dom
        self.label = label

    @classmethod
    def radial(cls, n: int, domain: Box | None = None) -> "VectorField":
        return cls([ScalarField.coordinate(n, i) for i in range(n)], True, domain, "radial")

    @classmethod
    def from_expressions(cls, sources: Sequence[str], variables: Sequence[str],
                         constants: Mapping[str, float] | None = None,
                         domain: Box | None = None, label: str = "") -> "VectorField":
        return cls([ScalarField.from_expression(s, variables, constants) for s in sources],
                   domain=domain, label=label)

    @classmethod
    def constant(cls, vector: Sequence[float], domain: Box | None = None) -> "VectorField":
        n = len(vector)
        return cls([ScalarField.constant(n, v) for v in vector], domain=domain)

    def check_domain(self, p) -> None:
        if len(p) != self.n:
            raise DimensionError(f"point of dimension {len(p)} for field on R^{self.n}")
        if self.domain is not None and not self.domain.contains(p):
            raise DomainError(f"point {tuple(float(x) for x in p)} outside field domain")

    def jets(self, p, order: int) -> list[Jet]:
        p = np.asarray(p, dtype=float)
        self.check_domain(p)
        xs = seed(p, order)
        return [c.evaluate(xs) for c in self.components]

    def at(self, p) -> np.ndarray:
        return np.array([j.value for j in self.jets(p, 0)])

    def jacobian(self, p) -> np.ndarray:
        return np.array([j.grad for j in self.jets(p, 1)])

    def value_and_jacobian(self, p) -> tuple[np.ndarray, np.ndarray]:
        js = self.jets(p, 1)
        return np.array([j.value for j in js]), np.array([j.grad for j in js])

    def as_map(self) -> SmoothMap:
        return SmoothMap(self.components, self.domain)

    def __neg__(self) -> "VectorField":
        return VectorField([-c for c in self.components], domain=self.domain)

    def __repr__(self) -> str:
        return f"VectorField(n={self.n}, {self.label or 'custom'})"


class KForm:
    """Differential k-form with coefficient fields on increasing multi-indices."""

    __slots__ = ("n", "k", "coeffs", "domain")

    def __init__(self, n: int, k: int, coeffs: Mapping[Sequence[int], ScalarField] | None = None,
                 domain: Box | None = None):
        if not 0 <= k <= n:
            raise DimensionError(f"degree {k} impossible on a chart of dimension {n}")
        clean: dict[MultiIndex, ScalarField] = {}
        for idx, f in (coeffs or {}).items():
            idx = tuple(idx)
            if len(idx) != k or any(not 0 <= i < n for i in idx):
                raise DimensionError(f"bad multi-index {idx} for a {k}-form on R^{n}")
            if list(idx) != sorted(set(idx)):
                raise DimensionError(f"multi-index {idx} is not strictly increasing")
            if not isinstance(f, ScalarField):
                f = ScalarField.constant(n, float(f))
            if f.n != n:
                raise DimensionError("coefficient field lives on a different chart")
            clean[idx] = f
        self.n = n
        self.k = k
        self.coeffs = clean
        dom = domain
        for f in clean.values():
            dom = _meet(dom, f.domain)
        self.domain = dom

    @classmethod
    def zero(cls, n: int, k: int) -> "KForm":
        return cls(n, k, {})

    @classmethod
    def function(cls, f: ScalarField) -> "KForm":
        return cls(f.n, 0, {(): f})

    @classmethod
    def basis(cls, n: int, index: Sequence[int]) -> "KForm":
        """``dx^{i1} ^ ... ^ dx^{ik}`` (0-based indices, any order)."""
        s, I = sort_sign(tuple(index))
        if not s:
            return cls.zero(n, len(index))
        return cls(n, len(I), {I: ScalarField.constant(n, float(s))})

    @classmethod
    def one_form(cls, components: Sequence[ScalarField | float], domain: Box | None = None) -> "KForm":
        n = len(components)
        return cls(n, 1, {(i,): c for i, c in enumerate(components)}, domain)

    @classmethod
    def from_expressions(cls, n: int, k: int, sources: Mapping[Sequence[int], str],
                         variables: Sequence[str], constants: Mapping[str, float] | None = None,
                         domain: Box | None = None) -> "KForm":
        return cls(n, k, {tuple(I): ScalarField.from_expression(s, variables, constants)
                          for I, s in sources.items()}, domain)

    def coefficient(self, index: Sequence[int]) -> ScalarField:
        idx = tuple(index)
        if idx in self.coeffs:
            return self.coeffs[idx]
        return ScalarField.constant(self.n, 0.0)

    def check_domain(self, p) -> None:
        if len(p) != self.n:
            raise DimensionError(f"point of dimension {len(p)} for form on R^{self.n}")
        if self.domain is not None and not self.domain.contains(p):
            raise DomainError(f"point {tuple(float(x) for x in p)} outside form domain")

    def jets(self, p, order: int) -> dict[MultiIndex, Jet]:
        p = np.asarray(p, dtype=float)
        self.check_domain(p)
        xs = seed(p, order)
        return {I: f.evaluate(xs) for I, f in self.coeffs.items()}

    def at(self, p) -> FormValue:
        return FormValue.from_dict(self.n, self.k, {I: j.value for I, j in self.jets(p, 0).items()})

    def _check(self, other: "KForm") -> None:
        if (self.n, self.k) != (other.n, other.k):
            raise DimensionError(f"forms of type {(self.n, self.k)} and {(other.n, other.k)}")

    def __add__(self, other: "KForm") -> "KForm":
        self._check(other)
        out = dict(self.coeffs)
        for I, f in other.coeffs.items():
            out[I] = out[I] + f if I in out else f
        return KForm(self.n, self.k, out)

    def __sub__(self, other: "KForm") -> "KForm":
        return self + (-other)

    def __neg__(self) -> "KForm":
        return KForm(self.n, self.k, {I: -f for I, f in self.coeffs.items()})

    def __mul__(self, f) -> "KForm":
        """Multiply by a function (a ScalarField) or a number."""
        return KForm(self.n, self.k, {I: c * f for I, c in self.coeffs.items()})

    __rmul__ = __mul__

    def __truediv__(self, f) -> "KForm":
        return KForm(self.n, self.k, {I: c / f for I, c in self.coeffs.items()})

    def __repr__(self) -> str:
        return f"KForm(n={self.n}, k={self.k}, terms={sorted(self.coeffs)})"


class SymTensor2Field:
    """Symmetric covariant 2-tensor field; only the upper triangle is stored."""

    __slots__ = ("n", "entries")

    def __init__(self, n: int, entries: Mapping[tuple[int, int], ScalarField]):
        clean = {}
        for (i, j), f in entries.items():
            a, b = min(i, j), max(i, j)
            if (a, b) in clean and clean[(a, b)] is not f:
                raise ValueError(f"entry ({a},{b}) given twice")
            clean[(a, b)] = f
        self.n = n
        self.entries = clean

    @classmethod
    def from_matrix(cls, rows: Sequence[Sequence[ScalarField]]) -> "SymTensor2Field":
        n = len(rows)
        return cls(n, {(i, j): rows[i][j] for i in range(n) for j in range(i, n)})

    @classmethod
    def identity(cls, n: int) -> "SymTensor2Field":
        return cls(n, {(i, i): ScalarField.constant(n, 1.0) for i in range(n)})

    @classmethod
    def hessian_of(cls, potential: ScalarField) -> "SymTensor2Field":
        n = potential.n
        firsts = [potential.partial(i) for i in range(n)]
        return cls(n, {(i, j): firsts[i].partial(j) for i in range(n) for j in range(i, n)})

    def entry(self, i: int, j: int) -> ScalarField:
        key = (min(i, j), max(i, j))
        return self.entries.get(key) or ScalarField.constant(self.n, 0.0)

    def scaled(self, factor: ScalarField | float) -> "SymTensor2Field":
        return SymTensor2Field(self.n, {ij: f * factor for ij, f in self.entries.items()})

    def jets(self, p, order: int) -> list[list[Jet]]:
        xs = seed(np.asarray(p, dtype=float), order)
        zero = Jet(self.n, order, 0.0)
        cache = {ij: f.evaluate(xs) for ij, f in self.entries.items()}
        return [[cache.get((min(i, j), max(i, j)), zero) for j in range(self.n)]
                for i in range(self.n)]

    def at(self, p) -> np.ndarray:
        return np.array([[j.value for j in row] for row in self.jets(p, 0)])


# -- field-level operators -------------------------------------------------------

def _check_same_chart(a, b) -> None:
    if a.n != b.n:
        raise DimensionError(f"objects live on charts of dimension {a.n} and {b.n}")


def wedge(omega, eta):
    """Exterior product of two :class:`KForm` or two :class:`FormValue`."""
    _check_same_chart(omega, eta)
    if omega.k + eta.k > omega.n:
        if isinstance(omega, KForm):
            raise DimensionError(f"degree {omega.k + eta.k} exceeds dimension {omega.n}")
        return FormValue.zero(omega.n, omega.k + eta.k)
    if isinstance(omega, FormValue) and isinstance(eta, FormValue):
        terms = _wedge_terms(omega.as_dict(), eta.as_dict())
        return FormValue.from_dict(omega.n, omega.k + eta.k, terms)
    if isinstance(omega, KForm) and isinstance(eta, KForm):
        return KForm(omega.n, omega.k + eta.k, _wedge_terms(omega.coeffs, eta.coeffs))
    raise TypeError("wedge needs two KForms or two FormValues")


def d(omega: KForm) -> KForm:
    """Exterior derivative as a lazy form (coefficients are partial-derivative fields)."""
    if omega.k == omega.n:
        raise DimensionError(f"d of a top-degree form on R^{omega.n} has no representation")
    partials = {I: [f.partial(j) for j in range(omega.n)] for I, f in omega.coeffs.items()}
    return KForm(omega.n, omega.k + 1, _d_terms(partials, omega.n))


def interior(X: VectorField, omega: KForm) -> KForm:
    _check_same_chart(X, omega)
    if omega.k == 0:
        raise DimensionError("interior product of a 0-form is undefined")
    return KForm(omega.n, omega.k - 1, _interior_terms(X.components, omega.coeffs))


def lie(X: VectorField, omega: KForm) -> KForm:
    """Lie derivative as a lazy form, by Cartan's identity."""
    _check_same_chart(X, omega)
    if omega.k == 0:
        f = omega.coefficient(())
        return KForm.function(sum((X.components[j] * f.partial(j) for j in range(omega.n)),
                                  ScalarField.constant(omega.n, 0.0)))
    out = d(interior(X, omega))
    if omega.k < omega.n:
        out = out + interior(X, d(omega))
    return out


# -- pointwise operators ---------------------------------------------------------

def exterior_derivative(omega: KForm, p) -> FormValue:
    """Coefficients of ``d omega`` at ``p``.

    Top-degree forms have identically zero derivative; the empty value of
    degree ``n + 1`` is returned for them.
    """
    if omega.k == omega.n:
        omega.check_domain(np.asarray(p, dtype=float))
        return FormValue.zero(omega.n, omega.k + 1)
    js = omega.jets(p, 1)
    return FormValue.from_dict(omega.n, omega.k + 1,
                               _d_terms({I: j.grad for I, j in js.items()}, omega.n))


def interior_product(X: VectorField, omega: KForm, p) -> FormValue:
    _check_same_chart(X, omega)
    if omega.k == 0:
        raise DimensionError("interior product of a 0-form is undefined")
    Xv = X.at(p)
    w = {I: j.value for I, j in omega.jets(p, 0).items()}
    return FormValue.from_dict(omega.n, omega.k - 1, _interior_terms(Xv, w))


def lie_derivative_form(X: VectorField, omega: KForm, p) -> FormValue:
    """``L_X omega`` at ``p`` via ``i_X d omega + d(i_X omega)``; ``df(X)`` for k = 0."""
    _check_same_chart(X, omega)
    n, k = omega.n, omega.k
    Xj = X.jets(p, 1)
    wj = omega.jets(p, 1)
    if k == 0:
        f = wj.get(())
        if f is None:
            return FormValue.zero(n, 0)
        return FormValue(n, 0, np.array([sum(Xj[j].value * f.grad[j] for j in range(n))]))
    contracted = _interior_terms(Xj, wj)  # jets of the coefficients of i_X omega
    out = _d_terms({I: j.grad for I, j in contracted.items()}, n) if k >= 1 else {}
    if k < n:
        dw = _d_terms({I: j.grad for I, j in wj.items()}, n)
        for I, v in _interior_terms([x.value for x in Xj], dw).items():
            _accumulate(out, I, v)
    return FormValue.from_dict(n, k, out)


def lie_derivative_sym2(X: VectorField, g: SymTensor2Field, p) -> np.ndarray:
    """``(L_X g)_ij = X(g_ij) + g_kj d_i X^k + g_ik d_j X^k`` at ``p``."""
    _check_same_chart(X, g)
    Xv, DX = X.value_and_jacobian(p)  # DX[k, i] = d_i X^k
    gj = g.jets(p, 1)
    G = np.array([[e.value for e in row] for row in gj])
    dG = np.array([[e.grad for e in row] for row in gj])  # dG[i, j, l] = d_l g_ij
    return dG @ Xv + DX.T @ G + G @ DX


def pullback_value(jac: np.ndarray, value: FormValue) -> FormValue:
    """Pull a form value at ``F(p)`` back through the Jacobian of ``F`` at ``p``."""
    n_target, m = jac.shape
    if value.n != n_target:
        raise DimensionError("form value does not live on the target of the map")
    k = value.k
    if k == 0:
        return FormValue(m, 0, value.values.copy())
    src = multi_indices(m, k)
    out = np.zeros(len(src))
    for J, c in value.as_dict().items():
        if c == 0.0:
            continue
        rows = jac[list(J)]
        for a, I in enumerate(src):
            out[a] += c * np.linalg.det(rows[:, list(I)])
    return FormValue(m, k, out)


def pullback(F: SmoothMap, omega: KForm, p) -> FormValue:
    """``(F^* omega)`` at ``p`` on the source chart of ``F``."""
    if F.n != omega.n:
        raise DimensionError(f"map lands in R^{F.n} but form lives on R^{omega.n}")
    p = np.asarray(p, dtype=float)
    Fjets = F.jets(p, 1)
    q = np.array([j.value for j in Fjets])
    value = omega.at(q)
    return pullback_value(np.array([j.grad for j in Fjets]), value)


def _det_fields(M: list[list[ScalarField]]) -> ScalarField:
    k = len(M)
    if k == 1:
        return M[0][0]
    total = None
    for c in range(k):
        minor = [row[:c] + row[c + 1:] for row in M[1:]]
        term = M[0][c] * _det_fields(minor)
        if total is None:
            total = term
        else:
            total = total + term if c % 2 == 0 else total - term
    return total


def pullback_form(F: SmoothMap, omega: KForm) -> KForm:
    """``F^* omega`` as a lazy form on the source chart (supports repeated pullback)."""
    if F.n != omega.n:
        raise DimensionError(f"map lands in R^{F.n} but form lives on R^{omega.n}")
    if omega.k == 0:
        return KForm.function(omega.coefficient(()).compose(F))
    D = [[c.partial(i) for i in range(F.m)] for c in F.components]
    out: dict = {}
    for J, f in omega.coeffs.items():
        fF = f.compose(F)
        for I in multi_indices(F.m, omega.k):
            minor = [[D[r][c] for c in I] for r in J]
            _accumulate(out, I, fF * _det_fields(minor))
    return KForm(F.m, omega.k, out, F.domain)
