"""Flows of vector fields, scaling of states and straightening charts.

The integrator is the Dormand-Prince 5(4) pair with PI step-size control.
When requested, the variational equation ``M' = DX(x) M`` is integrated with
the trajectory so the derivative of the flow map comes out of the same
solve.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .diffcalc import Box, ScalarField
from .errors import (DomainError, FlowDomainExit, NewtonDivergence, SingularPointError,
                     StepSizeUnderflow)
from .exterior import VectorField
from .jets import Jet

DEFAULT_TOL = 1e-10

# Dormand-Prince tableau
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_B5 = np.array(_A[6] + [0.0])
_B4 = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40])
_E = _B5 - _B4

_SAFETY = 0.9
_ALPHA = 0.7 / 5
_BETA = 0.4 / 5
_FAC_MIN, _FAC_MAX = 0.2, 5.0
_MAX_STEPS = 200_000


@dataclass(frozen=True)
class FlowResult:
    """Endpoint of a flow and the derivative of the flow map at the start point.

    ``est_error`` is the largest weighted local error estimate over accepted
    steps, expressed in units of the absolute tolerance, so it never exceeds
    ``tol`` on success.
    """

    endpoint: np.ndarray
    fundamental_matrix: np.ndarray | None
    steps: int
    est_error: float


class _OutOfDomain(Exception):
    pass


def _rhs_factory(X: VectorField, variational: bool) -> Callable[[np.ndarray], np.ndarray]:
    n = X.n

    def rhs(state):
        x = state[:n]
        if X.domain is not None and not X.domain.contains(x):
            raise _OutOfDomain
        try:
            if not variational:
                return X.at(x)
            v, J = X.value_and_jacobian(x)
        except DomainError as exc:
            raise _OutOfDomain from exc
        M = state[n:].reshape(n, n)
        return np.concatenate([v, (J @ M).ravel()])

    return rhs


def integrate(rhs: Callable[[np.ndarray], np.ndarray], y0: np.ndarray, t: float,
              tol: float = DEFAULT_TOL) -> tuple[np.ndarray, int, float]:
    """Integrate ``y' = rhs(y)`` from time 0 to ``t`` (either sign).

    Returns the final state, the number of accepted steps and the largest
    accepted local error estimate (absolute units).
    """
    if tol <= 0:
        raise ValueError("tolerance must be positive")
    y = np.array(y0, dtype=float)
    if t == 0.0:
        return y, 0, 0.0
    direction = 1.0 if t > 0 else -1.0
    span = abs(t)
    try:
        k1 = rhs(y)
    except _OutOfDomain:
        raise FlowDomainExit("start point outside the field domain", 0.0) from None

    # starting step from the local time scale of the solution
    d0 = np.max(np.abs(y))
    d1 = np.max(np.abs(k1))
    h = 0.01 * max(d0, 1e-5) / d1 if d1 > 1e-12 else 0.1
    h = min(h, span, 0.1 * max(span, 1.0))

    done = 0.0
    steps = 0
    worst = 0.0
    err_prev = 1e-4
    hit_boundary = False
    while span - done > 4 * np.finfo(float).eps * span:
        if steps > _MAX_STEPS:
            raise StepSizeUnderflow(direction * done, h)
        h = min(h, span - done)
        if h < 1e-14 * max(1.0, done):
            if hit_boundary:
                raise FlowDomainExit("trajectory leaves the field domain", direction * done)
            raise StepSizeUnderflow(direction * done, h)
        hs = direction * h
        ks = [k1]
        try:
            for s in range(1, 7):
                ys = y + hs * sum(a * k for a, k in zip(_A[s], ks) if a != 0.0)
                ks.append(rhs(ys))
        except _OutOfDomain:
            hit_boundary = True
            h *= 0.5
            continue
        y_new = y + hs * sum(b * k for b, k in zip(_B5, ks) if b != 0.0)
        err_vec = hs * sum(e * k for e, k in zip(_E, ks))
        scale = tol + tol * np.maximum(np.abs(y), np.abs(y_new))
        err = float(np.max(np.abs(err_vec) / scale))
        if not np.isfinite(err):
            h *= 0.2
            continue
        if err <= 1.0:
            done += h
            y = y_new
            k1 = ks[6]
            steps += 1
            worst = max(worst, err)
            hit_boundary = False
            fac = _SAFETY * max(err, 1e-10) ** -_ALPHA * err_prev ** _BETA
            err_prev = max(err, 1e-4)
            h *= min(_FAC_MAX, max(_FAC_MIN, fac))
        else:
            fac = _SAFETY * err ** -_ALPHA
            h *= min(1.0, max(_FAC_MIN, fac))
    return y, steps, worst * tol


def flow(X: VectorField, p, t: float, tol: float = DEFAULT_TOL,
         variational: bool = True) -> FlowResult:
    """Follow the integral curve of ``X`` from ``p`` for time ``t``."""
    p = np.asarray(p, dtype=float)
    X.check_domain(p)
    n = X.n
    if t == 0.0:
        return FlowResult(p.copy(), np.eye(n) if variational else None, 0, 0.0)
    y0 = np.concatenate([p, np.eye(n).ravel()]) if variational else p
    y, steps, err = integrate(_rhs_factory(X, variational), y0, float(t), tol)
    M = y[n:].reshape(n, n) if variational else None
    return FlowResult(y[:n], M, steps, err)


def scale_state(rho: VectorField, p, lam: float, tol: float = DEFAULT_TOL) -> np.ndarray:
    """The point ``lam * p`` defined as the flow of ``rho`` for time ``ln(lam)``.

    Fields flagged ``is_radial`` use their exact flow ``p -> lam * p``.
    """
    if not lam > 0:
        raise ValueError(f"scale factor must be positive, got {lam!r}")
    p = np.asarray(p, dtype=float)
    rho.check_domain(p)
    if lam == 1.0:
        return p.copy()
    if rho.is_radial:
        q = lam * p
        if rho.domain is not None and not rho.domain.contains(q):
            raise FlowDomainExit("scaled state leaves the field domain", _radial_exit_time(rho.domain, p, lam))
        return q
    return flow(rho, p, math.log(lam), tol, variational=False).endpoint


def _radial_exit_time(box: Box, p: np.ndarray, lam: float) -> float:
    times = []
    for lo, x, hi in zip(box.lower, p, box.upper):
        bound = hi if (x > 0) == (lam > 1) else lo
        if x != 0.0 and np.isfinite(bound) and bound / x > 0:
            times.append(math.log(bound / x))
    times = [s for s in times if (s > 0) == (lam > 1)]
    return min(times, key=abs) if times else math.log(lam)


# -- charts ---------------------------------------------------------------------

@dataclass(frozen=True)
class NumericMap:
    """A map known only numerically: ``value_and_jacobian(p)`` does the work."""

    m: int
    n: int
    value_and_jacobian: Callable[[np.ndarray], tuple[np.ndarray, np.ndarray]]
    label: str = ""

    def __call__(self, p) -> np.ndarray:
        return self.value_and_jacobian(np.asarray(p, dtype=float))[0]

    def jacobian(self, p) -> np.ndarray:
        return self.value_and_jacobian(np.asarray(p, dtype=float))[1]


@dataclass(frozen=True)
class Chart:
    """Coordinates on a neighbourhood: ``forward`` sends points to coordinates."""

    forward: NumericMap
    inverse: NumericMap
    domain: Box
    base_point: np.ndarray = field(default=None, compare=False)

    def roundtrip_error(self, p) -> float:
        p = np.asarray(p, dtype=float)
        return float(np.max(np.abs(self.inverse(self.forward(p)) - p)))


def _slice_basis(v: np.ndarray) -> np.ndarray:
    """Orthonormal basis (as columns) of the hyperplane orthogonal to ``v``."""
    _, _, vt = np.linalg.svd(v[None, :])
    return vt[1:].T


@dataclass
class _FlowBox:
    X: VectorField
    p: np.ndarray
    basis: np.ndarray
    speed: float
    tol: float
    max_time: float = math.inf
    max_offset: float = math.inf

    def inverse(self, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        if abs(y[0]) > self.max_time or np.max(np.abs(y[1:]), initial=0.0) > self.max_offset:
            raise DomainError(f"shooting target {y} out of reach")
        q = self.p + self.basis @ y[1:]
        res = flow(self.X, q, float(y[0]), self.tol)
        x = res.endpoint
        J = np.column_stack([self.X.at(x), res.fundamental_matrix @ self.basis])
        return x, J

    def initial_guess(self, x: np.ndarray) -> np.ndarray:
        v = self.X.at(self.p)
        t0 = float(v @ (x - self.p)) / (self.speed ** 2)
        return np.concatenate([[t0], self.basis.T @ (x - self.p - t0 * v)])

    def forward(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Shoot: find ``y`` with ``inverse(y) = x`` by damped Newton."""
        y = self.initial_guess(x)
        # the pushforward error tracks |inverse(y) - x|, so aim below tol itself
        goal = max(0.1 * self.tol, 1e-14 * (1.0 + np.max(np.abs(x))))
        try:
            xy, J = self.inverse(y)
        except (DomainError, StepSizeUnderflow) as exc:
            raise NewtonDivergence(f"shooting failed at the initial guess: {exc}") from exc
        r = xy - x
        for _ in range(50):
            rn = float(np.max(np.abs(r)))
            if rn < goal:
                return y, np.linalg.inv(J)
            try:
                step = np.linalg.solve(J, -r)
            except np.linalg.LinAlgError as exc:
                raise NewtonDivergence("singular shooting Jacobian") from exc
            lam = 1.0
            while True:
                try:
                    y_try = y + lam * step
                    xy_try, J_try = self.inverse(y_try)
                    r_try = xy_try - x
                    if float(np.max(np.abs(r_try))) < rn:
                        break
                except (DomainError, StepSizeUnderflow):
                    pass
                lam *= 0.5
                if lam < 1e-3:
                    raise NewtonDivergence(f"shooting found no descent (residual {rn:.3g})")
            y, J, r = y_try, J_try, r_try
        raise NewtonDivergence(f"shooting did not converge (residual {np.max(np.abs(r)):.3g})")


def flow_box_chart(X: VectorField, p, radius: float, tol: float = DEFAULT_TOL,
                   probes: int = 0) -> Chart:
    """Chart around ``p`` in which ``X`` becomes the first coordinate field.

    The transversal slice is the hyperplane through ``p`` orthogonal to
    ``X(p)``.  The corners of the box of half-width ``radius`` (plus
    ``probes`` extra random points) are shot once to make sure the chart
    really covers the requested neighbourhood.
    """
    p = np.asarray(p, dtype=float)
    v = X.at(p)
    speed = float(np.linalg.norm(v))
    if speed <= 1e-8 * max(1.0, float(np.linalg.norm(p))):
        raise SingularPointError(f"field vanishes at {tuple(p)} (|X| = {speed:.3g})")
    # points that need far longer than a straight crossing of the box are out of reach
    box = _FlowBox(X, p, _slice_basis(v / speed), speed, tol,
                   max_time=50.0 * (1.0 + 2.0 * radius * math.sqrt(X.n)) / speed,
                   max_offset=50.0 * (1.0 + 2.0 * radius * math.sqrt(X.n)))
    n = X.n
    domain = Box(tuple(p - radius), tuple(p + radius))
    if X.domain is not None:
        domain = domain.intersect(X.domain)

    def fwd(x):
        y, J = box.forward(np.asarray(x, dtype=float))
        return y, J

    def inv(y):
        return box.inverse(np.asarray(y, dtype=float))

    chart = Chart(NumericMap(n, n, fwd, "flow-box"), NumericMap(n, n, inv, "flow-box inverse"),
                  domain, p)
    _probe(chart, probes)
    return chart


def _probe(chart: Chart, extra: int) -> None:
    lo = np.asarray(chart.domain.lower)
    hi = np.asarray(chart.domain.upper)
    pts = []
    n = len(lo)
    shrink = 1.0 - 1e-9
    mid = 0.5 * (lo + hi)
    for corner in range(2 ** n):
        bits = np.array([(corner >> i) & 1 for i in range(n)], dtype=float)
        pts.append(mid + shrink * (lo + bits * (hi - lo) - mid))
    rng = np.random.default_rng(0)
    pts.extend(rng.uniform(lo, hi) for _ in range(extra))
    for q in pts:
        chart.forward(q)


def _exp_chart(y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """``(e^{y1}, y2 e^{y1}, ..., yn e^{y1})`` and its Jacobian."""
    e = math.exp(y[0])
    z = np.concatenate([[e], y[1:] * e])
    J = np.zeros((len(y), len(y)))
    J[:, 0] = z
    for i in range(1, len(y)):
        J[i, i] = e
    return z, J


def _log_chart(z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    if z[0] <= 0:
        raise DomainError("first extensive coordinate must be positive")
    y = np.concatenate([[math.log(z[0])], z[1:] / z[0]])
    J = np.zeros((len(z), len(z)))
    J[0, 0] = 1.0 / z[0]
    for i in range(1, len(z)):
        J[i, 0] = -z[i] / z[0] ** 2
        J[i, i] = 1.0 / z[0]
    return y, J


def extensive_chart_from_field(X: VectorField, p, radius: float, tol: float = DEFAULT_TOL,
                               probes: int = 0) -> Chart:
    """Chart around ``p`` in which ``X`` is the radial field ``x^i d_i``."""
    box = flow_box_chart(X, p, radius, tol, probes)
    n = X.n

    def fwd(x):
        y, Jy = box.forward.value_and_jacobian(np.asarray(x, dtype=float))
        z, Jz = _exp_chart(y)
        return z, Jz @ Jy

    def inv(z):
        y, Jy = _log_chart(np.asarray(z, dtype=float))
        x, Jx = box.inverse.value_and_jacobian(y)
        return x, Jx @ Jy

    return Chart(NumericMap(n, n, fwd, "extensive"), NumericMap(n, n, inv, "extensive inverse"),
                 box.domain, box.base_point)


def chart_coordinate(chart: Chart, i: int) -> ScalarField:
    """The ``i``-th coordinate function of ``chart`` as a field (first derivatives only)."""
    n = chart.forward.m

    def rule(xs):
        if not xs or not isinstance(xs[0], Jet):
            return float(chart.forward(np.array(xs, dtype=float))[i])
        if xs[0].order > 1:
            raise ValueError("chart coordinates carry first derivatives only")
        y, J = chart.forward.value_and_jacobian(np.array([x.value for x in xs]))
        if xs[0].order == 0:
            return Jet(xs[0].n, 0, y[i])
        return Jet(xs[0].n, 1, y[i], sum(J[i, k] * xs[k].grad for k in range(n)))

    return ScalarField(n, rule, chart.domain, f"{chart.forward.label or 'chart'}[{i}]",
                       accepts_floats=True)


def pushforward(chart: Chart, X: VectorField, x) -> tuple[np.ndarray, np.ndarray]:
    """Components of ``X`` at ``x`` in the chart's coordinates, and the coordinates of ``x``."""
    x = np.asarray(x, dtype=float)
    y, J = chart.forward.value_and_jacobian(x)
    return J @ X.at(x), y


def pushforward_residual(chart: Chart, X: VectorField, x, target: str = "radial") -> float:
    """Max-norm distance between the pushed-forward field and ``target``.

    ``target`` is ``"radial"`` (the coordinates themselves) or ``"first"``
    (the first coordinate field).
    """
    v, y = pushforward(chart, X, x)
    if target == "radial":
        want = y
    elif target == "first":
        want = np.zeros_like(y)
        want[0] = 1.0
    else:
        raise ValueError(f"unknown target {target!r}")
    return float(np.max(np.abs(v - want)))


@dataclass(frozen=True)
class SingularityClass:
    """Outcome of the linearisation test at a point."""

    kind: str  # 'regular' | 'radial-compatible' | 'radial-incompatible'
    field_norm: float
    jacobian: np.ndarray | None = None

    def __str__(self) -> str:
        return self.kind


def classify_singularity(X: VectorField, p, tol: float = 1e-9) -> SingularityClass:
    """Necessary-condition test for local radiality at a zero of ``X``.

    A locally radial field has identity linearisation at its zeros, so a
    Jacobian away from the identity rules radiality out.  Passing the test
    is not a proof of radiality.
    """
    v, J = X.value_and_jacobian(np.asarray(p, dtype=float))
    norm = float(np.linalg.norm(v))
    if norm > tol:
        return SingularityClass("regular", norm, J)
    if float(np.linalg.norm(J - np.eye(X.n))) < tol:
        return SingularityClass("radial-compatible", norm, J)
    return SingularityClass("radial-incompatible", norm, J)
