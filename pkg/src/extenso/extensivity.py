"""Sample-based checks of extensivity, integrability and transversality.

Every check evaluates a pointwise residual over a deterministic set of
sample points and folds the results into a :class:`CheckReport`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy import integrate

from .diffcalc import Box, ScalarField, SmoothMap, jet_of
from .errors import (ClosednessViolation, DimensionError, DomainError, EmptyOverlapError,
                     ExtensoError, NewtonDivergence, NonConstantRatio, NotExtensiveError,
                     VanishingTransversality)
from .exterior import (FormValue, KForm, VectorField, exterior_derivative, interior_product,
                       lie_derivative_form, pullback_value, wedge)
from .flows import DEFAULT_TOL, Chart, NumericMap, flow, scale_state

SCALING_FACTORS = (0.5, 0.9, 1.1, 2.0)
MAX_WITNESSES = 5


# -- reports --------------------------------------------------------------------

@dataclass(frozen=True)
class CheckReport:
    """Outcome of one check over a sample set.

    ``witnesses`` holds the worst ``(point, residual)`` pairs, largest first.
    ``parts`` carries the maxima of the residual families a check combines.
    """

    name: str
    samples: int
    max_residual: float
    tol: float
    witnesses: tuple[tuple[tuple[float, ...], float], ...] = ()
    skipped: int = 0
    detail: str = ""
    parts: tuple[tuple[str, float], ...] = ()

    @property
    def passed(self) -> bool:
        return self.samples > 0 and self.max_residual <= self.tol

    @property
    def verdict(self) -> str:
        return "pass" if self.passed else "fail"

    def to_text(self) -> str:
        head = (f"[{self.verdict.upper()}] {self.name}: max_residual={self.max_residual:.3e} "
                f"tol={self.tol:.1e} samples={self.samples}")
        if self.skipped:
            head += f" skipped={self.skipped}"
        lines = [head]
        for key, val in self.parts:
            lines.append(f"    {key}: {val:.3e}")
        if self.detail:
            lines.append(f"    {self.detail}")
        if not self.passed:
            for pt, r in self.witnesses:
                coords = ", ".join(f"{x:.6g}" for x in pt)
                lines.append(f"    witness ({coords}) residual={r:.3e}")
        return "\n".join(lines)

    def to_record(self) -> str:
        fields = [f"check={self.name}", f"verdict={self.verdict}", f"samples={self.samples}",
                  f"skipped={self.skipped}", f"max_residual={self.max_residual:.17g}",
                  f"tol={self.tol:.17g}"]
        fields += [f"{k}={v:.17g}" for k, v in self.parts]
        for i, (pt, r) in enumerate(self.witnesses):
            fields.append(f"witness{i}={';'.join(repr(float(x)) for x in pt)}@{r:.17g}")
        if self.detail:
            fields.append("detail=" + self.detail.replace(" ", "_"))
        return " ".join(fields)

    def renamed(self, name: str) -> "CheckReport":
        return CheckReport(name, self.samples, self.max_residual, self.tol, self.witnesses,
                           self.skipped, self.detail, self.parts)


def failed_report(name: str, tol: float, error: Exception) -> CheckReport:
    """Render an exception raised inside a check as a failed report."""
    return CheckReport(name, 0, math.inf, tol, detail=f"{type(error).__name__}: {error}")


class _Collector:
    def __init__(self):
        self.rows: list[tuple[tuple[float, ...], float]] = []
        self.skipped = 0
        self.errors: list[str] = []

    def add(self, p, r: float) -> None:
        r = float(r)
        self.rows.append((tuple(float(x) for x in p), r if np.isfinite(r) else math.inf))

    def skip(self, exc: Exception) -> None:
        self.skipped += 1
        if len(self.errors) < 3:
            self.errors.append(str(exc))

    def report(self, name: str, tol: float, detail: str = "", parts=(), samples: int | None = None):
        rows = sorted(self.rows, key=lambda pr: pr[1], reverse=True)
        worst = rows[0][1] if rows else math.inf
        count = len({pt for pt, _ in rows}) if samples is None else samples
        if not rows and self.errors:
            detail = (detail + "; " if detail else "") + "all samples skipped: " + self.errors[0]
        return CheckReport(name, count, worst, tol, tuple(rows[:MAX_WITNESSES]), self.skipped,
                           detail, tuple(parts))


# -- sampling -------------------------------------------------------------------

@dataclass(frozen=True)
class SampleSpec:
    """Deterministic sample points strictly inside ``box``.

    Explicit ``points`` are used verbatim.  ``constraint`` is a predicate used
    for rejection sampling (for example the van der Waals admissibility
    conditions).
    """

    box: Box
    count: int = 50
    seed: int = 0
    points: tuple[tuple[float, ...], ...] | None = None
    constraint: Callable[[np.ndarray], bool] | None = field(default=None, compare=False)

    def generate(self) -> list[np.ndarray]:
        if self.points is not None:
            return [np.asarray(p, dtype=float) for p in self.points]
        if not self.box.is_bounded():
            raise ValueError("random sampling needs a bounded box")
        lo = np.asarray(self.box.lower)
        hi = np.asarray(self.box.upper)
        rng = np.random.default_rng(self.seed)
        out: list[np.ndarray] = []
        attempts = 0
        while len(out) < self.count:
            attempts += 1
            if attempts > 1000 * max(self.count, 1):
                raise ValueError("sampling constraint rejects almost every point of the box")
            p = rng.uniform(lo, hi)
            if not self.box.contains(p):
                continue
            if self.constraint is not None and not self.constraint(p):
                continue
            out.append(p)
        return out

    def with_seed(self, seed: int) -> "SampleSpec":
        return SampleSpec(self.box, self.count, seed, self.points, self.constraint)


# -- extensive functions ---------------------------------------------------------

def euler_residual(f: ScalarField, rho: VectorField, p) -> float:
    """``df_p(rho_p) - f(p)``."""
    j = jet_of(f, p, 1)
    return float(j.grad @ rho.at(p) - j.value)


def check_extensive_function(f: ScalarField, rho: VectorField, s: SampleSpec, tol: float,
                             name: str = "extensive_function", scaling_tol: float | None = None,
                             factors: Sequence[float] = SCALING_FACTORS) -> CheckReport:
    """Euler residual and scaling oracle ``f(lam p) - lam f(p)`` in one report.

    When ``scaling_tol`` differs from ``tol`` the scaling residuals are
    rescaled by ``tol / scaling_tol`` before being merged, so the verdict
    applies each tolerance to its own family.
    """
    scaling_tol = tol if scaling_tol is None else scaling_tol
    weight = tol / scaling_tol
    col = _Collector()
    euler_max = scaling_max = 0.0
    n_ok = 0
    for p in s.generate():
        try:
            e = abs(euler_residual(f, rho, p))
            fp = f(p)
            sc = 0.0
            for lam in factors:
                sc = max(sc, abs(f(scale_state(rho, p, lam)) - lam * fp))
        except ExtensoError as exc:
            col.skip(exc)
            continue
        n_ok += 1
        euler_max = max(euler_max, e)
        scaling_max = max(scaling_max, sc)
        col.add(p, max(e, weight * sc))
    return col.report(name, tol, parts=(("euler", euler_max), ("scaling", scaling_max)),
                      samples=n_ok)


# -- homogeneous maps -------------------------------------------------------------

def homogeneity_defect_map(F, p, lam: float) -> np.ndarray:
    """``F(lam p) - lam F(p)`` componentwise."""
    p = np.asarray(p, dtype=float)
    return np.asarray(F(lam * p)) - lam * np.asarray(F(p))


def check_homogeneous_diffeo(F, s: SampleSpec, tol: float, name: str = "homogeneous_diffeo",
                             factors: Sequence[float] = (0.5, 2.0)) -> CheckReport:
    """Pushforward test ``DF(p) p = F(p)`` and scaling test, both required.

    ``F`` may be a :class:`SmoothMap` or any object with ``__call__`` and
    ``jacobian``.
    """
    col = _Collector()
    push_max = scale_max = 0.0
    n_ok = 0
    for p in s.generate():
        try:
            push = float(np.max(np.abs(F.jacobian(p) @ p - F(p))))
            sc = max(float(np.max(np.abs(homogeneity_defect_map(F, p, lam)))) for lam in factors)
        except ExtensoError as exc:
            col.skip(exc)
            continue
        n_ok += 1
        push_max = max(push_max, push)
        scale_max = max(scale_max, sc)
        col.add(p, max(push, sc))
    return col.report(name, tol, parts=(("pushforward", push_max), ("scaling", scale_max)),
                      samples=n_ok)


def chart_from_maps(forward: SmoothMap, inverse: SmoothMap, domain: Box | None = None) -> Chart:
    """Wrap a pair of explicit maps as a :class:`Chart`."""
    def vj(F):
        def run(p):
            js = F.jets(p, 1)
            return np.array([j.value for j in js]), np.array([j.grad for j in js])
        return run
    dom = domain or forward.domain
    if dom is None:
        raise ValueError("chart needs a domain box")
    return Chart(NumericMap(forward.m, forward.n, vj(forward)),
                 NumericMap(inverse.m, inverse.n, vj(inverse)), dom)


def transition_map(A: Chart, B: Chart) -> NumericMap:
    """``B.forward o A.inverse`` with its Jacobian."""
    def run(q):
        x, Jx = A.inverse.value_and_jacobian(np.asarray(q, dtype=float))
        if not B.domain.contains(x) or not A.domain.contains(x):
            raise DomainError(f"point {tuple(x)} outside the chart overlap")
        y, Jy = B.forward.value_and_jacobian(x)
        return y, Jy @ Jx
    return NumericMap(A.inverse.m, B.forward.n, run, "transition")


def check_transition_compatibility(A: Chart, B: Chart, s: SampleSpec, tol: float,
                                   name: str = "transition_compatibility") -> CheckReport:
    """Whether the transition between two charts is degree-1 homogeneous.

    Sample points are drawn in the manifold, inside both the overlap and the
    sample box, and mapped into A's coordinates.  Pick a sample box whose
    scalings by 0.5 and 2 stay in the overlap, otherwise samples are skipped.
    """
    try:
        overlap = A.domain.intersect(B.domain)
    except ValueError as exc:
        raise EmptyOverlapError("charts do not overlap") from exc
    try:
        region = overlap.intersect(s.box)
    except ValueError as exc:
        raise EmptyOverlapError("sample box misses the chart overlap") from exc
    pts = [p for p in SampleSpec(region, s.count, s.seed, s.points, s.constraint).generate()
           if overlap.contains(p)]
    if not pts:
        raise EmptyOverlapError("no sample point lies in both chart domains")
    coords = tuple(tuple(A.forward(p)) for p in pts)
    psi = transition_map(A, B)
    return check_homogeneous_diffeo(psi, SampleSpec(overlap, len(coords), s.seed, coords), tol, name)


# -- extensive forms --------------------------------------------------------------

def form_extensivity_residual(omega: KForm, rho: VectorField, p) -> FormValue:
    """``L_rho omega - omega`` at ``p``."""
    return lie_derivative_form(rho, omega, p) - omega.at(p)


def check_extensive_form(omega: KForm, rho: VectorField, s: SampleSpec, tol: float,
                         name: str = "extensive_form") -> CheckReport:
    return sweep(name, s, tol, lambda p: form_extensivity_residual(omega, rho, p).max_abs())


def check_scaling_law(omega: KForm, rho: VectorField, p, t: float, tol: float,
                      name: str = "scaling_law", flow_tol: float = DEFAULT_TOL) -> CheckReport:
    """Pull ``omega`` back along the flow of ``rho`` for time ``t``; compare with ``e^t omega``."""
    p = np.asarray(p, dtype=float)
    try:
        res = flow(rho, p, t, flow_tol)
        pulled = pullback_value(res.fundamental_matrix, omega.at(res.endpoint))
        r = (pulled - math.exp(t) * omega.at(p)).max_abs()
    except ExtensoError as exc:
        return failed_report(name, tol, exc)
    col = _Collector()
    col.add(p, r)
    return col.report(name, tol, detail=f"t={t:.6g}")


def integrability_defect(theta: KForm, p) -> FormValue:
    """``theta ^ d theta`` at ``p``; an empty 3-form value when n < 3."""
    if theta.k != 1:
        raise DimensionError("integrability defect is defined for 1-forms")
    if theta.n < 3:
        theta.check_domain(np.asarray(p, dtype=float))
        return FormValue.zero(theta.n, 3)
    return wedge(theta.at(p), exterior_derivative(theta, p))


def check_integrable(theta: KForm, s: SampleSpec, tol: float,
                     name: str = "integrable") -> CheckReport:
    return sweep(name, s, tol, lambda p: integrability_defect(theta, p).max_abs())


def transversality_value(theta: KForm, rho: VectorField, p) -> float:
    """``theta_p(rho_p)``."""
    return float(interior_product(rho, theta, p).values[0])


def check_nonvanishing(fn: Callable[[np.ndarray], float], s: SampleSpec, floor: float,
                       name: str = "nonvanishing") -> CheckReport:
    """Residual is how far ``|fn(p)|`` falls short of ``floor`` (0 when it clears it)."""
    col = _Collector()
    smallest = math.inf
    for p in s.generate():
        try:
            v = abs(fn(p))
        except ExtensoError as exc:
            col.skip(exc)
            continue
        smallest = min(smallest, v)
        col.add(p, max(0.0, floor - v))
    return col.report(name, 0.0, parts=(("min_abs", smallest), ("floor", floor)))


def sweep(name: str, s: SampleSpec, tol: float, residual: Callable[[np.ndarray], float],
          detail: str = "") -> CheckReport:
    """Evaluate ``residual`` at every sample point and report the worst."""
    col = _Collector()
    for p in s.generate():
        try:
            r = residual(p)
        except ExtensoError as exc:
            col.skip(exc)
            continue
        col.add(p, abs(r))
    return col.report(name, tol, detail)


# -- entropy recovery --------------------------------------------------------------

def normalized_heat_form(theta: KForm, rho: VectorField) -> KForm:
    """``theta / theta(rho)``, closed when theta is integrable and extensive."""
    contraction = None
    for (i,), c in theta.coeffs.items():
        term = rho.components[i] * c
        contraction = term if contraction is None else contraction + term
    if contraction is None:
        raise VanishingTransversality((0.0,) * theta.n, 0.0)
    return theta / contraction


@dataclass(frozen=True)
class EntropyRecovery:
    value: float
    log_ratio: float
    nodes: int
    max_closedness: float
    min_transversality: float


def recover_entropy_detailed(theta: KForm, rho: VectorField, base, S0: float, target,
                             tol: float = 1e-9, path: Iterable | None = None,
                             precheck_tol: float = 1e-8) -> EntropyRecovery:
    """Integrate ``theta / theta(rho)`` along a polygon from ``base`` to ``target``.

    ``path`` lists intermediate vertices; by default the straight segment is
    used.  Returns ``S0 * exp(integral)`` together with diagnostics.
    """
    if theta.k != 1:
        raise DimensionError("entropy recovery needs a 1-form")
    if not S0 > 0:
        raise ValueError("reference entropy must be positive")
    base = np.asarray(base, dtype=float)
    target = np.asarray(target, dtype=float)
    vertices = [base] + [np.asarray(v, dtype=float) for v in (path or [])] + [target]
    for v in vertices:
        theta.check_domain(v)

    floor = 10.0 * tol
    t0 = transversality_value(theta, rho, base)
    if abs(t0) < floor:
        raise VanishingTransversality(base, t0)
    for v in vertices:
        ext = form_extensivity_residual(theta, rho, v).max_abs()
        if ext > precheck_tol:
            raise NotExtensiveError(f"L_rho theta - theta = {ext:.3g} at {tuple(v)}")
        integ = integrability_defect(theta, v).max_abs()
        if integ > precheck_tol:
            raise ClosednessViolation(integ, v)

    eta = normalized_heat_form(theta, rho)
    total = 0.0
    nodes = 0
    worst_closed = 0.0
    min_trans = abs(t0)
    for a, b in zip(vertices[:-1], vertices[1:]):
        direction = b - a
        seen: list[np.ndarray] = []

        def integrand(s, a=a, direction=direction, seen=seen):
            nonlocal min_trans
            q = a + s * direction
            tr = transversality_value(theta, rho, q)
            if abs(tr) < floor:
                raise VanishingTransversality(q, tr)
            min_trans = min(min_trans, abs(tr))
            seen.append(q)
            return float(theta.at(q).values @ direction) / tr

        val, _ = integrate.quad(integrand, 0.0, 1.0, epsabs=tol * 1e-3, epsrel=1e-13, limit=200)
        total += val
        nodes += len(seen)
        # closedness is only meaningful for n >= 2; check a spread of nodes
        if theta.n >= 2:
            for q in seen[::max(1, len(seen) // 7)]:
                r = exterior_derivative(eta, q).max_abs()
                worst_closed = max(worst_closed, r)
                if r > tol:
                    raise ClosednessViolation(r, q)
    return EntropyRecovery(S0 * math.exp(total), total, nodes, worst_closed, min_trans)


def recover_entropy(theta: KForm, rho: VectorField, base, S0: float, target,
                    tol: float = 1e-9, path: Iterable | None = None) -> float:
    """Entropy at ``target`` from its value ``S0`` at ``base``, via ``theta / theta(rho) = d ln S``."""
    return recover_entropy_detailed(theta, rho, base, S0, target, tol, path).value


# -- transversal level sets ---------------------------------------------------------

def project_to_level(f: ScalarField, p, c: float, tol: float, max_iter: int = 30) -> np.ndarray:
    """Newton iteration along the gradient of ``f`` onto ``{f = c}``."""
    q = np.asarray(p, dtype=float)
    goal = tol * max(1.0, abs(c))
    for _ in range(max_iter):
        j = jet_of(f, q, 1)
        r = j.value - c
        if abs(r) < goal:
            return q
        g2 = float(j.grad @ j.grad)
        if g2 == 0.0:
            raise NewtonDivergence(f"gradient vanishes at {tuple(q)}")
        q = q - (r / g2) * j.grad
    raise NewtonDivergence(f"projection onto level {c} did not converge from {tuple(p)}")


def check_transversal_level_set(f: ScalarField, rho: VectorField, c: float, s: SampleSpec,
                                tol: float, band: float | None = None,
                                name: str = "transversal_level_set") -> CheckReport:
    """Project samples onto ``{f = c}`` and check ``df != 0`` and ``df(rho) = c``.

    Samples with ``|f(p) - c|`` above ``band`` (default ``|c|``) are skipped.
    A vanishing differential counts as an infinite residual.
    """
    if c == 0:
        raise ValueError("level value must be nonzero")
    band = abs(c) if band is None else band
    pre = check_extensive_function(f, rho, s, max(tol, 1e-9), name=name + ":extensive",
                                   factors=())
    if not pre.passed:
        raise NotExtensiveError(f"function is not extensive (euler residual {pre.max_residual:.3g})")
    col = _Collector()
    dmin = math.inf
    for p in s.generate():
        try:
            if abs(f(p) - c) > band:
                col.skipped += 1
                continue
            q = project_to_level(f, p, c, tol * 1e-2)
            j = jet_of(f, q, 1)
        except DomainError as exc:
            col.skip(exc)
            continue
        dn = float(np.linalg.norm(j.grad))
        dmin = min(dmin, dn)
        r = abs(float(j.grad @ rho.at(q)) - c) if dn > tol else math.inf
        col.add(q, r)
    return col.report(name, tol, parts=(("min_|df|", dmin),))


def defining_function_scale(f: ScalarField, g: ScalarField, s: SampleSpec, tol: float,
                            rho: VectorField | None = None, extensive_tol: float = 1e-8) -> float:
    """The constant ``k`` with ``g = k f`` on the samples, if there is one."""
    if f.n != g.n:
        raise DimensionError("functions live on charts of different dimension")
    rho = rho or VectorField.radial(f.n)
    for label, h in (("first", f), ("second", g)):
        rep = check_extensive_function(h, rho, s, extensive_tol, factors=())
        if not rep.passed:
            raise NotExtensiveError(f"{label} function is not extensive "
                                    f"(euler residual {rep.max_residual:.3g})")
    pts = s.generate()
    ratios = []
    for p in pts:
        fp = f(p)
        if fp == 0.0:
            raise ValueError(f"first function vanishes at {tuple(p)}")
        ratios.append(g(p) / fp)
    ratios = np.array(ratios)
    k = float(np.mean(ratios))
    spread = float(np.std(ratios, ddof=1)) if len(ratios) > 1 else 0.0
    if spread < tol * abs(k):
        return k
    order = np.argsort(-np.abs(ratios - k))[:MAX_WITNESSES]
    witnesses = [(tuple(float(x) for x in pts[i]), float(ratios[i])) for i in order]
    raise NonConstantRatio(f"ratio g/f varies: mean {k:.6g}, std {spread:.3g}", witnesses)
