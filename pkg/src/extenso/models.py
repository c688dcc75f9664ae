"""Thermodynamic systems, Hessian metrics and the worked counterexamples.

Heat and work forms are always derived from the fundamental equation: with
``T = 1 / (dS/dU)`` the heat form is ``theta = T dS`` (its ``dU`` coefficient
is exactly 1) and the work form is ``eps = dU - theta``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from . import jets
from .diffcalc import Box, ScalarField, SmoothMap, jet_of
from .errors import ExtensoError
from .exterior import (FormValue, KForm, SymTensor2Field, VectorField, exterior_derivative,
                       lie_derivative_form, lie_derivative_sym2, wedge)
from .extensivity import (CheckReport, SampleSpec, _Collector, chart_from_maps,
                          form_extensivity_residual, integrability_defect, sweep,
                          transversality_value)
from .flows import Chart, SingularityClass, classify_singularity, pushforward_residual

IDEAL_GAS_ENTROPY = "N*R*ln(K1*U^c*V/N^(c+1))"
VDW_ENTROPY = "N*R*ln(K2*(V/N - b)*(U/N + N*a/V)^c)"
GAS_VARIABLES = ("U", "V", "N")


@dataclass(frozen=True)
class ThermoSystem:
    """A system given by its fundamental equation ``S(x^0, x^1, ...)``.

    The first variable plays the role of internal energy.
    """

    name: str
    names: tuple[str, ...]
    domain: Box
    S: ScalarField
    constants: Mapping[str, float]
    rho: VectorField
    theta: KForm
    epsilon: KForm
    temperature: ScalarField
    beta: float = 1.0
    constraint: Callable[[np.ndarray], bool] | None = field(default=None, compare=False)

    @property
    def n(self) -> int:
        return len(self.names)

    @classmethod
    def from_entropy(cls, name: str, names: Sequence[str], S: ScalarField, domain: Box,
                     constants: Mapping[str, float] | None = None,
                     constraint: Callable[[np.ndarray], bool] | None = None) -> "ThermoSystem":
        n = len(names)
        if S.n != n:
            raise ValueError(f"entropy has {S.n} variables, system declares {n}")
        dS = [S.partial(i) for i in range(n)]
        T = 1.0 / dS[0]
        heat = {(0,): ScalarField.constant(n, 1.0)}
        work = {}
        for i in range(1, n):
            heat[(i,)] = T * dS[i]
            work[(i,)] = -heat[(i,)]
        return cls(name, tuple(names), domain, S, dict(constants or {}),
                   VectorField.radial(n, domain), KForm(n, 1, heat, domain),
                   KForm(n, 1, work, domain), T, 1.0, constraint)

    @classmethod
    def from_equation(cls, name: str, names: Sequence[str], equation: str, domain: Box,
                      constants: Mapping[str, float] | None = None,
                      constraint: Callable[[np.ndarray], bool] | None = None) -> "ThermoSystem":
        S = ScalarField.from_expression(equation, names, constants, domain)
        return cls.from_entropy(name, names, S, domain, constants, constraint)

    def pressure(self) -> ScalarField:
        """``T dS/dV``: the heat-form coefficient of the second variable."""
        return self.theta.coefficient((1,))

    def chemical_potential(self) -> ScalarField:
        """``-T dS/dN``."""
        return -self.theta.coefficient((2,))

    def samples(self, box: Box, count: int = 50, seed: int = 0) -> SampleSpec:
        return SampleSpec(box, count, seed, constraint=self.constraint)

    def admissible(self, p) -> bool:
        return self.domain.contains(p) and (self.constraint is None or self.constraint(np.asarray(p)))


def ideal_gas(c: float = 1.5, K1: float = 1.0, R: float = 1.0) -> ThermoSystem:
    """``S = N R ln(K1 U^c V / N^(c+1))`` on the positive octant."""
    if min(c, K1, R) <= 0:
        raise ValueError("ideal gas constants must be positive")
    return ThermoSystem.from_equation("ideal_gas", GAS_VARIABLES, IDEAL_GAS_ENTROPY,
                                      Box.positive(3), {"c": c, "K1": K1, "R": R})


def van_der_waals(a: float = 1.0, b: float = 0.1, c: float = 1.5, K2: float = 1.0,
                  R: float = 1.0, box: Box | None = None) -> ThermoSystem:
    """``S = N R ln[K2 (V/N - b)(U/N + N a/V)^c]``.

    ``a = b = 0`` is allowed (it reduces to the ideal gas).  Admissible
    states satisfy ``V/N > b`` and ``U/N + N a/V > 0``; the predicate is
    attached to the system and applied whenever it is sampled.
    """
    if a < 0 or b < 0 or min(c, K2, R) <= 0:
        raise ValueError("van der Waals constants must be non-negative (a, b) or positive")

    def admissible(p) -> bool:
        U, V, N = p
        return V / N > b and U / N + N * a / V > 0

    return ThermoSystem.from_equation("van_der_waals", GAS_VARIABLES, VDW_ENTROPY,
                                      box or Box.positive(3),
                                      {"a": a, "b": b, "c": c, "K2": K2, "R": R}, admissible)


def work_wedge(system: ThermoSystem, p) -> FormValue:
    """``eps ^ d eps`` at ``p``."""
    if system.n != 3:
        raise ValueError("work wedge is a 3-form check for three-variable systems")
    return wedge(system.epsilon.at(p), exterior_derivative(system.epsilon, p))


def first_law_residual(system: ThermoSystem, p) -> float:
    """``theta + eps - dU`` at ``p`` (max norm)."""
    total = system.theta.at(p) + system.epsilon.at(p)
    dU = np.zeros(system.n)
    dU[0] = 1.0
    return float(np.max(np.abs(total.values - dU)))


# -- comparisons against closed-form expressions quoted for the gases ------------

def ideal_gas_textbook_pressure(system: ThermoSystem, p) -> float:
    """Alternative pressure formula ``c U / V``."""
    U, V, _ = p
    return system.constants["c"] * U / V


def ideal_gas_textbook_chemical_potential(system: ThermoSystem, p) -> float:
    """Alternative formula ``-U/(cN) [ln(K U^c V N^-(c+1)) + c + 1]``."""
    U, V, N = p
    c, K = system.constants["c"], system.constants["K1"]
    return -U / (c * N) * (math.log(K * U ** c * V * N ** -(c + 1)) + c + 1)


def ideal_gas_formula_reports(system: ThermoSystem, s: SampleSpec,
                              tol: float = 1e-9) -> list[CheckReport]:
    """Compare the derived ``p`` and ``mu`` with the alternative closed forms."""
    P, mu = system.pressure(), system.chemical_potential()
    return [
        sweep("ideal_gas_pressure_vs_cU_over_V", s, tol,
              lambda q: P(q) - ideal_gas_textbook_pressure(system, q)),
        sweep("ideal_gas_mu_vs_closed_form", s, tol,
              lambda q: mu(q) - ideal_gas_textbook_chemical_potential(system, q)),
    ]


def vdw_work_wedge_closed_form(system: ThermoSystem, p) -> float:
    """``a S/(c R V^2) + U / (N * c N (b - V/N))`` read with the natural grouping."""
    U, V, N = p
    k = system.constants
    S = system.S(p)
    return k["a"] * S / (k["c"] * k["R"] * V ** 2) + (U / N) / (k["c"] * N * (k["b"] - V / N))


def vdw_closed_form_report(system: ThermoSystem, s: SampleSpec,
                           tol: float = 1e-9) -> CheckReport:
    """Jet-computed ``eps ^ d eps`` against the closed form, relative to its size."""
    def rel(q):
        jet_val = work_wedge(system, q).values[0]
        closed = vdw_work_wedge_closed_form(system, q)
        return (jet_val - closed) / max(1.0, abs(jet_val))
    return sweep("vdw_work_wedge_vs_closed_form", s, tol, rel)


# -- metrics --------------------------------------------------------------------

@dataclass(frozen=True)
class MetricField:
    n: int
    g: SymTensor2Field
    kind: str  # 'ruppeiner' | 'quevedo'
    potential: ScalarField
    beta: float

    @property
    def expected_lie_factor(self) -> float:
        """``L_rho g = factor * g`` for a degree-beta potential."""
        return self.beta if self.kind == "ruppeiner" else 2.0 * self.beta


def _potential(source, beta):
    if isinstance(source, ThermoSystem):
        return source.S, source.beta if beta is None else beta
    if beta is None:
        raise ValueError("degree of the potential must be declared")
    return source, float(beta)


def ruppeiner_metric(source: ThermoSystem | ScalarField, beta: float | None = None) -> MetricField:
    """Hessian metric of the potential (the entropy of a system)."""
    phi, beta = _potential(source, beta)
    return MetricField(phi.n, SymTensor2Field.hessian_of(phi), "ruppeiner", phi, beta)


def quevedo_metric(source: ThermoSystem | ScalarField, beta: float | None = None) -> MetricField:
    """Potential times its Hessian."""
    phi, beta = _potential(source, beta)
    return MetricField(phi.n, SymTensor2Field.hessian_of(phi).scaled(phi), "quevedo", phi, beta)


def metric_scaling_residual(metric: MetricField, rho: VectorField, p) -> float:
    """``max |L_rho g - factor * g|`` at ``p``."""
    lie = lie_derivative_sym2(rho, metric.g, p)
    return float(np.max(np.abs(lie - metric.expected_lie_factor * metric.g.at(p))))


def check_metric_scaling(metric: MetricField, rho: VectorField, s: SampleSpec, tol: float,
                         name: str | None = None) -> CheckReport:
    return sweep(name or f"{metric.kind}_lie_scaling", s, tol,
                 lambda p: metric_scaling_residual(metric, rho, p))


def null_direction_residual(metric: MetricField, rho: VectorField, p) -> float:
    """``|g(rho, .)|``; zero for the Hessian of a degree-1 potential."""
    return float(np.max(np.abs(metric.g.at(p) @ rho.at(p))))


def check_potential_degree(phi: ScalarField, rho: VectorField, beta: float, s: SampleSpec,
                           tol: float, name: str = "potential_degree") -> CheckReport:
    """``|d phi(rho) - beta phi|`` over the samples."""
    def res(p):
        j = jet_of(phi, p, 1)
        return float(j.grad @ rho.at(p)) - beta * j.value
    return sweep(name, s, tol, res)


def conformal_factor_check(lam: ScalarField, rho: VectorField, beta: float, s: SampleSpec,
                           tol: float, name: str = "conformal_factor") -> CheckReport:
    """Whether ``L_rho lam = beta lam`` holds on the samples."""
    return check_potential_degree(lam, rho, beta, s, tol, name)


# -- counterexamples ----------------------------------------------------------------

RIGHT_HALF_PLANE = Box((0.0, -math.inf), (math.inf, math.inf))
POSITIVE_QUADRANT = Box.positive(2)


def rotation_field() -> VectorField:
    """``y d_x - x d_y``: clockwise rotation, vanishing only at the origin."""
    return VectorField.from_expressions(["y", "-x"], ["x", "y"], label="rotation")


def polar_exponential_chart(sign: float = -1.0) -> Chart:
    """Chart ``(w, z) = (e^{s theta}, r e^{s theta})`` on the right half-plane.

    ``sign = -1`` radializes :func:`rotation_field`; ``sign = +1`` turns it
    into minus the radial field.
    """
    def angle(xs):
        return jets.arctan2(xs[1], xs[0])

    def w_rule(xs):
        return jets.exp(sign * angle(xs))

    def z_rule(xs):
        return jets.sqrt(xs[0] * xs[0] + xs[1] * xs[1]) * jets.exp(sign * angle(xs))

    fwd = SmoothMap([ScalarField(2, w_rule, RIGHT_HALF_PLANE, "w"),
                     ScalarField(2, z_rule, RIGHT_HALF_PLANE, "z")])

    def back_angle(ys):
        return jets.log(ys[0]) * (1.0 / sign)

    def x_rule(ys):
        return (ys[1] / ys[0]) * jets.cos(back_angle(ys))

    def y_rule(ys):
        return (ys[1] / ys[0]) * jets.sin(back_angle(ys))

    image = Box.positive(2)
    inv = SmoothMap([ScalarField(2, x_rule, image, "x"), ScalarField(2, y_rule, image, "y")])
    return chart_from_maps(fwd, inv, RIGHT_HALF_PLANE)


@dataclass(frozen=True)
class RotationExample:
    field: VectorField
    chart: Chart
    singularity: SingularityClass
    reports: tuple[CheckReport, ...]


def rotation_counterexample(count: int = 50, seed: int = 0, tol: float = 1e-8) -> RotationExample:
    """Rotation field: radial in an exponential polar chart, not radializable at 0.

    The reports are the pushforward check in the chart, the singularity
    class at the origin, and (informational) the same chart built with the
    opposite angular sign, which sends the field to minus the radial field.
    """
    X = rotation_field()
    chart = polar_exponential_chart(-1.0)
    s = SampleSpec(Box.of([(0.2, 2.0), (-2.0, 2.0)]), count, seed)
    push = sweep("rotation_chart_pushforward", s, tol,
                 lambda p: pushforward_residual(chart, X, p, "radial"))
    flipped = polar_exponential_chart(+1.0)
    push_flipped = sweep("rotation_chart_positive_angle_sign", s, tol,
                         lambda p: pushforward_residual(flipped, X, p, "radial"))
    cls = classify_singularity(X, (0.0, 0.0))
    col = _Collector()
    col.add((0.0, 0.0), 0.0 if cls.kind == "radial-incompatible" else 1.0)
    sing = col.report("rotation_origin_radial_incompatible", 0.0, detail=f"class={cls.kind}")
    return RotationExample(X, chart, cls, (push, sing, push_flipped))


@dataclass(frozen=True)
class AlphaExample:
    alpha: KForm
    reports: tuple[CheckReport, ...]


def alpha_form() -> KForm:
    return KForm.from_expressions(2, 1, {(0,): "1 + y/x", (1,): "-(1 + x/y)"}, ["x", "y"],
                                  domain=POSITIVE_QUADRANT)


def alpha_counterexample(count: int = 50, seed: int = 0, tol: float = 1e-12) -> AlphaExample:
    """An extensive 1-form with ``alpha(rho) = 0``: extensive yet not transversal."""
    alpha = alpha_form()
    rho = VectorField.radial(2, POSITIVE_QUADRANT)
    s = SampleSpec(Box.of([(0.1, 5.0), (0.1, 5.0)]), count, seed)
    return AlphaExample(alpha, (
        sweep("alpha_extensive", s, tol, lambda p: form_extensivity_residual(alpha, rho, p).max_abs()),
        sweep("alpha_contraction_vanishes", s, tol, lambda p: transversality_value(alpha, rho, p)),
        sweep("alpha_integrable", s, tol, lambda p: integrability_defect(alpha, p).max_abs()),
    ))


def phase_space_forms(n: int, beta: float) -> tuple[KForm, VectorField]:
    """``Theta = dw - p_i dq^i`` and ``sigma`` on coordinates ``(w, q^1..q^n, p_1..p_n)``."""
    if n < 1:
        raise ValueError("phase space needs n >= 1")
    dim = 2 * n + 1
    coeffs = {(0,): ScalarField.constant(dim, 1.0)}
    for i in range(n):
        coeffs[(1 + i,)] = -ScalarField.coordinate(dim, 1 + n + i)
    Theta = KForm(dim, 1, coeffs)
    comps = [beta * ScalarField.coordinate(dim, 0)]
    comps += [ScalarField.coordinate(dim, 1 + i) for i in range(n)]
    comps += [(beta - 1.0) * ScalarField.coordinate(dim, 1 + n + i) for i in range(n)]
    return Theta, VectorField(comps, label="sigma")


def phase_space_sigma_check(n: int, beta: float, tol: float = 1e-10, count: int = 20,
                            seed: int = 0) -> CheckReport:
    """``L_sigma Theta - beta Theta`` at random points of R^(2n+1)."""
    Theta, sigma = phase_space_forms(n, beta)
    s = SampleSpec(Box.of([(-3.0, 3.0)] * (2 * n + 1)), count, seed)
    return sweep(f"phase_space_sigma_n{n}_beta{beta:g}", s, tol,
                 lambda p: (lie_derivative_form(sigma, Theta, p) - beta * Theta.at(p)).max_abs())
