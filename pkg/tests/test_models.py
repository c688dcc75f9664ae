from __future__ import annotations

import math

import numpy as np
import pytest
import sympy as sp

from extenso.diffcalc import Box, ScalarField
from extenso.exterior import VectorField, exterior_derivative, lie_derivative_sym2
from extenso.extensivity import SampleSpec, recover_entropy
from extenso.models import (alpha_counterexample, alpha_form, check_metric_scaling,
                            check_potential_degree, conformal_factor_check, first_law_residual,
                            ideal_gas, ideal_gas_formula_reports, null_direction_residual,
                            phase_space_forms, phase_space_sigma_check, quevedo_metric,
                            rotation_counterexample, rotation_field, ruppeiner_metric,
                            van_der_waals, vdw_closed_form_report, vdw_work_wedge_closed_form,
                            work_wedge)

OCTANT = Box.of([(0.5, 3.0)] * 3)
VDW_BOX = Box.of([(1.0, 2.0)] * 3)
QUAD = Box.of([(0.5, 3.0)] * 2)
XY = ["x", "y"]

U, V, N = sp.symbols("U V N", positive=True)


def _sympy_work_wedge(S):
    """Coefficient of dU^dV^dN in eps ^ d eps, with eps = -T S_V dV - T S_N dN and T = 1/S_U."""
    T = 1 / sp.diff(S, U)
    a = [sp.Integer(0), -T * sp.diff(S, V), -T * sp.diff(S, N)]
    xs = (U, V, N)

    def dd(i, j):
        return sp.diff(a[j], xs[i]) - sp.diff(a[i], xs[j])

    return a[0] * dd(1, 2) - a[1] * dd(0, 2) + a[2] * dd(0, 1)


def _ideal_gas_sympy(c, K1, R):
    return N * R * sp.log(K1 * U ** c * V / N ** (c + 1))


def _vdw_sympy(a, b, c, K2, R):
    return N * R * sp.log(K2 * (V / N - b) * (U / N + N * a / V) ** c)


# -- ideal gas --------------------------------------------------------------------------

def test_ideal_gas_examples():
    gas = ideal_gas(c=1.5, K1=math.e, R=1.0)
    assert gas.S((1.0, 1.0, 1.0)) == pytest.approx(1.0, rel=1e-15)
    assert gas.pressure()((1.0, 1.0, 1.0)) == pytest.approx(2 / 3, rel=1e-15)
    np.testing.assert_array_equal(gas.rho.at((2.0, 3.0, 4.0)), [2.0, 3.0, 4.0])
    with pytest.raises(ValueError):
        ideal_gas(c=-1.0)


def test_first_law_and_heat_form_identity():
    for system in (ideal_gas(), van_der_waals()):
        for p in system.samples(VDW_BOX, 20, 1).generate():
            assert first_law_residual(system, p) < 1e-12
            grad = np.array([system.S.partial(i)(p) for i in range(3)])
            T = system.temperature(p)
            np.testing.assert_allclose(system.theta.at(p).values, T * grad, atol=1e-10)


def test_ideal_gas_work_wedge_matches_symbolic_value():
    # eps ^ d eps for S = N R ln(K1 U^c V / N^(c+1)) works out to -U/(c N V), never zero
    c, K1, R = 1.5, math.e, 1.0
    gas = ideal_gas(c, K1, R)
    expr = _sympy_work_wedge(_ideal_gas_sympy(sp.Rational(3, 2), sp.E, 1))
    assert sp.simplify(expr + U / (sp.Rational(3, 2) * N * V)) == 0
    for p in SampleSpec(OCTANT, 20, 3).generate():
        want = float(expr.subs(dict(zip((U, V, N), p))))
        assert work_wedge(gas, p).values[0] == pytest.approx(want, rel=1e-12)
        assert want == pytest.approx(-p[0] / (c * p[2] * p[1]), rel=1e-14)


def test_ideal_gas_formula_comparisons_disagree():
    gas = ideal_gas(c=1.5, K1=math.e)
    pressure, mu = ideal_gas_formula_reports(gas, SampleSpec(OCTANT, 10, 0))
    assert not pressure.passed and not mu.passed
    # the derived pressure is U/(cV); the alternative reading gives cU/V
    p = (1.0, 1.0, 1.0)
    assert gas.pressure()(p) == pytest.approx(1 / 1.5)


# -- van der Waals ------------------------------------------------------------------------

def test_vdw_reduces_to_ideal_gas():
    vdw = van_der_waals(a=0.0, b=0.0, c=1.5, K2=2.0, R=1.0)
    gas = ideal_gas(c=1.5, K1=2.0, R=1.0)
    for p in SampleSpec(OCTANT, 20, 0).generate():
        assert vdw.S(p) == pytest.approx(gas.S(p), rel=1e-12, abs=1e-12)
        assert work_wedge(vdw, p).values[0] == pytest.approx(work_wedge(gas, p).values[0], rel=1e-10)


def test_vdw_extensive_and_integrable():
    from extenso.extensivity import check_extensive_function, check_integrable
    vdw = van_der_waals()
    s = vdw.samples(VDW_BOX, 50, 0)
    assert check_extensive_function(vdw.S, vdw.rho, s, 1e-9).passed
    assert check_integrable(vdw.theta, vdw.samples(VDW_BOX, 20, 1), 1e-9).passed


def test_vdw_admissibility():
    vdw = van_der_waals(b=1.0)
    assert not vdw.admissible((1.0, 0.5, 1.0))
    assert vdw.admissible((1.0, 2.0, 1.0))


def test_vdw_work_wedge_against_symbolic_and_closed_form():
    vdw = van_der_waals(a=1.0, b=0.1, c=1.5, K2=1.0, R=1.0)
    expr = _vdw_sympy(1, sp.Rational(1, 10), sp.Rational(3, 2), 1, 1)
    oracle = _sympy_work_wedge(expr)
    p = (1.0, 1.0, 1.0)
    got = work_wedge(vdw, p).values[0]
    assert got == pytest.approx(float(oracle.subs({U: 1, V: 1, N: 1})), rel=1e-12)
    assert abs(got) > 0.1
    assert got == pytest.approx(vdw_work_wedge_closed_form(vdw, p), rel=1e-12)
    assert vdw_closed_form_report(vdw, vdw.samples(VDW_BOX, 20, 0)).passed


# -- metrics --------------------------------------------------------------------------------

def test_ruppeiner_null_direction_for_entropy():
    gas = ideal_gas()
    g = ruppeiner_metric(gas)
    for p in SampleSpec(OCTANT, 20, 0).generate():
        assert null_direction_residual(g, gas.rho, p) < 1e-9


def test_metric_scaling_for_degree_two_potential():
    phi = ScalarField.from_expression("x^2*y/(x + y)", XY)
    rho = VectorField.radial(2)
    s = SampleSpec(QUAD, 20, 0)
    assert check_potential_degree(phi, rho, 2.0, s, 1e-12).passed
    rup, que = ruppeiner_metric(phi, 2.0), quevedo_metric(phi, 2.0)
    assert rup.expected_lie_factor == 2.0 and que.expected_lie_factor == 4.0
    assert check_metric_scaling(rup, rho, s, 1e-8).passed
    assert check_metric_scaling(que, rho, s, 1e-8).passed
    p = (1.0, 1.0)
    np.testing.assert_allclose(lie_derivative_sym2(rho, que.g, p), 4 * que.g.at(p), atol=1e-12)


def test_quevedo_scaling_for_entropy():
    gas = ideal_gas()
    assert check_metric_scaling(quevedo_metric(gas), gas.rho, SampleSpec(OCTANT, 20, 0), 1e-8).passed


def test_metric_needs_declared_degree():
    with pytest.raises(ValueError):
        ruppeiner_metric(ScalarField.from_expression("x*y", XY))


def test_conformal_factor_examples():
    phi = ScalarField.from_expression("x^2*y/(x + y)", XY)
    rho = VectorField.radial(2)
    s = SampleSpec(QUAD, 20, 0)
    assert conformal_factor_check(phi, rho, 2.0, s, 1e-12).passed
    f = ScalarField.from_expression("x/y", XY)
    assert conformal_factor_check(f * phi, rho, 2.0, s, 1e-12).passed
    assert not conformal_factor_check(phi * phi, rho, 2.0, s, 1e-6).passed


# -- counterexamples ------------------------------------------------------------------------

def test_rotation_counterexample():
    ex = rotation_counterexample()
    push, sing, flipped = ex.reports
    assert push.passed and push.max_residual < 1e-8
    assert sing.passed and ex.singularity.kind == "radial-incompatible"
    assert not flipped.passed
    np.testing.assert_array_equal(rotation_field().at((0.0, 1.0)), [1.0, 0.0])


def test_alpha_counterexample():
    ex = alpha_counterexample()
    assert all(r.passed for r in ex.reports)
    np.testing.assert_array_equal(alpha_form().at((1.0, 1.0)).values, [2.0, -2.0])


def test_alpha_blocks_entropy_recovery():
    from extenso.errors import VanishingTransversality
    with pytest.raises(VanishingTransversality):
        recover_entropy(alpha_form(), VectorField.radial(2), (1.0, 2.0), 1.0, (2.0, 2.0))


# -- phase space ------------------------------------------------------------------------------

def test_phase_space_unit_degree_at_point():
    Theta, sigma = phase_space_forms(1, 1.0)
    from extenso.exterior import lie_derivative_form
    p = (2.0, 3.0, 5.0)
    v = lie_derivative_form(sigma, Theta, p)
    np.testing.assert_allclose(v.values, Theta.at(p).values, atol=1e-12)
    np.testing.assert_allclose(v.values, [1.0, -5.0, 0.0], atol=1e-12)
    assert sigma.components[2](p) == 0.0


def test_phase_space_checks():
    assert phase_space_sigma_check(2, 2.0, 1e-10, 20).passed
    assert phase_space_sigma_check(3, 0.5, 1e-10, 20).passed


def test_theta_derivative_against_symbolic():
    gas = ideal_gas(c=1.5, K1=math.e)
    S = _ideal_gas_sympy(sp.Rational(3, 2), sp.E, 1)
    T = 1 / sp.diff(S, U)
    theta_V = T * sp.diff(S, V)
    want = float(sp.diff(theta_V, U).subs({U: 1, V: 1, N: 1}))
    assert exterior_derivative(gas.theta, (1.0, 1.0, 1.0))[0, 1] == pytest.approx(want, rel=1e-13)
    assert want == pytest.approx(2 / 3, rel=1e-14)
