from __future__ import annotations

import math

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings, strategies as st

from extenso import jets
from extenso.diffcalc import Box, ScalarField, SmoothMap, gradient, hessian, jacobian, jet_of
from extenso.errors import DimensionError, DomainError
from extenso.jets import Jet, seed
from polys import random_homogeneous, random_polynomial


def field(src, names):
    return ScalarField.from_expression(src, names)


def test_jet_of_product():
    j = jet_of(field("x*y", ["x", "y"]), (2.0, 3.0), 2)
    assert j.value == 6.0
    np.testing.assert_array_equal(j.grad, [3.0, 2.0])
    np.testing.assert_array_equal(j.hess, [[0.0, 1.0], [1.0, 0.0]])


def test_jet_of_exp_third_order():
    j = jet_of(field("exp(x)", ["x"]), (0.0,), 3)
    assert j.value == 1.0
    assert j.grad[0] == j.hess[0, 0] == j.third[0, 0, 0] == 1.0


def test_ideal_gas_entropy_gradient_at_unit_point():
    S = ScalarField.from_expression("N*R*ln(K1*U^c*V/N^(c+1))", ["U", "V", "N"],
                                    {"c": 1.5, "K1": 1.0, "R": 1.0})
    j = jet_of(S, (1.0, 1.0, 1.0), 2)
    assert j.value == 0.0
    np.testing.assert_allclose(j.grad, [1.5, 1.0, -2.5], atol=1e-15)
    np.testing.assert_allclose(j.hess @ np.ones(3), 0.0, atol=1e-14)


@pytest.mark.parametrize("srcs, p, expected", [
    (["2*x", "x+y"], (0.3, -1.0), [[2, 0], [1, 1]]),
    (["x", "y"], (5.0, 7.0), [[1, 0], [0, 1]]),
    (["x^2", "y"], (1.0, 1.0), [[2, 0], [0, 1]]),
])
def test_jacobian_examples(srcs, p, expected):
    F = SmoothMap.from_expressions(srcs, ["x", "y"])
    np.testing.assert_array_equal(jacobian(F, p), expected)


def test_hessian_examples():
    np.testing.assert_array_equal(hessian(field("x^2+y^2", ["x", "y"]), (0.1, 4.0)), 2 * np.eye(2))
    np.testing.assert_array_equal(hessian(field("x*y", ["x", "y"]), (0.1, 4.0)), [[0, 1], [1, 0]])


def test_mismatched_jets_rejected():
    a = Jet.variable(1.0, 0, 2, 1)
    with pytest.raises(DimensionError):
        a + Jet.variable(1.0, 0, 3, 1)
    with pytest.raises(DimensionError):
        a * Jet.variable(1.0, 0, 2, 2)


def test_domain_box_enforced():
    f = ScalarField.from_expression("ln(x)", ["x"], domain=Box.positive(1))
    with pytest.raises(DomainError):
        f((-1.0,))
    with pytest.raises(DomainError):
        f((0.0,))  # boundary of an open box


def test_jet_symmetry():
    f = field("exp(x*y)*ln(2+z^2) + x^3*z/(1+y^2)", ["x", "y", "z"])
    j = jet_of(f, (0.3, -0.7, 1.1), 3)
    np.testing.assert_allclose(j.hess, j.hess.T, atol=1e-14)
    for perm in [(0, 2, 1), (1, 0, 2), (1, 2, 0), (2, 0, 1), (2, 1, 0)]:
        np.testing.assert_allclose(j.third, j.third.transpose(perm), atol=1e-13)


def test_partial_field_matches_higher_jet():
    f = field("x^2*y^3 + exp(x*y)", ["x", "y"])
    p = (0.4, 0.9)
    fx = f.partial(0)
    fxy = fx.partial(1)
    top = jet_of(f, p, 3)
    j = jet_of(fxy, p, 1)
    assert j.value == pytest.approx(top.hess[0, 1], rel=1e-13)
    np.testing.assert_allclose(j.grad, top.third[0, 1], rtol=1e-13)
    with pytest.raises(ValueError):
        jet_of(fxy, p, 2)  # would need order four


def test_compose_fields():
    f = field("x*y", ["x", "y"])
    F = SmoothMap.from_expressions(["u+v", "u-v"], ["u", "v"])
    g = f.compose(F)
    j = jet_of(g, (2.0, 1.0), 2)
    assert j.value == 3.0  # u^2 - v^2
    np.testing.assert_allclose(j.grad, [4.0, -2.0])
    np.testing.assert_allclose(j.hess, [[2.0, 0.0], [0.0, -2.0]])


def test_special_functions_against_math():
    x = Jet.variable(0.6, 0, 1, 3)
    for fn, ref, d1 in [(jets.sin, math.sin, math.cos), (jets.cos, math.cos, lambda t: -math.sin(t)),
                        (jets.arctan, math.atan, lambda t: 1 / (1 + t * t)),
                        (jets.sqrt, math.sqrt, lambda t: 0.5 / math.sqrt(t))]:
        j = fn(x)
        assert j.value == pytest.approx(ref(0.6), rel=1e-15)
        assert j.grad[0] == pytest.approx(d1(0.6), rel=1e-14)


def test_arctan2_matches_atan2_and_gradient():
    xs = seed([-0.5, 1.5], 1)
    j = jets.arctan2(xs[1], xs[0])
    assert j.value == pytest.approx(math.atan2(1.5, -0.5), rel=1e-15)
    r2 = 0.5 ** 2 + 1.5 ** 2
    np.testing.assert_allclose(j.grad, [-1.5 / r2, -0.5 / r2], rtol=1e-14)
    with pytest.raises(DomainError):
        jets.arctan2(Jet.variable(0.0, 0, 1, 1), -1.0)


# -- analytic oracle (sympy) ---------------------------------------------------------

def _sympy_derivatives(expr, symbols, point):
    subs = dict(zip(symbols, point))
    n = len(symbols)
    grad = [float(sp.diff(expr, s).subs(subs)) for s in symbols]
    hess = [[float(sp.diff(expr, a, b).subs(subs)) for b in symbols] for a in symbols]
    third = [[[float(sp.diff(expr, a, b, c).subs(subs)) for c in symbols] for b in symbols]
             for a in symbols]
    return np.array(grad), np.array(hess), np.array(third).reshape(n, n, n)


@pytest.mark.parametrize("seed_", range(12))
def test_polynomial_jets_match_sympy(seed_):
    rng = np.random.default_rng(seed_)
    n = int(rng.integers(1, 6))
    src = random_polynomial(rng, n)
    names = [f"x{i}" for i in range(n)]
    symbols = sp.symbols(names)
    expr = sp.sympify(src.replace("^", "**"), locals=dict(zip(names, symbols)))
    p = rng.uniform(-1.5, 1.5, n)
    j = jet_of(field(src, names), p, 3)
    g, H, T = _sympy_derivatives(expr, symbols, p)
    scale = 1.0 + np.max(np.abs(T))
    np.testing.assert_allclose(j.grad, g, rtol=1e-12, atol=1e-12 * scale)
    np.testing.assert_allclose(j.hess, H, rtol=1e-12, atol=1e-12 * scale)
    np.testing.assert_allclose(j.third, T, rtol=1e-12, atol=1e-12 * scale)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000))
def test_polynomial_gradients_match_central_differences(s):
    rng = np.random.default_rng(s)
    n = int(rng.integers(1, 6))
    names = [f"x{i}" for i in range(n)]
    f = field(random_polynomial(rng, n), names)
    p = rng.uniform(-1, 1, n)
    j = jet_of(f, p, 2)
    h = 1e-4
    for i in range(n):
        e = np.zeros(n)
        e[i] = h
        fd = (f(p + e) - f(p - e)) / (2 * h)
        assert j.grad[i] == pytest.approx(fd, rel=1e-5, abs=1e-5)
        fd2 = (gradient(f, p + e) - gradient(f, p - e)) / (2 * h)
        np.testing.assert_allclose(j.hess[i], fd2, rtol=1e-5, atol=1e-5)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000))
def test_hessian_annihilates_position_for_homogeneous(s):
    rng = np.random.default_rng(s)
    n = int(rng.integers(2, 5))
    f = ScalarField.from_expression(random_homogeneous(rng, n), [f"x{i}" for i in range(n)])
    p = rng.uniform(0.5, 2.0, n)
    H = hessian(f, p)
    assert np.max(np.abs(H @ p)) <= 1e-9 * (1 + np.max(np.abs(H)) * np.max(p))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000))
def test_chain_rule_for_jacobians(s):
    rng = np.random.default_rng(s)
    names = ["x", "y"]
    F = SmoothMap.from_expressions(["x*y + exp(x/4)", "x^2 - y", "ln(1 + y^2)"], names)
    A = rng.normal(size=(2, 3))
    G = SmoothMap.linear(A)
    B = SmoothMap.from_expressions(["u^2 + v", "u*v"], ["u", "v"])
    p = rng.uniform(-1, 1, 2)
    FG = G.compose(F)
    np.testing.assert_allclose(jacobian(FG, p), A @ jacobian(F, p), atol=1e-10)
    BF = F.compose(B)
    np.testing.assert_allclose(jacobian(BF, p), jacobian(F, B(p)) @ jacobian(B, p), atol=1e-10)


def test_float_and_jet_paths_agree():
    f = field("exp(x/y)*ln(1+x^2) - x^y + 3/(x+y)", ["x", "y"])
    p = (0.7, 1.3)
    assert f(p) == pytest.approx(jet_of(f, p, 2).value, rel=1e-14)
