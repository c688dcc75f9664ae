from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from extenso.errors import DomainError, ExprSyntaxError, UnboundIdentifierError, UnknownFunctionError
from extenso.expr import (BinOp, Binding, Call, Neg, Num, Var, evaluate, evaluate_jets, free_vars,
                          parse, pretty)


def test_parse_mul_div_left_assoc_tree():
    # "c*U/V" is (c*U)/V as a tree; both readings denote the same function
    e = parse("c*U/V")
    assert e.root == BinOp("/", BinOp("*", Var("c"), Var("U")), Var("V"))
    b = Binding.at(["U", "V"], [2.0, 3.0], {"c": 1.5})
    assert evaluate(e, b).value == pytest.approx(1.5 * 2.0 / 3.0, rel=1e-15)


def test_parse_ideal_gas_entropy():
    e = parse("N*R*ln(K1*U^c*V/N^(c+1))")
    assert free_vars(e) == {"N", "R", "K1", "U", "c", "V"}
    assert isinstance(e.root.right, Call)


def test_syntax_error_reports_offset_and_expected():
    with pytest.raises(ExprSyntaxError) as info:
        parse("x +")
    assert info.value.offset == 3
    assert {"NUMBER", "IDENT", "("} <= info.value.expected
    assert "offset 3" in str(info.value)


def test_offsets_are_bytes():
    # a non-breaking space is two bytes in UTF-8
    src = "x +\u00a0"
    with pytest.raises(ExprSyntaxError) as info:
        parse(src)
    assert info.value.offset == len(src.encode()) == 5


def test_unknown_function():
    with pytest.raises(UnknownFunctionError) as info:
        parse("1 + sin(x)")
    assert info.value.name == "sin" and info.value.offset == 4


@pytest.mark.parametrize("src, expected", [("x+y", {"x", "y"}), ("2+2", set()),
                                           ("N*R*ln(V/N)", {"N", "R", "V"})])
def test_free_vars(src, expected):
    assert free_vars(parse(src)) == expected


def test_precedence_rules():
    assert parse("-x^2").root == Neg(BinOp("^", Var("x"), Num(2.0)))
    assert parse("2^3^2").root == BinOp("^", Num(2.0), BinOp("^", Num(3.0), Num(2.0)))
    assert parse("a-b-c").root == BinOp("-", BinOp("-", Var("a"), Var("b")), Var("c"))
    assert parse("x^-1").root == BinOp("^", Var("x"), Neg(Num(1.0)))
    b = Binding.at(["x"], [3.0])
    assert evaluate(parse("-x^2"), b).value == -9.0
    assert evaluate(parse("2^3^2"), Binding.at([], [])).value == 512.0


def test_eval_square_order_two():
    j = evaluate(parse("x^2"), Binding.at(["x"], [3.0]), order=2)
    assert j.value == 9.0
    np.testing.assert_allclose(j.grad, [6.0])
    np.testing.assert_allclose(j.hess, [[2.0]])


def test_eval_log_product():
    j = evaluate(parse("ln(x*y)"), Binding.at(["x", "y"], [1.0, 1.0]), order=1)
    assert j.value == 0.0
    np.testing.assert_allclose(j.grad, [1.0, 1.0])


def test_eval_domain_errors():
    with pytest.raises(DomainError):
        evaluate(parse("ln(x)"), Binding.at(["x"], [-1.0]))
    with pytest.raises(DomainError):
        evaluate(parse("x^-1"), Binding.at(["x"], [0.0]))
    with pytest.raises(DomainError):
        evaluate(parse("x^0.5"), Binding.at(["x"], [-2.0]))
    with pytest.raises(DomainError):
        evaluate(parse("1/x"), Binding.at(["x"], [0.0]))
    # integer powers of negative bases are fine
    assert evaluate(parse("x^3"), Binding.at(["x"], [-2.0])).value == -8.0


def test_unbound_identifier():
    with pytest.raises(UnboundIdentifierError) as info:
        evaluate(parse("x*Q + P"), Binding.at(["x"], [1.0]))
    assert info.value.names == ("P", "Q")


def test_binding_slots_validated():
    with pytest.raises(ValueError):
        Binding({"x": (1.0, 0), "y": (2.0, 2)})


def test_constant_exponent_from_binding():
    j = evaluate(parse("U^c"), Binding.at(["U"], [4.0], {"c": 1.5}), order=1)
    assert j.value == pytest.approx(8.0)
    assert j.grad[0] == pytest.approx(1.5 * 2.0)


def test_deterministic():
    e = parse("exp(x/y)*ln(1+x^2) - x^y")
    b = Binding.at(["x", "y"], [0.7, 1.3])
    a1, a2 = evaluate(e, b, 3), evaluate(e, b, 3)
    assert a1.value == a2.value
    assert np.array_equal(a1.third, a2.third)


# -- properties ----------------------------------------------------------------

_leaf = st.one_of(st.sampled_from(["x", "y", "k"]).map(Var),
                  st.integers(0, 9).map(lambda i: Num(float(i))),
                  st.sampled_from([0.5, 2.25]).map(Num))


def _grow(children):
    return st.one_of(
        st.builds(Neg, children),
        st.builds(BinOp, st.sampled_from(["+", "-", "*", "/", "^"]), children, children),
        st.builds(Call, st.sampled_from(["ln", "exp"]), children),
    )


trees = st.recursive(_leaf, _grow, max_leaves=10)


@settings(max_examples=300, deadline=None)
@given(trees)
def test_pretty_parse_roundtrip(tree):
    text = pretty(tree)
    again = parse(text)
    assert again.root == tree
    assert pretty(again) == text


_smooth = [
    "x^2*y + exp(x/3) - y^3",
    "ln(1 + x^2 + y^2)*x",
    "x/(2 + y^2) + (x*y)^2",
    "exp(-x*y) + ln(x^2 + 1)^2",
]


@settings(max_examples=60, deadline=None)
@given(st.sampled_from(_smooth), st.floats(-1.5, 1.5), st.floats(-1.5, 1.5))
def test_gradient_matches_central_differences(src, x, y):
    e = parse(src)
    j = evaluate(e, Binding.at(["x", "y"], [x, y]), order=1)
    h = 1e-6
    for i in range(2):
        up = [x, y]
        dn = [x, y]
        up[i] += h
        dn[i] -= h
        fd = (evaluate(e, Binding.at(["x", "y"], up)).value
              - evaluate(e, Binding.at(["x", "y"], dn)).value) / (2 * h)
        assert j.grad[i] == pytest.approx(fd, rel=1e-6, abs=1e-7)


def test_evaluate_jets_composes():
    from extenso.jets import seed
    # ln(u) with u = x*y evaluated on jets in (x, y)
    xs = seed([2.0, 3.0], 2)
    u = xs[0] * xs[1]
    j = evaluate_jets(parse("ln(u)"), {"u": u})
    assert j.value == pytest.approx(math.log(6.0))
    np.testing.assert_allclose(j.grad, [0.5, 1 / 3])
    np.testing.assert_allclose(j.hess, [[-0.25, 0.0], [0.0, -1 / 9]], atol=1e-15)
