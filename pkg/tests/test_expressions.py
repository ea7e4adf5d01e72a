"""Parser and exact-differentiation tests for the coefficient DSL."""

import math

import pytest
from hypothesis import given, settings, strategies as st

from algebroids.expressions import (
    Const,
    ExpressionError,
    balanced_sum,
    differentiate,
    parse_expression,
)

COORDS = ["x", "y"]

finite = st.floats(min_value=-5.0, max_value=5.0, allow_nan=False,
                   allow_infinity=False)


def test_parse_zero_constant():
    field = parse_expression("0", COORDS)
    assert field.eval((0.7, -0.3)) == 0.0


def test_parse_polynomial_evaluation():
    field = parse_expression("x^2*y", COORDS)
    assert field.eval((2.0, 3.0)) == pytest.approx(12.0)


def test_unknown_identifier_rejected():
    with pytest.raises(ExpressionError, match="unknown identifier 'q'"):
        parse_expression("sin(x)+q", COORDS)


def test_syntax_error_carries_position():
    with pytest.raises(ExpressionError) as err:
        parse_expression("x + * y", COORDS)
    assert err.value.position == 4


def test_unary_minus_and_powers():
    field = parse_expression("-x^2 + 2*x", COORDS)
    assert field.eval((3.0, 0.0)) == pytest.approx(-3.0)
    inv = parse_expression("x^-2", COORDS)
    assert inv.eval((2.0, 0.0)) == pytest.approx(0.25)


def test_functions_and_division():
    field = parse_expression("sin(x)*cos(y) + exp(x)/2", COORDS)
    expected = math.sin(0.5) * math.cos(-1.0) + math.exp(0.5) / 2.0
    assert field.eval((0.5, -1.0)) == pytest.approx(expected)


def test_division_by_zero_is_an_evaluation_error():
    field = parse_expression("1/x", COORDS)
    with pytest.raises(ZeroDivisionError):
        field.eval((0.0, 0.0))


def test_derivative_of_product_by_hand():
    field = parse_expression("x^2*y", COORDS)
    assert differentiate(field, 0).eval((2.0, 3.0)) == pytest.approx(12.0)


def test_derivative_of_constant_is_zero():
    assert differentiate(Const(4.5), 0).eval((1.0, 1.0)) == 0.0


def test_derivative_of_sine_at_origin():
    field = parse_expression("sin(x)", COORDS)
    assert differentiate(field, 0).eval((0.0, 0.0)) == pytest.approx(1.0)


def test_quotient_and_chain_rules():
    field = parse_expression("exp(2*x)/(1+x^2)", COORDS)
    x = 0.4

    def reference(t):
        return math.exp(2 * t) / (1 + t * t)

    h = 1e-6
    numeric = (reference(x + h) - reference(x - h)) / (2 * h)
    assert differentiate(field, 0).eval((x, 0.0)) == pytest.approx(numeric, rel=1e-8)


@given(finite, finite, finite)
@settings(max_examples=60, deadline=None)
def test_product_rule_pointwise(px, py, shift):
    f = parse_expression("x^2 + sin(y)", COORDS)
    g = parse_expression("cos(x)*y + 2", COORDS)
    product = f * g
    point = (px, py + shift)
    lhs = differentiate(product, 0).eval(point)
    rhs = (differentiate(f, 0) * g + f * differentiate(g, 0)).eval(point)
    assert lhs == pytest.approx(rhs, abs=1e-12, rel=1e-12)


@given(finite, finite)
@settings(max_examples=60, deadline=None)
def test_mixed_partials_commute(px, py):
    f = parse_expression("exp(x*y) + x^3*y^2 - cos(x+y)", COORDS)
    point = (px / 3.0, py / 3.0)
    one = differentiate(differentiate(f, 0), 1).eval(point)
    two = differentiate(differentiate(f, 1), 0).eval(point)
    assert one == pytest.approx(two, rel=1e-12, abs=1e-12)


def test_substitution_folds_constants():
    f = parse_expression("x*y + y^2", COORDS)
    g = f.subs(1, 2.0)
    assert g.eval((3.0, 999.0)) == pytest.approx(10.0)


def test_polynomial_degree_tracking():
    f = parse_expression("x^3*y + x", COORDS)
    assert f.tau_degree(0) == 3
    assert f.tau_degree(1) == 1
    assert parse_expression("sin(x)", COORDS).tau_degree(0) is None
    assert parse_expression("sin(y)", COORDS).tau_degree(0) == 0


def test_balanced_sum_matches_sequential_sum():
    terms = [parse_expression(f"x^{k}", COORDS) for k in range(1, 40)]
    total = balanced_sum(terms)
    expected = sum(0.9 ** k for k in range(1, 40))
    assert total.eval((0.9, 0.0)) == pytest.approx(expected)


def test_rendering_round_trips_through_parser():
    source = "(x + 2*y)^3 / (1 + x^2) - sin(x)*exp(y)"
    field = parse_expression(source, COORDS)
    again = parse_expression(str(field), COORDS)
    for point in [(0.3, -0.7), (1.1, 0.2)]:
        assert field.eval(point) == pytest.approx(again.eval(point), rel=1e-14)
