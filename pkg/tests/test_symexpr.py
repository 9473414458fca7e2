"""Tests for the expression kernel."""

import gc
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from jetcartan import symexpr
from jetcartan.symexpr import (
    ONE,
    ZERO,
    EvaluationError,
    MissingVariableError,
    add,
    constant,
    cos,
    covering_domain,
    diff,
    equal_numeric,
    evaluate,
    evaluate_many,
    log,
    mul,
    node_count,
    power,
    quotient,
    sample_points,
    sin,
    sqrt,
    subst,
    symbol,
)

x, y = symbol("x"), symbol("y")


class TestConstruction:
    """Tests for interning and simplification on construction."""

    def test_symbols_are_interned(self):
        assert symbol("x") is symbol("x")

    def test_structurally_equal_sums_are_shared(self):
        assert add(x, y) is add(x, y)

    def test_zero_and_one_are_dropped(self):
        assert add(x, 0) is x
        assert mul(x, 1) is x
        assert mul(x, 0) is ZERO

    def test_constants_fold_exactly(self):
        assert add(constant(Fraction(1, 3)), constant(Fraction(2, 3))) is ONE
        assert constant(0.1).re == Fraction(1, 10)

    def test_double_negation(self):
        assert -(-x) is x

    def test_power_of_power(self):
        assert power(power(x, 2), 3) is power(x, 6)

    def test_power_rejects_non_integer_exponent(self):
        with pytest.raises(TypeError):
            power(x, 0.5)

    def test_division_by_zero_constant(self):
        with pytest.raises(ZeroDivisionError):
            quotient(x, 0)

    def test_function_constant_folding(self):
        assert sin(0) is ZERO
        assert cos(0) is ONE
        assert log(1) is ZERO

    def test_free_variables(self):
        assert (x * sin(y) + 3).free == frozenset({"x", "y"})

    def test_dropped_expressions_are_released(self):
        names = {f"released_{k}" for k in range(40)}
        ordered = sorted(names)
        terms = [mul(symbol(a), sin(symbol(b))) for a, b in zip(ordered, ordered[1:])]
        assert add(*terms).free == frozenset(names)
        del terms
        gc.collect()
        assert not [node for node in list(symexpr._TABLE.values()) if node.free & names]
        for value in vars(symexpr).values():
            if isinstance(value, dict):
                assert not any(isinstance(key, frozenset) and key & names for key in value)


class TestDifferentiation:
    """Tests for symbolic derivatives."""

    def test_product_rule(self):
        e = x * x * y
        assert evaluate(diff(e, "x"), {"x": 3, "y": 2}) == pytest.approx(12)

    def test_quotient_rule(self):
        e = quotient(ONE, x)
        assert evaluate(diff(e, "x"), {"x": 2}) == pytest.approx(-0.25)

    def test_chain_rule(self):
        e = sin(x * x)
        value = evaluate(diff(e, "x"), {"x": 0.7})
        assert value == pytest.approx(2 * 0.7 * math.cos(0.49))

    def test_sqrt_and_log(self):
        assert evaluate(diff(sqrt(x), "x"), {"x": 4}) == pytest.approx(0.25)
        assert evaluate(diff(log(x), "x"), {"x": 5}) == pytest.approx(0.2)

    def test_independent_variable(self):
        assert diff(sin(y), "x") is ZERO

    @given(
        coefficient=st.integers(min_value=-20, max_value=20),
        exponent=st.integers(min_value=1, max_value=8),
        point=st.floats(min_value=-2, max_value=2, allow_nan=False),
    )
    @settings(max_examples=50, deadline=None)
    def test_monomial_derivative(self, coefficient, exponent, point):
        e = mul(coefficient, power(x, exponent))
        expected = coefficient * exponent * point ** (exponent - 1)
        assert evaluate(diff(e, "x"), {"x": point}) == pytest.approx(expected, rel=1e-9, abs=1e-9)


class TestSubstitution:
    def test_subst_replaces_variable(self):
        e = subst(x * y, "y", x + 1)
        assert evaluate(e, {"x": 2}) == pytest.approx(6)

    def test_subs_method(self):
        assert (x + y).subs({"x": 1, "y": 2}) is constant(3)


class TestEvaluation:
    """Tests for numeric evaluation."""

    def test_complex_values(self):
        assert evaluate(x * constant(0, 1), {"x": 2}) == pytest.approx(2j)

    def test_missing_variable(self):
        with pytest.raises(MissingVariableError):
            evaluate(x + y, {"x": 1})

    def test_division_by_zero_reports_point(self):
        with pytest.raises(EvaluationError) as info:
            evaluate(quotient(ONE, x), {"x": 0})
        assert info.value.point == {"x": 0}

    def test_log_of_negative_real(self):
        with pytest.raises(EvaluationError):
            evaluate(log(x), {"x": -1})

    def test_batch_evaluation(self):
        values = evaluate_many([x + y, x * y], {"x": [1, 2], "y": [3, 4]})
        assert np.allclose(values[0], [4, 6])
        assert np.allclose(values[1], [3, 8])

    def test_node_count_shares_subtrees(self):
        shared = sin(x)
        assert node_count(shared * shared + shared) < node_count(sin(x) * sin(y) + cos(x))


class TestRandomizedComparison:
    """Tests for seeded identity testing."""

    def test_pythagorean_identity(self):
        result = equal_numeric(sin(x) ** 2 + cos(x) ** 2, ONE, {"x": (-3, 3)})
        assert result.ok
        assert result.worst_error < 1e-12

    def test_detects_difference(self):
        result = equal_numeric(x * x, x, {"x": (2, 3)}, trials=5)
        assert not result.ok
        assert "x" in result.worst_point

    def test_componentwise(self):
        result = equal_numeric([x + y, x * y], [y + x, y * x], {"x": (-1, 1), "y": (-1, 1)})
        assert result.ok

    def test_uncovered_variable(self):
        with pytest.raises(MissingVariableError):
            equal_numeric(x + y, y + x, {"x": (-1, 1)})

    def test_sampling_is_deterministic(self):
        first = sample_points({"x": (0, 1), "y": (2, 3)}, 4, seed=5, stream="s")
        second = sample_points({"y": (2, 3), "x": (0, 1)}, 4, seed=5, stream="s")
        assert np.array_equal(first["x"], second["x"])
        assert np.array_equal(first["y"], second["y"])

    def test_streams_differ(self):
        first = sample_points({"x": (0, 1)}, 4, seed=5, stream="a")
        second = sample_points({"x": (0, 1)}, 4, seed=5, stream="b")
        assert not np.array_equal(first["x"], second["x"])

    def test_points_stay_in_box(self):
        points = sample_points({"x": (2, 3)}, 50, seed=1)
        assert np.all((points["x"].real >= 2) & (points["x"].real <= 3))

    def test_covering_domain_fills_gaps(self):
        domain = covering_domain([x + y], {"x": (0, 1)}, (-2, 2))
        assert domain == {"x": (0, 1), "y": (-2, 2)}
