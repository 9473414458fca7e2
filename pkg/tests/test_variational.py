"""Tests for jet Lagrangians, Euler-Lagrange operators and currents."""

import math

import numpy as np
import pytest

from jetcartan.checks import free_scalar_lagrangian
from jetcartan.connections import FiberedChart, Section, zero_linear_connection
from jetcartan.exprtext import parse_expr
from jetcartan.geometry import MetricField
from jetcartan.symexpr import ZERO, add, diff, equal_numeric, evaluate, symbol
from jetcartan.variational import (
    JetLagrangian,
    MetricDependenceError,
    current_pullback,
    euler_lagrange,
    euler_lagrange_along,
    horizontal_lift,
    metric_symbol_names,
    momentum,
)
from jetcartan.verify import action_variation_oracle, finite_difference_oracle


@pytest.fixture
def wave(plane):
    """ℓ = ½(y_t² - y_x²) - ½y² on the (t, x) plane."""
    chart = FiberedChart("R", plane, ("y",))
    return JetLagrangian(chart, parse_expr("(y_a0^2 - y_a1^2)/2 - y^2/2"), name="klein-gordon")


class TestJetLagrangian:
    """Tests for Lagrangian construction."""

    def test_metric_symbols(self):
        assert metric_symbol_names(2) == ["gu_0_0", "gu_0_1", "gu_1_0", "gu_1_1", "sqrtg"]

    def test_metric_symbols_need_a_metric(self, plane):
        chart = FiberedChart("R", plane, ("y",))
        with pytest.raises(MetricDependenceError):
            JetLagrangian(chart, parse_expr("sqrtg*y"))

    def test_foreign_symbol(self, plane):
        chart = FiberedChart("R", plane, ("y",))
        with pytest.raises(ValueError):
            JetLagrangian(chart, parse_expr("w*y"))

    def test_momentum(self, wave):
        P = momentum(wave)
        assert P[0, 0] is symbol("y_a0")
        assert evaluate(P[1, 0], {"y_a1": 2}) == pytest.approx(-2)

    def test_resolved_substitutes_metric(self, plane):
        g = MetricField(plane, np.array([[parse_expr("1"), ZERO], [ZERO, parse_expr("-4")]], dtype=object))
        lagrangian = free_scalar_lagrangian(g)
        assert lagrangian.metric_dependent
        value = evaluate(lagrangian.resolved, {"phi": 0, "phi_a0": 1, "phi_a1": 0})
        assert value == pytest.approx(0.5 * 2)


class TestEulerLagrange:
    """Tests for the Euler-Lagrange operator."""

    def test_wave_operator(self, wave):
        E = euler_lagrange(wave)[0]
        expected = parse_expr("-y - y_a0_a0 + y_a1_a1")
        names = ["y", "y_a0_a0", "y_a1_a1", "y_a0", "y_a1", "y_a0_a1"]
        assert equal_numeric(E, expected, {name: (-1, 1) for name in names}).ok

    def test_plane_wave_is_critical(self, wave):
        section = Section(wave.chart, (parse_expr("cos(5/4*t - 3/4*x)"),))
        E = euler_lagrange_along(wave, section)[0]
        assert equal_numeric(E, ZERO, wave.chart.base.domain()).ok

    def test_symbolic_and_pulled_back_agree(self, wave):
        section = Section(wave.chart, (parse_expr("t^3*x + sin(x)"),))
        symbolic = section.pullback(euler_lagrange(wave)[0], order=2)
        along = euler_lagrange_along(wave, section)[0]
        assert equal_numeric(symbolic, along, wave.chart.base.domain()).ok

    def test_translation_current(self, wave):
        section = Section(wave.chart, (parse_expr("t^2*x - x^3"),))
        lift = horizontal_lift([1, 0], zero_linear_connection(wave.chart))
        J = current_pullback(lift, wave, section)
        divergence = add(diff(J[0], "t"), diff(J[1], "x"))
        E = euler_lagrange_along(wave, section)[0]
        rhs = E * diff(section[0], "t")
        assert equal_numeric(divergence, rhs, wave.chart.base.domain()).ok


class TestFiniteDifferenceOracles:
    def test_central_difference(self):
        value = finite_difference_oracle(parse_expr("sin(x)*y"), "x", {"x": 0.3, "y": 2.0})
        assert value.real == pytest.approx(2 * math.cos(0.3), rel=1e-8)

    def test_step_must_be_positive(self):
        with pytest.raises(ValueError):
            finite_difference_oracle(parse_expr("x"), "x", {"x": 0.0}, h=0)

    def test_action_variation(self, wave):
        section = Section(wave.chart, (parse_expr("t*x^2 + 1/2"),))
        result = action_variation_oracle(wave, section)
        assert result.ok
        assert result.predicted != 0
