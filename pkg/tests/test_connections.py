"""Tests for fibered charts, sections and connections."""

import numpy as np
import pytest

from jetcartan.connections import (
    FiberedChart,
    LinearConnection,
    Section,
    curvature,
    dual_connection,
    linear_curvature,
    overconnection_linear,
    second_derivative_vanishes,
    section_covariant_derivative,
    zero_linear_connection,
)
from jetcartan.exprtext import parse_expr
from jetcartan.geometry import AffineConnectionField, DimensionError, NonSymmetricConnectionError, symmetric_connection
from jetcartan.symexpr import ZERO, add, equal_numeric, evaluate, mul, symbol


@pytest.fixture
def line_bundle(plane):
    return FiberedChart("E", plane, ("y0", "y1"))


@pytest.fixture
def kappa(line_bundle):
    matrices = np.empty((2, 2, 2), dtype=object)
    texts = [[["t", "x^2"], ["0", "1"]], [["x*t", "0"], ["t", "-x"]]]
    for a in range(2):
        for i in range(2):
            for j in range(2):
                matrices[a, i, j] = parse_expr(texts[a][i][j])
    return LinearConnection(line_bundle, matrices)


class TestFiberedChart:
    def test_jet_names(self, line_bundle):
        assert line_bundle.jet(1, 0) == "y1_a0"
        assert line_bundle.jet2(0, 1, 0) == "y0_a0_a1"
        assert line_bundle.first_jet_names() == ["y0_a0", "y0_a1", "y1_a0", "y1_a1"]

    def test_dual_and_direct_sum(self, line_bundle):
        dual = line_bundle.dual()
        assert dual.fiber == ("y0bar", "y1bar")
        total = line_bundle.direct_sum(dual)
        assert total.n == 4
        assert total.domain()["y1bar"] == (-1.0, 1.0)

    def test_fiber_cannot_shadow_base(self, plane):
        with pytest.raises(ValueError):
            FiberedChart("E", plane, ("t",))


class TestSection:
    def test_pullback(self, line_bundle):
        phi = Section(line_bundle, (parse_expr("t*x"), parse_expr("x^2")))
        e = symbol("y0_a1") + symbol("y1")
        assert evaluate(phi.pullback(e), {"t": 2, "x": 3}) == pytest.approx(11)

    def test_second_jets(self, line_bundle):
        phi = Section(line_bundle, (parse_expr("t^2*x"), parse_expr("0")))
        assert evaluate(phi.pullback(symbol("y0_a0_a1")), {"t": 2, "x": 3}) == pytest.approx(4)

    def test_rejects_fiber_variables(self, line_bundle):
        with pytest.raises(ValueError):
            Section(line_bundle, (symbol("y0"), ZERO))

    def test_wrong_length(self, line_bundle):
        with pytest.raises(DimensionError):
            Section(line_bundle, (ZERO,))


class TestLinearConnection:
    """Tests for linear connections and their curvature."""

    def test_rejects_fiber_dependence(self, line_bundle):
        matrices = np.full((2, 2, 2), ZERO, dtype=object)
        matrices[0, 0, 0] = symbol("y0")
        with pytest.raises(ValueError):
            LinearConnection(line_bundle, matrices)

    def test_general_curvature_is_linear(self, kappa):
        chart = kappa.chart
        rho_general = curvature(kappa.general())
        rho_linear = linear_curvature(kappa)
        y = [symbol(name) for name in chart.fiber]
        for a in range(2):
            for b in range(2):
                for i in range(2):
                    contracted = add(*(mul(rho_linear[a, b, i, j], y[j]) for j in range(2)))
                    assert equal_numeric(rho_general[a, b, i], contracted, chart.domain()).ok

    def test_curvature_is_antisymmetric(self, kappa):
        rho = linear_curvature(kappa)
        assert equal_numeric(rho[0, 1, 1, 0], -rho[1, 0, 1, 0], kappa.chart.base.domain()).ok
        assert rho[0, 0, 0, 0] is ZERO

    def test_zero_connection_is_flat(self, line_bundle):
        rho = linear_curvature(zero_linear_connection(line_bundle))
        assert all(v is ZERO for v in rho.reshape(-1))

    def test_covariant_derivative_sign(self, kappa):
        phi = Section(kappa.chart, (parse_expr("x"), parse_expr("1")))
        nabla = section_covariant_derivative(kappa, phi)
        # ∇_t φ^0 = ∂_t x - (t*x + x^2*1)
        assert evaluate(nabla[0, 0], {"t": 2, "x": 3}) == pytest.approx(-(6 + 9))

    def test_dual_connection(self, kappa):
        dual = dual_connection(kappa)
        assert dual.chart.fiber == ("y0bar", "y1bar")
        assert evaluate(dual.matrices[0, 1, 0], {"t": 2, "x": 3}) == pytest.approx(-9)


class TestOverconnection:
    """Tests for the overconnection induced on the bundle of linear connections."""

    @pytest.fixture
    def gamma(self, plane):
        texts = {(0, 0, 0): "x", (0, 0, 1): "t*x", (1, 1, 1): "t^2"}
        return symmetric_connection(plane, lambda c, a, b: parse_expr(texts.get((c, a, b), "0")))

    def test_components_are_affine_in_the_fiber(self, kappa, gamma):
        over = overconnection_linear(kappa, gamma)
        assert over.bundle.slots == (2, 2, 2)
        for component in over.components.reshape(-1):
            assert second_derivative_vanishes(component, over.bundle.fiber)

    def test_detects_quadratic_dependence(self, kappa, gamma):
        fiber = overconnection_linear(kappa, gamma).bundle.fiber
        assert not second_derivative_vanishes(mul(symbol(fiber[0]), symbol(fiber[3])), fiber)
        assert second_derivative_vanishes(add(symbol(fiber[0]), parse_expr("t*x")), fiber)

    def test_needs_symmetric_base_connection(self, kappa, plane):
        gamma = np.full((2, 2, 2), ZERO, dtype=object)
        gamma[0, 0, 1] = symbol("x")
        with pytest.raises(NonSymmetricConnectionError):
            overconnection_linear(kappa, AffineConnectionField(plane, gamma))
