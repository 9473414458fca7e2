"""Tests for charts, metrics and base connections."""

import math

import numpy as np
import pytest

from jetcartan.connections import FiberedChart, LinearConnection
from jetcartan.geometry import (
    AffineConnectionField,
    Chart,
    DimensionError,
    MetricField,
    NonSymmetricConnectionError,
    SingularMetricError,
    TensorField,
    breve,
    christoffel_symbols,
    covariant_divergence,
    curvature_data,
    densitize,
    divergence,
    einstein,
    hodge_star,
    levi_civita,
    levi_civita_symbol,
    torsion_form,
)
from jetcartan.exprtext import parse_expr
from jetcartan.symexpr import ZERO, add, constant, diff, equal_numeric, evaluate, mul, neg, symbol


def metric_from(chart, rows, signature=""):
    m = chart.dim
    array = np.empty((m, m), dtype=object)
    for a in range(m):
        for b in range(a, m):
            array[a, b] = array[b, a] = parse_expr(rows[a][b])
    return MetricField(chart, array, signature)


@pytest.fixture
def sphere():
    chart = Chart("S2", ("th", "ph"), ((0.3, 2.8), (-3.0, 3.0)))
    return metric_from(chart, [["1", "0"], ["0", "sin(th)^2"]], "riemannian")


@pytest.fixture
def minkowski():
    chart = Chart("R4", ("t", "x", "y", "z"))
    return metric_from(chart, [["1", "0", "0", "0"], ["0", "-1", "0", "0"],
                               ["0", "0", "-1", "0"], ["0", "0", "0", "-1"]], "lorentzian")


class TestChart:
    def test_default_box(self):
        chart = Chart("M", ("x", "y"))
        assert chart.domain() == {"x": (-1.0, 1.0), "y": (-1.0, 1.0)}
        assert chart.dim == 2

    def test_value_equality(self):
        assert Chart("M", ("x",)) == Chart("M", ("x",))

    def test_needs_coordinates(self):
        with pytest.raises(DimensionError):
            Chart("M", ())

    def test_repeated_coordinates(self):
        with pytest.raises(ValueError):
            Chart("M", ("x", "x"))

    def test_box_length_mismatch(self):
        with pytest.raises(DimensionError):
            Chart("M", ("x", "y"), ((0, 1),))

    def test_empty_interval(self):
        with pytest.raises(ValueError):
            Chart("M", ("x",), ((1, 1),))


class TestMetricField:
    """Tests for metric construction and derived quantities."""

    def test_inverse(self, plane):
        g = metric_from(plane, [["2", "t"], ["t", "x^2 + 3"]])
        for a in range(2):
            for b in range(2):
                product = sum((g.inverse[a, c] * g[c, b] for c in range(2)), ZERO)
                expected = constant(1 if a == b else 0)
                assert equal_numeric(product, expected, plane.domain()).ok

    def test_volume_and_sign(self, minkowski):
        assert minkowski.det_sign == -1
        assert evaluate(minkowski.volume, {}) == pytest.approx(1)

    def test_rejects_asymmetric_components(self, plane):
        x, t = symbol("x"), symbol("t")
        with pytest.raises(ValueError):
            MetricField(plane, np.array([[constant(1), x], [t, constant(1)]], dtype=object))

    def test_rejects_wrong_shape(self, plane):
        with pytest.raises(DimensionError):
            MetricField(plane, np.array([[constant(1)]], dtype=object))

    def test_degenerate_metric(self, plane):
        g = metric_from(plane, [["x", "0"], ["0", "1"]])
        with pytest.raises(SingularMetricError):
            g.validate()

    def test_raise_and_lower(self, sphere):
        v = [symbol("th"), constant(2)]
        back = sphere.raise_index(sphere.lower_index(v))
        assert equal_numeric(back, v, sphere.chart.domain()).ok


class TestConnections:
    """Tests for Levi-Civita connections and curvature."""

    def test_levi_civita_is_negated_christoffel(self, sphere):
        chris = christoffel_symbols(sphere)
        lc = levi_civita(sphere)
        assert lc.symmetric
        point = {"th": 1.0, "ph": 0.0}
        # Γ^th_phph = -sin cos in the textbook convention
        assert evaluate(chris[0, 1, 1], point) == pytest.approx(-math.sin(1) * math.cos(1))
        assert evaluate(lc.coefficient(1, 0, 1), point) == pytest.approx(math.sin(1) * math.cos(1))

    def test_flat_metric_has_zero_connection(self, minkowski):
        lc = levi_civita(minkowski)
        assert all(c is ZERO for c in lc.gamma.reshape(-1))

    def test_sphere_scalar_curvature(self, sphere):
        data = curvature_data(sphere, levi_civita(sphere))
        assert evaluate(data.scalar, {"th": 1.2, "ph": 0.4}) == pytest.approx(-2)

    def test_einstein_vanishes_in_two_dimensions(self, sphere):
        G = einstein(sphere)
        assert equal_numeric(G.flat(), [ZERO] * 4, sphere.chart.domain()).ok

    def test_symmetric_flag_is_checked(self, plane):
        gamma = np.full((2, 2, 2), ZERO, dtype=object)
        gamma[0, 0, 1] = symbol("x")
        with pytest.raises(NonSymmetricConnectionError):
            AffineConnectionField(plane, gamma, symmetric=True)

    def test_torsion_form(self, plane):
        gamma = np.full((2, 2, 2), ZERO, dtype=object)
        gamma[1, 0, 1] = parse_expr("x/3")
        tau = torsion_form(AffineConnectionField(plane, gamma))
        assert evaluate(tau[0], {"x": 0.6}) == pytest.approx(0.2)
        assert tau[1] is ZERO

    def test_divergence_of_constant_vector_in_polar(self):
        chart = Chart("polar", ("r", "p"), ((1.0, 2.0), (-3.0, 3.0)))
        g = metric_from(chart, [["1", "0"], ["0", "r^2"]], "riemannian")
        v = TensorField(chart, "u", np.array([constant(1), constant(0)], dtype=object))
        div = divergence(v, levi_civita(g))
        # ∇_a v^a = (1/r) ∂_r (r v^r)
        assert evaluate(div[()], {"r": 1.5, "p": 0.0}) == pytest.approx(1 / 1.5)


class TestDensities:
    """Tests for densities and their covariant divergence."""

    @pytest.fixture
    def field(self, sphere):
        return TensorField(sphere.chart, "u", np.array([parse_expr("th*cos(ph)"), parse_expr("sin(th)*ph")],
                                                       dtype=object))

    def test_breve_undoes_densitize(self, sphere, field):
        density = densitize(field, sphere)
        assert density.density
        plain = breve(density, sphere)
        assert not plain.density
        assert equal_numeric(plain.flat(), field.flat(), sphere.chart.domain()).ok

    def test_density_divergence_is_densitized_divergence(self, sphere, field):
        lc = levi_civita(sphere)
        lhs = covariant_divergence(densitize(field, sphere), lc)
        rhs = densitize(divergence(field, lc), sphere)
        assert lhs.density
        assert equal_numeric(lhs[()], rhs[()], sphere.chart.domain()).ok

    def test_matches_bracket_form(self, plane):
        fibered = FiberedChart("E", plane, ("y0", "y1"))
        kappa = LinearConnection(fibered, np.array(
            [[[parse_expr(e) for e in row] for row in block]
             for block in [[["t*x", "x^2"], ["0", "-t"]], [["1", "t"], ["x", "t*x - 1"]]]], dtype=object))
        gamma = np.array([[[parse_expr(e) for e in row] for row in block]
                          for block in [[["x", "t"], ["0", "1"]], [["t^2", "0"], ["x*t", "-x"]]]], dtype=object)
        connection = AffineConnectionField(plane, gamma)
        xi = TensorField(plane, "uf", np.array([[parse_expr("sin(t)*x"), parse_expr("x^2")],
                                                [parse_expr("t - x"), parse_expr("cos(x)*t")]], dtype=object),
                         density=True)
        general = kappa.general().components
        x = plane.coords
        tau = [add(*(add(gamma[c, a, c], neg(gamma[c, c, a])) for c in range(2))) for a in range(2)]
        expected = [add(*(diff(xi[a, i], x[a]) for a in range(2)),
                        *(neg(mul(xi[a, j], diff(general[i, a], fibered.fiber[j])))
                          for a in range(2) for j in range(2)),
                        *(mul(tau[a], xi[a, i]) for a in range(2)))
                    for i in range(2)]
        result = covariant_divergence(xi, connection, kappa)
        assert result.signature == "f"
        assert equal_numeric(result.flat(), expected, plane.domain()).ok

    def test_rejects_lower_slot(self, plane):
        xi = TensorField(plane, "d", np.array([symbol("t"), symbol("x")], dtype=object))
        with pytest.raises(DimensionError):
            covariant_divergence(xi, AffineConnectionField(plane, np.full((2, 2, 2), ZERO, dtype=object)))


class TestHodgeStar:
    """Tests for the Hodge star on 2-forms."""

    def dt_dx(self, chart):
        form = np.full((4, 4), ZERO, dtype=object)
        form[0, 1] = constant(1)
        form[1, 0] = constant(-1)
        return TensorField(chart, "dd", form)

    @pytest.mark.parametrize("orientation", [1, -1])
    def test_minkowski_convention(self, minkowski, orientation):
        star = hodge_star(minkowski, self.dt_dx(minkowski.chart), orientation)
        assert evaluate(star[2, 3], {}) == pytest.approx(-orientation)
        assert evaluate(star[3, 2], {}) == pytest.approx(orientation)

    def test_double_star_is_minus_one(self, minkowski):
        form = self.dt_dx(minkowski.chart)
        twice = hodge_star(minkowski, hodge_star(minkowski, form))
        assert evaluate(twice[0, 1], {}) == pytest.approx(-1)

    def test_requires_dimension_four(self, sphere):
        form = TensorField(sphere.chart, "dd", np.full((2, 2), ZERO, dtype=object))
        with pytest.raises(DimensionError):
            hodge_star(sphere, form)

    def test_alternating_symbol(self):
        eps = levi_civita_symbol(3)
        assert eps[0, 1, 2] == 1
        assert eps[1, 0, 2] == -1
        assert eps[0, 0, 1] == 0
