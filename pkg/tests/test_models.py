"""Tests for the scalar, Dirac, Yang-Mills and gravity models."""

import numpy as np
import pytest

from jetcartan.checks import random_dirac, random_metric, random_scalar, sample_chart
from jetcartan.connections import FiberedChart, LinearConnection, zero_linear_connection
from jetcartan.exprtext import parse_expr
from jetcartan.gauge import GaugeField, builtin_structure
from jetcartan.geometry import AffineConnectionField, Chart, DimensionError, MetricField
from jetcartan.gravity import (
    GravityModel,
    KomarData,
    einstein_density,
    gravity_momentum,
    komar_current,
    komar_divergence,
)
from jetcartan.matter import (
    DiracModel,
    ScalarModel,
    clifford_defects,
    dirac_lagrangian,
    dirac_onshell_divergence_rhs,
    gamma_matrices,
    scalar_lagrangian,
    scalar_momentum_display,
    scalar_onshell_divergence_rhs,
)
from jetcartan.symexpr import ZERO, constant, equal_numeric, evaluate, mul
from jetcartan.variational import curvature_source, euler_lagrange_along, momentum
from jetcartan.yang_mills import YangMillsModel, yang_mills_lagrangian


def diagonal_metric(chart, entries, signature="lorentzian"):
    m = chart.dim
    array = np.full((m, m), ZERO, dtype=object)
    for a, text in enumerate(entries):
        array[a, a] = parse_expr(text)
    return MetricField(chart, array, signature)


@pytest.fixture
def flat_plane(plane):
    return diagonal_metric(plane, ["1", "-1"])


class TestScalarModel:
    """Tests for the charged scalar."""

    def test_charts(self, flat_plane):
        fiber = FiberedChart("C", flat_plane.chart, ("phi0",))
        model = ScalarModel(flat_plane, zero_linear_connection(fiber), mass=1)
        assert model.n == 1
        assert model.chart.fiber == ("phi0", "phi0bar")

    def test_free_plane_wave_is_critical(self, flat_plane):
        fiber = FiberedChart("C", flat_plane.chart, ("phi0",))
        model = ScalarModel(flat_plane, zero_linear_connection(fiber), mass=1)
        wave = parse_expr("cos(5/4*t - 3/4*x)")
        section = model.section([wave], [wave])
        residual = euler_lagrange_along(scalar_lagrangian(model), section)
        assert equal_numeric(residual, [ZERO, ZERO], flat_plane.chart.domain()).ok

    def test_charts_must_match(self, flat_plane):
        other = Chart("Q", ("t", "x"), ((0, 1), (0, 1)))
        fiber = FiberedChart("C", other, ("phi0",))
        with pytest.raises(DimensionError):
            ScalarModel(flat_plane, zero_linear_connection(fiber))


class TestDiracModel:
    """Tests for gamma matrices and the Dirac model."""

    @pytest.mark.parametrize("dim,eta", [(2, (1, -1)), (4, (1, -1, -1, -1))])
    def test_clifford_relation(self, dim, eta):
        assert clifford_defects(gamma_matrices(dim), eta) == []

    def test_wrong_signature_is_detected(self):
        assert clifford_defects(gamma_matrices(2), (1, 1)) == [(1, 1)]

    def test_unsupported_dimension(self):
        with pytest.raises(DimensionError):
            gamma_matrices(3)

    def test_metric_from_tetrad(self, plane):
        tetrad = [[parse_expr("2"), ZERO], [ZERO, parse_expr("1 + t^2")]]
        model = DiracModel(plane, tetrad, (ZERO, ZERO), mass=1)
        assert model.spinor_dim == 2
        assert evaluate(model.metric[0, 0], {}) == pytest.approx(4)
        assert evaluate(model.metric[1, 1], {"t": 1}) == pytest.approx(-4)

    def test_potential_length(self, plane):
        tetrad = [[constant(1), ZERO], [ZERO, constant(1)]]
        with pytest.raises(DimensionError):
            DiracModel(plane, tetrad, (ZERO,))


class TestYangMillsModel:
    def test_section_layout(self, flat_plane):
        su2 = builtin_structure("su2")
        components = np.array([[parse_expr("x"), ZERO], [ZERO, ZERO], [ZERO, parse_expr("t")]], dtype=object)
        model = YangMillsModel(flat_plane, GaugeField(su2, flat_plane.chart, components))
        assert len(model.section().components) == 2 * 3
        assert yang_mills_lagrangian(model).metric is flat_plane

    def test_charts_must_match(self, flat_plane):
        other = Chart("Q", ("t", "x"), ((0, 1), (0, 1)))
        field = GaugeField(builtin_structure("u1"), other, np.array([[ZERO, ZERO]], dtype=object))
        with pytest.raises(DimensionError):
            YangMillsModel(flat_plane, field)


class TestGravityModel:
    """Tests for the gravitational model and Komar currents."""

    def test_sphere_einstein_density_vanishes(self):
        chart = Chart("S2", ("th", "ph"), ((0.3, 2.8), (-3.0, 3.0)))
        g = diagonal_metric(chart, ["1", "sin(th)^2"], "riemannian")
        G = einstein_density(GravityModel(g))
        assert equal_numeric(list(np.asarray(G).reshape(-1)), [ZERO] * 4, chart.domain()).ok

    def test_momentum_is_antisymmetric(self, flat_plane):
        P = gravity_momentum(flat_plane)
        for a in range(2):
            for b in range(2):
                for c in range(2):
                    for d in range(2):
                        assert equal_numeric(P[a, b, c, d], -P[b, a, c, d], flat_plane.chart.domain()).ok

    def test_rejects_torsion(self, flat_plane):
        gamma = np.full((2, 2, 2), ZERO, dtype=object)
        gamma[0, 0, 1] = parse_expr("x")
        with pytest.raises(ValueError):
            GravityModel(flat_plane, AffineConnectionField(flat_plane.chart, gamma))

    def test_komar_current_is_conserved(self):
        chart = Chart("polar", ("t", "r"), ((-1.0, 1.0), (1.0, 2.0)))
        g = diagonal_metric(chart, ["r^2", "-1/r"])
        data = KomarData(g, (parse_expr("r"), parse_expr("t*r")))
        assert equal_numeric(komar_divergence(data), ZERO, chart.domain()).ok
        current = komar_current(data)
        assert len(current.current) == 2
        assert current.superpotential.shape == (2, 2)

    def test_komar_vector_length(self, flat_plane):
        with pytest.raises(ValueError):
            KomarData(flat_plane, (constant(1),))


class TestOnshellForces:
    """Closed-form divergence forces and momenta of the matter models."""

    def test_flat_abelian_potential_exerts_no_force(self, flat_plane):
        fiber = FiberedChart("C", flat_plane.chart, ("phi0",))
        matrices = np.array([[[parse_expr("i*x")]], [[parse_expr("i*t")]]], dtype=object)
        model = ScalarModel(flat_plane, LinearConnection(fiber, matrices), mass=1)
        section = model.section([parse_expr("exp(i*t)*x")], [parse_expr("t^2 + x")])
        rhs = scalar_onshell_divergence_rhs(model, section)
        assert equal_numeric(rhs, [ZERO, ZERO], flat_plane.chart.domain()).ok

    def test_scalar_force_is_curvature_source(self):
        metric = random_metric(sample_chart(2), np.random.default_rng(3))
        model, section = random_scalar(metric, np.random.default_rng(4))
        force = [mul(e, metric.volume) for e in scalar_onshell_divergence_rhs(model, section)]
        source = curvature_source(scalar_lagrangian(model), model.connection, section)
        assert equal_numeric(force, source, metric.chart.domain()).ok

    def test_scalar_momentum(self):
        metric = random_metric(sample_chart(2), np.random.default_rng(5))
        model, section = random_scalar(metric, np.random.default_rng(6))
        P = momentum(scalar_lagrangian(model))
        along = [section.pullback(P[a, i], order=1) for a in range(2) for i in range(model.n)]
        display = list(scalar_momentum_display(model, section).reshape(-1))
        assert equal_numeric(along, display, metric.chart.domain()).ok

    def test_constant_potential_exerts_no_force_on_spinor(self, plane):
        tetrad = [[constant(1), ZERO], [ZERO, constant(1)]]
        model = DiracModel(plane, tetrad, (constant(2), constant(-1)), mass=1)
        section = model.section([parse_expr("exp(i*x)"), parse_expr("t")], [parse_expr("x^2"), parse_expr("1 + t")])
        rhs = dirac_onshell_divergence_rhs(model, section)
        assert all(evaluate(e, {"t": 0.3, "x": -0.4}) == pytest.approx(0) for e in rhs)

    @pytest.mark.slow
    def test_canonical_tensor_feels_twice_the_spinor_force(self):
        model, section = random_dirac(np.random.default_rng(8))
        force = [mul(2, e, model.metric.volume) for e in dirac_onshell_divergence_rhs(model, section)]
        source = curvature_source(dirac_lagrangian(model), model.connection, section)
        assert equal_numeric(force, source, model.base.domain()).ok


class TestYangMillsDensity:
    def test_su2_frame_metric_scales_the_density(self, flat_plane):
        su2 = builtin_structure("su2")
        components = np.array([[ZERO, ZERO], [ZERO, ZERO], [ZERO, parse_expr("t")]], dtype=object)
        model = YangMillsModel(flat_plane, GaugeField(su2, flat_plane.chart, components))
        ell = model.section().pullback(yang_mills_lagrangian(model).resolved, order=1)
        # ρ_tx = -1 on the third generator and h = ½
        assert evaluate(ell, {"t": 0.2, "x": 0.7}) == pytest.approx(0.25)
