"""Tests for gauge structures and gauge fields."""

import numpy as np
import pytest

from jetcartan.connections import FiberedChart, linear_curvature, second_derivative_vanishes
from jetcartan.exprtext import parse_expr
from jetcartan.gauge import (
    FrameError,
    GaugeField,
    GaugeStructure,
    builtin_structure,
    expand_lie_components,
    gauge_curvature,
    overconnection_gauge,
    structure_constants,
)
from jetcartan.geometry import DimensionError, symmetric_connection
from jetcartan.symexpr import ZERO, constant, equal_numeric


def field_from(structure, chart, rows):
    components = np.empty((structure.rank, chart.dim), dtype=object)
    for I, row in enumerate(rows):
        for a, text in enumerate(row):
            components[I, a] = parse_expr(text)
    return GaugeField(structure, chart, components)


class TestGaugeStructure:
    """Tests for frames and structure constants."""

    def test_su2_constants(self):
        su2 = builtin_structure("su2")
        assert su2.rank == 3
        assert su2.n == 2
        assert not su2.abelian
        assert su2.c[2, 0, 1] is constant(-1)
        assert su2.c[2, 1, 0] is constant(1)
        assert su2.h[0, 0] is constant(0.5)

    def test_u1_is_abelian(self):
        u1 = builtin_structure("u1")
        assert u1.abelian
        assert u1.c[0, 0, 0] is ZERO

    def test_unknown_builtin(self):
        with pytest.raises(FrameError):
            builtin_structure("so3")

    def test_rejects_hermitian_element(self):
        with pytest.raises(FrameError):
            structure_constants([np.array([[constant(1)]], dtype=object)])

    def test_rejects_non_orthogonal_pair(self):
        a = np.array([[constant(0, 1), ZERO], [ZERO, ZERO]], dtype=object)
        b = np.array([[constant(0, 1), ZERO], [ZERO, constant(0, 1)]], dtype=object)
        with pytest.raises(FrameError) as info:
            GaugeStructure("bad", (a, b))
        assert info.value.pair == (0, 1)

    def test_rejects_open_span(self):
        half_i = constant(0, 0.5)
        half = constant(0.5)
        a = np.array([[ZERO, half_i], [half_i, ZERO]], dtype=object)
        b = np.array([[ZERO, half], [-half, ZERO]], dtype=object)
        with pytest.raises(FrameError):
            GaugeStructure("open", (a, b))

    def test_rejects_symbolic_entries(self):
        with pytest.raises(FrameError):
            structure_constants([np.array([[parse_expr("x")]], dtype=object)])


class TestGaugeField:
    """Tests for gauge fields, their curvature and frame expansion."""

    def test_expansion_matches_lie_curvature(self, plane):
        su2 = builtin_structure("su2")
        kappa = field_from(su2, plane, [["x", "t^2"], ["1", "x*t"], ["t", "0"]])
        fiber = FiberedChart("V", plane, ("v0", "v1"))
        linear = linear_curvature(kappa.expand(fiber))
        lie = gauge_curvature(kappa)
        for a in range(2):
            for b in range(2):
                expanded = expand_lie_components(su2, lie[a, b])
                assert equal_numeric(list(linear[a, b].reshape(-1)), list(expanded.reshape(-1)),
                                     plane.domain()).ok

    def test_abelian_curvature_is_field_strength(self, plane):
        kappa = field_from(builtin_structure("u1"), plane, [["x^2", "t*x"]])
        rho = gauge_curvature(kappa)
        # ρ_tx = ∂_x κ_t - ∂_t κ_x = 2x - x
        assert equal_numeric(rho[0, 1, 0], parse_expr("x"), plane.domain()).ok

    def test_rejects_fiber_dependence(self, plane):
        with pytest.raises(ValueError):
            field_from(builtin_structure("u1"), plane, [["y", "0"]])

    def test_expand_needs_matching_fiber(self, plane):
        kappa = field_from(builtin_structure("su2"), plane, [["0", "0"]] * 3)
        with pytest.raises(DimensionError):
            kappa.expand(FiberedChart("V", plane, ("v0",)))

    def test_overconnection_is_affine(self, plane):
        kappa = field_from(builtin_structure("su2"), plane, [["x", "t^2"], ["1", "x*t"], ["t", "0"]])
        gamma = symmetric_connection(plane, lambda c, a, b: parse_expr("t*x") if c == a else ZERO)
        over = overconnection_gauge(kappa, gamma)
        assert over.components.shape == (6, 2)
        for component in over.components.reshape(-1):
            assert second_derivative_vanishes(component, over.bundle.fiber)
