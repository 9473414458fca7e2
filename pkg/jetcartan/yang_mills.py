"""
Yang-Mills fields as sections of the bundle of gauge connections, and the
coupling of matter to them.

The gauge field's own "connection" for the canonical energy tensor is the
overconnection κ↑ built with the Levi-Civita connection of the metric, so
that ∇_bκ_c = -ρ_bc along the field.
"""

import itertools
import logging
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from typing import List, Union

import numpy as np

from .connections import (
    ConnectionBundle, FiberedChart, GeneralConnection, Overconnection, Section, concat_sections,
)
from .gauge import (
    GaugeField, GaugeStructure, formal_gauge_curvature, gauge_curvature, index_lower, overconnection_gauge,
)
from .geometry import AffineConnectionField, DimensionError, MetricField, expr_array, levi_civita
from .matter import DiracModel, ScalarModel, dirac_density, scalar_density
from .symexpr import ZERO, Expr, add, constant, diff, mul, neg, subst_many, symbol
from .variational import (
    VOLUME_SYMBOL, EnergyTensorField, JetLagrangian, canonical_energy_tensor, inverse_metric_symbol,
    metric_stress_tensor, noether_defect,
)

logger = logging.getLogger(__name__)

MINUS_QUARTER = constant(Fraction(-1, 4))
MINUS_HALF = constant(Fraction(-1, 2))


@dataclass(frozen=True, eq=False)
class YangMillsModel:
    """A gauge field κ^I_a on a metric background."""

    metric: MetricField
    field: GaugeField
    name: str = 'yangmills'

    def __post_init__(self):
        if self.field.base != self.metric.chart:
            raise DimensionError("metric and gauge field live on different charts")

    @property
    def structure(self) -> GaugeStructure:
        return self.field.structure

    @cached_property
    def bundle(self) -> ConnectionBundle:
        return self.field.bundle()

    @cached_property
    def base_connection(self) -> AffineConnectionField:
        return levi_civita(self.metric)

    @cached_property
    def overconnection(self) -> Overconnection:
        return overconnection_gauge(self.field, self.base_connection, self.bundle)

    def section(self) -> Section:
        return self.field.as_section(self.bundle)


def yang_mills_density(structure: GaugeStructure, bundle: ConnectionBundle) -> Expr:
    """
    ℓ = -¼g^{ac}g^{bd}ρ̄_abI ρ_cd^I √|g| with ρ in jet symbols, as a metric
    template. ρ̄ is lowered with the frame metric h_IJ, which need not be the
    identity (the built-in su2 frame has h = ½δ).
    """
    m = bundle.m
    rho = formal_gauge_curvature(structure, bundle)
    rho_bar = index_lower(structure, rho)
    terms = []
    for a, b in itertools.combinations(range(m), 2):
        for c, d in itertools.combinations(range(m), 2):
            # the four orderings of each antisymmetric pair contribute alike
            metric = add(mul(inverse_metric_symbol(a, c), inverse_metric_symbol(b, d)),
                         neg(mul(inverse_metric_symbol(a, d), inverse_metric_symbol(b, c))))
            pairing = add(*(mul(rho_bar[a, b, I], rho[c, d, I]) for I in range(structure.rank)))
            terms.append(mul(metric, pairing))
    return mul(MINUS_HALF, add(*terms), symbol(VOLUME_SYMBOL))


def yang_mills_lagrangian(model: YangMillsModel) -> JetLagrangian:
    density = yang_mills_density(model.structure, model.bundle)
    logger.debug(f"Yang-Mills Lagrangian '{model.name}' for '{model.structure.name}' in dimension {model.bundle.m}")
    return JetLagrangian(model.bundle, density, model.metric, model.name)


def _raised_curvature(model: YangMillsModel) -> tuple:
    """(ρ_ab^I, ρ̄^{ab}_I) along the field."""
    g = model.metric
    m, r = g.dim, model.structure.rank
    rho = gauge_curvature(model.field)
    rho_bar = index_lower(model.structure, rho)
    raised = expr_array((m, m, r), lambda a, c, I: add(*(mul(g.inverse[a, p], g.inverse[c, q], rho_bar[p, q, I])
                                                         for p in range(m) for q in range(m)
                                                         if rho_bar[p, q, I] is not ZERO)))
    return rho, raised


def yang_mills_momentum_display(model: YangMillsModel) -> np.ndarray:
    """P^{ac}_I = ρ̄^{ac}_I √|g| along the field, as an [a, c, I] array."""
    _, raised = _raised_curvature(model)
    volume = model.metric.volume
    return expr_array(raised.shape, lambda a, c, I: mul(raised[a, c, I], volume))


def yang_mills_energy_tensor(model: YangMillsModel) -> EnergyTensorField:
    """𝒰^a_b = ℓδ^a_b - P^{ac}_I ∇_bκ_c^I with respect to κ↑."""
    return canonical_energy_tensor(yang_mills_lagrangian(model), model.overconnection)


def yang_mills_energy_display(model: YangMillsModel) -> np.ndarray:
    """(ρ̄^{ac}_I ρ_bc^I - ¼ρ̄^{cd}_I ρ_cd^I δ^a_b)√|g| along the field."""
    g = model.metric
    m, r = g.dim, model.structure.rank
    rho, raised = _raised_curvature(model)
    square = add(*(mul(raised[c, d, I], rho[c, d, I]) for c in range(m) for d in range(m) for I in range(r)))

    def component(a: int, b: int) -> Expr:
        value = add(*(mul(raised[a, c, I], rho[b, c, I]) for c in range(m) for I in range(r)))
        if a == b:
            value = add(value, mul(MINUS_QUARTER, square))
        return mul(value, g.volume)

    return expr_array((m, m), component)


def yang_mills_stress_tensor(model: YangMillsModel) -> np.ndarray:
    """T_ab = ∂ℓ/∂g^{ab} in jet symbols."""
    return metric_stress_tensor(yang_mills_lagrangian(model))


def maxwell_energy_tensor(g: MetricField, potential) -> np.ndarray:
    """
    (F^{ac}F_bc - ¼F^{cd}F_cd δ^a_b)√|g| for F_ab = ∂_aA_b - ∂_bA_a, coded
    directly from the potential.
    """
    m = g.dim
    x = g.chart.coords
    A = list(potential)
    F = expr_array((m, m), lambda a, b: add(diff(A[b], x[a]), neg(diff(A[a], x[b]))))
    upper = expr_array((m, m), lambda a, b: add(*(mul(g.inverse[a, p], g.inverse[b, q], F[p, q])
                                                 for p in range(m) for q in range(m))))
    square = add(*(mul(upper[c, d], F[c, d]) for c in range(m) for d in range(m)))

    def component(a: int, b: int) -> Expr:
        value = add(*(mul(upper[a, c], F[b, c]) for c in range(m)))
        if a == b:
            value = add(value, mul(MINUS_QUARTER, square))
        return mul(value, g.volume)

    return expr_array((m, m), component)


def yang_mills_noether_defect(model: YangMillsModel) -> List[Expr]:
    """∇_a𝒰^a_b - E^c_I∇_bκ_c^I along the field; no force term for a pure gauge field."""
    lagrangian = yang_mills_lagrangian(model)
    return noether_defect(lagrangian, model.overconnection, model.base_connection, model.section(),
                          source=[ZERO] * model.metric.dim)


# ---------------------------------------------------------------------------
# Matter coupled to a gauge field
# ---------------------------------------------------------------------------

MatterModel = Union[ScalarModel, DiracModel]


@dataclass(frozen=True, eq=False)
class CoupledModel:
    """
    Matter plus Yang-Mills with the gauge field promoted to a dynamical field.

    The matter model's own potential is replaced by the gauge field: scalar
    fibers carry the frame matrices l_I, Dirac spinors a U(1) frame acting as
    the scalar l_0.
    """

    matter: MatterModel
    gauge: YangMillsModel
    name: str = 'coupled'

    def __post_init__(self):
        if self.gauge.metric is not self.matter.metric:
            raise ValueError("matter and gauge field must share one metric")
        n = self.gauge.structure.n
        if isinstance(self.matter, ScalarModel) and n != self.matter.n:
            raise DimensionError(f"gauge frame of size {n} does not act on a {self.matter.n}-dimensional fiber")
        if isinstance(self.matter, DiracModel) and n != 1:
            raise DimensionError("Dirac spinors couple to a one-dimensional (U(1)) frame")

    @property
    def metric(self) -> MetricField:
        return self.matter.metric

    @property
    def matter_dim(self) -> int:
        """Fiber dimension of the doubled matter fiber."""
        return self.matter.chart.n

    @cached_property
    def chart(self) -> FiberedChart:
        return self.matter.chart.direct_sum(self.gauge.bundle, self.name)

    @cached_property
    def formal_matrices(self) -> np.ndarray:
        """Block matrices [M_a, 0; 0, -M_aᵀ] on the doubled matter fiber, M_a in gauge fiber symbols."""
        structure = self.gauge.structure
        bundle = self.gauge.bundle
        m, half = self.metric.dim, self.matter_dim // 2
        r = structure.rank

        def generator(a: int, i: int, j: int) -> Expr:
            if isinstance(self.matter, DiracModel):
                spin = self.matter.spin_matrices[a, i, j]
                if i != j:
                    return spin
                return add(spin, *(mul(bundle.coordinate_symbol(a, I), structure.frame[I][0, 0]) for I in range(r)))
            return add(*(mul(bundle.coordinate_symbol(a, I), structure.frame[I][i, j]) for I in range(r)))

        M = expr_array((m, half, half), generator)

        def block(a: int, i: int, j: int) -> Expr:
            if i < half and j < half:
                return M[a, i, j]
            if i >= half and j >= half:
                return neg(M[a, j - half, i - half])
            return ZERO

        return expr_array((m, 2 * half, 2 * half), block)

    def _gauge_values(self) -> dict:
        return self.gauge.section().value_substitution()

    @cached_property
    def connection(self) -> GeneralConnection:
        """The matter connection at the given gauge field on matter rows, κ↑ on gauge rows."""
        chart = self.chart
        m, k = self.metric.dim, self.matter_dim
        values = self._gauge_values()
        y = [symbol(name) for name in chart.fiber[:k]]
        over = self.gauge.overconnection.components

        def component(sigma: int, a: int) -> Expr:
            if sigma < k:
                return add(*(mul(subst_many(self.formal_matrices[a, sigma, tau], values), y[tau]) for tau in range(k)))
            return over[sigma - k, a]

        return GeneralConnection(chart, expr_array((chart.n, m), component))

    def lagrangian(self) -> JetLagrangian:
        chart = self.chart
        m, k = self.metric.dim, self.matter_dim
        M = self.formal_matrices
        y = [symbol(name) for name in chart.fiber[:k]]
        nabla = expr_array((m, k), lambda a, s: add(chart.jet_symbol(s, a),
                                                     *(neg(mul(M[a, s, t], y[t])) for t in range(k))))
        if isinstance(self.matter, DiracModel):
            matter = dirac_density(self.matter, chart, nabla)
        else:
            matter = scalar_density(self.matter, chart, nabla)
        gauge = yang_mills_density(self.gauge.structure, self.gauge.bundle)
        return JetLagrangian(chart, add(matter, gauge), self.metric, self.name, tuple(sorted(self.matter.mass.free)))

    def section(self, matter_section: Section) -> Section:
        return concat_sections(self.chart, matter_section, self.gauge.section())


def matter_gauge_total_conservation(model: CoupledModel, matter_section: Section) -> List[Expr]:
    """
    ∇_a(𝒰_matter + 𝒰_gauge)^a_b - Σ_σ E_σ∇_bφ^σ over matter and gauge
    fields alike; vanishes for every section, so the total energy tensor is
    conserved whenever both field equations hold.
    """
    return noether_defect(model.lagrangian(), model.connection, model.gauge.base_connection,
                          model.section(matter_section), source=[ZERO] * model.metric.dim)
