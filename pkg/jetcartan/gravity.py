"""
Metric-affine gravity ℓ = R√|g| on the bundle of base connections, its
energy tensor, the Einstein equations read off from conserved currents, and
the Komar current with the lift that produces it.

Fiber coordinates of the connection bundle are y_b^c_d = Γ_b^c_d, named
'G_{b}_{c}_{d}'.
"""

import logging
from dataclasses import dataclass, field
from functools import cached_property
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .connections import (
    ConnectionBundle, FiberedChart, LinearConnection, Overconnection, Section, connection_as_section,
    connection_bundle, overconnection_linear,
)
from .geometry import (
    AffineConnectionField, CurvatureData, MetricField, TensorField, base_curvature, covariant_derivative,
    curvature_data, divergence, expr_array, levi_civita,
)
from .symexpr import HALF, ZERO, Expr, ExprLike, add, as_expr, diff, mul, neg, subst_many, symbol
from .variational import (
    VOLUME_SYMBOL, EnergyTensorField, JetLagrangian, LiftField, canonical_energy_tensor, current_pullback,
    curvature_source, horizontal_lift, inverse_metric_symbol, lift_from_current, metric_stress_tensor,
    noether_residual, raise_first,
)

logger = logging.getLogger(__name__)

CONNECTION_PREFIX = 'G'


@dataclass(frozen=True, eq=False)
class GravityModel:
    """
    The metric-affine pair (g, Γ). Γ defaults to the Levi-Civita connection
    of g but may be any symmetric connection.
    """

    metric: MetricField
    connection: Optional[AffineConnectionField] = None
    name: str = 'gravity'

    def __post_init__(self):
        if self.connection is None:
            object.__setattr__(self, 'connection', levi_civita(self.metric))
        self.connection.require_symmetric()

    @property
    def dim(self) -> int:
        return self.metric.dim

    @cached_property
    def bundle(self) -> ConnectionBundle:
        m = self.dim
        return connection_bundle(self.metric.chart, CONNECTION_PREFIX, (m, m, m))

    @cached_property
    def tangent_connection(self) -> LinearConnection:
        """Γ as a linear connection of TM."""
        chart = self.metric.chart
        tangent = FiberedChart('TM', chart, tuple(f'tm{a}' for a in range(chart.dim)))
        return LinearConnection(tangent, self.connection.as_linear_matrices())

    @cached_property
    def overconnection(self) -> Overconnection:
        return overconnection_linear(self.tangent_connection, self.connection, self.bundle)

    @cached_property
    def curvature(self) -> CurvatureData:
        return curvature_data(self.metric, self.connection)

    def section(self) -> Section:
        return connection_as_section(self.tangent_connection, self.bundle)


def gravity_density(bundle: ConnectionBundle) -> Expr:
    """g^{bd} R_bc^c_d √|g| with the curvature written in jet symbols of the connection bundle."""
    m = bundle.m
    y = expr_array((m, m, m), lambda b, c, d: bundle.coordinate_symbol(b, c, d))
    dy = expr_array((m, m, m, m), lambda a, b, c, d: symbol(bundle.jet_of((b, c, d), a)))   # ∂_aΓ_b^c_d

    def ricci(b: int, d: int) -> Expr:
        terms = []
        for c in range(m):
            # R_bc^c_d = ∂_cΓ_b^c_d - ∂_bΓ_c^c_d + Γ_b^c_e Γ_c^e_d - Γ_c^c_e Γ_b^e_d
            terms.append(dy[c, b, c, d])
            terms.append(neg(dy[b, c, c, d]))
            for e in range(m):
                terms.append(mul(y[b, c, e], y[c, e, d]))
                terms.append(neg(mul(y[c, c, e], y[b, e, d])))
        return add(*terms)

    scalar = add(*(mul(inverse_metric_symbol(b, d), ricci(b, d)) for b in range(m) for d in range(m)))
    return mul(scalar, symbol(VOLUME_SYMBOL))


def gravity_lagrangian(model: GravityModel) -> JetLagrangian:
    logger.debug(f"Gravity Lagrangian '{model.name}' in dimension {model.dim}")
    return JetLagrangian(model.bundle, gravity_density(model.bundle), model.metric, model.name)


def gravity_momentum(g: MetricField) -> np.ndarray:
    """P^{ab}_{cd} = (g^{bd}δ^a_c - g^{ad}δ^b_c)√|g|, as an [a, b, c, d] array."""
    m = g.dim
    volume = g.volume

    def component(a: int, b: int, c: int, d: int) -> Expr:
        terms = []
        if a == c:
            terms.append(g.inverse[b, d])
        if b == c:
            terms.append(neg(g.inverse[a, d]))
        return mul(add(*terms), volume)

    return expr_array((m, m, m, m), component)


def gravity_energy_tensor(model: GravityModel) -> EnergyTensorField:
    """𝒰^a_b = R√|g|δ^a_b - P^{ae}_{cd}∇_bΓ_e^c_d with respect to Γ↑."""
    return canonical_energy_tensor(gravity_lagrangian(model), model.overconnection)


def einstein_density(model: GravityModel) -> np.ndarray:
    """-2G^a_b√|g| from the geometry of (g, Γ)."""
    G = model.curvature.einstein
    volume = model.metric.volume
    m = model.dim
    return expr_array((m, m), lambda a, b: mul(-2, G[a, b], volume))


def _covariant_gradient(connection: AffineConnectionField, X: Sequence[Expr]) -> TensorField:
    """∇_aX^b as an [a, b] array."""
    vector = TensorField(connection.chart, 'u', np.array([as_expr(v) for v in X], dtype=object))
    return covariant_derivative(vector, connection)


def _pairing(mixed: np.ndarray, nabla_X: TensorField) -> Expr:
    """⟨𝒰, ∇X⟩ = 𝒰^a_b∇_aX^b."""
    m = mixed.shape[0]
    return add(*(mul(mixed[a, b], nabla_X[a, b]) for a in range(m) for b in range(m)))


def _divergence(current: Sequence[Expr], coords: Sequence[str]) -> Expr:
    return add(*(diff(current[a], coords[a]) for a in range(len(coords))))


def gravity_current_identity(model: GravityModel, X: Sequence[ExprLike]) -> Expr:
    """
    ∂_a[jΓ*(i_{X⌋Γ↑}C)]^a + 2G^a_b∇_aX^b√|g|, computed independently on
    each side; zero for the Levi-Civita connection.
    """
    X = [as_expr(v) for v in X]
    lagrangian = gravity_lagrangian(model)
    lift = horizontal_lift(X, model.overconnection)
    current = current_pullback(lift, lagrangian, model.section())
    lhs = _divergence(current, model.metric.chart.coords)
    rhs = _pairing(einstein_density(model), _covariant_gradient(model.connection, X))
    return add(lhs, neg(rhs))


# ---------------------------------------------------------------------------
# Einstein equations from conserved currents
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class MatterSector:
    """
    One matter or gauge sector coupled to gravity: its Lagrangian, the
    connection its energy tensor is built with, and the field section.
    ``source`` is the external force density on the sector; None means the
    curvature source for linear connections and zero otherwise.
    """

    lagrangian: JetLagrangian
    connection: object
    section: Section
    source: Optional[Sequence[Expr]] = None

    def force(self) -> List[Expr]:
        if self.source is not None:
            return list(self.source)
        if isinstance(self.connection, LinearConnection):
            return curvature_source(self.lagrangian, self.connection, self.section)
        return [ZERO] * self.lagrangian.chart.m


def total_current_balance(model: GravityModel, X: Sequence[ExprLike],
                          sectors: Sequence[MatterSector]) -> Tuple[Expr, Expr]:
    """
    (∂_a(J_grav + Σ J_matter)^a - Σ X^b(E·∇_bφ + force_b), -2(G√|g| + T)^a_b∇_aX^b).

    The two parts agree for every X and every field configuration. The
    first vanishes for all X exactly when the Einstein equations
    G√|g| + T = 0 hold.
    """
    X = [as_expr(v) for v in X]
    coords = model.metric.chart.coords
    m = model.dim
    currents = [current_pullback(horizontal_lift(X, model.overconnection), gravity_lagrangian(model), model.section())]
    residual_terms = []
    total = einstein_density(model)
    for sector in sectors:
        if sector.lagrangian.metric is not model.metric:
            raise ValueError(f"sector '{sector.lagrangian.name}' lives on a different metric")
        currents.append(current_pullback(horizontal_lift(X, sector.connection), sector.lagrangian, sector.section))
        residual = noether_residual(sector.lagrangian, sector.connection, sector.section)
        force = sector.force()
        residual_terms.extend(mul(X[b], add(residual[b], force[b])) for b in range(m))
        stress = metric_stress_tensor(sector.lagrangian)
        mapping = sector.section.jet_substitution()
        along = expr_array((m, m), lambda a, b: subst_many(stress[a, b], mapping))
        mixed = raise_first(model.metric, along)
        total = expr_array((m, m), lambda a, b: add(total[a, b], mul(-2, mixed[a, b])))
    divergence_total = add(*(_divergence(J, coords) for J in currents))
    pairing = _pairing(total, _covariant_gradient(model.connection, X))
    logger.debug(f"Total current balance built with {len(sectors)} matter sector(s)")
    return add(divergence_total, neg(add(*residual_terms))), pairing


def einstein_from_currents(model: GravityModel, X: Sequence[ExprLike], sectors: Sequence[MatterSector]) -> Expr:
    """Balance minus pairing from total_current_balance; zero for every X and every configuration."""
    balance, pairing = total_current_balance(model, X, sectors)
    return add(balance, neg(pairing))


# ---------------------------------------------------------------------------
# Komar current and lift
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class KomarData:
    """A vector field X on a metric background with its Levi-Civita connection."""

    metric: MetricField
    vector: tuple
    gravity: GravityModel = field(init=False)

    def __post_init__(self):
        vector = tuple(as_expr(v) for v in self.vector)
        if len(vector) != self.metric.dim:
            raise ValueError(f"vector has {len(vector)} components on a {self.metric.dim}-dimensional chart")
        object.__setattr__(self, 'vector', vector)
        object.__setattr__(self, 'gravity', GravityModel(self.metric))

    @property
    def connection(self) -> AffineConnectionField:
        return self.gravity.connection

    @cached_property
    def lowered(self) -> List[Expr]:
        """g♭(X)_a = g_ab X^b."""
        return self.metric.lower_index(self.vector)

    @cached_property
    def gradient(self) -> TensorField:
        """∇_aX^b."""
        return _covariant_gradient(self.connection, self.vector)

    @cached_property
    def antisymmetric_gradient(self) -> TensorField:
        """∇^{[a}X^{b]} = ∇^aX^b - ∇^bX^a."""
        g = self.metric
        m = g.dim
        up = expr_array((m, m), lambda a, b: add(*(mul(g.inverse[a, c], self.gradient[c, b]) for c in range(m))))
        return TensorField(g.chart, 'uu', expr_array((m, m), lambda a, b: add(up[a, b], neg(up[b, a]))))


@dataclass(frozen=True, eq=False)
class KomarCurrent:
    """Komar current density 𝒥^b = √|g|∇_a∇^{[a}X^{b]} with its superpotential S^{ab} = ½∇^{[a}X^{b]}√|g|."""

    current: List[Expr]
    superpotential: np.ndarray
    vector_current: TensorField


def komar_current(data: KomarData) -> KomarCurrent:
    g = data.metric
    m = g.dim
    A = data.antisymmetric_gradient
    J = divergence(A, data.connection, slot=0)
    superpotential = expr_array((m, m), lambda a, b: mul(HALF, A[a, b], g.volume))
    return KomarCurrent([mul(J[b], g.volume) for b in range(m)], superpotential, J)


def komar_divergence(data: KomarData) -> Expr:
    """∇_bJ^b, which vanishes identically."""
    J = komar_current(data).vector_current
    return divergence(J, data.connection, slot=0)[()]


def komar_superpotential_defect(data: KomarData) -> List[Expr]:
    """𝒥^b - 2∂_aS^{ab}."""
    komar = komar_current(data)
    coords = data.metric.chart.coords
    m = data.metric.dim
    return [add(komar.current[b], neg(mul(2, add(*(diff(komar.superpotential[a, b], coords[a]) for a in range(m))))))
            for b in range(m)]


def lie_derivative_connection(connection: AffineConnectionField, X: Sequence[ExprLike]) -> np.ndarray:
    """
    L_XΓ_a^c_b = X^e∂_eΓ_a^c_b - Γ_a^e_b∂_eX^c + Γ_a^c_e∂_bX^e + Γ_e^c_b∂_aX^e - ∂_a∂_bX^c,
    stored like the connection as [c, a, b].
    """
    X = [as_expr(v) for v in X]
    m = connection.dim
    x = connection.chart.coords
    gamma = connection.gamma
    dX = expr_array((m, m), lambda e, c: diff(X[c], x[e]))   # dX[e, c] = ∂_eX^c

    def component(c: int, a: int, b: int) -> Expr:
        terms = [neg(diff(dX[b, c], x[a]))]
        for e in range(m):
            terms.append(mul(X[e], diff(gamma[c, a, b], x[e])))
            terms.append(neg(mul(gamma[e, a, b], dX[e, c])))
            terms.append(mul(gamma[c, a, e], dX[b, e]))
            terms.append(mul(gamma[c, e, b], dX[a, e]))
        return add(*terms)

    return expr_array((m, m, m), component)


def lie_derivative_connection_covariant(connection: AffineConnectionField, X: Sequence[ExprLike],
                                        riemann: Optional[TensorField] = None) -> np.ndarray:
    """L_XΓ_a^c_b = -∇_a∇_bX^c - R_ea^c_b X^e for a symmetric connection, as [c, a, b]."""
    connection.require_symmetric()
    X = [as_expr(v) for v in X]
    m = connection.dim
    second = covariant_derivative(_covariant_gradient(connection, X), connection)   # [a, b, c]
    if riemann is None:
        riemann = base_curvature(connection)
    return expr_array((m, m, m), lambda c, a, b: neg(add(second[a, b, c],
                                                         *(mul(riemann[e, a, c, b], X[e]) for e in range(m)))))


def komar_correction(data: KomarData) -> np.ndarray:
    """Q_b^c_d = R_bd^c_e X^e - R_bd X^c, as [b, c, d]."""
    curvature = data.gravity.curvature
    R, ric = curvature.riemann, curvature.ricci
    X = data.vector
    m = data.metric.dim
    return expr_array((m, m, m), lambda b, c, d: add(*(mul(R[b, d, c, e], X[e]) for e in range(m)),
                                                     neg(mul(ric[b, d], X[c]))))


def komar_lift(data: KomarData) -> LiftField:
    """
    The lift Y of X to the connection bundle with fiber components
    Y_b^c_d = X^e∂_eΓ_b^c_d - L_XΓ_b^c_d + R_bd^c_eX^e - R_bdX^c.
    """
    m = data.metric.dim
    bundle = data.gravity.bundle
    lie = lie_derivative_connection(data.connection, data.vector)
    Q = komar_correction(data)
    W = [ZERO] * len(bundle.fiber)
    for b in range(m):
        for c in range(m):
            for d in range(m):
                W[bundle.index(b, c, d)] = add(neg(lie[c, b, d]), Q[b, c, d])
    return lift_from_current(data.vector, W, bundle)


def komar_lift_current(data: KomarData) -> List[Expr]:
    """jΓ*(i_YC_grav) for the Komar lift."""
    gravity = data.gravity
    return current_pullback(komar_lift(data), gravity_lagrangian(gravity), gravity.section())


def komar_intermediate(data: KomarData) -> tuple:
    """(P^{ab}_{cd}Q_b^c_d, (2R^a_bX^b - RX^a)√|g|), two independent codings of the same density."""
    g = data.metric
    m = g.dim
    P = gravity_momentum(g)
    Q = komar_correction(data)
    curvature = data.gravity.curvature
    X = data.vector
    lhs = [add(*(mul(P[a, b, c, d], Q[b, c, d]) for b in range(m) for c in range(m) for d in range(m)
                 if P[a, b, c, d] is not ZERO))
           for a in range(m)]
    rhs = [mul(add(*(mul(2, curvature.mixed_ricci[a, b], X[b]) for b in range(m)), neg(mul(curvature.scalar, X[a]))),
               g.volume)
           for a in range(m)]
    return lhs, rhs
