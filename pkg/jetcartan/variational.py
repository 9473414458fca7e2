"""
First-order Lagrangian machinery in jet coordinates.

A Lagrangian density ℓ lives in the symbols (x^a, y^i, y^i_a). When it
depends on the metric it is written as a template in the reserved symbols
``gu_{a}_{b}`` (g^{ab}, all m² treated as independent) and ``sqrtg`` (√|g|),
and resolved against a MetricField before use.
"""

import logging
from dataclasses import dataclass
from functools import cached_property
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .connections import FiberedChart, LinearConnection, Section, linear_curvature, section_covariant_derivative
from .geometry import (
    AffineConnectionField, MetricField, TensorField, covariant_divergence, expr_array, to_expr_array,
)
from .symexpr import (
    HALF, ZERO, Expr, ExprLike, add, as_expr, diff, mul, neg, subst_many, symbol,
)

logger = logging.getLogger(__name__)

VOLUME_SYMBOL = 'sqrtg'


class MetricDependenceError(ValueError):
    """A metric derivative was requested for a Lagrangian without declared metric dependence."""


def inverse_metric_name(a: int, b: int) -> str:
    return f'gu_{a}_{b}'


def inverse_metric_symbol(a: int, b: int) -> Expr:
    return symbol(inverse_metric_name(a, b))


def metric_symbol_names(m: int) -> List[str]:
    return [inverse_metric_name(a, b) for a in range(m) for b in range(m)] + [VOLUME_SYMBOL]


def metric_substitution(g: MetricField) -> Dict[str, Expr]:
    m = g.dim
    mapping = {inverse_metric_name(a, b): g.inverse[a, b] for a in range(m) for b in range(m)}
    mapping[VOLUME_SYMBOL] = g.volume
    return mapping


@dataclass(frozen=True, eq=False)
class JetLagrangian:
    """Density ℓ (L = ℓ d^m x) in first-jet symbols, optionally with metric template symbols."""

    chart: FiberedChart
    density: Expr
    metric: Optional[MetricField] = None
    name: str = ''
    parameters: Tuple[str, ...] = ()

    def __post_init__(self):
        density = as_expr(self.density)
        object.__setattr__(self, 'density', density)
        chart = self.chart
        allowed = set(chart.coords) | set(chart.fiber) | set(chart.first_jet_names()) | set(self.parameters)
        metric_names = set(metric_symbol_names(chart.m))
        if self.metric is None and not density.free.isdisjoint(metric_names):
            raise MetricDependenceError(f"Lagrangian '{self.name}' uses metric symbols but no metric was given")
        if self.metric is not None:
            allowed |= metric_names
        extra = sorted(density.free - allowed)
        if extra:
            raise ValueError(f"Lagrangian '{self.name}' depends on '{extra[0]}', which is not a jet coordinate")

    @property
    def metric_dependent(self) -> bool:
        names = set(metric_symbol_names(self.chart.m))
        return self.metric is not None and not self.density.free.isdisjoint(names)

    @cached_property
    def resolved(self) -> Expr:
        """ℓ with the metric template symbols replaced by the metric's components."""
        if self.metric is None:
            return self.density
        return subst_many(self.density, metric_substitution(self.metric))

    def __add__(self, other: 'JetLagrangian') -> 'JetLagrangian':
        if other.chart != self.chart:
            raise ValueError("Lagrangians live on different fibered charts")
        return JetLagrangian(self.chart, add(self.density, other.density), self.metric or other.metric,
                             f'{self.name}+{other.name}', tuple(sorted(set(self.parameters) | set(other.parameters))))


def horizontal_differential(f: ExprLike, chart: FiberedChart) -> List[Expr]:
    """d_a f = ∂_a f + y^i_a ∂_i f + y^i_ab ∂f/∂y^i_b."""
    f = as_expr(f)
    m, n = chart.m, chart.n
    result = []
    for a in range(m):
        terms = [diff(f, chart.coords[a])]
        for i in range(n):
            terms.append(mul(chart.jet_symbol(i, a), diff(f, chart.fiber[i])))
            for b in range(m):
                terms.append(mul(chart.jet2_symbol(i, a, b), diff(f, chart.jet(i, b))))
        result.append(add(*terms))
    return result


def momentum(lagrangian: JetLagrangian) -> np.ndarray:
    """P[a, i] = ∂ℓ/∂y^i_a."""
    chart = lagrangian.chart
    ell = lagrangian.resolved
    return expr_array((chart.m, chart.n), lambda a, i: diff(ell, chart.jet(i, a)))


def euler_lagrange(lagrangian: JetLagrangian) -> List[Expr]:
    """E_i = ∂_iℓ - d_a P^a_i, in second-jet symbols."""
    chart = lagrangian.chart
    ell = lagrangian.resolved
    P = momentum(lagrangian)
    result = []
    for i in range(chart.n):
        terms = [diff(ell, chart.fiber[i])]
        for a in range(chart.m):
            terms.append(neg(horizontal_differential(P[a, i], chart)[a]))
        result.append(add(*terms))
    return result


def total_derivative_along(f: ExprLike, section: Section, a: int) -> Expr:
    """d_a f pulled back along the section, as ∂_a(f∘jφ)."""
    return diff(section.pullback(f, order=1), section.chart.coords[a])


def euler_lagrange_along(lagrangian: JetLagrangian, section: Section) -> List[Expr]:
    """E_i∘j₂φ computed as ∂_iℓ∘jφ - ∂_a(P^a_i∘jφ)."""
    chart = lagrangian.chart
    ell = lagrangian.resolved
    P = momentum(lagrangian)
    result = []
    for i in range(chart.n):
        terms = [section.pullback(diff(ell, chart.fiber[i]), order=1)]
        terms.extend(neg(total_derivative_along(P[a, i], section, a)) for a in range(chart.m))
        result.append(add(*terms))
    return result


@dataclass(frozen=True, eq=False)
class LiftField:
    """A morphism Y: JE -> TE over E, with base components Y^a and fiber components Y^i."""

    chart: FiberedChart
    base: tuple
    fiber: tuple

    def __post_init__(self):
        object.__setattr__(self, 'base', tuple(as_expr(e) for e in self.base))
        object.__setattr__(self, 'fiber', tuple(as_expr(e) for e in self.fiber))
        if len(self.base) != self.chart.m or len(self.fiber) != self.chart.n:
            raise ValueError("lift components do not match the fibered chart dimensions")

    def vertical_part(self) -> List[Expr]:
        """Y^i - Y^b y^i_b."""
        chart = self.chart
        return [add(self.fiber[i], *(neg(mul(self.base[b], chart.jet_symbol(i, b))) for b in range(chart.m)))
                for i in range(chart.n)]


def lift_from_current(X: Sequence[ExprLike], W: Sequence[ExprLike], chart: FiberedChart) -> LiftField:
    """Y = X⌋dl + W: Y^a = X^a, Y^i = X^a y^i_a + W^i."""
    X = [as_expr(e) for e in X]
    fiber = [add(*(mul(X[a], chart.jet_symbol(i, a)) for a in range(chart.m)), W[i]) for i in range(chart.n)]
    return LiftField(chart, tuple(X), tuple(fiber))


def horizontal_lift(X: Sequence[ExprLike], kappa) -> LiftField:
    """Y = X⌋κ: Y^a = X^a, Y^i = X^a κ^i_a."""
    if isinstance(kappa, LinearConnection):
        kappa = kappa.general()
    chart = kappa.chart
    X = [as_expr(e) for e in X]
    fiber = [add(*(mul(X[a], kappa.components[i, a]) for a in range(chart.m))) for i in range(chart.n)]
    return LiftField(chart, tuple(X), tuple(fiber))


def current(Y: LiftField, lagrangian: JetLagrangian) -> List[Expr]:
    """Coefficients of i_YC in jet coordinates: ℓY^a + P^a_i (Y^i - Y^b y^i_b)."""
    ell = lagrangian.resolved
    P = momentum(lagrangian)
    vertical = Y.vertical_part()
    chart = lagrangian.chart
    return [add(mul(ell, Y.base[a]), *(mul(P[a, i], vertical[i]) for i in range(chart.n))) for a in range(chart.m)]


def current_pullback(Y: LiftField, lagrangian: JetLagrangian, section: Section) -> List[Expr]:
    """jφ*(i_YC) components, as functions of the base coordinates."""
    return [section.pullback(J, order=1) for J in current(Y, lagrangian)]


def lie_derivative_density(Y: LiftField, lagrangian: JetLagrangian) -> Expr:
    """
    L_Y ℓ = Y^a ∂_aℓ + Y^i ∂_iℓ + Y^i_a P^a_i + ℓ d_aY^a, where the prolonged
    fiber components are Y^i_a = d_aY^i - y^i_b d_aY^b.
    """
    chart = lagrangian.chart
    m, n = chart.m, chart.n
    ell = lagrangian.resolved
    P = momentum(lagrangian)
    dY_base = [horizontal_differential(Y.base[b], chart) for b in range(m)]   # dY_base[b][a] = d_aY^b
    dY_fiber = [horizontal_differential(Y.fiber[i], chart) for i in range(n)]
    terms = []
    for a in range(m):
        terms.append(mul(Y.base[a], diff(ell, chart.coords[a])))
        terms.append(mul(ell, dY_base[a][a]))
    for i in range(n):
        terms.append(mul(Y.fiber[i], diff(ell, chart.fiber[i])))
        for a in range(m):
            prolonged = add(dY_fiber[i][a], *(neg(mul(chart.jet_symbol(i, b), dY_base[b][a])) for b in range(m)))
            terms.append(mul(prolonged, P[a, i]))
    return add(*terms)


def symmetry_defect(Y: LiftField, lagrangian: JetLagrangian, section: Section) -> Expr:
    """
    d_a[jφ*(i_YC)]^a + E_i (Y^i - Y^aφ^i_{,a}) - jφ*(L_Y ℓ).

    Vanishes for every lift and every section; for symmetries (L_Yℓ = 0) the
    current is conserved exactly on critical sections.
    """
    chart = lagrangian.chart
    J = current_pullback(Y, lagrangian, section)
    divergence = add(*(diff(J[a], chart.coords[a]) for a in range(chart.m)))
    E = euler_lagrange_along(lagrangian, section)
    vertical = [section.pullback(v, order=1) for v in Y.vertical_part()]
    contraction = add(*(mul(E[i], vertical[i]) for i in range(chart.n)))
    lie = section.pullback(lie_derivative_density(Y, lagrangian), order=2)
    return add(divergence, contraction, neg(lie))


@dataclass(frozen=True, eq=False)
class EnergyTensorField:
    """Mixed components ``mixed[a, b]`` of an energy tensor (density form when ``density``)."""

    chart: FiberedChart
    mixed: np.ndarray
    density: bool = True

    def pullback(self, section: Section) -> np.ndarray:
        mapping = section.jet_substitution()
        return expr_array(self.mixed.shape, lambda a, b: subst_many(self.mixed[a, b], mapping))

    def contract(self, X: Sequence[ExprLike]) -> List[Expr]:
        """(𝒰⌋X)^a = 𝒰^a_b X^b."""
        m = self.chart.m
        return [add(*(mul(self.mixed[a, b], X[b]) for b in range(m))) for a in range(m)]


def canonical_energy_tensor(lagrangian: JetLagrangian, kappa) -> EnergyTensorField:
    """𝒰^a_b = ℓδ^a_b - (y^i_b - κ^i_b) ∂ℓ/∂y^i_a."""
    if isinstance(kappa, LinearConnection):
        kappa = kappa.general()
    chart = lagrangian.chart
    if kappa.chart.n != chart.n:
        raise ValueError("connection and Lagrangian live on different fibers")
    ell = lagrangian.resolved
    P = momentum(lagrangian)
    k = kappa.components
    differences = expr_array((chart.n, chart.m), lambda i, b: add(chart.jet_symbol(i, b), neg(k[i, b])))

    def component(a: int, b: int) -> Expr:
        terms = [neg(mul(differences[i, b], P[a, i])) for i in range(chart.n)]
        if a == b:
            terms.append(ell)
        return add(*terms)

    logger.debug(f"Canonical energy tensor of '{lagrangian.name}' on {chart.m}+{chart.n} dimensions")
    return EnergyTensorField(chart, expr_array((chart.m, chart.m), component), lagrangian.metric is not None)


def metric_stress_tensor(lagrangian: JetLagrangian) -> np.ndarray:
    """
    T_ab = ∂ℓ/∂g^{ab}, with ∂√|g|/∂g^{ab} = -½ g_ab √|g| applied to the
    volume symbol. Entry [b, a] is the same object as [a, b].

    Raises:
        MetricDependenceError: if ℓ has no metric template symbols
    """
    if not lagrangian.metric_dependent:
        raise MetricDependenceError(f"Lagrangian '{lagrangian.name}' declares no metric dependence")
    g = lagrangian.metric
    m = lagrangian.chart.m
    ell = lagrangian.density
    volume = symbol(VOLUME_SYMBOL)
    d_volume = diff(ell, VOLUME_SYMBOL)
    mapping = metric_substitution(g)
    T = np.empty((m, m), dtype=object)
    for a in range(m):
        for b in range(a, m):
            direct = mul(HALF, add(diff(ell, inverse_metric_name(a, b)), diff(ell, inverse_metric_name(b, a))))
            through_volume = mul(d_volume, neg(HALF), g[a, b], volume)
            T[a, b] = T[b, a] = subst_many(add(direct, through_volume), mapping)
    return T


def lower_first(g: MetricField, mixed: np.ndarray) -> np.ndarray:
    """g_ac U^c_b."""
    m = g.dim
    return expr_array((m, m), lambda a, b: add(*(mul(g[a, c], mixed[c, b]) for c in range(m))))


def raise_first(g: MetricField, covariant: np.ndarray) -> np.ndarray:
    """g^{ac} T_cb."""
    m = g.dim
    return expr_array((m, m), lambda a, b: add(*(mul(g.inverse[a, c], covariant[c, b]) for c in range(m))))


def field_covariant_derivatives(section: Section, kappa) -> np.ndarray:
    """∇[b, σ] = ∂_bφ^σ - K^σ_b(x, φ) for every fiber coordinate."""
    return section_covariant_derivative(kappa, section)


def noether_residual(lagrangian: JetLagrangian, kappa, section: Section) -> List[Expr]:
    """Σ_σ E_σ ∇_bφ^σ along the section, one entry per base index b."""
    E = euler_lagrange_along(lagrangian, section)
    nabla = field_covariant_derivatives(section, kappa)
    return [add(*(mul(E[s], nabla[b, s]) for s in range(section.chart.n))) for b in range(section.chart.m)]


def energy_divergence(mixed: np.ndarray, connection: AffineConnectionField) -> List[Expr]:
    """
    ∇_a𝒰^a_b for a density 𝒰 given as functions of x: ∂_a𝒰^a_b + Γ_a^c_b 𝒰^a_c
    (plus the torsion term when Γ is not symmetric).
    """
    m = connection.dim
    gamma = connection.gamma
    covector = expr_array((m, m, m), lambda a, b, c: neg(gamma[c, a, b]))
    xi = TensorField(connection.chart, 'uf', to_expr_array(mixed, (m, m)), density=True)
    return covariant_divergence(xi, connection, covector).flat()


def curvature_source(lagrangian: JetLagrangian, kappa: LinearConnection, section: Section) -> List[Expr]:
    """
    Σ P^a_σ (ρ_ba)^σ_τ φ^τ along the section: the force density exerted by
    the curvature of the fiber connection on a field that sees only κ.
    """
    chart = lagrangian.chart
    m, n = chart.m, chart.n
    rho = linear_curvature(kappa)
    P = momentum(lagrangian)
    mapping = section.jet_substitution()
    P_along = expr_array(P.shape, lambda a, s: subst_many(P[a, s], mapping))
    return [add(*(mul(P_along[a, s], rho[b, a, s, t], section[t])
                  for a in range(m) for s in range(n) for t in range(n) if rho[b, a, s, t] is not ZERO))
            for b in range(m)]


def noether_balance(lagrangian: JetLagrangian, kappa, connection: AffineConnectionField,
                    section: Section, source: Optional[Sequence[ExprLike]] = None) -> List[Expr]:
    """
    ∇_a(𝒰∘jφ)^a_b - source_b along the section.

    ``source`` defaults to curvature_source and must be given when ``kappa``
    is not linear; models pass their own closed-form right-hand side (already
    multiplied by √|g|).
    """
    U = canonical_energy_tensor(lagrangian, kappa).pullback(section)
    divergence = energy_divergence(U, connection)
    if source is None:
        if not isinstance(kappa, LinearConnection):
            raise ValueError("a curvature source can only be derived for a linear connection")
        source = curvature_source(lagrangian, kappa, section)
    return [add(divergence[b], neg(as_expr(source[b]))) for b in range(lagrangian.chart.m)]


def noether_defect(lagrangian: JetLagrangian, kappa, connection: AffineConnectionField,
                   section: Section, source: Optional[Sequence[ExprLike]] = None) -> List[Expr]:
    """∇_a(𝒰∘jφ)^a_b - source_b - Σ_σ E_σ∇_bφ^σ, which vanishes for every section."""
    balance = noether_balance(lagrangian, kappa, connection, section, source)
    residual = noether_residual(lagrangian, kappa, section)
    return [add(balance[b], neg(residual[b])) for b in range(lagrangian.chart.m)]
