"""
Registry of identity checks by stable id.

Every registered builder turns a CheckContext into one IdentityCheck. Checks
marked universal hold for any input and run under ``all``; the others
(vacuum, Einstein-from-currents) assert properties of a particular document
and run when the document declares them or when they are named explicitly.

Random instances come from a generator seeded with (seed, check id), so a
check sees the same metric, fields and vector on every run with one seed.
"""

import itertools
import logging
import zlib
from dataclasses import dataclass, field
from fractions import Fraction
from math import comb
from pathlib import Path
from typing import TYPE_CHECKING, Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from .connections import (
    FiberedChart, GeneralConnection, LinearConnection, Section, double_jet_names, involution, jet_of_connection,
    linear_curvature, overconnection_covariant_derivative, overconnection_linear, prolong, zero_linear_connection,
)
from .exprtext import parse_expr
from .gauge import (
    GaugeField, builtin_structure, expand_gauge_coordinates, gauge_curvature, overconnection_gauge,
)
from .geometry import (
    AffineConnectionField, Chart, MetricField, TensorField, divergence, expr_array, hodge_star, levi_civita,
    symmetric_connection,
)
from .gravity import (
    GravityModel, KomarData, MatterSector, einstein_density, einstein_from_currents, gravity_current_identity,
    gravity_energy_tensor, gravity_lagrangian, gravity_momentum, komar_current, komar_divergence,
    komar_intermediate, komar_lift_current, komar_superpotential_defect, lie_derivative_connection,
    lie_derivative_connection_covariant, total_current_balance,
)
from .matter import (
    DiracModel, ScalarModel, dirac_charge_current, dirac_lagrangian, dirac_momentum_display,
    dirac_onshell_divergence_rhs, dirac_symmetrization_defect, scalar_energy_display, scalar_lagrangian,
    scalar_momentum_display, scalar_onshell_divergence_rhs, scalar_stress_display,
)
from .oracles import apply_template, residual_coefficients, template_terms
from .symexpr import (
    I, ZERO, Expr, ExprLike, add, as_expr, constant, covering_domain, diff, evaluate_many, mul, neg, symbol,
)
from .variational import (
    VOLUME_SYMBOL, JetLagrangian, canonical_energy_tensor, current_pullback, euler_lagrange_along, horizontal_lift,
    inverse_metric_symbol, lift_from_current, lower_first, metric_stress_tensor, momentum, noether_balance,
    symmetry_defect,
)
from .verify import CheckResult, ERROR, IdentityCheck, action_variation_oracle, finite_difference_oracle, run_check
from .yang_mills import (
    CoupledModel, YangMillsModel, maxwell_energy_tensor, yang_mills_energy_display, yang_mills_energy_tensor,
    yang_mills_lagrangian, yang_mills_momentum_display,
)

if TYPE_CHECKING:
    from .dsl import Document, ModelEntry

logger = logging.getLogger(__name__)

ALL = 'all'
SUITES = ('connections', 'variational', 'matter', 'gauge', 'gravity', 'engineering')
COORDINATES = ('t', 'x', 'y', 'z')


class UnknownCheckError(KeyError):
    """A check id or suite name that is not registered."""

    def __init__(self, name: str):
        super().__init__(name)
        self.name = name

    def __str__(self) -> str:
        return f"unknown check or suite '{self.name}'"


class CheckInputError(ValueError):
    """A check needs document objects that the document does not provide."""


@dataclass(frozen=True)
class CheckSettings:
    """Tolerances and sampling options for one run."""

    tolerance: float = 1e-8
    trials: int = 20
    third_derivative_tolerance: float = 1e-7
    finite_difference_tolerance: float = 1e-4
    finite_difference_step: float = 1e-5
    orientation: int = 1
    jet_box: Tuple[float, float] = (-1.0, 1.0)
    oracle_directory: Path = Path('fixtures/oracles')

    @property
    def third_tolerance(self) -> float:
        return max(self.tolerance, self.third_derivative_tolerance)


# ---------------------------------------------------------------------------
# Random instances
# ---------------------------------------------------------------------------

def sample_chart(dim: int) -> Chart:
    if not 1 <= dim <= len(COORDINATES):
        raise ValueError(f"sample charts have dimension 1 to {len(COORDINATES)}, not {dim}")
    return Chart(f'sample{dim}', COORDINATES[:dim])


def scaled_coordinates(chart: Chart) -> List[Expr]:
    """Chart coordinates rescaled affinely to [-1, 1] on the chart box."""
    result = []
    for name, (low, high) in zip(chart.coords, chart.box):
        result.append(mul(constant(2 / (high - low)), add(symbol(name), constant(-(low + high) / 2))))
    return result


def random_polynomial(variables: Sequence[Expr], rng: np.random.Generator, degree: int = 2,
                      scale: Fraction = Fraction(1, 4), constant_term: bool = True) -> Expr:
    """Σ c_k·monomial_k up to ``degree`` with rational |c_k| <= scale."""
    terms = []
    for d in range(0 if constant_term else 1, degree + 1):
        for combo in itertools.combinations_with_replacement(range(len(variables)), d):
            k = int(rng.integers(-4, 5))
            if k:
                terms.append(mul(constant(Fraction(k, 4) * scale), *(variables[v] for v in combo)))
    return add(*terms)


def random_complex(variables: Sequence[Expr], rng: np.random.Generator, degree: int = 2) -> Expr:
    real = random_polynomial(variables, rng, degree, Fraction(1, 2))
    return add(real, mul(I, random_polynomial(variables, rng, 1, Fraction(1, 2))))


def random_metric(chart: Chart, rng: np.random.Generator, signature: str = 'lorentzian',
                  degree: int = 2) -> MetricField:
    """
    diag(1, -1, ..., -1) (or the identity) plus a polynomial perturbation
    whose rows sum to at most ½ on the box, so the signature is kept.
    """
    m = chart.dim
    u = scaled_coordinates(chart)
    scale = Fraction(1, 2 * m * comb(m + degree, degree))
    diagonal = [1] + [-1] * (m - 1) if signature == 'lorentzian' else [1] * m
    components = np.empty((m, m), dtype=object)
    for a in range(m):
        for b in range(a, m):
            p = random_polynomial(u, rng, degree, scale)
            components[a, b] = components[b, a] = add(diagonal[a], p) if a == b else p
    return MetricField(chart, components, signature)


def random_vector(chart: Chart, rng: np.random.Generator, degree: int = 2) -> Tuple[Expr, ...]:
    u = scaled_coordinates(chart)
    return tuple(random_polynomial(u, rng, degree, Fraction(1, 2)) for _ in range(chart.dim))


def random_symmetric_connection(chart: Chart, rng: np.random.Generator) -> AffineConnectionField:
    u = scaled_coordinates(chart)
    return symmetric_connection(chart, lambda c, a, b: random_polynomial(u, rng, 1, Fraction(1, 2)))


def random_linear_connection(fibered: FiberedChart, rng: np.random.Generator) -> LinearConnection:
    u = scaled_coordinates(fibered.base)
    n = fibered.n
    return LinearConnection(fibered, expr_array((fibered.m, n, n),
                                                lambda a, i, j: random_complex(u, rng, 1)))


def random_gauge_field(structure_name: str, chart: Chart, rng: np.random.Generator) -> GaugeField:
    structure = builtin_structure(structure_name)
    u = scaled_coordinates(chart)
    return GaugeField(structure, chart, expr_array((structure.rank, chart.dim),
                                                   lambda K, a: random_polynomial(u, rng, 2, Fraction(1, 2))))


def random_tetrad(chart: Chart, rng: np.random.Generator) -> List[List[Expr]]:
    """Identity plus a perturbation small enough to keep the tetrad invertible on the box."""
    m = chart.dim
    u = scaled_coordinates(chart)
    scale = Fraction(1, 4 * m * comb(m + 2, 2))
    return [[add(int(lam == a), random_polynomial(u, rng, 2, scale)) for a in range(m)] for lam in range(m)]


def random_scalar(metric: MetricField, rng: np.random.Generator, structure_name: str = 'u1') -> Tuple[ScalarModel,
                                                                                                    Section]:
    """A massive charged scalar on ``metric`` with a random gauge potential and a random complex section."""
    chart = metric.chart
    u = scaled_coordinates(chart)
    structure = builtin_structure(structure_name)
    fibered = FiberedChart('E', chart, tuple(f'phi{i}' for i in range(structure.n)))
    potential = random_gauge_field(structure_name, chart, rng).expand(fibered)
    model = ScalarModel(metric, potential, mass=1)
    n = model.n
    section = model.section([random_complex(u, rng) for _ in range(n)], [random_complex(u, rng) for _ in range(n)])
    return model, section


def random_dirac(rng: np.random.Generator) -> Tuple[DiracModel, Section]:
    chart = sample_chart(2)
    u = scaled_coordinates(chart)
    potential = tuple(random_polynomial(u, rng, 2, Fraction(1, 2)) for _ in range(chart.dim))
    model = DiracModel(chart, random_tetrad(chart, rng), potential, mass=1)
    s = model.spinor_dim
    section = model.section([random_complex(u, rng) for _ in range(s)], [random_complex(u, rng) for _ in range(s)])
    return model, section


def random_lift(chart: FiberedChart, rng: np.random.Generator):
    """Y = X⌋dl + W with W affine in base and fiber coordinates."""
    X = random_vector(chart.base, rng, degree=1)
    variables = scaled_coordinates(chart.base) + [symbol(y) for y in chart.fiber]
    W = [random_polynomial(variables, rng, 1, Fraction(1, 2)) for _ in range(chart.n)]
    return lift_from_current(X, W, chart)


# ---------------------------------------------------------------------------
# Context and registry
# ---------------------------------------------------------------------------

@dataclass
class CheckContext:
    """What a check builder may draw on: the document, the seed and the settings."""

    document: Optional['Document'] = None
    seed: int = 0
    settings: CheckSettings = field(default_factory=CheckSettings)

    def rng(self, stream: str) -> np.random.Generator:
        sequence = np.random.SeedSequence([int(self.seed), zlib.crc32(f'instance:{stream}'.encode('utf-8'))])
        return np.random.default_rng(sequence)

    def document_metrics(self) -> List[MetricField]:
        if self.document is None:
            return []
        return list(self.document.metrics.values())

    def metric(self, stream: str, dim: int = 3) -> MetricField:
        """The first document metric, or a random Lorentzian one."""
        metrics = self.document_metrics()
        if metrics:
            return metrics[0]
        return random_metric(sample_chart(dim), self.rng(f'{stream}:metric'))

    def model(self, kind: str) -> Optional['ModelEntry']:
        if self.document is None:
            return None
        for entry in self.document.models.values():
            if entry.kind == kind:
                return entry
        return None

    def komar(self, stream: str) -> KomarData:
        if self.document is not None and self.document.komar:
            return next(iter(self.document.komar.values()))
        metric = self.metric(stream)
        return KomarData(metric, random_vector(metric.chart, self.rng(f'{stream}:vector')))

    def domain(self, charts: Union[Chart, Sequence[Chart]],
               exprs: Sequence[ExprLike] = ()) -> Dict[str, Tuple[float, float]]:
        """The chart boxes (later charts win), plus the jet box for any other free variable."""
        boxes: Dict[str, Tuple[float, float]] = {}
        for chart in ([charts] if isinstance(charts, Chart) else charts):
            boxes.update(chart.domain())
        return covering_domain([as_expr(e) for e in exprs], boxes, self.settings.jet_box)

    def expect_failure(self, check_id: str) -> bool:
        if self.document is None:
            return False
        return any(declared.id == check_id and declared.expect_failure for declared in self.document.checks)

    def identity(self, check_id: str, lhs: Sequence[ExprLike], rhs: Sequence[ExprLike],
                 charts: Union[Chart, Sequence[Chart]], tol: Optional[float] = None) -> IdentityCheck:
        lhs = [as_expr(e) for e in lhs]
        rhs = [as_expr(e) for e in rhs]
        return IdentityCheck(check_id, REGISTRY[check_id].anchor, tuple(lhs), tuple(rhs),
                             self.domain(charts, lhs + rhs), self.settings.trials,
                             tol if tol is not None else self.settings.tolerance, self.expect_failure(check_id))

    def defect(self, check_id: str, defect: Sequence[ExprLike], charts: Union[Chart, Sequence[Chart]],
               tol: Optional[float] = None) -> IdentityCheck:
        return self.identity(check_id, defect, [ZERO] * len(defect), charts, tol)


CheckBuilder = Callable[[CheckContext], IdentityCheck]


@dataclass(frozen=True)
class RegisteredCheck:
    id: str
    anchor: str
    suite: str
    build: CheckBuilder
    universal: bool = True


REGISTRY: Dict[str, RegisteredCheck] = {}


def register(check_id: str, anchor: str, suite: str, universal: bool = True) -> Callable[[CheckBuilder], CheckBuilder]:
    if suite not in SUITES:
        raise ValueError(f"unknown suite '{suite}'")

    def decorator(build: CheckBuilder) -> CheckBuilder:
        if check_id in REGISTRY:
            raise ValueError(f"check id '{check_id}' registered twice")
        REGISTRY[check_id] = RegisteredCheck(check_id, anchor, suite, build, universal)
        return build

    return decorator


def _flat(array) -> List[Expr]:
    return list(np.asarray(array, dtype=object).reshape(-1))


# ---------------------------------------------------------------------------
# Connections and overconnections
# ---------------------------------------------------------------------------

@register('projectability', "the prolonged connection projects onto κ", 'connections')
def _projectability(ctx: CheckContext) -> IdentityCheck:
    rng = ctx.rng('projectability')
    chart = sample_chart(2)
    fibered = FiberedChart('E', chart, ('y0', 'y1'))
    variables = scaled_coordinates(chart) + [symbol(y) for y in fibered.fiber]
    lhs: List[Expr] = []
    rhs: List[Expr] = []
    for _ in range(5):
        kappa = GeneralConnection(fibered, expr_array((fibered.n, chart.dim),
                                                      lambda i, a: random_polynomial(variables, rng, 2)))
        prolonged = prolong(kappa, random_symmetric_connection(chart, rng))
        lhs.extend(_flat(prolonged.first))
        rhs.extend(kappa.components[i, a] for a in range(chart.dim) for i in range(fibered.n))
    return ctx.identity('projectability', lhs, rhs, chart)


@register('prolongation-theorem', "the prolonged connection κ' is s_Γ∘Jκ", 'connections')
def _prolongation_theorem(ctx: CheckContext) -> IdentityCheck:
    rng = ctx.rng('prolongation-theorem')
    lhs: List[Expr] = []
    rhs: List[Expr] = []
    for dim, fiber in ((2, ('y0', 'y1')), (3, ('y0',)), (2, ('y0',))):
        chart = sample_chart(dim)
        fibered = FiberedChart('E', chart, fiber)
        variables = scaled_coordinates(chart) + [symbol(y) for y in fiber]
        kappa = GeneralConnection(fibered, expr_array((fibered.n, dim),
                                                      lambda i, a: random_polynomial(variables, rng, 2)))
        gamma = random_symmetric_connection(chart, rng)
        prolonged = prolong(kappa, gamma)
        composite = involution(gamma, fibered).then(jet_of_connection(kappa))
        for a, i in itertools.product(range(dim), range(fibered.n)):
            lhs.append(prolonged.first[a, i])
            rhs.append(composite(symbol(fibered.jet(i, a))))
            for b in range(dim):
                # (κ'_a)^i_b is the derivative of ȳ^i_b along a
                lhs.append(prolonged.second[a, i, b])
                rhs.append(composite(symbol(fibered.double(i, b, a))))
    return ctx.identity('prolongation-theorem', lhs, rhs, sample_chart(3))


@register('involution', "s_Γ∘s_Γ is the identity of the double jet space", 'connections')
def _involution(ctx: CheckContext) -> IdentityCheck:
    rng = ctx.rng('involution')
    lhs: List[Expr] = []
    rhs: List[Expr] = []
    domain_chart = sample_chart(4)
    for dim in (2, 3, 4, 2, 3):
        chart = sample_chart(dim)
        fibered = FiberedChart('E', chart, ('y0',))
        s = involution(random_symmetric_connection(chart, rng), fibered)
        twice = s.then(s)
        for name in double_jet_names(fibered):
            lhs.append(twice(symbol(name)))
            rhs.append(symbol(name))
    return ctx.identity('involution', lhs, rhs, domain_chart)


def _linear_and_gauge(ctx: CheckContext, stream: str) -> Tuple[Chart, LinearConnection, GaugeField]:
    rng = ctx.rng(stream)
    chart = sample_chart(3)
    fibered = FiberedChart('V', chart, ('v0', 'v1'))
    return chart, random_linear_connection(fibered, rng), random_gauge_field('su2', chart, rng)


@register('nabla-kappa-equals-minus-rho', "∇_aκ_b = -ρ_ab along κ for linear and su(2) connections", 'gauge')
def _nabla_kappa(ctx: CheckContext) -> IdentityCheck:
    chart, linear, gauge = _linear_and_gauge(ctx, 'nabla-kappa-equals-minus-rho')
    gamma = random_symmetric_connection(chart, ctx.rng('nabla-kappa-equals-minus-rho:gamma'))
    lhs = _flat(overconnection_covariant_derivative(linear, overconnection_linear(linear, gamma)))
    rhs = [neg(e) for e in _flat(linear_curvature(linear))]
    lhs += _flat(overconnection_covariant_derivative(gauge, overconnection_gauge(gauge, gamma)))
    rhs += [neg(e) for e in _flat(gauge_curvature(gauge))]
    return ctx.identity('nabla-kappa-equals-minus-rho', lhs, rhs, chart)


@register('gamma-independence', "∇κ along κ does not depend on the base connection Γ", 'gauge')
def _gamma_independence(ctx: CheckContext) -> IdentityCheck:
    chart, linear, gauge = _linear_and_gauge(ctx, 'gamma-independence')
    rng = ctx.rng('gamma-independence:gamma')
    first, second = random_symmetric_connection(chart, rng), random_symmetric_connection(chart, rng)
    lhs = _flat(overconnection_covariant_derivative(linear, overconnection_linear(linear, first)))
    rhs = _flat(overconnection_covariant_derivative(linear, overconnection_linear(linear, second)))
    lhs += _flat(overconnection_covariant_derivative(gauge, overconnection_gauge(gauge, first)))
    rhs += _flat(overconnection_covariant_derivative(gauge, overconnection_gauge(gauge, second)))
    return ctx.identity('gamma-independence', lhs, rhs, chart)


@register('gauge-linear-consistency', "the frame-expanded gauge overconnection is the linear one on Lie-algebra data",
          'gauge')
def _gauge_linear_consistency(ctx: CheckContext) -> IdentityCheck:
    rng = ctx.rng('gauge-linear-consistency')
    chart = sample_chart(3)
    gauge = random_gauge_field('su2', chart, rng)
    structure = gauge.structure
    gamma = random_symmetric_connection(chart, rng)
    fibered = FiberedChart('V', chart, tuple(f'v{i}' for i in range(structure.n)))
    linear = gauge.expand(fibered)
    gauge_over = overconnection_gauge(gauge, gamma)
    linear_over = overconnection_linear(linear, gamma)
    gauge_bundle, linear_bundle = gauge_over.bundle, linear_over.bundle
    mapping = expand_gauge_coordinates(structure, gauge_bundle, linear_bundle)
    m, n, r = chart.dim, structure.n, structure.rank
    lhs, rhs = [], []
    for b, i, j in itertools.product(range(m), range(n), range(n)):
        for a in range(m):
            lhs.append(linear_over.components[linear_bundle.index(b, i, j), a].subs(mapping))
            rhs.append(add(*(mul(gauge_over.components[gauge_bundle.index(b, H), a], structure.frame[H][i, j])
                             for H in range(r))))
    return ctx.identity('gauge-linear-consistency', lhs, rhs, chart)


# ---------------------------------------------------------------------------
# Variational identities
# ---------------------------------------------------------------------------

def _scalar_entry(ctx: CheckContext, stream: str) -> Tuple[ScalarModel, Section]:
    entry = ctx.model('scalar')
    if entry is not None:
        return entry.model, entry.section
    return random_scalar(ctx.metric(stream), ctx.rng(stream))


def _yang_mills_entry(ctx: CheckContext, stream: str, structure_name: str = 'su2') -> YangMillsModel:
    entry = ctx.model('yangmills')
    if entry is not None:
        return entry.model
    metric = ctx.metric(stream)
    return YangMillsModel(metric, random_gauge_field(structure_name, metric.chart, ctx.rng(stream)))


def _dirac_entry(ctx: CheckContext, stream: str) -> Tuple[DiracModel, Section]:
    entry = ctx.model('dirac')
    if entry is not None:
        return entry.model, entry.section
    return random_dirac(ctx.rng(stream))


@register('horizontal-lift-current', "(𝒰∘jφ)⌋X equals the current of the horizontal lift X⌋κ", 'variational')
def _horizontal_lift_current(ctx: CheckContext) -> IdentityCheck:
    stream = 'horizontal-lift-current'
    scalar, section = _scalar_entry(ctx, stream)
    chart = scalar.metric.chart
    X = random_vector(chart, ctx.rng(f'{stream}:vector'))
    lagrangian = scalar_lagrangian(scalar)
    energy = canonical_energy_tensor(lagrangian, scalar.connection)
    lhs = [section.pullback(e, order=1) for e in energy.contract(X)]
    rhs = current_pullback(horizontal_lift(X, scalar.connection), lagrangian, section)
    gauge = _yang_mills_entry(ctx, stream)
    gauge_lagrangian = yang_mills_lagrangian(gauge)
    field_section = gauge.section()
    lhs += [field_section.pullback(e, order=1) for e in yang_mills_energy_tensor(gauge).contract(X)]
    rhs += current_pullback(horizontal_lift(X, gauge.overconnection), gauge_lagrangian, field_section)
    return ctx.identity(stream, lhs, rhs, chart)


@register('first-variation', "d(jφ*i_YC) + E·(Y - Y⌋dφ) = jφ*(L_Y𝓛) for every lift and section", 'variational')
def _first_variation(ctx: CheckContext) -> IdentityCheck:
    stream = 'first-variation'
    rng = ctx.rng(f'{stream}:lift')
    defects = []
    scalar, section = _scalar_entry(ctx, stream)
    lagrangian = scalar_lagrangian(scalar)
    defects.append(symmetry_defect(random_lift(lagrangian.chart, rng), lagrangian, section))
    gauge = _yang_mills_entry(ctx, stream)
    lagrangian = yang_mills_lagrangian(gauge)
    defects.append(symmetry_defect(random_lift(lagrangian.chart, rng), lagrangian, gauge.section()))
    dirac, spinor = _dirac_entry(ctx, stream)
    lagrangian = dirac_lagrangian(dirac)
    defects.append(symmetry_defect(random_lift(lagrangian.chart, rng), lagrangian, spinor))
    gravity = GravityModel(random_metric(sample_chart(2), ctx.rng(f'{stream}:gravity')))
    lagrangian = gravity_lagrangian(gravity)
    defects.append(symmetry_defect(random_lift(lagrangian.chart, rng), lagrangian, gravity.section()))
    return ctx.defect(stream, defects, [dirac.base, gravity.metric.chart, gauge.metric.chart, scalar.metric.chart])


def free_scalar_lagrangian(metric: MetricField, mass: ExprLike = 1) -> JetLagrangian:
    """ℓ = ½(g^{ab}φ_aφ_b - m²φ²)√|g| for one real field."""
    chart = FiberedChart('R', metric.chart, ('phi',))
    m = chart.m
    kinetic = [mul(inverse_metric_symbol(a, b), chart.jet_symbol(0, a), chart.jet_symbol(0, b))
               for a in range(m) for b in range(m)]
    mass = as_expr(mass)
    density = mul(constant(Fraction(1, 2)), add(*kinetic, neg(mul(mass, mass, symbol('phi'), symbol('phi')))),
                  symbol(VOLUME_SYMBOL))
    return JetLagrangian(chart, density, metric, 'free-scalar')


@register('action-variation-fd', "the finite-difference first variation of the action matches ∫E_iη", 'variational')
def _action_variation(ctx: CheckContext) -> IdentityCheck:
    rng = ctx.rng('action-variation-fd')
    chart = sample_chart(2)
    lagrangian = free_scalar_lagrangian(random_metric(chart, rng), mass=2)
    section = Section(lagrangian.chart, (random_polynomial(scaled_coordinates(chart), rng, 3, Fraction(1, 2)),))
    settings = ctx.settings
    result = action_variation_oracle(lagrangian, section, 0, h=settings.finite_difference_step,
                                     tol=settings.finite_difference_tolerance)
    return ctx.identity('action-variation-fd', [constant(result.finite_difference)], [constant(result.predicted)],
                        chart, tol=settings.finite_difference_tolerance)


# ---------------------------------------------------------------------------
# Matter models
# ---------------------------------------------------------------------------

def _stress_along(lagrangian: JetLagrangian, section: Section) -> np.ndarray:
    stress = metric_stress_tensor(lagrangian)
    return expr_array(stress.shape, lambda a, b: section.pullback(stress[a, b], order=1))


@register('scalar-energy-stress', "g·𝒰 = -2T for the charged scalar", 'matter')
def _scalar_energy_stress(ctx: CheckContext) -> IdentityCheck:
    model, section = _scalar_entry(ctx, 'scalar-energy-stress')
    lagrangian = scalar_lagrangian(model)
    U = canonical_energy_tensor(lagrangian, model.connection).pullback(section)
    lhs = _flat(lower_first(model.metric, U))
    rhs = [mul(-2, e) for e in _flat(_stress_along(lagrangian, section))]
    return ctx.identity('scalar-energy-stress', lhs, rhs, model.metric.chart)


@register('scalar-energy-display', "the scalar P, 𝒰 and T match their closed forms", 'matter')
def _scalar_energy_display(ctx: CheckContext) -> IdentityCheck:
    model, section = _scalar_entry(ctx, 'scalar-energy-display')
    lagrangian = scalar_lagrangian(model)
    lhs = _flat(canonical_energy_tensor(lagrangian, model.connection).pullback(section))
    rhs = _flat(scalar_energy_display(model, section))
    lhs += _flat(_stress_along(lagrangian, section))
    rhs += _flat(scalar_stress_display(model, section))
    P = momentum(lagrangian)
    lhs += [section.pullback(P[a, i], order=1) for a in range(model.metric.dim) for i in range(model.n)]
    rhs += _flat(scalar_momentum_display(model, section))
    return ctx.identity('scalar-energy-display', lhs, rhs, model.metric.chart)


@register('dirac-energy-stress', "𝒰_{ab} + 𝒰_{ba} + 2T_ab - ℓg_ab = 0 for the Dirac spinor", 'matter')
def _dirac_energy_stress(ctx: CheckContext) -> IdentityCheck:
    model, section = _dirac_entry(ctx, 'dirac-energy-stress')
    U = canonical_energy_tensor(dirac_lagrangian(model), model.connection).pullback(section)
    return ctx.defect('dirac-energy-stress', _flat(dirac_symmetrization_defect(model, section, U)), model.base)


@register('dirac-momentum', "P^a = (i/2)ψ̄γ^a√|g| on the spinor fibers", 'matter')
def _dirac_momentum(ctx: CheckContext) -> IdentityCheck:
    model, _ = _dirac_entry(ctx, 'dirac-momentum')
    P = momentum(dirac_lagrangian(model))
    display = dirac_momentum_display(model)
    s = model.spinor_dim
    lhs = [P[a, alpha] for a in range(model.dim) for alpha in range(s)]
    rhs = [display[a, alpha] for a in range(model.dim) for alpha in range(s)]
    return ctx.identity('dirac-momentum', lhs, rhs, model.base)


def _noether_template(ctx: CheckContext, kind: str, lagrangian: JetLagrangian, kappa, connection,
                      section: Section, source=None) -> List[Expr]:
    balance = noether_balance(lagrangian, kappa, connection, section, source)
    terms = template_terms(lagrangian, kappa, section)
    return apply_template(balance, terms, residual_coefficients(kind, ctx.settings.oracle_directory))


@register('scalar-noether-offshell',
          "∇·𝒰 - ½g^{ac}ρ_ab(φ̄∇_cφ - ∇_cφ̄φ)√|g| equals the frozen residual template for the scalar", 'matter')
def _scalar_noether(ctx: CheckContext) -> IdentityCheck:
    model, section = _scalar_entry(ctx, 'scalar-noether-offshell')
    force = [mul(e, model.metric.volume) for e in scalar_onshell_divergence_rhs(model, section)]
    defect = _noether_template(ctx, 'scalar', scalar_lagrangian(model), model.connection, model.base_connection,
                               section, force)
    return ctx.defect('scalar-noether-offshell', defect, model.metric.chart)


@register('dirac-noether-offshell', "∇·𝒰 - F_abψ̄γ^aψ√|g| equals the frozen residual template for the spinor",
          'matter')
def _dirac_noether(ctx: CheckContext) -> IdentityCheck:
    model, section = _dirac_entry(ctx, 'dirac-noether-offshell')
    # 𝒰 feels twice the force ½F_abψ̄γ^aψ of the symmetrized tensor
    force = [mul(2, e, model.metric.volume) for e in dirac_onshell_divergence_rhs(model, section)]
    defect = _noether_template(ctx, 'dirac', dirac_lagrangian(model), model.connection, model.base_connection,
                               section, force)
    return ctx.defect('dirac-noether-offshell', defect, model.base)


def _plane_wave_chart() -> Tuple[Chart, MetricField]:
    chart = Chart('plane', ('t', 'x'))
    return chart, MetricField(chart, [[1, 0], [0, -1]], 'lorentzian')


@register('scalar-plane-wave', "a Klein-Gordon plane wave is critical and conserves 𝒰", 'matter')
def _scalar_plane_wave(ctx: CheckContext) -> IdentityCheck:
    chart, metric = _plane_wave_chart()
    model = ScalarModel(metric, zero_linear_connection(FiberedChart('E', chart, ('phi0',))), mass=4)
    section = model.section([parse_expr('exp(i*(3*x - 5*t))')], [parse_expr('exp(-i*(3*x - 5*t))')])
    lagrangian = scalar_lagrangian(model)
    defect = noether_balance(lagrangian, model.connection, model.base_connection, section)
    defect += euler_lagrange_along(lagrangian, section)
    return ctx.defect('scalar-plane-wave', defect, chart)


@register('dirac-plane-wave', "a free Dirac plane wave is critical and conserves 𝒰 and ψ̄γ^aψ", 'matter')
def _dirac_plane_wave(ctx: CheckContext) -> IdentityCheck:
    chart, _ = _plane_wave_chart()
    model = DiracModel(chart, [[1, 0], [0, 1]], (0, 0), mass=4)
    # (5γ^0 - 3γ^1 - 4)u = 0 for u = (1, 2); the conjugate row is (2, 1)
    wave, conjugate = parse_expr('exp(-i*(5*t - 3*x))'), parse_expr('exp(i*(5*t - 3*x))')
    section = model.section([wave, mul(2, wave)], [mul(2, conjugate), conjugate])
    lagrangian = dirac_lagrangian(model)
    defect = noether_balance(lagrangian, model.connection, model.base_connection, section)
    defect += euler_lagrange_along(lagrangian, section)
    J = dirac_charge_current(model, section)
    defect.append(add(*(diff(J[a], chart.coords[a]) for a in range(chart.dim))))
    return ctx.defect('dirac-plane-wave', defect, chart)


# ---------------------------------------------------------------------------
# Gauge fields
# ---------------------------------------------------------------------------

@register('yang-mills-momentum', "P^{ac}_I = ρ̄^{ac}_I√|g|", 'gauge')
def _yang_mills_momentum(ctx: CheckContext) -> IdentityCheck:
    model = _yang_mills_entry(ctx, 'yang-mills-momentum')
    P = momentum(yang_mills_lagrangian(model))
    display = yang_mills_momentum_display(model)
    bundle = model.bundle
    section = model.section()
    m, r = model.metric.dim, model.structure.rank
    lhs, rhs = [], []
    for a, c, I_ in itertools.product(range(m), range(m), range(r)):
        lhs.append(section.pullback(P[a, bundle.index(c, I_)], order=1))
        rhs.append(display[a, c, I_])
    return ctx.identity('yang-mills-momentum', lhs, rhs, model.metric.chart)


@register('yang-mills-energy-stress', "-½𝒰 = T for the Yang-Mills field", 'gauge')
def _yang_mills_energy_stress(ctx: CheckContext) -> IdentityCheck:
    model = _yang_mills_entry(ctx, 'yang-mills-energy-stress')
    section = model.section()
    U = yang_mills_energy_tensor(model).pullback(section)
    lhs = [mul(constant(Fraction(-1, 2)), e) for e in _flat(lower_first(model.metric, U))]
    rhs = _flat(_stress_along(yang_mills_lagrangian(model), section))
    lhs += _flat(U)
    rhs += _flat(yang_mills_energy_display(model))
    return ctx.identity('yang-mills-energy-stress', lhs, rhs, model.metric.chart)


@register('yang-mills-traceless', "𝒰^a_a = 0 for a gauge field in dimension 4", 'gauge')
def _yang_mills_traceless(ctx: CheckContext) -> IdentityCheck:
    metrics = [g for g in ctx.document_metrics() if g.dim == 4]
    rng = ctx.rng('yang-mills-traceless')
    metric = metrics[0] if metrics else random_metric(sample_chart(4), rng, degree=1)
    model = YangMillsModel(metric, random_gauge_field('u1', metric.chart, rng))
    U = yang_mills_energy_tensor(model).pullback(model.section())
    return ctx.defect('yang-mills-traceless', [add(*(U[a, a] for a in range(4)))], metric.chart)


@register('maxwell-limit', "the abelian 𝒰 is the Maxwell stress-energy tensor on an electrostatic field", 'gauge')
def _maxwell_limit(ctx: CheckContext) -> IdentityCheck:
    rng = ctx.rng('maxwell-limit')
    chart = Chart('minkowski', COORDINATES)
    metric = MetricField(chart, np.diag([1, -1, -1, -1]).tolist(), 'lorentzian')
    spatial = [symbol(name) for name in COORDINATES[1:]]
    potential = [random_polynomial(spatial, rng, 2, Fraction(1, 2)), 0, 0, 0]
    model = YangMillsModel(metric, GaugeField(builtin_structure('u1'), chart, [potential]))
    lhs = _flat(yang_mills_energy_tensor(model).pullback(model.section()))
    rhs = _flat(maxwell_energy_tensor(metric, potential))
    return ctx.identity('maxwell-limit', lhs, rhs, chart)


@register('yang-mills-noether', "∇·𝒰 equals the frozen residual template for the gauge field", 'gauge')
def _yang_mills_noether(ctx: CheckContext) -> IdentityCheck:
    model = _yang_mills_entry(ctx, 'yang-mills-noether')
    m = model.metric.dim
    defect = _noether_template(ctx, 'yang-mills', yang_mills_lagrangian(model), model.overconnection,
                               model.base_connection, model.section(), [ZERO] * m)
    return ctx.defect('yang-mills-noether', defect, model.metric.chart)


@register('total-conservation-offshell', "∇·(𝒰_φ + 𝒰_gauge) equals the frozen residual template", 'gauge')
def _total_conservation_offshell(ctx: CheckContext) -> IdentityCheck:
    stream = 'total-conservation-offshell'
    metric = ctx.metric(stream)
    rng = ctx.rng(stream)
    chart = metric.chart
    u = scaled_coordinates(chart)
    matter = ScalarModel(metric, zero_linear_connection(FiberedChart('E', chart, ('phi0',))), mass=1)
    gauge = YangMillsModel(metric, random_gauge_field('u1', chart, rng))
    model = CoupledModel(matter, gauge)
    section = model.section(matter.section([random_complex(u, rng)], [random_complex(u, rng)]))
    defect = _noether_template(ctx, 'coupled', model.lagrangian(), model.connection, gauge.base_connection, section,
                               [ZERO] * metric.dim)
    return ctx.defect(stream, defect, chart)


@register('total-conservation', "∇·(𝒰_φ + 𝒰_gauge) = 0 on an exact flat solution", 'gauge')
def _total_conservation(ctx: CheckContext) -> IdentityCheck:
    chart = Chart('wave', ('t', 'x', 'y'))
    metric = MetricField(chart, np.diag([1, -1, -1]).tolist(), 'lorentzian')
    matter = ScalarModel(metric, zero_linear_connection(FiberedChart('E', chart, ('phi0',))), mass=1)
    # free Maxwell wave A_y = sin(t - x); φ is the charged Klein-Gordon wave with momentum (5/4, 3/4)
    # dressed by the wave, and φ̄ = 0 keeps the charge current off
    gauge = YangMillsModel(metric, GaugeField(builtin_structure('u1'), chart, [[0, 0, parse_expr('sin(t - x)')]]))
    model = CoupledModel(matter, gauge)
    wave = parse_expr('exp(i*(5/4*x - 7/4*t + sin(2*t - 2*x)/4))')
    section = model.section(matter.section([wave], [0]))
    lagrangian = model.lagrangian()
    defect = noether_balance(lagrangian, model.connection, gauge.base_connection, section, [ZERO] * chart.dim)
    defect += euler_lagrange_along(lagrangian, section)
    return ctx.defect('total-conservation', defect, chart)


# ---------------------------------------------------------------------------
# Geometry and gravity
# ---------------------------------------------------------------------------

def _bianchi_metrics(ctx: CheckContext) -> List[MetricField]:
    metrics = ctx.document_metrics()
    if metrics:
        return metrics
    rng = ctx.rng('contracted-bianchi')
    return [random_metric(sample_chart(2), rng, 'riemannian'), random_metric(sample_chart(3), rng),
            random_metric(sample_chart(3), rng, 'riemannian')]


@register('contracted-bianchi', "∇_aG^a_b = 0", 'gravity')
def _contracted_bianchi(ctx: CheckContext) -> IdentityCheck:
    defect: List[Expr] = []
    metrics = _bianchi_metrics(ctx)
    for metric in metrics:
        connection = levi_civita(metric)
        model = GravityModel(metric, connection)
        defect += divergence(model.curvature.einstein, connection, slot=0).flat()
    return ctx.defect('contracted-bianchi', defect, [g.chart for g in metrics], tol=ctx.settings.third_tolerance)


@register('einstein-vacuum', "the Einstein tensor of the document metric vanishes", 'gravity', universal=False)
def _einstein_vacuum(ctx: CheckContext) -> IdentityCheck:
    metrics = ctx.document_metrics()
    if not metrics:
        raise CheckInputError("einstein-vacuum needs a metric declared in the document")
    metric = metrics[0]
    G = GravityModel(metric).curvature.einstein
    return ctx.defect('einstein-vacuum', G.flat(), metric.chart)


@register('gravity-energy-einstein', "𝒰_grav = -2G√|g| at the Levi-Civita connection", 'gravity')
def _gravity_energy(ctx: CheckContext) -> IdentityCheck:
    model = GravityModel(ctx.metric('gravity-energy-einstein'))
    lhs = _flat(gravity_energy_tensor(model).pullback(model.section()))
    rhs = _flat(einstein_density(model))
    return ctx.identity('gravity-energy-einstein', lhs, rhs, model.metric.chart)


@register('gravity-momentum', "P^{ab}_{cd} = (g^{bd}δ^a_c - g^{ad}δ^b_c)√|g|", 'gravity')
def _gravity_momentum(ctx: CheckContext) -> IdentityCheck:
    model = GravityModel(ctx.metric('gravity-momentum'))
    P = momentum(gravity_lagrangian(model))
    display = gravity_momentum(model.metric)
    bundle = model.bundle
    m = model.dim
    lhs, rhs = [], []
    for a, b, c, d in itertools.product(range(m), repeat=4):
        lhs.append(P[a, bundle.index(b, c, d)])
        rhs.append(display[a, b, c, d])
    return ctx.identity('gravity-momentum', lhs, rhs, model.metric.chart)


@register('gravity-current-identity', "∂_a J^a = -2G^a_b∇_aX^b√|g| for the horizontal lift of X", 'gravity')
def _gravity_current(ctx: CheckContext) -> IdentityCheck:
    metric = ctx.metric('gravity-current-identity')
    X = random_vector(metric.chart, ctx.rng('gravity-current-identity:vector'))
    defect = gravity_current_identity(GravityModel(metric), X)
    return ctx.defect('gravity-current-identity', [defect], metric.chart, tol=ctx.settings.third_tolerance)


@register('lie-derivative-forms', "the partial and covariant forms of L_XΓ agree", 'gravity')
def _lie_forms(ctx: CheckContext) -> IdentityCheck:
    data = ctx.komar('lie-derivative-forms')
    lhs = _flat(lie_derivative_connection(data.connection, data.vector))
    rhs = _flat(lie_derivative_connection_covariant(data.connection, data.vector,
                                                    data.gravity.curvature.riemann))
    return ctx.identity('lie-derivative-forms', lhs, rhs, data.metric.chart, tol=ctx.settings.third_tolerance)


@register('komar-offshell', "∇_bJ^b = 0 for the Komar current of any X", 'gravity')
def _komar_offshell(ctx: CheckContext) -> IdentityCheck:
    data = ctx.komar('komar-offshell')
    return ctx.defect('komar-offshell', [komar_divergence(data)], data.metric.chart,
                      tol=ctx.settings.third_tolerance)


@register('komar-superpotential', "𝒥^b = 2∂_aS^{ab} for the Komar superpotential", 'gravity')
def _komar_superpotential(ctx: CheckContext) -> IdentityCheck:
    data = ctx.komar('komar-superpotential')
    return ctx.defect('komar-superpotential', komar_superpotential_defect(data), data.metric.chart,
                      tol=ctx.settings.third_tolerance)


@register('komar-lift', "the gravitational current of the Komar lift is the Komar current", 'gravity')
def _komar_lift(ctx: CheckContext) -> IdentityCheck:
    data = ctx.komar('komar-lift')
    return ctx.identity('komar-lift', komar_lift_current(data), komar_current(data).current, data.metric.chart,
                        tol=ctx.settings.third_tolerance)


@register('komar-intermediate', "P·(R⌋X - Ric⊗X) = (2Ric⌋X - R·X)√|g|", 'gravity')
def _komar_intermediate(ctx: CheckContext) -> IdentityCheck:
    data = ctx.komar('komar-intermediate')
    lhs, rhs = komar_intermediate(data)
    return ctx.identity('komar-intermediate', lhs, rhs, data.metric.chart)


def _document_sectors(ctx: CheckContext, metric: MetricField) -> List[MatterSector]:
    sectors = []
    if ctx.document is None:
        return sectors
    for entry in ctx.document.models.values():
        if entry.kind == 'scalar' and entry.model.metric is metric:
            sectors.append(MatterSector(scalar_lagrangian(entry.model), entry.model.connection, entry.section))
        elif entry.kind == 'yangmills' and entry.model.metric is metric:
            sectors.append(MatterSector(yang_mills_lagrangian(entry.model), entry.model.overconnection,
                                        entry.model.section(), [ZERO] * metric.dim))
    return sectors


@register('einstein-from-currents-identity',
          "∂(𝒰_tot⌋X) - X·ΣE∇φ = -2(G√|g| + T)∇X for gravity with scalar and gauge matter", 'gravity')
def _einstein_identity(ctx: CheckContext) -> IdentityCheck:
    stream = 'einstein-from-currents-identity'
    metric = ctx.metric(stream)
    rng = ctx.rng(stream)
    scalar, section = random_scalar(metric, rng)
    gauge = YangMillsModel(metric, random_gauge_field('u1', metric.chart, rng))
    sectors = [MatterSector(scalar_lagrangian(scalar), scalar.connection, section),
               MatterSector(yang_mills_lagrangian(gauge), gauge.overconnection, gauge.section(),
                            [ZERO] * metric.dim)]
    X = random_vector(metric.chart, ctx.rng(f'{stream}:vector'))
    defect = einstein_from_currents(GravityModel(metric), X, sectors)
    return ctx.defect(stream, [defect], metric.chart, tol=ctx.settings.third_tolerance)


@register('einstein-from-currents', "the total current is conserved for all X: the Einstein equations hold",
          'gravity', universal=False)
def _einstein_from_currents(ctx: CheckContext) -> IdentityCheck:
    metrics = ctx.document_metrics()
    if not metrics:
        raise CheckInputError("einstein-from-currents needs a metric declared in the document")
    metric = metrics[0]
    X = random_vector(metric.chart, ctx.rng('einstein-from-currents:vector'))
    balance, _ = total_current_balance(GravityModel(metric), X, _document_sectors(ctx, metric))
    return ctx.defect('einstein-from-currents', [balance], metric.chart, tol=ctx.settings.third_tolerance)


# ---------------------------------------------------------------------------
# Engineering
# ---------------------------------------------------------------------------

FD_SAMPLES = (
    'sin(x*y/2) + x^3/3',
    'exp(x/2)*cos(y)',
    'log(2 + x^2)*y',
    'sqrt(3 + x*y)',
    '(1 + x/2)^3/(2 + y)',
    'x*y*exp(-x^2)',
)


@register('finite-difference-diff', "symbolic derivatives agree with central differences", 'engineering')
def _finite_difference(ctx: CheckContext) -> IdentityCheck:
    rng = ctx.rng('finite-difference-diff')
    chart = Chart('fd', ('x', 'y'))
    h = ctx.settings.finite_difference_step
    lhs, rhs = [], []
    for text in FD_SAMPLES:
        e = parse_expr(text)
        for var in chart.coords:
            point = {name: float(rng.uniform(-0.9, 0.9)) for name in chart.coords}
            exact = evaluate_many([diff(e, var)], {name: [value] for name, value in point.items()})[0][0]
            lhs.append(constant(finite_difference_oracle(e, var, point, h).real))
            rhs.append(constant(float(exact.real)))
    return ctx.identity('finite-difference-diff', lhs, rhs, chart, tol=ctx.settings.finite_difference_tolerance)


@register('hodge-orientation', "*(dt∧dx) = -ε·dy∧dz on Minkowski space, and ** = -1 on 2-forms", 'engineering')
def _hodge(ctx: CheckContext) -> IdentityCheck:
    orientation = ctx.settings.orientation
    chart = Chart('minkowski', COORDINATES)
    minkowski = MetricField(chart, np.diag([1, -1, -1, -1]).tolist(), 'lorentzian')
    form = np.zeros((4, 4), dtype=object)
    form[0, 1], form[1, 0] = 1, -1
    star = hodge_star(minkowski, TensorField(chart, 'dd', form), orientation)
    expected = np.zeros((4, 4), dtype=object)
    expected[2, 3], expected[3, 2] = -orientation, orientation
    lhs, rhs = star.flat(), _flat(expected)

    rng = ctx.rng('hodge-orientation')
    metric = random_metric(chart, rng, degree=1)
    u = scaled_coordinates(chart)
    values = np.empty((4, 4), dtype=object)
    for a in range(4):
        values[a, a] = ZERO
        for b in range(a + 1, 4):
            values[a, b] = random_polynomial(u, rng, 1, Fraction(1, 2))
            values[b, a] = neg(values[a, b])
    phi = TensorField(chart, 'dd', values)
    twice = hodge_star(metric, hodge_star(metric, phi, orientation), orientation)
    lhs += twice.flat()
    rhs += [neg(e) for e in phi.flat()]
    return ctx.identity('hodge-orientation', lhs, rhs, chart)


# ---------------------------------------------------------------------------
# Selection and running
# ---------------------------------------------------------------------------

def select_checks(target: str, document: Optional['Document'] = None) -> List[str]:
    """
    Check ids for ``target``: 'all', a suite name or a single check id.

    'all' and suites run the universal checks plus whatever the document
    declares, in registry order.

    Raises:
        UnknownCheckError: if ``target`` names neither a suite nor a check
    """
    declared = {c.id for c in document.checks} if document is not None else set()
    if target == ALL:
        return [cid for cid, entry in REGISTRY.items() if entry.universal or cid in declared]
    if target in SUITES:
        return [cid for cid, entry in REGISTRY.items()
                if entry.suite == target and (entry.universal or cid in declared)]
    if target in REGISTRY:
        return [target]
    raise UnknownCheckError(target)


def build_check(check_id: str, ctx: CheckContext) -> IdentityCheck:
    if check_id not in REGISTRY:
        raise UnknownCheckError(check_id)
    check = REGISTRY[check_id].build(ctx)
    logger.debug(f"Built check {check_id} with {len(check.lhs)} component(s) over {sorted(check.domain)}")
    return check


def run_checks(check_ids: Sequence[str], ctx: CheckContext, mutate: bool = False) -> List[CheckResult]:
    """
    Build and run each check in order. A builder that raises becomes an
    ERROR result carrying the message; the other checks still run.
    """
    results = []
    for check_id in check_ids:
        try:
            check = build_check(check_id, ctx)
        except UnknownCheckError:
            raise
        except Exception as e:
            entry = REGISTRY[check_id]
            logger.error(f"Check {check_id} could not be built: {e}")
            results.append(CheckResult(check_id, entry.anchor, ERROR, float('inf'), {}, ctx.settings.trials,
                                       ctx.seed, ctx.settings.tolerance, 0.0, f"{type(e).__name__}: {e}"))
            continue
        results.append(run_check(check, seed=ctx.seed, mutate=mutate))
    return results
