"""
Matter fields minimally coupled to a linear connection: the charged scalar
(a field and its conjugate as independent sections of dual fibers) and the
Dirac spinor on a tetrad background.
"""

import logging
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from typing import List, Sequence, Tuple

import numpy as np

from .connections import (
    FiberedChart, LinearConnection, Section, concat_sections, direct_sum, dual_connection, linear_curvature,
    section_covariant_derivative,
)
from .geometry import (
    AffineConnectionField, Chart, DimensionError, MetricField, SingularMetricError, determinant, expr_array,
    inverse_matrix, levi_civita, to_expr_array,
)
from .symexpr import HALF, I, ZERO, Expr, ExprLike, add, as_expr, constant, diff, mul, neg, symbol
from .variational import VOLUME_SYMBOL, JetLagrangian, inverse_metric_symbol, lower_first

logger = logging.getLogger(__name__)

QUARTER = constant(Fraction(1, 4))
HALF_I = constant(0, Fraction(1, 2))
QUARTER_I = constant(0, Fraction(1, 4))


def _jet_covariant_derivatives(chart: FiberedChart, kappa: LinearConnection) -> np.ndarray:
    """∇[a, σ] = y^σ_a - K^σ_a(x, y) as jet expressions."""
    general = kappa.general()
    return expr_array((chart.m, chart.n), lambda a, s: add(chart.jet_symbol(s, a), neg(general[s, a])))


def _parameters(mass: Expr) -> Tuple[str, ...]:
    return tuple(sorted(mass.free))


# ---------------------------------------------------------------------------
# Charged scalar
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class ScalarModel:
    """
    Charged scalar φ^i with conjugate φ̄_i on the dual fiber.

    ``potential`` is the linear connection κ on the field fiber; the conjugate
    sees the dual connection ǩ = -κᵀ. The mass may be a rational or a symbol.
    """

    metric: MetricField
    potential: LinearConnection
    mass: Expr = ZERO
    name: str = 'scalar'

    def __post_init__(self):
        object.__setattr__(self, 'mass', as_expr(self.mass))
        if self.potential.chart.base != self.metric.chart:
            raise DimensionError("metric and connection live on different charts")

    @property
    def field_chart(self) -> FiberedChart:
        return self.potential.chart

    @cached_property
    def conjugate_chart(self) -> FiberedChart:
        return self.field_chart.dual()

    @cached_property
    def chart(self) -> FiberedChart:
        return self.field_chart.direct_sum(self.conjugate_chart, self.name)

    @cached_property
    def connection(self) -> LinearConnection:
        """K = κ ⊕ ǩ on the doubled fiber."""
        return direct_sum(self.potential, dual_connection(self.potential, self.conjugate_chart), self.chart)

    @cached_property
    def base_connection(self) -> AffineConnectionField:
        return levi_civita(self.metric)

    @property
    def n(self) -> int:
        return self.field_chart.n

    def section(self, phi: Sequence[ExprLike], phibar: Sequence[ExprLike]) -> Section:
        return concat_sections(self.chart, Section(self.field_chart, tuple(phi)),
                               Section(self.conjugate_chart, tuple(phibar)))


def scalar_density(model: ScalarModel, chart: FiberedChart, nabla: np.ndarray) -> Expr:
    """
    ℓ = ½(g^{ab}∇_aφ̄_i∇_bφ^i - m²φ̄_iφ^i)√|g| as a metric template, for jet
    covariant derivatives ``nabla[a, σ]`` over the first 2n fiber coordinates
    of ``chart``.
    """
    m, n = chart.m, model.n
    kinetic = [mul(inverse_metric_symbol(a, b), nabla[a, n + i], nabla[b, i])
               for a in range(m) for b in range(m) for i in range(n)]
    pairing = add(*(mul(symbol(chart.fiber[n + i]), symbol(chart.fiber[i])) for i in range(n)))
    mass_term = mul(model.mass, model.mass, pairing)
    return mul(HALF, add(*kinetic, neg(mass_term)), symbol(VOLUME_SYMBOL))


def scalar_lagrangian(model: ScalarModel) -> JetLagrangian:
    chart = model.chart
    density = scalar_density(model, chart, _jet_covariant_derivatives(chart, model.connection))
    logger.debug(f"Scalar Lagrangian '{model.name}' built on {chart.m}+{chart.n} dimensions")
    return JetLagrangian(chart, density, model.metric, model.name, _parameters(model.mass))


def scalar_momentum_display(model: ScalarModel, section: Section) -> np.ndarray:
    """P^a_i = ½g^{ac}∇_cφ̄_i√|g| along the section, for the field components only."""
    g = model.metric
    m, n = g.dim, model.n
    nabla = section_covariant_derivative(model.connection, section)
    return expr_array((m, n), lambda a, i: mul(HALF, g.volume, add(*(mul(g.inverse[a, c], nabla[c, n + i])
                                                                    for c in range(m)))))


def _scalar_pairings(model: ScalarModel, section: Section) -> np.ndarray:
    """S[a, b] = ∇_aφ̄_i∇_bφ^i + ∇_bφ̄_i∇_aφ^i."""
    m, n = model.metric.dim, model.n
    nabla = section_covariant_derivative(model.connection, section)
    return expr_array((m, m), lambda a, b: add(*(add(mul(nabla[a, n + i], nabla[b, i]), mul(nabla[b, n + i], nabla[a, i]))
                                                 for i in range(n))))


def scalar_energy_display(model: ScalarModel, section: Section) -> np.ndarray:
    """𝒰^a_b = ℓδ^a_b - ½g^{ac}(∇_cφ̄_i∇_bφ^i + ∇_bφ̄_i∇_cφ^i)√|g| along the section."""
    g = model.metric
    m = g.dim
    ell = section.pullback(scalar_lagrangian(model).resolved, order=1)
    pairs = _scalar_pairings(model, section)

    def component(a: int, b: int) -> Expr:
        value = neg(mul(HALF, g.volume, add(*(mul(g.inverse[a, c], pairs[c, b]) for c in range(m)))))
        return add(value, ell) if a == b else value

    return expr_array((m, m), component)


def scalar_stress_display(model: ScalarModel, section: Section) -> np.ndarray:
    """T_ab = ¼∇_{{a}φ̄_i∇_{b}}φ^i√|g| - ½g_abℓ along the section."""
    g = model.metric
    m = g.dim
    ell = section.pullback(scalar_lagrangian(model).resolved, order=1)
    pairs = _scalar_pairings(model, section)
    return expr_array((m, m), lambda a, b: add(mul(QUARTER, pairs[a, b], g.volume), neg(mul(HALF, g[a, b], ell))))


def scalar_onshell_divergence_rhs(model: ScalarModel, section: Section) -> List[Expr]:
    """
    ½g^{ac}ρ_ab^i_j(φ̄_i∇_cφ^j - ∇_cφ̄_iφ^j), the divergence of 𝒰̆ on
    critical sections. Multiply by √|g| for the force in the density form.
    """
    g = model.metric
    m, n = g.dim, model.n
    rho = linear_curvature(model.potential)
    nabla = section_covariant_derivative(model.connection, section)
    phi = section.components[:n]
    phibar = section.components[n:2 * n]
    result = []
    for b in range(m):
        terms = []
        for a in range(m):
            for c in range(m):
                if g.inverse[a, c] is ZERO:
                    continue
                for i in range(n):
                    for j in range(n):
                        if rho[a, b, i, j] is ZERO:
                            continue
                        pairing = add(mul(phibar[i], nabla[c, j]), neg(mul(nabla[c, n + i], phi[j])))
                        terms.append(mul(g.inverse[a, c], rho[a, b, i, j], pairing))
        result.append(mul(HALF, add(*terms)))
    return result


# ---------------------------------------------------------------------------
# Dirac spinor
# ---------------------------------------------------------------------------

def _c(re, im=0) -> Expr:
    return constant(re, im)


def _matrix(rows) -> np.ndarray:
    return to_expr_array([[_c(*entry) if isinstance(entry, tuple) else _c(entry) for entry in row] for row in rows])


def _block(upper_left, upper_right, lower_left, lower_right) -> list:
    return [upper_left[0] + upper_right[0], upper_left[1] + upper_right[1],
            lower_left[0] + lower_right[0], lower_left[1] + lower_right[1]]


_Z2 = [[0, 0], [0, 0]]
_ONE2 = [[1, 0], [0, 1]]
_MINUS_ONE2 = [[-1, 0], [0, -1]]
_SIGMA = (
    [[0, 1], [1, 0]],
    [[0, (0, -1)], [(0, 1), 0]],
    [[1, 0], [0, -1]],
)


def _negate_rows(rows) -> list:
    return [[(-e[0], -e[1]) if isinstance(e, tuple) else -e for e in row] for row in rows]


MINKOWSKI = {2: (1, -1), 4: (1, -1, -1, -1)}


def gamma_matrices(dim: int) -> np.ndarray:
    """
    Constant Dirac matrices γ^λ as an [λ, α, β] array, with
    {γ^λ, γ^μ} = 2η^{λμ} for η = diag(1, -1, ...).

    Dimension 2 uses γ^0 = σ₁, γ^1 = iσ₂; dimension 4 the Dirac representation.
    """
    if dim == 2:
        matrices = [_matrix([[0, 1], [1, 0]]), _matrix([[0, 1], [-1, 0]])]
    elif dim == 4:
        matrices = [_matrix(_block(_ONE2, _Z2, _Z2, _MINUS_ONE2))]
        for sigma in _SIGMA:
            matrices.append(_matrix(_block(_Z2, sigma, _negate_rows(sigma), _Z2)))
    else:
        raise DimensionError(f"Dirac matrices are provided for dimensions 2 and 4, not {dim}")
    return np.array(matrices, dtype=object)


def matmul(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    n, k, p = A.shape[0], A.shape[1], B.shape[1]
    return expr_array((n, p), lambda i, j: add(*(mul(A[i, h], B[h, j]) for h in range(k)
                                                 if A[i, h] is not ZERO and B[h, j] is not ZERO)))


def _is_scalar_matrix(matrix: np.ndarray, value: int) -> bool:
    size = matrix.shape[0]
    return all(as_expr(matrix[i, j]) is (constant(value) if i == j else ZERO)
               for i in range(size) for j in range(size))


def clifford_defects(gammas: np.ndarray, eta: Sequence[int]) -> List[Tuple[int, int]]:
    """Index pairs (λ, μ) where {γ^λ, γ^μ} ≠ 2η^{λμ}·1 exactly."""
    count = gammas.shape[0]
    bad = []
    for lam in range(count):
        for mu in range(lam, count):
            anti = matmul(gammas[lam], gammas[mu]) + matmul(gammas[mu], gammas[lam])
            if not _is_scalar_matrix(anti, 2 * eta[lam] if lam == mu else 0):
                bad.append((lam, mu))
    return bad


@dataclass(frozen=True, eq=False)
class DiracModel:
    """
    Dirac spinor ψ^α and its conjugate ψ̄_α on a tetrad background.

    ``tetrad[λ, a]`` = θ^λ_a; the metric is g_ab = η_λμ θ^λ_a θ^μ_b and the
    spacetime connection its Levi-Civita connection. ``potential`` holds A_a.
    """

    base: Chart
    tetrad: np.ndarray
    potential: Tuple[Expr, ...]
    mass: Expr = ZERO
    name: str = 'dirac'

    def __post_init__(self):
        m = self.base.dim
        object.__setattr__(self, 'tetrad', to_expr_array(self.tetrad, (m, m)))
        object.__setattr__(self, 'potential', tuple(as_expr(A) for A in self.potential))
        object.__setattr__(self, 'mass', as_expr(self.mass))
        if len(self.potential) != m:
            raise DimensionError(f"potential has {len(self.potential)} components on a {m}-dimensional chart")
        bad = clifford_defects(self.gammas, self.eta)
        if bad:
            raise ValueError(f"gamma matrices violate the Clifford relation at {bad[0]}")

    @property
    def dim(self) -> int:
        return self.base.dim

    @cached_property
    def eta(self) -> Tuple[int, ...]:
        return MINKOWSKI[self.dim]

    @cached_property
    def gammas(self) -> np.ndarray:
        return gamma_matrices(self.dim)

    @property
    def spinor_dim(self) -> int:
        return self.gammas.shape[1]

    @cached_property
    def metric(self) -> MetricField:
        m = self.dim
        theta = self.tetrad
        components = np.empty((m, m), dtype=object)
        for a in range(m):
            for b in range(a, m):
                components[a, b] = components[b, a] = add(*(mul(self.eta[lam], theta[lam, a], theta[lam, b])
                                                            for lam in range(m)))
        return MetricField(self.base, components, 'lorentzian')

    @cached_property
    def base_connection(self) -> AffineConnectionField:
        return levi_civita(self.metric)

    @cached_property
    def inverse_tetrad(self) -> np.ndarray:
        """inverse_tetrad[a, λ] = θ_λ^a, the frame vectors."""
        if determinant(self.tetrad) is ZERO:
            raise SingularMetricError("tetrad is degenerate")
        try:
            return inverse_matrix(self.tetrad)
        except ZeroDivisionError:
            raise SingularMetricError("tetrad is degenerate") from None

    @cached_property
    def spin_connection(self) -> np.ndarray:
        """ω[a, μ, λ] = -θ^μ_b(∂_aθ_λ^b - Γ_a^b_c θ_λ^c), the frame form of the Levi-Civita connection."""
        m = self.dim
        theta, frame = self.tetrad, self.inverse_tetrad
        gamma = self.base_connection.gamma
        x = self.base.coords

        def nabla_frame(a: int, b: int, lam: int) -> Expr:
            return add(diff(frame[b, lam], x[a]), *(neg(mul(gamma[b, a, c], frame[c, lam])) for c in range(m)))

        covariant = expr_array((m, m, m), nabla_frame)   # [a, b, λ]
        return expr_array((m, m, m), lambda a, mu, lam: neg(add(*(mul(theta[mu, b], covariant[a, b, lam])
                                                                  for b in range(m)))))

    @cached_property
    def spin_matrices(self) -> np.ndarray:
        """¼ω_a^{μν}γ_μγ_ν as an [a, α, β] array."""
        m, s = self.dim, self.spinor_dim
        omega = self.spin_connection
        products = {(mu, nu): matmul(self.gammas[mu], self.gammas[nu]) for mu in range(m) for nu in range(m) if mu != nu}

        def entry(a: int, alpha: int, beta: int) -> Expr:
            # ω^{μν}γ_μγ_ν = ω_a^μ_ν η_{μμ} γ^μγ^ν for diagonal η
            return add(*(mul(QUARTER, self.eta[mu], omega[a, mu, nu], products[mu, nu][alpha, beta])
                         for (mu, nu) in products if omega[a, mu, nu] is not ZERO))

        return expr_array((m, s, s), entry)

    @cached_property
    def spinor_matrices(self) -> np.ndarray:
        """Γ̌_a = iA_a·1 + ¼ω_a^{μν}γ_μγ_ν."""
        m, s = self.dim, self.spinor_dim
        spin = self.spin_matrices
        return expr_array((m, s, s), lambda a, i, j: add(spin[a, i, j], mul(I, self.potential[a])) if i == j
                          else spin[a, i, j])

    @cached_property
    def spinor_chart(self) -> FiberedChart:
        return FiberedChart('psi', self.base, tuple(f'psi{alpha}' for alpha in range(self.spinor_dim)))

    @cached_property
    def conjugate_chart(self) -> FiberedChart:
        return self.spinor_chart.dual()

    @cached_property
    def chart(self) -> FiberedChart:
        return self.spinor_chart.direct_sum(self.conjugate_chart, self.name)

    @cached_property
    def spinor_connection(self) -> LinearConnection:
        return LinearConnection(self.spinor_chart, self.spinor_matrices)

    @cached_property
    def connection(self) -> LinearConnection:
        """∇ψ = ∂ψ - Γ̌ψ on the spinor block, ∇ψ̄ = ∂ψ̄ + ψ̄Γ̌ on the conjugate block."""
        return direct_sum(self.spinor_connection, dual_connection(self.spinor_connection, self.conjugate_chart),
                          self.chart)

    @cached_property
    def gamma_upper(self) -> np.ndarray:
        """γ^a = θ_λ^a γ^λ, an [a, α, β] array."""
        m, s = self.dim, self.spinor_dim
        frame = self.inverse_tetrad
        return expr_array((m, s, s), lambda a, i, j: add(*(mul(frame[a, lam], self.gammas[lam, i, j])
                                                           for lam in range(m))))

    @cached_property
    def gamma_lower(self) -> np.ndarray:
        """γ_a = η_λλ θ^λ_a γ^λ."""
        m, s = self.dim, self.spinor_dim
        theta = self.tetrad
        return expr_array((m, s, s), lambda a, i, j: add(*(mul(self.eta[lam], theta[lam, a], self.gammas[lam, i, j])
                                                           for lam in range(m))))

    @cached_property
    def field_strength(self) -> np.ndarray:
        """F_ab = ∂_bA_a - ∂_aA_b, so that the U(1) part of the curvature is iF."""
        m = self.dim
        x = self.base.coords
        A = self.potential
        return expr_array((m, m), lambda a, b: add(diff(A[a], x[b]), neg(diff(A[b], x[a]))))

    def section(self, psi: Sequence[ExprLike], psibar: Sequence[ExprLike]) -> Section:
        return concat_sections(self.chart, Section(self.spinor_chart, tuple(psi)),
                               Section(self.conjugate_chart, tuple(psibar)))


def _bilinear(left: Sequence[Expr], matrix: np.ndarray, right: Sequence[Expr]) -> Expr:
    """left_α M^α_β right^β."""
    s = len(left)
    return add(*(mul(left[i], matrix[i, j], right[j]) for i in range(s) for j in range(s) if matrix[i, j] is not ZERO))


def dirac_density(model: DiracModel, chart: FiberedChart, nabla: np.ndarray) -> Expr:
    """ℓ = ((i/2)(ψ̄γ^a∇_aψ - ∇_aψ̄γ^aψ) - mψ̄ψ)√|g|, with the metric resolved."""
    m, s = model.dim, model.spinor_dim
    psi = [symbol(name) for name in chart.fiber[:s]]
    psibar = [symbol(name) for name in chart.fiber[s:2 * s]]
    kinetic = []
    for a in range(m):
        kinetic.append(_bilinear(psibar, model.gamma_upper[a], [nabla[a, i] for i in range(s)]))
        kinetic.append(neg(_bilinear([nabla[a, s + i] for i in range(s)], model.gamma_upper[a], psi)))
    mass_term = mul(model.mass, add(*(mul(psibar[i], psi[i]) for i in range(s))))
    return mul(add(mul(HALF_I, add(*kinetic)), neg(mass_term)), model.metric.volume)


def dirac_lagrangian(model: DiracModel) -> JetLagrangian:
    chart = model.chart
    s = model.spinor_dim
    density = dirac_density(model, chart, _jet_covariant_derivatives(chart, model.connection))
    logger.debug(f"Dirac Lagrangian '{model.name}' built with {s}-component spinors in dimension {model.dim}")
    return JetLagrangian(chart, density, model.metric, model.name, _parameters(model.mass))


def dirac_momentum_display(model: DiracModel) -> np.ndarray:
    """P^a_α = (i/2)(ψ̄γ^a)_α√|g| in jet coordinates."""
    chart = model.chart
    m, s = model.dim, model.spinor_dim
    psibar = [symbol(name) for name in chart.fiber[s:2 * s]]
    return expr_array((m, s), lambda a, alpha: mul(HALF_I, model.metric.volume,
                                                   add(*(mul(psibar[i], model.gamma_upper[a, i, alpha])
                                                         for i in range(s)))))


def _dirac_bilinears(model: DiracModel, section: Section, gammas: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """B[a, b] = ψ̄γ_a∇_bψ and C[a, b] = ∇_bψ̄γ_aψ along the section."""
    m, s = model.dim, model.spinor_dim
    nabla = section_covariant_derivative(model.connection, section)
    psi, psibar = section.components[:s], section.components[s:2 * s]
    B = expr_array((m, m), lambda a, b: _bilinear(psibar, gammas[a], [nabla[b, i] for i in range(s)]))
    C = expr_array((m, m), lambda a, b: _bilinear([nabla[b, s + i] for i in range(s)], gammas[a], psi))
    return B, C


def dirac_energy_display(model: DiracModel, section: Section) -> np.ndarray:
    """𝒰^a_b = ℓδ^a_b - (i/2)(ψ̄γ^a∇_bψ - ∇_bψ̄γ^aψ)√|g| along the section."""
    m = model.dim
    ell = section.pullback(dirac_lagrangian(model).resolved, order=1)
    B, C = _dirac_bilinears(model, section, model.gamma_upper)

    def component(a: int, b: int) -> Expr:
        value = neg(mul(HALF_I, model.metric.volume, add(B[a, b], neg(C[a, b]))))
        return add(value, ell) if a == b else value

    return expr_array((m, m), component)


def dirac_stress_tensor(model: DiracModel, section: Section) -> np.ndarray:
    """
    T_ab = (i/4)(ψ̄γ_{{a}∇_{b}}ψ - ∇_{{a}ψ̄γ_{b}}ψ)√|g| - ½ℓg_ab along the
    section, braces summing both orders.
    """
    g = model.metric
    m = model.dim
    ell = section.pullback(dirac_lagrangian(model).resolved, order=1)
    B, C = _dirac_bilinears(model, section, model.gamma_lower)

    def component(a: int, b: int) -> Expr:
        symmetric = add(B[a, b], B[b, a], neg(C[b, a]), neg(C[a, b]))
        return add(mul(QUARTER_I, symmetric, g.volume), neg(mul(HALF, ell, g[a, b])))

    return expr_array((m, m), component)


def dirac_symmetrization_defect(model: DiracModel, section: Section, mixed: np.ndarray) -> np.ndarray:
    """
    𝒰_{{ab}} + 2T_ab - ℓg_ab for the canonical tensor ``mixed`` (𝒰^a_b along the
    section); zero for every section, so 𝒰_{{ab}} = -2T_ab wherever ℓ vanishes.
    """
    g = model.metric
    m = model.dim
    ell = section.pullback(dirac_lagrangian(model).resolved, order=1)
    lowered = lower_first(g, mixed)
    T = dirac_stress_tensor(model, section)
    return expr_array((m, m), lambda a, b: add(lowered[a, b], lowered[b, a], mul(2, T[a, b]),
                                               neg(mul(ell, g[a, b]))))


def dirac_onshell_divergence_rhs(model: DiracModel, section: Section) -> List[Expr]:
    """
    ½F_abψ̄γ^aψ, the divergence of T̆ on critical sections.

    The canonical 𝒰 feels twice this force: ∇_a𝒰^a_b = F_abψ̄γ^aψ√|g| on
    critical sections, the spin-curvature part dropping out by the first
    Bianchi identity.
    """
    m, s = model.dim, model.spinor_dim
    psi, psibar = section.components[:s], section.components[s:2 * s]
    F = model.field_strength
    current = [_bilinear(psibar, model.gamma_upper[a], psi) for a in range(m)]
    return [mul(HALF, add(*(mul(F[a, b], current[a]) for a in range(m) if F[a, b] is not ZERO))) for b in range(m)]


def dirac_charge_current(model: DiracModel, section: Section) -> List[Expr]:
    """J^a = ψ̄γ^aψ√|g|."""
    s = model.spinor_dim
    psi, psibar = section.components[:s], section.components[s:2 * s]
    return [mul(_bilinear(psibar, model.gamma_upper[a], psi), model.metric.volume) for a in range(model.dim)]
