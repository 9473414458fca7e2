"""
Base-manifold geometry on a single chart.

Index conventions: a base connection is stored as ``gamma[c, a, b]`` meaning
Γ_a^c_b, the coefficient of a linear connection of TM acting as
∇_a v^c = ∂_a v^c - Γ_a^c_b v^b. The Levi-Civita connection therefore stores
the negated Christoffel symbols. Curvature of any linear connection is
ρ_ab = ∂_b κ_a - ∂_a κ_b + [κ_a, κ_b], so that [∇_a, ∇_b] = ρ_ab.
"""

import itertools
import logging
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .symexpr import (
    HALF, ONE, ZERO, Domain, EvaluationError, Expr, add, as_expr, diff, evaluate_many,
    mul, neg, quotient, sample_points, sqrt,
)

logger = logging.getLogger(__name__)

DEFAULT_INTERVAL = (-1.0, 1.0)


class DimensionError(ValueError):
    """Arrays or operations do not fit the chart dimension."""


class SingularMetricError(ValueError):
    """The metric determinant vanishes at a sampled point."""

    def __init__(self, message: str, point: Optional[Dict[str, float]] = None):
        self.point = point or {}
        super().__init__(message)


class NonSymmetricConnectionError(ValueError):
    """A symmetric base connection was required."""


def expr_array(shape: Tuple[int, ...], build: Callable[..., Expr]) -> np.ndarray:
    """Object array of Exprs with ``array[idx] = build(*idx)``."""
    array = np.empty(shape, dtype=object)
    for index in np.ndindex(*shape):
        array[index] = as_expr(build(*index))
    return array


def to_expr_array(values, shape: Optional[Tuple[int, ...]] = None) -> np.ndarray:
    """Convert nested sequences of expressions or numbers to an object array."""
    if isinstance(values, np.ndarray) and values.dtype == object and all(isinstance(v, Expr) for v in values.flat):
        array = values
    else:
        nested = np.array(values, dtype=object)
        array = np.empty(nested.shape, dtype=object)
        for index in np.ndindex(*nested.shape):
            array[index] = as_expr(nested[index])
    if shape is not None and array.shape != tuple(shape):
        raise DimensionError(f"expected shape {tuple(shape)}, got {array.shape}")
    return array


@dataclass(frozen=True)
class Chart:
    """A coordinate chart with a default sampling box."""

    name: str
    coords: Tuple[str, ...]
    box: Tuple[Tuple[float, float], ...] = ()

    def __post_init__(self):
        coords = tuple(self.coords)
        object.__setattr__(self, 'coords', coords)
        if not coords:
            raise DimensionError(f"chart '{self.name}' needs at least one coordinate")
        if len(set(coords)) != len(coords):
            raise ValueError(f"chart '{self.name}' has repeated coordinate names")
        box = tuple(tuple(map(float, interval)) for interval in self.box) or (DEFAULT_INTERVAL,) * len(coords)
        if len(box) != len(coords):
            raise DimensionError(f"chart '{self.name}': box has {len(box)} intervals for {len(coords)} coordinates")
        for name, (low, high) in zip(coords, box):
            if not low < high:
                raise ValueError(f"chart '{self.name}': empty interval for '{name}'")
        object.__setattr__(self, 'box', box)

    @property
    def dim(self) -> int:
        return len(self.coords)

    def domain(self) -> Dict[str, Tuple[float, float]]:
        return dict(zip(self.coords, self.box))

    def center(self) -> Dict[str, float]:
        return {name: 0.5 * (low + high) for name, (low, high) in zip(self.coords, self.box)}


@dataclass(frozen=True, eq=False)
class TensorField:
    """
    Dense array of component expressions.

    ``signature`` has one letter per slot: 'u' (upper base index), 'd' (lower
    base index) or 'f' (fiber index of any extent). Base slots have extent m.
    """

    chart: Chart
    signature: str
    components: np.ndarray
    density: bool = False

    def __post_init__(self):
        array = to_expr_array(self.components)
        object.__setattr__(self, 'components', array)
        if array.ndim != len(self.signature):
            raise DimensionError(f"signature '{self.signature}' does not match array rank {array.ndim}")
        for slot, extent in zip(self.signature, array.shape):
            if slot not in 'udf':
                raise ValueError(f"unknown slot kind '{slot}'")
            if slot != 'f' and extent != self.chart.dim:
                raise DimensionError(f"base slot has extent {extent}, chart dimension is {self.chart.dim}")

    def __getitem__(self, index):
        return self.components[index]

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.components.shape

    def flat(self) -> List[Expr]:
        return list(self.components.reshape(-1))

    def map(self, fn: Callable[[Expr], Expr]) -> 'TensorField':
        return TensorField(self.chart, self.signature, expr_array(self.shape, lambda *i: fn(self.components[i])),
                           self.density)


def zeros(chart: Chart, signature: str) -> TensorField:
    return TensorField(chart, signature, expr_array((chart.dim,) * len(signature), lambda *i: ZERO))


# ---------------------------------------------------------------------------
# Determinants and inverses
# ---------------------------------------------------------------------------

def determinant(matrix: np.ndarray) -> Expr:
    """Exact determinant by cofactor expansion, skipping zero entries."""
    n = matrix.shape[0]
    memo: Dict[Tuple[int, Tuple[int, ...]], Expr] = {}

    def minor(row: int, cols: Tuple[int, ...]) -> Expr:
        if row == n:
            return ONE
        key = (row, cols)
        if key not in memo:
            terms = []
            for k, col in enumerate(cols):
                entry = matrix[row, col]
                if entry is ZERO:
                    continue
                rest = minor(row + 1, cols[:k] + cols[k + 1:])
                term = mul(entry, rest)
                terms.append(neg(term) if k % 2 else term)
            memo[key] = add(*terms)
        return memo[key]

    return minor(0, tuple(range(n)))


def cofactor(matrix: np.ndarray, i: int, j: int) -> Expr:
    n = matrix.shape[0]
    if n == 1:
        return ONE
    rows = [r for r in range(n) if r != i]
    cols = [c for c in range(n) if c != j]
    sub = matrix[np.ix_(rows, cols)]
    value = determinant(sub)
    return neg(value) if (i + j) % 2 else value


def inverse_symmetric(matrix: np.ndarray, det: Expr) -> np.ndarray:
    """Adjugate inverse of a symmetric matrix; entry [a, b] is the same object as [b, a]."""
    n = matrix.shape[0]
    inv_det = quotient(ONE, det)
    inverse = np.empty((n, n), dtype=object)
    for a in range(n):
        for b in range(a, n):
            inverse[a, b] = inverse[b, a] = mul(cofactor(matrix, a, b), inv_det)
    return inverse


def inverse_matrix(matrix: np.ndarray) -> np.ndarray:
    """Adjugate inverse of a general square Expr matrix."""
    n = matrix.shape[0]
    inv_det = quotient(ONE, determinant(matrix))
    return expr_array((n, n), lambda a, b: mul(cofactor(matrix, b, a), inv_det))


# ---------------------------------------------------------------------------
# Metric
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class MetricField:
    """Metric components g_ab on a chart; g^{ab}, det and √|g| are derived."""

    chart: Chart
    components: np.ndarray
    signature: str = ''

    def __post_init__(self):
        m = self.chart.dim
        array = to_expr_array(self.components, (m, m))
        object.__setattr__(self, 'components', array)
        for a in range(m):
            for b in range(a + 1, m):
                if array[a, b] is not array[b, a]:
                    raise ValueError(f"metric is not symmetric in entries ({a},{b}) and ({b},{a})")

    @property
    def dim(self) -> int:
        return self.chart.dim

    def __getitem__(self, index):
        return self.components[index]

    @cached_property
    def det(self) -> Expr:
        return determinant(self.components)

    @cached_property
    def inverse(self) -> np.ndarray:
        try:
            return inverse_symmetric(self.components, self.det)
        except ZeroDivisionError:
            raise SingularMetricError("metric determinant is identically zero") from None

    @cached_property
    def det_sign(self) -> int:
        """Sign of det g, read at the centre of the chart box."""
        center = self.chart.center()
        try:
            value = evaluate_many([self.det], {k: [v] for k, v in center.items()})[0][0]
        except EvaluationError as e:
            raise SingularMetricError(f"metric cannot be evaluated at the box centre: {e}", center) from e
        if value.real == 0:
            raise SingularMetricError("metric determinant vanishes at the box centre", center)
        return 1 if value.real > 0 else -1

    @cached_property
    def volume(self) -> Expr:
        """The density factor √|g|."""
        return sqrt(mul(self.det_sign, self.det))

    def validate(self, trials: int = 20, seed: int = 0, threshold: float = 1e-12) -> None:
        """Raise SingularMetricError if det g vanishes (or changes sign) on the chart box."""
        points = sample_points(self.chart.domain(), trials, seed, stream=f'metric:{self.chart.name}')
        values = evaluate_many([self.det], points)[0]
        bad = (np.abs(values) < threshold) | (np.sign(values.real) != self.det_sign)
        if bad.any():
            index = int(np.flatnonzero(bad)[0])
            point = {name: float(v[index].real) for name, v in sorted(points.items())}
            raise SingularMetricError(f"metric is degenerate on the chart box", point)
        logger.debug(f"Metric on chart '{self.chart.name}' validated at {trials} points")

    def raise_index(self, covector: Sequence[Expr]) -> List[Expr]:
        m = self.dim
        return [add(*(mul(self.inverse[a, b], covector[b]) for b in range(m))) for a in range(m)]

    def lower_index(self, vector: Sequence[Expr]) -> List[Expr]:
        m = self.dim
        return [add(*(mul(self.components[a, b], vector[b]) for b in range(m))) for a in range(m)]

    def subs(self, mapping) -> 'MetricField':
        m = self.dim
        array = np.empty((m, m), dtype=object)
        for a in range(m):
            for b in range(a, m):
                array[a, b] = array[b, a] = self.components[a, b].subs(mapping)
        return MetricField(self.chart, array, self.signature)


def christoffel_symbols(g: MetricField) -> np.ndarray:
    """Textbook Christoffel symbols, ``chr[c, a, b]`` = ½ g^{cd}(∂_a g_db + ∂_b g_da - ∂_d g_ab)."""
    m = g.dim
    x = g.chart.coords
    dg = expr_array((m, m, m), lambda d, a, b: diff(g[a, b], x[d]))   # dg[d, a, b] = ∂_d g_ab
    first = np.empty((m, m, m), dtype=object)
    for d in range(m):
        for a in range(m):
            for b in range(a, m):
                first[d, a, b] = first[d, b, a] = mul(HALF, add(dg[a, d, b], dg[b, d, a], neg(dg[d, a, b])))
    result = np.empty((m, m, m), dtype=object)
    for c in range(m):
        for a in range(m):
            for b in range(a, m):
                result[c, a, b] = result[c, b, a] = add(*(mul(g.inverse[c, d], first[d, a, b]) for d in range(m)))
    return result


@dataclass(frozen=True, eq=False)
class AffineConnectionField:
    """Base connection coefficients ``gamma[c, a, b]`` = Γ_a^c_b."""

    chart: Chart
    gamma: np.ndarray
    symmetric: bool = False

    def __post_init__(self):
        m = self.chart.dim
        array = to_expr_array(self.gamma, (m, m, m))
        object.__setattr__(self, 'gamma', array)
        if self.symmetric:
            for c, a, b in itertools.product(range(m), repeat=3):
                if a < b and array[c, a, b] is not array[c, b, a]:
                    raise NonSymmetricConnectionError(
                        f"coefficients ({a},{c},{b}) and ({b},{c},{a}) differ in a connection declared symmetric")

    @property
    def dim(self) -> int:
        return self.chart.dim

    def coefficient(self, a: int, c: int, b: int) -> Expr:
        """Γ_a^c_b in the order it is written."""
        return self.gamma[c, a, b]

    def as_linear_matrices(self) -> np.ndarray:
        """κ_a^c_d = Γ_a^c_d as an [a, c, d] array."""
        return np.transpose(self.gamma, (1, 0, 2))

    def require_symmetric(self) -> None:
        if not self.symmetric:
            raise NonSymmetricConnectionError("a symmetric base connection is required")

    def subs(self, mapping) -> 'AffineConnectionField':
        m = self.dim
        array = np.empty((m, m, m), dtype=object)
        for c, a, b in itertools.product(range(m), repeat=3):
            if self.symmetric and b < a:
                array[c, a, b] = array[c, b, a]
            else:
                array[c, a, b] = self.gamma[c, a, b].subs(mapping)
        return AffineConnectionField(self.chart, array, self.symmetric)


def symmetric_connection(chart: Chart, build: Callable[[int, int, int], Expr]) -> AffineConnectionField:
    """Build a symmetric connection from ``build(c, a, b)`` evaluated for a <= b."""
    m = chart.dim
    array = np.empty((m, m, m), dtype=object)
    for c in range(m):
        for a in range(m):
            for b in range(a, m):
                array[c, a, b] = array[c, b, a] = as_expr(build(c, a, b))
    return AffineConnectionField(chart, array, symmetric=True)


def levi_civita(g: MetricField, validate: bool = True) -> AffineConnectionField:
    """Levi-Civita connection of ``g`` in the ∇v = ∂v - Γv convention (negated Christoffel symbols)."""
    if validate:
        g.validate()
    chris = christoffel_symbols(g)
    logger.debug(f"Levi-Civita connection built on chart '{g.chart.name}'")
    return symmetric_connection(g.chart, lambda c, a, b: neg(chris[c, a, b]))


# ---------------------------------------------------------------------------
# Curvature
# ---------------------------------------------------------------------------

def matrix_curvature(kappa: np.ndarray, coords: Sequence[str]) -> np.ndarray:
    """
    Curvature of a linear connection given as matrices ``kappa[a, i, j]``.

    Returns ``rho[a, b, i, j]`` = ∂_b κ_a - ∂_a κ_b + [κ_a, κ_b]; the entry
    [b, a] is built as the negation of [a, b].
    """
    m, n = kappa.shape[0], kappa.shape[1]
    rho = np.empty((m, m, n, n), dtype=object)
    for a in range(m):
        for i in range(n):
            for j in range(n):
                rho[a, a, i, j] = ZERO
        for b in range(a + 1, m):
            for i in range(n):
                for j in range(n):
                    commutator = [mul(kappa[a, i, h], kappa[b, h, j]) for h in range(n)] + \
                                 [neg(mul(kappa[b, i, h], kappa[a, h, j])) for h in range(n)]
                    value = add(diff(kappa[a, i, j], coords[b]), neg(diff(kappa[b, i, j], coords[a])), *commutator)
                    rho[a, b, i, j] = value
                    rho[b, a, i, j] = neg(value)
    return rho


def base_curvature(connection: AffineConnectionField) -> TensorField:
    """R[a, b, c, d] = R_ab^c_d, the curvature of Γ viewed as a linear connection of TM."""
    rho = matrix_curvature(connection.as_linear_matrices(), connection.chart.coords)
    return TensorField(connection.chart, 'ddud', rho)


def ricci(riemann: TensorField) -> TensorField:
    """Ric[b, d] = R_bc^c_d."""
    m = riemann.chart.dim
    return TensorField(riemann.chart, 'dd',
                       expr_array((m, m), lambda b, d: add(*(riemann[b, c, c, d] for c in range(m)))))


def scalar_curvature(g: MetricField, ric: TensorField) -> Expr:
    m = g.dim
    return add(*(mul(g.inverse[a, c], ric[a, c]) for a in range(m) for c in range(m)))


def mixed_ricci(g: MetricField, ric: TensorField) -> TensorField:
    """R^a_b = g^{ac} Ric_cb."""
    m = g.dim
    return TensorField(g.chart, 'ud',
                       expr_array((m, m), lambda a, b: add(*(mul(g.inverse[a, c], ric[c, b]) for c in range(m)))))


@dataclass(frozen=True, eq=False)
class CurvatureData:
    """Riemann, Ricci, scalar and Einstein tensors of a metric-connection pair."""

    riemann: TensorField
    ricci: TensorField
    mixed_ricci: TensorField
    scalar: Expr
    einstein: TensorField


def curvature_data(g: MetricField, connection: AffineConnectionField) -> CurvatureData:
    m = g.dim
    riemann = base_curvature(connection)
    ric = ricci(riemann)
    mixed = mixed_ricci(g, ric)
    scalar = scalar_curvature(g, ric)
    half_r = mul(HALF, scalar)
    einstein_tensor = TensorField(g.chart, 'ud', expr_array(
        (m, m), lambda a, b: add(mixed[a, b], neg(half_r)) if a == b else mixed[a, b]))
    return CurvatureData(riemann, ric, mixed, scalar, einstein_tensor)


def einstein(g: MetricField, connection: Optional[AffineConnectionField] = None) -> TensorField:
    """G^a_b = R^a_b - ½ R δ^a_b (Levi-Civita connection when none is given)."""
    connection = connection if connection is not None else levi_civita(g)
    return curvature_data(g, connection).einstein


def torsion_form(connection: AffineConnectionField) -> TensorField:
    """τ_a = Γ_a^c_c - Γ_c^c_a; the zero array for symmetric connections."""
    m = connection.dim
    chart = connection.chart
    if connection.symmetric:
        return zeros(chart, 'd')
    gamma = connection.gamma
    return TensorField(chart, 'd', expr_array(
        (m,), lambda a: add(*(add(gamma[c, a, c], neg(gamma[c, c, a])) for c in range(m)))))


# ---------------------------------------------------------------------------
# Covariant derivatives, divergence, densities
# ---------------------------------------------------------------------------

def covariant_derivative(tensor: TensorField, connection: AffineConnectionField) -> TensorField:
    """
    ∇_a of a tensor field; the new derivative slot comes first.

    Upper slots get -Γ_a^c_e T^e, lower slots +Γ_a^e_b T_e. Fiber slots are
    left alone, and a density picks up no extra term (torsion-free use only).
    """
    chart = tensor.chart
    m = chart.dim
    gamma = connection.gamma
    x = chart.coords
    shape = (m,) + tensor.shape

    def component(a: int, *index: int) -> Expr:
        terms = [diff(tensor[index], x[a])]
        for slot, kind in enumerate(tensor.signature):
            if kind == 'f':
                continue
            for e in range(m):
                moved = index[:slot] + (e,) + index[slot + 1:]
                if kind == 'u':
                    terms.append(neg(mul(gamma[index[slot], a, e], tensor[moved])))
                else:
                    terms.append(mul(gamma[e, a, index[slot]], tensor[moved]))
        return add(*terms)

    return TensorField(chart, 'd' + tensor.signature, expr_array(shape, component), tensor.density)


def divergence(tensor: TensorField, connection: AffineConnectionField, slot: int = 0) -> TensorField:
    """Contract ∇_a with the upper slot ``slot`` of ``tensor``."""
    if tensor.signature[slot] != 'u':
        raise DimensionError("divergence needs an upper base slot")
    full = covariant_derivative(tensor, connection)
    m = tensor.chart.dim
    rest_signature = tensor.signature[:slot] + tensor.signature[slot + 1:]
    rest_shape = tensor.shape[:slot] + tensor.shape[slot + 1:]

    def component(*rest: int) -> Expr:
        return add(*(full[(a,) + rest[:slot] + (a,) + rest[slot:]] for a in range(m)))

    return TensorField(tensor.chart, rest_signature, expr_array(rest_shape, component), tensor.density)


def covariant_divergence(xi: TensorField, connection: AffineConnectionField, kappa=None) -> TensorField:
    """
    Covariant divergence of a density ξ^{ai} with values in a linear fiber.

    Result_i = ∂_a ξ^{ai} - κ_a^i_j ξ^{aj} + τ_a ξ^{ai}. ``xi`` has signature
    'u' (scalar valued) or 'uf'; ``kappa`` is a LinearConnection or an
    [a, i, j] array, or None for a trivial fiber connection.
    """
    chart = xi.chart
    m = chart.dim
    x = chart.coords
    if not xi.signature or xi.signature[0] != 'u' or xi.shape[0] != m:
        raise DimensionError(f"expected a base index of extent {m} first")
    if xi.signature not in ('u', 'uf'):
        raise DimensionError(f"unsupported signature '{xi.signature}' for a covariant divergence")
    tau = torsion_form(connection)
    if xi.signature == 'u':
        value = add(*(add(diff(xi[a], x[a]), mul(tau[a], xi[a])) for a in range(m)))
        return TensorField(chart, '', np.array(value, dtype=object), xi.density)
    n = xi.shape[1]
    matrices = getattr(kappa, 'matrices', kappa)
    if matrices is not None and np.shape(matrices) != (m, n, n):
        raise DimensionError(f"connection shape {np.shape(matrices)} does not match fiber dimension {n}")

    def component(i: int) -> Expr:
        terms = []
        for a in range(m):
            terms.append(diff(xi[a, i], x[a]))
            terms.append(mul(tau[a], xi[a, i]))
            if matrices is not None:
                terms.extend(neg(mul(matrices[a][i][j], xi[a, j])) for j in range(n))
        return add(*terms)

    return TensorField(chart, 'f', expr_array((n,), component), xi.density)


def breve(xi: TensorField, g: MetricField) -> TensorField:
    """Strip the density factor: componentwise division by √|g|."""
    volume = g.volume
    result = xi.map(lambda e: quotient(e, volume))
    return TensorField(result.chart, result.signature, result.components, density=False)


def densitize(tensor: TensorField, g: MetricField) -> TensorField:
    result = tensor.map(lambda e: mul(e, g.volume))
    return TensorField(result.chart, result.signature, result.components, density=True)


def levi_civita_symbol(dim: int, orientation: int = 1) -> np.ndarray:
    """Alternating symbol with ε_{01...} = orientation."""
    if orientation not in (1, -1):
        raise ValueError("orientation must be +1 or -1")
    eps = np.zeros((dim,) * dim, dtype=int)
    for perm in itertools.permutations(range(dim)):
        inversions = sum(1 for i in range(dim) for j in range(i + 1, dim) if perm[i] > perm[j])
        eps[perm] = orientation * (-1 if inversions % 2 else 1)
    return eps


def hodge_star(g: MetricField, form: TensorField, orientation: int = 1) -> TensorField:
    """(*φ)_cd = ½ √|g| ε_abcd g^{ae} g^{bf} φ_ef on 2-forms in dimension 4."""
    if g.dim != 4:
        raise DimensionError(f"the Hodge star on 2-forms is implemented for dimension 4, not {g.dim}")
    if form.signature != 'dd':
        raise DimensionError("hodge_star expects a 2-form with signature 'dd'")
    eps = levi_civita_symbol(4, orientation)
    m = 4
    inv = g.inverse
    raised = expr_array((m, m), lambda a, b: add(*(mul(inv[a, e], inv[b, f], form[e, f])
                                                   for e in range(m) for f in range(m))))
    half_volume = mul(HALF, g.volume)

    def component(c: int, d: int) -> Expr:
        terms = [mul(int(eps[a, b, c, d]), raised[a, b])
                 for a in range(m) for b in range(m) if eps[a, b, c, d] != 0]
        return mul(half_volume, add(*terms))

    return TensorField(g.chart, 'dd', expr_array((m, m), component))


def sampling_domain(chart: Chart, extra: Optional[Dict[str, Tuple[float, float]]] = None) -> Domain:
    domain = dict(chart.domain())
    if extra:
        domain.update(extra)
    return domain
