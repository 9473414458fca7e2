"""
Connections on fibered charts: general and linear connections, curvature,
jet prolongation, the involution of the double jet space, prolonged
connections and overconnections on bundles of connections.

Jet coordinates are plain symbols generated from the fiber names:

    y^i_a    -> '{y}_a{a}'            first jet
    y^i_ab   -> '{y}_a{a}_a{b}'       second jet, a <= b
    ȳ^i_a    -> '{y}_u{a}'            fiber coordinate of JE inside JJE
    y^i_ab   -> '{y}_a{a}_a{b}'       in JJE, derivative of ȳ^i_a along b, both orders
"""

import itertools
import logging
from dataclasses import dataclass
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .geometry import (
    AffineConnectionField, Chart, DimensionError, NonSymmetricConnectionError, expr_array,
    matrix_curvature, to_expr_array,
)
from .symexpr import ZERO, Expr, ExprLike, add, as_expr, diff, mul, neg, subst_many, symbol

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class FiberedChart:
    """Base chart plus fiber coordinates y^i with a sampling box."""

    name: str
    base: Chart
    fiber: Tuple[str, ...]
    fiber_box: Tuple[Tuple[float, float], ...] = ()

    def __post_init__(self):
        fiber = tuple(self.fiber)
        object.__setattr__(self, 'fiber', fiber)
        if len(set(fiber)) != len(fiber):
            raise ValueError(f"fibered chart '{self.name}' repeats a fiber coordinate")
        clash = sorted(set(fiber) & set(self.base.coords))
        if clash:
            raise ValueError(f"fiber coordinate '{clash[0]}' is also a base coordinate")
        box = tuple(tuple(map(float, b)) for b in self.fiber_box) or ((-1.0, 1.0),) * len(fiber)
        if len(box) != len(fiber):
            raise DimensionError(f"fibered chart '{self.name}': {len(box)} intervals for {len(fiber)} coordinates")
        object.__setattr__(self, 'fiber_box', box)

    @property
    def m(self) -> int:
        return self.base.dim

    @property
    def n(self) -> int:
        return len(self.fiber)

    @property
    def coords(self) -> Tuple[str, ...]:
        return self.base.coords

    def jet(self, i: int, a: int) -> str:
        return f'{self.fiber[i]}_a{a}'

    def jet2(self, i: int, a: int, b: int) -> str:
        a, b = min(a, b), max(a, b)
        return f'{self.fiber[i]}_a{a}_a{b}'

    def bar(self, i: int, a: int) -> str:
        return f'{self.fiber[i]}_u{a}'

    def double(self, i: int, a: int, b: int) -> str:
        return f'{self.fiber[i]}_a{a}_a{b}'

    def jet_symbol(self, i: int, a: int) -> Expr:
        return symbol(self.jet(i, a))

    def jet2_symbol(self, i: int, a: int, b: int) -> Expr:
        return symbol(self.jet2(i, a, b))

    def first_jet_names(self) -> List[str]:
        return [self.jet(i, a) for i in range(self.n) for a in range(self.m)]

    def second_jet_names(self) -> List[str]:
        return [self.jet2(i, a, b) for i in range(self.n) for a in range(self.m) for b in range(a, self.m)]

    def domain(self) -> Dict[str, Tuple[float, float]]:
        domain = self.base.domain()
        domain.update(zip(self.fiber, self.fiber_box))
        return domain

    def dual(self, suffix: str = 'bar') -> 'FiberedChart':
        return FiberedChart(f'{self.name}{suffix}', self.base, tuple(f'{y}{suffix}' for y in self.fiber),
                            self.fiber_box)

    def direct_sum(self, other: 'FiberedChart', name: Optional[str] = None) -> 'FiberedChart':
        if other.base != self.base:
            raise DimensionError("fibered charts over different bases cannot be summed")
        return FiberedChart(name or f'{self.name}+{other.name}', self.base, self.fiber + other.fiber,
                            self.fiber_box + other.fiber_box)


@dataclass(frozen=True)
class ConnectionBundle(FiberedChart):
    """
    Fibered chart whose fiber coordinates are connection components.

    ``slots`` is the index shape of one point of the fiber, e.g. (m, n, n)
    for linear connections (y_b^i_j), (m, r) for gauge fields (y^I_b) and
    (m, m, m) for base connections (y_b^c_d). Names are '{prefix}_{b}_{...}'.
    """

    prefix: str = 'k'
    slots: Tuple[int, ...] = ()

    def index(self, *idx: int) -> int:
        return int(np.ravel_multi_index(idx, self.slots))

    def coordinate(self, *idx: int) -> str:
        return self.fiber[self.index(*idx)]

    def coordinate_symbol(self, *idx: int) -> Expr:
        return symbol(self.coordinate(*idx))

    def jet_of(self, idx: Tuple[int, ...], a: int) -> str:
        return self.jet(self.index(*idx), a)


def connection_bundle(base: Chart, prefix: str, slots: Tuple[int, ...],
                      box: Tuple[float, float] = (-1.0, 1.0)) -> ConnectionBundle:
    names = tuple(f'{prefix}_' + '_'.join(str(k) for k in idx) for idx in itertools.product(*map(range, slots)))
    return ConnectionBundle(f'C({prefix})', base, names, (box,) * len(names), prefix=prefix, slots=tuple(slots))


# ---------------------------------------------------------------------------
# Sections
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Section:
    """Field components φ^i(x) on a fibered chart."""

    chart: FiberedChart
    components: Tuple[Expr, ...]

    def __post_init__(self):
        components = tuple(as_expr(c) for c in self.components)
        object.__setattr__(self, 'components', components)
        if len(components) != self.chart.n:
            raise DimensionError(f"section has {len(components)} components, fiber dimension is {self.chart.n}")
        allowed = set(self.chart.coords)
        for c in components:
            extra = sorted(c.free - allowed)
            if extra:
                raise ValueError(f"section component depends on non-base variable '{extra[0]}'")

    def __getitem__(self, i: int) -> Expr:
        return self.components[i]

    def derivative(self, i: int, a: int) -> Expr:
        return diff(self.components[i], self.chart.coords[a])

    def value_substitution(self) -> Dict[str, Expr]:
        return dict(zip(self.chart.fiber, self.components))

    def jet_substitution(self) -> Dict[str, Expr]:
        """y^i -> φ^i, y^i_a -> ∂_aφ^i."""
        mapping = self.value_substitution()
        for i in range(self.chart.n):
            for a in range(self.chart.m):
                mapping[self.chart.jet(i, a)] = self.derivative(i, a)
        return mapping

    def jet2_substitution(self) -> Dict[str, Expr]:
        """Adds y^i_ab -> ∂_a∂_bφ^i to the first-jet substitution."""
        mapping = self.jet_substitution()
        x = self.chart.coords
        for i in range(self.chart.n):
            for a in range(self.chart.m):
                for b in range(a, self.chart.m):
                    mapping[self.chart.jet2(i, a, b)] = diff(self.derivative(i, a), x[b])
        return mapping

    def pullback(self, e: ExprLike, order: int = 2) -> Expr:
        mapping = self.jet2_substitution() if order >= 2 else self.jet_substitution()
        return subst_many(e, mapping)


def concat_sections(chart: FiberedChart, *sections: Section) -> Section:
    return Section(chart, tuple(c for s in sections for c in s.components))


# ---------------------------------------------------------------------------
# Connections
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class GeneralConnection:
    """Components ``components[i, a]`` = κ^i_a(x, y)."""

    chart: FiberedChart
    components: np.ndarray

    def __post_init__(self):
        array = to_expr_array(self.components, (self.chart.n, self.chart.m))
        object.__setattr__(self, 'components', array)
        allowed = set(self.chart.coords) | set(self.chart.fiber)
        for e in array.reshape(-1):
            extra = sorted(e.free - allowed)
            if extra:
                raise ValueError(f"connection component depends on '{extra[0]}', which is not a chart coordinate")

    def __getitem__(self, index):
        return self.components[index]

    def along(self, section: Section) -> np.ndarray:
        """κ^i_a(x, φ(x))."""
        mapping = section.value_substitution()
        return expr_array(self.components.shape, lambda i, a: subst_many(self.components[i, a], mapping))


@dataclass(frozen=True, eq=False)
class LinearConnection:
    """Matrices ``matrices[a, i, j]`` = κ_a^i_j(x)."""

    chart: FiberedChart
    matrices: np.ndarray

    def __post_init__(self):
        m, n = self.chart.m, self.chart.n
        array = to_expr_array(self.matrices, (m, n, n))
        object.__setattr__(self, 'matrices', array)
        allowed = set(self.chart.coords)
        for e in array.reshape(-1):
            extra = sorted(e.free - allowed)
            if extra:
                raise ValueError(f"linear connection component depends on non-base variable '{extra[0]}'")

    def general(self) -> GeneralConnection:
        """κ^i_a = κ_a^i_j y^j."""
        y = [symbol(name) for name in self.chart.fiber]
        return GeneralConnection(self.chart, expr_array(
            (self.chart.n, self.chart.m),
            lambda i, a: add(*(mul(self.matrices[a, i, j], y[j]) for j in range(self.chart.n)))))


def zero_linear_connection(chart: FiberedChart) -> LinearConnection:
    return LinearConnection(chart, expr_array((chart.m, chart.n, chart.n), lambda *i: ZERO))


def curvature(kappa: GeneralConnection) -> np.ndarray:
    """ρ[a, b, i] = ∂_bκ^i_a - ∂_aκ^i_b + ∂_jκ^i_a κ^j_b - ∂_jκ^i_b κ^j_a."""
    chart = kappa.chart
    m, n = chart.m, chart.n
    x, y = chart.coords, chart.fiber
    k = kappa.components
    rho = np.empty((m, m, n), dtype=object)
    for a in range(m):
        for i in range(n):
            rho[a, a, i] = ZERO
        for b in range(a + 1, m):
            for i in range(n):
                terms = [diff(k[i, a], x[b]), neg(diff(k[i, b], x[a]))]
                for j in range(n):
                    terms.append(mul(diff(k[i, a], y[j]), k[j, b]))
                    terms.append(neg(mul(diff(k[i, b], y[j]), k[j, a])))
                rho[a, b, i] = add(*terms)
                rho[b, a, i] = neg(rho[a, b, i])
    return rho


def linear_curvature(kappa: LinearConnection) -> np.ndarray:
    """ρ[a, b, i, j] = ∂_bκ_a - ∂_aκ_b + [κ_a, κ_b]."""
    return matrix_curvature(kappa.matrices, kappa.chart.coords)


def section_covariant_derivative(kappa, phi: Section) -> np.ndarray:
    """∇[a, i] = ∂_aφ^i - κ^i_a(x, φ(x)) for a general or linear connection."""
    if isinstance(kappa, LinearConnection):
        kappa = kappa.general()
    if kappa.chart.n != phi.chart.n:
        raise DimensionError("section and connection live on different fibers")
    along = kappa.along(phi)
    return expr_array((phi.chart.m, phi.chart.n), lambda a, i: add(phi.derivative(i, a), neg(along[i, a])))


def dual_connection(kappa: LinearConnection, chart: Optional[FiberedChart] = None) -> LinearConnection:
    """ǩ_a^i_j = -κ_a^j_i on the dual fiber."""
    chart = chart or kappa.chart.dual()
    k = kappa.matrices
    return LinearConnection(chart, expr_array(k.shape, lambda a, i, j: neg(k[a, j, i])))


def direct_sum(first: LinearConnection, second: LinearConnection,
               chart: Optional[FiberedChart] = None) -> LinearConnection:
    """Block-diagonal connection on the direct sum of two fibers."""
    chart = chart or first.chart.direct_sum(second.chart)
    n1 = first.chart.n

    def block(a: int, i: int, j: int) -> Expr:
        if i < n1 and j < n1:
            return first.matrices[a, i, j]
        if i >= n1 and j >= n1:
            return second.matrices[a, i - n1, j - n1]
        return ZERO

    return LinearConnection(chart, expr_array((chart.m, chart.n, chart.n), block))


# ---------------------------------------------------------------------------
# Double jets: involution and prolongation
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class CoordinateMap:
    """A substitution on coordinate symbols, applied with ``map(expr)``."""

    mapping: Mapping[str, Expr]

    def __call__(self, e: ExprLike) -> Expr:
        return subst_many(e, self.mapping)

    def then(self, other: 'CoordinateMap') -> 'CoordinateMap':
        """The map e -> other(self(e))."""
        return CoordinateMap({name: other(value) for name, value in self.mapping.items()})


def double_jet_names(chart: FiberedChart) -> List[str]:
    m, n = chart.m, chart.n
    names = []
    for i in range(n):
        names.extend(chart.bar(i, a) for a in range(m))
        names.extend(chart.jet(i, a) for a in range(m))
        names.extend(chart.double(i, a, b) for a in range(m) for b in range(m))
    return names


def involution(gamma: AffineConnectionField, chart: FiberedChart) -> CoordinateMap:
    """
    The involution s_Γ of JJE: ȳ^i_a <-> y^i_a and
    y^i_ab -> y^i_ba + Γ_b^c_a (ȳ^i_c - y^i_c). Requires a symmetric Γ.
    """
    if not gamma.symmetric:
        raise NonSymmetricConnectionError("the involution needs a symmetric base connection")
    m, n = chart.m, chart.n
    g = gamma.gamma
    mapping: Dict[str, Expr] = {}
    for i in range(n):
        for a in range(m):
            mapping[chart.bar(i, a)] = symbol(chart.jet(i, a))
            mapping[chart.jet(i, a)] = symbol(chart.bar(i, a))
        differences = [add(symbol(chart.bar(i, c)), neg(symbol(chart.jet(i, c)))) for c in range(m)]
        for a in range(m):
            for b in range(m):
                mapping[chart.double(i, a, b)] = add(
                    symbol(chart.double(i, b, a)), *(mul(g[c, b, a], differences[c]) for c in range(m)))
    return CoordinateMap(mapping)


def jet_of_connection(kappa: GeneralConnection) -> CoordinateMap:
    """Jκ: ȳ^i_c -> κ^i_c, y^i_cd -> ∂_dκ^i_c + y^j_d ∂_jκ^i_c (y^i_c is kept)."""
    chart = kappa.chart
    m, n = chart.m, chart.n
    x, y = chart.coords, chart.fiber
    k = kappa.components
    mapping: Dict[str, Expr] = {}
    for i in range(n):
        for c in range(m):
            mapping[chart.bar(i, c)] = k[i, c]
            for d in range(m):
                mapping[chart.double(i, c, d)] = add(
                    diff(k[i, c], x[d]), *(mul(symbol(chart.jet(j, d)), diff(k[i, c], y[j])) for j in range(n)))
    return CoordinateMap(mapping)


@dataclass(frozen=True, eq=False)
class ProlongedConnection:
    """κ' on JE: ``first[a, i]`` = (κ'_a)^i, ``second[a, i, b]`` = (κ'_a)^i_b."""

    chart: FiberedChart
    first: np.ndarray
    second: np.ndarray


def prolong(kappa: GeneralConnection, gamma: AffineConnectionField) -> ProlongedConnection:
    """(κ'_a)^i = κ^i_a; (κ'_a)^i_b = ∂_bκ^i_a + y^j_b ∂_jκ^i_a + Γ_a^c_b (κ^i_c - y^i_c)."""
    gamma.require_symmetric()
    chart = kappa.chart
    m, n = chart.m, chart.n
    x, y = chart.coords, chart.fiber
    k = kappa.components
    g = gamma.gamma
    first = expr_array((m, n), lambda a, i: k[i, a])

    def second(a: int, i: int, b: int) -> Expr:
        terms = [diff(k[i, a], x[b])]
        terms.extend(mul(chart.jet_symbol(j, b), diff(k[i, a], y[j])) for j in range(n))
        terms.extend(mul(g[c, a, b], add(k[i, c], neg(chart.jet_symbol(i, c)))) for c in range(m))
        return add(*terms)

    return ProlongedConnection(chart, first, expr_array((m, n, m), second))


# ---------------------------------------------------------------------------
# Overconnections
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Overconnection(GeneralConnection):
    """
    A connection of a bundle of connections. ``components[k, a]`` is the
    coefficient along base direction a for the flattened fiber coordinate k.
    ``source`` is the connection the overconnection was induced from.
    """

    source: object = None

    @property
    def bundle(self) -> ConnectionBundle:
        return self.chart  # type: ignore[return-value]


def linear_bundle(kappa: LinearConnection, prefix: str = 'k') -> ConnectionBundle:
    return connection_bundle(kappa.chart.base, prefix, (kappa.chart.m, kappa.chart.n, kappa.chart.n))


def overconnection_linear(kappa: LinearConnection, gamma: AffineConnectionField,
                          bundle: Optional[ConnectionBundle] = None) -> Overconnection:
    """
    (κ↑_a)_b^i_j = ∂_bκ_a^i_j + (κ_a y_b - y_b κ_a)^i_j + Γ_a^c_b (κ_c^i_j - y_c^i_j)

    on the bundle with fiber coordinates y_b^i_j.
    """
    gamma.require_symmetric()
    bundle = bundle or linear_bundle(kappa)
    m, n = kappa.chart.m, kappa.chart.n
    if bundle.slots != (m, n, n):
        raise DimensionError(f"bundle slots {bundle.slots} do not fit a rank-{n} linear connection")
    x = kappa.chart.coords
    k = kappa.matrices
    g = gamma.gamma
    yv = expr_array((m, n, n), lambda b, i, j: bundle.coordinate_symbol(b, i, j))
    components = np.empty((len(bundle.fiber), m), dtype=object)
    for b, i, j in itertools.product(range(m), range(n), range(n)):
        row = bundle.index(b, i, j)
        for a in range(m):
            terms = [diff(k[a, i, j], x[b])]
            for h in range(n):
                terms.append(mul(k[a, i, h], yv[b, h, j]))
                terms.append(neg(mul(yv[b, i, h], k[a, h, j])))
            terms.extend(mul(g[c, a, b], add(k[c, i, j], neg(yv[c, i, j]))) for c in range(m))
            components[row, a] = add(*terms)
    return Overconnection(bundle, components, source=kappa)


def connection_as_section(kappa: LinearConnection, bundle: ConnectionBundle) -> Section:
    m, n = kappa.chart.m, kappa.chart.n
    values = [kappa.matrices[idx] for idx in itertools.product(range(m), range(n), range(n))]
    return Section(bundle, tuple(values))


def overconnection_covariant_derivative(kappa, over: Overconnection) -> np.ndarray:
    """
    ∇_aκ_b of a connection with respect to an overconnection built from it.

    Returns ``nabla[a, b, ...]`` with the remaining slots of the bundle
    (i, j for linear connections, I for gauge fields).
    """
    if over.source is not kappa:
        raise ValueError("the overconnection was not built from this connection")
    bundle = over.bundle
    section = kappa.as_section(bundle) if hasattr(kappa, 'as_section') else connection_as_section(kappa, bundle)
    flat = section_covariant_derivative(over, section)   # [a, k]
    m = bundle.m
    result = np.empty((m,) + bundle.slots, dtype=object)
    for a in range(m):
        for idx in itertools.product(*map(range, bundle.slots)):
            result[(a,) + idx] = flat[a, bundle.index(*idx)]
    return result


def second_derivative_vanishes(e: Expr, names: Sequence[str]) -> bool:
    """Affinity in ``names``: every second derivative is the zero expression."""
    for p, q in itertools.combinations_with_replacement(sorted(names), 2):
        if diff(diff(e, p), q) is not ZERO:
            return False
    return True
