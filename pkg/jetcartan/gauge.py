"""
Gauge structures: a frame l_I of anti-Hermitian constant matrices, exact
structure constants, gauge fields κ^I_a and their curvature and overconnection.
"""

import itertools
import logging
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .connections import (
    ConnectionBundle, FiberedChart, LinearConnection, Overconnection, Section, connection_bundle,
)
from .geometry import AffineConnectionField, Chart, DimensionError, expr_array, to_expr_array
from .symexpr import ZERO, Constant, Expr, add, as_expr, constant, diff, mul, neg, symbol

logger = logging.getLogger(__name__)


class FrameError(ValueError):
    """A Lie-algebra frame is not usable; ``pair`` names the offending indices."""

    def __init__(self, message: str, pair: Tuple[int, int] = (-1, -1)):
        self.pair = pair
        super().__init__(message)


def _conj(c: Constant) -> Constant:
    return constant(c.re, -c.im)


def _as_constant_matrix(matrix, n: Optional[int] = None) -> np.ndarray:
    array = to_expr_array(matrix)
    if array.ndim != 2 or array.shape[0] != array.shape[1]:
        raise FrameError(f"frame element must be a square matrix, got shape {array.shape}")
    if n is not None and array.shape[0] != n:
        raise FrameError(f"frame elements have different sizes ({array.shape[0]} and {n})")
    for entry in array.reshape(-1):
        if not isinstance(entry, Constant):
            raise FrameError("frame entries must be constants")
    return array


def trace_pairing(A: np.ndarray, B: np.ndarray) -> Constant:
    """Tr(A† B) computed exactly."""
    n = A.shape[0]
    return add(*(mul(_conj(A[i, j]), B[i, j]) for i in range(n) for j in range(n)))  # type: ignore[return-value]


def commutator(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    n = A.shape[0]
    return expr_array((n, n), lambda i, j: add(*(add(mul(A[i, h], B[h, j]), neg(mul(B[i, h], A[h, j])))
                                                 for h in range(n))))


def structure_constants(frame: Sequence, check_closure: bool = True) -> Tuple[np.ndarray, np.ndarray]:
    """
    Structure constants c^I_JH = Tr(l_I† [l_J, l_H]) / h_II of a pairwise
    orthogonal frame, with the frame metric h_IJ = Re Tr(l_I† l_J).

    Returns:
        (c, h) as object arrays of constants, c indexed [I, J, H]

    Raises:
        FrameError: for non anti-Hermitian elements, non-orthogonal pairs,
            or a span that is not closed under commutators
    """
    if not frame:
        raise FrameError("a frame needs at least one element")
    mats = [_as_constant_matrix(frame[0])]
    n = mats[0].shape[0]
    mats.extend(_as_constant_matrix(l, n) for l in frame[1:])
    r = len(mats)

    for I, l in enumerate(mats):
        for i, j in itertools.product(range(n), repeat=2):
            if add(l[i, j], _conj(l[j, i])) is not ZERO:
                raise FrameError(f"frame element {I} is not anti-Hermitian", (I, I))

    h = np.empty((r, r), dtype=object)
    for I, J in itertools.product(range(r), repeat=2):
        h[I, J] = constant(trace_pairing(mats[I], mats[J]).re)
    for I, J in itertools.combinations(range(r), 2):
        if h[I, J] is not ZERO:
            raise FrameError(f"frame elements {I} and {J} are not orthogonal", (I, J))
    for I in range(r):
        if h[I, I] is ZERO:
            raise FrameError(f"frame element {I} is zero", (I, I))

    c = np.empty((r, r, r), dtype=object)
    for J, H in itertools.product(range(r), repeat=2):
        bracket = commutator(mats[J], mats[H])
        for I in range(r):
            value = trace_pairing(mats[I], bracket)
            c[I, J, H] = constant(value.re / h[I, I].re)
        if check_closure:
            rebuilt = [[add(*(mul(c[I, J, H], mats[I][i, j]) for I in range(r))) for j in range(n)] for i in range(n)]
            for i, j in itertools.product(range(n), repeat=2):
                if rebuilt[i][j] is not bracket[i, j]:
                    raise FrameError(f"commutator of elements {J} and {H} leaves the span of the frame", (J, H))
    return c, h


def jacobi_defect(c: np.ndarray) -> List[Tuple[int, int, int, int]]:
    """Index tuples (I, J, H, K) where the Jacobi identity fails, empty when it holds."""
    r = c.shape[0]
    failures = []
    for I, J, H, K in itertools.product(range(r), repeat=4):
        total = add(*(add(mul(c[I, J, M], c[M, H, K]), mul(c[I, H, M], c[M, K, J]), mul(c[I, K, M], c[M, J, H]))
                      for M in range(r)))
        if total is not ZERO:
            failures.append((I, J, H, K))
    return failures


_HALF_I = constant(0, Fraction(1, 2))
_HALF = constant(Fraction(1, 2))

BUILTIN_FRAMES: Dict[str, List[List[List[Expr]]]] = {
    'u1': [[[constant(0, 1)]]],
    'su2': [
        [[ZERO, _HALF_I], [_HALF_I, ZERO]],
        [[ZERO, _HALF], [neg(_HALF), ZERO]],
        [[_HALF_I, ZERO], [ZERO, neg(_HALF_I)]],
    ],
}


@dataclass(frozen=True, eq=False)
class GaugeStructure:
    """Frame l_I of anti-Hermitian matrices with its structure constants and metric."""

    name: str
    frame: Tuple[np.ndarray, ...]
    c: np.ndarray = field(init=False)
    h: np.ndarray = field(init=False)

    def __post_init__(self):
        mats = tuple(_as_constant_matrix(l) for l in self.frame)
        object.__setattr__(self, 'frame', mats)
        c, h = structure_constants(mats)
        failures = jacobi_defect(c)
        if failures:
            raise FrameError(f"structure constants violate the Jacobi identity at {failures[0]}")
        object.__setattr__(self, 'c', c)
        object.__setattr__(self, 'h', h)
        logger.debug(f"Gauge structure '{self.name}' with {len(mats)} generators of size {self.n}")

    @property
    def rank(self) -> int:
        return len(self.frame)

    @property
    def n(self) -> int:
        return self.frame[0].shape[0]

    @property
    def abelian(self) -> bool:
        return all(v is ZERO for v in self.c.reshape(-1))


def builtin_structure(name: str) -> GaugeStructure:
    if name not in BUILTIN_FRAMES:
        raise FrameError(f"unknown built-in frame '{name}'")
    return GaugeStructure(name, tuple(np.array(l, dtype=object) for l in BUILTIN_FRAMES[name]))


def index_lower(structure: GaugeStructure, values: np.ndarray) -> np.ndarray:
    """v̄_I = h_IJ v^J over the last axis of ``values``."""
    values = np.asarray(values, dtype=object)
    r = structure.rank
    if values.shape[-1] != r:
        raise DimensionError(f"last axis has extent {values.shape[-1]}, frame has {r} elements")
    return expr_array(values.shape, lambda *idx: add(*(mul(structure.h[idx[-1], J], values[idx[:-1] + (J,)])
                                                       for J in range(r))))


@dataclass(frozen=True, eq=False)
class GaugeField:
    """Lie-algebra components ``components[I, a]`` = κ^I_a(x)."""

    structure: GaugeStructure
    base: Chart
    components: np.ndarray
    prefix: str = 'k'

    def __post_init__(self):
        array = to_expr_array(self.components, (self.structure.rank, self.base.dim))
        object.__setattr__(self, 'components', array)
        allowed = set(self.base.coords)
        for e in array.reshape(-1):
            extra = sorted(e.free - allowed)
            if extra:
                raise ValueError(f"gauge field component depends on non-base variable '{extra[0]}'")

    def __getitem__(self, index):
        return self.components[index]

    @property
    def m(self) -> int:
        return self.base.dim

    def bundle(self, prefix: Optional[str] = None) -> ConnectionBundle:
        """Bundle of gauge connections with fiber coordinates y^I_b named '{prefix}_{b}_{I}'."""
        return connection_bundle(self.base, prefix or self.prefix, (self.m, self.structure.rank))

    def as_section(self, bundle: ConnectionBundle) -> Section:
        return Section(bundle, tuple(self.components[I, b] for b in range(self.m) for I in range(self.structure.rank)))

    def expand(self, chart: FiberedChart) -> LinearConnection:
        """κ_a = κ^I_a l_I as a linear connection on an n-dimensional fiber."""
        s = self.structure
        if chart.n != s.n or chart.base != self.base:
            raise DimensionError("fiber chart does not fit the gauge structure")
        return LinearConnection(chart, expr_array(
            (self.m, s.n, s.n),
            lambda a, i, j: add(*(mul(self.components[I, a], s.frame[I][i, j]) for I in range(s.rank)))))

    def subs(self, mapping) -> 'GaugeField':
        return GaugeField(self.structure, self.base, expr_array(self.components.shape,
                                                                lambda I, a: self.components[I, a].subs(mapping)),
                          self.prefix)


def gauge_curvature(kappa: GaugeField) -> np.ndarray:
    """ρ[a, b, I] = ∂_bκ^I_a - ∂_aκ^I_b + c^I_JH κ^J_a κ^H_b."""
    return _gauge_curvature_from(kappa.structure, kappa.base.coords,
                                 lambda I, a: kappa.components[I, a],
                                 lambda I, a, b: diff(kappa.components[I, a], kappa.base.coords[b]))


def formal_gauge_curvature(structure: GaugeStructure, bundle: ConnectionBundle) -> np.ndarray:
    """Curvature written in jet symbols of the gauge bundle: y^I_{a,b} - y^I_{b,a} + c^I_JH y^J_a y^H_b."""
    return _gauge_curvature_from(structure, bundle.coords,
                                 lambda I, a: bundle.coordinate_symbol(a, I),
                                 lambda I, a, b: symbol(bundle.jet_of((a, I), b)))


def _gauge_curvature_from(structure: GaugeStructure, coords, value, derivative) -> np.ndarray:
    m, r = len(coords), structure.rank
    c = structure.c
    rho = np.empty((m, m, r), dtype=object)
    for a in range(m):
        for I in range(r):
            rho[a, a, I] = ZERO
        for b in range(a + 1, m):
            for I in range(r):
                terms = [derivative(I, a, b), neg(derivative(I, b, a))]
                for J, H in itertools.product(range(r), repeat=2):
                    if c[I, J, H] is not ZERO:
                        terms.append(mul(c[I, J, H], value(J, a), value(H, b)))
                rho[a, b, I] = add(*terms)
                rho[b, a, I] = neg(rho[a, b, I])
    return rho


def overconnection_gauge(kappa: GaugeField, gamma: AffineConnectionField,
                         bundle: Optional[ConnectionBundle] = None) -> Overconnection:
    """(κ↑_a)^I_b = ∂_bκ^I_a + c^I_JH κ^J_a y^H_b + Γ_a^c_b (κ^I_c - y^I_c)."""
    gamma.require_symmetric()
    bundle = bundle or kappa.bundle()
    m, r = kappa.m, kappa.structure.rank
    if bundle.slots != (m, r):
        raise DimensionError(f"bundle slots {bundle.slots} do not fit a gauge field of rank {r}")
    x = kappa.base.coords
    k = kappa.components
    c = kappa.structure.c
    g = gamma.gamma
    components = np.empty((len(bundle.fiber), m), dtype=object)
    for b, I in itertools.product(range(m), range(r)):
        row = bundle.index(b, I)
        for a in range(m):
            terms = [diff(k[I, a], x[b])]
            for J, H in itertools.product(range(r), repeat=2):
                if c[I, J, H] is not ZERO:
                    terms.append(mul(c[I, J, H], k[J, a], bundle.coordinate_symbol(b, H)))
            terms.extend(mul(g[cc, a, b], add(k[I, cc], neg(bundle.coordinate_symbol(cc, I)))) for cc in range(m))
            components[row, a] = add(*terms)
    return Overconnection(bundle, components, source=kappa)


def expand_gauge_coordinates(structure: GaugeStructure, gauge_bundle: ConnectionBundle,
                             linear: ConnectionBundle) -> Dict[str, Expr]:
    """Substitution y_b^i_j -> y^H_b (l_H)^i_j from linear-bundle to gauge-bundle coordinates."""
    m, n, r = gauge_bundle.m, structure.n, structure.rank
    mapping = {}
    for b, i, j in itertools.product(range(m), range(n), range(n)):
        mapping[linear.coordinate(b, i, j)] = add(*(mul(gauge_bundle.coordinate_symbol(b, H), structure.frame[H][i, j])
                                                    for H in range(r)))
    return mapping


def expand_lie_components(structure: GaugeStructure, values: Sequence[Expr]) -> np.ndarray:
    """Σ_I v^I l_I as an n×n matrix."""
    n = structure.n
    return expr_array((n, n), lambda i, j: add(*(mul(as_expr(values[I]), structure.frame[I][i, j])
                                                 for I in range(structure.rank))))
