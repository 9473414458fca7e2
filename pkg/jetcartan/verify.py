"""
Identity checks and their reports.

An IdentityCheck holds two equally long lists of expressions (a defect check
has zeros on the right) plus the sampling box. ``run_check`` samples the
check's own seeded point stream and records the worst relative error even on
a pass.
"""

import json
import logging
import shutil
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .connections import Section
from .symexpr import (
    ONE, ZERO, Domain, EvaluationError, Expr, ExprLike, Negation, Sum, add, as_expr, compare_at_points, constant,
    evaluate_many, free_symbols, mul, neg, power, sample_points, symbol,
)
from .variational import JetLagrangian, euler_lagrange_along

logger = logging.getLogger(__name__)

REPORT_SCHEMA = 1

PASS = 'pass'
FAIL = 'fail'
ERROR = 'error'
VACUOUS = 'vacuous'


@dataclass(frozen=True, eq=False)
class IdentityCheck:
    """
    A numerically checked identity lhs = rhs.

    ``expect_failure`` marks checks whose fixture is built so that the
    identity must NOT hold (the check passes when the comparison fails).
    """

    id: str
    anchor: str
    lhs: Tuple[Expr, ...]
    rhs: Tuple[Expr, ...]
    domain: Dict[str, Tuple[float, float]]
    trials: int = 20
    tol: float = 1e-8
    expect_failure: bool = False

    def __post_init__(self):
        lhs = tuple(as_expr(e) for e in self.lhs)
        rhs = tuple(as_expr(e) for e in self.rhs)
        if len(lhs) != len(rhs):
            raise ValueError(f"check '{self.id}': {len(lhs)} left components vs {len(rhs)} right components")
        object.__setattr__(self, 'lhs', lhs)
        object.__setattr__(self, 'rhs', rhs)
        object.__setattr__(self, 'domain', dict(self.domain))

    @classmethod
    def from_defect(cls, id: str, anchor: str, defect: Sequence[ExprLike], domain: Domain,
                    **options: Any) -> 'IdentityCheck':
        defect = tuple(as_expr(e) for e in defect)
        return cls(id, anchor, defect, tuple(ZERO for _ in defect), dict(domain), **options)

    def defects(self) -> List[Expr]:
        """L - R, component by component."""
        return [add(l, neg(r)) for l, r in zip(self.lhs, self.rhs)]

    def with_options(self, trials: Optional[int] = None, tol: Optional[float] = None) -> 'IdentityCheck':
        return IdentityCheck(self.id, self.anchor, self.lhs, self.rhs, self.domain,
                             trials if trials is not None else self.trials,
                             tol if tol is not None else self.tol, self.expect_failure)


@dataclass
class CheckResult:
    """Outcome of one identity check."""

    id: str
    anchor: str
    status: str
    worst_error: float
    worst_point: Dict[str, float]
    trials: int
    seed: int
    tol: float
    wall_time: float = 0.0
    message: str = ''

    @property
    def passed(self) -> bool:
        return self.status == PASS

    def to_dict(self, timings: bool = False) -> Dict[str, Any]:
        data: Dict[str, Any] = {
            'id': self.id,
            'anchor': self.anchor,
            'status': self.status,
            'worst_error': self.worst_error,
            'worst_point': self.worst_point,
            'trials': self.trials,
            'seed': self.seed,
            'tol': self.tol,
        }
        if self.message:
            data['message'] = self.message
        if timings:
            data['wall_time'] = round(self.wall_time, 6)
        return data


def _largest_term(component: Expr, points: Dict[str, np.ndarray]) -> Expr:
    """The summand of ``component`` with the largest mean magnitude at ``points``."""
    if not isinstance(component, Sum):
        return component
    values = evaluate_many(list(component.children), points)
    magnitudes = [float(np.mean(np.abs(v))) for v in values]
    return component.children[int(np.argmax(magnitudes))]


def mutate_check(check: IdentityCheck, points: Dict[str, np.ndarray]) -> IdentityCheck:
    """
    Flip the sign of the numerically largest term of the numerically largest
    left-hand component.
    """
    if not check.lhs:
        return check
    values = evaluate_many(list(check.lhs), points)
    k = int(np.argmax([float(np.max(np.abs(v))) for v in values]))
    component = check.lhs[k]
    target = _largest_term(component, points)
    if isinstance(component, Sum):
        children = [neg(child) if child is target else child for child in component.children]
        mutated = add(*children)
    else:
        mutated = target.arg if isinstance(target, Negation) else neg(target)
    lhs = list(check.lhs)
    lhs[k] = mutated
    return IdentityCheck(check.id, check.anchor, tuple(lhs), check.rhs, check.domain, check.trials, check.tol,
                         check.expect_failure)


def run_check(check: IdentityCheck, seed: int = 0, mutate: bool = False) -> CheckResult:
    """
    Evaluate a check at ``check.trials`` seeded points.

    The point stream is derived from (seed, check id), so a check's points do
    not depend on which other checks run. With ``mutate`` the check is first
    mutated by ``mutate_check``; a mutated check that still passes is
    reported as vacuous.

    Args:
        check: The identity to test
        seed: Base seed
        mutate: Run the mutation test instead of the plain check

    Returns:
        CheckResult with the worst relative error and the point it occurred at
    """
    started = time.perf_counter()
    domain = dict(check.domain)
    missing = [name for name in free_symbols(check.lhs + check.rhs) if name not in domain]
    if missing:
        message = f"variable '{missing[0]}' has no sampling interval"
        logger.error(f"Check {check.id}: {message}")
        return CheckResult(check.id, check.anchor, ERROR, float('inf'), {}, check.trials, seed, check.tol,
                           time.perf_counter() - started, message)

    points = sample_points(domain, check.trials, seed, stream=check.id)
    try:
        target = mutate_check(check, points) if mutate else check
        comparison = compare_at_points(target.lhs, target.rhs, points, check.tol)
    except EvaluationError as e:
        point = {name: float(complex(v).real) for name, v in sorted(e.point.items())}
        logger.error(f"Check {check.id} failed to evaluate: {e.reason} at {point}")
        return CheckResult(check.id, check.anchor, ERROR, float('inf'), point, check.trials, seed, check.tol,
                           time.perf_counter() - started, e.reason)

    holds = comparison.ok
    if mutate:
        status = VACUOUS if holds != check.expect_failure else PASS
        if status == VACUOUS:
            logger.warning(f"Mutation of {check.id} went undetected")
    else:
        status = PASS if holds != check.expect_failure else FAIL
    elapsed = time.perf_counter() - started
    logger.info(f"Check {check.id}: {status} (worst error {comparison.worst_error:.3e}, {elapsed:.2f}s)")
    return CheckResult(check.id, check.anchor, status, comparison.worst_error, comparison.worst_point,
                       check.trials, seed, check.tol, elapsed)


# ---------------------------------------------------------------------------
# Finite-difference oracles
# ---------------------------------------------------------------------------

def finite_difference_oracle(e: ExprLike, var: str, point: Dict[str, float], h: float = 1e-5) -> complex:
    """
    Central difference (e(v+h) - e(v-h)) / 2h of ``e`` in ``var`` at ``point``.

    Raises:
        ValueError: if h is not positive
        EvaluationError: if e cannot be evaluated at a shifted point
    """
    if not h > 0:
        raise ValueError(f"finite-difference step must be positive, got {h}")
    if var not in point:
        raise ValueError(f"point does not assign '{var}'")
    shifted = {name: np.array([value, value], dtype=np.complex128) for name, value in point.items()}
    shifted[var] = np.array([point[var] + h, point[var] - h], dtype=np.complex128)
    values = evaluate_many([e], shifted)[0]
    return complex((values[0] - values[1]) / (2 * h))


def simpson_weights(low: float, high: float, nodes: int) -> Tuple[np.ndarray, np.ndarray]:
    """Composite Simpson nodes and weights on [low, high]; ``nodes`` must be odd."""
    if nodes < 3 or nodes % 2 == 0:
        raise ValueError(f"Simpson's rule needs an odd number of nodes >= 3, got {nodes}")
    x = np.linspace(low, high, nodes)
    step = (high - low) / (nodes - 1)
    w = np.ones(nodes)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    return x, w * step / 3.0


def _box_quadrature(box: Sequence[Tuple[float, float]], nodes: int) -> Tuple[List[np.ndarray], np.ndarray]:
    """Tensor-product Simpson grid: one flattened coordinate array per axis and the matching weights."""
    axes = [simpson_weights(low, high, nodes) for low, high in box]
    grids = np.meshgrid(*[x for x, _ in axes], indexing='ij')
    weights = np.ones_like(grids[0])
    for axis, (_, w) in enumerate(axes):
        shape = [1] * len(axes)
        shape[axis] = nodes
        weights = weights * w.reshape(shape)
    return [g.reshape(-1) for g in grids], weights.reshape(-1)


def bump(coords: Sequence[str], box: Sequence[Tuple[float, float]]) -> Expr:
    """Π_a (1 - u_a²)⁴ with u_a the coordinate rescaled to [-1, 1]; vanishes with three derivatives on the boundary."""
    factors = []
    for name, (low, high) in zip(coords, box):
        u = mul(constant(2 / (high - low)), add(symbol(name), constant(-(low + high) / 2)))
        factors.append(power(add(ONE, neg(power(u, 2))), 4))
    return mul(*factors)


@dataclass
class VariationResult:
    """Finite-difference first variation of the action against ∫E_iη."""

    finite_difference: float
    predicted: float
    error: float
    tol: float

    @property
    def ok(self) -> bool:
        return self.error <= self.tol


def action_variation_oracle(lagrangian: JetLagrangian, section: Section, component: int = 0,
                            h: float = 1e-5, nodes: int = 41, tol: float = 1e-4) -> VariationResult:
    """
    Compare (S[φ + hη] - S[φ - hη]) / 2h with ∫E_iη, S = ∫ℓ∘jφ over the
    chart box by Simpson quadrature and η a bump in fiber direction ``component``.
    """
    if not h > 0:
        raise ValueError(f"finite-difference step must be positive, got {h}")
    chart = lagrangian.chart
    coords = chart.coords
    box = [chart.base.domain()[name] for name in coords]
    eta = bump(coords, box)

    def shifted(sign: int) -> Section:
        values = list(section.components)
        values[component] = add(values[component], mul(constant(sign * h), eta))
        return Section(section.chart, tuple(values))

    ell = lagrangian.resolved
    grid, weights = _box_quadrature(box, nodes)
    points = dict(zip(coords, grid))
    E = euler_lagrange_along(lagrangian, section)[component]
    plus, minus, predicted = evaluate_many(
        [shifted(1).pullback(ell, order=1), shifted(-1).pullback(ell, order=1), mul(E, eta)], points)
    fd = float(np.real(np.sum(weights * (plus - minus)) / (2 * h)))
    exact = float(np.real(np.sum(weights * predicted)))
    error = abs(fd - exact) / (1.0 + max(abs(fd), abs(exact)))
    logger.debug(f"Action variation on '{lagrangian.name}': fd={fd:.8g} predicted={exact:.8g}")
    return VariationResult(fd, exact, error, tol)


# ---------------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------------

@dataclass
class Report:
    """All check results for one document and one set of run options."""

    document: str
    seed: int
    trials: int
    tol: float
    orientation: int = 1
    results: List[CheckResult] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.results)

    def add(self, result: CheckResult) -> None:
        self.results.append(result)

    def to_dict(self, timings: bool = False) -> Dict[str, Any]:
        return {
            'schema': REPORT_SCHEMA,
            'document': self.document,
            'seed': self.seed,
            'trials': self.trials,
            'tol': self.tol,
            'orientation': self.orientation,
            'passed': self.passed,
            'checks': [r.to_dict(timings) for r in self.results],
        }

    def to_json(self, timings: bool = False) -> str:
        return json.dumps(self.to_dict(timings), indent=2, ensure_ascii=False)

    def format(self, timings: bool = True) -> str:
        """Human-readable summary, one line per check."""
        icons = {PASS: '✅', FAIL: '❌', ERROR: '❌', VACUOUS: '⚠️'}
        lines = [f"📄 {self.document} (seed {self.seed}, {self.trials} trials, tol {self.tol:g})"]
        for r in self.results:
            line = f"  {icons.get(r.status, '?')} {r.id:<40} {r.status:<8} worst {r.worst_error:.2e}"
            if timings:
                line += f"  {r.wall_time:.2f}s"
            if r.message:
                line += f"  ({r.message})"
            lines.append(line)
        passed = sum(1 for r in self.results if r.passed)
        lines.append(f"{passed}/{len(self.results)} checks passed")
        return '\n'.join(lines)


def write_report(report: Report, path: Path, timings: bool = False) -> bool:
    """
    Write the JSON report, keeping the previous file as a .bak copy.

    Returns:
        True if successful, False otherwise
    """
    path = Path(path)
    try:
        if path.exists() and path.stat().st_size > 0:
            shutil.copy2(path, path.with_suffix(path.suffix + '.bak'))
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, 'w', encoding='utf-8') as f:
            f.write(report.to_json(timings))
            f.write('\n')
        logger.info(f"Report written to {path}")
        return True
    except (IOError, PermissionError) as e:
        logger.error(f"Error writing {path.name}: {e}")
        return False
