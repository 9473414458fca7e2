"""
Residual-template oracles and their frozen fixture store.

Each covariant model satisfies an off-shell balance law

    ∇_a(𝒰∘jφ)^a_b - source_b = Σ_k c_k T_k,b

where the T_k are contractions of the Euler-Lagrange expressions with field
derivatives. ``el_residual_oracle`` fits the c_k once on a fixed
two-dimensional instance, rationalizes them and re-verifies the cancellation.
Normal runs only read the stored fixtures, guarded by sha256 checksums.
"""

import hashlib
import json
import logging
import shutil
from dataclasses import dataclass
from datetime import date
from fractions import Fraction
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .connections import FiberedChart, LinearConnection, Section, zero_linear_connection
from .exprtext import format_expr, parse_expr
from .gauge import GaugeField, builtin_structure
from .geometry import Chart, MetricField
from .gravity import GravityModel, gravity_lagrangian
from .matter import DiracModel, ScalarModel, dirac_lagrangian, scalar_lagrangian
from .symexpr import ZERO, Expr, add, constant, equal_numeric, evaluate_many, mul, neg, sample_points
from .variational import JetLagrangian, euler_lagrange_along, noether_balance, noether_residual
from .yang_mills import CoupledModel, YangMillsModel, yang_mills_lagrangian

logger = logging.getLogger(__name__)

CHECKSUM_FILE = 'checksums.txt'
COVARIANT = 'covariant'     # Σ_σ E_σ ∇_bφ^σ with the model connection
PARTIAL = 'partial'         # Σ_σ E_σ ∂_bφ^σ
MAX_DENOMINATOR = 64


class OracleError(RuntimeError):
    """An oracle could not be run, stored or read."""


class OracleChecksumError(ValueError):
    """A stored oracle fixture does not match its recorded checksum."""


@dataclass(frozen=True)
class OracleResult:
    """Exact template coefficients with a date-stamped provenance note."""

    id: str
    kind: str
    terms: Tuple[str, ...]
    coefficients: Tuple[Fraction, ...]
    provenance: str
    worst_error: float = 0.0

    def coefficient(self, term: str) -> Fraction:
        if term not in self.terms:
            return Fraction(0)
        return self.coefficients[self.terms.index(term)]

    def to_dict(self) -> Dict[str, Any]:
        return {
            'id': self.id,
            'kind': self.kind,
            'terms': list(self.terms),
            'coefficients': [str(c) for c in self.coefficients],
            'provenance': self.provenance,
            'worst_error': self.worst_error,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'OracleResult':
        try:
            return cls(str(data['id']), str(data['kind']), tuple(data['terms']),
                       tuple(Fraction(c) for c in data['coefficients']), str(data['provenance']),
                       float(data.get('worst_error', 0.0)))
        except (KeyError, TypeError, ValueError) as e:
            raise OracleError(f"malformed oracle fixture: {e}") from e


# ---------------------------------------------------------------------------
# Instances
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class OracleInstance:
    """One field configuration with everything the balance law needs."""

    lagrangian: JetLagrangian
    kappa: object
    connection: object
    section: Section
    source: Optional[List[Expr]]
    terms: Tuple[str, ...]


def _e(text: str) -> Expr:
    return parse_expr(text)


def _plane() -> Chart:
    return Chart('plane', ('t', 'x'))


def _plane_metric(chart: Chart) -> MetricField:
    off = _e('t*x/8')
    return MetricField(chart, [[_e('1 + x^2/4'), off], [off, _e('-1 - t^2/4')]], 'lorentzian')


def _scalar_model(chart: Chart, g: MetricField, charged: bool) -> ScalarModel:
    fiber = FiberedChart('E', chart, ('phi',))
    if charged:
        potential = LinearConnection(fiber, [[[_e('i*x/2')]], [[_e('i*t^2/3')]]])
    else:
        potential = zero_linear_connection(fiber)
    return ScalarModel(g, potential, mass=2 if not charged else 1)


def _scalar_section(model: ScalarModel) -> Section:
    return model.section([_e('1 + t^2 + t*x/2')], [_e('x - t^3/3')])


def _free_scalar() -> OracleInstance:
    chart = _plane()
    model = _scalar_model(chart, _plane_metric(chart), charged=False)
    return OracleInstance(scalar_lagrangian(model), model.connection, model.base_connection,
                          _scalar_section(model), None, (PARTIAL,))


def _scalar() -> OracleInstance:
    chart = _plane()
    model = _scalar_model(chart, _plane_metric(chart), charged=True)
    return OracleInstance(scalar_lagrangian(model), model.connection, model.base_connection,
                          _scalar_section(model), None, (COVARIANT, PARTIAL))


def _dirac() -> OracleInstance:
    chart = _plane()
    model = DiracModel(chart, [[_e('1 + x^2/8'), _e('t/8')], [0, _e('1 + t^2/8')]],
                       (_e('x/2'), _e('t^2/3')), mass=1)
    section = model.section([_e('1 + t*x/2'), _e('x - t/3')], [_e('t^2 + 1/2'), _e('1 - x*t')])
    return OracleInstance(dirac_lagrangian(model), model.connection, model.base_connection, section, None,
                          (COVARIANT, PARTIAL))


def _yang_mills() -> OracleInstance:
    chart = _plane()
    g = _plane_metric(chart)
    field = GaugeField(builtin_structure('su2'), chart,
                       [[_e('x/2'), _e('t/3')], [_e('t*x/4'), _e('1/2')], [_e('t^2/4'), _e('x^2/5')]])
    model = YangMillsModel(g, field)
    return OracleInstance(yang_mills_lagrangian(model), model.overconnection, model.base_connection,
                          model.section(), [ZERO, ZERO], (COVARIANT, PARTIAL))


def _coupled() -> OracleInstance:
    chart = _plane()
    g = _plane_metric(chart)
    matter = _scalar_model(chart, g, charged=False)
    gauge = YangMillsModel(g, GaugeField(builtin_structure('u1'), chart, [[_e('x/2'), _e('t^2/3')]]))
    model = CoupledModel(matter, gauge)
    return OracleInstance(model.lagrangian(), model.connection, gauge.base_connection,
                          model.section(_scalar_section(matter)), [ZERO, ZERO], (COVARIANT, PARTIAL))


def _gravity() -> OracleInstance:
    chart = _plane()
    model = GravityModel(_plane_metric(chart))
    return OracleInstance(gravity_lagrangian(model), model.overconnection, model.connection, model.section(),
                          [ZERO, ZERO], (COVARIANT,))


INSTANCES: Dict[str, Callable[[], OracleInstance]] = {
    'free-scalar': _free_scalar,
    'scalar': _scalar,
    'dirac': _dirac,
    'yang-mills': _yang_mills,
    'coupled': _coupled,
    'gravity': _gravity,
}


def template_terms(lagrangian: JetLagrangian, kappa, section: Section) -> Dict[str, List[Expr]]:
    """The candidate residual contractions, one list of b-components per term."""
    E = euler_lagrange_along(lagrangian, section)
    chart = section.chart
    partial = [add(*(mul(E[s], section.derivative(s, b)) for s in range(chart.n))) for b in range(chart.m)]
    return {COVARIANT: noether_residual(lagrangian, kappa, section), PARTIAL: partial}


def template_residual(instance: OracleInstance, result: OracleResult) -> List[Expr]:
    """Balance minus the fitted template; zero when the template is right."""
    balance = noether_balance(instance.lagrangian, instance.kappa, instance.connection, instance.section,
                              instance.source)
    terms = template_terms(instance.lagrangian, instance.kappa, instance.section)
    return apply_template(balance, terms, dict(zip(result.terms, result.coefficients)))


def _rationalize(value: complex) -> Fraction:
    return Fraction(float(value.real)).limit_denominator(MAX_DENOMINATOR)


def el_residual_oracle(kind: str, trials: int = 12, seed: int = 0, tol: float = 1e-8,
                       today: Optional[date] = None) -> OracleResult:
    """
    Fit the residual template of ``kind`` by least squares on its dimension-2 instance.

    Args:
        kind: One of INSTANCES
        trials: Number of sample points
        seed: Sampling seed
        tol: Relative tolerance for the re-verification
        today: Date for the provenance note

    Returns:
        OracleResult with rational coefficients

    Raises:
        OracleError: if the kind is unknown or the fitted template does not cancel the balance
    """
    if kind not in INSTANCES:
        raise OracleError(f"unknown oracle kind '{kind}' (known: {', '.join(sorted(INSTANCES))})")
    logger.info(f"Running residual oracle for '{kind}'")
    instance = INSTANCES[kind]()
    balance = noether_balance(instance.lagrangian, instance.kappa, instance.connection, instance.section,
                              instance.source)
    candidates = template_terms(instance.lagrangian, instance.kappa, instance.section)
    domain = instance.section.chart.base.domain()
    points = sample_points(domain, trials, seed, stream=f'oracle:{kind}')
    m = len(balance)

    target = np.concatenate(evaluate_many(balance, points))
    columns = [np.concatenate(evaluate_many(candidates[name], points)) for name in instance.terms]
    scale = 1.0 + float(np.max(np.abs(target)))
    live = [k for k, col in enumerate(columns) if float(np.max(np.abs(col))) > 1e-10 * scale]
    for k, name in enumerate(instance.terms):
        if k not in live:
            logger.info(f"Term '{name}' vanishes on the '{kind}' instance; its coefficient is recorded as 0")
    coefficients = [Fraction(0)] * len(instance.terms)
    if live:
        A = np.stack([columns[k] for k in live], axis=1)
        fitted, *_ = np.linalg.lstsq(A, target, rcond=None)
        for k, value in zip(live, fitted):
            coefficients[k] = _rationalize(value)

    result = OracleResult(f'el-residual/{kind}', kind, instance.terms, tuple(coefficients), '')
    residual = template_residual(instance, result)
    comparison = equal_numeric(residual, [ZERO] * m, domain, trials, tol, seed + 1, stream=f'oracle:{kind}:verify')
    if not comparison.ok:
        worst = residual[comparison.worst_component]
        raise OracleError(f"residual template for '{kind}' does not cancel (worst error {comparison.worst_error:.3e});"
                          f" residual component {comparison.worst_component}: {format_expr(worst)[:400]}")
    stamp = (today or date.today()).isoformat()
    provenance = (f"{stamp}: least-squares fit on the dimension-2 {kind} instance at {trials} points "
                  f"(seed {seed}), rationalized and re-verified")
    logger.info(f"Oracle '{kind}' fitted: " + ', '.join(f"{n}={c}" for n, c in zip(instance.terms, coefficients)))
    return OracleResult(result.id, kind, instance.terms, tuple(coefficients), provenance, comparison.worst_error)


# ---------------------------------------------------------------------------
# Fixture store
# ---------------------------------------------------------------------------

def fixture_name(kind: str) -> str:
    return f'el-residual-{kind}.json'


def sha256_of(path: Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def read_checksums(directory: Path) -> Dict[str, str]:
    """Parse a sha256sum-style listing into {file name: digest}."""
    path = Path(directory) / CHECKSUM_FILE
    if not path.exists():
        return {}
    checksums = {}
    for line in path.read_text(encoding='utf-8').splitlines():
        parts = line.split()
        if len(parts) == 2:
            checksums[parts[1].lstrip('*')] = parts[0].lower()
    return checksums


def _write_checksums(directory: Path, checksums: Dict[str, str]) -> None:
    lines = [f"{digest}  {name}" for name, digest in sorted(checksums.items())]
    (Path(directory) / CHECKSUM_FILE).write_text('\n'.join(lines) + '\n', encoding='utf-8')


def load_oracle(kind: str, directory: Path) -> OracleResult:
    """
    Read a stored oracle after verifying its checksum.

    Raises:
        OracleError: if the fixture is missing or malformed
        OracleChecksumError: if the fixture has no checksum entry or does not match it
    """
    directory = Path(directory)
    name = fixture_name(kind)
    path = directory / name
    if not path.exists():
        raise OracleError(f"oracle fixture {path} not found")
    expected = read_checksums(directory).get(name)
    if expected is None:
        raise OracleChecksumError(f"no checksum recorded for {name}")
    actual = sha256_of(path)
    if actual != expected:
        raise OracleChecksumError(f"checksum mismatch for {name}: expected {expected[:12]}..., got {actual[:12]}...")
    try:
        data = json.loads(path.read_text(encoding='utf-8'))
    except json.JSONDecodeError as e:
        raise OracleError(f"cannot parse {name}: {e}") from e
    if not isinstance(data, dict):
        raise OracleError(f"unexpected structure in {name}")
    result = OracleResult.from_dict(data)
    if result.kind != kind:
        raise OracleError(f"{name} holds the oracle for '{result.kind}', not '{kind}'")
    logger.debug(f"Loaded oracle '{kind}' from {path}")
    return result


def write_oracle(result: OracleResult, directory: Path, maintenance_mode: bool) -> Path:
    """
    Store an oracle fixture and refresh the checksum listing.

    Raises:
        OracleError: outside maintenance mode, or when the file cannot be written
    """
    if not maintenance_mode:
        raise OracleError("oracle fixtures can only be written in maintenance mode")
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    path = directory / fixture_name(result.kind)
    try:
        if path.exists() and path.stat().st_size > 0:
            shutil.copy2(path, path.with_suffix(path.suffix + '.bak'))
        with open(path, 'w', encoding='utf-8') as f:
            json.dump(result.to_dict(), f, indent=2, ensure_ascii=False)
            f.write('\n')
        checksums = read_checksums(directory)
        checksums[path.name] = sha256_of(path)
        _write_checksums(directory, checksums)
    except (IOError, PermissionError) as e:
        raise OracleError(f"error writing {path.name}: {e}") from e
    logger.info(f"Oracle fixture written: {path}")
    return path


def residual_coefficients(kind: str, directory: Path) -> Dict[str, Fraction]:
    """{term: coefficient} from the frozen fixture of ``kind``."""
    result = load_oracle(kind, directory)
    return dict(zip(result.terms, result.coefficients))


def apply_template(balance: Sequence[Expr], terms: Dict[str, List[Expr]], coefficients: Dict[str, Fraction]) -> List[Expr]:
    """balance_b - Σ_k c_k T_k,b."""
    return [add(balance[b], *(neg(mul(constant(c), terms[name][b])) for name, c in coefficients.items() if c != 0))
            for b in range(len(balance))]
