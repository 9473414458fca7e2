#!/usr/bin/env python3
"""
jetcartan - Main Application
Parses a document, runs identity checks or computations on it, and reports
the outcome. Exit status is 0 exactly when every requested check passes.
"""

import sys
import json
import argparse
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .checks import ALL, CheckContext, CheckSettings, UnknownCheckError, run_checks, select_checks
from .config import get_config
from .dsl import Document, DslError, format_document, parse_file
from .exprtext import format_expr
from .geometry import (
    AffineConnectionField, Chart, MetricField, SingularMetricError, christoffel_symbols, curvature_data, levi_civita,
    torsion_form,
)
from .gravity import KomarData, komar_current
from .oracles import INSTANCES, OracleChecksumError, OracleError, el_residual_oracle, load_oracle, write_oracle
from .symexpr import EvaluationError, Expr, evaluate_many, node_count, sample_points
from .verify import Report, write_report

COMPUTE_OBJECTS = ('christoffel', 'levi-civita', 'riemann', 'ricci', 'scalar-curvature', 'einstein', 'torsion',
                   'volume', 'komar-current')
EINSTEIN_FROM_CURRENTS = 'einstein-from-currents'
MAX_PRINTED_NODES = 40


class UsageError(ValueError):
    """A command that cannot run on the given document."""


@dataclass
class ComponentValue:
    index: Tuple[int, ...]
    max_abs: float
    expr: Optional[str] = None

    def to_dict(self) -> Dict[str, Any]:
        data: Dict[str, Any] = {'index': list(self.index), 'max_abs': self.max_abs}
        if self.expr is not None:
            data['expr'] = self.expr
        return data


@dataclass
class Computation:
    """Components of one computed object, with their largest magnitude over sample points."""

    object: str
    source: str
    document: str
    seed: int
    trials: int
    components: List[ComponentValue] = field(default_factory=list)

    @property
    def max_abs(self) -> float:
        return max((c.max_abs for c in self.components), default=0.0)

    def to_dict(self) -> Dict[str, Any]:
        return {
            'object': self.object,
            'source': self.source,
            'document': self.document,
            'seed': self.seed,
            'trials': self.trials,
            'max_abs': self.max_abs,
            'components': [c.to_dict() for c in self.components],
        }

    def format(self) -> str:
        lines = [f"🧮 {self.object} of '{self.source}' in {self.document} (max |value| {self.max_abs:.3e} "
                 f"over {self.trials} points)"]
        for c in self.components:
            index = ','.join(str(i) for i in c.index) or '-'
            line = f"  [{index}] max |value| {c.max_abs:.3e}"
            if c.expr is not None:
                line += f"  = {c.expr}"
            lines.append(line)
        return '\n'.join(lines)


class Jetcartan:
    """Runs checks and computations on one document."""

    def __init__(self, document: Document, settings: CheckSettings, seed: int = 0):
        self.logger = logging.getLogger(__name__)
        self.document = document
        self.settings = settings
        self.seed = seed
        self.logger.info(f"Loaded {document}")

    @classmethod
    def from_file(cls, path: str, settings: CheckSettings, seed: int = 0) -> 'Jetcartan':
        return cls(parse_file(path), settings, seed)

    def check(self, target: str = ALL, mutate: bool = False) -> Report:
        """
        Run the checks selected by ``target``.

        Args:
            target: 'all', a suite name or a check id
            mutate: Run the mutation test of each check instead

        Returns:
            Report in registry order
        """
        check_ids = select_checks(target, self.document)
        self.logger.info(f"Running {len(check_ids)} check(s) for '{target}' with seed {self.seed}")
        ctx = CheckContext(self.document, self.seed, self.settings)
        report = Report(self.document.name, self.seed, self.settings.trials, self.settings.tolerance,
                        self.settings.orientation)
        for result in run_checks(check_ids, ctx, mutate):
            report.add(result)
        return report

    def _metric(self, name: Optional[str]) -> Tuple[str, MetricField]:
        metrics = self.document.metrics
        if name is not None:
            if name not in metrics:
                raise UsageError(f"no metric named '{name}' in {self.document.name}")
            return name, metrics[name]
        if not metrics:
            raise UsageError(f"{self.document.name} declares no metric")
        return next(iter(metrics.items()))

    def _connection(self, name: Optional[str]) -> Tuple[str, AffineConnectionField]:
        connections = self.document.connections
        if name is not None and name in connections:
            return name, connections[name]
        if name is None and connections:
            return next(iter(connections.items()))
        metric_name, metric = self._metric(name)
        return f'levi-civita({metric_name})', levi_civita(metric)

    def _komar(self, name: Optional[str]) -> Tuple[str, KomarData]:
        komar = self.document.komar
        if name is not None:
            if name not in komar:
                raise UsageError(f"no komar declaration named '{name}' in {self.document.name}")
            return name, komar[name]
        if not komar:
            raise UsageError(f"{self.document.name} declares no komar data")
        return next(iter(komar.items()))

    def _components(self, what: str, name: Optional[str]) -> Tuple[str, Chart, np.ndarray]:
        if what == 'komar-current':
            source, data = self._komar(name)
            return source, data.metric.chart, np.array(komar_current(data).current, dtype=object)
        if what == 'torsion':
            source, connection = self._connection(name)
            return source, connection.chart, torsion_form(connection).components
        source, metric = self._metric(name)
        if what == 'christoffel':
            return source, metric.chart, christoffel_symbols(metric)
        if what == 'levi-civita':
            return source, metric.chart, levi_civita(metric).gamma
        if what == 'volume':
            return source, metric.chart, np.array(metric.volume, dtype=object)
        data = curvature_data(metric, levi_civita(metric))
        arrays = {
            'riemann': data.riemann.components,
            'ricci': data.ricci.components,
            'scalar-curvature': np.array(data.scalar, dtype=object),
            'einstein': data.einstein.components,
        }
        return source, metric.chart, arrays[what]

    def compute(self, what: str, name: Optional[str] = None) -> Computation:
        """
        Compute ``what`` and sample its components over the chart box.

        Args:
            what: One of COMPUTE_OBJECTS
            name: Metric, connection or komar declaration to use (first declared when omitted)

        Returns:
            Computation with the largest magnitude of each component
        """
        if what not in COMPUTE_OBJECTS:
            raise UsageError(f"unknown object '{what}' (expected one of {', '.join(COMPUTE_OBJECTS)})")
        source, chart, array = self._components(what, name)
        array = np.asarray(array, dtype=object)
        points = sample_points(chart.domain(), self.settings.trials, self.seed, stream=f'compute:{what}')
        indices = list(np.ndindex(*array.shape))
        exprs: List[Expr] = [array[index] for index in indices]
        values = evaluate_many(exprs, points)
        computation = Computation(what, source, self.document.name, self.seed, self.settings.trials)
        for index, expr, value in zip(indices, exprs, values):
            text = format_expr(expr) if node_count(expr) <= MAX_PRINTED_NODES else None
            computation.components.append(ComponentValue(tuple(int(i) for i in index),
                                                         float(np.max(np.abs(value))), text))
        self.logger.info(f"Computed {what} of '{source}': max |value| {computation.max_abs:.3e}")
        return computation


def run_oracle(kinds: Sequence[str], settings: CheckSettings, seed: int, write: bool,
               maintenance_mode: bool) -> bool:
    """
    Re-run residual oracles and compare them with the frozen fixtures.

    Returns:
        True if every oracle matches its fixture (or was written in maintenance mode)
    """
    logger = logging.getLogger(__name__)
    success = True
    for kind in kinds:
        result = el_residual_oracle(kind, seed=seed, tol=settings.tolerance)
        coefficients = ', '.join(f"{t}={c}" for t, c in zip(result.terms, result.coefficients))
        if write:
            path = write_oracle(result, settings.oracle_directory, maintenance_mode)
            print(f"✅ {kind}: {coefficients} written to {path}")
            continue
        try:
            stored = load_oracle(kind, settings.oracle_directory)
        except (OracleError, OracleChecksumError) as e:
            logger.error(f"Oracle fixture for '{kind}': {e}")
            print(f"❌ {kind}: {e}")
            success = False
            continue
        if stored.terms == result.terms and stored.coefficients == result.coefficients:
            print(f"✅ {kind}: {coefficients} matches the fixture")
        else:
            frozen = ', '.join(f"{t}={c}" for t, c in zip(stored.terms, stored.coefficients))
            print(f"❌ {kind}: fitted {coefficients}, fixture holds {frozen}")
            success = False
    return success


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog='jetcartan',
                                     description="Jet-bundle field theory: computations and identity checks")
    commands = parser.add_subparsers(dest='command', required=True)

    def run_options(sub: argparse.ArgumentParser) -> None:
        sub.add_argument('file', help='Document to load')
        sub.add_argument('--json', action='store_true', help='Print the machine-readable JSON report')
        sub.add_argument('--seed', type=int, help='Sampling seed (default from config)')
        sub.add_argument('--trials', type=int, help='Sample points per check (default from config)')
        sub.add_argument('--tol', type=float, help='Relative tolerance (default from config)')
        sub.add_argument('--orientation', type=int, choices=(1, -1), help='Orientation of the volume form')

    check = commands.add_parser('check', help='Run identity checks')
    run_options(check)
    check.add_argument('target', nargs='?', default=ALL, help="'all', a suite name or a check id")
    check.add_argument('--timings', action='store_true', help='Include wall times')
    check.add_argument('--mutate', action='store_true', help='Mutation-test the checks instead of running them')
    check.add_argument('--output', help='Also write the JSON report to this file')

    report = commands.add_parser('report', help='Run all checks and print the report')
    run_options(report)
    report.add_argument('--timings', action='store_true', help='Include wall times')
    report.add_argument('--output', help='Also write the JSON report to this file')

    einstein = commands.add_parser(EINSTEIN_FROM_CURRENTS,
                                   help='Check that the total current of the document is conserved')
    run_options(einstein)

    compute = commands.add_parser('compute', help='Compute a geometric object')
    run_options(compute)
    compute.add_argument('object', choices=COMPUTE_OBJECTS, help='Object to compute')
    compute.add_argument('--name', help='Metric, connection or komar declaration to use')

    show = commands.add_parser('print', help='Print the canonical form of a document')
    show.add_argument('file', help='Document to load')

    oracle = commands.add_parser('oracle', help='Re-run residual oracles against the frozen fixtures')
    oracle.add_argument('kind', nargs='?', default=ALL, help=f"'all' or one of {', '.join(INSTANCES)}")
    oracle.add_argument('--seed', type=int, help='Sampling seed (default from config)')
    oracle.add_argument('--write', action='store_true', help='Rewrite the fixtures (maintenance mode only)')

    commands.add_parser('config', help='Show configuration')
    return parser


def main(argv: Optional[Sequence[str]] = None):
    """Main entry point."""
    parser = build_parser()
    args = parser.parse_args(argv)

    try:
        config = get_config()
        config.setup_logging()

        if args.command == 'config':
            print(config)
            return

        seed = args.seed if getattr(args, 'seed', None) is not None else config.seed
        settings = config.check_settings(getattr(args, 'tol', None), getattr(args, 'trials', None),
                                         getattr(args, 'orientation', None))

        if args.command == 'oracle':
            kinds = list(INSTANCES) if args.kind == ALL else [args.kind]
            for kind in kinds:
                if kind not in INSTANCES:
                    raise UsageError(f"unknown oracle kind '{kind}' (known: {', '.join(INSTANCES)})")
            success = run_oracle(kinds, settings, seed, args.write, config.oracle_maintenance_mode)
            sys.exit(0 if success else 1)

        if args.command == 'print':
            print(format_document(parse_file(args.file)), end='')
            return

        runner = Jetcartan.from_file(args.file, settings, seed)

        if args.command == 'compute':
            computation = runner.compute(args.object, args.name)
            if args.json:
                print(json.dumps(computation.to_dict(), indent=2, ensure_ascii=False))
            else:
                print(computation.format())
            return

        target = {'check': getattr(args, 'target', ALL), 'report': ALL}.get(args.command, EINSTEIN_FROM_CURRENTS)
        mutate = getattr(args, 'mutate', False)
        timings = getattr(args, 'timings', False)
        report = runner.check(target, mutate)
        if args.json or args.command == 'report':
            print(report.to_json(timings))
        else:
            print(report.format(timings))
        output = getattr(args, 'output', None)
        if output and not write_report(report, Path(output), timings):
            sys.exit(1)
        sys.exit(0 if report.passed and report.results else 1)

    except KeyboardInterrupt:
        print("\n👋 Stopped by user")
        sys.exit(130)
    except (DslError, UsageError, UnknownCheckError, OracleError, OracleChecksumError, SingularMetricError,
            EvaluationError, FileNotFoundError, IsADirectoryError) as e:
        print(f"❌ {e}")
        sys.exit(1)
    except Exception as e:
        logging.error(f"Fatal error: {e}")
        sys.exit(1)


if __name__ == "__main__":
    main()
