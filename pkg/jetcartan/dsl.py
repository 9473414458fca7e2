"""
Declaration language for jetcartan documents.

A document is a sequence of declarations; bodies sit in braces and may span
lines, so several declarations can share a line::

    let M = 1
    chart S dim 4 coords t r th ph box [-1,1; 3,10; 0.3,2.8; -3,3]
    metric g on S signature lorentzian { [1 - 2*M/r, 0, 0, 0; ...] }
    connection nabla = levi-civita(g)
    gauge G frame su2
    lagrangian L on g fiber u { (gu_0_0*u_a0*u_a0 - u^2)*sqrtg/2 }
    section s of L { [exp(t)] }
    model yangmills A { metric g; gauge G; potential [...] }
    komar K { metric g; vector [1, 0, 0, 0] }
    check einstein-vacuum

Expressions use the text syntax of ``exprtext``; ``#`` starts a comment.
Every failure is a DslError carrying the line and column of the offending
token.
"""

import bisect
import logging
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Set, Tuple, Union

import numpy as np

from .checks import REGISTRY
from .connections import FiberedChart, LinearConnection, Section, zero_linear_connection
from .exprtext import ExprNameError, ExprSyntaxError, Token, format_expr, format_matrix, parse_tokens, tokenize
from .gauge import BUILTIN_FRAMES, GaugeField, GaugeStructure, builtin_structure
from .geometry import AffineConnectionField, Chart, DimensionError, MetricField, levi_civita
from .gravity import GravityModel, KomarData
from .matter import DiracModel, ScalarModel
from .symexpr import FUNCTIONS, ZERO, Expr, equal_numeric, evaluate
from .variational import JetLagrangian, metric_symbol_names
from .yang_mills import YangMillsModel

logger = logging.getLogger(__name__)

KEYWORDS = ('let', 'chart', 'metric', 'connection', 'gauge', 'lagrangian', 'section', 'model', 'komar', 'check')
MODEL_KINDS = ('scalar', 'dirac', 'yangmills', 'gravity')
SIGNATURES = ('lorentzian', 'riemannian')
RESERVED = frozenset(KEYWORDS) | frozenset(FUNCTIONS) | {'i'}
MAX_DIM = 8

# value kinds of model and komar body keys
_NAME, _MATRIX, _EXPR = 'name', 'matrix', 'expr'
MODEL_KEYS: Dict[str, Dict[str, str]] = {
    'scalar': {'metric': _NAME, 'gauge': _NAME, 'potential': _MATRIX, 'mass': _EXPR,
               'field': _MATRIX, 'conjugate': _MATRIX},
    'dirac': {'chart': _NAME, 'tetrad': _MATRIX, 'potential': _MATRIX, 'mass': _EXPR,
              'field': _MATRIX, 'conjugate': _MATRIX},
    'yangmills': {'metric': _NAME, 'gauge': _NAME, 'potential': _MATRIX},
    'gravity': {'metric': _NAME, 'connection': _NAME},
}
KOMAR_KEYS = {'metric': _NAME, 'vector': _MATRIX}


class DslError(ValueError):
    """A document problem at a 1-based (line, column)."""

    def __init__(self, message: str, line: int = 1, column: int = 1):
        self.message = message
        self.line = line
        self.column = column
        super().__init__(f"line {line}, column {column}: {message}")


class DslSyntaxError(DslError):
    pass


class UnresolvedNameError(DslError):
    """A reference to a name that was never declared."""

    def __init__(self, name: str, message: str, line: int = 1, column: int = 1):
        self.name = name
        super().__init__(message, line, column)


class DimensionMismatchError(DslError):
    pass


@dataclass(frozen=True)
class CheckDeclaration:
    id: str
    expect_failure: bool = False
    line: int = 0


@dataclass(frozen=True, eq=False)
class ModelEntry:
    """A declared model with the section it is evaluated along (None when the model carries its own)."""

    name: str
    kind: str
    model: object
    section: Optional[Section] = None


@dataclass(frozen=True)
class Declaration:
    kind: str
    name: str
    line: int
    text: str


@dataclass
class Document:
    """Declared objects by name, in declaration order."""

    name: str = '<text>'
    bindings: Dict[str, Expr] = field(default_factory=dict)
    charts: Dict[str, Chart] = field(default_factory=dict)
    metrics: Dict[str, MetricField] = field(default_factory=dict)
    connections: Dict[str, AffineConnectionField] = field(default_factory=dict)
    gauges: Dict[str, GaugeStructure] = field(default_factory=dict)
    lagrangians: Dict[str, JetLagrangian] = field(default_factory=dict)
    sections: Dict[str, Section] = field(default_factory=dict)
    models: Dict[str, ModelEntry] = field(default_factory=dict)
    komar: Dict[str, KomarData] = field(default_factory=dict)
    checks: List[CheckDeclaration] = field(default_factory=list)
    declarations: List[Declaration] = field(default_factory=list)

    def get_summary(self) -> Dict[str, int]:
        return {
            'charts': len(self.charts),
            'metrics': len(self.metrics),
            'connections': len(self.connections),
            'gauges': len(self.gauges),
            'lagrangians': len(self.lagrangians),
            'sections': len(self.sections),
            'models': len(self.models),
            'komar': len(self.komar),
            'checks': len(self.checks),
        }

    def __str__(self) -> str:
        counts = ', '.join(f'{count} {kind}' for kind, count in self.get_summary().items() if count)
        return f"Document '{self.name}' ({counts or 'empty'})"


def _format_float(value: float) -> str:
    return repr(float(value))


def _constant_value(e: Expr) -> float:
    if e.free:
        raise ValueError(f"expected a number, found an expression in '{sorted(e.free)[0]}'")
    value = evaluate(e, {})
    if value.imag != 0 or not math.isfinite(value.real):
        raise ValueError("expected a finite real number")
    return value.real


class _DocumentParser:
    def __init__(self, text: str, name: str):
        # comments and carriage returns become blanks so offsets stay put
        clean = re.sub(r'#[^\n]*', lambda match: ' ' * len(match.group()), text.replace('\r', ' '))
        self.text = clean
        self.line_starts = [0] + [match.end() for match in re.finditer('\n', clean)]
        self.document = Document(name=name)
        self.names: Dict[str, str] = {}
        try:
            self.tokens = tokenize(clean)
        except ExprSyntaxError as e:
            raise DslSyntaxError(e.message, *self.position(e.offset)) from None
        self.pos = 0

    # -- positions and errors ------------------------------------------------

    def position(self, offset: int) -> Tuple[int, int]:
        line = bisect.bisect_right(self.line_starts, offset)
        return line, offset - self.line_starts[line - 1] + 1

    def error(self, message: str, token: Token, cls=DslSyntaxError) -> DslError:
        return cls(message, *self.position(token.offset))

    def unresolved(self, name: str, what: str, token: Token) -> UnresolvedNameError:
        return UnresolvedNameError(name, f"unknown {what} '{name}'", *self.position(token.offset))

    # -- token stream --------------------------------------------------------

    @property
    def current(self) -> Token:
        return self.tokens[self.pos]

    def advance(self) -> Token:
        token = self.tokens[self.pos]
        if token.kind != 'end':
            self.pos += 1
        return token

    def skip_newlines(self) -> None:
        while self.current.text == '\n' and self.current.kind == 'op':
            self.pos += 1

    def at(self, text: str) -> bool:
        token = self.current
        return token.kind in ('op', 'name') and token.text == text

    def accept(self, text: str) -> bool:
        self.skip_newlines()
        if self.at(text):
            self.pos += 1
            return True
        return False

    def describe(self, token: Token) -> str:
        if token.kind == 'end':
            return 'end of input'
        if token.text == '\n':
            return 'end of line'
        return repr(token.text)

    def expect(self, text: str) -> Token:
        self.skip_newlines()
        token = self.current
        if not self.at(text):
            raise self.error(f"expected '{text}' but found {self.describe(token)}", token)
        return self.advance()

    def expect_name(self, what: str) -> Token:
        self.skip_newlines()
        token = self.current
        if token.kind != 'name':
            raise self.error(f"expected {what} but found {self.describe(token)}", token)
        return self.advance()

    def expect_word(self, what: str) -> Tuple[str, Token]:
        """A name with adjacent hyphenated parts, as in ``levi-civita`` or ``komar-offshell``."""
        first = self.expect_name(what)
        parts = [first.text]
        end = first.offset + len(first.text)
        while (self.current.text == '-' and self.current.offset == end
               and self.tokens[self.pos + 1].kind in ('name', 'number')
               and self.tokens[self.pos + 1].offset == end + 1):
            self.advance()
            part = self.advance()
            parts.append('-' + part.text)
            end = part.offset + len(part.text)
        return ''.join(parts), first

    def expect_int(self, what: str, low: int, high: int) -> int:
        self.skip_newlines()
        token = self.current
        if token.kind != 'number' or not token.text.isdigit():
            raise self.error(f"expected {what} but found {self.describe(token)}", token)
        value = int(token.text)
        if not low <= value <= high:
            raise self.error(f"{what} must lie between {low} and {high}", token, DimensionMismatchError)
        self.advance()
        return value

    def declare(self, token: Token, kind: str) -> str:
        name = token.text
        if name in RESERVED:
            raise self.error(f"'{name}' is reserved and cannot name a {kind}", token)
        if name in self.names:
            raise self.error(f"'{name}' is already declared as a {self.names[name]}", token)
        self.names[name] = kind
        return name

    def lookup(self, token: Token, table: Dict[str, object], what: str):
        if token.text not in table:
            raise self.unresolved(token.text, what, token)
        return table[token.text]

    # -- expressions ---------------------------------------------------------

    def collect(self, stops: Set[str]) -> List[Token]:
        """Tokens up to a stop at bracket depth zero; newlines vanish unless they are a stop."""
        collected = []
        depth = 0
        while True:
            token = self.current
            if token.kind == 'end':
                break
            if token.kind == 'op':
                if depth == 0 and token.text in stops:
                    break
                if token.text in '([':
                    depth += 1
                elif token.text in ')]':
                    if depth == 0:
                        break
                    depth -= 1
                elif token.text in '{}':
                    break
            self.pos += 1
            if token.text != '\n' or token.kind != 'op':
                collected.append(token)
        return collected

    def collect_group(self) -> List[Token]:
        """A bracketed value ``[...]`` including both brackets."""
        opening = self.expect('[')
        inner = self.collect(set())
        closing = self.expect(']')
        return [opening] + inner + [closing]

    def parse_expression(self, tokens: List[Token], variables: Callable[[str], bool], where: Token) -> Expr:
        if not tokens:
            raise self.error("expected an expression", where)
        for token in tokens:
            if token.kind == 'op' and token.text not in '+-*/^()':
                raise self.error(f"unexpected {token.text!r} in expression", token)
        last = tokens[-1]
        stream = list(tokens) + [Token('end', '', last.offset + len(last.text))]
        try:
            return parse_tokens(stream, self.document.bindings, variables)
        except ExprNameError as e:
            token = Token('name', e.name, e.offset)
            raise self.unresolved(e.name, 'name', token) from None
        except ExprSyntaxError as e:
            raise DslSyntaxError(e.message, *self.position(e.offset)) from None

    def split_matrix(self, group: List[Token]) -> List[List[List[Token]]]:
        """Rows of entry token lists from ``[a, b; c, d]`` tokens."""
        opening = group[0]
        if opening.text != '[':
            raise self.error("expected a matrix '[...]'", opening)
        rows: List[List[List[Token]]] = [[[]]]
        depth = 0
        for token in group[1:-1]:
            if token.kind == 'op' and depth == 0 and token.text in ',;':
                if token.text == ',':
                    rows[-1].append([])
                else:
                    rows.append([[]])
                continue
            if token.kind == 'op' and token.text in '([':
                depth += 1
            elif token.kind == 'op' and token.text in ')]':
                depth -= 1
            rows[-1][-1].append(token)
        if len({len(row) for row in rows}) != 1:
            raise self.error("matrix rows have different lengths", opening, DimensionMismatchError)
        return rows

    def parse_matrix(self, group: List[Token], variables: Callable[[str], bool]) -> List[List[Expr]]:
        rows = self.split_matrix(group)
        return [[self.parse_expression(entry, variables, group[0]) for entry in row] for row in rows]

    def parse_vector(self, group: List[Token], variables: Callable[[str], bool]) -> List[Expr]:
        rows = self.parse_matrix(group, variables)
        if len(rows) == 1:
            return rows[0]
        if all(len(row) == 1 for row in rows):
            return [row[0] for row in rows]
        raise self.error("expected a vector, found a matrix", group[0], DimensionMismatchError)

    @staticmethod
    def no_variables(name: str) -> bool:
        return False

    @staticmethod
    def coordinates(*charts) -> Callable[[str], bool]:
        names = set()
        for chart in charts:
            names |= set(chart.coords)
        return names.__contains__

    # -- declarations --------------------------------------------------------

    def parse(self) -> Document:
        handlers = {
            'let': self.parse_let,
            'chart': self.parse_chart,
            'metric': self.parse_metric,
            'connection': self.parse_connection,
            'gauge': self.parse_gauge,
            'lagrangian': self.parse_lagrangian,
            'section': self.parse_section,
            'model': self.parse_model,
            'komar': self.parse_komar,
            'check': self.parse_check,
        }
        while True:
            self.skip_newlines()
            token = self.current
            if token.kind == 'end':
                break
            if token.kind == 'op' and token.text == ';':
                self.advance()
                continue
            if token.kind != 'name' or token.text not in handlers:
                raise self.error(f"expected a declaration ({', '.join(KEYWORDS)}) but found {self.describe(token)}",
                                 token)
            self.advance()
            try:
                name, text = handlers[token.text](token)
            except DslError:
                raise
            except DimensionError as e:
                raise self.error(str(e), token, DimensionMismatchError) from None
            except Exception as e:
                raise self.error(f"invalid {token.text} declaration: {e}", token, DslError) from None
            line = self.position(token.offset)[0]
            self.document.declarations.append(Declaration(token.text, name, line, text))
        logger.debug(f"Parsed {self.document}")
        return self.document

    def parse_let(self, keyword: Token) -> Tuple[str, str]:
        name = self.declare(self.expect_name('a binding name'), 'binding')
        equals = self.expect('=')
        tokens = self.collect({'\n', ';'})
        value = self.parse_expression(tokens, self.no_variables, equals)
        self.document.bindings[name] = value
        return name, f'let {name} = {format_expr(value)}'

    def parse_chart(self, keyword: Token) -> Tuple[str, str]:
        name = self.declare(self.expect_name('a chart name'), 'chart')
        self.expect('dim')
        dim = self.expect_int('a dimension', 1, MAX_DIM)
        self.expect('coords')
        coords = []
        for _ in range(dim):
            token = self.expect_name('a coordinate name')
            if token.text in RESERVED or token.text in self.document.bindings:
                raise self.error(f"'{token.text}' cannot name a coordinate", token)
            coords.append(token.text)
        box = ()
        if self.accept('box'):
            group = self.collect_group()
            rows = self.parse_matrix(group, self.no_variables)
            if len(rows) != dim or len(rows[0]) != 2:
                raise self.error(f"box needs {dim} rows of two bounds", group[0], DimensionMismatchError)
            box = tuple((_constant_value(low), _constant_value(high)) for low, high in rows)
        chart = Chart(name, tuple(coords), box)
        self.document.charts[name] = chart
        bounds = '; '.join(f'{_format_float(low)}, {_format_float(high)}' for low, high in chart.box)
        return name, f"chart {name} dim {dim} coords {' '.join(coords)} box [{bounds}]"

    def parse_metric(self, keyword: Token) -> Tuple[str, str]:
        name_token = self.expect_name('a metric name')
        name = self.declare(name_token, 'metric')
        self.expect('on')
        chart_token = self.expect_name('a chart name')
        chart = self.lookup(chart_token, self.document.charts, 'chart')
        signature = ''
        if self.accept('signature'):
            token = self.expect_name('a signature')
            if token.text not in SIGNATURES:
                raise self.error(f"signature must be one of {', '.join(SIGNATURES)}", token)
            signature = token.text
        self.expect('{')
        group = self.collect_group()
        self.expect('}')
        rows = self.parse_matrix(group, self.coordinates(chart))
        m = chart.dim
        if len(rows) != m or len(rows[0]) != m:
            raise self.error(f"metric on a {m}-dimensional chart needs a {m}x{m} matrix, got "
                             f"{len(rows)}x{len(rows[0])}", group[0], DimensionMismatchError)
        components = np.empty((m, m), dtype=object)
        for a in range(m):
            components[a, a] = rows[a][a]
            for b in range(a + 1, m):
                upper, lower = rows[a][b], rows[b][a]
                if upper is not lower and not equal_numeric(upper, lower, chart.domain(), trials=8).ok:
                    raise self.error(f"metric '{name}' is not symmetric in entries ({a},{b}) and ({b},{a})",
                                     group[0], DslError)
                components[a, b] = components[b, a] = upper
        metric = MetricField(chart, components, signature)
        metric.validate()
        self.document.metrics[name] = metric
        text = f'metric {name} on {chart.name}'
        if signature:
            text += f' signature {signature}'
        return name, f'{text} {{ {format_matrix(rows_of(metric.components))} }}'

    def parse_connection(self, keyword: Token) -> Tuple[str, str]:
        name = self.declare(self.expect_name('a connection name'), 'connection')
        if self.accept('='):
            word, token = self.expect_word('levi-civita')
            if word != 'levi-civita':
                raise self.error(f"expected 'levi-civita' but found {word!r}", token)
            self.expect('(')
            metric_token = self.expect_name('a metric name')
            metric = self.lookup(metric_token, self.document.metrics, 'metric')
            self.expect(')')
            self.document.connections[name] = levi_civita(metric)
            return name, f'connection {name} = levi-civita({metric_token.text})'

        self.expect('on')
        chart_token = self.expect_name('a chart name')
        chart = self.lookup(chart_token, self.document.charts, 'chart')
        symmetric = self.accept('symmetric')
        self.expect('{')
        m = chart.dim
        gamma = np.full((m, m, m), ZERO, dtype=object)
        given: Dict[Tuple[int, int, int], Expr] = {}
        variables = self.coordinates(chart)
        while not self.accept('}'):
            if self.accept(';'):
                continue
            a = self.expect_int('an index', 0, m - 1)
            c = self.expect_int('an index', 0, m - 1)
            b = self.expect_int('an index', 0, m - 1)
            colon = self.expect(':')
            value = self.parse_expression(self.collect({'\n', ';'}), variables, colon)
            key = (c, min(a, b), max(a, b)) if symmetric else (c, a, b)
            if key in given:
                raise self.error(f"coefficient ({a},{c},{b}) is given twice", colon)
            given[key] = value
            gamma[c, a, b] = value
            if symmetric:
                gamma[c, b, a] = value
        connection = AffineConnectionField(chart, gamma, symmetric)
        self.document.connections[name] = connection
        entries = [f'{a} {c} {b} : {format_expr(gamma[c, a, b])}'
                   for a in range(m) for c in range(m) for b in range(m)
                   if gamma[c, a, b] is not ZERO and (not symmetric or a <= b)]
        flag = ' symmetric' if symmetric else ''
        return name, f"connection {name} on {chart.name}{flag} {{ {'; '.join(entries)} }}"

    def parse_gauge(self, keyword: Token) -> Tuple[str, str]:
        name = self.declare(self.expect_name('a gauge name'), 'gauge')
        self.expect('frame')
        if not self.accept('{'):
            token = self.expect_name('a built-in frame')
            if token.text not in BUILTIN_FRAMES:
                raise self.unresolved(token.text, 'built-in frame', token)
            structure = builtin_structure(token.text)
            self.document.gauges[name] = structure
            return name, f'gauge {name} frame {token.text}'
        frames = []
        while not self.accept('}'):
            group = self.collect_group()
            frames.append(np.array(self.parse_matrix(group, self.no_variables), dtype=object))
        if not frames:
            raise self.error("a frame needs at least one matrix", keyword)
        structure = GaugeStructure(name, tuple(frames))
        self.document.gauges[name] = structure
        body = ' '.join(format_matrix(rows_of(l)) for l in structure.frame)
        return name, f'gauge {name} frame {{ {body} }}'

    def parse_lagrangian(self, keyword: Token) -> Tuple[str, str]:
        name = self.declare(self.expect_name('a Lagrangian name'), 'lagrangian')
        self.expect('on')
        metric_token = self.expect_name('a metric name')
        metric = self.lookup(metric_token, self.document.metrics, 'metric')
        self.expect('fiber')
        fiber = []
        while True:
            self.skip_newlines()
            if self.at('{'):
                break
            token = self.expect_name('a fiber coordinate')
            if token.text in RESERVED or token.text in self.document.bindings:
                raise self.error(f"'{token.text}' cannot name a fiber coordinate", token)
            fiber.append(token.text)
        if not fiber:
            raise self.error("a Lagrangian needs at least one fiber coordinate", keyword)
        opening = self.expect('{')
        tokens = self.collect(set())
        self.expect('}')
        chart = FiberedChart(name, metric.chart, tuple(fiber))
        allowed = (set(chart.coords) | set(chart.fiber) | set(chart.first_jet_names())
                   | set(metric_symbol_names(chart.m)))
        density = self.parse_expression(tokens, allowed.__contains__, opening)
        self.document.lagrangians[name] = JetLagrangian(chart, density, metric, name)
        return name, f"lagrangian {name} on {metric_token.text} fiber {' '.join(fiber)} {{ {format_expr(density)} }}"

    def parse_section(self, keyword: Token) -> Tuple[str, str]:
        name = self.declare(self.expect_name('a section name'), 'section')
        self.expect('of')
        lagrangian_token = self.expect_name('a Lagrangian name')
        lagrangian = self.lookup(lagrangian_token, self.document.lagrangians, 'Lagrangian')
        self.expect('{')
        group = self.collect_group()
        self.expect('}')
        components = self.parse_vector(group, self.coordinates(lagrangian.chart.base))
        if len(components) != lagrangian.chart.n:
            raise self.error(f"section has {len(components)} components, the fiber has {lagrangian.chart.n}",
                             group[0], DimensionMismatchError)
        section = Section(lagrangian.chart, tuple(components))
        self.document.sections[name] = section
        return name, f'section {name} of {lagrangian_token.text} {{ {format_matrix([list(components)])} }}'

    def parse_body(self, keys: Dict[str, str], what: str) -> Dict[str, Tuple[Token, List[Token]]]:
        """``{ key value; ... }`` with raw value tokens, checked against ``keys``."""
        self.expect('{')
        body: Dict[str, Tuple[Token, List[Token]]] = {}
        while not self.accept('}'):
            if self.accept(';'):
                continue
            key = self.expect_name('a key')
            if key.text not in keys:
                raise self.error(f"unknown key '{key.text}' for {what} (expected one of {', '.join(keys)})", key)
            if key.text in body:
                raise self.error(f"key '{key.text}' is given twice", key)
            kind = keys[key.text]
            if kind == _NAME:
                body[key.text] = (key, [self.expect_name(f'a name after {key.text!r}')])
            elif kind == _MATRIX:
                body[key.text] = (key, self.collect_group())
            else:
                body[key.text] = (key, self.collect({'\n', ';'}))
        return body

    def require(self, body: Dict[str, Tuple[Token, List[Token]]], key: str, where: Token) -> Tuple[Token,
                                                                                                    List[Token]]:
        if key not in body:
            raise self.error(f"missing key '{key}'", where)
        return body[key]

    def parse_model(self, keyword: Token) -> Tuple[str, str]:
        kind_token = self.expect_name('a model kind')
        if kind_token.text not in MODEL_KINDS:
            raise self.error(f"model kind must be one of {', '.join(MODEL_KINDS)}", kind_token)
        kind = kind_token.text
        name_token = self.expect_name('a model name')
        name = self.declare(name_token, 'model')
        body = self.parse_body(MODEL_KEYS[kind], f'{kind} models')
        builders = {
            'scalar': self.build_scalar,
            'dirac': self.build_dirac,
            'yangmills': self.build_yang_mills,
            'gravity': self.build_gravity,
        }
        entry, settings = builders[kind](name, body, name_token)
        self.document.models[name] = entry
        return name, f"model {kind} {name} {{ {'; '.join(f'{k} {v}' for k, v in settings)} }}"

    def gauge_field(self, body, structure: GaugeStructure, chart: Chart, where: Token) -> GaugeField:
        _, group = self.require(body, 'potential', where)
        rows = self.parse_matrix(group, self.coordinates(chart))
        if len(rows) != structure.rank or len(rows[0]) != chart.dim:
            raise self.error(f"potential needs {structure.rank} rows of {chart.dim} components",
                             group[0], DimensionMismatchError)
        return GaugeField(structure, chart, np.array(rows, dtype=object))

    def mass(self, body, chart: Chart) -> Expr:
        if 'mass' not in body:
            return ZERO
        key, tokens = body['mass']
        return self.parse_expression(tokens, self.coordinates(chart), key)

    def field_pair(self, body, chart: Chart, n: int, where: Token) -> Tuple[List[Expr], List[Expr]]:
        pair = []
        for key in ('field', 'conjugate'):
            _, group = self.require(body, key, where)
            values = self.parse_vector(group, self.coordinates(chart))
            if len(values) != n:
                raise self.error(f"{key} has {len(values)} components, expected {n}", group[0],
                                 DimensionMismatchError)
            pair.append(values)
        return pair[0], pair[1]

    def build_scalar(self, name: str, body, where: Token):
        metric_token = self.require(body, 'metric', where)[1][0]
        metric = self.lookup(metric_token, self.document.metrics, 'metric')
        chart = metric.chart
        settings = [('metric', metric_token.text)]
        if 'gauge' in body:
            structure = self.lookup(body['gauge'][1][0], self.document.gauges, 'gauge')
            gauge = self.gauge_field(body, structure, chart, where)
            fibered = FiberedChart(name, chart, tuple(f'phi{i}' for i in range(structure.n)))
            potential: LinearConnection = gauge.expand(fibered)
            settings += [('gauge', body['gauge'][1][0].text), ('potential', format_matrix(rows_of(gauge.components)))]
        else:
            if 'potential' in body:
                raise self.error("a potential needs a gauge frame", body['potential'][0])
            _, group = self.require(body, 'field', where)
            n = len(self.parse_vector(group, self.coordinates(chart)))
            potential = zero_linear_connection(FiberedChart(name, chart, tuple(f'phi{i}' for i in range(n))))
        mass = self.mass(body, chart)
        model = ScalarModel(metric, potential, mass, name)
        phi, phibar = self.field_pair(body, chart, model.n, where)
        settings += [('mass', format_expr(mass)), ('field', format_matrix([phi])),
                     ('conjugate', format_matrix([phibar]))]
        return ModelEntry(name, 'scalar', model, model.section(phi, phibar)), settings

    def build_dirac(self, name: str, body, where: Token):
        chart_token = self.require(body, 'chart', where)[1][0]
        chart = self.lookup(chart_token, self.document.charts, 'chart')
        _, group = self.require(body, 'tetrad', where)
        tetrad = self.parse_matrix(group, self.coordinates(chart))
        m = chart.dim
        if len(tetrad) != m or len(tetrad[0]) != m:
            raise self.error(f"tetrad on a {m}-dimensional chart needs a {m}x{m} matrix", group[0],
                             DimensionMismatchError)
        if 'potential' in body:
            potential_group = body['potential'][1]
            potential = self.parse_vector(potential_group, self.coordinates(chart))
            if len(potential) != m:
                raise self.error(f"potential needs {m} components", potential_group[0], DimensionMismatchError)
        else:
            potential = [ZERO] * m
        mass = self.mass(body, chart)
        model = DiracModel(chart, np.array(tetrad, dtype=object), tuple(potential), mass, name)
        psi, psibar = self.field_pair(body, chart, model.spinor_dim, where)
        settings = [('chart', chart.name), ('tetrad', format_matrix(rows_of(model.tetrad))),
                    ('potential', format_matrix([list(model.potential)])), ('mass', format_expr(mass)),
                    ('field', format_matrix([psi])), ('conjugate', format_matrix([psibar]))]
        return ModelEntry(name, 'dirac', model, model.section(psi, psibar)), settings

    def build_yang_mills(self, name: str, body, where: Token):
        metric_token = self.require(body, 'metric', where)[1][0]
        metric = self.lookup(metric_token, self.document.metrics, 'metric')
        gauge_token = self.require(body, 'gauge', where)[1][0]
        structure = self.lookup(gauge_token, self.document.gauges, 'gauge')
        gauge = self.gauge_field(body, structure, metric.chart, where)
        model = YangMillsModel(metric, gauge, name)
        settings = [('metric', metric_token.text), ('gauge', gauge_token.text),
                    ('potential', format_matrix(rows_of(gauge.components)))]
        return ModelEntry(name, 'yangmills', model), settings

    def build_gravity(self, name: str, body, where: Token):
        metric_token = self.require(body, 'metric', where)[1][0]
        metric = self.lookup(metric_token, self.document.metrics, 'metric')
        settings = [('metric', metric_token.text)]
        connection = None
        if 'connection' in body:
            connection_token = body['connection'][1][0]
            connection = self.lookup(connection_token, self.document.connections, 'connection')
            if connection.chart != metric.chart:
                raise self.error("metric and connection live on different charts", connection_token,
                                 DimensionMismatchError)
            settings.append(('connection', connection_token.text))
        return ModelEntry(name, 'gravity', GravityModel(metric, connection, name)), settings

    def parse_komar(self, keyword: Token) -> Tuple[str, str]:
        name = self.declare(self.expect_name('a Komar name'), 'komar')
        body = self.parse_body(KOMAR_KEYS, 'komar data')
        metric_token = self.require(body, 'metric', keyword)[1][0]
        metric = self.lookup(metric_token, self.document.metrics, 'metric')
        _, group = self.require(body, 'vector', keyword)
        vector = self.parse_vector(group, self.coordinates(metric.chart))
        if len(vector) != metric.dim:
            raise self.error(f"vector has {len(vector)} components on a {metric.dim}-dimensional chart",
                             group[0], DimensionMismatchError)
        self.document.komar[name] = KomarData(metric, tuple(vector))
        return name, f'komar {name} {{ metric {metric_token.text}; vector {format_matrix([vector])} }}'

    def parse_check(self, keyword: Token) -> Tuple[str, str]:
        check_id, token = self.expect_word('a check id')
        if check_id not in REGISTRY:
            raise self.unresolved(check_id, 'check id', token)
        expect_failure = self.at('fails')
        if expect_failure:
            self.advance()
        line = self.position(token.offset)[0]
        self.document.checks.append(CheckDeclaration(check_id, expect_failure, line))
        return check_id, f"check {check_id}{' fails' if expect_failure else ''}"


def rows_of(array) -> List[List[Expr]]:
    array = np.asarray(array, dtype=object)
    return [list(row) for row in array]


def parse(text: str, name: str = '<text>') -> Document:
    """
    Parse a document.

    Args:
        text: Document source
        name: Label used in messages and reports

    Returns:
        The parsed Document

    Raises:
        DslError: with line and column, for any malformed or inconsistent input
    """
    if not isinstance(text, str):
        raise DslSyntaxError("document text must be a string")
    try:
        return _DocumentParser(text, name).parse()
    except DslError:
        raise
    except RecursionError:
        raise DslSyntaxError("document nested too deeply") from None


def parse_file(path: Union[str, Path]) -> Document:
    """Read and parse a UTF-8 document file."""
    path = Path(path)
    try:
        text = path.read_text(encoding='utf-8')
    except UnicodeDecodeError as e:
        raise DslSyntaxError(f"'{path}' is not UTF-8 text: {e.reason}") from None
    return parse(text, path.name)


def format_document(document: Document) -> str:
    """Canonical text of ``document``; parsing it again gives numerically equal components."""
    return '\n'.join(declaration.text for declaration in document.declarations) + '\n'


def compare_documents(first: Document, second: Document, trials: int = 8, tol: float = 1e-9) -> List[str]:
    """Names of declared objects whose components differ numerically between two documents."""
    differences = []
    for name, metric in first.metrics.items():
        other = second.metrics.get(name)
        if other is None or not _equal_arrays(metric.components, other.components, metric.chart, trials, tol):
            differences.append(name)
    for name, connection in first.connections.items():
        other = second.connections.get(name)
        if other is None or not _equal_arrays(connection.gamma, other.gamma, connection.chart, trials, tol):
            differences.append(name)
    for name, section in first.sections.items():
        other = second.sections.get(name)
        if other is None or not _equal_arrays(section.components, other.components, section.chart.base,
                                              trials, tol):
            differences.append(name)
    for name, lagrangian in first.lagrangians.items():
        other = second.lagrangians.get(name)
        domain = dict(lagrangian.chart.base.domain())
        if other is None or not _equal_exprs([lagrangian.density], [other.density], domain, trials, tol):
            differences.append(name)
    for name, data in first.komar.items():
        other = second.komar.get(name)
        if other is None or not _equal_arrays(data.vector, other.vector, data.metric.chart, trials, tol):
            differences.append(name)
    return differences


def _equal_arrays(first, second, chart: Chart, trials: int, tol: float) -> bool:
    lhs = list(np.asarray(first, dtype=object).reshape(-1))
    rhs = list(np.asarray(second, dtype=object).reshape(-1))
    if len(lhs) != len(rhs):
        return False
    return _equal_exprs(lhs, rhs, dict(chart.domain()), trials, tol)


def _equal_exprs(lhs: Sequence[Expr], rhs: Sequence[Expr], domain: Dict[str, Tuple[float, float]],
                 trials: int, tol: float) -> bool:
    if all(a is b for a, b in zip(lhs, rhs)):
        return True
    names = set()
    for e in list(lhs) + list(rhs):
        names |= e.free
    for name in names - set(domain):
        domain[name] = (-1.0, 1.0)
    return equal_numeric(list(lhs), list(rhs), domain, trials=trials, tol=tol).ok
