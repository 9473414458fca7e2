"""
Exact symbolic scalar expressions for jetcartan.

Expressions are immutable, hash-consed trees over named variables with exact
rational (or complex-rational) constants. Structural equality is identity:
building the same expression twice returns the same object. Only cheap local
rewrites are applied at construction; identities are checked numerically with
``equal_numeric``.
"""

import logging
import threading
import weakref
import zlib
from dataclasses import dataclass, field
from fractions import Fraction
from functools import singledispatch
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

logger = logging.getLogger(__name__)

Number = Union[int, float, complex, Fraction]
ExprLike = Union['Expr', int, float, complex, Fraction]

FUNCTIONS = ('sin', 'cos', 'exp', 'log', 'sqrt')


class EvaluationError(ArithmeticError):
    """Numeric evaluation failed at a sample point."""

    def __init__(self, reason: str, point: Optional[Dict[str, complex]] = None):
        self.reason = reason
        self.point = point or {}
        if self.point:
            where = ', '.join(f'{k}={_format_number(v)}' for k, v in self.point.items())
            super().__init__(f"{reason} at ({where})")
        else:
            super().__init__(reason)


class MissingVariableError(EvaluationError):
    """An assignment does not cover a free variable."""

    def __init__(self, symbol: str):
        self.symbol = symbol
        super().__init__(f"no value for variable '{symbol}'")


def _format_number(value: complex) -> str:
    value = complex(value)
    if value.imag == 0:
        return f'{value.real:.6g}'
    return f'{value.real:.6g}{value.imag:+.6g}i'


# Interning table: (tag, payload, child ids) -> node
_TABLE: 'weakref.WeakValueDictionary[tuple, Expr]' = weakref.WeakValueDictionary()
_TABLE_LOCK = threading.Lock()
_EMPTY: frozenset = frozenset()


def _merge_free(children: Sequence['Expr']) -> frozenset:
    free = _EMPTY
    for child in children:
        if child.free <= free:
            continue
        if free <= child.free:
            free = child.free
        else:
            free = free | child.free
    return free


class Expr:
    """Base class of all expression nodes."""

    __slots__ = ('free', 'children', '_derivatives', '__weakref__')

    precedence = 100

    def __init__(self, children: Tuple['Expr', ...]):
        self.children = children
        self.free = _merge_free(children)
        self._derivatives: Optional[Dict[str, 'Expr']] = None

    # arithmetic -------------------------------------------------------
    def __add__(self, other: ExprLike) -> 'Expr':
        return add(self, other)

    def __radd__(self, other: ExprLike) -> 'Expr':
        return add(other, self)

    def __sub__(self, other: ExprLike) -> 'Expr':
        return add(self, neg(as_expr(other)))

    def __rsub__(self, other: ExprLike) -> 'Expr':
        return add(other, neg(self))

    def __mul__(self, other: ExprLike) -> 'Expr':
        return mul(self, other)

    def __rmul__(self, other: ExprLike) -> 'Expr':
        return mul(other, self)

    def __truediv__(self, other: ExprLike) -> 'Expr':
        return quotient(self, other)

    def __rtruediv__(self, other: ExprLike) -> 'Expr':
        return quotient(other, self)

    def __pow__(self, exponent: int) -> 'Expr':
        return power(self, exponent)

    def __neg__(self) -> 'Expr':
        return neg(self)

    def __pos__(self) -> 'Expr':
        return self

    # convenience ------------------------------------------------------
    def diff(self, var: str) -> 'Expr':
        return diff(self, var)

    def subs(self, mapping: Mapping[str, ExprLike]) -> 'Expr':
        return subst_many(self, mapping)

    def evaluate(self, assignment: Mapping[str, Number]) -> complex:
        return evaluate(self, assignment)

    @property
    def is_zero(self) -> bool:
        return self is ZERO

    def __str__(self) -> str:
        from .exprtext import format_expr
        return format_expr(self)

    def __repr__(self) -> str:
        return f"{type(self).__name__}({self})"

    def __reduce__(self):
        raise TypeError("Expr objects are interned and cannot be pickled")


class Constant(Expr):
    __slots__ = ('re', 'im')

    def __init__(self, re: Fraction, im: Fraction):
        super().__init__(())
        self.re = re
        self.im = im

    @property
    def value(self) -> complex:
        return complex(float(self.re), float(self.im))

    @property
    def is_real(self) -> bool:
        return self.im == 0


class Symbol(Expr):
    __slots__ = ('name',)

    def __init__(self, name: str):
        self.name = name
        self.children = ()
        self.free = frozenset((name,))
        self._derivatives = None


class Sum(Expr):
    __slots__ = ()


class Product(Expr):
    __slots__ = ()


class Quotient(Expr):
    __slots__ = ()

    @property
    def numerator(self) -> Expr:
        return self.children[0]

    @property
    def denominator(self) -> Expr:
        return self.children[1]


class Power(Expr):
    __slots__ = ('exponent',)

    def __init__(self, base: Expr, exponent: int):
        super().__init__((base,))
        self.exponent = exponent

    @property
    def base(self) -> Expr:
        return self.children[0]


class Negation(Expr):
    __slots__ = ()

    @property
    def arg(self) -> Expr:
        return self.children[0]


class Function(Expr):
    __slots__ = ('name',)

    def __init__(self, name: str, arg: Expr):
        super().__init__((arg,))
        self.name = name

    @property
    def arg(self) -> Expr:
        return self.children[0]


def _intern(key: tuple, factory) -> Expr:
    with _TABLE_LOCK:
        node = _TABLE.get(key)
        if node is None:
            node = factory()
            _TABLE[key] = node
        return node


def _ids(children: Iterable[Expr]) -> tuple:
    return tuple(id(c) for c in children)


# ---------------------------------------------------------------------------
# Constructors
# ---------------------------------------------------------------------------

def _to_fraction(value: Union[int, float, Fraction]) -> Fraction:
    if isinstance(value, float):
        return Fraction(str(value))
    return Fraction(value)


def constant(re: Union[int, float, Fraction], im: Union[int, float, Fraction] = 0) -> Constant:
    re_f, im_f = _to_fraction(re), _to_fraction(im)
    return _intern(('c', re_f, im_f), lambda: Constant(re_f, im_f))


def symbol(name: str) -> Symbol:
    if not isinstance(name, str) or not name:
        raise ValueError(f"Invalid symbol name: {name!r}")
    return _intern(('s', name), lambda: Symbol(name))


def symbols(names: Iterable[str]) -> Tuple[Symbol, ...]:
    return tuple(symbol(n) for n in names)


def as_expr(value: ExprLike) -> Expr:
    if isinstance(value, Expr):
        return value
    if isinstance(value, bool):
        raise TypeError("bool is not a valid expression constant")
    if isinstance(value, complex):
        return constant(value.real, value.imag)
    if isinstance(value, (int, float, Fraction)):
        return constant(value)
    if isinstance(value, np.generic):
        return as_expr(value.item())
    raise TypeError(f"Cannot convert {type(value).__name__} to Expr")


ZERO = constant(0)
ONE = constant(1)
MINUS_ONE = constant(-1)
TWO = constant(2)
HALF = constant(Fraction(1, 2))
I = constant(0, 1)


def _c_add(a: Constant, b: Constant) -> Constant:
    return constant(a.re + b.re, a.im + b.im)


def _c_mul(a: Constant, b: Constant) -> Constant:
    return constant(a.re * b.re - a.im * b.im, a.re * b.im + a.im * b.re)


def _c_inv(a: Constant) -> Constant:
    norm = a.re * a.re + a.im * a.im
    if norm == 0:
        raise ZeroDivisionError("division by the zero constant")
    return constant(a.re / norm, -a.im / norm)


def _c_pow(a: Constant, n: int) -> Constant:
    if n < 0:
        return _c_pow(_c_inv(a), -n)
    result, base = ONE, a
    while n:
        if n & 1:
            result = _c_mul(result, base)
        base = _c_mul(base, base)
        n >>= 1
    return result


def add(*terms: ExprLike) -> Expr:
    """n-ary sum with flattening, zero removal and constant folding."""
    flat: List[Expr] = []
    folded: Optional[Constant] = None
    for term in terms:
        e = as_expr(term)
        parts = e.children if isinstance(e, Sum) else (e,)
        for part in parts:
            if isinstance(part, Constant):
                folded = part if folded is None else _c_add(folded, part)
            else:
                flat.append(part)
    if folded is not None and folded is not ZERO:
        flat.append(folded)
    if not flat:
        return ZERO
    if len(flat) == 1:
        return flat[0]
    children = tuple(flat)
    return _intern(('+', _ids(children)), lambda: Sum(children))


def sum_of(terms: Iterable[ExprLike]) -> Expr:
    return add(*list(terms))


def mul(*factors: ExprLike) -> Expr:
    """n-ary product with flattening, unit removal and constant folding."""
    flat: List[Expr] = []
    folded: Constant = ONE
    for factor in factors:
        e = as_expr(factor)
        if isinstance(e, Negation):
            folded = _c_mul(folded, MINUS_ONE)
            e = e.arg
        parts = e.children if isinstance(e, Product) else (e,)
        for part in parts:
            if isinstance(part, Constant):
                folded = _c_mul(folded, part)
            else:
                flat.append(part)
    if folded is ZERO:
        return ZERO
    if not flat:
        return folded
    if folded is MINUS_ONE:
        return neg(mul(*flat))
    if folded is not ONE:
        flat.insert(0, folded)
    if len(flat) == 1:
        return flat[0]
    children = tuple(flat)
    return _intern(('*', _ids(children)), lambda: Product(children))


def product_of(factors: Iterable[ExprLike]) -> Expr:
    return mul(*list(factors))


def neg(value: ExprLike) -> Expr:
    e = as_expr(value)
    if isinstance(e, Constant):
        return constant(-e.re, -e.im)
    if isinstance(e, Negation):
        return e.arg
    if isinstance(e, Product) and isinstance(e.children[0], Constant):
        return mul(constant(-e.children[0].re, -e.children[0].im), *e.children[1:])
    return _intern(('neg', id(e)), lambda: Negation((e,)))


def quotient(numerator: ExprLike, denominator: ExprLike) -> Expr:
    a, b = as_expr(numerator), as_expr(denominator)
    if isinstance(b, Constant):
        return mul(a, _c_inv(b))
    if a is ZERO:
        return ZERO
    return _intern(('/', id(a), id(b)), lambda: Quotient((a, b)))


def power(base: ExprLike, exponent: int) -> Expr:
    if isinstance(exponent, bool) or not isinstance(exponent, (int, np.integer)):
        raise TypeError("exponents must be integers")
    n = int(exponent)
    b = as_expr(base)
    if n == 0:
        return ONE
    if n == 1:
        return b
    if isinstance(b, Constant):
        return _c_pow(b, n)
    if isinstance(b, Power):
        return power(b.base, b.exponent * n)
    return _intern(('^', n, id(b)), lambda: Power(b, n))


def apply_function(name: str, arg: ExprLike) -> Expr:
    if name not in FUNCTIONS:
        raise ValueError(f"Unknown function '{name}'")
    a = as_expr(arg)
    if isinstance(a, Constant) and a.im == 0:
        if name in ('sin', 'sqrt') and a.re == 0:
            return ZERO
        if name in ('cos', 'exp') and a.re == 0:
            return ONE
        if name in ('log', 'sqrt') and a.re == 1:
            return ZERO if name == 'log' else ONE
    return _intern(('f', name, id(a)), lambda: Function(name, a))


def sin(arg: ExprLike) -> Expr:
    return apply_function('sin', arg)


def cos(arg: ExprLike) -> Expr:
    return apply_function('cos', arg)


def exp(arg: ExprLike) -> Expr:
    return apply_function('exp', arg)


def log(arg: ExprLike) -> Expr:
    return apply_function('log', arg)


def sqrt(arg: ExprLike) -> Expr:
    return apply_function('sqrt', arg)


# ---------------------------------------------------------------------------
# Differentiation
# ---------------------------------------------------------------------------

@singledispatch
def _derivative(node: Expr, var: str) -> Expr:
    raise TypeError(f"Cannot differentiate {type(node).__name__}")


@_derivative.register(Constant)
def _(node: Constant, var: str) -> Expr:
    return ZERO


@_derivative.register(Symbol)
def _(node: Symbol, var: str) -> Expr:
    return ONE if node.name == var else ZERO


@_derivative.register(Sum)
def _(node: Sum, var: str) -> Expr:
    return add(*(diff(t, var) for t in node.children))


@_derivative.register(Product)
def _(node: Product, var: str) -> Expr:
    factors = node.children
    terms = []
    for k, factor in enumerate(factors):
        d = diff(factor, var)
        if d is ZERO:
            continue
        terms.append(mul(*factors[:k], d, *factors[k + 1:]))
    return add(*terms)


@_derivative.register(Quotient)
def _(node: Quotient, var: str) -> Expr:
    a, b = node.children
    da, db = diff(a, var), diff(b, var)
    first = quotient(da, b)
    if db is ZERO:
        return first
    return first - quotient(mul(a, db), power(b, 2))


@_derivative.register(Power)
def _(node: Power, var: str) -> Expr:
    return mul(node.exponent, power(node.base, node.exponent - 1), diff(node.base, var))


@_derivative.register(Negation)
def _(node: Negation, var: str) -> Expr:
    return neg(diff(node.arg, var))


@_derivative.register(Function)
def _(node: Function, var: str) -> Expr:
    inner = diff(node.arg, var)
    a = node.arg
    if node.name == 'sin':
        outer = cos(a)
    elif node.name == 'cos':
        outer = neg(sin(a))
    elif node.name == 'exp':
        outer = node
    elif node.name == 'log':
        return quotient(inner, a)
    else:
        return quotient(inner, mul(2, node))
    return mul(outer, inner)


def diff(e: ExprLike, var: str) -> Expr:
    """Exact partial derivative of ``e`` with respect to the variable ``var``."""
    e = as_expr(e)
    if var not in e.free:
        return ZERO
    cache = e._derivatives
    if cache is None:
        cache = e._derivatives = {}
    result = cache.get(var)
    if result is None:
        result = _derivative(e, var)
        cache[var] = result
    return result


def diff_many(e: ExprLike, variables: Sequence[str]) -> Expr:
    result = as_expr(e)
    for var in variables:
        result = diff(result, var)
    return result


# ---------------------------------------------------------------------------
# Substitution
# ---------------------------------------------------------------------------

def _rebuild(node: Expr, children: Tuple[Expr, ...]) -> Expr:
    if isinstance(node, Sum):
        return add(*children)
    if isinstance(node, Product):
        return mul(*children)
    if isinstance(node, Quotient):
        return quotient(children[0], children[1])
    if isinstance(node, Power):
        return power(children[0], node.exponent)
    if isinstance(node, Negation):
        return neg(children[0])
    if isinstance(node, Function):
        return apply_function(node.name, children[0])
    raise TypeError(f"Cannot rebuild {type(node).__name__}")


def subst_many(e: ExprLike, mapping: Mapping[str, ExprLike]) -> Expr:
    """Simultaneous substitution of variables by expressions."""
    e = as_expr(e)
    replacements = {name: as_expr(value) for name, value in mapping.items()}
    if not replacements or e.free.isdisjoint(replacements):
        return e
    memo: Dict[int, Expr] = {}
    keys = frozenset(replacements)

    # iterative post-order so deep trees do not hit the recursion limit
    stack: List[Tuple[Expr, bool]] = [(e, False)]
    while stack:
        node, expanded = stack.pop()
        if id(node) in memo:
            continue
        if node.free.isdisjoint(keys):
            memo[id(node)] = node
            continue
        if isinstance(node, Symbol):
            memo[id(node)] = replacements[node.name]
            continue
        if not expanded:
            stack.append((node, True))
            for child in node.children:
                if id(child) not in memo:
                    stack.append((child, False))
            continue
        memo[id(node)] = _rebuild(node, tuple(memo[id(c)] for c in node.children))
    return memo[id(e)]


def subst(e: ExprLike, var: str, replacement: ExprLike) -> Expr:
    return subst_many(e, {var: replacement})


# ---------------------------------------------------------------------------
# Numeric evaluation
# ---------------------------------------------------------------------------

def _topological_order(roots: Sequence[Expr]) -> Tuple[List[Expr], Dict[int, int]]:
    order: List[Expr] = []
    uses: Dict[int, int] = {}
    seen = set()
    for root in roots:
        if id(root) in seen:
            continue
        stack: List[Tuple[Expr, bool]] = [(root, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for child in node.children:
                uses[id(child)] = uses.get(id(child), 0) + 1
                if id(child) not in seen:
                    stack.append((child, False))
    return order, uses


def _point_at(points: Mapping[str, np.ndarray], index: int) -> Dict[str, complex]:
    return {name: complex(values[index]) for name, values in sorted(points.items())}


def _first_bad(mask: np.ndarray) -> int:
    return int(np.flatnonzero(mask)[0])


def evaluate_many(exprs: Sequence[ExprLike], points: Mapping[str, Union[np.ndarray, Sequence[Number]]]) -> List[np.ndarray]:
    """
    Evaluate several expressions at a batch of points, sharing common subtrees.

    Args:
        exprs: Expressions to evaluate
        points: Mapping from variable name to a 1-D array of values (one per point)

    Returns:
        One complex array per expression
    """
    roots = [as_expr(e) for e in exprs]
    arrays = {name: np.asarray(values, dtype=np.complex128).reshape(-1) for name, values in points.items()}
    size = max((len(v) for v in arrays.values()), default=1)
    for name, values in arrays.items():
        if len(values) != size:
            raise ValueError(f"variable '{name}' has {len(values)} values, expected {size}")

    order, uses = _topological_order(roots)
    keep = {id(r) for r in roots}
    cache: Dict[int, np.ndarray] = {}

    with np.errstate(all='ignore'):
        for node in order:
            key = id(node)
            if isinstance(node, Constant):
                value = np.full(size, node.value, dtype=np.complex128)
            elif isinstance(node, Symbol):
                if node.name not in arrays:
                    raise MissingVariableError(node.name)
                value = arrays[node.name]
            else:
                args = [cache[id(c)] for c in node.children]
                value = _apply(node, args, arrays)
            cache[key] = value
            for child in node.children:
                cid = id(child)
                uses[cid] -= 1
                if uses[cid] == 0 and cid not in keep:
                    cache.pop(cid, None)
    return [cache[id(r)] for r in roots]


def _apply(node: Expr, args: List[np.ndarray], arrays: Mapping[str, np.ndarray]) -> np.ndarray:
    if isinstance(node, Sum):
        total = args[0].copy()
        for a in args[1:]:
            total += a
        return total
    if isinstance(node, Product):
        total = args[0].copy()
        for a in args[1:]:
            total *= a
        return total
    if isinstance(node, Negation):
        return -args[0]
    if isinstance(node, Quotient):
        num, den = args
        bad = den == 0
        if bad.any():
            raise EvaluationError("division by zero", _point_at(arrays, _first_bad(bad)))
        return num / den
    if isinstance(node, Power):
        base = args[0]
        if node.exponent < 0:
            bad = base == 0
            if bad.any():
                raise EvaluationError("division by zero", _point_at(arrays, _first_bad(bad)))
            return 1.0 / base ** (-node.exponent)
        return base ** node.exponent
    if isinstance(node, Function):
        a = args[0]
        if node.name == 'sin':
            return np.sin(a)
        if node.name == 'cos':
            return np.cos(a)
        if node.name == 'exp':
            return np.exp(a)
        real_axis = a.imag == 0
        if node.name == 'log':
            bad = real_axis & (a.real <= 0)
            if bad.any():
                raise EvaluationError("log of a non-positive real", _point_at(arrays, _first_bad(bad)))
            return np.log(a)
        bad = real_axis & (a.real < 0)
        if bad.any():
            raise EvaluationError("sqrt of a negative real", _point_at(arrays, _first_bad(bad)))
        return np.sqrt(a)
    raise TypeError(f"Cannot evaluate {type(node).__name__}")


def evaluate(e: ExprLike, assignment: Mapping[str, Number]) -> complex:
    """Evaluate ``e`` at a single point given as a name -> value mapping."""
    points = {name: np.array([value], dtype=np.complex128) for name, value in assignment.items()}
    return complex(evaluate_many([e], points)[0][0])


# ---------------------------------------------------------------------------
# Randomized identity testing
# ---------------------------------------------------------------------------

Domain = Mapping[str, Tuple[float, float]]


def sample_points(domain: Domain, trials: int, seed: int = 0, stream: str = '') -> Dict[str, np.ndarray]:
    """
    Draw ``trials`` points uniformly from the box ``domain``.

    The generator is seeded from (seed, crc32(stream)), and variables are drawn
    in sorted name order, so the same seed always gives the same points.
    """
    if trials < 1:
        raise ValueError("trials must be at least 1")
    sequence = np.random.SeedSequence([int(seed), zlib.crc32(stream.encode('utf-8'))])
    rng = np.random.default_rng(sequence)
    points = {}
    for name in sorted(domain):
        low, high = domain[name]
        points[name] = rng.uniform(float(low), float(high), trials).astype(np.complex128)
    return points


@dataclass
class Comparison:
    """Outcome of a randomized comparison."""

    ok: bool
    worst_error: float
    worst_point: Dict[str, float] = field(default_factory=dict)
    worst_component: int = 0
    trials: int = 0


def relative_errors(lhs: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    errors = np.abs(lhs - rhs) / (1.0 + np.maximum(np.abs(lhs), np.abs(rhs)))
    return np.where(np.isfinite(errors), errors, np.inf)


def compare_at_points(lhs: Sequence[ExprLike], rhs: Sequence[ExprLike], points: Mapping[str, np.ndarray],
                      tol: float = 1e-8) -> Comparison:
    """Compare two equally long lists of expressions at given points."""
    if len(lhs) != len(rhs):
        raise ValueError(f"component count mismatch: {len(lhs)} vs {len(rhs)}")
    trials = len(next(iter(points.values()))) if points else 1
    if not lhs:
        return Comparison(True, 0.0, {}, 0, trials)
    values = evaluate_many(list(lhs) + list(rhs), points)
    n = len(lhs)
    worst, worst_k, worst_i = 0.0, 0, 0
    for k in range(n):
        errors = relative_errors(values[k], values[n + k])
        i = int(np.argmax(errors))
        if errors[i] > worst:
            worst, worst_k, worst_i = float(errors[i]), k, i
    point = {name: float(vals[worst_i].real) for name, vals in sorted(points.items())}
    return Comparison(worst <= tol, worst, point, worst_k, trials)


def equal_numeric(e1: Union[ExprLike, Sequence[ExprLike]], e2: Union[ExprLike, Sequence[ExprLike]],
                  domain: Domain, trials: int = 20, tol: float = 1e-8, seed: int = 0,
                  stream: str = '') -> Comparison:
    """
    Check |e1 - e2| <= tol * (1 + max(|e1|, |e2|)) at seeded random points.

    Both arguments may be single expressions or equally long sequences.
    Every free variable must be covered by ``domain``.
    """
    lhs = list(e1) if isinstance(e1, (list, tuple)) else [e1]
    rhs = list(e2) if isinstance(e2, (list, tuple)) else [e2]
    lhs = [as_expr(e) for e in lhs]
    rhs = [as_expr(e) for e in rhs]
    needed = set()
    for e in lhs + rhs:
        needed |= e.free
    missing = sorted(needed - set(domain))
    if missing:
        raise MissingVariableError(missing[0])
    points = sample_points(domain, trials, seed, stream)
    return compare_at_points(lhs, rhs, points, tol)


def free_symbols(exprs: Iterable[ExprLike]) -> List[str]:
    names = set()
    for e in exprs:
        names |= as_expr(e).free
    return sorted(names)


def node_count(e: ExprLike) -> int:
    order, _ = _topological_order([as_expr(e)])
    return len(order)


def covering_domain(exprs: Iterable[ExprLike], domain: Domain,
                    interval: Tuple[float, float] = (-1.0, 1.0)) -> Dict[str, Tuple[float, float]]:
    """Extend ``domain`` with ``interval`` for every free variable it does not cover."""
    covered = dict(domain)
    for name in free_symbols(exprs):
        covered.setdefault(name, interval)
    return covered
