"""
Text syntax for expressions: tokenizer, parser and printer.

Grammar::

    expr     := term (('+' | '-') term)*
    term     := unary (('*' | '/') unary)*
    unary    := '-' unary | '+' unary | power
    power    := atom ['^' exponent]
    exponent := INT | '-' INT | '(' ['-'] INT ')'
    atom     := NUMBER | 'i' | NAME | FUNC '(' expr ')' | '(' expr ')'

Rationals are written as quotients of integers (``3/4``) and fold to exact
constants. Decimal literals are read exactly (``0.1`` is 1/10).
"""

import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Dict, List, Mapping, Optional

from .symexpr import (
    FUNCTIONS, I, Constant, Expr, Function, Negation, Power, Product, Quotient, Sum, Symbol,
    add, apply_function, as_expr, constant, mul, neg, power, quotient, symbol,
)

MAX_EXPONENT = 64
MAX_DEPTH = 200
MAX_DECIMAL_EXPONENT = 400

_TOKEN_RE = re.compile(r"""
    (?P<ws>[ \t]+)
  | (?P<number>(?:\d+\.\d+|\.\d+|\d+)(?:[eE][+-]?\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op>[-+*/^(),;:\[\]{}=#\n])
""", re.VERBOSE)


class ExprSyntaxError(ValueError):
    """Malformed expression text; ``offset`` is the character index of the problem."""

    def __init__(self, message: str, offset: int):
        self.message = message
        self.offset = offset
        super().__init__(f"{message} (at offset {offset})")


class ExprNameError(ExprSyntaxError):
    """A name is not a known variable or binding."""

    def __init__(self, name: str, offset: int):
        self.name = name
        super().__init__(f"unknown name '{name}'", offset)


@dataclass(frozen=True)
class Token:
    kind: str       # 'number' | 'name' | 'op' | 'end'
    text: str
    offset: int


def tokenize(text: str, start: int = 0, end: Optional[int] = None) -> List[Token]:
    """Split ``text[start:end]`` into tokens; offsets refer to ``text``."""
    end = len(text) if end is None else end
    tokens: List[Token] = []
    pos = start
    while pos < end:
        match = _TOKEN_RE.match(text, pos, end)
        if match is None:
            raise ExprSyntaxError(f"unexpected character {text[pos]!r}", pos)
        kind = match.lastgroup
        if kind != 'ws':
            tokens.append(Token(kind, match.group(), pos))
        pos = match.end()
    tokens.append(Token('end', '', end))
    return tokens


class _Parser:
    def __init__(self, tokens: List[Token], bindings: Mapping[str, Expr],
                 is_variable: Optional[Callable[[str], bool]]):
        self.tokens = tokens
        self.pos = 0
        self.bindings = bindings
        self.is_variable = is_variable
        self.depth = 0

    @property
    def current(self) -> Token:
        return self.tokens[self.pos]

    def advance(self) -> Token:
        token = self.tokens[self.pos]
        self.pos += 1
        return token

    def accept(self, text: str) -> bool:
        if self.current.kind == 'op' and self.current.text == text:
            self.pos += 1
            return True
        return False

    def expect(self, text: str) -> Token:
        if not self.accept(text):
            token = self.current
            found = 'end of expression' if token.kind == 'end' else repr(token.text)
            raise ExprSyntaxError(f"expected '{text}' but found {found}", token.offset)
        return self.tokens[self.pos - 1]

    def enter(self) -> None:
        self.depth += 1
        if self.depth > MAX_DEPTH:
            raise ExprSyntaxError("expression nested too deeply", self.current.offset)

    def leave(self) -> None:
        self.depth -= 1

    def parse_expr(self) -> Expr:
        self.enter()
        terms = [self.parse_term()]
        while True:
            if self.accept('+'):
                terms.append(self.parse_term())
            elif self.accept('-'):
                terms.append(neg(self.parse_term()))
            else:
                break
        self.leave()
        return add(*terms)

    def parse_term(self) -> Expr:
        result = self.parse_unary()
        while True:
            token = self.current
            if self.accept('*'):
                result = mul(result, self.parse_unary())
            elif self.accept('/'):
                divisor = self.parse_unary()
                try:
                    result = quotient(result, divisor)
                except ZeroDivisionError:
                    raise ExprSyntaxError("division by the constant zero", token.offset) from None
            else:
                return result

    def parse_unary(self) -> Expr:
        if self.accept('-'):
            self.enter()
            value = neg(self.parse_unary())
            self.leave()
            return value
        if self.accept('+'):
            self.enter()
            value = self.parse_unary()
            self.leave()
            return value
        return self.parse_power()

    def parse_power(self) -> Expr:
        base = self.parse_atom()
        token = self.current
        if not self.accept('^'):
            return base
        exponent = self.parse_exponent()
        try:
            return power(base, exponent)
        except ZeroDivisionError:
            raise ExprSyntaxError("negative power of the constant zero", token.offset) from None

    def parse_exponent(self) -> int:
        parenthesized = self.accept('(')
        sign = -1 if self.accept('-') else 1
        token = self.current
        if token.kind != 'number' or not token.text.isdigit():
            raise ExprSyntaxError("exponent must be an integer", token.offset)
        self.advance()
        if parenthesized:
            self.expect(')')
        value = sign * int(token.text)
        if abs(value) > MAX_EXPONENT:
            raise ExprSyntaxError(f"exponent {value} out of range", token.offset)
        return value

    def parse_atom(self) -> Expr:
        token = self.current
        if token.kind == 'number':
            self.advance()
            _, _, scale = token.text.lower().partition('e')
            if scale and abs(int(scale)) > MAX_DECIMAL_EXPONENT:
                raise ExprSyntaxError(f"number {token.text} out of range", token.offset)
            return constant(Fraction(token.text))
        if token.kind == 'name':
            self.advance()
            return self.resolve_name(token)
        if self.accept('('):
            value = self.parse_expr()
            self.expect(')')
            return value
        found = 'end of expression' if token.kind == 'end' else repr(token.text)
        raise ExprSyntaxError(f"expected a value but found {found}", token.offset)

    def resolve_name(self, token: Token) -> Expr:
        name = token.text
        if name in FUNCTIONS:
            self.expect('(')
            argument = self.parse_expr()
            self.expect(')')
            return apply_function(name, argument)
        if name in self.bindings:
            return self.bindings[name]
        if name == 'i':
            return I
        if self.is_variable is not None and not self.is_variable(name):
            raise ExprNameError(name, token.offset)
        return symbol(name)


def parse_tokens(tokens: List[Token], bindings: Optional[Mapping[str, Expr]] = None,
                 is_variable: Optional[Callable[[str], bool]] = None) -> Expr:
    """Parse a complete token list (ending with an 'end' token) into an Expr."""
    parser = _Parser(tokens, bindings or {}, is_variable)
    try:
        result = parser.parse_expr()
    except RecursionError:
        raise ExprSyntaxError("expression nested too deeply", parser.current.offset) from None
    if parser.current.kind != 'end':
        token = parser.current
        raise ExprSyntaxError(f"unexpected {token.text!r}", token.offset)
    return result


def parse_expr(text: str, bindings: Optional[Mapping[str, Expr]] = None,
               is_variable: Optional[Callable[[str], bool]] = None) -> Expr:
    """
    Parse expression text.

    Args:
        text: Expression source
        bindings: Names that stand for already-built expressions
        is_variable: Optional predicate; names it rejects raise ExprNameError

    Returns:
        The parsed expression
    """
    if not isinstance(text, str):
        raise TypeError("expression text must be a string")
    tokens = tokenize(text)
    for token in tokens:
        if token.kind == 'op' and token.text not in '+-*/^()':
            raise ExprSyntaxError(f"unexpected {token.text!r}", token.offset)
    return parse_tokens(tokens, bindings, is_variable)


# ---------------------------------------------------------------------------
# Printer
# ---------------------------------------------------------------------------

_SUM, _UNARY, _PRODUCT, _POWER, _ATOM = 1, 2, 3, 4, 5


def _format_fraction(value: Fraction) -> str:
    if value.denominator == 1:
        return str(value.numerator)
    return f'{value.numerator}/{value.denominator}'


def _constant_text(c: Constant) -> tuple:
    if c.im == 0:
        text = _format_fraction(c.re)
        if c.re < 0:
            return text, _UNARY
        return text, _ATOM if c.re.denominator == 1 else _PRODUCT
    if c.re == 0:
        if c.im == 1:
            return 'i', _ATOM
        return f'({_format_fraction(c.im)}*i)', _ATOM
    sign = '+' if c.im > 0 else '-'
    return f'({_format_fraction(c.re)} {sign} {_format_fraction(abs(c.im))}*i)', _ATOM


def _wrap(text: str, precedence: int, minimum: int) -> str:
    return f'({text})' if precedence < minimum else text


def _negative_part(term: Expr) -> Optional[Expr]:
    """For a term that prints with a leading minus, return its positive form."""
    if isinstance(term, Negation):
        return term.arg
    if isinstance(term, Constant) and term.im == 0 and term.re < 0:
        return constant(-term.re)
    if isinstance(term, Product):
        lead = term.children[0]
        if isinstance(lead, Constant) and lead.im == 0 and lead.re < 0:
            return mul(constant(-lead.re), *term.children[1:])
    return None


def _format(e: Expr) -> tuple:
    if isinstance(e, Constant):
        return _constant_text(e)
    if isinstance(e, Symbol):
        return e.name, _ATOM
    if isinstance(e, Sum):
        parts: List[str] = []
        for k, term in enumerate(e.children):
            positive = _negative_part(term)
            if positive is None:
                text, prec = _format(term)
                parts.append(_wrap(text, prec, _UNARY) if k == 0 else ' + ' + _wrap(text, prec, _PRODUCT))
            else:
                text, prec = _format(positive)
                parts.append(('-' if k == 0 else ' - ') + _wrap(text, prec, _PRODUCT))
        return ''.join(parts), _SUM
    if isinstance(e, Negation):
        text, prec = _format(e.arg)
        return '-' + _wrap(text, prec, _PRODUCT), _UNARY
    if isinstance(e, Product):
        texts = []
        for k, factor in enumerate(e.children):
            text, prec = _format(factor)
            texts.append(_wrap(text, prec, _UNARY if k == 0 else _POWER))
        return '*'.join(texts), _PRODUCT
    if isinstance(e, Quotient):
        num, num_prec = _format(e.numerator)
        den, den_prec = _format(e.denominator)
        return f'{_wrap(num, num_prec, _PRODUCT)}/{_wrap(den, den_prec, _POWER)}', _PRODUCT
    if isinstance(e, Power):
        base, base_prec = _format(e.base)
        exponent = str(e.exponent) if e.exponent > 0 else f'({e.exponent})'
        return f'{_wrap(base, base_prec, _ATOM)}^{exponent}', _POWER
    if isinstance(e, Function):
        text, _ = _format(e.arg)
        return f'{e.name}({text})', _ATOM
    raise TypeError(f"Cannot format {type(e).__name__}")


def format_expr(e: Expr) -> str:
    """Render ``e`` so that ``parse_expr`` reads back a numerically equal expression."""
    return _format(as_expr(e))[0]


def format_matrix(rows: List[List[Expr]]) -> str:
    return '[' + '; '.join(', '.join(format_expr(x) for x in row) for row in rows) + ']'


def quote_bindings(bindings: Dict[str, Expr]) -> Dict[str, str]:
    return {name: format_expr(value) for name, value in sorted(bindings.items())}
