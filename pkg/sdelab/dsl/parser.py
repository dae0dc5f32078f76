"""Recursive-descent parser for the coefficient expression language.

Grammar (whitespace-insensitive)::

    expr     := term (('+' | '-') term)*
    term     := unary (('*' | '/') unary)*
    unary    := ('-' | '+') unary | power
    power    := atom (('^' | '**') exponent)*
    exponent := NUMBER | '-' NUMBER | '(' ['-' | '+'] NUMBER ['/' NUMBER] ')'
    atom     := NUMBER | 'pi' | 'x<i>' | NAME '(' args ')' | '(' expr ')'

Functions: exp, ln (alias log), sqrt, norm2(x), max, min, select.
"""
import math
import re
from fractions import Fraction

from . import nodes
from .errors import CoordinateRangeError, ExprSyntaxError, UnknownFunctionError

_TOKEN_RE = re.compile(r'''
    (?P<ws>\s+)
  | (?P<number>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>\*\*|[-+*/^(),])
''', re.VERBOSE)

_COORD_RE = re.compile(r'^x(\d+)$')

_UNARY = {
    'exp': nodes.Exp,
    'ln': nodes.Log,
    'log': nodes.Log,
    'sqrt': nodes.Sqrt,
}

_BINARY = {
    'max': nodes.Max,
    'min': nodes.Min,
}


class Token(object):
    __slots__ = ('kind', 'text', 'offset')

    def __init__(self, kind, text, offset):
        self.kind = kind
        self.text = text
        self.offset = offset

    def __repr__(self):
        return 'Token({}, {!r}, {})'.format(self.kind, self.text, self.offset)


def tokenize(src):
    """Split ``src`` into tokens carrying UTF-8 byte offsets."""
    tokens = []
    pos = 0
    byte = 0
    while pos < len(src):
        m = _TOKEN_RE.match(src, pos)
        if m is None:
            raise ExprSyntaxError('unexpected character {!r}'.format(src[pos]), byte, src)
        text = m.group(0)
        kind = m.lastgroup
        if kind != 'ws':
            if kind == 'op' and text == '**':
                text = '^'
            tokens.append(Token(kind, text, byte))
        byte += len(m.group(0).encode('utf-8'))
        pos = m.end()
    tokens.append(Token('end', '', byte))
    return tokens


class Parser(object):

    def __init__(self, src, dimension):
        self.src = src
        self.dimension = dimension
        self.tokens = tokenize(src)
        self.pos = 0

    @property
    def current(self):
        return self.tokens[self.pos]

    def peek(self, ahead=1):
        return self.tokens[min(self.pos + ahead, len(self.tokens) - 1)]

    def advance(self):
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def error(self, message, tok=None, cls=ExprSyntaxError):
        tok = tok or self.current
        return cls(message, tok.offset, self.src)

    def expect(self, text):
        tok = self.current
        if tok.text != text or tok.kind not in ('op',):
            found = tok.text or 'end of input'
            raise self.error('expected {!r}, found {!r}'.format(text, found))
        return self.advance()

    def parse(self):
        if self.current.kind == 'end':
            raise self.error('empty expression')
        node = self.expr()
        if self.current.kind != 'end':
            raise self.error('unexpected {!r}'.format(self.current.text))
        return node

    def expr(self):
        node = self.term()
        while self.current.kind == 'op' and self.current.text in ('+', '-'):
            op = self.advance().text
            right = self.term()
            node = nodes.Add(node, right) if op == '+' else nodes.Sub(node, right)
        return node

    def term(self):
        node = self.unary()
        while self.current.kind == 'op' and self.current.text in ('*', '/'):
            op = self.advance().text
            right = self.unary()
            node = nodes.Mul(node, right) if op == '*' else nodes.Div(node, right)
        return node

    def unary(self):
        tok = self.current
        if tok.kind == 'op' and tok.text in ('-', '+'):
            self.advance()
            if tok.text == '+':
                return self.unary()
            # a bare literal folds into a negative constant
            nxt = self.current
            if nxt.kind == 'number' and not (self.peek().kind == 'op' and self.peek().text == '^'):
                self.advance()
                return nodes.Const(-float(nxt.text))
            return nodes.Neg(self.unary())
        return self.power()

    def power(self):
        node = self.atom()
        while self.current.kind == 'op' and self.current.text == '^':
            self.advance()
            node = nodes.Pow(node, self.exponent())
        return node

    def exponent(self):
        tok = self.current
        if tok.kind == 'number':
            return Fraction(self.advance().text)
        if tok.kind == 'op' and tok.text == '-' and self.peek().kind == 'number':
            self.advance()
            return -Fraction(self.advance().text)
        if tok.kind == 'op' and tok.text == '(':
            self.advance()
            sign = 1
            if self.current.kind == 'op' and self.current.text in ('-', '+'):
                sign = -1 if self.advance().text == '-' else 1
            if self.current.kind != 'number':
                raise self.error('exponent must be a rational constant')
            value = Fraction(self.advance().text)
            if self.current.kind == 'op' and self.current.text == '/':
                self.advance()
                if self.current.kind != 'number':
                    raise self.error('exponent must be a rational constant')
                den = Fraction(self.advance().text)
                if den == 0:
                    raise self.error('zero denominator in exponent')
                value = value / den
            self.expect(')')
            return sign * value
        raise self.error('exponent must be a rational constant')

    def atom(self):
        tok = self.current
        if tok.kind == 'number':
            self.advance()
            return nodes.Const(float(tok.text))
        if tok.kind == 'op' and tok.text == '(':
            self.advance()
            node = self.expr()
            self.expect(')')
            return node
        if tok.kind == 'name':
            return self.name()
        found = tok.text or 'end of input'
        raise self.error('unexpected {!r}'.format(found))

    def name(self):
        tok = self.advance()
        text = tok.text
        is_call = self.current.kind == 'op' and self.current.text == '('
        m = _COORD_RE.match(text)
        if m and not is_call:
            index = int(m.group(1))
            if index < 1 or index > self.dimension:
                raise self.error('coordinate {} outside dimension {}'.format(text, self.dimension),
                                 tok, CoordinateRangeError)
            return nodes.Coord(index - 1)
        if text == 'pi' and not is_call:
            return nodes.Const(math.pi)
        if not is_call:
            raise self.error('unknown identifier {!r}'.format(text), tok)
        if text == 'norm2':
            self.expect('(')
            arg = self.current
            if arg.kind != 'name' or arg.text != 'x':
                raise self.error('norm2 takes the point x as its only argument')
            self.advance()
            self.expect(')')
            return nodes.Norm2()
        if text in _UNARY:
            args = self.arguments(text, 1)
            return _UNARY[text](args[0])
        if text in _BINARY:
            args = self.arguments(text, 2)
            return _BINARY[text](args[0], args[1])
        if text == 'select':
            args = self.arguments(text, 4)
            return nodes.Select(*args)
        raise self.error('unknown function {!r}'.format(text), tok, UnknownFunctionError)

    def arguments(self, name, count):
        open_tok = self.expect('(')
        args = [self.expr()]
        while self.current.kind == 'op' and self.current.text == ',':
            self.advance()
            args.append(self.expr())
        self.expect(')')
        if len(args) != count:
            raise self.error('{} expects {} argument(s), got {}'.format(name, count, len(args)),
                             open_tok)
        return args


def parse_expr(src, dimension):
    """Parse ``src`` into an expression tree over coordinates x1..x<dimension>."""
    if isinstance(src, bytes):
        src = src.decode('utf-8')
    if isinstance(src, (int, float)) and not isinstance(src, bool):
        src = repr(float(src))
    if not isinstance(src, str):
        raise TypeError('expression source must be text, got {!r}'.format(type(src)))
    if dimension < 1:
        raise ValueError('dimension must be positive, got {}'.format(dimension))
    return Parser(src, dimension).parse()


def to_source(node):
    """Canonical, fully parenthesized text of ``node``."""
    return node.to_str()
