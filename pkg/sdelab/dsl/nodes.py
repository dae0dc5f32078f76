"""Immutable expression trees over the coordinates x1..xd.

Every node evaluates vectorized on arrays of points with shape ``(..., d)``
and differentiates symbolically. Node constructors never simplify, so a
parsed tree prints back to text that parses to the same tree; the lower-case
helpers (``add``, ``mul``, ...) fold constants and are used when building
derivatives.
"""
import math
from fractions import Fraction

import numpy as np

from .errors import DerivativeError, ExprDomainError


def _first_point(X, mask):
    idx = np.argwhere(mask)
    if idx.size == 0:
        return None
    return X[tuple(idx[0])]


class Node(object):
    __slots__ = ('_key',)
    kind = None
    arity = 0

    @property
    def children(self):
        return ()

    def key(self):
        try:
            return self._key
        except AttributeError:
            key = self._make_key()
            object.__setattr__(self, '_key', key)
            return key

    def _make_key(self):
        return (self.kind,) + tuple(c.key() for c in self.children)

    def __setattr__(self, name, value):
        raise AttributeError('{} is immutable'.format(self.__class__.__name__))

    def __eq__(self, other):
        return isinstance(other, Node) and self.key() == other.key()

    def __ne__(self, other):
        return not self.__eq__(other)

    def __hash__(self):
        return hash(self.key())

    def __repr__(self):
        return '{}({})'.format(self.__class__.__name__, self.to_str())

    def __str__(self):
        return self.to_str()

    def to_str(self):
        raise NotImplementedError

    def max_coordinate(self):
        """Largest 0-based coordinate index referenced, -1 for none."""
        return max([c.max_coordinate() for c in self.children] + [-1])

    def depends_on(self, axis):
        return any(c.depends_on(axis) for c in self.children)

    def is_piecewise(self):
        return any(c.is_piecewise() for c in self.children)

    def evaluate(self, X, strict=True):
        """Evaluate at points ``X`` of shape ``(..., d)``.

        With ``strict`` a point outside the domain of any node raises
        :class:`ExprDomainError`; otherwise such points evaluate to NaN.
        """
        X = np.asarray(X, dtype=float)
        if X.ndim == 0:
            X = X.reshape(1)
        need = self.max_coordinate() + 1
        if X.shape[-1] < need:
            raise ExprDomainError(
                'points have {} coordinates, expression needs {}'.format(X.shape[-1], need),
                node=self)
        with np.errstate(all='ignore'):
            out = self._eval(X, strict)
        out = np.broadcast_to(out, X.shape[:-1]).astype(float, copy=True)
        if strict:
            bad = ~np.isfinite(out)
            if bad.any():
                raise ExprDomainError('non-finite value', node=self, point=_first_point(X, bad))
        return out

    def _eval(self, X, strict):
        raise NotImplementedError

    def diff(self, axis, piecewise=False):
        """Symbolic partial derivative along the 0-based ``axis``."""
        if not self.depends_on(axis):
            return ZERO
        return self._diff(axis, piecewise)

    def _diff(self, axis, piecewise):
        raise NotImplementedError

    # building expressions in code reads like arithmetic
    def __add__(self, other):
        return add(self, as_node(other))

    def __radd__(self, other):
        return add(as_node(other), self)

    def __sub__(self, other):
        return sub(self, as_node(other))

    def __rsub__(self, other):
        return sub(as_node(other), self)

    def __mul__(self, other):
        return mul(self, as_node(other))

    def __rmul__(self, other):
        return mul(as_node(other), self)

    def __truediv__(self, other):
        return div(self, as_node(other))

    def __rtruediv__(self, other):
        return div(as_node(other), self)

    def __neg__(self):
        return neg(self)

    def __pow__(self, exponent):
        return power(self, exponent)


class Const(Node):
    __slots__ = ('value',)
    kind = 'const'

    def __init__(self, value):
        object.__setattr__(self, 'value', float(value))

    def _make_key(self):
        return (self.kind, self.value)

    def to_str(self):
        text = repr(self.value)
        if self.value < 0 or text.startswith('-'):
            return '({})'.format(text)
        return text

    def depends_on(self, axis):
        return False

    def _eval(self, X, strict):
        return np.full(X.shape[:-1], self.value)

    def _diff(self, axis, piecewise):
        return ZERO


class Coord(Node):
    __slots__ = ('index',)
    kind = 'coord'

    def __init__(self, index):
        assert index >= 0
        object.__setattr__(self, 'index', int(index))

    def _make_key(self):
        return (self.kind, self.index)

    def to_str(self):
        return 'x{}'.format(self.index + 1)

    def max_coordinate(self):
        return self.index

    def depends_on(self, axis):
        return axis == self.index

    def _eval(self, X, strict):
        return X[..., self.index]

    def _diff(self, axis, piecewise):
        return ONE


class Norm2(Node):
    """Squared Euclidean norm of the whole point."""
    __slots__ = ()
    kind = 'norm2'

    def to_str(self):
        return 'norm2(x)'

    def max_coordinate(self):
        return 0

    def depends_on(self, axis):
        return True

    def _eval(self, X, strict):
        return np.einsum('...i,...i->...', X, X)

    def _diff(self, axis, piecewise):
        return mul(Const(2.0), Coord(axis))


class _Unary(Node):
    __slots__ = ('arg',)
    arity = 1
    name = None

    def __init__(self, arg):
        object.__setattr__(self, 'arg', arg)

    @property
    def children(self):
        return (self.arg,)

    def to_str(self):
        return '{}({})'.format(self.name, self.arg.to_str())


class _Binary(Node):
    __slots__ = ('left', 'right')
    arity = 2
    symbol = None

    def __init__(self, left, right):
        object.__setattr__(self, 'left', left)
        object.__setattr__(self, 'right', right)

    @property
    def children(self):
        return (self.left, self.right)

    def to_str(self):
        return '({} {} {})'.format(self.left.to_str(), self.symbol, self.right.to_str())


class Add(_Binary):
    __slots__ = ()
    kind = 'add'
    symbol = '+'

    def _eval(self, X, strict):
        return self.left._eval(X, strict) + self.right._eval(X, strict)

    def _diff(self, axis, piecewise):
        return add(self.left.diff(axis, piecewise), self.right.diff(axis, piecewise))


class Sub(_Binary):
    __slots__ = ()
    kind = 'sub'
    symbol = '-'

    def _eval(self, X, strict):
        return self.left._eval(X, strict) - self.right._eval(X, strict)

    def _diff(self, axis, piecewise):
        return sub(self.left.diff(axis, piecewise), self.right.diff(axis, piecewise))


class Mul(_Binary):
    __slots__ = ()
    kind = 'mul'
    symbol = '*'

    def _eval(self, X, strict):
        return self.left._eval(X, strict) * self.right._eval(X, strict)

    def _diff(self, axis, piecewise):
        return add(mul(self.left.diff(axis, piecewise), self.right),
                   mul(self.left, self.right.diff(axis, piecewise)))


class Div(_Binary):
    __slots__ = ()
    kind = 'div'
    symbol = '/'

    def _eval(self, X, strict):
        num = self.left._eval(X, strict)
        den = self.right._eval(X, strict)
        if strict:
            zero = np.broadcast_to(den == 0, X.shape[:-1])
            if zero.any():
                raise ExprDomainError('division by zero', node=self, point=_first_point(X, zero))
        return num / den

    def _diff(self, axis, piecewise):
        da = self.left.diff(axis, piecewise)
        db = self.right.diff(axis, piecewise)
        return sub(div(da, self.right),
                   div(mul(self.left, db), power(self.right, 2)))


class Neg(_Unary):
    __slots__ = ()
    kind = 'neg'

    def to_str(self):
        return '(-({}))'.format(self.arg.to_str())

    def _eval(self, X, strict):
        return -self.arg._eval(X, strict)

    def _diff(self, axis, piecewise):
        return neg(self.arg.diff(axis, piecewise))


class Pow(Node):
    """Power with a constant rational exponent."""
    __slots__ = ('base', 'exponent')
    kind = 'pow'
    arity = 1

    def __init__(self, base, exponent):
        object.__setattr__(self, 'base', base)
        object.__setattr__(self, 'exponent', Fraction(exponent))

    @property
    def children(self):
        return (self.base,)

    def _make_key(self):
        return (self.kind, self.exponent, self.base.key())

    def to_str(self):
        p = self.exponent
        if p.denominator == 1 and p >= 0:
            return '({}^{})'.format(self.base.to_str(), p.numerator)
        return '({}^({}))'.format(self.base.to_str(), p)

    def _eval(self, X, strict):
        base = self.base._eval(X, strict)
        p = self.exponent
        if p.denominator == 1:
            # integer powers are defined for every base except 0 with p < 0
            if p < 0 and strict:
                zero = np.broadcast_to(base == 0, X.shape[:-1])
                if zero.any():
                    raise ExprDomainError('zero to a negative power', node=self,
                                          point=_first_point(X, zero))
            return np.power(base, float(p)) if p < 0 else np.power(base, int(p))
        if strict:
            bad = (base == 0) & (p < 0)
            if p.denominator % 2 == 0:
                bad = bad | (base < 0)
            bad = np.broadcast_to(bad, X.shape[:-1])
            if bad.any():
                raise ExprDomainError('fractional power outside its domain', node=self,
                                      point=_first_point(X, bad))
        if p.denominator % 2 == 1:
            # odd roots extend to negative bases
            value = np.power(np.abs(base), float(p))
            if p.numerator % 2 == 1:
                value = np.sign(base) * value
            return value
        return np.power(base, float(p))

    def _diff(self, axis, piecewise):
        p = self.exponent
        return mul(mul(Const(float(p)), power(self.base, p - 1)),
                   self.base.diff(axis, piecewise))


class Exp(_Unary):
    __slots__ = ()
    kind = 'exp'
    name = 'exp'

    def _eval(self, X, strict):
        return np.exp(self.arg._eval(X, strict))

    def _diff(self, axis, piecewise):
        return mul(self, self.arg.diff(axis, piecewise))


class Log(_Unary):
    __slots__ = ()
    kind = 'ln'
    name = 'ln'

    def _eval(self, X, strict):
        arg = self.arg._eval(X, strict)
        if strict:
            bad = np.broadcast_to(arg <= 0, X.shape[:-1])
            if bad.any():
                raise ExprDomainError('ln of a non-positive value', node=self,
                                      point=_first_point(X, bad))
        return np.log(arg)

    def _diff(self, axis, piecewise):
        return div(self.arg.diff(axis, piecewise), self.arg)


class Sqrt(_Unary):
    __slots__ = ()
    kind = 'sqrt'
    name = 'sqrt'

    def _eval(self, X, strict):
        arg = self.arg._eval(X, strict)
        if strict:
            bad = np.broadcast_to(arg < 0, X.shape[:-1])
            if bad.any():
                raise ExprDomainError('sqrt of a negative value', node=self,
                                      point=_first_point(X, bad))
        return np.sqrt(arg)

    def _diff(self, axis, piecewise):
        return div(self.arg.diff(axis, piecewise), mul(Const(2.0), self))


class _Piecewise(_Binary):
    __slots__ = ()

    def to_str(self):
        return '{}({}, {})'.format(self.kind, self.left.to_str(), self.right.to_str())

    def is_piecewise(self):
        return True

    def _require_flag(self, piecewise):
        if not piecewise:
            raise DerivativeError(
                '{} on the differentiation path of a non-piecewise expression: {}'.format(
                    self.kind, self.to_str()))


class Max(_Piecewise):
    __slots__ = ()
    kind = 'max'

    def _eval(self, X, strict):
        return np.maximum(self.left._eval(X, strict), self.right._eval(X, strict))

    def _diff(self, axis, piecewise):
        self._require_flag(piecewise)
        # ties take the first argument's branch
        return Select(self.left, self.right,
                      self.left.diff(axis, piecewise), self.right.diff(axis, piecewise))


class Min(_Piecewise):
    __slots__ = ()
    kind = 'min'

    def _eval(self, X, strict):
        return np.minimum(self.left._eval(X, strict), self.right._eval(X, strict))

    def _diff(self, axis, piecewise):
        self._require_flag(piecewise)
        return Select(self.right, self.left,
                      self.left.diff(axis, piecewise), self.right.diff(axis, piecewise))


class Select(Node):
    """``if_ge`` where ``a >= b``, else ``if_lt``; produced by piecewise derivatives."""
    __slots__ = ('a', 'b', 'if_ge', 'if_lt')
    kind = 'select'
    arity = 4

    def __init__(self, a, b, if_ge, if_lt):
        object.__setattr__(self, 'a', a)
        object.__setattr__(self, 'b', b)
        object.__setattr__(self, 'if_ge', if_ge)
        object.__setattr__(self, 'if_lt', if_lt)

    @property
    def children(self):
        return (self.a, self.b, self.if_ge, self.if_lt)

    def to_str(self):
        return 'select({})'.format(', '.join(c.to_str() for c in self.children))

    def is_piecewise(self):
        return True

    def _eval(self, X, strict):
        cond = self.a._eval(X, strict) >= self.b._eval(X, strict)
        # the branch not taken may be undefined there
        ge = self.if_ge._eval(X, False)
        lt = self.if_lt._eval(X, False)
        return np.where(cond, ge, lt)

    def _diff(self, axis, piecewise):
        if not piecewise:
            raise DerivativeError('select on the differentiation path of a '
                                  'non-piecewise expression')
        return Select(self.a, self.b, self.if_ge.diff(axis, piecewise),
                      self.if_lt.diff(axis, piecewise))


ZERO = Const(0.0)
ONE = Const(1.0)


def as_node(value):
    if isinstance(value, Node):
        return value
    if isinstance(value, (int, float, np.integer, np.floating)):
        return Const(value)
    raise TypeError('cannot turn {!r} into an expression node'.format(value))


def _is_const(node, value=None):
    return isinstance(node, Const) and (value is None or node.value == value)


def add(a, b):
    if _is_const(a) and _is_const(b):
        return Const(a.value + b.value)
    if _is_const(a, 0.0):
        return b
    if _is_const(b, 0.0):
        return a
    return Add(a, b)


def sub(a, b):
    if _is_const(a) and _is_const(b):
        return Const(a.value - b.value)
    if _is_const(b, 0.0):
        return a
    if _is_const(a, 0.0):
        return neg(b)
    return Sub(a, b)


def mul(a, b):
    if _is_const(a) and _is_const(b):
        return Const(a.value * b.value)
    if _is_const(a, 0.0) or _is_const(b, 0.0):
        return ZERO
    if _is_const(a, 1.0):
        return b
    if _is_const(b, 1.0):
        return a
    if _is_const(a, -1.0):
        return neg(b)
    if _is_const(b, -1.0):
        return neg(a)
    return Mul(a, b)


def div(a, b):
    if _is_const(b, 1.0):
        return a
    if _is_const(a, 0.0):
        return ZERO
    if _is_const(a) and _is_const(b) and b.value != 0.0:
        return Const(a.value / b.value)
    return Div(a, b)


def neg(a):
    if _is_const(a):
        return Const(-a.value)
    if isinstance(a, Neg):
        return a.arg
    return Neg(a)


def power(base, exponent):
    p = Fraction(exponent)
    if p == 0:
        return ONE
    if p == 1:
        return base
    if _is_const(base) and p.denominator == 1 and not (base.value == 0 and p < 0):
        return Const(base.value ** int(p))
    return Pow(base, p)


def exp(a):
    return Exp(a)


def ln(a):
    return Log(a)


def sqrt(a):
    return Sqrt(a)


def maximum(a, b):
    return Max(a, b)


def minimum(a, b):
    return Min(a, b)


def coordinate(index):
    return Coord(index)


def norm2():
    return Norm2()


def constant(value):
    return Const(value)


PI = Const(math.pi)
