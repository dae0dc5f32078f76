"""Scalar and vector fields on R^d: symbolic, closed-form, and gridded."""
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from ..dsl import Node, parse_expr
from ..utils.errors import DensityError


def as_points(X, dim):
    X = np.asarray(X, dtype=float)
    if X.ndim == 1 and dim > 1 and X.shape[0] == dim:
        X = X[None, :]
    elif X.ndim == 1 and dim == 1:
        X = X[:, None]
    if X.shape[-1] != dim:
        raise ValueError('expected points with {} coordinates, got shape {}'.format(dim, X.shape))
    return X


class Field(object):
    """Scalar field with first and second derivatives, evaluated on ``(..., d)`` arrays."""

    dim = None
    name = None
    piecewise = False

    def __call__(self, X, strict=True):
        return self.value(X, strict=strict)

    def value(self, X, strict=True):
        raise NotImplementedError

    def gradient(self, X, strict=True):
        raise NotImplementedError

    def hessian(self, X, strict=True):
        raise NotImplementedError

    def describe(self):
        return self.name or self.__class__.__name__


class ExprField(Field):
    """Field given by an expression tree; derivatives are symbolic and cached.

    ``support`` is an optional ``(lower, upper)`` box outside which the field vanishes.
    """

    def __init__(self, expr, dim, piecewise=None, name=None, support=None):
        if not isinstance(expr, Node):
            expr = parse_expr(expr, dim)
        self.expr = expr
        self.dim = dim
        self.piecewise = expr.is_piecewise() if piecewise is None else bool(piecewise)
        self.name = name
        self.support = None
        if support is not None:
            lower, upper = support
            self.support = (np.asarray(lower, dtype=float), np.asarray(upper, dtype=float))
        self._grad = None
        self._hess = None

    def describe(self):
        return self.name or self.expr.to_str()

    @property
    def grad_exprs(self):
        if self._grad is None:
            self._grad = [self.expr.diff(i, self.piecewise) for i in range(self.dim)]
        return self._grad

    @property
    def hess_exprs(self):
        if self._hess is None:
            grad = self.grad_exprs
            hess = [[None] * self.dim for _ in range(self.dim)]
            for i in range(self.dim):
                for j in range(i, self.dim):
                    hess[i][j] = grad[i].diff(j, self.piecewise)
                    hess[j][i] = hess[i][j]
            self._hess = hess
        return self._hess

    def value(self, X, strict=True):
        return self.expr.evaluate(as_points(X, self.dim), strict=strict)

    def gradient(self, X, strict=True):
        X = as_points(X, self.dim)
        return np.stack([g.evaluate(X, strict=strict) for g in self.grad_exprs], axis=-1)

    def hessian(self, X, strict=True):
        X = as_points(X, self.dim)
        rows = [np.stack([h.evaluate(X, strict=strict) for h in row], axis=-1)
                for row in self.hess_exprs]
        return np.stack(rows, axis=-2)


class ClosedFormField(Field):
    """Field from numpy callables, for candidates the expression grammar cannot state."""

    def __init__(self, dim, fn, grad=None, hess=None, name=None):
        self.dim = dim
        self._fn = fn
        self._grad = grad
        self._hess = hess
        self.name = name

    def value(self, X, strict=True):
        return np.asarray(self._fn(as_points(X, self.dim)), dtype=float)

    def gradient(self, X, strict=True):
        if self._grad is None:
            raise NotImplementedError('{} has no gradient'.format(self.describe()))
        return np.asarray(self._grad(as_points(X, self.dim)), dtype=float)

    def hessian(self, X, strict=True):
        if self._hess is None:
            raise NotImplementedError('{} has no hessian'.format(self.describe()))
        return np.asarray(self._hess(as_points(X, self.dim)), dtype=float)


def fd_derivative(values, h, axis):
    """Fourth-order central differences inside, second-order one-sided at the ends."""
    values = np.asarray(values, dtype=float)
    n = values.shape[axis]
    if n < 5:
        return np.gradient(values, h, axis=axis, edge_order=2 if n >= 3 else 1)
    v = np.moveaxis(values, axis, 0)
    out = np.empty_like(v)
    out[2:-2] = (-v[4:] + 8.0 * v[3:-1] - 8.0 * v[1:-3] + v[:-4]) / (12.0 * h)
    out[1] = (v[2] - v[0]) / (2.0 * h)
    out[-2] = (v[-1] - v[-3]) / (2.0 * h)
    out[0] = (-3.0 * v[0] + 4.0 * v[1] - v[2]) / (2.0 * h)
    out[-1] = (3.0 * v[-1] - 4.0 * v[-2] + v[-3]) / (2.0 * h)
    return np.moveaxis(out, 0, axis)


class GridField(Field):
    """Field sampled on a uniform tensor grid, linearly interpolated.

    Derivatives are finite differences of the node values, interpolated the
    same way; points outside the grid evaluate to NaN.
    """

    def __init__(self, axes, values, name=None):
        self.axes = [np.asarray(a, dtype=float) for a in axes]
        self.dim = len(self.axes)
        self.values = np.asarray(values, dtype=float)
        assert self.values.shape == tuple(len(a) for a in self.axes)
        self.steps = [float(a[1] - a[0]) for a in self.axes]
        self.name = name
        self._interp = self._make(self.values)
        self._grad = None
        self._hess = None

    def _make(self, values):
        return RegularGridInterpolator(self.axes, values, method='linear',
                                       bounds_error=False, fill_value=np.nan)

    @property
    def lower(self):
        return np.array([a[0] for a in self.axes])

    @property
    def upper(self):
        return np.array([a[-1] for a in self.axes])

    def _apply(self, interp, X, strict):
        X = as_points(X, self.dim)
        flat = X.reshape(-1, self.dim)
        lower, upper = self.lower, self.upper
        tol = 1e-9 * (upper - lower)
        outside = np.any((flat < lower - tol) | (flat > upper + tol), axis=1)
        # points within rounding of a face are snapped onto it
        out = interp(np.clip(flat, lower, upper))
        out[outside] = np.nan
        out = out.reshape(X.shape[:-1])
        if strict and np.isnan(out).any():
            idx = np.argwhere(np.isnan(out.reshape(-1)))[0][0]
            raise DensityError('point outside the grid of {}'.format(self.describe()),
                               point=tuple(flat[idx]))
        return out

    def value(self, X, strict=True):
        return self._apply(self._interp, X, strict)

    def _gradient_arrays(self):
        if self._grad is None:
            self._grad = [fd_derivative(self.values, self.steps[k], k) for k in range(self.dim)]
        return self._grad

    def gradient(self, X, strict=True):
        if not hasattr(self, '_grad_interp'):
            self._grad_interp = [self._make(g) for g in self._gradient_arrays()]
        return np.stack([self._apply(g, X, strict) for g in self._grad_interp], axis=-1)

    def hessian(self, X, strict=True):
        if self._hess is None:
            grads = self._gradient_arrays()
            self._hess = [[self._make(fd_derivative(grads[i], self.steps[j], j))
                           for j in range(self.dim)] for i in range(self.dim)]
        rows = [np.stack([self._apply(h, X, strict) for h in row], axis=-1) for row in self._hess]
        return np.stack(rows, axis=-2)


@dataclass
class PositivityReport:
    min_value: float
    witness: Optional[Tuple[float, ...]]
    n_points: int

    @property
    def positive(self):
        return self.min_value > 0


class DensityField(object):
    """Density ρ of μ = ρ dx, analytic (expression) or numeric (grid)."""

    def __init__(self, field, mode, name=None):
        assert mode in ('analytic', 'numeric')
        self.field = field
        self.mode = mode
        self.dim = field.dim
        self.name = name or field.describe()
        self.report = None

    @classmethod
    def analytic(cls, expr, dim, name=None, piecewise=None):
        return cls(ExprField(expr, dim, piecewise=piecewise, name=name), 'analytic', name)

    @classmethod
    def from_grid(cls, axes, values, name=None):
        return cls(GridField(axes, values, name=name), 'numeric', name)

    @property
    def is_analytic(self):
        return self.mode == 'analytic'

    @property
    def expr(self):
        if not self.is_analytic:
            raise AttributeError('numeric density has no expression')
        return self.field.expr

    def value(self, X, strict=True):
        return self.field.value(X, strict=strict)

    __call__ = value

    def gradient(self, X, strict=True):
        return self.field.gradient(X, strict=strict)

    def hessian(self, X, strict=True):
        return self.field.hessian(X, strict=strict)

    def probe(self, points):
        """Record min ρ over ``points``; a non-positive value raises with its witness."""
        X = as_points(points, self.dim).reshape(-1, self.dim)
        values = self.value(X, strict=False)
        if np.isnan(values).all():
            raise DensityError('density {} undefined at every probe point'.format(self.name))
        idx = int(np.nanargmin(values))
        self.report = PositivityReport(float(values[idx]), tuple(X[idx]), int(X.shape[0]))
        if not values[idx] > 0:
            raise DensityError('density {} is not positive ({:.3e})'.format(
                self.name, values[idx]), point=tuple(X[idx]))
        return self.report

    def checked_value(self, X):
        """ρ at ``X``, raising :class:`DensityError` where it is not strictly positive."""
        values = self.value(X, strict=True)
        bad = ~(values > 0)
        if bad.any():
            X = as_points(X, self.dim)
            idx = np.argwhere(bad)[0]
            raise DensityError('density {} is not positive'.format(self.name),
                               point=tuple(X[tuple(idx)]))
        return values


class VectorField(object):
    """d-vector field, from component expressions or a numpy callable.

    ``guard`` is called with the points before evaluation; density-dependent
    fields use it to reject points where ρ is not positive.
    """

    def __init__(self, dim, exprs=None, fn=None, name=None, guard=None):
        assert (exprs is None) != (fn is None)
        self.dim = dim
        self.exprs = None if exprs is None else list(exprs)
        self._fn = fn
        self.name = name
        self.guard = guard

    @property
    def is_symbolic(self):
        return self.exprs is not None

    def value(self, X, strict=True):
        X = as_points(X, self.dim)
        if self.guard is not None and strict:
            self.guard(X)
        if self.exprs is not None:
            return np.stack([e.evaluate(X, strict=strict) for e in self.exprs], axis=-1)
        return np.asarray(self._fn(X, strict), dtype=float)

    __call__ = value

    def _combine(self, other, sign):
        guards = [g for g in (self.guard, other.guard) if g is not None]

        def guard(X):
            for g in guards:
                g(X)

        guard = guard if guards else None
        if self.is_symbolic and other.is_symbolic:
            exprs = [a + b if sign > 0 else a - b for a, b in zip(self.exprs, other.exprs)]
            return VectorField(self.dim, exprs=exprs, guard=guard)
        return VectorField(self.dim, guard=guard,
                           fn=lambda X, strict: self.value(X, strict) + sign * other.value(X, strict))

    def __sub__(self, other):
        return self._combine(other, -1.0)

    def __add__(self, other):
        return self._combine(other, 1.0)

    def scaled(self, factor):
        if self.is_symbolic:
            return VectorField(self.dim, exprs=[factor * e for e in self.exprs], guard=self.guard)
        return VectorField(self.dim, guard=self.guard,
                           fn=lambda X, strict: factor * self.value(X, strict))

    def sup_norm(self, X):
        values = self.value(X, strict=False)
        return float(np.nanmax(np.abs(values)))
