"""Tensor-product quadrature on axis-aligned boxes and the standard bump library."""
import math

import numpy as np

from ..dsl import nodes
from ..utils.env import get_threads, parallel_map
from ..utils.errors import QuadratureError
from .fields import ExprField

SCHEMES = ('midpoint', 'simpson', 'legendre')
BUMP_PROFILES = ('poly', 'gauss')
# Gauss-Legendre nodes per axis on the support of a test function
SUPPORT_NODES = 48

# offsets of the default bump centers, in units of the box half-width
_PLACEMENTS = {
    1: [(0.0,), (0.3,), (-0.3,), (0.15,), (-0.15,), (0.45,), (-0.45,), (0.6,)],
    2: [(0.0, 0.0), (0.3, 0.0), (-0.3, 0.0), (0.0, 0.3), (0.0, -0.3), (0.3, 0.3),
        (-0.3, -0.3), (0.3, -0.3)],
    3: [(0.0, 0.0, 0.0), (0.3, 0.0, 0.0), (-0.3, 0.0, 0.0), (0.0, 0.3, 0.0), (0.0, -0.3, 0.0),
        (0.0, 0.0, 0.3), (0.0, 0.0, -0.3), (0.3, 0.3, 0.3)],
}


class QuadratureRule(object):
    """Tensor rule on ``[lower, upper]``; ``nodes`` per axis.

    ``midpoint`` uses ``nodes`` cell midpoints; ``simpson`` uses ``nodes``
    equispaced points including both ends and needs an odd count; ``legendre``
    is the ``nodes``-point Gauss-Legendre rule.
    """

    def __init__(self, lower, upper, nodes, scheme='simpson'):
        if scheme not in SCHEMES:
            raise QuadratureError('unknown scheme {!r}'.format(scheme))
        self.lower = np.atleast_1d(np.asarray(lower, dtype=float))
        self.upper = np.atleast_1d(np.asarray(upper, dtype=float))
        self.dim = self.lower.shape[0]
        if np.isscalar(nodes) or np.ndim(nodes) == 0:
            nodes = [int(nodes)] * self.dim
        self.nodes = [int(n) for n in nodes]
        self.scheme = scheme
        if len(self.nodes) != self.dim or self.upper.shape[0] != self.dim:
            raise QuadratureError('box and node counts disagree in dimension')
        if not (self.upper > self.lower).all():
            raise QuadratureError('empty box [{}, {}]'.format(self.lower, self.upper))
        for n in self.nodes:
            if scheme == 'simpson' and (n < 3 or n % 2 == 0):
                raise QuadratureError('Simpson needs an odd node count >= 3, got {}'.format(n))
            if n < 1:
                raise QuadratureError('node count must be positive, got {}'.format(n))
        self.axes = []
        self.weights = []
        for a, b, n in zip(self.lower, self.upper, self.nodes):
            x, w = self._axis(a, b, n)
            self.axes.append(x)
            self.weights.append(w)

    @classmethod
    def box(cls, half_width, dim, nodes, scheme='simpson', center=None):
        center = np.zeros(dim) if center is None else np.asarray(center, dtype=float)
        return cls(center - half_width, center + half_width, nodes, scheme)

    def _axis(self, a, b, n):
        if self.scheme == 'midpoint':
            h = (b - a) / n
            return a + (np.arange(n) + 0.5) * h, np.full(n, h)
        if self.scheme == 'legendre':
            t, w = np.polynomial.legendre.leggauss(n)
            return 0.5 * (a + b) + 0.5 * (b - a) * t, 0.5 * (b - a) * w
        h = (b - a) / (n - 1)
        x = a + np.arange(n) * h
        w = np.full(n, 2.0)
        w[1::2] = 4.0
        w[0] = w[-1] = 1.0
        return x, w * h / 3.0

    @property
    def volume(self):
        return float(np.prod(self.upper - self.lower))

    def points(self):
        return np.stack(np.meshgrid(*self.axes, indexing='ij'), axis=-1)

    def describe(self):
        return '{} {} on {}'.format(self.scheme, 'x'.join(map(str, self.nodes)),
                                    ' x '.join('[{:g}, {:g}]'.format(a, b)
                                               for a, b in zip(self.lower, self.upper)))


def _as_callable(field):
    if hasattr(field, 'value'):
        return lambda X: field.value(X)
    if hasattr(field, 'evaluate'):
        return lambda X: field.evaluate(X)
    return field


def integrate(field, rule, chunk_rows=None):
    """∫ field dx over the box of ``rule``.

    Slabs along the first axis are evaluated independently (in parallel when a
    thread budget is set) and every weighted node value is summed with
    ``math.fsum``, so the result does not depend on the thread count.
    """
    fn = _as_callable(field)
    first = rule.axes[0]
    rest = rule.axes[1:]
    rest_w = np.ones(())
    for w in rule.weights[1:]:
        rest_w = np.multiply.outer(rest_w, w)
    if chunk_rows is None:
        per_row = int(np.prod([len(a) for a in rest])) if rest else 1
        chunk_rows = max(1, 200000 // max(per_row, 1))
    starts = list(range(0, len(first), chunk_rows))

    def slab(start):
        stop = min(start + chunk_rows, len(first))
        grids = np.meshgrid(first[start:stop], *rest, indexing='ij')
        X = np.stack(grids, axis=-1)
        values = np.asarray(fn(X), dtype=float)
        weighted = values * rule.weights[0][start:stop].reshape((-1,) + (1,) * len(rest)) * rest_w
        return math.fsum(weighted.ravel())

    partials = parallel_map(slab, starts, get_threads())
    total = math.fsum(partials)
    if not math.isfinite(total):
        raise QuadratureError('integrand is not finite on {}'.format(rule.describe()))
    return total


def gaussian_bump(center, width):
    """exp(−‖x − c‖² / (2 s²)) as an expression."""
    acc = nodes.ZERO
    for k, c in enumerate(center):
        acc = nodes.add(acc, nodes.power(nodes.sub(nodes.Coord(k), nodes.Const(float(c))), 2))
    return nodes.Exp(nodes.mul(nodes.Const(-1.0 / (2.0 * width * width)), acc))


def poly_bump(center, width):
    """Π_k max(0, 1 − t_k²)³ with t_k = (x_k − c_k)/s, a C² bump supported on the cube."""
    out = nodes.ONE
    for k, c in enumerate(center):
        t = nodes.div(nodes.sub(nodes.Coord(k), nodes.Const(float(c))), nodes.Const(float(width)))
        core = nodes.Max(nodes.ZERO, nodes.sub(nodes.ONE, nodes.power(t, 2)))
        out = nodes.mul(out, nodes.power(core, 3))
    return out


def bump_library(lower, upper, count=8, profile='poly'):
    """Reproducible test functions inside the box: ``count`` fixed placements.

    ``poly`` bumps are Π_k (1 − t_k²)³ on sub-boxes of half-width (box half-width)/4
    and carry that sub-box as their support. ``gauss`` bumps have width
    (box half-width)/16 and no support.
    """
    if profile not in BUMP_PROFILES:
        raise QuadratureError('unknown bump profile {!r}, expected one of {}'.format(
            profile, BUMP_PROFILES))
    lower = np.atleast_1d(np.asarray(lower, dtype=float))
    upper = np.atleast_1d(np.asarray(upper, dtype=float))
    dim = lower.shape[0]
    center = 0.5 * (lower + upper)
    half = 0.5 * (upper - lower)
    placements = _PLACEMENTS.get(dim)
    if placements is None:
        raise QuadratureError('no bump placements for dimension {}'.format(dim))
    if not 1 <= count <= len(placements):
        raise QuadratureError('bump count must be in [1, {}]'.format(len(placements)))
    out = []
    for offset in placements[:count]:
        c = center + np.asarray(offset) * half
        label = '{}@{}'.format(profile, tuple(np.round(c, 6)))
        if profile == 'gauss':
            out.append(ExprField(gaussian_bump(c, float(half.min()) / 16.0), dim, name=label))
        else:
            width = float(half.min()) / 4.0
            out.append(ExprField(poly_bump(c, width), dim, piecewise=True, name=label,
                                 support=(c - width, c + width)))
    return out


def support_rule(f, rule, nodes_per_axis=SUPPORT_NODES):
    """Gauss-Legendre rule on the declared support of ``f``.

    None when ``f`` has no support or the support is not inside the box of ``rule``.
    """
    support = getattr(f, 'support', None)
    if support is None:
        return None
    lower, upper = support
    if (lower < rule.lower).any() or (upper > rule.upper).any():
        return None
    return QuadratureRule(lower, upper, nodes_per_axis, 'legendre')


def ball_indicator(radius, dim, center=None):
    """1 on the closed ball, 0 outside; a plain callable for :func:`integrate`."""
    center = np.zeros(dim) if center is None else np.asarray(center, dtype=float)

    def indicator(X):
        X = np.asarray(X, dtype=float)
        return (np.sum((X - center) ** 2, axis=-1) <= radius * radius).astype(float)

    return indicator
