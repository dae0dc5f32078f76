"""Closed-form candidate functions the expression grammar cannot state."""
import math

import numpy as np
from scipy.special import erf

from ..calculus.fields import ClosedFormField, ExprField
from ..dsl import parse_expr
from ..utils import Registry, build_from_cfg
from ..utils.errors import CriterionError

CANDIDATE = Registry('candidate')


@CANDIDATE.register_module
class GaussianPrimitive(ClosedFormField):
    """h(x) = ∫_{−∞}^{x_k} e^{−t²} dt = (√π/2)(1 + erf x_k), with exact derivatives."""

    def __init__(self, DIM, AXIS=1, **kwargs):
        self.axis = int(AXIS) - 1
        k = self.axis

        def fn(X):
            return 0.5 * math.sqrt(math.pi) * (1.0 + erf(X[..., k]))

        def grad(X):
            out = np.zeros(X.shape)
            out[..., k] = np.exp(-X[..., k] ** 2)
            return out

        def hess(X):
            out = np.zeros(X.shape + (X.shape[-1],))
            out[..., k, k] = -2.0 * X[..., k] * np.exp(-X[..., k] ** 2)
            return out

        super(GaussianPrimitive, self).__init__(DIM, fn, grad, hess,
                                                name='gaussian_primitive(x{})'.format(k + 1))


@CANDIDATE.register_module
class BallIndicator(ClosedFormField):
    """1_{‖x‖ < r} · ‖x‖^p; for occupation functionals, no derivatives."""

    def __init__(self, DIM, RADIUS=1.0, POWER=0.0, **kwargs):
        self.radius = float(RADIUS)
        self.power = float(POWER)
        radius, power = self.radius, self.power

        def fn(X):
            r = np.sqrt(np.sum(X * X, axis=-1))
            inside = r < radius
            with np.errstate(divide='ignore', invalid='ignore'):
                base = np.where(inside, r, 1.0) ** power if power else np.ones_like(r)
            return np.where(inside, base, 0.0)

        super(BallIndicator, self).__init__(DIM, fn, name='ball_indicator(r={:g}, p={:g})'.format(
            radius, power))


def recurrence_candidate(n0, dim):
    """g(x) = ln(‖x‖² ∨ N₀²) + 2."""
    return ExprField(parse_expr('ln(max(norm2(x), {!r})) + 2'.format(float(n0) ** 2), dim),
                     dim, piecewise=True, name='ln(|x|^2 v {:g}) + 2'.format(float(n0) ** 2))


def build_candidate(cfg, dim, default=None):
    """A candidate from config: expression text, a ``TYPE`` block, or the default."""
    if cfg is None:
        if default is None:
            raise CriterionError('missing input: CANDIDATE')
        cfg = default
    if isinstance(cfg, (ExprField, ClosedFormField)):
        return cfg
    if isinstance(cfg, dict):
        if 'TYPE' in cfg:
            try:
                return build_from_cfg(cfg, CANDIDATE, default_args={'DIM': dim})
            except (KeyError, TypeError) as exc:
                raise CriterionError('candidate: {}'.format(exc))
        if 'EXPR' in cfg:
            return ExprField(cfg['EXPR'], dim, piecewise=bool(cfg.get('PIECEWISE', True)))
        raise CriterionError('candidate block needs TYPE or EXPR')
    return ExprField(cfg, dim, piecewise=True)
