"""Pointwise margins RHS − LHS of inequality templates on a grid."""
import logging
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from ..calculus.fields import Field
from ..calculus.operators import apply_generator, as_field
from ..utils.env import parallel_map

logger = logging.getLogger(__name__)

# margins above -TOLERANCE * (1 + |terms|) count as nonnegative
TOLERANCE = 1e-10
CHUNK = 20000


@dataclass
class MarginResult:
    points: np.ndarray
    margin: np.ndarray
    scale: np.ndarray
    min_margin: float
    witness: Optional[Tuple[float, ...]]
    index: int
    skipped: int

    @property
    def valid(self):
        return np.isfinite(self.margin)

    @property
    def nonnegative(self):
        """Every evaluated point has margin ≥ 0 up to rounding of its terms."""
        ok = self.valid
        if not ok.any():
            return False
        return bool(np.all(self.margin[ok] >= -TOLERANCE * (1.0 + self.scale[ok])))


def chunked(fn, points):
    """Evaluate ``fn`` on row chunks of ``points`` in parallel; order is preserved."""
    starts = list(range(0, points.shape[0], CHUNK))
    parts = parallel_map(lambda s: np.asarray(fn(points[s:s + CHUNK])), starts)
    return np.concatenate(parts, axis=0) if parts else np.zeros((0,))


def _values(term, X):
    if term is None:
        return np.zeros(X.shape[0])
    if isinstance(term, (int, float)):
        return np.full(X.shape[0], float(term))
    if isinstance(term, Field):
        return term.value(X, strict=False)
    return np.asarray(term(X), dtype=float)


def summarize_margin(points, margin, scale, log=True):
    """Min, argmin and skip count of a margin array; undefined entries are skipped."""
    margin = np.where(np.isfinite(scale), margin, np.nan)
    bad = ~np.isfinite(margin)
    skipped = int(bad.sum())
    if skipped and log:
        first = tuple(float(v) for v in points[np.argmax(bad)])
        logger.warning('margin undefined at %d of %d grid points (first at %s); skipped',
                       skipped, points.shape[0], first)
    if skipped == points.shape[0]:
        return MarginResult(points, margin, scale, float('nan'), None, -1, skipped)
    # nanargmin returns the first minimum: the smallest grid index wins ties
    idx = int(np.nanargmin(margin))
    return MarginResult(points, margin, scale, float(margin[idx]),
                        tuple(float(v) for v in points[idx]), idx, skipped)


def _block(terms, sense, X):
    with np.errstate(all='ignore'):
        lhs_terms, rhs_terms = terms(X)
        lhs = np.sum(lhs_terms, axis=0)
        rhs = np.sum(rhs_terms, axis=0)
        scale = np.sum(np.abs(lhs_terms), axis=0) + np.sum(np.abs(rhs_terms), axis=0)
    margin = rhs - lhs if sense == 'le' else lhs - rhs
    return margin, scale


def evaluate_margin(points, terms, sense='le', log=True):
    """Margin of ``Σ lhs ≤ Σ rhs`` (or ``≥`` with ``sense='ge'``).

    ``terms(X)`` returns ``(lhs_terms, rhs_terms)``, two lists of arrays; the
    absolute values of all terms set the rounding tolerance of each point.
    """
    if sense not in ('le', 'ge'):
        raise ValueError('sense must be le or ge, got {!r}'.format(sense))
    out = chunked(lambda X: np.stack(_block(terms, sense, X), axis=-1), points)
    return summarize_margin(points, out[:, 0], out[:, 1], log=log)


def pointwise_margin(terms, sense='le'):
    """The margin of one template as a plain function of a point array."""
    def fn(X):
        return _block(terms, sense, np.atleast_2d(np.asarray(X, dtype=float)))[0]

    return fn


def combine_margins(results, log=True):
    """Pointwise minimum of several margins on the same grid.

    A point undefined for any part is undefined for the combination.
    """
    points = results[0].points
    margins = np.stack([r.margin for r in results])
    scales = np.stack([r.scale for r in results])
    undefined = np.isnan(margins).any(axis=0)
    pick = np.argmin(np.where(np.isnan(margins), np.inf, margins), axis=0)
    margin = np.take_along_axis(margins, pick[None], axis=0)[0]
    scale = np.take_along_axis(scales, pick[None], axis=0)[0]
    return summarize_margin(points, np.where(undefined, np.nan, margin), scale, log=log)


def generator_terms(cs, rho, candidate, mode):
    """Callable X -> (diffusion term, drift term) of the generator applied to ``candidate``."""
    gen = apply_generator(cs, rho, as_field(candidate, cs.dim), mode)

    def terms(X):
        A = cs.matrix_A(X, strict=False)
        hess = gen.f.hessian(X, strict=False)
        grad = gen.f.gradient(X, strict=False)
        b = gen.drift.value(X, strict=False)
        return (0.5 * np.einsum('...ij,...ij->...', A, hess),
                np.einsum('...i,...i->...', b, grad))

    return terms


def lyapunov_terms(cs, rho, candidate, mode, rhs):
    gen = generator_terms(cs, rho, candidate, mode)

    def terms(X):
        diffusion, drift = gen(X)
        return [diffusion, drift], [_values(rhs, X)]

    return terms


def lyapunov_margin(cs, rho, candidate, mode, rhs, region, sense='le'):
    """margin(x) = rhs(x) − (operator candidate)(x) on ``region`` (reversed for ``ge``).

    ``rhs`` is a number, a field, or a callable on point arrays.
    """
    return evaluate_margin(region.points, lyapunov_terms(cs, rho, candidate, mode, rhs), sense)
