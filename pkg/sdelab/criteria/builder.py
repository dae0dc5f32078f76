import logging
from dataclasses import dataclass
from typing import Any, Optional

from ..utils import build_from_cfg
from ..utils.errors import CriterionError
from .catalog import CRITERION, CriterionBase
from .verdict import HOLDS

logger = logging.getLogger(__name__)


@dataclass
class CriterionInputs:
    cs: Any
    rho: Optional[Any] = None
    bbar: Optional[Any] = None


def build_criterion(cfg):
    """A catalog instance from a block such as ``{TYPE: LYAPUNOV_L, M: 2}``."""
    if isinstance(cfg, CriterionBase):
        return cfg
    if not isinstance(cfg, dict) or 'TYPE' not in cfg:
        raise CriterionError('criterion block needs a TYPE key')
    if cfg['TYPE'] not in CRITERION:
        raise CriterionError('unknown criterion {!r}; known: {}'.format(
            cfg['TYPE'], ', '.join(sorted(CRITERION.keys()))))
    args = {k: v for k, v in cfg.items() if k != 'NAME'}
    try:
        return build_from_cfg(args, CRITERION)
    except TypeError as exc:
        raise CriterionError('{}: {}'.format(cfg['TYPE'], exc))


def evaluate_criterion(spec, inputs):
    """Instantiate the template of ``spec`` and evaluate it on its grid."""
    criterion = build_criterion(spec)
    if inputs is None or inputs.cs is None:
        raise CriterionError('{}: missing input: coefficients'.format(criterion.ID))
    if inputs.rho is not None and inputs.rho.dim != inputs.cs.dim:
        raise CriterionError('dimension mismatch: coefficients d={}, density d={}'.format(
            inputs.cs.dim, inputs.rho.dim))
    if inputs.bbar is not None:
        width = getattr(inputs.bbar, 'dim', None) or len(inputs.bbar)
        if width != inputs.cs.dim:
            raise CriterionError('dimension mismatch: B̄ has {} components, d={}'.format(
                width, inputs.cs.dim))
    return criterion.evaluate(inputs)


@dataclass
class ConstantSearch:
    name: str
    value: Optional[float]
    direction: str
    iterations: int
    verdict: Any = None

    def to_dict(self):
        return {'name': self.name, 'value': self.value, 'direction': self.direction,
                'iterations': self.iterations,
                'verdict': self.verdict.to_dict() if self.verdict is not None else None}


def search_constant(spec_cfg, inputs, name, lo, hi, tol=1e-6, max_iter=60):
    """Bisect the boundary value of constant ``name`` in [lo, hi].

    The criterion must hold at exactly one end of the bracket. Holding at
    ``hi`` only means larger values are easier (``M``-like): the smallest value
    that holds is returned. Holding at ``lo`` only gives the largest value
    that holds (``α``-like).
    """
    if not lo < hi:
        raise CriterionError('search bracket needs lo < hi, got [{}, {}]'.format(lo, hi))

    def holds(value):
        cfg = dict(spec_cfg)
        cfg[name] = value
        return evaluate_criterion(cfg, inputs)

    at_lo, at_hi = holds(lo), holds(hi)
    if at_lo.holds and at_hi.holds:
        raise CriterionError('{} holds at both ends of [{}, {}]; widen the bracket'.format(
            name, lo, hi))
    if not at_lo.holds and not at_hi.holds:
        raise CriterionError('{} holds at neither end of [{}, {}]'.format(name, lo, hi))
    increasing = at_hi.holds
    good, bad = (hi, lo) if increasing else (lo, hi)
    best = at_hi if increasing else at_lo
    iterations = 0
    while abs(good - bad) > tol * max(1.0, abs(good)) and iterations < max_iter:
        mid = 0.5 * (good + bad)
        verdict = holds(mid)
        if verdict.holds:
            good, best = mid, verdict
        else:
            bad = mid
        iterations += 1
    direction = 'smallest' if increasing else 'largest'
    logger.info('%s: %s %s = %.6g after %d bisections', spec_cfg.get('TYPE'), direction, name,
                good, iterations)
    return ConstantSearch(name, float(good), direction, iterations, best)
