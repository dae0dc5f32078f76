"""Recurrence from volume growth: a_n = ∫₁ⁿ r / (v₁ + v₂)(r) dr must diverge."""
import logging
import math

import numpy as np
from scipy.integrate import cumulative_trapezoid

from ..density.volume import volume_profile
from ..utils.errors import CriterionError
from ..utils.metrics import calc_trend
from .catalog import CRITERION, MIN_R2, CriterionBase
from .verdict import HOLDS, INCONCLUSIVE, CriterionVerdict

logger = logging.getLogger(__name__)

RECURRENCE_ID = 'RECURRENCE_VOLUME'


def recurrence_volume_test(cs, rho, bbar=None, n_max=1e6, per_decade=40):
    """Trend test of a_n and ln(v₂(n) ∨ 1)/a_n on a geometric ladder in [1, n_max].

    a_n is the trapezoid rule in ln r applied to r²/v(r). The verdict holds on
    the grid when the per-decade increments of a_n do not decay and the ratio
    is nonincreasing over the last decade; decaying increments mean a_n
    converges, which is reported as inconclusive with the extrapolated limit.
    """
    decades = int(round(math.log10(n_max)))
    if decades < 2 or not math.isclose(10.0 ** decades, n_max, rel_tol=1e-9):
        raise CriterionError('n_max must be a power of ten >= 100, got {}'.format(n_max))
    if cs.dim != rho.dim:
        raise CriterionError('dimension mismatch: coefficients d={}, density d={}'.format(
            cs.dim, rho.dim))
    steps = decades * per_decade
    radii = 10.0 ** (np.arange(steps + 1) / per_decade)
    profile = volume_profile(rho, radii.tolist(), cs=cs, bbar=bbar)
    v1 = np.asarray(profile.v1)
    v2 = np.asarray(profile.v2)
    v = v1 + v2
    notes = []
    constants = {'n_max': float(n_max), 'per_decade': int(per_decade)}
    region = {'type': 'ladder', 'r_min': 1.0, 'r_max': float(n_max), 'points': int(steps + 1)}

    if not np.all(v > 0):
        first = float(radii[np.argmax(~(v > 0))])
        notes.append('v(r) vanishes at r = {:.6g}; a_n undefined'.format(first))
        return CriterionVerdict(RECURRENCE_ID, region, float('nan'), None, INCONCLUSIVE,
                                'recurrent', constants, notes)

    a = np.concatenate([[0.0], cumulative_trapezoid(radii ** 2 / v, np.log(radii))])
    with np.errstate(divide='ignore', invalid='ignore'):
        ratio = np.where(a > 0, np.log(np.maximum(v2, 1.0)) / a, np.nan)

    marks = np.arange(0, steps + 1, per_decade)
    table = [{'n': float(radii[k]), 'a_n': float(a[k]), 'v1': float(v1[k]), 'v2': float(v2[k]),
              'ratio': float(ratio[k])} for k in marks]
    increments = np.diff(a[marks])

    log_inc = np.log(increments)
    if np.ptp(log_inc) <= 1e-8:
        # equal decades up to quadrature rounding
        slope, r2 = 0.0, 1.0
    else:
        slope, _, r2 = calc_trend(np.arange(increments.size), log_inc)
    constants.update({'decade_slope': slope, 'decade_r2': r2})
    tail = ratio[marks[-2]:]
    tail = tail[np.isfinite(tail)]
    ratio_ok = bool(np.all(tail == 0) or np.all(np.diff(tail) <= 1e-12 * (1 + np.abs(tail[:-1]))))

    if r2 < MIN_R2:
        verdict = INCONCLUSIVE
        notes.append('unstable decade trend of a_n (R^2 = {:.4f})'.format(r2))
    elif slope >= -0.01:
        notes.append('a_n grows by a non-decaying amount per decade (log-slope {:.4f})'
                     .format(slope))
        if ratio_ok:
            verdict = HOLDS
        else:
            verdict = INCONCLUSIVE
            notes.append('ln(v2 v 1)/a_n is not decreasing over the last decade')
    else:
        q = math.exp(slope)
        limit = float(a[-1] + increments[-1] * q / (1.0 - q))
        constants['extrapolated_limit'] = limit
        verdict = INCONCLUSIVE
        notes.append('a_n appears to converge (extrapolated limit {:.6g}); '
                     'consistent with transience'.format(limit))
    logger.info('volume recurrence test: %s (a_n = %.6g at n = %.3g)', verdict, a[-1], n_max)
    return CriterionVerdict(RECURRENCE_ID, region, float('nan'), None, verdict, 'recurrent',
                            constants, notes, table)


@CRITERION.register_module
class RecurrenceVolume(CriterionBase):
    """Catalog entry wrapping :func:`recurrence_volume_test`."""

    ID = RECURRENCE_ID
    CONCLUSION = 'recurrent'
    REFERENCE_NOTE = 'volume growth of μ against the diffusion along rays'
    NEEDS_DENSITY = True

    def __init__(self, N_MAX=1e6, PER_DECADE=40, REGION=None):
        super(RecurrenceVolume, self).__init__(REGION)
        self.n_max = float(N_MAX)
        self.per_decade = int(PER_DECADE)

    def constants(self):
        return {'n_max': self.n_max, 'per_decade': self.per_decade}

    def evaluate(self, inputs):
        self.check_inputs(inputs)
        return recurrence_volume_test(inputs.cs, inputs.rho, inputs.bbar, self.n_max,
                                      self.per_decade)
