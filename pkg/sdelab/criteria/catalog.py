"""The criterion catalog: one registered class per inequality template.

Every class is built from its config block (UPPERCASE keys, ``TYPE`` = catalog
id) and evaluates to a :class:`CriterionVerdict` on a sampled grid.
"""
import logging
import math

import numpy as np

from ..calculus.operators import diffusion_root_batch, generator_drift, log_derivative_beta
from ..density.volume import _domain_radius, shell_integral, volume_profile
from ..dsl import parse_expr
from ..utils import Registry
from ..utils.errors import CriterionError, VolumeError
from ..utils.metrics import calc_trend
from .candidates import build_candidate, recurrence_candidate
from .grids import growth_check, region_from_cfg
from .margin import (combine_margins, evaluate_margin, lyapunov_terms, pointwise_margin,
                     summarize_margin)
from .verdict import FAILS, HOLDS, INCONCLUSIVE, CriterionVerdict

logger = logging.getLogger(__name__)

CRITERION = Registry('criterion')

# increments below this fraction of the running total count as converged
NEGLIGIBLE = 1e-10
MIN_R2 = 0.99


def _r2(X):
    return np.sum(X * X, axis=-1)


def _quad(A, X):
    return np.einsum('...i,...ij,...j->...', X, A, X)


def _dot(u, X):
    return np.einsum('...i,...i->...', u, X)


def _trace(A):
    return np.trace(A, axis1=-2, axis2=-1)


def _aux_expr(value, dim):
    if value is None:
        return None
    if isinstance(value, (int, float)):
        return float(value)
    return parse_expr(str(value), dim)


def _expr_values(expr, X):
    if expr is None:
        return np.zeros(X.shape[:-1])
    if isinstance(expr, float):
        return np.full(X.shape[:-1], expr)
    return expr.evaluate(X, strict=False)


class CriterionBase(object):
    """Shared plumbing: region defaults, input checks and the verdict rule."""

    ID = None
    CONCLUSION = ''
    REFERENCE_NOTE = ''
    NEEDS_DENSITY = False
    ONLY_DIM = None

    def __init__(self, REGION=None):
        self.region_cfg = REGION

    def constants(self):
        return {}

    def check_inputs(self, inputs):
        cs = inputs.cs
        if self.ONLY_DIM is not None and cs.dim != self.ONLY_DIM:
            raise CriterionError('{} is defined for d={} only, got d={}'.format(
                self.ID, self.ONLY_DIM, cs.dim))
        if self.NEEDS_DENSITY and inputs.rho is None:
            raise CriterionError('{}: missing input: density'.format(self.ID))

    def region(self, dim, r_min, r_max):
        return region_from_cfg(self.region_cfg, dim, r_min, r_max, path='{}.REGION'.format(self.ID))

    def evaluate(self, inputs):
        raise NotImplementedError

    def verdict(self, result, region, margin_fn=None, growth=None, notes=None, limit_ok=True,
                trend_table=None):
        """Map a sampled margin to a verdict.

        Holds when every evaluated point is nonnegative up to rounding; a failed
        growth check or limit condition downgrades that to inconclusive.
        """
        notes = list(notes or [])
        growth_table = None
        if growth is not None:
            growth_table, growing = growth
            if not growing:
                notes.append('candidate infima over spheres do not increase on the sampled radii')
        else:
            growing = True
        if result.skipped:
            notes.append('{} of {} grid points skipped: margin undefined'.format(
                result.skipped, len(region)))
        if result.witness is None:
            verdict = INCONCLUSIVE
            notes.append('margin undefined on the whole grid')
        elif result.nonnegative:
            verdict = HOLDS if growing and limit_ok else INCONCLUSIVE
        else:
            verdict = FAILS
        out = CriterionVerdict(self.ID, region.description, result.min_margin, result.witness,
                               verdict, self.CONCLUSION, self.constants(), notes, trend_table,
                               growth_table, result.skipped, margin_fn)
        logger.info('%s: %s (min margin %.3e)', self.ID, verdict, result.min_margin)
        return out


class LyapunovTemplate(CriterionBase):
    """Generator applied to a candidate against a right-hand side."""

    MODE = 'L'
    SENSE = 'le'
    GROWTH = True

    def rhs(self, candidate):
        raise NotImplementedError

    def candidate(self, dim):
        raise NotImplementedError

    def bounds(self):
        return 0.0, 10.0

    def evaluate(self, inputs):
        self.check_inputs(inputs)
        cs = inputs.cs
        candidate = self.candidate(cs.dim)
        r_min, r_max = self.bounds()
        region = self.region(cs.dim, r_min, r_max)
        terms = lyapunov_terms(cs, inputs.rho, candidate, self.MODE, self.rhs(candidate))
        result = evaluate_margin(region.points, terms, self.SENSE)
        growth = None
        if self.GROWTH:
            growth = growth_check(candidate, cs.dim, max(r_min, 1.0), r_max)
        return self.verdict(result, region, pointwise_margin(terms, self.SENSE), growth)


@CRITERION.register_module
class LyapunovL(LyapunovTemplate):
    """Lφ ≤ Mφ on R^d with φ → ∞."""

    ID = 'LYAPUNOV_L'
    CONCLUSION = 'non-explosive; E_x[φ(X_t)] ≤ e^{Mt} φ(x)'
    REFERENCE_NOTE = 'Lyapunov function condition'

    def __init__(self, M=1.0, CANDIDATE='norm2(x)+1', R_MAX=10.0, REGION=None):
        super(LyapunovL, self).__init__(REGION)
        self.m = float(M)
        self.candidate_cfg = CANDIDATE
        self.r_max = float(R_MAX)

    def constants(self):
        return {'M': self.m}

    def candidate(self, dim):
        return build_candidate(self.candidate_cfg, dim)

    def rhs(self, candidate):
        m = self.m
        return lambda X: m * candidate.value(X, strict=False)

    def bounds(self):
        return 0.0, self.r_max


@CRITERION.register_module
class LyapunovExterior(LyapunovTemplate):
    """Lg ≤ Mg outside the closed ball of radius N₀, g → ∞."""

    ID = 'LYAPUNOV_EXTERIOR'
    CONCLUSION = 'non-explosive'
    REFERENCE_NOTE = 'exterior Lyapunov condition'

    def __init__(self, M=1.0, N0=1.0, CANDIDATE=None, R_MAX=40.0, REGION=None):
        super(LyapunovExterior, self).__init__(REGION)
        self.m = float(M)
        self.n0 = float(N0)
        self.candidate_cfg = CANDIDATE
        self.r_max = float(R_MAX)

    def constants(self):
        return {'M': self.m, 'N0': self.n0}

    def candidate(self, dim):
        return build_candidate(self.candidate_cfg, dim, default=recurrence_candidate(self.n0, dim))

    def rhs(self, candidate):
        m = self.m
        return lambda X: m * candidate.value(X, strict=False)

    def bounds(self):
        return self.n0 + 0.5, self.r_max


@CRITERION.register_module
class RecurrenceSupersolution(LyapunovTemplate):
    """Lg ≤ 0 outside the closed ball of radius N₀, g → ∞."""

    ID = 'RECURRENCE_SUPERSOLUTION'
    CONCLUSION = 'recurrent'
    REFERENCE_NOTE = 'superharmonic function outside a ball'

    def __init__(self, N0=1.0, CANDIDATE=None, R_MAX=40.0, REGION=None):
        super(RecurrenceSupersolution, self).__init__(REGION)
        self.n0 = float(N0)
        self.candidate_cfg = CANDIDATE
        self.r_max = float(R_MAX)

    def constants(self):
        return {'N0': self.n0}

    def candidate(self, dim):
        return build_candidate(self.candidate_cfg, dim, default=recurrence_candidate(self.n0, dim))

    def rhs(self, candidate):
        return 0.0

    def bounds(self):
        return self.n0 + 0.5, self.r_max


@CRITERION.register_module
class InvarianceLyapunov(LyapunovTemplate):
    """L′u ≤ αu with u → ∞ (dual), or Lu ≤ αu (conservative)."""

    ID = 'INVARIANCE_LYAPUNOV'
    REFERENCE_NOTE = 'Lyapunov condition for the dual or the primal generator'
    CONCLUSIONS = {
        'dual': 'μ is invariant for the semigroup; the dual semigroup is conservative',
        'conservative': 'the semigroup is conservative',
    }

    def __init__(self, ALPHA=1.0, CANDIDATE='norm2(x)+1', VARIANT='dual', R_MAX=10.0,
                 REGION=None):
        super(InvarianceLyapunov, self).__init__(REGION)
        if VARIANT not in self.CONCLUSIONS:
            raise CriterionError('{}: unknown VARIANT {!r}'.format(self.ID, VARIANT))
        self.alpha = float(ALPHA)
        self.candidate_cfg = CANDIDATE
        self.variant = VARIANT
        self.r_max = float(R_MAX)
        self.MODE = 'L_adjoint' if VARIANT == 'dual' else 'L'
        self.NEEDS_DENSITY = VARIANT == 'dual'
        self.CONCLUSION = self.CONCLUSIONS[VARIANT]

    def constants(self):
        return {'ALPHA': self.alpha, 'VARIANT': self.variant}

    def candidate(self, dim):
        return build_candidate(self.candidate_cfg, dim)

    def rhs(self, candidate):
        alpha = self.alpha
        return lambda X: alpha * candidate.value(X, strict=False)

    def bounds(self):
        return 0.0, self.r_max


@CRITERION.register_module
class NonInvariance(LyapunovTemplate):
    """A bounded, nonnegative, nonzero u with L′u ≥ αu (or Lu ≥ αu).

    Nonnegativity of u is part of the margin: where u < 0 the margin is
    min(L′u − αu, u).
    """

    ID = 'NON_INVARIANCE'
    REFERENCE_NOTE = 'bounded nonnegative subsolution'
    GROWTH = False
    SENSE = 'ge'
    CONCLUSIONS = {
        'L_adjoint': 'μ is not invariant; the dual semigroup is not conservative',
        'L': 'the semigroup is not conservative',
    }

    def __init__(self, ALPHA=1.0, CANDIDATE=None, MODE='L_adjoint', R_MAX=10.0, REGION=None):
        super(NonInvariance, self).__init__(REGION)
        if MODE not in self.CONCLUSIONS:
            raise CriterionError('{}: unknown MODE {!r}'.format(self.ID, MODE))
        self.alpha = float(ALPHA)
        self.candidate_cfg = CANDIDATE
        self.MODE = MODE
        self.NEEDS_DENSITY = MODE == 'L_adjoint'
        self.CONCLUSION = self.CONCLUSIONS[MODE]
        self.r_max = float(R_MAX)

    def constants(self):
        return {'ALPHA': self.alpha, 'MODE': self.MODE}

    def candidate(self, dim):
        return build_candidate(self.candidate_cfg, dim)

    def rhs(self, candidate):
        alpha = self.alpha
        return lambda X: alpha * candidate.value(X, strict=False)

    def bounds(self):
        return 0.0, self.r_max

    def evaluate(self, inputs):
        self.check_inputs(inputs)
        cs = inputs.cs
        u = self.candidate(cs.dim)
        region = self.region(cs.dim, 0.0, self.r_max)
        terms = lyapunov_terms(cs, inputs.rho, u, self.MODE, self.rhs(u))
        main = evaluate_margin(region.points, terms, 'ge')
        values = u.value(region.points, strict=False)
        margin = np.where(values >= 0, main.margin, np.minimum(main.margin, values))
        result = summarize_margin(region.points, margin, main.scale, log=False)
        inequality = pointwise_margin(terms, 'ge')

        def margin_fn(X):
            m = inequality(X)
            v = u.value(np.atleast_2d(X), strict=False)
            return np.where(v >= 0, m, np.minimum(m, v))

        finite = values[np.isfinite(values)]
        notes = []
        if finite.size:
            notes.append('sup u on grid {:.6g}'.format(float(finite.max())))
            if not finite.max() > 0:
                notes.append('u vanishes on the whole grid')
        out = self.verdict(result, region, margin_fn, notes=notes,
                           limit_ok=bool(finite.size and finite.max() > 0))
        return out


class GrowthTemplate(CriterionBase):
    """Pointwise coefficient inequalities that need no candidate."""

    SENSE = 'le'

    def terms(self, inputs):
        raise NotImplementedError

    def bounds(self):
        raise NotImplementedError

    def extra(self, inputs, region, result):
        """Limit-type add-ons; returns (notes, limit_ok, trend_table)."""
        return [], True, None

    def evaluate(self, inputs):
        self.check_inputs(inputs)
        cs = inputs.cs
        r_min, r_max = self.bounds()
        region = self.region(cs.dim, r_min, r_max)
        terms = self.terms(inputs)
        result = evaluate_margin(region.points, terms, self.SENSE)
        notes, limit_ok, table = self.extra(inputs, region, result)
        return self.verdict(result, region, pointwise_margin(terms, self.SENSE), notes=notes,
                            limit_ok=limit_ok, trend_table=table)


def _radial_terms(cs, drift):
    """−⟨Ax,x⟩/‖x‖², ½ trA and ⟨b,x⟩ at the points X."""
    def fn(X):
        A = cs.matrix_A(X, strict=False)
        r2 = _r2(X)
        return [-_quad(A, X) / r2, 0.5 * _trace(A), _dot(drift(X), X)]

    return fn


@CRITERION.register_module
class GrowthNonexplosion(GrowthTemplate):
    """−⟨Ax,x⟩/‖x‖² + ½trA + ⟨G,x⟩ ≤ M‖x‖²(ln‖x‖ + 1) outside B̄_{N₀}."""

    ID = 'GROWTH_NONEXPLOSION'
    CONCLUSION = 'non-explosive'
    REFERENCE_NOTE = 'explicit growth condition'

    def __init__(self, M=1.0, N0=1.0, R_MAX=40.0, REGION=None):
        super(GrowthNonexplosion, self).__init__(REGION)
        self.m = float(M)
        self.n0 = float(N0)
        self.r_max = float(R_MAX)

    def constants(self):
        return {'M': self.m, 'N0': self.n0}

    def bounds(self):
        return self.n0 + 0.5, self.r_max

    def terms(self, inputs):
        cs = inputs.cs
        lhs = _radial_terms(cs, lambda X: cs.drift(X, strict=False))
        m = self.m

        def fn(X):
            r2 = _r2(X)
            return lhs(X), [m * r2 * (0.5 * np.log(r2) + 1.0)]

        return fn


@CRITERION.register_module
class RecurrenceGrowth(GrowthNonexplosion):
    """−⟨Ax,x⟩/‖x‖² + ½trA + ⟨G,x⟩ ≤ 0 outside B̄_{N₀}."""

    ID = 'RECURRENCE_GROWTH'
    CONCLUSION = 'recurrent'
    REFERENCE_NOTE = 'explicit growth condition with zero right-hand side'

    def __init__(self, N0=1.0, R_MAX=40.0, REGION=None):
        super(RecurrenceGrowth, self).__init__(0.0, N0, R_MAX, REGION)

    def constants(self):
        return {'N0': self.n0}


@CRITERION.register_module
class Eigengap2D(GrowthTemplate):
    """(λ_max − λ_min)(A)/2 + ⟨G,x⟩ against a variant-dependent right-hand side, d = 2."""

    ID = 'EIGENGAP_2D'
    ONLY_DIM = 2
    REFERENCE_NOTE = 'eigenvalue gap condition in the plane'
    CONCLUSIONS = {
        'nonexplosion': 'non-explosive',
        'recurrence': 'recurrent',
        'ergodic': 'recurrent with an ergodic drift toward the origin',
    }

    def __init__(self, M=0.0, N0=1.0, VARIANT='nonexplosion', R_MAX=40.0, REGION=None):
        super(Eigengap2D, self).__init__(REGION)
        if VARIANT not in self.CONCLUSIONS:
            raise CriterionError('{}: unknown VARIANT {!r}'.format(self.ID, VARIANT))
        self.m = float(M)
        self.n0 = float(N0)
        self.variant = VARIANT
        self.r_max = float(R_MAX)
        self.CONCLUSION = self.CONCLUSIONS[VARIANT]

    def constants(self):
        return {'M': self.m, 'N0': self.n0, 'VARIANT': self.variant}

    def bounds(self):
        return self.n0 + 0.5, self.r_max

    def terms(self, inputs):
        cs = inputs.cs
        m, variant = self.m, self.variant

        def fn(X):
            A = cs.matrix_A(X, strict=False)
            gap = np.hypot(A[..., 0, 0] - A[..., 1, 1], 2.0 * A[..., 0, 1])
            r2 = _r2(X)
            if variant == 'nonexplosion':
                rhs = m * r2 * (0.5 * np.log(r2) + 1.0)
            elif variant == 'recurrence':
                rhs = np.zeros_like(r2)
            else:
                rhs = -m * r2
            return [0.5 * gap, _dot(cs.drift(X, strict=False), X)], [rhs]

        return fn


@CRITERION.register_module
class LinearGrowthMoment(GrowthTemplate):
    """Linear growth of σ and g, separately or jointly, up to integrable slack."""

    ID = 'LINEAR_GROWTH_MOMENT'
    REFERENCE_NOTE = 'linear growth bounds on σ and g'
    CONCLUSIONS = {
        'separate': 'non-explosive; E_x[sup_{s≤t} ‖X_s‖] ≤ D e^{Et}',
        'joint': 'non-explosive; E_x[sup_{s≤t} ‖X_s‖²] ≤ D e^{Et}',
    }

    def __init__(self, M=1.0, VARIANT='separate', H1=None, H2=None, R_MAX=10.0, REGION=None):
        super(LinearGrowthMoment, self).__init__(REGION)
        if VARIANT not in self.CONCLUSIONS:
            raise CriterionError('{}: unknown VARIANT {!r}'.format(self.ID, VARIANT))
        self.m = float(M)
        self.variant = VARIANT
        self.h1_cfg, self.h2_cfg = H1, H2
        self.r_max = float(R_MAX)
        self.CONCLUSION = self.CONCLUSIONS[VARIANT]

    def constants(self):
        return {'M': self.m, 'VARIANT': self.variant}

    def bounds(self):
        return 0.0, self.r_max

    def _parts(self, inputs):
        cs = inputs.cs
        h1 = _aux_expr(self.h1_cfg, cs.dim)
        h2 = _aux_expr(self.h2_cfg, cs.dim)
        m = self.m

        def sigma_max(X):
            flat = X.reshape(-1, cs.dim)
            root, _ = diffusion_root_batch(cs.matrix_A(flat, strict=False))
            return np.max(np.abs(root), axis=(-1, -2)).reshape(X.shape[:-1])

        def g_max(X):
            return np.max(np.abs(cs.drift(X, strict=False)), axis=-1)

        if self.variant == 'joint':
            def joint(X):
                r = np.sqrt(_r2(X))
                return ([sigma_max(X), g_max(X)],
                        [np.abs(_expr_values(h1, X)), m * (r + 1.0)])
            return [joint]

        def sigma(X):
            r = np.sqrt(_r2(X))
            return [sigma_max(X)], [np.abs(_expr_values(h1, X)), m * (np.sqrt(r) + 1.0)]

        def drift(X):
            r = np.sqrt(_r2(X))
            return [g_max(X)], [np.abs(_expr_values(h2, X)), m * (r + 1.0)]

        return [sigma, drift]

    def evaluate(self, inputs):
        self.check_inputs(inputs)
        cs = inputs.cs
        region = self.region(cs.dim, 0.0, self.r_max)
        parts = self._parts(inputs)
        results = [evaluate_margin(region.points, t, 'le', log=False) for t in parts]
        result = combine_margins(results)
        fns = [pointwise_margin(t, 'le') for t in parts]

        def margin_fn(X):
            return np.min(np.stack([f(X) for f in fns]), axis=0)

        return self.verdict(result, region, margin_fn)


@CRITERION.register_module
class InvarianceLogGrowth(GrowthTemplate):
    """−⟨Ax,x⟩/(‖x‖²+1) + ½trA + ⟨b,x⟩ ≤ M(‖x‖²+1)(ln(‖x‖²+1) + 1).

    b = 2β − G for the dual variant and G for the conservative one.
    """

    ID = 'INVARIANCE_LOG_GROWTH'
    REFERENCE_NOTE = 'logarithmic growth condition'
    CONCLUSIONS = InvarianceLyapunov.CONCLUSIONS

    def __init__(self, M=1.0, VARIANT='dual', R_MAX=10.0, REGION=None):
        super(InvarianceLogGrowth, self).__init__(REGION)
        if VARIANT not in self.CONCLUSIONS:
            raise CriterionError('{}: unknown VARIANT {!r}'.format(self.ID, VARIANT))
        self.m = float(M)
        self.variant = VARIANT
        self.r_max = float(R_MAX)
        self.NEEDS_DENSITY = VARIANT == 'dual'
        self.CONCLUSION = self.CONCLUSIONS[VARIANT]

    def constants(self):
        return {'M': self.m, 'VARIANT': self.variant}

    def bounds(self):
        return 0.0, self.r_max

    def terms(self, inputs):
        cs = inputs.cs
        drift = generator_drift(cs, inputs.rho, 'L_adjoint' if self.variant == 'dual' else 'L')
        m = self.m

        def fn(X):
            A = cs.matrix_A(X, strict=False)
            s = _r2(X) + 1.0
            lhs = [-_quad(A, X) / s, 0.5 * _trace(A), _dot(drift.value(X, strict=False), X)]
            return lhs, [m * s * (np.log(s) + 1.0)]

        return fn


@CRITERION.register_module
class ErgodicDrift(GrowthTemplate):
    """Drift toward the origin: Lg ≤ −c, or its explicit specializations."""

    ID = 'ERGODIC_DRIFT'
    CONCLUSION = 'positive recurrent; the invariant measure is unique and ergodic'
    REFERENCE_NOTE = 'Lyapunov drift condition'
    VARIANTS = ('generic', 'log', 'quadratic')

    def __init__(self, VARIANT='log', M=1.0, C=1.0, N0=1.0, CANDIDATE=None, R_MAX=40.0,
                 REGION=None):
        super(ErgodicDrift, self).__init__(REGION)
        if VARIANT not in self.VARIANTS:
            raise CriterionError('{}: unknown VARIANT {!r}'.format(self.ID, VARIANT))
        self.variant = VARIANT
        self.m = float(M)
        self.c = float(C)
        self.n0 = float(N0)
        self.candidate_cfg = CANDIDATE
        self.r_max = float(R_MAX)

    def constants(self):
        if self.variant == 'generic':
            return {'C': self.c, 'N0': self.n0, 'VARIANT': self.variant}
        return {'M': self.m, 'N0': self.n0, 'VARIANT': self.variant}

    def bounds(self):
        return self.n0 + 0.5, self.r_max

    def terms(self, inputs):
        cs = inputs.cs
        m = self.m
        if self.variant == 'log':
            lhs = _radial_terms(cs, lambda X: cs.drift(X, strict=False))
            return lambda X: (lhs(X), [-m * _r2(X)])

        def quadratic(X):
            A = cs.matrix_A(X, strict=False)
            return [0.5 * _trace(A), _dot(cs.drift(X, strict=False), X)], [np.full(X.shape[:-1], -m)]

        return quadratic

    def evaluate(self, inputs):
        if self.variant != 'generic':
            return super(ErgodicDrift, self).evaluate(inputs)
        self.check_inputs(inputs)
        cs = inputs.cs
        g = build_candidate(self.candidate_cfg, cs.dim, default=recurrence_candidate(self.n0, cs.dim))
        r_min, r_max = self.bounds()
        region = self.region(cs.dim, r_min, r_max)
        terms = lyapunov_terms(cs, inputs.rho, g, 'L', -self.c)
        result = evaluate_margin(region.points, terms, 'le')
        return self.verdict(result, region, pointwise_margin(terms, 'le'),
                            growth_check(g, cs.dim, max(r_min, 1.0), r_max))


def _ladder(start, stop, ratio):
    radii = []
    r = start
    while r <= stop * (1 + 1e-12):
        radii.append(r)
        r *= ratio
    return radii


def converging_increments(radii, totals):
    """Classify cumulative integrals over a geometric ladder.

    Returns (converged, notes, table, extrapolated limit or None).
    """
    increments = [totals[0]] + [b - a for a, b in zip(totals, totals[1:])]
    table = [{'radius': float(r), 'integral': float(t), 'increment': float(d)}
             for r, t, d in zip(radii, totals, increments)]
    if not all(math.isfinite(t) for t in totals):
        return False, ['integral is not finite on the ladder'], table, None
    last = abs(increments[-1])
    if last <= NEGLIGIBLE * max(abs(totals[-1]), 1e-300):
        return True, ['last increment negligible'], table, float(totals[-1])
    tail = np.array([abs(d) for d in increments[1:]])
    if tail.size < 3 or np.any(tail <= 0):
        return False, ['too few positive increments for a trend'], table, None
    slope, _, r2 = calc_trend(np.arange(tail.size), np.log(tail))
    if r2 < MIN_R2:
        return False, ['unstable trend (R^2 = {:.4f})'.format(r2)], table, None
    if slope >= -0.01:
        return False, ['increments do not decay (log-slope {:.4f})'.format(slope)], table, None
    q = math.exp(slope)
    limit = float(totals[-1] + increments[-1] * q / (1.0 - q))
    return True, ['increments decay geometrically (ratio {:.4f}); extrapolated limit {:.6g}'
                  .format(q, limit)], table, limit


@CRITERION.register_module
class IntegrableCoefficients(CriterionBase):
    """a_ij and g_i − β_i in L¹(μ), judged from shell integrals on a radius ladder."""

    ID = 'INTEGRABLE_COEFFS'
    CONCLUSION = 'μ is invariant for the semigroup; the dual semigroup is conservative'
    REFERENCE_NOTE = 'integrability of the coefficients against μ'
    NEEDS_DENSITY = True

    def __init__(self, R_START=1.0, R_MAX=32.0, RATIO=2.0, REGION=None):
        super(IntegrableCoefficients, self).__init__(REGION)
        self.r_start = float(R_START)
        self.r_max = float(R_MAX)
        self.ratio = float(RATIO)

    def constants(self):
        return {'R_START': self.r_start, 'R_MAX': self.r_max, 'RATIO': self.ratio}

    def evaluate(self, inputs):
        self.check_inputs(inputs)
        cs, rho = inputs.cs, inputs.rho
        if cs.dim > 3:
            raise CriterionError('{}: shell integrals support d <= 3'.format(self.ID))
        stop = min(self.r_max, _domain_radius(rho))
        radii = _ladder(self.r_start, stop, self.ratio)
        if not radii:
            raise CriterionError('{}: empty radius ladder'.format(self.ID))
        B = cs.drift_field - log_derivative_beta(cs, rho)

        def density(X):
            r = rho.value(X, strict=False)
            with np.errstate(all='ignore'):
                total = (np.sum(np.abs(cs.matrix_A(X, strict=False)), axis=(-1, -2))
                         + np.sum(np.abs(B.value(X, strict=False)), axis=-1))
                # ρ underflow contributes nothing
                return np.where(r > 0, total * r, 0.0)

        totals = []
        prev = 0.0
        acc = []
        for r in radii:
            acc.append(shell_integral(density, cs.dim, prev, r))
            totals.append(math.fsum(acc))
            prev = r
        converged, notes, table, limit = converging_increments(radii, totals)
        verdict = HOLDS if converged else INCONCLUSIVE
        out = CriterionVerdict(self.ID, {'type': 'ladder', 'radii': [float(r) for r in radii]},
                               float('nan'), None, verdict, self.CONCLUSION, self.constants(),
                               notes, table)
        if limit is not None:
            out.constants['extrapolated_limit'] = limit
        logger.info('%s: %s', self.ID, verdict)
        return out


@CRITERION.register_module
class VolumeConservative(GrowthTemplate):
    """Coefficient bounds plus annulus volume growth of μ."""

    ID = 'VOLUME_CONSERVATIVE'
    CONCLUSION = 'the semigroup is conservative (non-explosive)'
    REFERENCE_NOTE = 'volume growth condition'
    NEEDS_DENSITY = True
    VARIANTS = ('polynomial', 'gaussian')

    def __init__(self, M=1.0, C=1.0, VARIANT='polynomial', N0=1.0, R_MAX=20.0,
                 ANNULI=(1.0, 2.0, 4.0, 8.0), REGION=None):
        super(VolumeConservative, self).__init__(REGION)
        if VARIANT not in self.VARIANTS:
            raise CriterionError('{}: unknown VARIANT {!r}'.format(self.ID, VARIANT))
        self.m = float(M)
        self.c = float(C)
        self.variant = VARIANT
        self.n0 = float(N0)
        self.r_max = float(R_MAX)
        self.annuli = [float(n) for n in ANNULI]

    def constants(self):
        return {'M': self.m, 'C': self.c, 'VARIANT': self.variant}

    def bounds(self):
        return self.n0 + 0.5, self.r_max

    def terms(self, inputs):
        cs = inputs.cs
        beta = log_derivative_beta(cs, inputs.rho)
        m, gaussian = self.m, self.variant == 'gaussian'

        def fn(X):
            A = cs.matrix_A(X, strict=False)
            b = cs.drift(X, strict=False) - beta.value(X, strict=False)
            r2 = _r2(X)
            if gaussian:
                return [_quad(A, X), np.abs(_dot(b, X))], [m * r2]
            return [_quad(A, X) / r2, np.abs(_dot(b, X))], [m * r2 * np.log(np.sqrt(r2) + 1.0)]

        return fn

    def bound(self, n):
        if self.variant == 'gaussian':
            return math.exp(min(self.c * (4.0 * n) ** 2, 700.0))
        return (4.0 * n) ** self.c

    def extra(self, inputs, region, result):
        rho = inputs.rho
        limit = _domain_radius(rho)
        usable = [n for n in self.annuli if 4.0 * n <= limit * (1 + 1e-12)]
        notes = []
        if len(usable) < len(self.annuli):
            notes.append('annuli beyond the density domain dropped')
        if not usable:
            notes.append('no annulus fits the density domain')
            return notes, False, []
        try:
            profile = volume_profile(rho, [4.0 * usable[-1]], annulus_radii=usable)
        except VolumeError as exc:
            return notes + [str(exc)], False, []
        table = []
        ok = True
        for row in profile.annuli:
            bound = self.bound(row['n'])
            within = row['mass'] <= bound
            ok = ok and within
            table.append({'n': row['n'], 'mass': row['mass'], 'bound': bound, 'ok': within})
        if not ok:
            notes.append('annulus mass exceeds the volume bound on the sampled ladder')
        return notes, ok, table


def lg_formula(cs, X):
    """−2⟨Ax,x⟩/‖x‖⁴ + trA/‖x‖² + 2⟨G,x⟩/‖x‖², which is L applied to ln‖x‖² + 2."""
    A = cs.matrix_A(X, strict=False)
    r2 = _r2(X)
    return -2.0 * _quad(A, X) / r2 ** 2 + _trace(A) / r2 + 2.0 * _dot(cs.drift(X, strict=False), X) / r2
