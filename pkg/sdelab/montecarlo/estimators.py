"""Estimators over path ensembles: moments, exit laws, occupation and time averages."""
import logging
import math
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
from scipy.integrate import cumulative_trapezoid
from scipy.stats import kstest

from ..calculus.fields import ClosedFormField
from ..calculus.operators import as_field, default_rule
from ..calculus.quadrature import QuadratureRule, integrate
from ..criteria.grids import sphere_points
from ..utils.errors import ErgodicError, NotNormalizableError, SimulationError
from ..utils.metrics import DataLogger, calc_wilson_interval
from .simulate import ALIVE, DEGENERATE, DOMAIN, EXITED, simulate_ensemble

logger = logging.getLogger(__name__)

KS_COEFFICIENT = 1.63


@dataclass
class EstimatorResult:
    """Mean over paths; ``stderr`` is the sample std over √paths."""
    estimate: float
    stderr: float
    paths: int
    rule: str = 'mean over paths'

    @classmethod
    def from_values(cls, values, rule='mean over paths'):
        values = np.asarray(values, dtype=float).reshape(-1)
        stat = DataLogger()
        stat.update(values)
        return cls(float(stat.avg), float(stat.stderr), int(stat.cnt), rule)

    def to_dict(self):
        return {'estimate': self.estimate, 'stderr': self.stderr, 'paths': self.paths,
                'rule': self.rule}


def _usable(ens):
    """Paths that did not stop on an undefined coefficient."""
    keep = (ens.status != DEGENERATE) & (ens.status != DOMAIN)
    dropped = int((~keep).sum())
    return keep, dropped


@dataclass
class MomentCurve:
    rows: List[dict]
    notes: List[str] = field(default_factory=list)

    @property
    def within_bound(self):
        ratios = [r['ratio'] for r in self.rows if r.get('ratio') is not None]
        return all(r <= 1.0 for r in ratios)

    def csv_header(self):
        return ['t', 'estimate', 'stderr', 'paths', 'bound', 'ratio']

    def csv_rows(self):
        for r in self.rows:
            yield [r['t'], r['estimate'], r['stderr'], r['paths'],
                   r['bound'] if r['bound'] is not None else float('nan'),
                   r['ratio'] if r['ratio'] is not None else float('nan')]

    def to_dict(self):
        return {'rows': self.rows, 'within_bound': self.within_bound, 'notes': self.notes}


def moment_curve(ens, phi, times, M=None, label='phi'):
    """E[φ(X_{t∧σ_N})] at each time, with the ratio against e^{Mt}φ(x₀) when M is given."""
    phi = as_field(phi, ens.x0.size)
    keep, dropped = _usable(ens)
    notes = []
    if dropped:
        notes.append('{} paths stopped on undefined coefficients were excluded'.format(dropped))
    phi0 = float(phi.value(ens.x0[None, :], strict=False)[0])
    rows = []
    for t in times:
        idx = ens.time_index(t)
        values = phi.value(ens.snapshots[keep, idx], strict=False)
        est = EstimatorResult.from_values(values, 'mean of {} at t'.format(label))
        bound = math.exp(M * t) * phi0 if M is not None else None
        ratio = est.estimate / bound if bound else None
        rows.append({'t': float(ens.times[idx]), 'estimate': est.estimate,
                     'stderr': est.stderr, 'paths': est.paths, 'bound': bound,
                     'ratio': ratio})
    return MomentCurve(rows, notes)


def exit_probability_bound(phi, x0, M, t, radius, n_angular=None):
    """e^{Mt} φ(x₀) / inf over the sphere of radius n of φ (infimum sampled)."""
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    phi = as_field(phi, x0.size)
    dirs = sphere_points(x0.size, n_angular or {1: 2, 2: 720, 3: 64}.get(x0.size, 8))
    inf = float(np.nanmin(phi.value(radius * dirs, strict=False)))
    if not inf > 0:
        raise SimulationError('φ is not positive on the sphere of radius {}'.format(radius))
    return math.exp(M * t) * float(phi.value(x0[None, :], strict=False)[0]) / inf


@dataclass
class ExitStatistics:
    rows: List[dict]
    horizon: float
    within_bound: Optional[bool] = None
    notes: List[str] = field(default_factory=list)

    def csv_header(self):
        return ['n', 'exited', 'paths', 'probability', 'ci_low', 'ci_high', 'median_exit',
                'mean_exit', 'censored', 'absorbed_fraction', 'bound']

    def csv_rows(self):
        for r in self.rows:
            yield [r['n'], r['exited'], r['paths'], r['probability'], r['ci_low'], r['ci_high'],
                   r['median_exit'], r['mean_exit'], r['censored'], r['absorbed_fraction'],
                   r['bound'] if r['bound'] is not None else float('nan')]

    def to_dict(self):
        return {'rows': self.rows, 'horizon': self.horizon, 'within_bound': self.within_bound,
                'notes': self.notes}


def exit_statistics(ens, radii=None, bounds=None, confidence=0.95):
    """P(σ_n ≤ T) with Wilson intervals, exit-time medians and censored counts per radius.

    ``bounds`` maps radius to an upper bound on P(σ_n ≤ T), e.g. from
    :func:`exit_probability_bound`.
    """
    ladder = list(ens.radii)
    radii = ladder if radii is None else sorted(float(r) for r in radii)
    keep, dropped = _usable(ens)
    paths = int(keep.sum())
    absorbed = float(np.mean(ens.status[keep] == EXITED)) if paths else float('nan')
    rows = []
    previous = None
    notes = []
    if dropped:
        notes.append('{} paths stopped on undefined coefficients were excluded'.format(dropped))
    for n in radii:
        if n not in ladder:
            raise SimulationError('radius {} is not on the simulated ladder {}'.format(n, ladder))
        sigma = ens.exit_times[keep, ladder.index(n)]
        hit = np.isfinite(sigma)
        exited = int(hit.sum())
        # σ_n is nondecreasing in n along every path
        assert previous is None or exited <= previous
        previous = exited
        low, high = calc_wilson_interval(exited, paths, confidence)
        bound = None if bounds is None else bounds.get(n)
        rows.append({
            'n': n, 'exited': exited, 'paths': paths,
            'probability': exited / paths if paths else float('nan'),
            'ci_low': low, 'ci_high': high,
            'median_exit': float(np.median(sigma[hit])) if exited else float('nan'),
            'mean_exit': float(np.mean(sigma[hit])) if exited else float('nan'),
            'censored': paths - exited,
            'absorbed_fraction': absorbed,
            'bound': bound,
        })
    within = None
    if bounds is not None:
        within = all(r['probability'] <= r['bound'] for r in rows if r['bound'] is not None)
    return ExitStatistics(rows, ens.config.horizon, within, notes)


@dataclass
class KrylovResult:
    starts: List[List[float]]
    estimates: List[EstimatorResult]
    sup: float
    t: float
    lq_norm: Optional[float] = None
    q: Optional[float] = None
    refined: Optional[List[EstimatorResult]] = None
    flagged: bool = False
    notes: List[str] = field(default_factory=list)

    def to_dict(self):
        out = {'starts': self.starts, 'estimates': [e.to_dict() for e in self.estimates],
               'sup': self.sup, 't': self.t, 'lq_norm': self.lq_norm, 'q': self.q,
               'flagged': self.flagged, 'notes': self.notes}
        if self.refined is not None:
            out['refined'] = [e.to_dict() for e in self.refined]
        if self.lq_norm:
            out['bound_shape'] = 'sup <= e^t * c * {:.6g}'.format(self.lq_norm)
        return out


def _abs_field(f, dim):
    f = as_field(f, dim)
    return ClosedFormField(dim, lambda X: np.abs(f.value(X, strict=False)),
                           name='|{}|'.format(f.describe()))


def _occupation(cs, f, t, starts, cfg):
    cfg = cfg.replace(horizon=t)
    out = []
    for x in starts:
        ens = simulate_ensemble(cs, x, cfg, functionals={'f': f})
        keep, _ = _usable(ens)
        idx = ens.time_index(t)
        out.append(EstimatorResult.from_values(ens.integrals['f'][keep, idx],
                                               'mean of the time integral of |f|'))
    return out


def krylov_functional(cs, f, t, starts, cfg, rho=None, q=2.0, rule=None, refine=None,
                      tolerance=0.05):
    """sup over ``starts`` of E_x[∫₀ᵗ |f|(X_s) ds] with left-endpoint sums.

    With ``rho`` the norm ‖f‖_{L^q(μ)} is added by quadrature. ``refine=k``
    repeats every estimate at Δ/k and flags non-integrable accumulation when
    the relative change exceeds ``tolerance`` or an estimate is not finite.
    """
    starts = [np.asarray(x, dtype=float).reshape(-1) for x in starts]
    f_abs = _abs_field(f, cs.dim)
    estimates = _occupation(cs, f_abs, t, starts, cfg)
    values = [e.estimate for e in estimates]
    result = KrylovResult([x.tolist() for x in starts], estimates,
                          float(np.max(values)) if all(np.isfinite(values)) else float('nan'), t,
                          q=q)
    if rho is not None:
        rule = rule or default_rule(cs.dim)
        result.lq_norm = float(integrate(
            lambda X: np.abs(f_abs.value(X)) ** q * rho.value(X, strict=False), rule)) ** (1.0 / q)
    if not np.isfinite(result.sup):
        result.flagged = True
        result.notes.append('non-integrable accumulation: estimate is not finite')
    if refine:
        fine = cfg.replace(dt=cfg.dt / refine)
        result.refined = _occupation(cs, f_abs, t, starts, fine)
        for coarse, finer in zip(estimates, result.refined):
            scale = max(abs(coarse.estimate), 1e-300)
            if not np.isfinite(finer.estimate) or \
                    abs(finer.estimate - coarse.estimate) / scale > tolerance:
                result.flagged = True
                result.notes.append('non-integrable accumulation: estimate moves from {:.6g} '
                                    'to {:.6g} under step refinement'.format(coarse.estimate,
                                                                             finer.estimate))
                break
    logger.info('Krylov functional at t=%g: sup %.6g over %d starts%s', t, result.sup,
                len(starts), ' (flagged)' if result.flagged else '')
    return result


@dataclass
class ErgodicCurve:
    times: np.ndarray
    per_path: np.ndarray
    mean: np.ndarray
    terminal: EstimatorResult
    converged: bool
    burn_in: float
    exited: int = 0
    notes: List[str] = field(default_factory=list)

    def csv_header(self):
        return ['t', 'mean'] + ['path_{}'.format(p) for p in range(self.per_path.shape[0])]

    def csv_rows(self):
        for s, t in enumerate(self.times):
            yield [float(t), float(self.mean[s])] + [float(v) for v in self.per_path[:, s]]

    def to_dict(self):
        return {'burn_in': self.burn_in, 'terminal': self.terminal.to_dict(),
                'converged': self.converged, 'exited': self.exited, 'notes': self.notes}


def ergodic_average(ens, name, burn_in=0.0, tolerance=0.1):
    """(1/(t−b)) ∫_b^t f(X_s) ds per path, from an ensemble that recorded functional ``name``.

    A path that leaves the largest ball at τ after the burn-in is averaged over
    [b, min(t, τ)] only.

    The curve counts as converged when the mean at T and at (b+T)/2 agree to
    ``tolerance`` relative.
    """
    if name not in ens.integrals:
        raise ErgodicError('functional {!r} was not recorded'.format(name))
    b = ens.time_index(burn_in)
    largest = ens.exit_times[:, -1]
    early = np.isfinite(largest) & (largest <= ens.times[b])
    if early.any():
        raise ErgodicError('{} paths exited the largest radius before the burn-in {}'.format(
            int(early.sum()), burn_in))
    notes = []
    later = np.isfinite(largest)
    if later.any():
        notes.append('{} paths exited after the burn-in; their averages end at the exit '
                     'time'.format(int(later.sum())))
    if (ens.status != ALIVE).sum() > later.sum():
        raise ErgodicError('paths stopped on undefined coefficients')
    curves = ens.integrals[name]
    times = ens.times[b + 1:]
    stopped = np.where(later, largest, np.inf)
    span = np.minimum(times[None, :], stopped[:, None]) - ens.times[b]
    per_path = (curves[:, b + 1:] - curves[:, b:b + 1]) / span
    mean = per_path.mean(axis=0)
    terminal = EstimatorResult.from_values(per_path[:, -1], 'mean of per-path time averages')
    half = int(np.argmin(np.abs(times - 0.5 * (times[-1] + ens.times[b]))))
    scale = max(abs(mean[-1]), 1e-12)
    converged = bool(abs(mean[-1] - mean[half]) <= tolerance * scale)
    if not converged:
        notes.append('time average still drifting: {:.6g} at t={:.6g}, {:.6g} at t={:.6g}'.format(
            mean[half], times[half], mean[-1], times[-1]))
    return ErgodicCurve(times, per_path, mean, terminal, converged, float(burn_in),
                        int(later.sum()), notes)


@dataclass
class TransitionReport:
    t: float
    mean: List[EstimatorResult]
    ks: List[dict] = field(default_factory=list)
    normalizable: Optional[bool] = None
    notes: List[str] = field(default_factory=list)

    def to_dict(self):
        return {'t': self.t, 'mean': [m.to_dict() for m in self.mean], 'ks': self.ks,
                'normalizable': self.normalizable, 'notes': self.notes}


def _reference_rule(rho, half_width, nodes=None):
    if not rho.is_analytic:
        return QuadratureRule(rho.field.lower, rho.field.upper, nodes or 201, 'simpson')
    return QuadratureRule.box(half_width, rho.dim, nodes or {1: 2001, 2: 401, 3: 81}.get(rho.dim, 41))


def _marginal_cdfs(rho, rule):
    """Per-axis CDFs (axis grid, cdf values) of ρ normalized on the box of ``rule``."""
    X = rule.points()
    values = rho.value(X, strict=False)
    values = np.where(np.isfinite(values), values, 0.0)
    d = rule.dim
    out = []
    for k in range(d):
        marg = values
        for j in reversed(range(d)):
            if j != k:
                marg = np.tensordot(marg, rule.weights[j], axes=([j], [0]))
        marg = np.asarray(marg).reshape(-1)
        cdf = np.concatenate([[0.0], cumulative_trapezoid(marg, rule.axes[k])])
        out.append((rule.axes[k], cdf / cdf[-1]))
    return out


def check_normalizable(rho, half_width=4.0):
    """Mass on the box must not keep growing when the box doubles."""
    if not rho.is_analytic:
        return True
    small = integrate(lambda X: rho.value(X, strict=False), _reference_rule(rho, half_width))
    large = integrate(lambda X: rho.value(X, strict=False), _reference_rule(rho, 2 * half_width))
    return bool(np.isfinite(large) and large <= small * (1.0 + 1e-3))


def transition_histogram(cs, x0, t, cfg, rho_ref=None, half_width=4.0):
    """Law of X_t: coordinate means and KS distances to the marginals of ρ_ref/∫ρ_ref."""
    cfg = cfg.replace(horizon=t)
    ens = simulate_ensemble(cs, x0, cfg)
    keep, dropped = _usable(ens)
    idx = ens.time_index(t)
    sample = ens.snapshots[keep, idx]
    report = TransitionReport(float(ens.times[idx]),
                              [EstimatorResult.from_values(sample[:, k], 'mean of x{} at t'
                                                           .format(k + 1))
                               for k in range(cs.dim)])
    if dropped:
        report.notes.append('{} paths stopped on undefined coefficients were excluded'.format(
            dropped))
    exited = int(np.sum(ens.status[keep] == EXITED))
    if exited:
        report.notes.append('{} paths were absorbed before t'.format(exited))
    if rho_ref is None:
        return report
    report.normalizable = check_normalizable(rho_ref, half_width)
    if not report.normalizable:
        raise NotNormalizableError('reference not normalizable: the mass of the reference '
                                   'density keeps growing with the box', report=report)
    n = sample.shape[0]
    threshold = KS_COEFFICIENT / math.sqrt(n)
    for k, (axis, cdf) in enumerate(_marginal_cdfs(rho_ref, _reference_rule(rho_ref, half_width))):
        res = kstest(sample[:, k], lambda v, axis=axis, cdf=cdf: np.interp(v, axis, cdf))
        report.ks.append({'axis': k + 1, 'distance': float(res.statistic),
                          'pvalue': float(res.pvalue), 'threshold': threshold,
                          'passed': bool(res.statistic <= threshold)})
    return report


@dataclass
class RefinementReport:
    coarse: 'MomentCurve'
    fine: 'MomentCurve'
    rows: List[dict]

    @property
    def consistent(self):
        return all(r['within'] for r in self.rows)

    def to_dict(self):
        return {'rows': self.rows, 'consistent': self.consistent}


def step_refinement(cs, x0, cfg, phi, times):
    """Moment curves at Δ and Δ/2 on shared Brownian increments.

    The coarse run draws two normals per step (``noise_substeps = 2``), which
    are exactly the increments of the fine run with the same seed.
    """
    coarse_cfg = cfg.replace(noise_substeps=2)
    fine_cfg = cfg.replace(dt=cfg.dt / 2.0, noise_substeps=1,
                           record_every=2 * coarse_cfg.record_every)
    coarse = moment_curve(simulate_ensemble(cs, x0, coarse_cfg), phi, times)
    fine = moment_curve(simulate_ensemble(cs, x0, fine_cfg), phi, times)
    rows = []
    for a, b in zip(coarse.rows, fine.rows):
        combined = math.sqrt(a['stderr'] ** 2 + b['stderr'] ** 2)
        diff = b['estimate'] - a['estimate']
        rows.append({'t': a['t'], 'coarse': a['estimate'], 'fine': b['estimate'],
                     'difference': diff, 'combined_stderr': combined,
                     'within': bool(abs(diff) < 2.0 * combined) if combined > 0 else diff == 0})
    return RefinementReport(coarse, fine, rows)
