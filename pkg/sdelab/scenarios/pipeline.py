"""Stage runner: density → criteria → simulation (ergodic, krylov, transition) → comparisons.

A stage that raises an :class:`SdelabError` leaves an error block in the
report; independent later stages still run.
"""
import logging
import math
from itertools import combinations

import numpy as np

from ..calculus.operators import decompose_drift, default_rule
from ..calculus.quadrature import QuadratureRule, bump_library
from ..criteria import CRITERION, CriterionInputs, build_candidate, evaluate_criterion, \
    search_constant
from ..density import (convergence_order, invariance_of_solution, max_error, nested_agreement,
                       solve_density, spread_against, volume_profile)
from ..montecarlo import (ALIVE, EXITED, EstimatorResult, ergodic_average, exit_probability_bound,
                          exit_statistics, krylov_functional, moment_curve, simulate_ensemble,
                          step_refinement, transition_histogram)
from ..utils.env import get_threads
from ..utils.errors import (CriterionError, NotNormalizableError, SdelabError, SimulationError,
                            VolumeError)
from ..utils.metrics import StageTimer
from ..version import __version__
from .report import Report
from .scenario import COMPUTED, load_scenario

logger = logging.getLogger(__name__)

STAGES = ('density', 'criteria', 'simulation', 'ergodic', 'krylov', 'transition', 'comparisons')
# |∫ Lf dμ| ≤ RESIDUAL_TOL · ‖f‖∞ · box volume
RESIDUAL_TOL = 1e-8
# two densities are constant multiples when ρ_a/ρ_b varies less than this
RATIO_SPREAD_TOL = 1e-6
RATIO_PROBES = 64


class _State(object):
    """Results handed from one stage to the next."""

    def __init__(self, report, progress):
        self.report = report
        self.progress = progress
        self.densities = {}
        self.invariance = {}
        self.solver_error = None
        self.orders = None
        self.nested = None
        self.volume_within = None
        self.verdicts = {}
        self.ensemble = None
        self.moments = {}
        self.exits = None
        self.refinement = None
        self.ergodic = None
        self.krylov = None
        self.transition = None


def _requested(sc, stage):
    if stage == 'density':
        return bool(sc.densities or sc.solver or sc.volume)
    if stage == 'criteria':
        return bool(sc.criteria)
    if stage == 'comparisons':
        return bool(sc.comparisons) or any(_requested(sc, s) for s in STAGES[:-1])
    return getattr(sc, stage) is not None


def requested_stages(sc):
    """Stages the scenario configures, in run order."""
    return [s for s in STAGES if _requested(sc, s)]


def _check_rule(req, dim):
    if req.nodes is None:
        return default_rule(dim, req.half_width)
    return QuadratureRule.box(req.half_width, dim, req.nodes)


def _not_constant_multiples(a, b, dim, half_width):
    X = np.random.default_rng(0).uniform(-0.5 * half_width, 0.5 * half_width,
                                         size=(RATIO_PROBES, dim))
    ratio = a.value(X, strict=False) / b.value(X, strict=False)
    return float(np.ptp(ratio) / np.mean(np.abs(ratio))) > RATIO_SPREAD_TOL


def _analytic_densities(sc, state, block):
    for req in sc.densities:
        entry = {'name': req.name, 'expr': req.expr}
        state.densities[req.name] = req.rho
        try:
            rule = _check_rule(req, sc.dim)
            entry['min_value'] = req.rho.probe(rule.points().reshape(-1, sc.dim)).min_value
            if req.check:
                library = bump_library(rule.lower, rule.upper, profile=req.bumps)
                _, divergence = decompose_drift(sc.cs, req.rho, rule=rule, library=library)
                entry['divergence'] = divergence.to_dict()
                residual = invariance_of_solution(sc.cs, req.rho, rule=rule, library=library)
                entry['invariance'] = residual.to_dict()
                entry['invariant'] = bool(
                    residual.max_residual <= RESIDUAL_TOL * max(residual.scale, 1.0))
                entry['expect_invariant'] = req.expect_invariant
                state.invariance[req.name] = (entry['invariant'], req.expect_invariant)
        except SdelabError as exc:
            entry.update(state.report.add_error('density', exc, req.name))
        block['densities'].append(entry)

    invariant = [req for req in sc.densities if state.invariance.get(req.name, (False,))[0]]
    for a, b in combinations(invariant, 2):
        if _not_constant_multiples(a.rho, b.rho, sc.dim, min(a.half_width, b.half_width)):
            note = ('{} and {} are both infinitesimally invariant and not constant multiples of '
                    'each other: the infinitesimally invariant measure is not unique'.format(
                        a.name, b.name))
            block['notes'].append(note)
            state.report.notes.append(note)


def _solve(sc, state, block):
    req = sc.solver
    solutions = []
    entries = []
    for R in req.radii:
        approx = solve_density(sc.cs, R, req.n, boundary=req.boundary, method=req.method)
        entry = approx.to_dict()
        if req.oracle is not None:
            entry['max_error'] = max_error(approx, req.oracle)
            entry['spread'] = spread_against(approx, req.oracle, 0.25 * approx.mesh.R)
            state.solver_error = entry['max_error']
        solutions.append(approx)
        entries.append(entry)
    agreement = []
    for small, large in zip(solutions[:-1], solutions[1:]):
        agreement.append({'R_small': small.mesh.R, 'R_large': large.mesh.R,
                          'max_relative_difference': nested_agreement(
                              small, large, 0.25 * small.mesh.R)})
    if agreement:
        state.nested = max(a['max_relative_difference'] for a in agreement)
    largest = solutions[-1]
    rho = largest.to_field(name=COMPUTED)
    state.densities[COMPUTED] = rho
    out = {'solutions': entries, 'nested': agreement}
    if req.check_invariance:
        out['invariance'] = invariance_of_solution(sc.cs, largest).to_dict()
    if req.convergence_levels:
        convergence = convergence_order(sc.cs, req.radii[0], req.convergence_n or req.n,
                                        req.boundary, req.oracle, levels=req.convergence_levels,
                                        method=req.method)
        state.orders = list(convergence.orders)
        out['convergence'] = convergence.to_dict()
    state.report.tables['density_grid'] = (largest.csv_header(), list(largest.csv_rows()))
    block['solver'] = out


def _volume(sc, state, block):
    req = sc.volume
    rho = state.densities.get(req.density)
    if rho is None:
        raise VolumeError('density {!r} is unavailable'.format(req.density))
    profile = volume_profile(rho, req.radii, cs=sc.cs, annulus_radii=req.annuli)
    out = profile.to_dict()
    rows = []
    within = []
    for r, mass, v1, v2 in profile.rows():
        bound = req.bound_c * r ** req.bound_power if req.bound_c is not None else float('nan')
        rows.append([r, mass, v1, v2, bound])
        if req.bound_c is not None:
            within.append(mass <= bound)
    if req.bound_c is not None:
        out['bound'] = {'C': req.bound_c, 'POWER': req.bound_power}
        out['within_bound'] = bool(all(within))
        state.volume_within = out['within_bound']
    state.report.tables['volume'] = (['r', 'mass', 'v1', 'v2', 'bound'], rows)
    block['volume'] = out


def _density_stage(sc, state):
    block = {'densities': [], 'solver': None, 'volume': None, 'notes': []}
    if sc.densities:
        _analytic_densities(sc, state, block)
    if sc.solver is not None:
        _solve(sc, state, block)
    if sc.volume is not None:
        _volume(sc, state, block)
    return block


def _criteria_stage(sc, state):
    entries = []
    for req in sc.criteria:
        entry = {'name': req.name, 'type': req.spec['TYPE'],
                 'reference_note': CRITERION.get(req.spec['TYPE']).REFERENCE_NOTE}
        try:
            rho = None
            if req.density is not None:
                rho = state.densities.get(req.density)
                if rho is None:
                    raise CriterionError('{}: missing input: density {!r} is unavailable'.format(
                        req.name, req.density))
            inputs = CriterionInputs(sc.cs, rho, req.bbar)
            if req.search is not None:
                search = search_constant(req.spec, inputs, **req.search)
                verdict = search.verdict
                entry['search'] = {k: v for k, v in search.to_dict().items() if k != 'verdict'}
            else:
                verdict = evaluate_criterion(req.spec, inputs)
        except SdelabError as exc:
            entry.update(state.report.add_error('criteria', exc, req.name))
            entries.append(entry)
            continue
        entry.update(verdict.to_dict())
        met = verdict.verdict == req.expect if req.expect else not verdict.failed
        entry['expected'] = req.expect
        entry['expectation_met'] = met
        if verdict.holds and req.implies:
            entry['implies'] = req.implies
        if not met:
            state.report.failures.append('criterion {}: {}'.format(req.name, verdict.verdict))
        state.verdicts[req.name] = verdict
        entries.append(entry)
    return {'criteria': entries}


def _moment_rows(label, curve):
    return [[label] + row for row in curve.csv_rows()]


def _simulation_stage(sc, state):
    req = sc.simulation
    cfg = req.config
    ens = simulate_ensemble(sc.cs, req.x0, cfg, progress=state.progress)
    state.ensemble = ens
    block = {'summary': ens.summary(), 'moments': {}}
    rows = []
    header = None
    for m in req.moments:
        curve = moment_curve(ens, m.phi, m.times or list(ens.times), M=m.M, label=m.label)
        state.moments[m.label] = curve
        block['moments'][m.label] = curve.to_dict()
        header = ['label'] + curve.csv_header()
        rows.extend(_moment_rows(m.label, curve))
    if header is not None:
        state.report.tables['moments'] = (header, rows)

    bounds = None
    if req.exit_bound is not None:
        eb = req.exit_bound
        bounds = {n: exit_probability_bound(eb.phi, req.x0, eb.M, cfg.horizon, n)
                  for n in cfg.radii}
    exits = exit_statistics(ens, bounds=bounds)
    state.exits = exits
    block['exits'] = exits.to_dict()
    state.report.tables['exits'] = (exits.csv_header(), list(exits.csv_rows()))
    state.report.tables['ensemble'] = (ens.csv_header(), list(ens.csv_rows()))

    if req.refinement is not None:
        ref = req.refinement
        times = ref.times or [float(s) * cfg.dt for s in cfg.record_steps]
        refinement = step_refinement(sc.cs, req.x0, cfg, ref.phi, times)
        state.refinement = refinement
        block['refinement'] = refinement.to_dict()
        state.report.tables['refinement'] = (
            ['t', 'coarse', 'fine', 'difference', 'combined_stderr', 'within'],
            [[r['t'], r['coarse'], r['fine'], r['difference'], r['combined_stderr'],
              r['within']] for r in refinement.rows])
    if ens.notes:
        block['notes'] = list(ens.notes)
    return block


def _ergodic_stage(sc, state):
    req = sc.ergodic
    ens = simulate_ensemble(sc.cs, req.x0, req.config, functionals={req.name: req.functional},
                            progress=state.progress)
    curve = ergodic_average(ens, req.name, req.burn_in, req.tolerance)
    state.ergodic = curve
    state.report.tables['ergodic'] = (curve.csv_header(), list(curve.csv_rows()))
    block = curve.to_dict()
    block['functional'] = req.functional
    block['paths'] = ens.n_paths
    return block


def _krylov_stage(sc, state):
    req = sc.krylov
    f = build_candidate(req.f, sc.dim) if isinstance(req.f, dict) else req.f
    rho = state.densities.get(req.density) if req.density is not None else None
    if req.density is not None and rho is None:
        raise SimulationError('density {!r} is unavailable'.format(req.density))
    result = krylov_functional(sc.cs, f, req.t, req.starts, req.config, rho=rho, q=req.q,
                               refine=req.refine, tolerance=req.tolerance)
    state.krylov = result
    header = ['start'] + ['x{}'.format(k + 1) for k in range(sc.dim)] + ['estimate', 'stderr',
                                                                          'paths']
    rows = [[i] + list(x) + [e.estimate, e.stderr, e.paths]
            for i, (x, e) in enumerate(zip(result.starts, result.estimates))]
    state.report.tables['krylov'] = (header, rows)
    return result.to_dict()


def _transition_stage(sc, state):
    req = sc.transition
    rho = state.densities.get(req.density) if req.density is not None else None
    if req.density is not None and rho is None:
        raise SimulationError('density {!r} is unavailable'.format(req.density))
    try:
        result = transition_histogram(sc.cs, req.x0, req.t, req.config, rho_ref=rho,
                                      half_width=req.half_width)
    except NotNormalizableError as exc:
        if exc.report is None:
            raise
        result = exc.report
        result.notes.append(str(exc))
        logger.info('transition: %s', exc)
    state.transition = result
    return result.to_dict()


def _automatic_checks(sc, state):
    checks = []
    for name, (got, expected) in sorted(state.invariance.items()):
        checks.append(('invariance:{}'.format(name), got == expected))
    if state.volume_within is not None:
        checks.append(('volume_bound', state.volume_within))
    for label, curve in sorted(state.moments.items()):
        if any(r['bound'] is not None for r in curve.rows):
            checks.append(('moment_bound:{}'.format(label), curve.within_bound))
    if state.exits is not None and state.exits.within_bound is not None:
        checks.append(('exit_bound', state.exits.within_bound))
    if state.refinement is not None:
        checks.append(('step_refinement', state.refinement.consistent))
    if state.ergodic is not None:
        checks.append(('ergodic_converged', state.ergodic.converged))
    if state.krylov is not None and sc.krylov.refine:
        checks.append(('krylov_integrable', not state.krylov.flagged))
    if state.transition is not None:
        for ks in state.transition.ks:
            checks.append(('transition_ks:x{}'.format(ks['axis']), ks['passed']))
    return checks


def _usable_exit_times(ens, radius):
    radius = float(radius)
    if radius not in ens.radii:
        raise SimulationError('radius {} is not on the simulated ladder {}'.format(
            radius, ens.radii))
    keep = np.isin(ens.status, (ALIVE, EXITED))
    return ens.exit_times[keep, ens.radii.index(radius)]


def _quantity(sc, state, req):
    """(value, stderr) of a configured quantity; None when its stage produced nothing."""
    q, p = req.quantity, req.params
    if q == 'moment':
        curve = state.moments.get(p['label'])
        if curve is None:
            return None
        dt = sc.simulation.config.dt
        for row in curve.rows:
            if abs(row['t'] - float(p['time'])) <= 0.5 * dt:
                return row['estimate'], row['stderr']
        raise SimulationError('moment {!r} was not recorded at t={}'.format(p['label'],
                                                                              p['time']))
    if q in ('exit_probability', 'mean_exit', 'exit_spread'):
        ens = state.ensemble
        if ens is None:
            return None
        if q == 'exit_probability':
            sigma = _usable_exit_times(ens, p['radius'])
            t = float(p.get('time', ens.config.horizon))
            prob = float(np.mean(np.isfinite(sigma) & (sigma <= t + 1e-12)))
            return prob, math.sqrt(prob * (1.0 - prob) / sigma.size)
        if q == 'mean_exit':
            sigma = _usable_exit_times(ens, p['radius'])
            est = EstimatorResult.from_values(sigma[np.isfinite(sigma)])
            return est.estimate, est.stderr
        a, b = [_usable_exit_times(ens, r) for r in p['radii']]
        return float(np.median(b[np.isfinite(b)]) - np.median(a[np.isfinite(a)])), 0.0
    if q == 'ergodic_mean':
        if state.ergodic is None:
            return None
        return state.ergodic.terminal.estimate, state.ergodic.terminal.stderr
    if q == 'krylov':
        if state.krylov is None:
            return None
        est = state.krylov.estimates[int(p.get('start', 0))]
        return est.estimate, est.stderr
    if q == 'transition_mean':
        if state.transition is None:
            return None
        est = state.transition.mean[int(p['axis']) - 1]
        return est.estimate, est.stderr
    if q == 'criterion_margin':
        verdict = state.verdicts.get(p['criterion'])
        return None if verdict is None else (verdict.min_margin, 0.0)
    if q == 'density_error':
        return None if state.solver_error is None else (state.solver_error, 0.0)
    if q == 'convergence_order':
        if not state.orders:
            return None
        # the observed order that is worst for the comparison
        if req.op == '>=':
            return min(state.orders), 0.0
        if req.op == '<=':
            return max(state.orders), 0.0
        return max(state.orders, key=lambda o: abs(o - req.target)), 0.0
    if q == 'nested_agreement':
        return None if state.nested is None else (state.nested, 0.0)
    raise ValueError(q)


def _compare(req, value, stderr):
    if req.op == '<=':
        return value <= req.target, None
    if req.op == '>=':
        return value >= req.target, None
    if req.se is not None:
        tol = req.se * stderr
    elif req.rel is not None:
        tol = req.rel * abs(req.target)
    else:
        tol = req.abs
    return abs(value - req.target) <= tol, tol


def _comparisons_stage(sc, state):
    out = []
    for name, passed in _automatic_checks(sc, state):
        out.append({'name': name, 'status': 'passed' if passed else 'failed'})
    for req in sc.comparisons:
        entry = {'name': req.name, 'quantity': req.quantity, 'op': req.op, 'target': req.target}
        try:
            got = _quantity(sc, state, req)
        except SdelabError as exc:
            entry.update(state.report.add_error('comparisons', exc, req.name))
            entry['status'] = 'error'
            out.append(entry)
            continue
        if got is None:
            entry['status'] = 'skipped'
            out.append(entry)
            continue
        value, stderr = got
        passed, tol = _compare(req, value, stderr)
        entry.update({'value': value, 'stderr': stderr, 'tolerance': tol,
                      'status': 'passed' if passed else 'failed'})
        out.append(entry)
    for entry in out:
        if entry['status'] == 'failed':
            state.report.failures.append('comparison {}'.format(entry['name']))
    return {'comparisons': out}


STAGE_FUNCS = {
    'density': _density_stage,
    'criteria': _criteria_stage,
    'simulation': _simulation_stage,
    'ergodic': _ergodic_stage,
    'krylov': _krylov_stage,
    'transition': _transition_stage,
    'comparisons': _comparisons_stage,
}


def run_scenario(source, stages=None, seed=None, progress=False):
    """Run the requested stages of a scenario (path, mapping or :class:`Scenario`).

    Config errors propagate as :class:`ConfigError`; stage errors end up in
    ``report.errors`` and set exit code 3.
    """
    sc = load_scenario(source, seed=seed)
    selected = STAGES if stages is None else tuple(s for s in STAGES if s in stages)
    report = Report(sc.name, __version__, sc.canonical(), sc.seed_record(),
                    notes=list(sc.notes), threads=get_threads())
    state = _State(report, progress)
    timer = StageTimer()
    for stage in STAGES:
        if stage not in selected or not _requested(sc, stage):
            report.stages[stage] = {}
            continue
        timer.start(stage)
        try:
            block = STAGE_FUNCS[stage](sc, state)
            failed = [e for e in report.errors if e['stage'] == stage]
            block['status'] = 'error' if failed else 'ok'
        except SdelabError as exc:
            block = dict(report.add_error(stage, exc), status='error')
        seconds = timer.stop(stage)
        report.stages[stage] = block
        logger.info('stage %s: %s in %.2fs', stage, block['status'], seconds)
    report.timings = dict(timer.records)
    logger.info('scenario %s finished with exit code %d', sc.name, report.exit_code)
    return report
