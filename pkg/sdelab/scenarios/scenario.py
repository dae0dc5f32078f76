"""Scenario files: validation with dotted field paths, then the problem objects.

Every violation is raised as :class:`ConfigError` naming the first offending
field, e.g. ``SIMULATION.X0: expected 2 coordinates``.
"""
import json
import logging
from dataclasses import dataclass, field
from typing import Any, List, Optional

from ..calculus import CoefficientSet, DensityField, build_coefficient_set
from ..calculus.quadrature import BUMP_PROFILES
from ..criteria import CRITERION, build_criterion
from ..criteria.verdict import VERDICTS
from ..dsl import parse_expr
from ..montecarlo import SimulationConfig
from ..utils.config import (dump_config, get_float, get_int, get_list, load_config_dict,
                            require, update_config)
from ..utils.errors import ConfigError, SdelabError
from .builders import density_source

logger = logging.getLogger(__name__)

TOP_LEVEL_KEYS = (
    'SCHEMA_VERSION', 'NAME', 'DIM', 'DESCRIPTION', 'COEFFICIENTS', 'DENSITIES', 'DENSITY',
    'VOLUME', 'CRITERIA', 'SIMULATION', 'ERGODIC', 'KRYLOV', 'TRANSITION', 'COMPARISONS', 'NOTES',
)
COMPUTED = 'computed'
OPS = ('<=', '>=', '~')
# quantity -> keys it needs besides TARGET
QUANTITIES = {
    'moment': ('LABEL', 'TIME'),
    'exit_probability': ('RADIUS',),
    'mean_exit': ('RADIUS',),
    'exit_spread': ('RADII',),
    'ergodic_mean': (),
    'krylov': (),
    'transition_mean': ('AXIS',),
    'criterion_margin': ('CRITERION',),
    'density_error': (),
    'convergence_order': (),
    'nested_agreement': (),
}


@dataclass
class DensityRequest:
    name: str
    rho: Any
    expr: str
    check: bool = True
    expect_invariant: bool = True
    half_width: float = 4.0
    nodes: Optional[int] = None
    bumps: str = 'poly'


@dataclass
class SolverRequest:
    radii: List[float]
    n: int
    boundary: str = 'ones'
    method: str = 'auto'
    oracle: Optional[str] = None
    convergence_levels: int = 0
    check_invariance: bool = True
    convergence_n: Optional[int] = None


@dataclass
class VolumeRequest:
    density: str
    radii: List[float]
    annuli: List[float] = field(default_factory=list)
    bound_c: Optional[float] = None
    bound_power: Optional[float] = None


@dataclass
class CriterionRequest:
    name: str
    spec: dict
    density: Optional[str] = None
    bbar: Optional[List[str]] = None
    expect: Optional[str] = None
    implies: str = ''
    search: Optional[dict] = None


@dataclass
class MomentRequest:
    label: str
    phi: str
    M: Optional[float] = None
    times: Optional[List[float]] = None


@dataclass
class SimulationRequest:
    config: SimulationConfig
    x0: List[float]
    moments: List[MomentRequest] = field(default_factory=list)
    exit_bound: Optional[MomentRequest] = None
    refinement: Optional[MomentRequest] = None


@dataclass
class ErgodicRequest:
    config: SimulationConfig
    x0: List[float]
    functional: str
    name: str = 'f'
    burn_in: float = 0.0
    tolerance: float = 0.1


@dataclass
class KrylovRequest:
    config: SimulationConfig
    f: Any
    t: float
    starts: List[List[float]]
    q: float = 2.0
    refine: Optional[int] = None
    tolerance: float = 0.05
    density: Optional[str] = None


@dataclass
class TransitionRequest:
    config: SimulationConfig
    x0: List[float]
    t: float
    density: Optional[str] = None
    half_width: float = 4.0


@dataclass
class ComparisonRequest:
    name: str
    quantity: str
    target: float
    op: str = '~'
    params: dict = field(default_factory=dict)
    se: Optional[float] = None
    rel: Optional[float] = None
    abs: Optional[float] = None


@dataclass
class Scenario:
    name: str
    dim: int
    cs: CoefficientSet
    config: dict
    description: str = ''
    densities: List[DensityRequest] = field(default_factory=list)
    solver: Optional[SolverRequest] = None
    volume: Optional[VolumeRequest] = None
    criteria: List[CriterionRequest] = field(default_factory=list)
    simulation: Optional[SimulationRequest] = None
    ergodic: Optional[ErgodicRequest] = None
    krylov: Optional[KrylovRequest] = None
    transition: Optional[TransitionRequest] = None
    comparisons: List[ComparisonRequest] = field(default_factory=list)
    notes: List[str] = field(default_factory=list)
    seed_override: Optional[int] = None

    @property
    def density_names(self):
        names = [d.name for d in self.densities]
        if self.solver is not None:
            names.append(COMPUTED)
        return names

    def seed_record(self):
        record = {'override': self.seed_override,
                  'probe': int(self.config['COEFFICIENTS'].get('PROBE_SEED', 0))}
        for key in ('simulation', 'ergodic', 'krylov', 'transition'):
            request = getattr(self, key)
            if request is not None:
                record[key] = request.config.seed
        return record

    def canonical(self):
        """The config as plain data with sorted keys."""
        return json.loads(dump_config(self.config))


def _mapping(value, path):
    if not isinstance(value, dict):
        raise ConfigError(path, 'expected a mapping, got {!r}'.format(value))
    return value


def _point(block, key, path, dim):
    full = '{}.{}'.format(path, key)
    if block.get(key) is None:
        raise ConfigError(full, 'missing required field')
    return _coords(block[key], full, dim)


def _coords(value, full, dim):
    if not isinstance(value, (list, tuple)) or len(value) != dim:
        raise ConfigError(full, 'expected {} coordinates, got {!r}'.format(dim, value))
    try:
        return [float(v) for v in value]
    except (TypeError, ValueError):
        raise ConfigError(full, 'coordinates must be numbers')


def _expr(value, dim, path):
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        value = repr(float(value))
    if not isinstance(value, str):
        raise ConfigError(path, 'expected an expression, got {!r}'.format(value))
    try:
        parse_expr(value, dim)
    except SdelabError as exc:
        raise ConfigError(path, str(exc))
    return value


def _coefficients(cfg, dim, name):
    path = 'COEFFICIENTS'
    block = _mapping(require(cfg, 'COEFFICIENTS', ''), path)
    A = require(block, 'A', path)
    singular = []
    for i, p in enumerate(block.get('SINGULAR_POINTS') or []):
        if not isinstance(p, (list, tuple)) or len(p) != dim:
            raise ConfigError('{}.SINGULAR_POINTS[{}]'.format(path, i),
                              'expected {} coordinates'.format(dim))
        singular.append(tuple(float(v) for v in p))
    kwargs = dict(
        dim=dim,
        allow_one_dim=bool(block.get('ALLOW_ONE_DIM', False)),
        probe_radius=get_float(block, 'PROBE_RADIUS', path, default=10.0, positive=True),
        probe_points=get_int(block, 'PROBE_POINTS', path, default=1000, minimum=1),
        seed=get_int(block, 'PROBE_SEED', path, default=0, minimum=0),
        name=name,
    )
    given = [k for k in ('H', 'G', 'FROM_DENSITY') if block.get(k) is not None]
    if len(given) != 1:
        raise ConfigError(path, 'give exactly one of H, G and FROM_DENSITY, got {}'.format(
            given or 'none'))
    if block.get('FLUX') is not None and given[0] != 'FROM_DENSITY':
        raise ConfigError(path + '.FLUX', 'FLUX is only used with FROM_DENSITY')
    try:
        if given[0] == 'FROM_DENSITY':
            expr, points = density_source(block['FROM_DENSITY'], dim, path + '.FROM_DENSITY')
            kwargs['singular_points'] = singular + points
            return CoefficientSet.from_density(A, expr, C=block.get('C'),
                                               flux=block.get('FLUX'), **kwargs)
        kwargs['singular_points'] = singular
        return build_coefficient_set(A, block.get('C'), H=block.get('H'), G=block.get('G'),
                                     **kwargs)
    except ConfigError:
        raise
    except SdelabError as exc:
        raise ConfigError(path, str(exc))


def _densities(cfg, dim):
    entries = cfg.get('DENSITIES') or []
    if not isinstance(entries, (list, tuple)):
        raise ConfigError('DENSITIES', 'expected a list')
    out = []
    for i, entry in enumerate(entries):
        path = 'DENSITIES[{}]'.format(i)
        if not isinstance(entry, dict):
            entry = {'EXPR': entry}
        name = str(entry.get('NAME') or 'rho{}'.format(i + 1))
        if name == COMPUTED or name in [d.name for d in out]:
            raise ConfigError(path + '.NAME', 'name {!r} is reserved or already used'.format(name))
        source = entry.get('EXPR', entry.get('BUILDER'))
        if source is None:
            raise ConfigError(path, 'needs EXPR or BUILDER')
        expr, _ = density_source(source, dim, path)
        try:
            rho = DensityField.analytic(parse_expr(expr, dim), dim, name=name)
        except SdelabError as exc:
            raise ConfigError(path, str(exc))
        nodes = entry.get('NODES')
        bumps = str(entry.get('BUMPS', 'poly'))
        if bumps not in BUMP_PROFILES:
            raise ConfigError(path + '.BUMPS', 'expected one of {}, got {!r}'.format(
                BUMP_PROFILES, bumps))
        out.append(DensityRequest(
            name, rho, expr, bool(entry.get('CHECK', True)),
            bool(entry.get('EXPECT_INVARIANT', True)),
            get_float(entry, 'HALF_WIDTH', path, default=4.0, positive=True),
            get_int(entry, 'NODES', path, minimum=3) if nodes is not None else None, bumps))
    return out


def _solver(cfg, dim):
    block = cfg.get('DENSITY')
    if block is None:
        return None
    path = 'DENSITY'
    _mapping(block, path)
    radii = block.get('R')
    radii = radii if isinstance(radii, (list, tuple)) else [require(block, 'R', path)]
    try:
        radii = [float(r) for r in radii]
    except (TypeError, ValueError):
        raise ConfigError(path + '.R', 'expected numbers')
    if any(r <= 0 for r in radii) or any(b <= a for a, b in zip(radii, radii[1:])):
        raise ConfigError(path + '.R', 'R ladder must be positive and increasing, got {}'.format(
            radii))
    boundary = block.get('BOUNDARY', 'ones')
    if boundary != 'ones':
        boundary = _expr(boundary, dim, path + '.BOUNDARY')
    oracle = block.get('ORACLE')
    if oracle is not None:
        oracle = _expr(oracle, dim, path + '.ORACLE')
    method = str(block.get('METHOD', 'auto'))
    if method not in ('auto', 'direct', 'iterative'):
        raise ConfigError(path + '.METHOD', 'unknown method {!r}'.format(method))
    levels = get_int(block, 'CONVERGENCE_LEVELS', path, default=0, minimum=0)
    if levels == 1:
        raise ConfigError(path + '.CONVERGENCE_LEVELS', 'needs at least 2 levels (0 disables)')
    if levels and oracle is None:
        raise ConfigError(path + '.CONVERGENCE_LEVELS', 'needs an ORACLE')
    coarsest = block.get('CONVERGENCE_N')
    if coarsest is not None:
        coarsest = get_int(block, 'CONVERGENCE_N', path, minimum=2)
        if coarsest % 2:
            raise ConfigError(path + '.CONVERGENCE_N', 'cell count must be even, got {}'.format(
                coarsest))
    return SolverRequest(radii, get_int(block, 'N', path, minimum=2), boundary, method, oracle,
                         levels, bool(block.get('CHECK_INVARIANCE', True)), coarsest)


def _volume(cfg):
    block = cfg.get('VOLUME')
    if block is None:
        return None
    path = 'VOLUME'
    _mapping(block, path)
    radii = [float(r) for r in get_list(block, 'RADII', path)]
    annuli = [float(n) for n in get_list(block, 'ANNULI', path, default=[])]
    bound = block.get('BOUND')
    c = power = None
    if bound is not None:
        _mapping(bound, path + '.BOUND')
        c = get_float(bound, 'C', path + '.BOUND', positive=True)
        power = get_float(bound, 'POWER', path + '.BOUND', positive=True)
    return VolumeRequest(str(require(block, 'DENSITY', path)), radii, annuli, c, power)


def _criteria(cfg, dim):
    entries = cfg.get('CRITERIA') or []
    if not isinstance(entries, (list, tuple)):
        raise ConfigError('CRITERIA', 'expected a list')
    out = []
    for i, entry in enumerate(entries):
        path = 'CRITERIA[{}]'.format(i)
        _mapping(entry, path)
        kind = require(entry, 'TYPE', path)
        if kind not in CRITERION:
            raise ConfigError(path + '.TYPE', 'unknown criterion {!r}; known: {}'.format(
                kind, ', '.join(sorted(CRITERION.keys()))))
        reserved = ('NAME', 'DENSITY', 'BBAR', 'EXPECT', 'IMPLIES', 'SEARCH')
        spec = {k: v for k, v in entry.items() if k not in reserved}
        try:
            build_criterion(spec)
        except SdelabError as exc:
            raise ConfigError(path, str(exc))
        expect = entry.get('EXPECT')
        if expect is not None and expect not in VERDICTS:
            raise ConfigError(path + '.EXPECT', 'expected one of {}'.format(', '.join(VERDICTS)))
        bbar = entry.get('BBAR')
        if bbar is not None:
            if not isinstance(bbar, (list, tuple)) or len(bbar) != dim:
                raise ConfigError(path + '.BBAR', 'expected {} components'.format(dim))
            bbar = [_expr(b, dim, '{}.BBAR[{}]'.format(path, k)) for k, b in enumerate(bbar)]
        search = entry.get('SEARCH')
        if search is not None:
            _mapping(search, path + '.SEARCH')
            search = {'name': str(require(search, 'NAME', path + '.SEARCH')),
                      'lo': get_float(search, 'LO', path + '.SEARCH'),
                      'hi': get_float(search, 'HI', path + '.SEARCH'),
                      'tol': get_float(search, 'TOL', path + '.SEARCH', default=1e-6,
                                       positive=True)}
            if not search['lo'] < search['hi']:
                raise ConfigError(path + '.SEARCH', 'needs LO < HI')
        name = str(entry.get('NAME') or kind)
        if name in [c.name for c in out]:
            raise ConfigError(path + '.NAME', 'duplicate criterion name {!r}; set NAME'.format(name))
        density = entry.get('DENSITY')
        out.append(CriterionRequest(name, spec, None if density is None else str(density), bbar,
                                    expect, str(entry.get('IMPLIES', '')), search))
    return out


def _sim_config(block, path, seed, horizon=None):
    block = dict(block)
    if horizon is not None:
        block.setdefault('HORIZON', horizon)
    return SimulationConfig.from_cfg(block, path, seed=seed)


def _times(block, key, path):
    value = block.get(key)
    if value is None:
        return None
    return [float(t) for t in get_list(block, key, path)]


def _moment(entry, path, dim, default_label):
    _mapping(entry, path)
    M = entry.get('M')
    return MomentRequest(str(entry.get('LABEL', default_label)),
                         _expr(require(entry, 'PHI', path), dim, path + '.PHI'),
                         None if M is None else get_float(entry, 'M', path),
                         _times(entry, 'TIMES', path))


def _simulation(cfg, dim, seed):
    block = cfg.get('SIMULATION')
    if block is None:
        return None
    path = 'SIMULATION'
    _mapping(block, path)
    config = _sim_config(block, path, seed)
    x0 = _point(block, 'X0', path, dim)
    moments = []
    for i, entry in enumerate(block.get('MOMENTS') or []):
        moment = _moment(entry, '{}.MOMENTS[{}]'.format(path, i), dim, 'phi{}'.format(i + 1))
        if moment.label in [m.label for m in moments]:
            raise ConfigError('{}.MOMENTS[{}].LABEL'.format(path, i), 'duplicate label')
        moments.append(moment)
    exit_bound = block.get('EXIT_BOUND')
    if exit_bound is not None:
        exit_bound = _moment(exit_bound, path + '.EXIT_BOUND', dim, 'exit_bound')
        if exit_bound.M is None:
            raise ConfigError(path + '.EXIT_BOUND.M', 'missing required field')
    refinement = block.get('REFINEMENT')
    if refinement is not None:
        refinement = _moment(refinement, path + '.REFINEMENT', dim, 'refinement')
    return SimulationRequest(config, x0, moments, exit_bound, refinement)


def _ergodic(cfg, dim, seed):
    block = cfg.get('ERGODIC')
    if block is None:
        return None
    path = 'ERGODIC'
    _mapping(block, path)
    return ErgodicRequest(_sim_config(block, path, seed), _point(block, 'X0', path, dim),
                          _expr(require(block, 'FUNCTIONAL', path), dim, path + '.FUNCTIONAL'),
                          str(block.get('LABEL', 'f')),
                          get_float(block, 'BURN_IN', path, default=0.0),
                          get_float(block, 'TOLERANCE', path, default=0.1, positive=True))


def _krylov(cfg, dim, seed):
    block = cfg.get('KRYLOV')
    if block is None:
        return None
    path = 'KRYLOV'
    _mapping(block, path)
    t = get_float(block, 'T', path, positive=True)
    f = require(block, 'F', path)
    if not isinstance(f, dict):
        f = _expr(f, dim, path + '.F')
    starts = get_list(block, 'STARTS', path, default=[[0.0] * dim])
    starts = [_coords(s, '{}.STARTS[{}]'.format(path, i), dim) for i, s in enumerate(starts)]
    refine = block.get('REFINE')
    density = block.get('DENSITY')
    return KrylovRequest(_sim_config(block, path, seed, horizon=t), f, t, starts,
                         get_float(block, 'Q', path, default=2.0, positive=True),
                         get_int(block, 'REFINE', path, minimum=2) if refine else None,
                         get_float(block, 'TOLERANCE', path, default=0.05, positive=True),
                         None if density is None else str(density))


def _transition(cfg, dim, seed):
    block = cfg.get('TRANSITION')
    if block is None:
        return None
    path = 'TRANSITION'
    _mapping(block, path)
    t = get_float(block, 'T', path, positive=True)
    density = block.get('DENSITY')
    return TransitionRequest(_sim_config(block, path, seed, horizon=t),
                             _point(block, 'X0', path, dim), t,
                             None if density is None else str(density),
                             get_float(block, 'HALF_WIDTH', path, default=4.0, positive=True))


def _comparisons(cfg):
    entries = cfg.get('COMPARISONS') or []
    out = []
    for i, entry in enumerate(entries):
        path = 'COMPARISONS[{}]'.format(i)
        _mapping(entry, path)
        quantity = require(entry, 'QUANTITY', path)
        if quantity not in QUANTITIES:
            raise ConfigError(path + '.QUANTITY', 'unknown quantity {!r}; known: {}'.format(
                quantity, ', '.join(sorted(QUANTITIES))))
        params = {}
        for key in QUANTITIES[quantity]:
            params[key.lower()] = require(entry, key, path)
        for key in ('TIME', 'START'):
            if key in entry and key.lower() not in params:
                params[key.lower()] = entry[key]
        op = entry.get('OP', '~')
        if op not in OPS:
            raise ConfigError(path + '.OP', 'expected one of {}'.format(', '.join(OPS)))
        tolerances = {k: get_float(entry, k, path, positive=True)
                      for k in ('SE', 'REL', 'ABS') if entry.get(k) is not None}
        if op == '~' and len(tolerances) != 1:
            raise ConfigError(path, "OP '~' needs exactly one of SE, REL and ABS")
        out.append(ComparisonRequest(str(entry.get('NAME') or '{}[{}]'.format(quantity, i)),
                                     quantity, get_float(entry, 'TARGET', path), op, params,
                                     tolerances.get('SE'), tolerances.get('REL'),
                                     tolerances.get('ABS')))
    return out


def _check_references(sc):
    names = sc.density_names
    refs = [('CRITERIA[{}].DENSITY'.format(i), c.density) for i, c in enumerate(sc.criteria)]
    if sc.volume is not None:
        refs.append(('VOLUME.DENSITY', sc.volume.density))
    if sc.krylov is not None:
        refs.append(('KRYLOV.DENSITY', sc.krylov.density))
    if sc.transition is not None:
        refs.append(('TRANSITION.DENSITY', sc.transition.density))
    for path, name in refs:
        if name is not None and name not in names:
            raise ConfigError(path, 'unknown density {!r}; known: {}'.format(
                name, ', '.join(names) or 'none'))
    criteria = [c.name for c in sc.criteria]
    for i, comp in enumerate(sc.comparisons):
        target = comp.params.get('criterion')
        if target is not None and target not in criteria:
            raise ConfigError('COMPARISONS[{}].CRITERION'.format(i),
                              'unknown criterion name {!r}'.format(target))
        label = comp.params.get('label')
        if label is not None and (sc.simulation is None or
                                  label not in [m.label for m in sc.simulation.moments]):
            raise ConfigError('COMPARISONS[{}].LABEL'.format(i),
                              'no SIMULATION.MOMENTS entry labelled {!r}'.format(label))


def build_scenario(cfg, seed=None):
    """Validate a loaded config and build every stage request."""
    unknown = sorted(k for k in cfg if k not in TOP_LEVEL_KEYS)
    if unknown:
        raise ConfigError(unknown[0], 'unknown top-level field')
    name = str(require(cfg, 'NAME', ''))
    dim = get_int(cfg, 'DIM', '', minimum=1)
    notes = cfg.get('NOTES') or []
    if isinstance(notes, str):
        notes = [notes]
    sc = Scenario(
        name=name, dim=dim, cs=_coefficients(cfg, dim, name), config=cfg,
        description=str(cfg.get('DESCRIPTION', '')),
        densities=_densities(cfg, dim), solver=_solver(cfg, dim), volume=_volume(cfg),
        criteria=_criteria(cfg, dim), simulation=_simulation(cfg, dim, seed),
        ergodic=_ergodic(cfg, dim, seed), krylov=_krylov(cfg, dim, seed),
        transition=_transition(cfg, dim, seed), comparisons=_comparisons(cfg),
        notes=[str(n) for n in notes], seed_override=seed)
    _check_references(sc)
    logger.info('scenario %s: d=%d, %d densities, %d criteria', name, dim, len(sc.densities),
                len(sc.criteria))
    return sc


def load_scenario(source, seed=None):
    """Build a :class:`Scenario` from a file path or an already parsed mapping."""
    if isinstance(source, Scenario):
        return source
    if isinstance(source, str):
        cfg = update_config(source)
    else:
        cfg = load_config_dict(source)
    return build_scenario(cfg, seed=seed)
