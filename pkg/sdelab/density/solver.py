"""Invariant densities from the boundary-value problems on exhausting boxes."""
import logging
import math
from dataclasses import dataclass, field
from typing import List

import numpy as np
from scipy.sparse.linalg import LinearOperator, bicgstab, spilu, splu

from ..calculus.fields import DensityField, ExprField, Field
from ..calculus.operators import invariance_residual
from ..calculus.quadrature import QuadratureRule, bump_library
from ..utils.errors import CoefficientError, DensityError, SolverError
from .assemble import assemble_system
from .mesh import BoxMesh

logger = logging.getLogger(__name__)

DIRECT_LIMIT = 5000
RTOL = 1e-10
ILU_DROP_TOL = 1e-8
ILU_FILL_FACTOR = 30
EXACT_ERROR = 1e-12


def solve_linear(system, method='auto', rtol=RTOL, maxiter=None):
    """Solve ``K_II u = rhs``; returns the interior vector and solver diagnostics."""
    A = system.K_II
    b = system.rhs
    n = A.shape[0]
    if method == 'auto':
        method = 'direct' if n <= DIRECT_LIMIT else 'iterative'
    if method not in ('direct', 'iterative'):
        raise ValueError('unknown solver method {!r}'.format(method))
    b_norm = float(np.linalg.norm(b))
    if method == 'direct':
        try:
            u = splu(A.tocsc()).solve(b)
        except RuntimeError as exc:
            raise SolverError('sparse LU failed: {}'.format(exc))
        rel = float(np.linalg.norm(b - A @ u)) / b_norm if b_norm > 0 else 0.0
        logger.info('direct solve: %d unknowns, relative residual %.3e', n, rel)
        return u, {'method': 'direct', 'iterations': 0, 'relative_residual': rel,
                   'residual_history': []}

    maxiter = maxiter or 10 * n
    history = []
    if b_norm == 0:
        return np.zeros(n), {'method': 'iterative', 'iterations': 0,
                             'relative_residual': 0.0, 'residual_history': []}
    try:
        ilu = spilu(A.tocsc(), drop_tol=ILU_DROP_TOL, fill_factor=ILU_FILL_FACTOR)
    except RuntimeError as exc:
        raise SolverError('incomplete factorization failed: {}'.format(exc))
    precond = LinearOperator(A.shape, ilu.solve)

    def callback(xk):
        history.append(float(np.linalg.norm(b - A @ xk)) / b_norm)

    u, info = bicgstab(A, b, rtol=rtol, atol=0.0, maxiter=maxiter, M=precond,
                       callback=callback)
    rel = float(np.linalg.norm(b - A @ u)) / b_norm
    if info != 0 or not rel <= 10 * rtol:
        raise SolverError('BiCGStab did not converge (info {}, relative residual {:.3e} after {} '
                          'iterations)'.format(info, rel, len(history)), history)
    logger.info('BiCGStab: %d unknowns, %d iterations, relative residual %.3e', n,
                len(history), rel)
    return u, {'method': 'iterative', 'iterations': len(history), 'relative_residual': rel,
               'residual_history': history}


@dataclass
class DensityApproximation:
    """Node values of ρ_h on a box mesh, normalized to 1 at the origin."""
    mesh: BoxMesh
    values: np.ndarray
    min_value: float
    valid: bool
    diagnostics: dict = field(default_factory=dict)

    @property
    def flat(self):
        return self.values.reshape(-1)

    @property
    def origin_value(self):
        return float(self.flat[self.mesh.origin])

    def to_field(self, name=None):
        return DensityField.from_grid(self.mesh.axes, self.values,
                                      name=name or 'rho_h(R={:g}, n={})'.format(self.mesh.R,
                                                                                 self.mesh.n))

    def at(self, X):
        return self.to_field().value(X)

    def to_dict(self):
        out = dict(self.mesh.describe())
        out.update({'min_value': self.min_value, 'valid': self.valid,
                    'origin_value': self.origin_value})
        out.update({k: v for k, v in self.diagnostics.items() if k != 'residual_history'})
        return out

    def csv_header(self):
        return (['R', 'n', 'd', 'index'] + ['x{}'.format(k + 1) for k in range(self.mesh.dim)]
                + ['value'])

    def csv_rows(self):
        """One row per node; R, n and d repeat on every row so the mesh can be rebuilt."""
        mesh = self.mesh
        X = mesh.coordinates(np.arange(mesh.n_nodes))
        for i in range(mesh.n_nodes):
            yield ([float(mesh.R), int(mesh.n), int(mesh.dim), i] + [float(c) for c in X[i]]
                   + [float(self.flat[i])])


def solve_density(cs, R, n, boundary='ones', method='auto', rtol=RTOL, maxiter=None):
    """Solve the box problem and normalize by the origin value.

    The default boundary value 1 gives the exhaustion construction; an
    expression boundary is used to validate against a known solution.
    """
    if not 2 <= cs.dim <= 3:
        raise CoefficientError('density solver supports d in {2, 3}, got d=' + str(cs.dim))
    mesh = BoxMesh(R, n, cs.dim, cs.singular_points)
    system = assemble_system(cs, mesh, boundary)
    u_interior, diag = solve_linear(system, method, rtol, maxiter)
    u = system.full_vector(u_interior)
    origin = u[mesh.origin]
    if not origin > 0:
        raise DensityError('non-positive value {:.3e} at the origin'.format(origin),
                           point=(0.0,) * cs.dim)
    values = u / origin
    residual = system.residual(values)
    idx = int(np.argmin(values))
    min_value = float(values[idx])
    valid = min_value > 0
    if not valid:
        logger.warning('density approximation is not positive: min %.3e at %s', min_value,
                       tuple(mesh.coordinates(idx)))
    diag.update({'residual': residual, 'peclet_max': system.peclet_max,
                 'interior_nodes': system.n_interior,
                 'boundary': boundary if isinstance(boundary, str) else str(boundary),
                 'notes': list(system.notes)})
    return DensityApproximation(mesh, values.reshape(mesh.shape), min_value, valid, diag)


@dataclass
class SolutionResidualReport:
    max_residual: float
    residuals: List[float]
    scale: float
    rule: str

    def to_dict(self):
        return {'max_residual': self.max_residual, 'residuals': list(self.residuals),
                'scale': self.scale, 'rule': self.rule}


def invariance_of_solution(cs, rho, rule=None, library=None):
    """Max invariance residual of a computed (or sampled) density over the bump library."""
    if isinstance(rho, DensityApproximation):
        if rule is None:
            rule = QuadratureRule(rho.mesh.lower, rho.mesh.upper, rho.mesh.n + 1, 'simpson')
        rho = rho.to_field()
    if rule is None:
        if rho.is_analytic:
            raise ValueError('an analytic density needs an explicit quadrature rule')
        rule = QuadratureRule(rho.field.lower, rho.field.upper, len(rho.field.axes[0]),
                              'simpson')
    library = library if library is not None else bump_library(rule.lower, rule.upper)
    results = [invariance_residual(cs, rho, f, rule) for f in library]
    residuals = [abs(r.value) for r in results]
    scale = max(r.scale for r in results) if results else 0.0
    return SolutionResidualReport(max(residuals) if residuals else 0.0, residuals, scale,
                                  rule.describe())


@dataclass
class ConvergenceReport:
    n: List[int]
    errors: List[float]
    orders: List[float]
    exact: bool
    peclet_max: float
    notes: List[str] = field(default_factory=list)

    @property
    def order(self):
        if self.exact:
            return 'exact'
        return self.orders[-1] if self.orders else float('nan')

    def to_dict(self):
        return {'n': list(self.n), 'errors': list(self.errors), 'orders': list(self.orders),
                'order': self.order, 'exact': self.exact, 'peclet_max': self.peclet_max,
                'notes': list(self.notes)}


def max_error(approx, oracle):
    """Max-norm error over interior nodes against ``oracle / oracle(0)``."""
    f = oracle if isinstance(oracle, Field) else ExprField(oracle, approx.mesh.dim)
    X = approx.mesh.coordinates(approx.mesh.interior)
    exact = f.value(X)
    exact0 = float(f.value(np.zeros((1, approx.mesh.dim)))[0])
    return float(np.max(np.abs(approx.flat[approx.mesh.interior] - exact / exact0)))


def convergence_order(cs, R, n_coarse, boundary, oracle, levels=2, method='auto'):
    """Observed order log₂(err(h)/err(h/2)) across ``levels`` successive refinements."""
    ns = [n_coarse * 2 ** k for k in range(levels)]
    errors = []
    peclet = 0.0
    for n in ns:
        approx = solve_density(cs, R, n, boundary=boundary, method=method)
        errors.append(max_error(approx, oracle))
        peclet = max(peclet, approx.diagnostics['peclet_max'])
        logger.info('convergence: n=%d max error %.3e', n, errors[-1])
    exact = all(e <= EXACT_ERROR for e in errors)
    orders = []
    if not exact:
        for a, b in zip(errors[:-1], errors[1:]):
            orders.append(math.log2(a / b) if a > 0 and b > 0 else float('nan'))
    notes = []
    if peclet > 2.0:
        notes.append('cell Peclet number {:.3g} > 2'.format(peclet))
    return ConvergenceReport(ns, errors, orders, exact, peclet, notes)


def nested_agreement(small, large, half_width):
    """Max relative difference of two normalized solutions on the common inner box."""
    X = small.mesh.coordinates(small.mesh.inner_box(half_width))
    a = small.to_field().value(X)
    b = large.to_field().value(X)
    return float(np.max(np.abs(a - b) / np.abs(b)))


def spread_against(approx, reference, half_width):
    """Relative spread (max − min)/mean of ρ_h / reference on the inner box."""
    f = reference if isinstance(reference, Field) else ExprField(reference, approx.mesh.dim)
    idx = approx.mesh.inner_box(half_width)
    ratio = approx.flat[idx] / f.value(approx.mesh.coordinates(idx))
    return float((ratio.max() - ratio.min()) / ratio.mean())
