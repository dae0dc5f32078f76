"""Drift decomposition, generators L, L′, L⁰ and the diffusion square root."""
import logging
from dataclasses import dataclass, field
from typing import List

import numpy as np

from ..dsl import nodes
from ..utils.errors import DegenerateDiffusionError
from .fields import ExprField, Field, VectorField, as_points
from .quadrature import QuadratureRule, bump_library, integrate, support_rule

logger = logging.getLogger(__name__)

GENERATOR_MODES = ('L', 'L_adjoint', 'L_zero')
DEGENERACY_TOL = 1e-12
LEAK_TOL = 1e-12


def as_field(f, dim):
    """Promote text, numbers and nodes to an :class:`ExprField`."""
    if isinstance(f, Field):
        return f
    return ExprField(f, dim)


def _require_density(rho, what):
    if rho is None:
        raise ValueError('{} requires a density'.format(what))


def log_derivative_beta(cs, rho):
    """β^{ρ,A}_i = ½ Σ_j (∂_j a_ij + a_ij ∂_j ρ / ρ).

    Symbolic for an analytic density, finite-difference based for a grid density.
    """
    _require_density(rho, 'log_derivative_beta')
    div_a = cs.divergence_A
    if rho.is_analytic:
        grad = rho.field.grad_exprs
        rho_expr = rho.expr
        exprs = []
        for i in range(cs.dim):
            acc = div_a[i]
            for j in range(cs.dim):
                acc = nodes.add(acc, nodes.div(nodes.mul(cs.A[i][j], grad[j]), rho_expr))
            exprs.append(nodes.mul(nodes.Const(0.5), acc))
        return VectorField(cs.dim, exprs=exprs, name='beta', guard=rho.checked_value)

    def beta(X, strict):
        r = rho.checked_value(X) if strict else rho.value(X, strict=False)
        grad = rho.gradient(X, strict=strict)
        A = cs.matrix_A(X, strict)
        dv = np.stack([e.evaluate(X, strict=strict) for e in div_a], axis=-1)
        return 0.5 * (dv + np.einsum('...ij,...j->...i', A, grad) / r[..., None])

    return VectorField(cs.dim, fn=beta, name='beta')


def beta_ct(cs, rho):
    """β^{ρ,Cᵀ}_i = ½ Σ_j ∂_j c_ji + Σ_j c_ji ∂_j ρ / (2ρ)."""
    _require_density(rho, 'beta_ct')
    if not rho.is_analytic:
        def fn(X, strict):
            r = rho.checked_value(X) if strict else rho.value(X, strict=False)
            grad = rho.gradient(X, strict=strict)
            Ct = np.swapaxes(cs.matrix_C(X, strict), -1, -2)
            dv = np.stack([sum(cs.C[j][i].diff(j).evaluate(X, strict=strict)
                               for j in range(cs.dim)) for i in range(cs.dim)], axis=-1)
            return 0.5 * dv + np.einsum('...ij,...j->...i', Ct, grad) / (2.0 * r[..., None])
        return VectorField(cs.dim, fn=fn, name='beta_ct')
    grad = rho.field.grad_exprs
    exprs = []
    for i in range(cs.dim):
        div_term = nodes.ZERO
        grad_term = nodes.ZERO
        for j in range(cs.dim):
            div_term = nodes.add(div_term, cs.C[j][i].diff(j))
            grad_term = nodes.add(grad_term, nodes.mul(cs.C[j][i], grad[j]))
        exprs.append(nodes.add(nodes.mul(nodes.Const(0.5), div_term),
                               nodes.div(grad_term, nodes.mul(nodes.Const(2.0), rho.expr))))
    return VectorField(cs.dim, exprs=exprs, name='beta_ct', guard=rho.checked_value)


@dataclass
class DivergenceReport:
    """max over the bump library of |∫⟨B, ∇f⟩ ρ dx|."""
    max_residual: float
    residuals: List[float]
    box: List[List[float]]
    nodes: int
    scheme: str

    def to_dict(self):
        return {'max_residual': self.max_residual, 'residuals': list(self.residuals),
                'box': self.box, 'nodes': self.nodes, 'scheme': self.scheme}


def default_rule(dim, half_width=4.0, nodes_per_axis=None, scheme='simpson'):
    if nodes_per_axis is None:
        nodes_per_axis = {1: 2001, 2: 241, 3: 61}.get(dim, 31)
    return QuadratureRule.box(half_width, dim, nodes_per_axis, scheme)


def _density_box_rule(rho, rule):
    if rule is not None:
        return rule
    if not rho.is_analytic:
        lower, upper = rho.field.lower, rho.field.upper
        n = {1: 2001, 2: 241, 3: 61}.get(rho.dim, 31)
        return QuadratureRule(lower, upper, n, 'simpson')
    return default_rule(rho.dim)


def _integration_rule(f, rho, rule):
    # bumps with a declared support are integrated on it when the density is analytic
    if not rho.is_analytic:
        return rule
    sub = support_rule(f, rule)
    return rule if sub is None else sub


def decompose_drift(cs, rho, rule=None, library=None):
    """Split G = β^{ρ,A} + B and measure how far B is from μ-divergence free."""
    beta = log_derivative_beta(cs, rho)
    B = cs.drift_field - beta
    B.name = 'B'
    rule = _density_box_rule(rho, rule)
    if library is None:
        library = bump_library(rule.lower, rule.upper)
    residuals = []
    for f in library:
        f = as_field(f, cs.dim)

        def integrand(X, f=f):
            return np.einsum('...i,...i->...', B.value(X), f.gradient(X)) * rho.value(X)

        residuals.append(abs(integrate(integrand, _integration_rule(f, rho, rule))))
    report = DivergenceReport(max(residuals) if residuals else 0.0, residuals,
                              [list(map(float, rule.lower)), list(map(float, rule.upper))],
                              int(rule.nodes[0]), rule.scheme)
    logger.info('drift decomposition: divergence residual %.3e over %d bumps',
                report.max_residual, len(residuals))
    return B, report


def generator_drift(cs, rho, mode):
    """Drift of the requested generator: G, 2β − G or β."""
    if mode not in GENERATOR_MODES:
        raise ValueError('unknown generator mode {!r}, expected one of {}'.format(
            mode, GENERATOR_MODES))
    if mode == 'L':
        return cs.drift_field
    _require_density(rho, 'mode {}'.format(mode))
    beta = log_derivative_beta(cs, rho)
    if mode == 'L_zero':
        return beta
    return beta.scaled(2.0) - cs.drift_field


class GeneratorField(Field):
    """(Lf)(x) = ½ Σ a_ij ∂_ij f + Σ b_i ∂_i f for the drift b of ``mode``."""

    def __init__(self, cs, f, drift, mode):
        self.cs = cs
        self.f = f
        self.drift = drift
        self.mode = mode
        self.dim = cs.dim
        self.name = '{}[{}]'.format(mode, f.describe())

    def value(self, X, strict=True):
        X = as_points(X, self.dim)
        A = self.cs.matrix_A(X, strict)
        hess = self.f.hessian(X, strict)
        grad = self.f.gradient(X, strict)
        b = self.drift.value(X, strict)
        return 0.5 * np.einsum('...ij,...ij->...', A, hess) + np.einsum('...i,...i->...', b, grad)


def apply_generator(cs, rho, f, mode='L'):
    """Pointwise L f, L′ f or L⁰ f as a field."""
    f = as_field(f, cs.dim)
    return GeneratorField(cs, f, generator_drift(cs, rho, mode), mode)


def _cutoff(rule):
    center = 0.5 * (rule.lower + rule.upper)
    half = 0.5 * (rule.upper - rule.lower)
    out = nodes.ONE
    for k in range(rule.dim):
        t = nodes.div(nodes.sub(nodes.Coord(k), nodes.Const(float(center[k]))),
                      nodes.Const(float(half[k])))
        out = nodes.mul(out, nodes.power(nodes.sub(nodes.ONE, nodes.power(t, 2)), 3))
    return out


def boundary_leak(f, rule):
    """max |f| on the faces of the box relative to max |f| on the nodes."""
    grids = np.meshgrid(*rule.axes, indexing='ij')
    X = np.stack(grids, axis=-1)
    values = np.abs(f.value(X, strict=False))
    scale = float(np.nanmax(values)) if values.size else 0.0
    edge = 0.0
    for k in range(rule.dim):
        edge = max(edge, float(np.nanmax(np.take(values, [0, -1], axis=k))))
    return edge, scale


@dataclass
class InvarianceResidual:
    value: float
    scale: float
    leaked: bool
    test_function: str = ''
    notes: List[str] = field(default_factory=list)

    def __float__(self):
        return self.value

    def to_dict(self):
        return {'value': self.value, 'scale': self.scale, 'leaked': self.leaked,
                'test_function': self.test_function}


def invariance_residual(cs, rho, f, rule):
    """∫ L f ρ dx by quadrature over the box of ``rule``.

    For an analytic density, a test function with a declared support inside the
    box is integrated on that support with a Gauss-Legendre rule instead.

    A test function that is not numerically zero on the faces is multiplied by
    the cutoff Π_k (1 − t_k²)³; the leak is logged and flagged in the result.
    """
    f = as_field(f, cs.dim)
    edge, scale = boundary_leak(f, rule)
    leaked = edge > LEAK_TOL * max(scale, 1e-300)
    notes = []
    if leaked:
        if not isinstance(f, ExprField):
            raise ValueError('cannot apply the cutoff to a non-symbolic test function')
        logger.warning('test function %s leaks outside the box (%.3e of %.3e); applying cutoff',
                       f.describe(), edge, scale)
        notes.append('support leak {:.3e}; cutoff applied'.format(edge))
        f = ExprField(nodes.mul(f.expr, _cutoff(rule)), cs.dim, piecewise=f.piecewise)
    Lf = apply_generator(cs, None, f, 'L')

    def integrand(X):
        return Lf.value(X) * rho.value(X)

    value = integrate(integrand, _integration_rule(f, rho, rule))
    return InvarianceResidual(value, scale * rule.volume, leaked, f.describe(), notes)


def symmetric_root(A, tol=DEGENERACY_TOL):
    """σ with σσ = A for one symmetric matrix; eigenpairs ordered by descending eigenvalue."""
    A = np.asarray(A, dtype=float)
    w, V = np.linalg.eigh(0.5 * (A + A.T))
    w, V = w[::-1], V[:, ::-1]
    trace = float(np.trace(A))
    if not w[-1] > tol * max(trace, 0.0) or not trace > 0:
        raise DegenerateDiffusionError('A is degenerate (smallest eigenvalue {:.3e}, '
                                       'trace {:.3e})'.format(w[-1], trace))
    for k in range(V.shape[1]):
        nz = np.flatnonzero(np.abs(V[:, k]) > 1e-14)
        if nz.size and V[nz[0], k] < 0:
            V[:, k] = -V[:, k]
    return (V * np.sqrt(w)) @ V.T


def diffusion_root(cs, x):
    """Symmetric positive-definite square root of A(x)."""
    x = np.asarray(x, dtype=float).reshape(-1)
    A = cs.matrix_A(x)[0]
    try:
        return symmetric_root(A)
    except DegenerateDiffusionError as exc:
        raise DegenerateDiffusionError(str(exc), point=tuple(x))


def diffusion_root_batch(A, tol=DEGENERACY_TOL):
    """Vectorized root for ``(N, d, d)``; degenerate or undefined entries come back flagged."""
    A = np.asarray(A, dtype=float)
    finite = np.isfinite(A).all(axis=(-1, -2))
    safe = np.where(finite[:, None, None], A, np.eye(A.shape[-1]))
    w, V = np.linalg.eigh(0.5 * (safe + np.swapaxes(safe, -1, -2)))
    trace = np.trace(safe, axis1=-2, axis2=-1)
    degenerate = ~finite | ~(w[:, 0] > tol * np.maximum(trace, 0.0)) | ~(trace > 0)
    root = np.einsum('nij,nj,nkj->nik', V, np.sqrt(np.clip(w, 0.0, None)), V)
    root[degenerate] = np.nan
    return root, degenerate
