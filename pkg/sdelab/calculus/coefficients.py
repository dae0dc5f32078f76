"""Coefficient sets (A, C, H) of the divergence-form generator and the derived drift G."""
import logging
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from ..dsl import Node, parse_expr
from ..dsl import nodes
from ..utils.errors import CoefficientError, EllipticityError
from .fields import ExprField, VectorField, as_points

logger = logging.getLogger(__name__)

DEFAULT_PROBE_POINTS = 1000
DEFAULT_PROBE_RADIUS = 10.0


def _to_node(value, dim, path):
    if isinstance(value, Node):
        if value.max_coordinate() >= dim:
            raise CoefficientError('{}: references x{} in dimension {}'.format(
                path, value.max_coordinate() + 1, dim))
        return value
    if isinstance(value, bool) or value is None:
        raise CoefficientError('{}: expected an expression, got {!r}'.format(path, value))
    return parse_expr(value, dim)


def _matrix_rows(rows, dim, name, strict_upper):
    """Normalize triangle-or-full matrix input to a full ``dim x dim`` list of nodes.

    Returns ``(upper, full_given)``: ``upper[i][j]`` for ``j >= i`` (``j > i`` when
    ``strict_upper``), and the parsed full matrix when one was given.
    """
    rows = [list(r) if isinstance(r, (list, tuple)) else [r] for r in (rows or [])]
    offset = 1 if strict_upper else 0
    triangle = [dim - i - offset for i in range(dim)]
    if strict_upper and len(rows) == dim - 1:
        rows = rows + [[]]
    if len(rows) == dim and [len(r) for r in rows] == triangle:
        upper = {}
        for i, row in enumerate(rows):
            for k, entry in enumerate(row):
                j = i + offset + k
                upper[i, j] = _to_node(entry, dim, '{}[{}][{}]'.format(name, i + 1, j + 1))
        return upper, None
    if len(rows) == dim and all(len(r) == dim for r in rows):
        full = [[_to_node(rows[i][j], dim, '{}[{}][{}]'.format(name, i + 1, j + 1))
                 for j in range(dim)] for i in range(dim)]
        upper = {(i, j): full[i][j] for i in range(dim) for j in range(i + offset, dim)}
        return upper, full
    raise CoefficientError('{}: expected {} upper-triangle rows of lengths {} or a full '
                           '{}x{} matrix'.format(name, dim, triangle, dim, dim))


def _symmetric(upper, dim):
    return [[upper[min(i, j), max(i, j)] for j in range(dim)] for i in range(dim)]


def _antisymmetric(upper, dim):
    out = [[nodes.ZERO] * dim for _ in range(dim)]
    for (i, j), c in upper.items():
        out[i][j] = c
        out[j][i] = nodes.neg(c)
    return out


def _stack(exprs, X, strict):
    return np.stack([e.evaluate(X, strict=strict) for e in exprs], axis=-1)


@dataclass
class EllipticityReport:
    min_eigenvalue: float
    max_eigenvalue: float
    witness: Tuple[float, ...]
    n_points: int
    n_skipped: int = 0

    def to_dict(self):
        return {'min_eigenvalue': self.min_eigenvalue, 'max_eigenvalue': self.max_eigenvalue,
                'witness': list(self.witness), 'n_points': self.n_points,
                'n_skipped': self.n_skipped}


@dataclass
class CoefficientSet:
    """A, C, H and the drift G = ½∇·(A + Cᵀ) + H, all as expression trees.

    ``A`` and ``C`` are full matrices built from a stored upper triangle, so
    ``A[i][j] is A[j][i]`` and ``C[j][i]`` is the negation of ``C[i][j]``.
    """
    dim: int
    A: List[List[Node]]
    C: List[List[Node]]
    H: List[Node]
    G: List[Node]
    ellipticity: Optional[EllipticityReport] = None
    singular_points: List[Tuple[float, ...]] = field(default_factory=list)
    name: Optional[str] = None
    metadata: dict = field(default_factory=dict)

    @property
    def flux_matrix(self):
        """M = A + Cᵀ, the matrix of the divergence-form flux ½M∇u."""
        return [[nodes.add(self.A[i][j], self.C[j][i]) for j in range(self.dim)]
                for i in range(self.dim)]

    @property
    def drift_field(self):
        return VectorField(self.dim, exprs=self.G, name='G')

    @property
    def h_field(self):
        return VectorField(self.dim, exprs=self.H, name='H')

    @property
    def divergence_A(self):
        """(∇·A)_i = Σ_j ∂_j a_ij."""
        out = []
        for i in range(self.dim):
            term = nodes.ZERO
            for j in range(self.dim):
                term = nodes.add(term, self.A[i][j].diff(j))
            out.append(term)
        return out

    def is_constant_diffusion(self):
        return all(a.max_coordinate() < 0 for row in self.A for a in row)

    @property
    def has_stream_part(self):
        """False when C is identically zero."""
        return any(not (isinstance(c, nodes.Const) and c.value == 0.0)
                   for row in self.C for c in row)


    def matrix_A(self, X, strict=True):
        X = as_points(X, self.dim)
        rows = [_stack(row, X, strict) for row in self.A]
        return np.stack(rows, axis=-2)

    def matrix_C(self, X, strict=True):
        X = as_points(X, self.dim)
        rows = [_stack(row, X, strict) for row in self.C]
        return np.stack(rows, axis=-2)

    def matrix_flux(self, X, strict=True):
        """(A + Cᵀ)(X), shape ``(..., d, d)``."""
        return self.matrix_A(X, strict) + np.swapaxes(self.matrix_C(X, strict), -1, -2)

    def drift(self, X, strict=True):
        return _stack(self.G, as_points(X, self.dim), strict)

    def h(self, X, strict=True):
        return _stack(self.H, as_points(X, self.dim), strict)

    def to_dict(self):
        d = self.dim
        return {
            'name': self.name,
            'dim': d,
            'A': [[self.A[i][j].to_str() for j in range(i, d)] for i in range(d)],
            'C': [[self.C[i][j].to_str() for j in range(i + 1, d)] for i in range(d - 1)],
            'H': [h.to_str() for h in self.H],
            'G': [g.to_str() for g in self.G],
            'ellipticity': self.ellipticity.to_dict() if self.ellipticity else None,
            'metadata': dict(self.metadata),
        }

    @classmethod
    def from_density(cls, A, rho, C=None, flux=None, **kwargs):
        """Coefficients for which ``rho dx`` is infinitesimally invariant.

        H = (A + Cᵀ)∇ρ/(2ρ) + F/ρ with a divergence-free flux F (default 0);
        the divergence-form flux ½(A + Cᵀ)∇ρ − ρH then equals −F.
        """
        dim = kwargs.get('dim') or len(A)
        if isinstance(rho, ExprField):
            rho_expr = rho.expr
        else:
            rho_expr = _to_node(rho, dim, 'FROM_DENSITY')
        rho_field = ExprField(rho_expr, dim)
        grad = rho_field.grad_exprs
        probe = dict(kwargs)
        probe['dim'] = dim
        base = build_coefficient_set(A, C, H=['0'] * dim, **probe)
        M = base.flux_matrix
        flux = flux or ['0'] * dim
        if len(flux) != dim:
            raise CoefficientError('FLUX: expected {} components, got {}'.format(dim, len(flux)))
        H = []
        for i in range(dim):
            acc = nodes.ZERO
            for j in range(dim):
                acc = nodes.add(acc, nodes.mul(M[i][j], grad[j]))
            term = nodes.div(acc, nodes.mul(nodes.Const(2.0), rho_expr))
            f_i = _to_node(flux[i], dim, 'FLUX[{}]'.format(i + 1))
            H.append(nodes.add(term, nodes.div(f_i, rho_expr)))
        G = _drift_from(base.A, base.C, H, dim)
        base.H = H
        base.G = G
        base.metadata['from_density'] = rho_expr.to_str()
        base.metadata['flux'] = [str(f) for f in flux]
        return base


def _drift_from(A, C, H, dim):
    """g_i = ½ Σ_j ∂_j(a_ij + c_ji) + h_i."""
    G = []
    for i in range(dim):
        acc = nodes.ZERO
        for j in range(dim):
            acc = nodes.add(acc, nodes.add(A[i][j], C[j][i]).diff(j))
        G.append(nodes.add(nodes.mul(nodes.Const(0.5), acc), H[i]))
    return G


def _h_from(A, C, G, dim):
    """Inverse of :func:`_drift_from`: h_i = g_i − ½ Σ_j ∂_j(a_ij + c_ji)."""
    zero = [nodes.ZERO] * dim
    half_div = _drift_from(A, C, zero, dim)
    return [nodes.sub(G[i], half_div[i]) for i in range(dim)]


def probe_ellipticity(A, dim, points):
    """Smallest/largest eigenvalue of A over ``points``; raise with a witness if A ≤ 0."""
    X = np.asarray(points, dtype=float).reshape(-1, dim)
    mats = np.stack([_stack(row, X, strict=False) for row in A], axis=-2)
    ok = np.isfinite(mats).all(axis=(-1, -2))
    skipped = int((~ok).sum())
    if skipped:
        logger.warning('ellipticity probe: A undefined at %d of %d points, skipped', skipped,
                       X.shape[0])
    if not ok.any():
        raise CoefficientError('A is undefined at every probe point')
    X, mats = X[ok], mats[ok]
    eig = np.linalg.eigvalsh(mats)
    lo = eig[:, 0]
    idx = int(np.argmin(lo))
    if not lo[idx] > 0:
        raise EllipticityError('A is not positive definite at {} (eigenvalue {:.3e})'.format(
            tuple(float(v) for v in X[idx]), lo[idx]), witness=tuple(X[idx]),
            eigenvalue=float(lo[idx]))
    return EllipticityReport(float(lo[idx]), float(eig[:, -1].max()), tuple(X[idx]),
                             int(X.shape[0]), skipped)


def build_coefficient_set(A, C=None, H=None, probes=None, G=None, dim=None,
                          allow_one_dim=False, probe_radius=DEFAULT_PROBE_RADIUS,
                          probe_points=DEFAULT_PROBE_POINTS, seed=0, singular_points=None,
                          name=None):
    """Validate (A, C, H) and assemble G symbolically.

    ``A`` is given as upper-triangle rows or a full matrix (a full matrix must be
    structurally symmetric), ``C`` as strictly-upper rows or a full matrix. Either
    ``H`` or the net drift ``G`` is given; with ``G`` the vector H is recovered as
    G − ½∇·(A + Cᵀ).
    """
    dim = dim or len(A)
    if dim < 1 or (dim < 2 and not allow_one_dim):
        raise CoefficientError('dimension must be at least 2, got {}'.format(dim))
    if (H is None) == (G is None):
        raise CoefficientError('exactly one of H and G must be given')

    upper_a, full_a = _matrix_rows(A, dim, 'A', strict_upper=False)
    if full_a is not None:
        for i in range(dim):
            for j in range(i + 1, dim):
                if full_a[i][j] != full_a[j][i]:
                    raise CoefficientError('A[{}][{}] and A[{}][{}] differ: A must be symmetric'
                                           .format(i + 1, j + 1, j + 1, i + 1))
    A_full = _symmetric(upper_a, dim)

    if C is None or (isinstance(C, (list, tuple)) and len(C) == 0):
        upper_c = {(i, j): nodes.ZERO for i in range(dim) for j in range(i + 1, dim)}
        full_c = None
    else:
        upper_c, full_c = _matrix_rows(C, dim, 'C', strict_upper=True)
    C_full = _antisymmetric(upper_c, dim)

    rng = np.random.default_rng(seed)
    sample = rng.uniform(-probe_radius, probe_radius, size=(int(probe_points), dim))
    if probes is not None and len(probes):
        sample = np.concatenate([np.asarray(probes, dtype=float).reshape(-1, dim), sample])
    if sample.shape[0] == 0:
        raise CoefficientError('probe set is empty')

    if full_c is not None:
        given = np.stack([np.stack([full_c[i][j].evaluate(sample, strict=False)
                                    for j in range(dim)], axis=-1) for i in range(dim)], axis=-2)
        skew = given + np.swapaxes(given, -1, -2)
        scale = 1.0 + np.nanmax(np.abs(given))
        if np.nanmax(np.abs(skew)) > 1e-12 * scale:
            raise CoefficientError('C must be antisymmetric with zero diagonal')

    if G is not None:
        if len(G) != dim:
            raise CoefficientError('G: expected {} components, got {}'.format(dim, len(G)))
        G_nodes = [_to_node(g, dim, 'G[{}]'.format(i + 1)) for i, g in enumerate(G)]
        H_nodes = _h_from(A_full, C_full, G_nodes, dim)
    else:
        if len(H) != dim:
            raise CoefficientError('H: expected {} components, got {}'.format(dim, len(H)))
        H_nodes = [_to_node(h, dim, 'H[{}]'.format(i + 1)) for i, h in enumerate(H)]
        G_nodes = _drift_from(A_full, C_full, H_nodes, dim)

    report = probe_ellipticity(A_full, dim, sample)
    logger.debug('coefficient set %s: eigenvalues of A in [%.3e, %.3e] over %d probes',
                 name or '<anonymous>', report.min_eigenvalue, report.max_eigenvalue,
                 report.n_points)
    singular = [tuple(float(v) for v in p) for p in (singular_points or [])]
    return CoefficientSet(dim, A_full, C_full, H_nodes, G_nodes, report, singular, name)
