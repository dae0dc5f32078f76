"""Finite-volume discretization of div(½(A + Cᵀ)∇u − uH) = 0 on a box mesh.

For an interior node p, axis k and side s = ±1 the face between p and
q = p + s·e_k contributes, divided by the cell volume,

    normal       ½M_kk (u_q − u_p) / h²
    tangential   (s/h) ½M_kl (u_{p+e_l} − u_{p−e_l} + u_{q+e_l} − u_{q−e_l}) / (4h)
    advective    −(s/h) H_k (u_p + u_q) / 2

with M = A + Cᵀ and H evaluated at the face center.
"""
import logging
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse

from ..calculus.fields import ExprField, Field
from ..dsl import ExprDomainError
from ..utils.env import parallel_map
from ..utils.errors import AssemblyError
from .mesh import BoxMesh

logger = logging.getLogger(__name__)

PECLET_WARN = 2.0


@dataclass
class LinearSystem:
    """Rows of the interior nodes; ``K`` acts on all nodes, ``K_II u_I = rhs``."""
    mesh: BoxMesh
    K: sparse.csr_matrix
    K_II: sparse.csr_matrix
    K_IB: sparse.csr_matrix
    rhs: np.ndarray
    boundary_values: np.ndarray
    peclet_max: float
    notes: list = field(default_factory=list)

    @property
    def n_interior(self):
        return self.K_II.shape[0]

    def full_vector(self, u_interior):
        u = np.empty(self.mesh.n_nodes)
        u[self.mesh.interior] = u_interior
        u[self.mesh.boundary] = self.boundary_values
        return u

    def residual(self, u_full):
        """max |K u| over interior rows for a vector on all nodes."""
        return float(np.max(np.abs(self.K @ u_full))) if self.K.shape[0] else 0.0


def boundary_data(mesh, boundary):
    """Dirichlet values on the boundary nodes: ``'ones'`` or an expression/field."""
    if isinstance(boundary, str) and boundary == 'ones':
        return np.ones(mesh.boundary.shape[0])
    f = boundary if isinstance(boundary, Field) else ExprField(boundary, mesh.dim)
    X = mesh.coordinates(mesh.boundary)
    return np.asarray(f.value(X), dtype=float)


def _face_block(cs, mesh, P, k, s):
    """COO triplets and Péclet maximum for faces (p, p + s·e_k), p in ``P``."""
    h = mesh.h
    d = mesh.dim
    strides = np.array([int(np.prod(mesh.shape[j + 1:])) for j in range(d)])
    flat_p = P @ strides
    flat_q = flat_p + s * strides[k]
    X = mesh.axis[P].astype(float)
    X[:, k] += 0.5 * s * h
    try:
        M = cs.matrix_flux(X)
        H = cs.h(X)
        A = cs.matrix_A(X)
    except ExprDomainError as exc:
        raise AssemblyError('coefficients undefined at a face center: {}'.format(exc),
                            point=getattr(exc, 'point', None))
    rows_local = np.arange(P.shape[0])
    diff = 0.5 * M[:, k, k] / (h * h)
    adv = -(s / h) * 0.5 * H[:, k]
    rows = [rows_local, rows_local]
    cols = [flat_p, flat_q]
    data = [-diff + adv, diff + adv]
    for l in range(d):
        if l == k:
            continue
        coef = (s / h) * 0.5 * M[:, k, l] / (4.0 * h)
        if not np.any(coef):
            continue
        for base in (flat_p, flat_q):
            rows += [rows_local, rows_local]
            cols += [base + strides[l], base - strides[l]]
            data += [coef, -coef]
    lam = np.linalg.eigvalsh(A)[:, 0]
    peclet = float(np.max(np.abs(H[:, k]) * h / lam)) if P.shape[0] else 0.0
    return np.concatenate(rows), np.concatenate(cols), np.concatenate(data), peclet


def assemble_system(cs, mesh, boundary='ones'):
    """Sparse nonsymmetric system for the interior nodes with Dirichlet data."""
    if cs.dim != mesh.dim:
        raise AssemblyError('mesh dimension {} does not match coefficients {}'.format(
            mesh.dim, cs.dim))
    P = mesh.index_tuples(mesh.interior)
    # row r of every block is interior node P[r]
    tasks = [(k, s) for k in range(mesh.dim) for s in (1, -1)]
    blocks = parallel_map(lambda ks: _face_block(cs, mesh, P, ks[0], ks[1]), tasks)
    rows = np.concatenate([b[0] for b in blocks])
    cols = np.concatenate([b[1] for b in blocks])
    data = np.concatenate([b[2] for b in blocks])
    peclet = max(b[3] for b in blocks)
    K = sparse.coo_matrix((data, (rows, cols)), shape=(P.shape[0], mesh.n_nodes)).tocsr()
    K.sum_duplicates()
    K.eliminate_zeros()
    K_II = K[:, mesh.interior].tocsr()
    K_IB = K[:, mesh.boundary].tocsr()
    g = boundary_data(mesh, boundary)
    rhs = -(K_IB @ g)
    notes = []
    if peclet > PECLET_WARN:
        logger.warning('cell Peclet number %.3g exceeds %.1f; central fluxes may oscillate',
                       peclet, PECLET_WARN)
        notes.append('cell Peclet number {:.3g} > {}'.format(peclet, PECLET_WARN))
    logger.debug('assembled %d interior rows, %d nonzeros, Peclet %.3g', K.shape[0], K.nnz,
                 peclet)
    return LinearSystem(mesh, K, K_II, K_IB, rhs, g, peclet, notes)
