import logging

import numpy as np

logger = logging.getLogger(__name__)

NUDGE = 1e-6
MAX_NUDGES = 8


def _node_hits(R, n, point):
    """True when ``point`` coincides with a node of the (R, n) grid."""
    for c in point:
        i = (c / R * n + n) / 2.0
        if abs(c) > R or abs(i - round(i)) > 1e-9:
            return False
    return True


class BoxMesh(object):
    """Uniform tensor mesh of ``[-R, R]^d`` with ``n`` cells per axis.

    Node ``i`` of every axis sits at ``R * (2i - n) / n``; ``n`` is even so the
    origin is a node. Nodes are numbered in C order of their index tuples.
    """

    def __init__(self, R, n, dim, singular_points=None):
        if not R > 0:
            raise ValueError('half-width must be positive, got {}'.format(R))
        if n < 2 or n % 2:
            raise ValueError('cell count must be even and >= 2, got {}'.format(n))
        self.dim = int(dim)
        self.n = int(n)
        self.requested_R = float(R)
        self.R = self._nudged(float(R), singular_points or [])
        self.h = 2.0 * self.R / self.n
        self.shape = (self.n + 1,) * self.dim
        self.axis = self.R * (2.0 * np.arange(self.n + 1) - self.n) / self.n

        index = np.indices(self.shape).reshape(self.dim, -1).T
        inner = np.all((index > 0) & (index < self.n), axis=1)
        self.interior = np.flatnonzero(inner)
        self.boundary = np.flatnonzero(~inner)
        self.origin = int(np.ravel_multi_index((self.n // 2,) * self.dim, self.shape))

    def _nudged(self, R, singular_points):
        points = [tuple(p) for p in singular_points if any(abs(c) > 0 for c in p)]
        for _ in range(MAX_NUDGES):
            hit = [p for p in points if _node_hits(R, self.n, p)]
            if not hit:
                return R
            new_R = R * (1.0 + NUDGE)
            logger.warning('mesh node on singular point %s; half-width %.12g -> %.12g',
                           hit[0], R, new_R)
            R = new_R
        return R

    @property
    def axes(self):
        return [self.axis] * self.dim

    @property
    def lower(self):
        return np.full(self.dim, -self.R)

    @property
    def upper(self):
        return np.full(self.dim, self.R)

    @property
    def n_nodes(self):
        return int(np.prod(self.shape))

    def index_tuples(self, flat):
        return np.stack(np.unravel_index(np.asarray(flat), self.shape), axis=-1)

    def coordinates(self, flat):
        return self.axis[self.index_tuples(flat)]

    def points(self):
        return np.stack(np.meshgrid(*self.axes, indexing='ij'), axis=-1)

    def inner_box(self, half_width):
        """Flat indices of nodes with every |x_k| <= half_width."""
        X = self.coordinates(np.arange(self.n_nodes))
        return np.flatnonzero(np.all(np.abs(X) <= half_width + 1e-12, axis=1))

    def describe(self):
        return {'R': self.R, 'n': self.n, 'd': self.dim, 'h': self.h,
                'requested_R': self.requested_R}
