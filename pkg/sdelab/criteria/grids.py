"""Sampling grids for the inequality checks."""
from dataclasses import dataclass

import numpy as np

from ..utils.config import get_float, get_int
from ..utils.errors import ConfigError

DEFAULT_RADIAL = {1: 2000, 2: 200, 3: 100}
DEFAULT_ANGULAR = {2: 256, 3: 64}


@dataclass
class RegionGrid:
    points: np.ndarray
    description: dict

    @property
    def dim(self):
        return self.points.shape[-1]

    def __len__(self):
        return self.points.shape[0]


def sphere_points(dim, n_angular):
    if dim == 1:
        return np.array([[-1.0], [1.0]])
    if dim == 2:
        theta = 2.0 * np.pi * np.arange(n_angular) / n_angular
        return np.stack([np.cos(theta), np.sin(theta)], axis=-1)
    if dim == 3:
        ct = -1.0 + (2.0 * np.arange(n_angular) + 1.0) / n_angular
        phi = 2.0 * np.pi * np.arange(n_angular) / n_angular
        c, p = np.meshgrid(ct, phi, indexing='ij')
        s = np.sqrt(1.0 - c ** 2)
        return np.stack([s * np.cos(p), s * np.sin(p), c], axis=-1).reshape(-1, 3)
    raise ValueError('no sphere sampling for d={}'.format(dim))


def annulus_grid(dim, r_min, r_max, n_radial=None, n_angular=None):
    """Radial × angular samples of {r_min ≤ ‖x‖ ≤ r_max} (an interval pair for d=1)."""
    if not 0 <= r_min < r_max:
        raise ValueError('annulus needs 0 <= r_min < r_max, got [{}, {}]'.format(r_min, r_max))
    n_radial = n_radial or DEFAULT_RADIAL.get(dim, 50)
    n_angular = n_angular or DEFAULT_ANGULAR.get(dim, 2)
    r = np.linspace(r_min, r_max, n_radial)
    dirs = sphere_points(dim, n_angular)
    points = (r[:, None, None] * dirs[None, :, :]).reshape(-1, dim)
    if r_min == 0:
        # the origin appears once per direction
        points = np.concatenate([np.zeros((1, dim)), points[dirs.shape[0]:]])
    return RegionGrid(points, {'type': 'annulus', 'r_min': float(r_min), 'r_max': float(r_max),
                               'n_radial': int(n_radial), 'n_angular': int(n_angular)})


def box_grid(lower, upper, n):
    lower = np.atleast_1d(np.asarray(lower, dtype=float))
    upper = np.atleast_1d(np.asarray(upper, dtype=float))
    axes = [np.linspace(a, b, n) for a, b in zip(lower, upper)]
    points = np.stack(np.meshgrid(*axes, indexing='ij'), axis=-1).reshape(-1, lower.shape[0])
    return RegionGrid(points, {'type': 'box', 'lower': lower.tolist(), 'upper': upper.tolist(),
                               'n': int(n)})


def interval_grid(low, high, n, open_low=False):
    """``n`` points of [low, high]; with ``open_low`` the grid is (low, high]."""
    if open_low:
        x = low + (high - low) * np.arange(1, n + 1) / n
    else:
        x = np.linspace(low, high, n)
    return RegionGrid(x[:, None], {'type': 'interval', 'low': float(low), 'high': float(high),
                                   'n': int(n), 'open_low': bool(open_low)})


def region_from_cfg(cfg, dim, default_r_min=0.0, default_r_max=10.0, path='REGION'):
    """Build a grid from a REGION block; ``None`` gives the default annulus."""
    if cfg is None:
        return annulus_grid(dim, default_r_min, default_r_max)
    kind = str(cfg.get('TYPE', 'annulus')).lower()
    if kind == 'annulus':
        r_min = get_float(cfg, 'R_MIN', path, default=default_r_min)
        r_max = get_float(cfg, 'R_MAX', path, default=default_r_max)
        if not 0 <= r_min < r_max:
            raise ConfigError(path, 'annulus needs 0 <= R_MIN < R_MAX')
        n_radial = cfg.get('N_RADIAL')
        n_angular = cfg.get('N_ANGULAR')
        return annulus_grid(dim, r_min, r_max,
                            get_int(cfg, 'N_RADIAL', path) if n_radial else None,
                            get_int(cfg, 'N_ANGULAR', path) if n_angular else None)
    if kind == 'box':
        lower = cfg.get('LOWER')
        upper = cfg.get('UPPER')
        if lower is None or upper is None or len(lower) != dim or len(upper) != dim:
            raise ConfigError(path, 'box needs LOWER and UPPER with {} entries'.format(dim))
        return box_grid(lower, upper, get_int(cfg, 'N', path, default=101, minimum=2))
    if kind == 'interval':
        if dim != 1:
            raise ConfigError(path, 'interval regions are one-dimensional')
        return interval_grid(get_float(cfg, 'LOW', path), get_float(cfg, 'HIGH', path),
                             get_int(cfg, 'N', path, default=10000, minimum=2),
                             bool(cfg.get('OPEN_LOW', False)))
    raise ConfigError(path + '.TYPE', 'unknown region type {!r}'.format(kind))


def growth_check(field, dim, r_min, r_max, count=12, n_angular=None):
    """Sampled inf of ``field`` over spheres of geometrically increasing radius.

    Returns the table and whether the infima increase strictly; this is the
    reported stand-in for "g → ∞", never a certificate.
    """
    r_min = max(r_min, 1e-3)
    radii = np.geomspace(r_min, r_max, count)
    dirs = sphere_points(dim, n_angular or {1: 2, 2: 64, 3: 16}.get(dim, 8))
    table = []
    for r in radii:
        values = field.value(r * dirs, strict=False)
        table.append({'radius': float(r), 'inf': float(np.nanmin(values))})
    infs = [row['inf'] for row in table]
    growing = all(b > a for a, b in zip(infs, infs[1:]))
    return table, growing
