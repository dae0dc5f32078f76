"""Ball and annulus masses μ(B_r) and the radial integrands v₁, v₂ of the volume test."""
import math
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
from scipy.special import roots_legendre

from ..calculus.fields import VectorField
from ..calculus.operators import beta_ct
from ..dsl import parse_expr
from ..utils.errors import VolumeError

RADIAL_NODES = 16
ANGULAR_NODES = {2: 256, 3: 64}
POLAR_NODES = 32


def _directions(dim, n_angular=None):
    """Unit directions and weights integrating over the sphere S^{d-1}."""
    if dim == 1:
        return np.array([[1.0], [-1.0]]), np.array([1.0, 1.0])
    if dim == 2:
        m = n_angular or ANGULAR_NODES[2]
        theta = 2.0 * np.pi * (np.arange(m) + 0.5) / m
        return np.stack([np.cos(theta), np.sin(theta)], axis=-1), np.full(m, 2.0 * np.pi / m)
    if dim == 3:
        m = n_angular or ANGULAR_NODES[3]
        t, wt = roots_legendre(POLAR_NODES)
        phi = 2.0 * np.pi * (np.arange(m) + 0.5) / m
        ct, ph = np.meshgrid(t, phi, indexing='ij')
        st = np.sqrt(1.0 - ct ** 2)
        dirs = np.stack([st * np.cos(ph), st * np.sin(ph), ct], axis=-1).reshape(-1, 3)
        w = np.multiply.outer(wt, np.full(m, 2.0 * np.pi / m)).reshape(-1)
        return dirs, w
    raise VolumeError('volume profiles support d <= 3, got d={}'.format(dim))


def shell_integral(fn, dim, a, b, n_radial=RADIAL_NODES, n_angular=None):
    """∫_{a ≤ ‖x‖ ≤ b} fn(x) dx by composite Gauss–Legendre in r times a sphere rule."""
    if b <= a:
        return 0.0
    dirs, wdir = _directions(dim, n_angular)
    t, wt = roots_legendre(n_radial)
    pieces = max(1, int(math.ceil((b - a) / (0.25 + 0.05 * a))))
    edges = np.linspace(a, b, pieces + 1)
    total = []
    for lo, hi in zip(edges[:-1], edges[1:]):
        r = 0.5 * (hi - lo) * t + 0.5 * (hi + lo)
        wr = 0.5 * (hi - lo) * wt * r ** (dim - 1)
        X = r[:, None, None] * dirs[None, :, :]
        values = np.asarray(fn(X), dtype=float)
        total.append(math.fsum((values * wr[:, None] * wdir[None, :]).ravel()))
    return math.fsum(total)


@dataclass
class VolumeProfile:
    radii: List[float]
    mass: List[float]
    v1: Optional[List[float]] = None
    v2: Optional[List[float]] = None
    annuli: List[dict] = field(default_factory=list)

    def rows(self):
        for k, r in enumerate(self.radii):
            yield [r, self.mass[k],
                   self.v1[k] if self.v1 is not None else float('nan'),
                   self.v2[k] if self.v2 is not None else float('nan')]

    def to_dict(self):
        return {'radii': list(self.radii), 'mass': list(self.mass), 'v1': self.v1,
                'v2': self.v2, 'annuli': list(self.annuli)}


def _domain_radius(rho):
    if rho.is_analytic:
        return math.inf
    return float(np.min(np.minimum(-rho.field.lower, rho.field.upper)))


def _cumulative(fn, dim, radii, **kwargs):
    out = []
    acc = []
    prev = 0.0
    for r in radii:
        acc.append(shell_integral(fn, dim, prev, r, **kwargs))
        out.append(math.fsum(acc))
        prev = r
    return out


def volume_profile(rho, radii, cs=None, bbar=None, annulus_radii=None, n_radial=RADIAL_NODES,
                   n_angular=None):
    """μ(B_r) per radius, optional μ(B_{4n}∖B_{2n}), and v₁, v₂ when ``cs`` is given.

    v₁(r) = ∫_{B_r} ⟨Ax, x⟩/‖x‖² dμ and v₂(r) = ∫_{B_r} |⟨β^{ρ,Cᵀ} + B̄, x⟩| dμ.
    """
    radii = [float(r) for r in radii]
    if not radii or any(r <= 0 for r in radii) or any(b <= a for a, b in zip(radii, radii[1:])):
        raise VolumeError('radii must be positive and strictly increasing')
    limit = _domain_radius(rho)
    needed = max(radii + [4.0 * n for n in (annulus_radii or [])])
    if needed > limit * (1 + 1e-12):
        raise VolumeError('radius {:g} exceeds the density domain {:g}'.format(needed, limit))
    dim = rho.dim
    kw = {'n_radial': n_radial, 'n_angular': n_angular}

    def mass_density(X):
        return rho.value(X)

    profile = VolumeProfile(radii, _cumulative(mass_density, dim, radii, **kw))
    if cs is not None:
        def v1_density(X):
            A = cs.matrix_A(X)
            quad = np.einsum('...i,...ij,...j->...', X, A, X) / np.sum(X * X, axis=-1)
            return quad * rho.value(X)

        profile.v1 = _cumulative(v1_density, dim, radii, **kw)
        if not cs.has_stream_part and bbar is None:
            # β^{ρ,Cᵀ} vanishes with C
            profile.v2 = [0.0] * len(radii)
        else:
            profile.v2 = _cumulative(_v2_density(cs, rho, bbar, dim), dim, radii, **kw)
    for n in annulus_radii or []:
        value = shell_integral(mass_density, dim, 2.0 * n, 4.0 * n, **kw)
        profile.annuli.append({'n': float(n), 'inner': 2.0 * n, 'outer': 4.0 * n,
                               'mass': value})
    return profile


def _v2_density(cs, rho, bbar, dim):
    flow = beta_ct(cs, rho)
    if bbar is not None:
        if not isinstance(bbar, VectorField):
            bbar = VectorField(dim, exprs=[parse_expr(b, dim) for b in bbar])
        flow = flow + bbar

    def v2_density(X):
        return np.abs(np.einsum('...i,...i->...', flow.value(X), X)) * rho.value(X)

    return v2_density
